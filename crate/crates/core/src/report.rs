//! JSON shapes for fits, comparisons, games and stability reports.
//!
//! These are the documented output schemas of the CLI and the pipeline:
//! a fit serializes as a fixed-effect block (coefficient, SE, p), a
//! random-effect block (variance, SE, p) and a goodness-of-fit block
//! (log-likelihood, AIC, BIC), optionally followed by a comparison block
//! against the matching null model.

use serde::Serialize;

use crate::builder::StabilityReport;
use crate::game::{GameExchange, PropertyWitness};
use crate::model::{MixedModelFit, ModelComparison};

#[derive(Debug, Clone, Serialize)]
pub struct FixedEffectJson {
    pub name: String,
    pub coefficient: f64,
    pub se: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomEffectJson {
    pub variance: f64,
    pub se: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodnessJson {
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_groups: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariancePartitionJson {
    pub level2_share: f64,
    pub level1_share: f64,
}

/// One model table: the layout shared by every fit the toolkit prints.
#[derive(Debug, Clone, Serialize)]
pub struct FitTableJson {
    pub response: String,
    pub grouping: String,
    pub fixed: Vec<FixedEffectJson>,
    pub random: RandomBlockJson,
    pub fit: GoodnessJson,
    pub variance_partition: VariancePartitionJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RandomBlockJson {
    pub level2: RandomEffectJson,
    pub level1: RandomEffectJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonJson {
    pub lrt_statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub delta_aic: f64,
    pub delta_bic: f64,
}

impl FitTableJson {
    pub fn from_fit(fit: &MixedModelFit, comparison: Option<&ModelComparison>) -> Self {
        let (level2_share, level1_share) = fit.variance_partition();
        FitTableJson {
            response: fit.spec.response.clone(),
            grouping: fit.spec.grouping.clone(),
            fixed: fit
                .fixed
                .iter()
                .map(|f| FixedEffectJson {
                    name: f.name.clone(),
                    coefficient: f.estimate,
                    se: f.se,
                    p_value: f.p_value,
                })
                .collect(),
            random: RandomBlockJson {
                level2: RandomEffectJson {
                    variance: fit.tau2.estimate,
                    se: fit.tau2.se,
                    p_value: fit.tau2.p_value,
                },
                level1: RandomEffectJson {
                    variance: fit.sigma2.estimate,
                    se: fit.sigma2.se,
                    p_value: fit.sigma2.p_value,
                },
            },
            fit: GoodnessJson {
                loglik: fit.loglik,
                aic: fit.aic,
                bic: fit.bic,
                n_obs: fit.n_obs,
                n_groups: fit.n_groups,
            },
            variance_partition: VariancePartitionJson {
                level2_share,
                level1_share,
            },
            comparison: comparison.map(ComparisonJson::from_comparison),
        }
    }
}

impl ComparisonJson {
    pub fn from_comparison(cmp: &ModelComparison) -> Self {
        ComparisonJson {
            lrt_statistic: cmp.lrt_statistic,
            df: cmp.df,
            p_value: cmp.p_value,
            delta_aic: cmp.delta_aic,
            delta_bic: cmp.delta_bic,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessJson {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalitions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<f64>,
}

impl WitnessJson {
    pub fn from_witness(w: &PropertyWitness) -> Self {
        match &w.witness {
            Some(v) => WitnessJson {
                holds: w.holds,
                coalitions: Some(v.coalitions.iter().map(|c| c.label()).collect()),
                lhs: Some(v.lhs),
                rhs: Some(v.rhs),
            },
            None => WitnessJson {
                holds: w.holds,
                coalitions: None,
                lhs: None,
                rhs: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockingJson {
    pub coalition: String,
    pub deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityJson {
    pub group_id: String,
    pub players: Vec<String>,
    pub game: GameExchange,
    pub additive: WitnessJson,
    pub superadditive: WitnessJson,
    pub core_empty: bool,
    pub blocking_coalitions: Vec<BlockingJson>,
    pub grand_coalition_gain: f64,
}

impl StabilityJson {
    pub fn from_report(report: &StabilityReport, players: &[String]) -> Self {
        StabilityJson {
            group_id: report.group_id.clone(),
            players: players.to_vec(),
            game: report.game.to_exchange(),
            additive: WitnessJson::from_witness(&report.additive),
            superadditive: WitnessJson::from_witness(&report.superadditive),
            core_empty: report.core_empty,
            blocking_coalitions: report
                .blocking_coalitions
                .iter()
                .map(|b| BlockingJson {
                    coalition: b.coalition.label(),
                    deficit: b.deficit,
                })
                .collect(),
            grand_coalition_gain: report.grand_coalition_gain,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapleyRowJson {
    pub session_id: String,
    pub team_id: String,
    pub student_id: String,
    pub shapley: f64,
}
