//! Two-level random-intercept linear models estimated by maximum likelihood.
//!
//! The marginal model is `y_ij = β'x_ij + u_j + e_ij` with `u_j ~ N(0, τ²)`
//! per group and `e_ij ~ N(0, σ²)` per observation. For a fixed variance
//! ratio `λ = τ²/σ²` the fixed effects and σ² have closed-form generalized
//! least-squares solutions, so the fit reduces to a one-dimensional profile
//! likelihood in λ, maximized by a grid scan plus golden-section refinement
//! on `log(λ+ε)` with the `λ = 0` boundary checked explicitly.
//!
//! Estimation is plain ML (not REML) so that models differing in fixed
//! effects remain comparable by AIC, BIC and likelihood-ratio tests.
//! Variance-component p-values are Wald z-tests from the numerically
//! differentiated observed information; at the `τ² = 0` boundary these are
//! conservative and should be read as descriptive.

mod fit;
mod frame;

pub use fit::{fit, FitProblem};
pub use frame::{Column, ModelFrame};

use serde::Serialize;
use thiserror::Error;

use crate::dataset::SessionDataset;
use crate::stats::chi_square_sf;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown column '{name}'; valid columns: {valid}")]
    UnknownColumn { name: String, valid: String },
    #[error("column '{name}' has {got} values, expected {expected}")]
    ColumnLength {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("column '{name}' is not continuous")]
    NotContinuous { name: String },
    #[error("column '{name}' is not categorical")]
    NotCategorical { name: String },
    #[error("'{name}' cannot appear as both response/grouping and predictor")]
    SpecOverlap { name: String },
    #[error("duplicate predictor '{name}'")]
    DuplicatePredictor { name: String },
    #[error("need at least 2 groups, got {got}")]
    TooFewGroups { got: usize },
    #[error("missing value in column '{column}' at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("profile likelihood search did not converge within the iteration bound")]
    Convergence { best: Box<MixedModelFit> },
    #[error("models are not nested: '{detail}'")]
    NotNested { detail: String },
    #[error("fits come from different data: {detail}")]
    DataMismatch { detail: String },
}

/// What to regress on what, grouped by which column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixedModelSpec {
    pub response: String,
    /// Fixed-effect columns in order; empty means the null (intercept-only) model.
    pub fixed_predictors: Vec<String>,
    pub grouping: String,
}

impl MixedModelSpec {
    pub fn new(response: &str, predictors: &[&str], grouping: &str) -> Self {
        MixedModelSpec {
            response: response.to_string(),
            fixed_predictors: predictors.iter().map(|s| s.to_string()).collect(),
            grouping: grouping.to_string(),
        }
    }

    pub fn null_model(response: &str, grouping: &str) -> Self {
        MixedModelSpec::new(response, &[], grouping)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.fixed_predictors {
            if p == &self.response || p == &self.grouping {
                return Err(ModelError::SpecOverlap { name: p.clone() });
            }
            if !seen.insert(p.clone()) {
                return Err(ModelError::DuplicatePredictor { name: p.clone() });
            }
        }
        if self.response == self.grouping {
            return Err(ModelError::SpecOverlap {
                name: self.response.clone(),
            });
        }
        Ok(())
    }
}

/// One fixed-effect estimate with its Wald test.
#[derive(Debug, Clone, Serialize)]
pub struct FixedEffect {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
}

/// One variance component with its Wald test.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceComponent {
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
}

/// A fitted two-level random-intercept model.
#[derive(Debug, Clone, Serialize)]
pub struct MixedModelFit {
    pub spec: MixedModelSpec,
    /// Intercept first, then predictors in spec order (categoricals expanded
    /// to reference-coded indicators).
    pub fixed: Vec<FixedEffect>,
    /// Level-2 (between-group) variance τ².
    pub tau2: VarianceComponent,
    /// Level-1 (within-group) variance σ².
    pub sigma2: VarianceComponent,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_groups: usize,
}

impl MixedModelFit {
    /// Parameter count used by AIC/BIC: all fixed coefficients plus the two
    /// variance components.
    pub fn k(&self) -> usize {
        self.fixed.len() + 2
    }

    /// Between-group and within-group shares of the total variance.
    pub fn variance_partition(&self) -> (f64, f64) {
        variance_shares(self.tau2.estimate, self.sigma2.estimate)
    }
}

/// `(level-2 share, level-1 share)`; the two sum to 1 exactly.
pub fn variance_shares(tau2: f64, sigma2: f64) -> (f64, f64) {
    let level2 = tau2 / (tau2 + sigma2);
    (level2, 1.0 - level2)
}

/// Likelihood-ratio comparison of two nested fits.
#[derive(Debug, Clone, Serialize)]
pub struct ModelComparison {
    pub null_fit: MixedModelFit,
    pub full_fit: MixedModelFit,
    pub lrt_statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub delta_aic: f64,
    pub delta_bic: f64,
}

/// Compare nested fits on identical data: LRT with one chi-square degree of
/// freedom per added design column, plus AIC/BIC deltas (full − null).
pub fn compare(
    null_fit: &MixedModelFit,
    full_fit: &MixedModelFit,
) -> Result<ModelComparison, ModelError> {
    if null_fit.spec.response != full_fit.spec.response
        || null_fit.spec.grouping != full_fit.spec.grouping
    {
        return Err(ModelError::NotNested {
            detail: format!(
                "response/grouping differ: {}/{} vs {}/{}",
                null_fit.spec.response,
                null_fit.spec.grouping,
                full_fit.spec.response,
                full_fit.spec.grouping
            ),
        });
    }
    for p in &null_fit.spec.fixed_predictors {
        if !full_fit.spec.fixed_predictors.contains(p) {
            return Err(ModelError::NotNested {
                detail: format!("null predictor '{p}' missing from the full model"),
            });
        }
    }
    if null_fit.n_obs != full_fit.n_obs || null_fit.n_groups != full_fit.n_groups {
        return Err(ModelError::DataMismatch {
            detail: format!(
                "{} obs / {} groups vs {} obs / {} groups",
                null_fit.n_obs, null_fit.n_groups, full_fit.n_obs, full_fit.n_groups
            ),
        });
    }
    if full_fit.fixed.len() < null_fit.fixed.len() {
        return Err(ModelError::NotNested {
            detail: "full model has fewer coefficients than the null".to_string(),
        });
    }
    let df = full_fit.fixed.len() - null_fit.fixed.len();
    let lrt_statistic = (2.0 * (full_fit.loglik - null_fit.loglik)).max(0.0);
    Ok(ModelComparison {
        null_fit: null_fit.clone(),
        full_fit: full_fit.clone(),
        lrt_statistic,
        df,
        p_value: chi_square_sf(lrt_statistic, df),
        delta_aic: full_fit.aic - null_fit.aic,
        delta_bic: full_fit.bic - null_fit.bic,
    })
}

/// One screened candidate predictor.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScreeningRow {
    Fitted {
        predictor: String,
        /// Non-intercept coefficients of the single-predictor model.
        coefficients: Vec<FixedEffect>,
        df: usize,
        lrt_statistic: f64,
        lrt_p: f64,
        aic: f64,
        bic: f64,
        flagged: bool,
    },
    Failed {
        predictor: String,
        error: String,
    },
}

/// Null model plus one single-predictor fit per candidate, in given order.
#[derive(Debug, Clone, Serialize)]
pub struct ScreeningTable {
    pub response: String,
    pub grouping: String,
    pub alpha: f64,
    pub null_fit: MixedModelFit,
    pub rows: Vec<ScreeningRow>,
}

/// Fit the null model once, then one single-predictor model per candidate,
/// flagging candidates whose LRT against the null clears `alpha`. Candidate
/// failures are recorded in their row without aborting the screen.
pub fn screen_predictors(
    frame: &ModelFrame,
    response: &str,
    grouping: &str,
    candidates: &[&str],
    alpha: f64,
) -> Result<ScreeningTable, ModelError> {
    let null_spec = MixedModelSpec::null_model(response, grouping);
    let null_fit = fit(frame, &null_spec)?;
    let mut rows = Vec::with_capacity(candidates.len());
    for &candidate in candidates {
        let spec = MixedModelSpec::new(response, &[candidate], grouping);
        let row = match fit(frame, &spec).and_then(|f| {
            let cmp = compare(&null_fit, &f)?;
            Ok((f, cmp))
        }) {
            Ok((f, cmp)) => ScreeningRow::Fitted {
                predictor: candidate.to_string(),
                coefficients: f.fixed.iter().skip(1).cloned().collect(),
                df: cmp.df,
                lrt_statistic: cmp.lrt_statistic,
                lrt_p: cmp.p_value,
                aic: f.aic,
                bic: f.bic,
                flagged: cmp.p_value < alpha,
            },
            Err(e) => ScreeningRow::Failed {
                predictor: candidate.to_string(),
                error: e.to_string(),
            },
        };
        rows.push(row);
    }
    Ok(ScreeningTable {
        response: response.to_string(),
        grouping: grouping.to_string(),
        alpha,
        null_fit,
        rows,
    })
}

/// Convenience: build the frame from a dataset and fit.
pub fn fit_dataset(
    dataset: &SessionDataset,
    spec: &MixedModelSpec,
) -> Result<MixedModelFit, ModelError> {
    fit(&ModelFrame::from_dataset(dataset), spec)
}
