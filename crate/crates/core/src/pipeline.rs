//! End-to-end analysis pipeline over one session dataset.
//!
//! Stages, in order: descriptive statistics; null models for contribution,
//! learning outcome and group grade; per-response predictor screening at the
//! configured alpha; a final model per response (best flagged candidate by
//! LRT p-value, or forward selection with `stepwise`); per-team games in both
//! constructions with stability reports; contribution-mode Shapley values per
//! student; and the learning-outcome model on Shapley value plus content
//! engagement. The report serializes to one JSON document plus per-table
//! CSVs, byte-reproducible for a fixed dataset, config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::builder::{
    group_games, shapley_per_student, stability_report, BuildError, GameConstructionConfig,
};
use crate::conf::{ConfigError, KvConfig};
use crate::dataset::{DatasetError, DescriptiveReport, SessionDataset};
use crate::game::GameError;
use crate::model::{
    compare, fit, Column, MixedModelFit, MixedModelSpec, ModelError, ModelFrame, ScreeningRow,
    ScreeningTable,
};
use crate::report::{FitTableJson, ShapleyRowJson, StabilityJson};

pub const GROUPING: &str = "team";

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Error)]
#[error("pipeline stage '{stage}': {source}")]
pub struct PipelineError {
    pub stage: String,
    #[source]
    pub source: StageError,
}

fn stage<T, E: Into<StageError>>(name: &str, result: Result<T, E>) -> Result<T, PipelineError> {
    result.map_err(|e| PipelineError {
        stage: name.to_string(),
        source: e.into(),
    })
}

/// Pipeline knobs: significance threshold, which contribution column drives
/// the models and games, game scales, and the selection strategy.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub contribution_column: String,
    pub kappa1: f64,
    pub kappa2: f64,
    pub stepwise: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.05,
            contribution_column: "observed_contribution".to_string(),
            kappa1: 1.0,
            kappa2: 1.0,
            stepwise: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut kv = KvConfig::from_file(path)?;
        let config = PipelineConfig {
            alpha: kv.get_f64("alpha", 0.05)?,
            contribution_column: kv.get_string("contribution_column", "observed_contribution"),
            kappa1: kv.get_f64("kappa1", 1.0)?,
            kappa2: kv.get_f64("kappa2", 1.0)?,
            stepwise: kv.get_bool("stepwise", false)?,
        };
        kv.finish()?;
        Ok(config)
    }

    fn opinion_config(&self) -> GameConstructionConfig {
        let mut c = GameConstructionConfig::opinion();
        c.singleton_scale = self.kappa1;
        c.coalition_scale = self.kappa2;
        c
    }

    fn contribution_config(&self) -> GameConstructionConfig {
        let mut c = GameConstructionConfig::contribution();
        c.singleton_scale = self.kappa1;
        c.coalition_scale = self.kappa2;
        c
    }
}

/// A final model for one response: the predictors that survived selection
/// (empty when nothing cleared alpha, in which case the table carries the
/// null fit) and the comparison against the null model.
#[derive(Debug, Clone, Serialize)]
pub struct FinalModelJson {
    pub response: String,
    pub selected: Vec<String>,
    pub table: FitTableJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySectionJson {
    pub opinion: Vec<StabilityJson>,
    pub contribution: Vec<StabilityJson>,
}

/// The full report: the eight numbered table sections plus the screening,
/// stability and Shapley listings they are built from.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub config: PipelineConfig,
    pub table1_descriptives: DescriptiveReport,
    pub table2_null_contribution: FitTableJson,
    pub table3_final_contribution: FinalModelJson,
    pub table4_null_learning_outcome: FitTableJson,
    pub table5_final_learning_outcome: FinalModelJson,
    pub table6_null_group_grade: FitTableJson,
    pub table7_final_group_grade: FinalModelJson,
    pub table8_shapley_model: FitTableJson,
    pub screening: BTreeMap<String, ScreeningTable>,
    pub stability: StabilitySectionJson,
    pub shapley_values: Vec<ShapleyRowJson>,
}

fn candidate_list<'a>(response: &str, contribution_column: &'a str) -> Vec<&'a str> {
    let mut base: Vec<&str> = vec![
        "personality_type",
        "learning_style",
        "content_engaging",
        "background",
        "fits_needs",
    ];
    if response != "observed_contribution" && response != contribution_column {
        base.push("opinion_before");
        base.push(contribution_column);
    }
    base.retain(|c| *c != response);
    base
}

fn flagged_by_p(table: &ScreeningTable) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = table
        .rows
        .iter()
        .filter_map(|r| match r {
            ScreeningRow::Fitted {
                predictor,
                flagged: true,
                lrt_p,
                ..
            } => Some((predictor.clone(), *lrt_p)),
            _ => None,
        })
        .collect();
    // stable: ties keep candidate order
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Best single flagged candidate (screening order breaks ties), or forward
/// selection when `stepwise` is set.
fn select_final(
    frame: &ModelFrame,
    response: &str,
    null_fit: &MixedModelFit,
    table: &ScreeningTable,
    config: &PipelineConfig,
) -> Result<(Vec<String>, MixedModelFit), ModelError> {
    let flagged = flagged_by_p(table);
    if flagged.is_empty() {
        return Ok((Vec::new(), null_fit.clone()));
    }
    if !config.stepwise {
        let chosen = flagged[0].0.clone();
        let fit = fit(
            frame,
            &MixedModelSpec::new(response, &[chosen.as_str()], GROUPING),
        )?;
        return Ok((vec![chosen], fit));
    }

    // forward selection: keep adding the candidate with the smallest LRT
    // p-value against the current model while it clears alpha
    let mut selected: Vec<String> = Vec::new();
    let mut current = null_fit.clone();
    let pool: Vec<String> = table
        .rows
        .iter()
        .filter_map(|r| match r {
            ScreeningRow::Fitted { predictor, .. } => Some(predictor.clone()),
            ScreeningRow::Failed { .. } => None,
        })
        .collect();
    loop {
        let mut best: Option<(String, f64, MixedModelFit)> = None;
        for candidate in pool.iter().filter(|c| !selected.contains(c)) {
            let mut predictors: Vec<&str> = selected.iter().map(String::as_str).collect();
            predictors.push(candidate);
            let spec = MixedModelSpec::new(response, &predictors, GROUPING);
            let Ok(candidate_fit) = fit(frame, &spec) else {
                continue;
            };
            let Ok(cmp) = compare(&current, &candidate_fit) else {
                continue;
            };
            if cmp.p_value < config.alpha && best.as_ref().is_none_or(|(_, p, _)| cmp.p_value < *p)
            {
                best = Some((candidate.clone(), cmp.p_value, candidate_fit));
            }
        }
        match best {
            Some((name, _, better)) => {
                selected.push(name);
                current = better;
            }
            None => break,
        }
    }
    if selected.is_empty() {
        return Ok((Vec::new(), null_fit.clone()));
    }
    Ok((selected, current))
}

fn final_table(
    response: &str,
    null_fit: &MixedModelFit,
    selected: Vec<String>,
    final_fit: MixedModelFit,
) -> Result<FinalModelJson, ModelError> {
    let comparison = if selected.is_empty() {
        None
    } else {
        Some(compare(null_fit, &final_fit)?)
    };
    Ok(FinalModelJson {
        response: response.to_string(),
        selected,
        table: FitTableJson::from_fit(&final_fit, comparison.as_ref()),
    })
}

/// Run every stage over a validated dataset. The seed is recorded in the
/// report so reruns can be checked byte for byte.
pub fn run_pipeline(
    dataset: &SessionDataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineReport, PipelineError> {
    let descriptives = stage("descriptives", dataset.describe())?;
    let frame = ModelFrame::from_dataset(dataset);

    let mut null_fits: BTreeMap<String, MixedModelFit> = BTreeMap::new();
    let mut screenings: BTreeMap<String, ScreeningTable> = BTreeMap::new();
    let mut finals: BTreeMap<String, FinalModelJson> = BTreeMap::new();
    let responses = [
        config.contribution_column.as_str(),
        "learning_outcome",
        "group_grade",
    ];
    for response in responses {
        let null_spec = MixedModelSpec::null_model(response, GROUPING);
        let null_fit = stage(&format!("null model ({response})"), fit(&frame, &null_spec))?;
        let candidates = candidate_list(response, &config.contribution_column);
        let table = stage(
            &format!("screening ({response})"),
            crate::model::screen_predictors(&frame, response, GROUPING, &candidates, config.alpha),
        )?;
        let (selected, final_fit) = stage(
            &format!("final model ({response})"),
            select_final(&frame, response, &null_fit, &table, config),
        )?;
        let final_json = stage(
            &format!("final model ({response})"),
            final_table(response, &null_fit, selected, final_fit),
        )?;
        screenings.insert(response.to_string(), table);
        finals.insert(response.to_string(), final_json);
        null_fits.insert(response.to_string(), null_fit);
    }

    // games and stability in both constructions
    let opinion_games = stage(
        "opinion games",
        group_games(dataset, &config.opinion_config()),
    )?;
    let contribution_games = stage(
        "contribution games",
        group_games(dataset, &config.contribution_config()),
    )?;
    let mut stability = StabilitySectionJson {
        opinion: Vec::new(),
        contribution: Vec::new(),
    };
    for gg in &opinion_games {
        let report = stage(
            "opinion stability",
            stability_report(&gg.game, &gg.group.to_string()),
        )?;
        stability
            .opinion
            .push(StabilityJson::from_report(&report, &gg.students));
    }
    for gg in &contribution_games {
        let report = stage(
            "contribution stability",
            stability_report(&gg.game, &gg.group.to_string()),
        )?;
        stability
            .contribution
            .push(StabilityJson::from_report(&report, &gg.students));
    }

    // contribution-mode Shapley values, joined back onto the records
    let shapley = stage(
        "shapley values",
        shapley_per_student(dataset, &config.contribution_config()),
    )?;
    let mut shapley_rows = Vec::new();
    for gg in &contribution_games {
        for student in &gg.students {
            let key = (gg.group.session_id.clone(), student.clone());
            shapley_rows.push(ShapleyRowJson {
                session_id: gg.group.session_id.clone(),
                team_id: gg.group.team_id.clone(),
                student_id: student.clone(),
                shapley: shapley[&key],
            });
        }
    }
    let shapley_column: Vec<f64> = dataset
        .records
        .iter()
        .map(|r| shapley[&(r.session_id.clone(), r.student_id.clone())])
        .collect();
    let frame8 = stage(
        "shapley model",
        frame
            .clone()
            .with_column("shapley", Column::Continuous(shapley_column)),
    )?;
    let spec8 = MixedModelSpec::new(
        "learning_outcome",
        &["shapley", "content_engaging"],
        GROUPING,
    );
    let fit8 = stage("shapley model", fit(&frame8, &spec8))?;
    let cmp8 = stage(
        "shapley model",
        compare(&null_fits["learning_outcome"], &fit8),
    )?;
    let table8 = FitTableJson::from_fit(&fit8, Some(&cmp8));

    let contribution = config.contribution_column.clone();
    Ok(PipelineReport {
        seed,
        config: config.clone(),
        table1_descriptives: descriptives,
        table2_null_contribution: FitTableJson::from_fit(&null_fits[&contribution], None),
        table3_final_contribution: finals.remove(&contribution).expect("final fit"),
        table4_null_learning_outcome: FitTableJson::from_fit(&null_fits["learning_outcome"], None),
        table5_final_learning_outcome: finals.remove("learning_outcome").expect("final fit"),
        table6_null_group_grade: FitTableJson::from_fit(&null_fits["group_grade"], None),
        table7_final_group_grade: finals.remove("group_grade").expect("final fit"),
        table8_shapley_model: table8,
        screening: screenings,
        stability,
        shapley_values: shapley_rows,
    })
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Write `report.json` plus one CSV per table section into `dir`.
    /// Any file created before a failure is removed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
        let mut written: Vec<PathBuf> = Vec::new();
        let result = self.write_inner(dir, &mut written);
        if result.is_err() {
            for path in &written {
                let _ = std::fs::remove_file(path);
            }
            return result.map(|_| Vec::new());
        }
        Ok(written)
    }

    fn write_inner(&self, dir: &Path, written: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
        let io = |e: std::io::Error| PipelineError {
            stage: "write outputs".to_string(),
            source: StageError::Io(e.to_string()),
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut emit = |name: &str, contents: String| -> Result<(), PipelineError> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(io)?;
            written.push(path);
            Ok(())
        };

        emit("report.json", self.to_json())?;
        emit(
            "table1_descriptives.csv",
            descriptives_csv(&self.table1_descriptives),
        )?;
        emit(
            "table2_null_contribution.csv",
            fit_csv(&self.table2_null_contribution),
        )?;
        emit(
            "table3_final_contribution.csv",
            fit_csv(&self.table3_final_contribution.table),
        )?;
        emit(
            "table4_null_learning_outcome.csv",
            fit_csv(&self.table4_null_learning_outcome),
        )?;
        emit(
            "table5_final_learning_outcome.csv",
            fit_csv(&self.table5_final_learning_outcome.table),
        )?;
        emit(
            "table6_null_group_grade.csv",
            fit_csv(&self.table6_null_group_grade),
        )?;
        emit(
            "table7_final_group_grade.csv",
            fit_csv(&self.table7_final_group_grade.table),
        )?;
        emit(
            "table8_shapley_model.csv",
            fit_csv(&self.table8_shapley_model),
        )?;
        for (response, table) in &self.screening {
            emit(&format!("screening_{response}.csv"), screening_csv(table))?;
        }
        emit(
            "stability_opinion.csv",
            stability_csv(&self.stability.opinion),
        )?;
        emit(
            "stability_contribution.csv",
            stability_csv(&self.stability.contribution),
        )?;
        emit("shapley.csv", shapley_csv(&self.shapley_values))?;
        Ok(())
    }
}

fn descriptives_csv(report: &DescriptiveReport) -> String {
    let mut out = String::from("variable,mean,sd\n");
    for c in &report.continuous {
        let sd = c.sd.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", c.variable, c.mean, sd));
    }
    out
}

fn fit_csv(table: &FitTableJson) -> String {
    let mut out = String::from("block,name,estimate,se,p_value\n");
    for f in &table.fixed {
        out.push_str(&format!(
            "fixed,{},{},{},{}\n",
            f.name, f.coefficient, f.se, f.p_value
        ));
    }
    out.push_str(&format!(
        "random,level2_variance,{},{},{}\n",
        table.random.level2.variance, table.random.level2.se, table.random.level2.p_value
    ));
    out.push_str(&format!(
        "random,level1_variance,{},{},{}\n",
        table.random.level1.variance, table.random.level1.se, table.random.level1.p_value
    ));
    out.push_str(&format!("fit,loglik,{},,\n", table.fit.loglik));
    out.push_str(&format!("fit,aic,{},,\n", table.fit.aic));
    out.push_str(&format!("fit,bic,{},,\n", table.fit.bic));
    if let Some(cmp) = &table.comparison {
        out.push_str(&format!(
            "comparison,lrt,{},df={},{}\n",
            cmp.lrt_statistic, cmp.df, cmp.p_value
        ));
    }
    out
}

fn screening_csv(table: &ScreeningTable) -> String {
    let mut out = String::from("predictor,status,df,lrt_statistic,lrt_p,aic,bic,flagged\n");
    for row in &table.rows {
        match row {
            ScreeningRow::Fitted {
                predictor,
                df,
                lrt_statistic,
                lrt_p,
                aic,
                bic,
                flagged,
                ..
            } => {
                out.push_str(&format!(
                    "{predictor},fitted,{df},{lrt_statistic},{lrt_p},{aic},{bic},{flagged}\n"
                ));
            }
            ScreeningRow::Failed { predictor, error } => {
                out.push_str(&format!(
                    "{predictor},failed ({}),,,,,,\n",
                    error.replace(',', ";")
                ));
            }
        }
    }
    out
}

fn stability_csv(reports: &[StabilityJson]) -> String {
    let mut out = String::from(
        "group_id,n_players,additive,superadditive,core_empty,n_blocking,grand_coalition_gain\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.group_id,
            r.players.len(),
            r.additive.holds,
            r.superadditive.holds,
            r.core_empty,
            r.blocking_coalitions.len(),
            r.grand_coalition_gain
        ));
    }
    out
}

fn shapley_csv(rows: &[ShapleyRowJson]) -> String {
    let mut out = String::from("session_id,team_id,student_id,shapley\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.session_id, r.team_id, r.student_id, r.shapley
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize, GenConfig};

    #[test]
    fn pipeline_on_study_shape_has_all_sections() {
        let out = synthesize(&GenConfig::study_shape(), 13).unwrap();
        let report = run_pipeline(&out.dataset, &PipelineConfig::default(), 13).unwrap();
        assert_eq!(report.table1_descriptives.n_records, 87);
        assert_eq!(report.table2_null_contribution.fixed.len(), 1);
        assert_eq!(
            report.table3_final_contribution.selected,
            vec!["content_engaging"]
        );
        assert_eq!(
            report.table5_final_learning_outcome.selected,
            vec!["content_engaging"]
        );
        assert_eq!(report.table8_shapley_model.fixed.len(), 3);
        assert_eq!(report.screening.len(), 3);
        assert_eq!(report.stability.opinion.len(), 31);
        assert_eq!(report.stability.contribution.len(), 31);
        assert_eq!(report.shapley_values.len(), 87);

        let json = report.to_json();
        for section in [
            "table1_descriptives",
            "table2_null_contribution",
            "table3_final_contribution",
            "table4_null_learning_outcome",
            "table5_final_learning_outcome",
            "table6_null_group_grade",
            "table7_final_group_grade",
            "table8_shapley_model",
        ] {
            assert!(json.contains(section), "missing section {section}");
        }
    }

    #[test]
    fn pipeline_reruns_are_identical() {
        let out = synthesize(&GenConfig::study_shape(), 13).unwrap();
        let a = run_pipeline(&out.dataset, &PipelineConfig::default(), 13)
            .unwrap()
            .to_json();
        let b = run_pipeline(&out.dataset, &PipelineConfig::default(), 13)
            .unwrap()
            .to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn config_file_round_trip_and_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.conf");
        std::fs::write(&path, "alpha = 0.01\nkappa2 = 2.0\nstepwise = true\n").unwrap();
        let config = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(config.alpha, 0.01);
        assert_eq!(config.kappa2, 2.0);
        assert!(config.stepwise);

        std::fs::write(&path, "alfa = 0.01\n").unwrap();
        assert!(matches!(
            PipelineConfig::from_file(&path),
            Err(ConfigError::UnknownKeys { .. })
        ));
    }
}
