//! Session datasets: one row per student per session plus a pairwise
//! peer-rating table, with strict validation, descriptive statistics and
//! grouped five-number summaries.
//!
//! Two CSV files make up the on-disk form. `records.csv` carries the coded
//! per-student features; `ratings.csv` carries one score per ordered
//! within-team pair. The derived learning outcome (post-quiz minus background)
//! never appears on disk — it is recomputed on load.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::stats::{mean, quantile_sorted, sample_sd};

pub const RECORDS_HEADER: [&str; 13] = [
    "student_id",
    "team_id",
    "session_id",
    "personality_type",
    "learning_style",
    "content_engaging",
    "background",
    "fits_needs",
    "observed_contribution",
    "peer_contribution_score",
    "opinion_before",
    "post_quiz",
    "group_grade",
];

pub const RATINGS_HEADER: [&str; 4] = ["session_id", "rater_id", "ratee_id", "score"];

/// Continuous variables known to `describe`, the model frame and the grouped
/// summaries, in reporting order.
pub const CONTINUOUS_VARIABLES: [&str; 9] = [
    "observed_contribution",
    "content_engaging",
    "background",
    "fits_needs",
    "group_grade",
    "learning_outcome",
    "opinion_before",
    "peer_contribution_score",
    "post_quiz",
];

/// Categorical variables (the composite `team` label is derived).
pub const CATEGORICAL_VARIABLES: [&str; 3] = ["personality_type", "learning_style", "team"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file} line {line}: column '{column}' value {value} outside [{min}, {max}]")]
    Range {
        file: String,
        line: u64,
        column: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{file} line {line}: duplicate record for student '{student}' in session '{session}'")]
    DuplicateRecord {
        file: String,
        line: u64,
        student: String,
        session: String,
    },
    #[error("team '{team}' in session '{session}' has {size} members; teams must have 2 to 4")]
    TeamSize {
        session: String,
        team: String,
        size: usize,
    },
    #[error("missing rating {rater} -> {ratee} in session '{session}'")]
    MissingRating {
        session: String,
        rater: String,
        ratee: String,
    },
    #[error(
        "{file} line {line}: rating references unknown student '{student}' in session '{session}'"
    )]
    UnknownRatedStudent {
        file: String,
        line: u64,
        student: String,
        session: String,
    },
    #[error("{file} line {line}: self-rating for student '{student}' in session '{session}'")]
    SelfRating {
        file: String,
        line: u64,
        student: String,
        session: String,
    },
    #[error(
        "{file} line {line}: rating pair {rater} -> {ratee} crosses teams in session '{session}'"
    )]
    CrossTeamRating {
        file: String,
        line: u64,
        rater: String,
        ratee: String,
        session: String,
    },
    #[error("{file} line {line}: duplicate rating {rater} -> {ratee} in session '{session}'")]
    DuplicateRating {
        file: String,
        line: u64,
        rater: String,
        ratee: String,
        session: String,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("unknown variable '{name}'; valid choices: {valid}")]
    UnknownVariable { name: String, valid: String },
    #[error("unknown grouping '{name}'; valid choices: personality_type, learning_style, team")]
    UnknownGrouping { name: String },
    #[error("{} validation errors:\n{}", errors.len(), errors.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Multiple { errors: Vec<DatasetError> },
}

/// One student's coded features for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentRecord {
    pub student_id: String,
    pub team_id: String,
    pub session_id: String,
    pub personality_type: String,
    pub learning_style: String,
    pub content_engaging: u8,
    pub background: u8,
    pub fits_needs: u8,
    pub observed_contribution: f64,
    pub peer_contribution_score: f64,
    pub opinion_before: u8,
    pub post_quiz: f64,
    pub group_grade: f64,
    /// Derived: post_quiz − background.
    pub learning_outcome: f64,
}

impl StudentRecord {
    /// The (session, team) pair that identifies this record's group.
    pub fn group(&self) -> GroupKey {
        GroupKey {
            session_id: self.session_id.clone(),
            team_id: self.team_id.clone(),
        }
    }
}

/// Identifies one group: a team within a session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub session_id: String,
    pub team_id: String,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.session_id, self.team_id)
    }
}

pub type RatingKey = (String, String, String); // (session, rater, ratee)

/// A validated collection of records plus the peer-rating table.
#[derive(Debug, Clone, Default)]
pub struct SessionDataset {
    pub records: Vec<StudentRecord>,
    pub ratings: BTreeMap<RatingKey, f64>,
}

impl SessionDataset {
    /// Load and validate the two-file CSV layout.
    pub fn load(records_path: &Path, ratings_path: &Path) -> Result<Self, DatasetError> {
        let records = read_records(records_path)?;
        let ratings = read_ratings(ratings_path)?;
        let mut ds = SessionDataset { records, ratings };
        ds.validate_with_origin(
            &records_path.display().to_string(),
            &ratings_path.display().to_string(),
        )?;
        ds.derive_outcomes();
        Ok(ds)
    }

    /// Check every dataset invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), DatasetError> {
        self.validate_with_origin("records", "ratings")
    }

    fn validate_with_origin(
        &self,
        records_file: &str,
        ratings_file: &str,
    ) -> Result<(), DatasetError> {
        let mut errors: Vec<DatasetError> = Vec::new();
        let push = |r: Result<(), DatasetError>, errors: &mut Vec<DatasetError>| {
            if let Err(e) = r {
                errors.push(e);
            }
        };
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut membership: BTreeMap<(String, String), (String, u64)> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = i as u64 + 2; // header is line 1
            push(
                check_ordinal(records_file, line, "content_engaging", r.content_engaging),
                &mut errors,
            );
            push(
                check_ordinal(records_file, line, "background", r.background),
                &mut errors,
            );
            push(
                check_ordinal(records_file, line, "fits_needs", r.fits_needs),
                &mut errors,
            );
            push(
                check_ordinal(records_file, line, "opinion_before", r.opinion_before),
                &mut errors,
            );
            push(
                check_real(
                    records_file,
                    line,
                    "observed_contribution",
                    r.observed_contribution,
                    0.0,
                    5.0,
                ),
                &mut errors,
            );
            push(
                check_real(
                    records_file,
                    line,
                    "peer_contribution_score",
                    r.peer_contribution_score,
                    0.0,
                    5.0,
                ),
                &mut errors,
            );
            push(
                check_real(records_file, line, "post_quiz", r.post_quiz, 0.0, 5.0),
                &mut errors,
            );
            push(
                check_real(records_file, line, "group_grade", r.group_grade, 0.0, 5.0),
                &mut errors,
            );
            push(
                check_real(
                    records_file,
                    line,
                    "learning_outcome",
                    r.learning_outcome,
                    -5.0,
                    5.0,
                ),
                &mut errors,
            );
            if !seen.insert((r.student_id.clone(), r.session_id.clone())) {
                errors.push(DatasetError::DuplicateRecord {
                    file: records_file.to_string(),
                    line,
                    student: r.student_id.clone(),
                    session: r.session_id.clone(),
                });
            }
            membership.insert(
                (r.session_id.clone(), r.student_id.clone()),
                (r.team_id.clone(), line),
            );
        }

        for (key, members) in self.group_members() {
            let size = members.len();
            if !(2..=4).contains(&size) {
                errors.push(DatasetError::TeamSize {
                    session: key.session_id.clone(),
                    team: key.team_id.clone(),
                    size,
                });
                continue; // rating-pair checks would only echo the same problem
            }
            for rater in &members {
                for ratee in &members {
                    if rater != ratee {
                        let k = (
                            key.session_id.clone(),
                            rater.student_id.clone(),
                            ratee.student_id.clone(),
                        );
                        if !self.ratings.contains_key(&k) {
                            errors.push(DatasetError::MissingRating {
                                session: key.session_id.clone(),
                                rater: rater.student_id.clone(),
                                ratee: ratee.student_id.clone(),
                            });
                        }
                    }
                }
            }
        }

        for ((session, rater, ratee), score) in &self.ratings {
            let line = 0; // rating rows lose their source line once in the map
            if !score.is_finite() || !(0.0..=5.0).contains(score) {
                errors.push(DatasetError::Range {
                    file: ratings_file.to_string(),
                    line,
                    column: "score".to_string(),
                    value: *score,
                    min: 0.0,
                    max: 5.0,
                });
                continue;
            }
            if rater == ratee {
                errors.push(DatasetError::SelfRating {
                    file: ratings_file.to_string(),
                    line,
                    student: rater.clone(),
                    session: session.clone(),
                });
                continue;
            }
            let rater_team = membership.get(&(session.clone(), rater.clone()));
            let ratee_team = membership.get(&(session.clone(), ratee.clone()));
            match (rater_team, ratee_team) {
                (Some((a, _)), Some((b, _))) if a == b => {}
                (Some(_), Some(_)) => {
                    errors.push(DatasetError::CrossTeamRating {
                        file: ratings_file.to_string(),
                        line,
                        rater: rater.clone(),
                        ratee: ratee.clone(),
                        session: session.clone(),
                    });
                }
                _ => {
                    let missing = if rater_team.is_none() { rater } else { ratee };
                    errors.push(DatasetError::UnknownRatedStudent {
                        file: ratings_file.to_string(),
                        line,
                        student: missing.clone(),
                        session: session.clone(),
                    });
                }
            }
        }
        match errors.len() {
            0 => Ok(()),
            1 => Err(errors.pop().expect("one error")),
            _ => Err(DatasetError::Multiple { errors }),
        }
    }

    /// Groups in key order with their member records (stable within-group order:
    /// ascending student id).
    pub fn group_members(&self) -> BTreeMap<GroupKey, Vec<&StudentRecord>> {
        let mut groups: BTreeMap<GroupKey, Vec<&StudentRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.group()).or_default().push(r);
        }
        for members in groups.values_mut() {
            members.sort_by(|a, b| a.student_id.cmp(&b.student_id));
        }
        groups
    }

    pub fn n_groups(&self) -> usize {
        self.group_members().len()
    }

    /// Recompute `learning_outcome = post_quiz − background` on every record.
    /// Conflicting pre-existing values are overwritten; their record ids are
    /// returned as warnings. Idempotent.
    pub fn derive_outcomes(&mut self) -> Vec<String> {
        let mut warnings = Vec::new();
        for r in &mut self.records {
            let derived = r.post_quiz - r.background as f64;
            if (r.learning_outcome - derived).abs() > 1e-9 && r.learning_outcome != 0.0 {
                warnings.push(format!(
                    "learning_outcome for {}/{} overwritten: {} -> {}",
                    r.session_id, r.student_id, r.learning_outcome, derived
                ));
            }
            r.learning_outcome = derived;
        }
        warnings
    }

    /// Rating lookup for one ordered pair within a session.
    pub fn rating(&self, session: &str, rater: &str, ratee: &str) -> Option<f64> {
        self.ratings
            .get(&(session.to_string(), rater.to_string(), ratee.to_string()))
            .copied()
    }

    /// One continuous column by name, in record order.
    pub fn continuous_column(&self, name: &str) -> Result<Vec<f64>, DatasetError> {
        let get: fn(&StudentRecord) -> f64 = match name {
            "content_engaging" => |r| r.content_engaging as f64,
            "background" => |r| r.background as f64,
            "fits_needs" => |r| r.fits_needs as f64,
            "observed_contribution" => |r| r.observed_contribution,
            "peer_contribution_score" => |r| r.peer_contribution_score,
            "opinion_before" => |r| r.opinion_before as f64,
            "post_quiz" => |r| r.post_quiz,
            "group_grade" => |r| r.group_grade,
            "learning_outcome" => |r| r.learning_outcome,
            _ => {
                return Err(DatasetError::UnknownVariable {
                    name: name.to_string(),
                    valid: CONTINUOUS_VARIABLES.join(", "),
                })
            }
        };
        Ok(self.records.iter().map(get).collect())
    }

    /// One categorical column by name, in record order.
    pub fn categorical_column(&self, name: &str) -> Result<Vec<String>, DatasetError> {
        match name {
            "personality_type" => Ok(self
                .records
                .iter()
                .map(|r| r.personality_type.clone())
                .collect()),
            "learning_style" => Ok(self
                .records
                .iter()
                .map(|r| r.learning_style.clone())
                .collect()),
            "team" => Ok(self.records.iter().map(|r| r.group().to_string()).collect()),
            _ => Err(DatasetError::UnknownVariable {
                name: name.to_string(),
                valid: CATEGORICAL_VARIABLES.join(", "),
            }),
        }
    }

    /// Descriptive statistics: per-variable mean and sample SD, categorical
    /// level counts, group-size histogram and record count.
    pub fn describe(&self) -> Result<DescriptiveReport, DatasetError> {
        if self.records.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut continuous = Vec::new();
        for name in CONTINUOUS_VARIABLES {
            let col = self.continuous_column(name)?;
            continuous.push(ContinuousSummary {
                variable: name.to_string(),
                mean: mean(&col),
                sd: sample_sd(&col),
            });
        }
        let mut categorical = Vec::new();
        for name in ["personality_type", "learning_style"] {
            let col = self.categorical_column(name)?;
            let mut levels: BTreeMap<String, usize> = BTreeMap::new();
            for v in col {
                *levels.entry(v).or_insert(0) += 1;
            }
            categorical.push(CategoricalSummary {
                variable: name.to_string(),
                levels,
            });
        }
        let mut group_sizes: BTreeMap<usize, usize> = BTreeMap::new();
        let groups = self.group_members();
        for members in groups.values() {
            *group_sizes.entry(members.len()).or_insert(0) += 1;
        }
        Ok(DescriptiveReport {
            n_records: self.records.len(),
            n_groups: groups.len(),
            group_sizes,
            continuous,
            categorical,
        })
    }

    /// Five-number summaries of a continuous variable, per level of a grouping
    /// variable. Quantiles use linear interpolation between order statistics.
    pub fn group_summaries(
        &self,
        by: &str,
        variable: &str,
    ) -> Result<Vec<GroupSummaryRow>, DatasetError> {
        if !CATEGORICAL_VARIABLES.contains(&by) {
            return Err(DatasetError::UnknownGrouping {
                name: by.to_string(),
            });
        }
        let labels = self.categorical_column(by)?;
        let values = self.continuous_column(variable)?;
        let mut per_level: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (label, value) in labels.into_iter().zip(values) {
            per_level.entry(label).or_default().push(value);
        }
        Ok(per_level
            .into_iter()
            .map(|(level, mut vals)| {
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                GroupSummaryRow {
                    group: by.to_string(),
                    level,
                    count: vals.len(),
                    min: vals[0],
                    q1: quantile_sorted(&vals, 0.25),
                    median: quantile_sorted(&vals, 0.5),
                    q3: quantile_sorted(&vals, 0.75),
                    max: vals[vals.len() - 1],
                }
            })
            .collect())
    }

    /// Write the two-file CSV layout (inverse of `load`).
    pub fn save(&self, records_path: &Path, ratings_path: &Path) -> Result<(), DatasetError> {
        let io_err = |p: &Path| {
            let file = p.display().to_string();
            move |e: csv::Error| match e.into_kind() {
                csv::ErrorKind::Io(source) => DatasetError::Io {
                    file: file.clone(),
                    source,
                },
                other => DatasetError::Parse {
                    file: file.clone(),
                    line: 0,
                    message: format!("{other:?}"),
                },
            }
        };
        let mut w = csv::Writer::from_path(records_path).map_err(io_err(records_path))?;
        w.write_record(RECORDS_HEADER)
            .map_err(io_err(records_path))?;
        for r in &self.records {
            w.write_record([
                r.student_id.as_str(),
                r.team_id.as_str(),
                r.session_id.as_str(),
                r.personality_type.as_str(),
                r.learning_style.as_str(),
                &r.content_engaging.to_string(),
                &r.background.to_string(),
                &r.fits_needs.to_string(),
                &format_real(r.observed_contribution),
                &format_real(r.peer_contribution_score),
                &r.opinion_before.to_string(),
                &format_real(r.post_quiz),
                &format_real(r.group_grade),
            ])
            .map_err(io_err(records_path))?;
        }
        w.flush().map_err(|e| DatasetError::Io {
            file: records_path.display().to_string(),
            source: e,
        })?;

        let mut w = csv::Writer::from_path(ratings_path).map_err(io_err(ratings_path))?;
        w.write_record(RATINGS_HEADER)
            .map_err(io_err(ratings_path))?;
        for ((session, rater, ratee), score) in &self.ratings {
            w.write_record([
                session.as_str(),
                rater.as_str(),
                ratee.as_str(),
                &format_real(*score),
            ])
            .map_err(io_err(ratings_path))?;
        }
        w.flush().map_err(|e| DatasetError::Io {
            file: ratings_path.display().to_string(),
            source: e,
        })?;
        Ok(())
    }
}

fn format_real(v: f64) -> String {
    // shortest round-trip representation, dot decimal
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn check_ordinal(file: &str, line: u64, column: &str, value: u8) -> Result<(), DatasetError> {
    if !(1..=5).contains(&value) {
        return Err(DatasetError::Range {
            file: file.to_string(),
            line,
            column: column.to_string(),
            value: value as f64,
            min: 1.0,
            max: 5.0,
        });
    }
    Ok(())
}

fn check_real(
    file: &str,
    line: u64,
    column: &str,
    value: f64,
    min: f64,
    max: f64,
) -> Result<(), DatasetError> {
    if !value.is_finite() || value < min || value > max {
        return Err(DatasetError::Range {
            file: file.to_string(),
            line,
            column: column.to_string(),
            value,
            min,
            max,
        });
    }
    Ok(())
}

fn open_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>, DatasetError> {
    let file = path.display().to_string();
    if !path.exists() {
        return Err(DatasetError::Io {
            file,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_error(&file, 1, e))?;
    let got = reader.headers().map_err(|e| parse_error(&file, 1, e))?;
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != header {
        return Err(DatasetError::Parse {
            file,
            line: 1,
            message: format!(
                "expected header '{}', got '{}'",
                header.join(","),
                got.join(",")
            ),
        });
    }
    Ok(reader)
}

fn parse_error(file: &str, line: u64, e: csv::Error) -> DatasetError {
    let line = e.position().map(|p| p.line()).unwrap_or(line);
    DatasetError::Parse {
        file: file.to_string(),
        line,
        message: e.to_string(),
    }
}

fn field_parse<T: std::str::FromStr>(
    file: &str,
    line: u64,
    column: &str,
    raw: &str,
) -> Result<T, DatasetError> {
    raw.trim().parse().map_err(|_| DatasetError::Parse {
        file: file.to_string(),
        line,
        message: format!("column '{column}': cannot parse '{raw}'"),
    })
}

fn read_records(path: &Path) -> Result<Vec<StudentRecord>, DatasetError> {
    let file = path.display().to_string();
    let mut reader = open_reader(path, &RECORDS_HEADER)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_error(&file, 0, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != RECORDS_HEADER.len() {
            return Err(DatasetError::Parse {
                file,
                line,
                message: format!(
                    "expected {} fields, got {}",
                    RECORDS_HEADER.len(),
                    row.len()
                ),
            });
        }
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let mut record = StudentRecord {
            student_id: field(0),
            team_id: field(1),
            session_id: field(2),
            personality_type: field(3),
            learning_style: field(4),
            content_engaging: field_parse(&file, line, "content_engaging", row.get(5).unwrap())?,
            background: field_parse(&file, line, "background", row.get(6).unwrap())?,
            fits_needs: field_parse(&file, line, "fits_needs", row.get(7).unwrap())?,
            observed_contribution: field_parse(
                &file,
                line,
                "observed_contribution",
                row.get(8).unwrap(),
            )?,
            peer_contribution_score: field_parse(
                &file,
                line,
                "peer_contribution_score",
                row.get(9).unwrap(),
            )?,
            opinion_before: field_parse(&file, line, "opinion_before", row.get(10).unwrap())?,
            post_quiz: field_parse(&file, line, "post_quiz", row.get(11).unwrap())?,
            group_grade: field_parse(&file, line, "group_grade", row.get(12).unwrap())?,
            learning_outcome: 0.0,
        };
        for (name, value) in [
            ("student_id", &record.student_id),
            ("team_id", &record.team_id),
            ("session_id", &record.session_id),
        ] {
            if value.is_empty() {
                return Err(DatasetError::Parse {
                    file,
                    line,
                    message: format!("column '{name}' must not be empty"),
                });
            }
        }
        record.learning_outcome = record.post_quiz - record.background as f64;
        out.push(record);
    }
    Ok(out)
}

fn read_ratings(path: &Path) -> Result<BTreeMap<RatingKey, f64>, DatasetError> {
    let file = path.display().to_string();
    let mut reader = open_reader(path, &RATINGS_HEADER)?;
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_error(&file, 0, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != RATINGS_HEADER.len() {
            return Err(DatasetError::Parse {
                file,
                line,
                message: format!(
                    "expected {} fields, got {}",
                    RATINGS_HEADER.len(),
                    row.len()
                ),
            });
        }
        let session = row.get(0).unwrap().trim().to_string();
        let rater = row.get(1).unwrap().trim().to_string();
        let ratee = row.get(2).unwrap().trim().to_string();
        let score: f64 = field_parse(&file, line, "score", row.get(3).unwrap())?;
        if !(0.0..=5.0).contains(&score) || !score.is_finite() {
            return Err(DatasetError::Range {
                file,
                line,
                column: "score".to_string(),
                value: score,
                min: 0.0,
                max: 5.0,
            });
        }
        if out
            .insert((session.clone(), rater.clone(), ratee.clone()), score)
            .is_some()
        {
            return Err(DatasetError::DuplicateRating {
                file,
                line,
                rater,
                ratee,
                session,
            });
        }
    }
    Ok(out)
}

/// Output of [`SessionDataset::describe`].
#[derive(Debug, Clone, Serialize)]
pub struct DescriptiveReport {
    pub n_records: usize,
    pub n_groups: usize,
    pub group_sizes: BTreeMap<usize, usize>,
    pub continuous: Vec<ContinuousSummary>,
    pub categorical: Vec<CategoricalSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousSummary {
    pub variable: String,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CategoricalSummary {
    pub variable: String,
    pub levels: BTreeMap<String, usize>,
}

/// One row of a grouped five-number summary.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSummaryRow {
    pub group: String,
    pub level: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub fn record(student: &str, team: &str, session: &str) -> StudentRecord {
        StudentRecord {
            student_id: student.to_string(),
            team_id: team.to_string(),
            session_id: session.to_string(),
            personality_type: "INTJ".to_string(),
            learning_style: "reflector".to_string(),
            content_engaging: 4,
            background: 3,
            fits_needs: 3,
            observed_contribution: 4.0,
            peer_contribution_score: 4.0,
            opinion_before: 3,
            post_quiz: 4.0,
            group_grade: 4.5,
            learning_outcome: 1.0,
        }
    }

    pub fn dyad_dataset() -> SessionDataset {
        let mut ds = SessionDataset {
            records: vec![record("s1", "t1", "a"), record("s2", "t1", "a")],
            ratings: BTreeMap::new(),
        };
        ds.ratings
            .insert(("a".into(), "s1".into(), "s2".into()), 4.0);
        ds.ratings
            .insert(("a".into(), "s2".into(), "s1".into()), 2.0);
        ds
    }

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        p
    }

    const DYAD_RECORDS: &str = "\
student_id,team_id,session_id,personality_type,learning_style,content_engaging,background,fits_needs,observed_contribution,peer_contribution_score,opinion_before,post_quiz,group_grade
s1,t1,a,INTJ,reflector,4,3,3,4.0,4.0,3,4.0,4.5
s2,t1,a,ENFP,activist,5,2,4,3.5,3.0,4,3.0,4.5
";

    const DYAD_RATINGS: &str = "\
session_id,rater_id,ratee_id,score
a,s1,s2,4.0
a,s2,s1,2.0
";

    #[test]
    fn load_minimal_dyad() {
        let dir = tempfile::tempdir().unwrap();
        let rp = write_file(dir.path(), "records.csv", DYAD_RECORDS);
        let sp = write_file(dir.path(), "ratings.csv", DYAD_RATINGS);
        let ds = SessionDataset::load(&rp, &sp).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.n_groups(), 1);
        assert_eq!(ds.records[0].learning_outcome, 1.0);
        assert_eq!(ds.rating("a", "s2", "s1"), Some(2.0));
    }

    #[test]
    fn range_violation_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let bad = DYAD_RECORDS.replace("s2,t1,a,ENFP,activist,5", "s2,t1,a,ENFP,activist,6");
        let rp = write_file(dir.path(), "records.csv", &bad);
        let sp = write_file(dir.path(), "ratings.csv", DYAD_RATINGS);
        match SessionDataset::load(&rp, &sp) {
            Err(DatasetError::Range {
                line,
                column,
                value,
                ..
            }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "content_engaging");
                assert_eq!(value, 6.0);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn oversized_team_is_rejected() {
        let mut ds = dyad_dataset();
        for i in 3..=5 {
            ds.records.push(record(&format!("s{i}"), "t1", "a"));
        }
        match ds.validate() {
            Err(DatasetError::TeamSize { size, .. }) => assert_eq!(size, 5),
            other => panic!("expected team-size error, got {other:?}"),
        }
    }

    #[test]
    fn missing_rating_pair_is_rejected() {
        let mut ds = dyad_dataset();
        ds.ratings.remove(&("a".into(), "s2".into(), "s1".into()));
        assert!(matches!(
            ds.validate(),
            Err(DatasetError::MissingRating { .. })
        ));
    }

    #[test]
    fn duplicate_student_session_is_rejected() {
        let mut ds = dyad_dataset();
        ds.records.push(record("s1", "t1", "a"));
        // make team size legal first: 3 members but s1 twice
        assert!(matches!(
            ds.validate(),
            Err(DatasetError::DuplicateRecord { .. })
        ));
    }

    #[test]
    fn every_violation_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let bad = DYAD_RECORDS
            .replace("s1,t1,a,INTJ,reflector,4,3", "s1,t1,a,INTJ,reflector,9,3")
            .replace("s2,t1,a,ENFP,activist,5,2", "s2,t1,a,ENFP,activist,5,7");
        let rp = write_file(dir.path(), "records.csv", &bad);
        let sp = write_file(dir.path(), "ratings.csv", DYAD_RATINGS);
        match SessionDataset::load(&rp, &sp) {
            Err(DatasetError::Multiple { errors }) => {
                assert_eq!(errors.len(), 2); // one bad ordinal per row
                assert!(errors
                    .iter()
                    .all(|e| matches!(e, DatasetError::Range { .. })));
            }
            other => panic!("expected a combined error, got {other:?}"),
        }
    }

    #[test]
    fn derive_outcomes_examples() {
        let mut ds = dyad_dataset();
        ds.records[0].post_quiz = 4.0;
        ds.records[0].background = 2;
        ds.records[1].post_quiz = 1.0;
        ds.records[1].background = 5;
        ds.derive_outcomes();
        assert_eq!(ds.records[0].learning_outcome, 2.0);
        assert_eq!(ds.records[1].learning_outcome, -4.0);
        // idempotent: second run changes nothing and warns about nothing
        let w = ds.derive_outcomes();
        assert!(w.is_empty());
        assert_eq!(ds.records[0].learning_outcome, 2.0);

        ds.records[0].learning_outcome = 3.3;
        let w = ds.derive_outcomes();
        assert_eq!(w.len(), 1);
        assert_eq!(ds.records[0].learning_outcome, 2.0);
    }

    #[test]
    fn describe_reports_shape_and_absent_sd() {
        let ds = dyad_dataset();
        let report = ds.describe().unwrap();
        assert_eq!(report.n_records, 2);
        assert_eq!(report.n_groups, 1);
        assert_eq!(report.group_sizes.get(&2), Some(&1));

        let single = SessionDataset {
            records: vec![record("s1", "t1", "a")],
            ratings: BTreeMap::new(),
        };
        let report = single.describe().unwrap();
        assert!(report.continuous.iter().all(|c| c.sd.is_none()));

        let empty = SessionDataset::default();
        assert!(matches!(empty.describe(), Err(DatasetError::Empty)));
    }

    #[test]
    fn group_summaries_quantiles() {
        let mut ds = dyad_dataset();
        ds.records.push(record("s3", "t1", "a"));
        ds.records.push(record("s4", "t1", "a"));
        for (i, v) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
            ds.records[i].observed_contribution = *v;
            ds.records[i].learning_style = "reflector".to_string();
        }
        let rows = ds
            .group_summaries("learning_style", "observed_contribution")
            .unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.count, 4);
        assert!((row.q1 - 1.75).abs() < 1e-12);
        assert!((row.median - 2.5).abs() < 1e-12);
        assert!((row.q3 - 3.25).abs() < 1e-12);
        assert!(
            row.min <= row.q1 && row.q1 <= row.median && row.median <= row.q3 && row.q3 <= row.max
        );

        assert!(matches!(
            ds.group_summaries("nope", "observed_contribution"),
            Err(DatasetError::UnknownGrouping { .. })
        ));
        assert!(matches!(
            ds.group_summaries("team", "nope"),
            Err(DatasetError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn constant_variable_degenerate_quantiles() {
        let ds = dyad_dataset();
        let rows = ds.group_summaries("team", "observed_contribution").unwrap();
        let row = &rows[0];
        assert_eq!(row.min, row.max);
        assert_eq!(row.q1, row.median);
        assert_eq!(row.median, row.q3);
    }

    #[test]
    fn bundled_fixture_matches_the_reference_means() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let ds = SessionDataset::load(&dir.join("records.csv"), &dir.join("ratings.csv")).unwrap();
        let report = ds.describe().unwrap();
        assert_eq!(report.n_records, 87);
        let targets = [
            ("observed_contribution", 4.4176),
            ("content_engaging", 4.0000),
            ("background", 3.3297),
            ("fits_needs", 3.4615),
            ("opinion_before", 3.5165),
            ("group_grade", 4.4132),
        ];
        for (name, target) in targets {
            let mean = report
                .continuous
                .iter()
                .find(|c| c.variable == name)
                .unwrap()
                .mean;
            assert!((mean - target).abs() <= 0.15, "{name}: {mean} vs {target}");
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = dyad_dataset();
        ds.records[1].observed_contribution = 3.25;
        ds.derive_outcomes();
        let rp = dir.path().join("records.csv");
        let sp = dir.path().join("ratings.csv");
        ds.save(&rp, &sp).unwrap();
        let loaded = SessionDataset::load(&rp, &sp).unwrap();
        assert_eq!(ds.records, loaded.records);
        assert_eq!(ds.ratings, loaded.ratings);
    }

    #[test]
    fn missing_file_reports_not_found() {
        let err = SessionDataset::load(
            Path::new("/nonexistent/records.csv"),
            Path::new("/nonexistent/ratings.csv"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("file not found"), "{err}");
    }
}
