//! Deterministic synthetic session datasets.
//!
//! Generation follows the same two-level structure the models assume: per-team
//! Gaussian intercept shifts plus per-record noise on top of linear predictor
//! effects, censored into the bounded score ranges. Censoring counts are
//! reported so callers can reject configurations that distort the generating
//! moments too far. A fixed seed reproduces the dataset bit for bit.
//!
//! Draw order (one ChaCha8 stream): teams in id order; per member the six
//! categorical/ordinal features; per team the three group effects and per
//! member the three response noises; finally one rating per ordered pair.
//! Zero-variance components skip their draw, so fully deterministic configs
//! produce exactly linear responses.

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use thiserror::Error;

use crate::conf::{ConfigError, KvConfig};
use crate::dataset::{SessionDataset, StudentRecord};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("config {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("generated dataset failed validation: {0}")]
    Validation(#[from] crate::dataset::DatasetError),
}

fn invalid(field: &str, message: impl Into<String>) -> SynthError {
    SynthError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Probabilities over the ordinal levels 1..=5.
#[derive(Debug, Clone)]
pub struct OrdinalSpec {
    pub probs: [f64; 5],
}

impl OrdinalSpec {
    fn validate(&self, field: &str) -> Result<(), SynthError> {
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid(field, "probabilities must be nonnegative reals"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid(
                field,
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(())
    }

    /// Expected level under this distribution.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k + 1) as f64 * p)
            .sum::<f64>()
            / self.probs.iter().sum::<f64>()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u8 {
        let total: f64 = self.probs.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return (k + 1) as u8;
            }
        }
        5
    }
}

/// Two-level generating model for one response: intercept, named linear
/// effects, between-group variance τ² and residual variance σ².
#[derive(Debug, Clone)]
pub struct ResponseSpec {
    pub intercept: f64,
    pub effects: Vec<(String, f64)>,
    pub tau2: f64,
    pub sigma2: f64,
}

impl ResponseSpec {
    fn validate(&self, field: &str, allow_contribution: bool) -> Result<(), SynthError> {
        for v in [self.intercept, self.tau2, self.sigma2] {
            if !v.is_finite() {
                return Err(invalid(field, "parameters must be finite"));
            }
        }
        if self.tau2 < 0.0 || self.sigma2 < 0.0 {
            return Err(invalid(field, "variances must be nonnegative"));
        }
        for (name, beta) in &self.effects {
            if !beta.is_finite() {
                return Err(invalid(field, format!("effect '{name}' must be finite")));
            }
            let known = matches!(
                name.as_str(),
                "content_engaging" | "background" | "fits_needs" | "opinion_before"
            ) || (allow_contribution && name == "observed_contribution");
            if !known {
                return Err(invalid(field, format!("unknown effect column '{name}'")));
            }
        }
        Ok(())
    }
}

/// Everything the generator needs: group-size histogram, feature
/// distributions and the three response models.
#[derive(Debug, Clone)]
pub struct GenConfig {
    /// size -> number of teams of that size (sizes 2..=4).
    pub group_sizes: BTreeMap<usize, usize>,
    /// Teams are assigned round-robin to this many sessions.
    pub n_sessions: usize,
    pub personality_levels: Vec<(String, f64)>,
    pub learning_style_levels: Vec<(String, f64)>,
    pub content_engaging: OrdinalSpec,
    pub background: OrdinalSpec,
    pub fits_needs: OrdinalSpec,
    pub opinion_before: OrdinalSpec,
    pub contribution: ResponseSpec,
    pub post_quiz: ResponseSpec,
    pub group_grade: ResponseSpec,
    /// Ratings are the ratee's contribution plus noise of this SD, censored.
    pub rating_noise_sd: f64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.group_sizes.is_empty() || self.group_sizes.values().all(|c| *c == 0) {
            return Err(invalid("groups", "at least one team required"));
        }
        for (&size, _) in &self.group_sizes {
            if !(2..=4).contains(&size) {
                return Err(invalid("groups", format!("team size {size} outside 2..=4")));
            }
        }
        if self.n_sessions == 0 {
            return Err(invalid("sessions", "need at least one session"));
        }
        for (field, levels) in [
            ("personality.levels", &self.personality_levels),
            ("learning_style.levels", &self.learning_style_levels),
        ] {
            if levels.is_empty() {
                return Err(invalid(field, "at least one level required"));
            }
            let total: f64 = levels.iter().map(|(_, w)| w).sum();
            if levels.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) || total <= 0.0 {
                return Err(invalid(
                    field,
                    "weights must be nonnegative with positive sum",
                ));
            }
        }
        self.content_engaging.validate("content_engaging.probs")?;
        self.background.validate("background.probs")?;
        self.fits_needs.validate("fits_needs.probs")?;
        self.opinion_before.validate("opinion_before.probs")?;
        self.contribution.validate("contribution", false)?;
        self.post_quiz.validate("post_quiz", true)?;
        self.group_grade.validate("group_grade", true)?;
        if !(self.rating_noise_sd.is_finite() && self.rating_noise_sd >= 0.0) {
            return Err(invalid("rating_noise_sd", "must be a nonnegative real"));
        }
        Ok(())
    }

    /// The bundled session-study shape: 31 teams (11 dyads, 15 triads, 5
    /// four-member teams, 87 records over two sessions) with feature and
    /// response moments matched to the reference descriptive table by an
    /// offline censored-normal solver.
    pub fn study_shape() -> GenConfig {
        let text = include_str!("../fixtures/study_shape.conf");
        GenConfig::from_kv(
            KvConfig::from_str_named(text, "study_shape.conf").expect("bundled config"),
        )
        .expect("bundled config is valid")
    }

    pub fn from_file(path: &Path) -> Result<GenConfig, SynthError> {
        GenConfig::from_kv(KvConfig::from_file(path)?)
    }

    fn from_kv(mut kv: KvConfig) -> Result<GenConfig, SynthError> {
        let mut group_sizes = BTreeMap::new();
        for size in 2..=4usize {
            let count = kv.get_usize(&format!("groups.size{size}"), 0)?;
            if count > 0 {
                group_sizes.insert(size, count);
            }
        }
        let n_sessions = kv.get_usize("sessions", 2)?;
        let personality_levels = kv.require_weighted_levels("personality.levels")?;
        let learning_style_levels = kv.require_weighted_levels("learning_style.levels")?;
        let ordinal = |kv: &mut KvConfig, key: &str| -> Result<OrdinalSpec, SynthError> {
            let v = kv.require_f64_list(key, 5)?;
            Ok(OrdinalSpec {
                probs: [v[0], v[1], v[2], v[3], v[4]],
            })
        };
        let content_engaging = ordinal(&mut kv, "content_engaging.probs")?;
        let background = ordinal(&mut kv, "background.probs")?;
        let fits_needs = ordinal(&mut kv, "fits_needs.probs")?;
        let opinion_before = ordinal(&mut kv, "opinion_before.probs")?;
        let response = |kv: &mut KvConfig, name: &str| -> Result<ResponseSpec, SynthError> {
            Ok(ResponseSpec {
                intercept: kv.require_f64(&format!("{name}.intercept"))?,
                effects: kv.take_prefixed_f64(&format!("{name}.beta."))?,
                tau2: kv.require_f64(&format!("{name}.tau2"))?,
                sigma2: kv.require_f64(&format!("{name}.sigma2"))?,
            })
        };
        let contribution = response(&mut kv, "contribution")?;
        let post_quiz = response(&mut kv, "post_quiz")?;
        let group_grade = response(&mut kv, "group_grade")?;
        let rating_noise_sd = kv.get_f64("rating_noise_sd", 0.7)?;
        kv.finish()?;
        let config = GenConfig {
            group_sizes,
            n_sessions,
            personality_levels,
            learning_style_levels,
            content_engaging,
            background,
            fits_needs,
            opinion_before,
            contribution,
            post_quiz,
            group_grade,
            rating_noise_sd,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Censoring counters for one generated variable.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClampCount {
    pub clamped: usize,
    pub total: usize,
}

impl ClampCount {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clamped as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClampReport {
    pub per_variable: BTreeMap<String, ClampCount>,
}

impl ClampReport {
    fn record(&mut self, variable: &str, clamped: bool) {
        let entry = self.per_variable.entry(variable.to_string()).or_default();
        entry.total += 1;
        if clamped {
            entry.clamped += 1;
        }
    }

    pub fn total_fraction(&self) -> f64 {
        let (c, t) = self
            .per_variable
            .values()
            .fold((0usize, 0usize), |(c, t), e| (c + e.clamped, t + e.total));
        if t == 0 {
            0.0
        } else {
            c as f64 / t as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: SessionDataset,
    pub clamps: ClampReport,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn sample_weighted(levels: &[(String, f64)], rng: &mut ChaCha8Rng) -> String {
    let total: f64 = levels.iter().map(|(_, w)| w).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (label, w) in levels {
        acc += w;
        if u < acc {
            return label.clone();
        }
    }
    levels.last().expect("nonempty levels").0.clone()
}

fn censor(value: f64, lo: f64, hi: f64, variable: &str, clamps: &mut ClampReport) -> f64 {
    let clamped = value < lo || value > hi;
    clamps.record(variable, clamped);
    value.clamp(lo, hi)
}

/// Generate a dataset from the config; identical seeds give identical bytes.
pub fn synthesize(config: &GenConfig, seed: u64) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clamps = ClampReport::default();
    let mut dataset = SessionDataset::default();

    let mut sizes = Vec::new();
    for (&size, &count) in &config.group_sizes {
        sizes.extend(std::iter::repeat_n(size, count));
    }

    let mut student_serial = 0usize;
    for (team_idx, &size) in sizes.iter().enumerate() {
        let team_id = format!("t{:02}", team_idx + 1);
        let session_id = format!("s{}", team_idx % config.n_sessions + 1);

        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            student_serial += 1;
            members.push(StudentRecord {
                student_id: format!("p{student_serial:03}"),
                team_id: team_id.clone(),
                session_id: session_id.clone(),
                personality_type: sample_weighted(&config.personality_levels, &mut rng),
                learning_style: sample_weighted(&config.learning_style_levels, &mut rng),
                content_engaging: config.content_engaging.sample(&mut rng),
                background: config.background.sample(&mut rng),
                fits_needs: config.fits_needs.sample(&mut rng),
                observed_contribution: 0.0,
                peer_contribution_score: 0.0,
                opinion_before: config.opinion_before.sample(&mut rng),
                post_quiz: 0.0,
                group_grade: 0.0,
                learning_outcome: 0.0,
            });
        }

        let draw_group = |spec: &ResponseSpec, rng: &mut ChaCha8Rng| {
            if spec.tau2 > 0.0 {
                spec.tau2.sqrt() * standard_normal(rng)
            } else {
                0.0
            }
        };
        let u_contribution = draw_group(&config.contribution, &mut rng);
        let u_post_quiz = draw_group(&config.post_quiz, &mut rng);
        let u_group_grade = draw_group(&config.group_grade, &mut rng);

        for m in &mut members {
            let linear = |spec: &ResponseSpec, record: &StudentRecord| -> f64 {
                let mut v = spec.intercept;
                for (name, beta) in &spec.effects {
                    let x = match name.as_str() {
                        "content_engaging" => record.content_engaging as f64,
                        "background" => record.background as f64,
                        "fits_needs" => record.fits_needs as f64,
                        "opinion_before" => record.opinion_before as f64,
                        "observed_contribution" => record.observed_contribution,
                        _ => unreachable!("validated effect name"),
                    };
                    v += beta * x;
                }
                v
            };
            let noise = |spec: &ResponseSpec, rng: &mut ChaCha8Rng| {
                if spec.sigma2 > 0.0 {
                    spec.sigma2.sqrt() * standard_normal(rng)
                } else {
                    0.0
                }
            };
            let c = linear(&config.contribution, m)
                + u_contribution
                + noise(&config.contribution, &mut rng);
            m.observed_contribution = censor(c, 0.0, 5.0, "observed_contribution", &mut clamps);
            let q = linear(&config.post_quiz, m) + u_post_quiz + noise(&config.post_quiz, &mut rng);
            m.post_quiz = censor(q, 0.0, 5.0, "post_quiz", &mut clamps);
            let g = linear(&config.group_grade, m)
                + u_group_grade
                + noise(&config.group_grade, &mut rng);
            m.group_grade = censor(g, 0.0, 5.0, "group_grade", &mut clamps);
            m.learning_outcome = m.post_quiz - m.background as f64;
        }

        // peer ratings: ratee's contribution plus noise, censored to the scale
        let mut received: Vec<Vec<f64>> = vec![Vec::new(); size];
        for rater in 0..size {
            for ratee in 0..size {
                if rater == ratee {
                    continue;
                }
                let mut score = members[ratee].observed_contribution;
                if config.rating_noise_sd > 0.0 {
                    score += config.rating_noise_sd * standard_normal(&mut rng);
                }
                let score = censor(score, 0.0, 5.0, "rating", &mut clamps);
                received[ratee].push(score);
                dataset.ratings.insert(
                    (
                        session_id.clone(),
                        members[rater].student_id.clone(),
                        members[ratee].student_id.clone(),
                    ),
                    score,
                );
            }
        }
        for (m, scores) in members.iter_mut().zip(&received) {
            m.peer_contribution_score = scores.iter().sum::<f64>() / scores.len() as f64;
        }
        dataset.records.extend(members);
    }

    dataset.validate()?;
    Ok(SynthOutput { dataset, clamps })
}
