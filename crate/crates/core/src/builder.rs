//! Construct TU games from per-group session records and classify group
//! stability.
//!
//! Two constructions are supported. The opinion-based game values a singleton
//! by the member's topic background and a larger coalition by the average
//! peer rating exchanged inside it; the contribution-based game values every
//! coalition by the average observed contribution of its members. Both carry
//! explicit proportionality scales, default 1.
//!
//! A coalition's value depends only on its own members' records and on
//! ratings exchanged between them, so perturbing outsiders never moves it.

use serde::Serialize;
use thiserror::Error;

use crate::coalition::Coalition;
use crate::dataset::{GroupKey, SessionDataset, StudentRecord};
use crate::game::{
    tol, BlockingCoalition, GameError, GameProperty, PayoffVector, PropertyWitness, TUGame,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameMode {
    OpinionBased,
    ContributionBased,
}

impl std::str::FromStr for GameMode {
    type Err = BuildError;

    fn from_str(s: &str) -> Result<Self, BuildError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "opinion" | "opinion-based" => Ok(GameMode::OpinionBased),
            "contribution" | "contribution-based" => Ok(GameMode::ContributionBased),
            other => Err(BuildError::UnknownMode {
                name: other.to_string(),
            }),
        }
    }
}

/// Construction mode plus the proportionality scales the source analysis
/// leaves unstated: κ₁ scales singleton values (opinion mode only), κ₂
/// scales coalition values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GameConstructionConfig {
    pub mode: GameMode,
    pub singleton_scale: f64,
    pub coalition_scale: f64,
}

impl GameConstructionConfig {
    pub fn opinion() -> Self {
        GameConstructionConfig {
            mode: GameMode::OpinionBased,
            singleton_scale: 1.0,
            coalition_scale: 1.0,
        }
    }

    pub fn contribution() -> Self {
        GameConstructionConfig {
            mode: GameMode::ContributionBased,
            singleton_scale: 1.0,
            coalition_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        for (name, v) in [
            ("singleton_scale", self.singleton_scale),
            ("coalition_scale", self.coalition_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(BuildError::InvalidScale {
                    name: name.to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("unknown game mode '{name}' (expected opinion or contribution)")]
    UnknownMode { name: String },
    #[error("config {name} must be a positive finite real, got {value}")]
    InvalidScale { name: String, value: f64 },
    #[error("config mode {expected:?} does not match requested construction")]
    ModeMismatch { expected: GameMode },
    #[error("opinion games need 2 to 4 members, got {size}")]
    GroupSize { size: usize },
    #[error("records span more than one group: {a} vs {b}")]
    MixedGroups { a: String, b: String },
    #[error("missing rating {rater} -> {ratee} in session '{session}'")]
    IncompleteRatings {
        session: String,
        rater: String,
        ratee: String,
    },
    #[error("missing contribution value for student '{student}'")]
    IncompleteContribution { student: String },
    #[error("empty group")]
    EmptyGroup,
    #[error("game construction failed: {0}")]
    Game(#[from] GameError),
    #[error("team '{team}' in session '{session}': {source}")]
    ForGroup {
        session: String,
        team: String,
        #[source]
        source: Box<BuildError>,
    },
}

fn check_single_group(group: &[&StudentRecord]) -> Result<GroupKey, BuildError> {
    let first = group.first().ok_or(BuildError::EmptyGroup)?;
    let key = first.group();
    for r in group.iter().skip(1) {
        let other = r.group();
        if other != key {
            return Err(BuildError::MixedGroups {
                a: key.to_string(),
                b: other.to_string(),
            });
        }
    }
    Ok(key)
}

/// Opinion-based game: `v({i}) = κ₁ · background_i`; for `|S| ≥ 2`,
/// `v(S) = κ₂ ·` mean over ordered member pairs `(r, m)` of `rating(r → m)`.
/// Raters outside `S` never contribute.
pub fn build_opinion_game(
    group: &[&StudentRecord],
    ratings: &SessionDataset,
    config: &GameConstructionConfig,
) -> Result<TUGame, BuildError> {
    config.validate()?;
    if config.mode != GameMode::OpinionBased {
        return Err(BuildError::ModeMismatch {
            expected: config.mode,
        });
    }
    let key = check_single_group(group)?;
    let n = group.len();
    if !(2..=4).contains(&n) {
        return Err(BuildError::GroupSize { size: n });
    }

    // rating[r][m] for ordered pairs of group positions
    let mut rating = vec![vec![0.0f64; n]; n];
    for (r, rater) in group.iter().enumerate() {
        for (m, ratee) in group.iter().enumerate() {
            if r != m {
                rating[r][m] = ratings
                    .rating(&key.session_id, &rater.student_id, &ratee.student_id)
                    .ok_or_else(|| BuildError::IncompleteRatings {
                        session: key.session_id.clone(),
                        rater: rater.student_id.clone(),
                        ratee: ratee.student_id.clone(),
                    })?;
            }
        }
    }

    let game = TUGame::from_fn(n, |c| {
        if c.size() == 1 {
            let p = c.players()[0];
            config.singleton_scale * group[p - 1].background as f64
        } else {
            let members = c.players();
            let mut sum = 0.0;
            let mut count = 0usize;
            for &r in &members {
                for &m in &members {
                    if r != m {
                        sum += rating[r - 1][m - 1];
                        count += 1;
                    }
                }
            }
            config.coalition_scale * (sum / count as f64)
        }
    })?;
    Ok(game)
}

/// Contribution-based game: `v(S) = κ₂ ·` mean observed contribution of the
/// members of `S`, singletons included (κ₁ is unused in this mode).
pub fn build_contribution_game(
    group: &[&StudentRecord],
    config: &GameConstructionConfig,
) -> Result<TUGame, BuildError> {
    config.validate()?;
    if config.mode != GameMode::ContributionBased {
        return Err(BuildError::ModeMismatch {
            expected: config.mode,
        });
    }
    check_single_group(group)?;
    for r in group {
        if !r.observed_contribution.is_finite() {
            return Err(BuildError::IncompleteContribution {
                student: r.student_id.clone(),
            });
        }
    }
    let game = TUGame::from_fn(group.len(), |c| {
        let members = c.players();
        let sum: f64 = members
            .iter()
            .map(|&p| group[p - 1].observed_contribution)
            .sum();
        config.coalition_scale * (sum / members.len() as f64)
    })?;
    Ok(game)
}

/// Build the configured game for one member list.
pub fn build_game(
    group: &[&StudentRecord],
    dataset: &SessionDataset,
    config: &GameConstructionConfig,
) -> Result<TUGame, BuildError> {
    match config.mode {
        GameMode::OpinionBased => build_opinion_game(group, dataset, config),
        GameMode::ContributionBased => build_contribution_game(group, config),
    }
}

/// Stability classification of one group's game: structural properties, core
/// emptiness and the coalitions that block the equal-split allocation.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub group_id: String,
    pub game: TUGame,
    pub additive: PropertyWitness,
    pub superadditive: PropertyWitness,
    pub core_empty: bool,
    /// Coalitions blocking the equal split `x_i = v(N)/n`, with deficits.
    pub blocking_coalitions: Vec<BlockingCoalition>,
    /// `v(N) − Σ_i v({i})`: what the grand coalition adds over going alone.
    pub grand_coalition_gain: f64,
}

/// Classify a game's stability. Blocking coalitions are measured against the
/// equal-split reference allocation.
pub fn stability_report(game: &TUGame, group_id: &str) -> Result<StabilityReport, BuildError> {
    let n = game.n();
    let equal_split = PayoffVector::new(vec![game.grand_value() / n as f64; n])?;
    let membership = game.core_contains(&equal_split)?;
    let core_empty = game.core_is_empty()?.is_empty();
    let singleton_sum: f64 = (1..=n).map(|p| game.value(Coalition::singleton(p))).sum();
    Ok(StabilityReport {
        group_id: group_id.to_string(),
        game: game.clone(),
        additive: game.check_property(GameProperty::Additivity),
        superadditive: game.check_property(GameProperty::Superadditivity),
        core_empty,
        blocking_coalitions: membership.violations,
        grand_coalition_gain: game.grand_value() - singleton_sum,
    })
}

/// A constructed game for one group, with the player-to-student mapping
/// (players are numbered by ascending student id).
#[derive(Debug, Clone)]
pub struct GroupGame {
    pub group: GroupKey,
    pub students: Vec<String>,
    pub game: TUGame,
}

/// Build one game per group, in group-key order.
pub fn group_games(
    dataset: &SessionDataset,
    config: &GameConstructionConfig,
) -> Result<Vec<GroupGame>, BuildError> {
    let mut out = Vec::new();
    for (key, members) in dataset.group_members() {
        let game = build_game(&members, dataset, config).map_err(|e| BuildError::ForGroup {
            session: key.session_id.clone(),
            team: key.team_id.clone(),
            source: Box::new(e),
        })?;
        out.push(GroupGame {
            group: key,
            students: members.iter().map(|r| r.student_id.clone()).collect(),
            game,
        });
    }
    Ok(out)
}

/// Shapley value of every student under the configured construction, keyed by
/// `(session_id, student_id)`. Within each group the values sum to `v(N)`.
pub fn shapley_per_student(
    dataset: &SessionDataset,
    config: &GameConstructionConfig,
) -> Result<std::collections::BTreeMap<(String, String), f64>, BuildError> {
    let mut out = std::collections::BTreeMap::new();
    for gg in group_games(dataset, config)? {
        let phi = gg.game.shapley();
        debug_assert!((phi.sum() - gg.game.grand_value()).abs() <= tol(gg.game.grand_value()));
        for (student, value) in gg.students.iter().zip(phi.iter()) {
            out.insert((gg.group.session_id.clone(), student.clone()), *value);
        }
    }
    Ok(out)
}
