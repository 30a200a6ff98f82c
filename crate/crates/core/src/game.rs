//! Transferable-utility cooperative games: the pair `(N, v)`, Shapley values,
//! core membership and structural property checks.
//!
//! A game stores one finite value per coalition, `v(∅) = 0` enforced at
//! construction. Every operation is a pure function of the game, iterates
//! coalitions in ascending mask order and is therefore bit-deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{Coalition, MAX_PLAYERS};

/// Hybrid absolute/relative tolerance used throughout the game module.
pub fn tol(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("player count must be between 1 and {MAX_PLAYERS}, got {n}")]
    PlayerCountRange { n: usize },
    #[error("v(empty) must be exactly 0, got {value}")]
    EmptyCoalitionValue { value: f64 },
    #[error("value for coalition {{{label}}} is not finite")]
    NonFiniteValue { label: String },
    #[error("coalition table must have {expected} entries, got {got}")]
    TableSize { expected: usize, got: usize },
    #[error("missing value for coalition {{{label}}}")]
    MissingCoalition { label: String },
    #[error("invalid coalition label '{label}'")]
    InvalidCoalitionLabel { label: String },
    #[error("player {player} out of range for an {n}-player game")]
    PlayerOutOfRange { player: usize, n: usize },
    #[error("duplicate player {player}")]
    DuplicatePlayer { player: usize },
    #[error("order is not a permutation of 1..={n}: {reason}")]
    InvalidOrder { n: usize, reason: String },
    #[error("payoff vector has {got} entries but the game has {expected} players")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("payoff entry {index} is not finite")]
    NonFinitePayoff { index: usize },
    #[error("core emptiness supports at most {max} players, got {n}")]
    CapacityExceeded { n: usize, max: usize },
    #[error("linear program did not terminate within the iteration bound")]
    LpIterationBound,
    #[error("unknown property '{name}' (expected additivity, superadditivity or convexity)")]
    UnknownProperty { name: String },
}

/// A TU game `(N, v)`: player count plus a total table of coalition values.
#[derive(Debug, Clone, PartialEq)]
pub struct TUGame {
    n: usize,
    values: Vec<f64>,
}

impl TUGame {
    /// Build from a dense table indexed by coalition mask (`values[0]` is `v(∅)`).
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, GameError> {
        if n == 0 || n > MAX_PLAYERS {
            return Err(GameError::PlayerCountRange { n });
        }
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(GameError::TableSize {
                expected,
                got: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(GameError::EmptyCoalitionValue { value: values[0] });
        }
        for (mask, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GameError::NonFiniteValue {
                    label: Coalition(mask as u32).label(),
                });
            }
        }
        Ok(TUGame { n, values })
    }

    /// Build by evaluating `f` on every coalition; `v(∅)` is forced to 0.
    pub fn from_fn(n: usize, mut f: impl FnMut(Coalition) -> f64) -> Result<Self, GameError> {
        let mut values = vec![0.0; 1 << n];
        for c in Coalition::nonempty(n) {
            values[c.0 as usize] = f(c);
        }
        TUGame::new(n, values)
    }

    /// Additive game with `v(S) = Σ_{i∈S} w_i`.
    pub fn additive(weights: &[f64]) -> Result<Self, GameError> {
        let n = weights.len();
        if n == 0 || n > MAX_PLAYERS {
            return Err(GameError::PlayerCountRange { n });
        }
        TUGame::from_fn(n, |c| c.players().iter().map(|&p| weights[p - 1]).sum())
    }

    /// Unanimity game on the grand coalition: `v(N) = 1`, everything else 0.
    pub fn unanimity(n: usize) -> Result<Self, GameError> {
        TUGame::from_fn(n, |c| if c == Coalition::grand(n) { 1.0 } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, coalition: Coalition) -> f64 {
        self.values[coalition.0 as usize]
    }

    pub fn grand_value(&self) -> f64 {
        self.value(Coalition::grand(self.n))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coalition-wise sum of two games over the same player set.
    pub fn sum(&self, other: &TUGame) -> Result<TUGame, GameError> {
        if self.n != other.n {
            return Err(GameError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        TUGame::new(self.n, values)
    }

    /// Shapley value: each player's factorial-weighted average marginal contribution.
    pub fn shapley(&self) -> PayoffVector {
        let n = self.n;
        let fact = factorials(n);
        // weight[s] applies to coalitions of size s that contain the player
        let weight: Vec<f64> = (0..=n)
            .map(|s| {
                if s == 0 {
                    0.0
                } else {
                    fact[s - 1] * fact[n - s] / fact[n]
                }
            })
            .collect();
        let mut phi = vec![0.0; n];
        for c in Coalition::nonempty(n) {
            let w = weight[c.size()];
            let v_with = self.value(c);
            for p in 1..=n {
                if c.contains(p) {
                    phi[p - 1] += w * (v_with - self.value(c.without(p)));
                }
            }
        }
        PayoffVector(phi)
    }

    /// Marginal-contribution vector for one join order.
    pub fn marginal_vector(&self, order: &[usize]) -> Result<PayoffVector, GameError> {
        let n = self.n;
        if order.len() != n {
            return Err(GameError::InvalidOrder {
                n,
                reason: format!("length {} != {}", order.len(), n),
            });
        }
        let mut seen = Coalition::EMPTY;
        let mut out = vec![0.0; n];
        for &p in order {
            if p == 0 || p > n {
                return Err(GameError::InvalidOrder {
                    n,
                    reason: format!("player {p} out of range"),
                });
            }
            if seen.contains(p) {
                return Err(GameError::InvalidOrder {
                    n,
                    reason: format!("player {p} repeated"),
                });
            }
            let joined = seen.with(p);
            out[p - 1] = self.value(joined) - self.value(seen);
            seen = joined;
        }
        Ok(PayoffVector(out))
    }

    /// Core membership of a candidate allocation, with every blocking coalition
    /// listed when the answer is negative.
    pub fn core_contains(&self, x: &PayoffVector) -> Result<CoreMembership, GameError> {
        if x.len() != self.n {
            return Err(GameError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let total: f64 = x.iter().sum();
        let grand = self.grand_value();
        let efficient = (total - grand).abs() <= tol(grand);
        let mut violations = Vec::new();
        for c in Coalition::nonempty(self.n) {
            if c == Coalition::grand(self.n) {
                continue;
            }
            let xsum: f64 = c.players().iter().map(|&p| x.0[p - 1]).sum();
            let deficit = self.value(c) - xsum;
            if deficit > 1e-9 {
                violations.push(BlockingCoalition {
                    coalition: c,
                    deficit,
                });
            }
        }
        Ok(CoreMembership {
            contained: efficient && violations.is_empty(),
            efficient,
            violations,
        })
    }

    /// Check additivity, superadditivity or convexity, returning the first
    /// violating witness in ascending coalition-mask order.
    pub fn check_property(&self, property: GameProperty) -> PropertyWitness {
        let n = self.n;
        let grand = Coalition::grand(n);
        match property {
            GameProperty::Additivity | GameProperty::Superadditivity => {
                for s in Coalition::nonempty(n) {
                    let complement = Coalition(grand.0 & !s.0);
                    for t in complement.subsets() {
                        if t.is_empty() {
                            continue;
                        }
                        let joint = self.value(s.union(t));
                        let split = self.value(s) + self.value(t);
                        let eps = tol(joint.abs().max(split.abs()));
                        let violated = match property {
                            GameProperty::Additivity => (joint - split).abs() > eps,
                            _ => joint < split - eps,
                        };
                        if violated {
                            return PropertyWitness {
                                property,
                                holds: false,
                                witness: Some(ViolationWitness {
                                    coalitions: vec![s, t],
                                    lhs: joint,
                                    rhs: split,
                                }),
                            };
                        }
                    }
                }
                PropertyWitness {
                    property,
                    holds: true,
                    witness: None,
                }
            }
            GameProperty::Convexity => {
                for p in 1..=n {
                    let rest = grand.without(p);
                    for t in rest.subsets() {
                        for s in t.subsets() {
                            let gain_small = self.value(s.with(p)) - self.value(s);
                            let gain_large = self.value(t.with(p)) - self.value(t);
                            let eps = tol(gain_small.abs().max(gain_large.abs()));
                            if gain_small > gain_large + eps {
                                return PropertyWitness {
                                    property,
                                    holds: false,
                                    witness: Some(ViolationWitness {
                                        coalitions: vec![s, t, Coalition::singleton(p)],
                                        lhs: gain_small,
                                        rhs: gain_large,
                                    }),
                                };
                            }
                        }
                    }
                }
                PropertyWitness {
                    property,
                    holds: true,
                    witness: None,
                }
            }
        }
    }

    /// Serialize to the JSON exchange object `{"n": .., "values": {"1,3": ..}}`.
    pub fn to_exchange(&self) -> GameExchange {
        let mut values = BTreeMap::new();
        for c in Coalition::nonempty(self.n) {
            values.insert(c.label(), self.value(c));
        }
        GameExchange { n: self.n, values }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_exchange()).expect("game serialization")
    }

    /// Load from the exchange object. Every nonempty coalition must be present;
    /// an `""` entry for the empty set is optional but must equal 0.
    pub fn from_exchange(exchange: &GameExchange) -> Result<Self, GameError> {
        let n = exchange.n;
        if n == 0 || n > MAX_PLAYERS {
            return Err(GameError::PlayerCountRange { n });
        }
        let mut values = vec![f64::NAN; 1 << n];
        values[0] = 0.0;
        for (label, &v) in &exchange.values {
            let c = Coalition::parse_label(label, n)?;
            if c.is_empty() {
                if v != 0.0 {
                    return Err(GameError::EmptyCoalitionValue { value: v });
                }
                continue;
            }
            values[c.0 as usize] = v;
        }
        for c in Coalition::nonempty(n) {
            if values[c.0 as usize].is_nan() {
                return Err(GameError::MissingCoalition { label: c.label() });
            }
        }
        TUGame::new(n, values)
    }

    pub fn from_json(text: &str) -> Result<Self, GameError> {
        let exchange: GameExchange =
            serde_json::from_str(text).map_err(|e| GameError::InvalidCoalitionLabel {
                label: e.to_string(),
            })?;
        TUGame::from_exchange(&exchange)
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut fact = vec![1.0; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    fact
}

/// JSON exchange form of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameExchange {
    pub n: usize,
    pub values: BTreeMap<String, f64>,
}

/// One payoff per player, in player order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector(pub Vec<f64>);

impl PayoffVector {
    pub fn new(x: Vec<f64>) -> Result<Self, GameError> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(GameError::NonFinitePayoff { index: i });
        }
        Ok(PayoffVector(x))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A coalition that can improve on a candidate allocation, with its shortfall.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockingCoalition {
    pub coalition: Coalition,
    pub deficit: f64,
}

/// Result of a core-membership test.
#[derive(Debug, Clone)]
pub struct CoreMembership {
    pub contained: bool,
    pub efficient: bool,
    pub violations: Vec<BlockingCoalition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameProperty {
    Additivity,
    Superadditivity,
    Convexity,
}

impl GameProperty {
    pub fn name(self) -> &'static str {
        match self {
            GameProperty::Additivity => "additivity",
            GameProperty::Superadditivity => "superadditivity",
            GameProperty::Convexity => "convexity",
        }
    }
}

impl std::str::FromStr for GameProperty {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, GameError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additivity" | "additive" => Ok(GameProperty::Additivity),
            "superadditivity" | "superadditive" => Ok(GameProperty::Superadditivity),
            "convexity" | "convex" => Ok(GameProperty::Convexity),
            other => Err(GameError::UnknownProperty {
                name: other.to_string(),
            }),
        }
    }
}

/// Outcome of a property check; `witness` is present exactly when it fails.
#[derive(Debug, Clone)]
pub struct PropertyWitness {
    pub property: GameProperty,
    pub holds: bool,
    pub witness: Option<ViolationWitness>,
}

/// The coalitions and the two compared quantities of a violated inequality.
/// For additivity and superadditivity the coalitions are `[S, T]` with
/// `lhs = v(S∪T)` and `rhs = v(S)+v(T)`; for convexity they are `[S, T, {i}]`
/// with the marginal gains of `i` at `S` and at `T`.
#[derive(Debug, Clone)]
pub struct ViolationWitness {
    pub coalitions: Vec<Coalition>,
    pub lhs: f64,
    pub rhs: f64,
}
