//! Coalitions encoded as bitmasks over players `1..=n` (player `i` <-> bit `i - 1`).
//!
//! All iteration helpers yield coalitions in ascending mask order, which is the
//! deterministic order every witness and report in this crate relies on.

use std::fmt;

use crate::game::GameError;

/// Maximum number of players a game may have (2^n coalition values are stored).
pub const MAX_PLAYERS: usize = 16;

/// A subset of the player set `{1..n}`, stored as an `n`-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    /// The grand coalition `{1..n}`.
    pub fn grand(n: usize) -> Self {
        debug_assert!(n <= MAX_PLAYERS);
        Coalition(((1u64 << n) - 1) as u32)
    }

    /// Singleton `{player}` (1-based).
    pub fn singleton(player: usize) -> Self {
        Coalition(1 << (player - 1))
    }

    /// Build from 1-based player ids; duplicates and out-of-range ids are rejected.
    pub fn from_players(players: &[usize], n: usize) -> Result<Self, GameError> {
        let mut mask = 0u32;
        for &p in players {
            if p == 0 || p > n {
                return Err(GameError::PlayerOutOfRange { player: p, n });
            }
            let bit = 1u32 << (p - 1);
            if mask & bit != 0 {
                return Err(GameError::DuplicatePlayer { player: p });
            }
            mask |= bit;
        }
        Ok(Coalition(mask))
    }

    /// 1-based player ids in ascending order.
    pub fn players(self) -> Vec<usize> {
        (0..MAX_PLAYERS)
            .filter(|b| self.0 & (1 << b) != 0)
            .map(|b| b + 1)
            .collect()
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 & (1 << (player - 1)) != 0
    }

    pub fn with(self, player: usize) -> Self {
        Coalition(self.0 | (1 << (player - 1)))
    }

    pub fn without(self, player: usize) -> Self {
        Coalition(self.0 & !(1 << (player - 1)))
    }

    pub fn union(self, other: Self) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    /// All `2^n` coalitions in ascending mask order.
    pub fn all(n: usize) -> impl Iterator<Item = Coalition> {
        (0..(1u64 << n)).map(|m| Coalition(m as u32))
    }

    /// All nonempty coalitions in ascending mask order.
    pub fn nonempty(n: usize) -> impl Iterator<Item = Coalition> {
        (1..(1u64 << n)).map(|m| Coalition(m as u32))
    }

    /// Subsets of `self` in ascending mask order (includes the empty set and `self`).
    pub fn subsets(self) -> SubsetIter {
        SubsetIter {
            mask: self.0,
            current: 0,
            done: false,
        }
    }

    /// Label used by the JSON exchange format: sorted 1-based ids joined by commas,
    /// the empty coalition being the empty string.
    pub fn label(self) -> String {
        self.players()
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parse a label such as `"1,3"`. The empty string is the empty coalition.
    pub fn parse_label(label: &str, n: usize) -> Result<Self, GameError> {
        let trimmed = label.trim();
        if trimmed.is_empty() {
            return Ok(Coalition::EMPTY);
        }
        let mut players = Vec::new();
        for part in trimmed.split(',') {
            let p: usize = part
                .trim()
                .parse()
                .map_err(|_| GameError::InvalidCoalitionLabel {
                    label: label.to_string(),
                })?;
            players.push(p);
        }
        Coalition::from_players(&players, n).map_err(|_| GameError::InvalidCoalitionLabel {
            label: label.to_string(),
        })
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

/// Ascending-order subset iterator based on the `(s - mask) & mask` stepping trick.
pub struct SubsetIter {
    mask: u32,
    current: u32,
    done: bool,
}

impl Iterator for SubsetIter {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        if self.done {
            return None;
        }
        let out = Coalition(self.current);
        if self.current == self.mask {
            self.done = true;
        } else {
            self.current = self.current.wrapping_sub(self.mask) & self.mask;
        }
        Some(out)
    }
}
