//! Exact core-emptiness test for small games via linear programming.
//!
//! The primal question — does any efficient allocation satisfy every proper
//! coalition constraint — reduces to `min Σx` subject to `Σ_{i∈S} x_i ≥ v(S)`
//! for all nonempty `S ⊊ N`; the core is nonempty iff that minimum is at most
//! `v(N)`. We solve the dual (`max Σ v(S)·y_S` with `Σ_{S∋i} y_S = 1`, `y ≥ 0`)
//! by dense primal simplex with Bland's rule. The singleton columns form an
//! identity, so the search starts from a feasible basis and no artificial
//! variables are needed. Constraint residuals are held to the module-wide
//! 1e-9 hybrid tolerance.

use crate::coalition::Coalition;
use crate::game::{tol, GameError, PayoffVector, TUGame};

/// Largest player count accepted by [`TUGame::core_is_empty`].
pub const CORE_MAX_PLAYERS: usize = 12;

const PIVOT_EPS: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200_000;

/// Outcome of the emptiness test. A nonempty core comes with a certificate
/// allocation that passes [`TUGame::core_contains`]; an empty one reports how
/// far the cheapest coalition-satisfying allocation overshoots `v(N)`.
#[derive(Debug, Clone)]
pub enum CoreStatus {
    NonEmpty { certificate: PayoffVector },
    Empty { shortfall: f64 },
}

impl CoreStatus {
    pub fn is_empty(&self) -> bool {
        matches!(self, CoreStatus::Empty { .. })
    }
}

impl TUGame {
    /// Decide core emptiness exactly (n ≤ 12).
    pub fn core_is_empty(&self) -> Result<CoreStatus, GameError> {
        let n = self.n();
        if n > CORE_MAX_PLAYERS {
            return Err(GameError::CapacityExceeded {
                n,
                max: CORE_MAX_PLAYERS,
            });
        }
        if n == 1 {
            let certificate = PayoffVector::new(vec![self.grand_value()])?;
            return Ok(CoreStatus::NonEmpty { certificate });
        }

        let grand = self.grand_value();
        let (optimum, basis, rhs) = self.solve_dual_lp()?;

        if optimum > grand + tol(grand) {
            return Ok(CoreStatus::Empty {
                shortfall: optimum - grand,
            });
        }

        // Complementary slackness: the basic coalitions' constraints are tight,
        // so the simplex multipliers solve M_B' x = v_B.
        let mut x = solve_tight_system(n, &basis, |mask| self.value(Coalition(mask)))?;
        let spent: f64 = x.iter().sum();
        let top_up = (grand - spent) / n as f64;
        for xi in &mut x {
            *xi += top_up;
        }
        let certificate = PayoffVector::new(x)?;
        debug_assert!({
            let _ = &rhs;
            self.core_contains(&certificate)
                .map(|m| m.contained)
                .unwrap_or(false)
        });
        Ok(CoreStatus::NonEmpty { certificate })
    }

    /// Primal simplex on the dual program. Returns the optimal objective,
    /// the basis (one coalition mask per constraint row) and the basic values.
    fn solve_dual_lp(&self) -> Result<(f64, Vec<u32>, Vec<f64>), GameError> {
        let n = self.n();
        let grand_mask = Coalition::grand(n).0;
        let n_cols = (grand_mask - 1) as usize; // masks 1..grand-1
        let cost = |col: usize| self.value(Coalition(col as u32 + 1));
        let column_mask = |col: usize| col as u32 + 1;

        let scale = self.values().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let reduced_eps = 1e-9 * scale;

        // Tableau rows hold B^{-1}A and B^{-1}b; the extra row carries reduced costs.
        let mut tab = vec![vec![0.0f64; n_cols + 1]; n];
        let mut basis: Vec<u32> = Vec::with_capacity(n);
        for (i, row) in tab.iter_mut().enumerate() {
            for col in 0..n_cols {
                if column_mask(col) & (1 << i) != 0 {
                    row[col] = 1.0;
                }
            }
            row[n_cols] = 1.0;
            basis.push(1 << i); // singleton {i+1}
        }
        let mut reduced: Vec<f64> = (0..n_cols)
            .map(|col| {
                let singles: f64 = (0..n)
                    .filter(|i| column_mask(col) & (1 << i) != 0)
                    .map(|i| self.value(Coalition(1 << i)))
                    .sum();
                cost(col) - singles
            })
            .collect();
        let mut objective: f64 = (0..n).map(|i| self.value(Coalition(1 << i))).sum();

        for _ in 0..MAX_ITERATIONS {
            // Bland: entering column is the lowest index with positive reduced cost.
            let entering = match (0..n_cols).find(|&c| reduced[c] > reduced_eps) {
                Some(c) => c,
                None => {
                    let rhs: Vec<f64> = tab.iter().map(|r| r[n_cols]).collect();
                    return Ok((objective, basis, rhs));
                }
            };

            // Ratio test; ties broken by the smallest basis mask (Bland).
            let mut leaving: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for (i, row) in tab.iter().enumerate() {
                let a = row[entering];
                if a > PIVOT_EPS {
                    let ratio = row[n_cols] / a;
                    let better = match leaving {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - PIVOT_EPS
                                || (ratio < best_ratio + PIVOT_EPS && basis[i] < basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio.min(best_ratio);
                        leaving = Some(i);
                    }
                }
            }
            // The dual is bounded (the primal is feasible), so a pivot row exists.
            let leaving = leaving.ok_or(GameError::LpIterationBound)?;

            // Pivot.
            let pivot = tab[leaving][entering];
            for val in tab[leaving].iter_mut() {
                *val /= pivot;
            }
            let pivot_row = tab[leaving].clone();
            for (i, row) in tab.iter_mut().enumerate() {
                if i != leaving && row[entering].abs() > 0.0 {
                    let factor = row[entering];
                    for (a, p) in row.iter_mut().zip(&pivot_row) {
                        *a -= factor * p;
                    }
                }
            }
            let factor = reduced[entering];
            for (r, p) in reduced.iter_mut().zip(&pivot_row) {
                *r -= factor * p;
            }
            objective += factor * pivot_row[n_cols];
            basis[leaving] = column_mask(entering);
        }
        Err(GameError::LpIterationBound)
    }
}

/// Solve `Σ_{i∈mask_k} x_i = v(mask_k)` by Gaussian elimination with partial pivoting.
fn solve_tight_system(
    n: usize,
    basis: &[u32],
    value: impl Fn(u32) -> f64,
) -> Result<Vec<f64>, GameError> {
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for (k, &mask) in basis.iter().enumerate() {
        for i in 0..n {
            if mask & (1 << i) != 0 {
                a[k][i] = 1.0;
            }
        }
        a[k][n] = value(mask);
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() < PIVOT_EPS {
            return Err(GameError::LpIterationBound);
        }
        a.swap(col, pivot_row);
        for row in 0..n {
            if row != col && a[row][col].abs() > 0.0 {
                let f = a[row][col] / a[col][col];
                for j in col..=n {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_game_core_is_empty() {
        let g = TUGame::from_fn(3, |c| if c.size() >= 2 { 1.0 } else { 0.0 }).unwrap();
        let status = g.core_is_empty().unwrap();
        match status {
            CoreStatus::Empty { shortfall } => {
                // summing the pair constraints forces Σx ≥ 3/2 against v(N) = 1
                assert!((shortfall - 0.5).abs() < 1e-9, "shortfall {shortfall}");
            }
            CoreStatus::NonEmpty { .. } => panic!("majority game must have an empty core"),
        }
    }

    #[test]
    fn additive_game_core_contains_weight_vector() {
        let g = TUGame::additive(&[2.0, 5.0, 7.0]).unwrap();
        match g.core_is_empty().unwrap() {
            CoreStatus::NonEmpty { certificate } => {
                assert!(g.core_contains(&certificate).unwrap().contained);
                for (c, w) in certificate.iter().zip(&[2.0, 5.0, 7.0]) {
                    assert!((c - w).abs() < 1e-9);
                }
            }
            CoreStatus::Empty { .. } => panic!("additive games always have a core point"),
        }
    }

    #[test]
    fn example_game_certificate_passes_membership() {
        let g = TUGame::new(3, vec![0.0, 1.0, 2.0, 4.0, 3.0, 5.0, 6.0, 9.0]).unwrap();
        match g.core_is_empty().unwrap() {
            CoreStatus::NonEmpty { certificate } => {
                assert!(g.core_contains(&certificate).unwrap().contained);
            }
            CoreStatus::Empty { .. } => panic!("(2,3,4) lies in this core"),
        }
    }

    #[test]
    fn single_player_core() {
        let g = TUGame::new(1, vec![0.0, 4.5]).unwrap();
        match g.core_is_empty().unwrap() {
            CoreStatus::NonEmpty { certificate } => assert_eq!(certificate.as_slice(), &[4.5]),
            CoreStatus::Empty { .. } => panic!(),
        }
    }

    #[test]
    fn capacity_error_above_twelve_players() {
        let g = TUGame::from_fn(13, |c| c.size() as f64).unwrap();
        assert!(matches!(
            g.core_is_empty(),
            Err(GameError::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn unanimity_core_nonempty() {
        let g = TUGame::unanimity(4).unwrap();
        assert!(!g.core_is_empty().unwrap().is_empty());
    }

    #[test]
    fn dyad_with_unreachable_singletons_is_empty() {
        // v({1}) = 3, v({2}) = 5, v(N) = 3: singleton demands exceed the grand value
        let g = TUGame::new(2, vec![0.0, 3.0, 5.0, 3.0]).unwrap();
        match g.core_is_empty().unwrap() {
            CoreStatus::Empty { shortfall } => assert!((shortfall - 5.0).abs() < 1e-9),
            CoreStatus::NonEmpty { .. } => panic!(),
        }
    }
}
