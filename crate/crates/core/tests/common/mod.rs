#![allow(dead_code)] // helpers are shared across test binaries that each use a subset

//! Shared test oracles, kept independent of the library's computation paths:
//! permutation-enumeration Shapley values, a balanced-design fixed-point ML
//! solver, plain OLS, and deterministic data generators.

use groupwork_core::game::TUGame;
use groupwork_core::model::{Column, ModelFrame};
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Average of the marginal-contribution vectors over all n! join orders,
/// enumerated with Heap's algorithm. Only the game's value table is used.
pub fn shapley_permutation_oracle(game: &TUGame) -> Vec<f64> {
    let n = game.n();
    let mut order: Vec<usize> = (1..=n).collect();
    let mut acc = vec![0.0; n];
    let mut count = 0usize;

    fn marginal(game: &TUGame, order: &[usize], acc: &mut [f64]) {
        let mut mask = 0u32;
        let mut prev = 0.0;
        for &p in order {
            mask |= 1 << (p - 1);
            let value = game.values()[mask as usize];
            acc[p - 1] += value - prev;
            prev = value;
        }
    }

    fn heap(k: usize, order: &mut Vec<usize>, game: &TUGame, acc: &mut [f64], count: &mut usize) {
        if k == 1 {
            marginal(game, order, acc);
            *count += 1;
            return;
        }
        for i in 0..k {
            heap(k - 1, order, game, acc, count);
            if k % 2 == 0 {
                order.swap(i, k - 1);
            } else {
                order.swap(0, k - 1);
            }
        }
    }

    heap(n, &mut order, game, &mut acc, &mut count);
    for v in &mut acc {
        *v /= count as f64;
    }
    acc
}

/// Uniform random game on [-5, 5] with v(∅) = 0.
pub fn random_game(n: usize, rng: &mut ChaCha8Rng) -> TUGame {
    let mut values: Vec<f64> = (0..(1usize << n))
        .map(|_| rng.random_range(-5.0..5.0))
        .collect();
    values[0] = 0.0;
    TUGame::new(n, values).unwrap()
}

/// Convex (supermodular) game: a nonnegative mix of a squared additive
/// measure and a linear one.
pub fn random_convex_game(n: usize, rng: &mut ChaCha8Rng) -> TUGame {
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let quad: f64 = rng.random_range(0.1..1.0);
    let lin: f64 = rng.random_range(0.0..1.0);
    TUGame::from_fn(n, |c| {
        let w: f64 = c.players().iter().map(|&p| weights[p - 1]).sum();
        quad * w * w + lin * w
    })
    .unwrap()
}

/// OLS with an intercept by normal equations (Gaussian elimination),
/// returning `(beta, sigma2_ml)`.
pub fn ols(xcols: &[&[f64]], y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let p = xcols.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { xcols[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..n {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += x(i, r) * x(i, c);
            }
            a[r][p] += x(i, r) * y[i];
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let rss: f64 = (0..n)
        .map(|i| {
            let fitted: f64 = (0..p).map(|j| beta[j] * x(i, j)).sum();
            let r = y[i] - fitted;
            r * r
        })
        .sum();
    (beta, rss / n as f64)
}

/// Fixed-point ML solver for balanced one-way designs with one covariate.
/// Parameterized by the within/between eigenvalues (a, b) of the marginal
/// covariance: alternate GLS for β with the stationarity updates
/// a = SSW/(n−J), b = SSB/J, projecting onto group means and contrasts.
/// Independent of the library's profile-likelihood search.
pub struct BalancedMlEstimate {
    pub beta: Vec<f64>,
    pub tau2: f64,
    pub sigma2: f64,
}

pub fn balanced_ml_oracle(
    x: &[f64],
    y: &[f64],
    n_groups: usize,
    group_size: usize,
) -> BalancedMlEstimate {
    let n = y.len();
    assert_eq!(n, n_groups * group_size);
    let m = group_size as f64;

    // group means and within-group residuals for both columns and y
    let mut xb = vec![0.0; n];
    let mut yb = vec![0.0; n];
    for g in 0..n_groups {
        let lo = g * group_size;
        let hi = lo + group_size;
        let mx: f64 = x[lo..hi].iter().sum::<f64>() / m;
        let my: f64 = y[lo..hi].iter().sum::<f64>() / m;
        for i in lo..hi {
            xb[i] = mx;
            yb[i] = my;
        }
    }
    let xw: Vec<f64> = x.iter().zip(&xb).map(|(v, b)| v - b).collect();
    let yw: Vec<f64> = y.iter().zip(&yb).map(|(v, b)| v - b).collect();

    let mut a = 1.0f64;
    let mut b = 1.0f64;
    let mut beta = vec![0.0f64; 2];
    for _ in 0..20_000 {
        // GLS normal equations over the two orthogonal subspaces.
        // design columns: intercept (within part is 0) and x.
        let mut m00 = 0.0;
        let mut m01 = 0.0;
        let mut m11 = 0.0;
        let mut r0 = 0.0;
        let mut r1 = 0.0;
        for i in 0..n {
            // between parts (intercept lives entirely here)
            m00 += 1.0 / b;
            m01 += xb[i] / b;
            m11 += xb[i] * xb[i] / b + xw[i] * xw[i] / a;
            r0 += yb[i] / b;
            r1 += xb[i] * yb[i] / b + xw[i] * yw[i] / a;
        }
        let det = m00 * m11 - m01 * m01;
        let b0 = (r0 * m11 - r1 * m01) / det;
        let b1 = (m00 * r1 - m01 * r0) / det;

        let mut ssw = 0.0;
        let mut ssb = 0.0;
        for i in 0..n {
            let rw = yw[i] - b1 * xw[i];
            let rb = yb[i] - b0 - b1 * xb[i];
            ssw += rw * rw;
            ssb += rb * rb;
        }
        let a_new = ssw / (n - n_groups) as f64;
        let b_new = ssb / n_groups as f64;
        let delta =
            (a_new - a).abs() + (b_new - b).abs() + (b0 - beta[0]).abs() + (b1 - beta[1]).abs();
        a = a_new;
        b = b_new;
        beta = vec![b0, b1];
        if delta < 1e-14 {
            break;
        }
    }

    if b <= a {
        // boundary: equal weights collapse to OLS
        let (beta, sigma2) = ols(&[x], y);
        return BalancedMlEstimate {
            beta,
            tau2: 0.0,
            sigma2,
        };
    }
    BalancedMlEstimate {
        beta,
        tau2: (b - a) / m,
        sigma2: a,
    }
}

/// Two-level frame with one covariate; `beta = (intercept, slope)`.
pub fn two_level_frame(
    seed: u64,
    group_sizes: &[usize],
    beta: (f64, f64),
    tau2: f64,
    sigma2: f64,
) -> ModelFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut groups = Vec::new();
    for (g, &size) in group_sizes.iter().enumerate() {
        let u = if tau2 > 0.0 {
            tau2.sqrt() * standard_normal(&mut rng)
        } else {
            0.0
        };
        for _ in 0..size {
            let x: f64 = rng.random_range(0.0..4.0);
            let e = if sigma2 > 0.0 {
                sigma2.sqrt() * standard_normal(&mut rng)
            } else {
                0.0
            };
            xs.push(x);
            ys.push(beta.0 + beta.1 * x + u + e);
            groups.push(format!("g{g:03}"));
        }
    }
    ModelFrame::new(xs.len())
        .with_column("x", Column::Continuous(xs))
        .unwrap()
        .with_column("y", Column::Continuous(ys))
        .unwrap()
        .with_column("team", Column::Categorical(groups))
        .unwrap()
}

/// The study's group-size histogram: 11 dyads, 15 triads, 5 four-member teams.
pub fn study_group_sizes() -> Vec<usize> {
    let mut sizes = vec![2; 11];
    sizes.extend(vec![3; 15]);
    sizes.extend(vec![4; 5]);
    sizes
}
