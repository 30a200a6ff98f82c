//! Profile-likelihood machinery behind [`fit`].
//!
//! For a fixed variance ratio `λ = τ²/σ²` the per-group covariance
//! `σ²(I + λJ)` has the closed-form inverse `(I − cJ)/σ²`, `c = λ/(1+λn_j)`,
//! so one pass of per-group sums gives the GLS normal equations, the profiled
//! σ² and the profile log-likelihood. λ is maximized by a coarse grid scan on
//! `log(λ+ε)` followed by golden-section refinement, with `λ = 0` compared
//! explicitly so the OLS boundary is hit exactly.

use std::collections::BTreeMap;

use crate::model::{
    FixedEffect, MixedModelFit, MixedModelSpec, ModelError, ModelFrame, VarianceComponent,
};
use crate::stats::normal_two_sided_p;

const LAMBDA_MAX: f64 = 1e6;
const LAMBDA_EPS: f64 = 1e-12;
const GRID_POINTS: usize = 121;
const GOLDEN_TOL: f64 = 1e-10;
const GOLDEN_MAX_ITER: usize = 300;
const RANK_TOL: f64 = 1e-10;

/// A validated design ready for likelihood evaluation.
pub struct FitProblem {
    spec: MixedModelSpec,
    x: Vec<f64>, // n×p row-major
    y: Vec<f64>,
    group_of_row: Vec<usize>,
    col_names: Vec<String>,
    n: usize,
    p: usize,
    n_groups: usize,
    // precomputed sums
    xtx: Vec<f64>,      // p×p
    xty: Vec<f64>,      // p
    group_n: Vec<f64>,  // per group
    group_sx: Vec<f64>, // n_groups × p
    group_sy: Vec<f64>,
}

struct ProfilePoint {
    lambda: f64,
    beta: Vec<f64>,
    sigma2: f64,
    loglik: f64,
}

impl FitProblem {
    pub fn build(frame: &ModelFrame, spec: &MixedModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let n = frame.n_rows();
        let y = frame.continuous(&spec.response)?.to_vec();
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::MissingValue {
                column: spec.response.clone(),
                row,
            });
        }

        let group_labels = frame.categorical(&spec.grouping)?;
        let mut group_index: BTreeMap<&str, usize> = BTreeMap::new();
        for label in group_labels {
            let next = group_index.len();
            group_index.entry(label.as_str()).or_insert(next);
        }
        // order groups by label so results do not depend on row order
        let mut sorted: Vec<&str> = group_index.keys().copied().collect();
        sorted.sort_unstable();
        let relabel: BTreeMap<&str, usize> =
            sorted.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let group_of_row: Vec<usize> = group_labels.iter().map(|l| relabel[l.as_str()]).collect();
        let n_groups = relabel.len();
        if n_groups < 2 {
            return Err(ModelError::TooFewGroups { got: n_groups });
        }

        // assemble the design: intercept, then predictors in spec order with
        // categoricals expanded to reference-coded indicators
        let mut columns: Vec<(String, Vec<f64>)> = vec![("(intercept)".to_string(), vec![1.0; n])];
        for name in &spec.fixed_predictors {
            match frame.column(name) {
                Some(crate::model::Column::Continuous(v)) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(ModelError::MissingValue {
                            column: name.clone(),
                            row,
                        });
                    }
                    columns.push((name.clone(), v.clone()));
                }
                Some(crate::model::Column::Categorical(labels)) => {
                    let mut levels: Vec<&String> = labels.iter().collect();
                    levels.sort_unstable();
                    levels.dedup();
                    for level in levels.iter().skip(1) {
                        let col: Vec<f64> = labels
                            .iter()
                            .map(|l| if l == *level { 1.0 } else { 0.0 })
                            .collect();
                        columns.push((format!("{name}={level}"), col));
                    }
                }
                None => return Err(frame.unknown(name)),
            }
        }

        let p = columns.len();
        let col_names: Vec<String> = columns.iter().map(|(name, _)| name.clone()).collect();
        let mut x = vec![0.0; n * p];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                x[i * p + j] = *v;
            }
        }

        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p];

        let mut group_n = vec![0.0; n_groups];
        let mut group_sx = vec![0.0; n_groups * p];
        let mut group_sy = vec![0.0; n_groups];
        for i in 0..n {
            let row = &x[i * p..(i + 1) * p];
            let g = group_of_row[i];
            group_n[g] += 1.0;
            group_sy[g] += y[i];
            for a in 0..p {
                group_sx[g * p + a] += row[a];
                xty[a] += row[a] * y[i];
                for b in a..p {
                    xtx[a * p + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtx[a * p + b] = xtx[b * p + a];
            }
        }

        check_rank(&xtx, p, &col_names)?;

        Ok(FitProblem {
            spec: spec.clone(),
            x,
            y,
            group_of_row,
            col_names,
            n,
            p,
            n_groups,
            xtx,
            xty,

            group_n,
            group_sx,
            group_sy,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    /// GLS normal equations at a fixed ratio λ; `None` if the weighted Gram
    /// matrix is numerically singular.
    fn gls_beta(&self, lambda: f64) -> Option<Vec<f64>> {
        let p = self.p;
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        for g in 0..self.n_groups {
            let c = lambda / (1.0 + lambda * self.group_n[g]);
            if c == 0.0 {
                continue;
            }
            let sx = &self.group_sx[g * p..(g + 1) * p];
            for i in 0..p {
                b[i] -= c * sx[i] * self.group_sy[g];
                for j in i..p {
                    a[i * p + j] -= c * sx[i] * sx[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[i * p + j] = a[j * p + i];
            }
        }
        let chol = cholesky(&a, p)?;
        Some(chol_solve(&chol, p, &b))
    }

    /// Profile point at λ: GLS β, ML σ², and the profile log-likelihood.
    fn profile_at(&self, lambda: f64) -> Option<ProfilePoint> {
        let beta = self.gls_beta(lambda)?;
        let (rss, group_resid) = self.residual_sums(&beta);
        let mut rss_gls = rss;
        let mut logdet = 0.0;
        for g in 0..self.n_groups {
            let c = lambda / (1.0 + lambda * self.group_n[g]);
            rss_gls -= c * group_resid[g] * group_resid[g];
            logdet += (1.0 + lambda * self.group_n[g]).ln();
        }
        let n = self.n as f64;
        let sigma2 = (rss_gls / n).max(1e-300);
        let loglik = -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * sigma2.ln() + logdet + n);
        Some(ProfilePoint {
            lambda,
            beta,
            sigma2,
            loglik,
        })
    }

    /// Residual sum of squares and per-group residual sums for a given β.
    fn residual_sums(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let p = self.p;
        let mut rss = 0.0;
        let mut group_resid = vec![0.0; self.n_groups];
        for i in 0..self.n {
            let row = &self.x[i * p..(i + 1) * p];
            let fitted: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = self.y[i] - fitted;
            rss += r * r;
            group_resid[self.group_of_row[i]] += r;
        }
        (rss, group_resid)
    }

    /// Marginal log-likelihood at arbitrary `(β, τ², σ²)`.
    pub fn loglik(&self, beta: &[f64], tau2: f64, sigma2: f64) -> f64 {
        let lambda = tau2 / sigma2;
        let (rss, group_resid) = self.residual_sums(beta);
        let mut quad = rss;
        let mut logdet = 0.0;
        for g in 0..self.n_groups {
            let c = lambda / (1.0 + lambda * self.group_n[g]);
            quad -= c * group_resid[g] * group_resid[g];
            logdet += (1.0 + lambda * self.group_n[g]).ln();
        }
        let n = self.n as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * sigma2.ln() + logdet + quad / sigma2)
    }

    /// Log-likelihood at `(τ², σ²)` with β profiled out by GLS.
    fn loglik_profile_beta(&self, tau2: f64, sigma2: f64) -> f64 {
        let lambda = tau2 / sigma2;
        match self.gls_beta(lambda) {
            Some(beta) => self.loglik(&beta, tau2, sigma2),
            None => f64::NEG_INFINITY,
        }
    }

    /// Analytic derivative of the profile log-likelihood in λ (envelope
    /// theorem: β̂ and σ̂² drop out). Used to polish the golden-section
    /// bracket to a noise-free stationary point.
    fn profile_score(&self, lambda: f64) -> f64 {
        let beta = match self.gls_beta(lambda) {
            Some(b) => b,
            None => return f64::NAN,
        };
        let (rss, group_resid) = self.residual_sums(&beta);
        let mut q = rss;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for g in 0..self.n_groups {
            let denom = 1.0 + lambda * self.group_n[g];
            let gr = group_resid[g];
            q -= lambda / denom * gr * gr;
            s1 += gr * gr / (denom * denom);
            s2 += self.group_n[g] / denom;
        }
        0.5 * (self.n as f64 / q.max(1e-300) * s1 - s2)
    }

    /// Maximize the profile likelihood and assemble the full fit.
    pub fn solve(&self) -> Result<MixedModelFit, ModelError> {
        let at_zero = self
            .profile_at(0.0)
            .ok_or_else(|| ModelError::RankDeficient {
                columns: self.col_names.clone(),
            })?;

        // coarse scan on t = log(λ+ε), λ = e^t − ε
        let t_lo = LAMBDA_EPS.ln();
        let t_hi = (LAMBDA_MAX + LAMBDA_EPS).ln();
        let mut grid_best = (0usize, f64::NEG_INFINITY);
        let mut ts = Vec::with_capacity(GRID_POINTS);
        for k in 0..GRID_POINTS {
            let t = t_lo + (t_hi - t_lo) * k as f64 / (GRID_POINTS - 1) as f64;
            ts.push(t);
            let lambda = (t.exp() - LAMBDA_EPS).max(0.0);
            let ll = self
                .profile_at(lambda)
                .map_or(f64::NEG_INFINITY, |pt| pt.loglik);
            if ll > grid_best.1 {
                grid_best = (k, ll);
            }
        }

        // golden-section refinement inside the bracketing grid cells
        let mut lo = ts[grid_best.0.saturating_sub(1)];
        let mut hi = ts[(grid_best.0 + 1).min(GRID_POINTS - 1)];
        let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let eval_t = |t: f64| {
            let lambda = (t.exp() - LAMBDA_EPS).max(0.0);
            self.profile_at(lambda)
                .map_or(f64::NEG_INFINITY, |pt| pt.loglik)
        };
        let mut m1 = hi - inv_phi * (hi - lo);
        let mut m2 = lo + inv_phi * (hi - lo);
        let mut f1 = eval_t(m1);
        let mut f2 = eval_t(m2);
        let mut iterations = 0usize;
        while hi - lo > GOLDEN_TOL && iterations < GOLDEN_MAX_ITER {
            if f1 < f2 {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + inv_phi * (hi - lo);
                f2 = eval_t(m2);
            } else {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - inv_phi * (hi - lo);
                f1 = eval_t(m1);
            }
            iterations += 1;
        }
        let t_star = 0.5 * (lo + hi);
        let lambda_star = (t_star.exp() - LAMBDA_EPS).max(0.0);
        let polished = self.polish_root(lambda_star);
        let refined = self.profile_at(polished);

        // boundary λ=0 checked explicitly; flat refinements collapse to it
        let best = match refined {
            Some(pt) if pt.loglik > at_zero.loglik + 1e-12 => pt,
            _ => at_zero,
        };

        let fit = self.finish(&best)?;
        if hi - lo > GOLDEN_TOL {
            return Err(ModelError::Convergence {
                best: Box::new(fit),
            });
        }
        Ok(fit)
    }

    /// Bisect the analytic profile score around the golden-section estimate.
    /// The score crossing is insensitive to summation-order rounding, which
    /// makes the returned λ reproducible under row permutations.
    fn polish_root(&self, lambda_star: f64) -> f64 {
        let width = (lambda_star * 0.05).max(1e-8);
        let mut a = (lambda_star - width).max(0.0);
        let mut b = (lambda_star + width).min(LAMBDA_MAX);
        let mut sa = self.profile_score(a);
        let mut sb = self.profile_score(b);
        let mut grow = width;
        for _ in 0..60 {
            if sa.is_nan() || sb.is_nan() {
                return lambda_star;
            }
            if sa > 0.0 && sb <= 0.0 {
                break;
            }
            grow *= 4.0;
            if sa <= 0.0 {
                a = (a - grow).max(0.0);
                sa = self.profile_score(a);
                if a == 0.0 && sa <= 0.0 {
                    return 0.0;
                }
            }
            if sb > 0.0 {
                b = (b + grow).min(LAMBDA_MAX);
                sb = self.profile_score(b);
                if b >= LAMBDA_MAX && sb > 0.0 {
                    return lambda_star;
                }
            }
        }
        if !(sa > 0.0 && sb <= 0.0) {
            return lambda_star;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if b - a <= 1e-15 * b.max(1.0) || mid == a || mid == b {
                break;
            }
            if self.profile_score(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    fn finish(&self, point: &ProfilePoint) -> Result<MixedModelFit, ModelError> {
        let p = self.p;
        let n = self.n as f64;
        let tau2 = point.lambda * point.sigma2;
        let sigma2 = point.sigma2;

        // fixed-effect covariance: σ² · A(λ)⁻¹ from the GLS information matrix
        let mut a = self.xtx.clone();
        for g in 0..self.n_groups {
            let c = point.lambda / (1.0 + point.lambda * self.group_n[g]);
            let sx = &self.group_sx[g * p..(g + 1) * p];
            for i in 0..p {
                for j in i..p {
                    a[i * p + j] -= c * sx[i] * sx[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[i * p + j] = a[j * p + i];
            }
        }
        let chol = cholesky(&a, p).ok_or_else(|| ModelError::RankDeficient {
            columns: self.col_names.clone(),
        })?;
        let a_inv = chol_inverse(&chol, p);

        let fixed: Vec<FixedEffect> = (0..p)
            .map(|j| {
                let se = (sigma2 * a_inv[j * p + j]).max(0.0).sqrt();
                let estimate = point.beta[j];
                FixedEffect {
                    name: self.col_names[j].clone(),
                    estimate,
                    se,
                    p_value: if se > 0.0 {
                        normal_two_sided_p(estimate / se)
                    } else {
                        f64::NAN
                    },
                }
            })
            .collect();

        let (se_tau2, se_sigma2) = self.variance_ses(tau2, sigma2);
        let loglik = point.loglik;
        let k = (p + 2) as f64;
        Ok(MixedModelFit {
            spec: self.spec.clone(),
            fixed,
            tau2: VarianceComponent {
                estimate: tau2,
                se: se_tau2,
                p_value: if se_tau2 > 0.0 {
                    normal_two_sided_p(tau2 / se_tau2)
                } else {
                    f64::NAN
                },
            },
            sigma2: VarianceComponent {
                estimate: sigma2,
                se: se_sigma2,
                p_value: if se_sigma2 > 0.0 {
                    normal_two_sided_p(sigma2 / se_sigma2)
                } else {
                    f64::NAN
                },
            },
            loglik,
            aic: -2.0 * loglik + 2.0 * k,
            bic: -2.0 * loglik + k * n.ln(),
            n_obs: self.n,
            n_groups: self.n_groups,
        })
    }

    /// Standard errors of (τ², σ²) from the numerically differentiated
    /// observed information of the β-profiled likelihood; falls back to the
    /// expected information if the numeric Hessian is not negative definite.
    fn variance_ses(&self, tau2: f64, sigma2: f64) -> (f64, f64) {
        let total = tau2 + sigma2;
        let ht = 1e-5 * tau2.max(0.01 * total);
        let hs = 1e-5 * sigma2.max(0.01 * total);
        let f = |t: f64, s: f64| self.loglik_profile_beta(t, s);

        let (f_tt, f_ts) = if tau2 >= 2.0 * ht {
            let f_tt =
                (f(tau2 + ht, sigma2) - 2.0 * f(tau2, sigma2) + f(tau2 - ht, sigma2)) / (ht * ht);
            let f_ts =
                (f(tau2 + ht, sigma2 + hs) - f(tau2 + ht, sigma2 - hs) - f(tau2 - ht, sigma2 + hs)
                    + f(tau2 - ht, sigma2 - hs))
                    / (4.0 * ht * hs);
            (f_tt, f_ts)
        } else {
            // one-sided in τ² at the boundary
            let f_tt = (f(tau2, sigma2) - 2.0 * f(tau2 + ht, sigma2) + f(tau2 + 2.0 * ht, sigma2))
                / (ht * ht);
            let f_ts =
                (f(tau2 + ht, sigma2 + hs) - f(tau2 + ht, sigma2 - hs) - f(tau2, sigma2 + hs)
                    + f(tau2, sigma2 - hs))
                    / (2.0 * ht * hs);
            (f_tt, f_ts)
        };
        let f_ss =
            (f(tau2, sigma2 + hs) - 2.0 * f(tau2, sigma2) + f(tau2, sigma2 - hs)) / (hs * hs);

        // observed information = −Hessian; invert the 2×2
        let (itt, its, iss) = (-f_tt, -f_ts, -f_ss);
        let det = itt * iss - its * its;
        if itt > 0.0 && iss > 0.0 && det > 0.0 {
            return ((iss / det).sqrt(), (itt / det).sqrt());
        }

        // expected (Fisher) information fallback
        let mut itt = 0.0;
        let mut its = 0.0;
        let mut iss = 0.0;
        for g in 0..self.n_groups {
            let nj = self.group_n[g];
            let d = sigma2 + tau2 * nj;
            itt += 0.5 * nj * nj / (d * d);
            its += 0.5 * nj / (d * d);
            iss += 0.5 * ((nj - 1.0) / (sigma2 * sigma2) + 1.0 / (d * d));
        }
        let det = itt * iss - its * its;
        if det > 0.0 {
            ((iss / det).sqrt(), (itt / det).sqrt())
        } else {
            (f64::NAN, f64::NAN)
        }
    }
}

/// Fit a two-level random-intercept model by maximum likelihood.
pub fn fit(frame: &ModelFrame, spec: &MixedModelSpec) -> Result<MixedModelFit, ModelError> {
    FitProblem::build(frame, spec)?.solve()
}

/// Left-looking Cholesky that skips dependent columns and names them.
fn check_rank(xtx: &[f64], p: usize, names: &[String]) -> Result<(), ModelError> {
    let mut l = vec![0.0; p * p];
    let mut independent = vec![true; p];
    let mut dependent = Vec::new();
    for k in 0..p {
        for j in 0..k {
            if !independent[j] {
                continue;
            }
            let mut s = xtx[k * p + j];
            for m in 0..j {
                if independent[m] {
                    s -= l[k * p + m] * l[j * p + m];
                }
            }
            l[k * p + j] = s / l[j * p + j];
        }
        let mut d = xtx[k * p + k];
        for m in 0..k {
            if independent[m] {
                d -= l[k * p + m] * l[k * p + m];
            }
        }
        if d <= RANK_TOL * xtx[k * p + k].max(RANK_TOL) {
            independent[k] = false;
            dependent.push(names[k].clone());
            for m in 0..k {
                l[k * p + m] = 0.0;
            }
        } else {
            l[k * p + k] = d.sqrt();
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(ModelError::RankDeficient { columns: dependent })
    }
}

/// Dense Cholesky factorization (lower triangle), `None` if not positive definite.
fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[f64], p: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    x
}

fn chol_inverse(l: &[f64], p: usize) -> Vec<f64> {
    let mut inv = vec![0.0; p * p];
    for col in 0..p {
        let mut e = vec![0.0; p];
        e[col] = 1.0;
        let x = chol_solve(l, p, &e);
        for row in 0..p {
            inv[row * p + col] = x[row];
        }
    }
    inv
}
