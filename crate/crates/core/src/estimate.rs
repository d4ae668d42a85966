//! Fitting Lerch parameters by moments, maximum likelihood, or minimum
//! Pearson X², with delta-method and observed-information covariances.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FrequencyTable;
use crate::dist::{LerchDist, LerchParams, Truncation};
use crate::error::{LerchError, Result};
use crate::gof::{pearson_statistic, GroupingSpec};
use crate::optim::{rotated_halton, Minimum, NelderMead};

/// `[[f64; 3]; 3]` over `(z, s, v)`.
pub type Covariance = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mm,
    Ml,
    MinChi2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub method: Method,
    pub truncation: Truncation,
    /// Grouping for the X² objective; singletons over the table range with
    /// the tail folded when absent.
    pub grouping: Option<GroupingSpec>,
    pub multistart_count: usize,
    pub simplex_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Φ series cap while fitting.
    pub term_budget: u64,
    /// Optimize directly over `(z, s, v)` instead of the unconstrained
    /// coordinates.
    pub raw_coordinates: bool,
}

impl FitConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            truncation: Truncation::NONE,
            grouping: None,
            multistart_count: 32,
            simplex_tol: 1e-9,
            max_iter: 5000,
            seed: 0,
            term_budget: 50_000,
            raw_coordinates: false,
        }
    }

    pub fn with_truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_grouping(mut self, g: GroupingSpec) -> Self {
        self.grouping = Some(g);
        self
    }

    pub fn with_starts(mut self, n: usize) -> Self {
        self.multistart_count = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub method: Method,
    pub params: LerchParams,
    pub truncation: Truncation,
    pub objective: f64,
    pub covariance: Option<Covariance>,
    pub converged: bool,
    /// Estimate sits against a parameter-space edge.
    pub at_boundary: bool,
    pub starts_tried: usize,
}

const START_ZETA: (f64, f64) = (-8.0, 4.0);
const START_S: (f64, f64) = (-30.0, 10.0);
const START_VA: (f64, f64) = (0.01, 20.0);
const MAX_POLISH_ROUNDS: usize = 20;
const MM_EXACT: f64 = 1e-10;

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Maps between `(z, s, v)` and the optimizer's coordinates.
#[derive(Debug, Clone, Copy)]
struct Coords {
    shift: f64,
    raw: bool,
}

impl Coords {
    fn to_params(self, t: &[f64; 3]) -> LerchParams {
        if self.raw {
            LerchParams::new(t[0], t[1], t[2])
        } else {
            LerchParams::new(sigmoid(t[0]), t[1], t[2].exp() - self.shift)
        }
    }

    fn to_coords(self, p: &LerchParams) -> [f64; 3] {
        if self.raw {
            [p.z, p.s, p.v]
        } else {
            [(p.z / (1.0 - p.z)).ln(), p.s, (p.v + self.shift).ln()]
        }
    }

    fn steps(self, p: &LerchParams, scale: f64) -> [f64; 3] {
        if self.raw {
            let dz = (p.z.min(1.0 - p.z) * 0.5).min(0.1 * scale);
            [dz, scale, scale * (p.v + self.shift).abs().max(0.1)]
        } else {
            [scale, scale, 0.5 * scale]
        }
    }
}

struct Problem<'a> {
    data: &'a FrequencyTable,
    cfg: &'a FitConfig,
    grouping: GroupingSpec,
    coords: Coords,
}

impl Problem<'_> {
    fn dist(&self, p: LerchParams) -> Result<LerchDist> {
        LerchDist::with_term_budget(p, self.cfg.truncation, self.cfg.term_budget)
    }

    fn objective_at(&self, p: LerchParams) -> Result<f64> {
        let d = self.dist(p)?;
        match self.cfg.method {
            Method::Mm => mm_residual(&d, self.data),
            Method::Ml => neg_log_likelihood(&d, self.data),
            Method::MinChi2 => Ok(pearson_statistic(self.data, &d, &self.grouping)?.0),
        }
    }

    fn objective(&self, t: &[f64; 3]) -> f64 {
        let p = self.coords.to_params(t);
        if !(p.z > 0.0 && p.z < 1.0 && p.s.is_finite() && p.v.is_finite()) {
            return f64::INFINITY;
        }
        self.objective_at(p).unwrap_or(f64::INFINITY)
    }

    fn nelder_mead(&self) -> NelderMead {
        NelderMead {
            xtol: self.cfg.simplex_tol,
            max_iter: self.cfg.max_iter,
            ..Default::default()
        }
    }

    fn start_points(&self) -> Vec<LerchParams> {
        let a = self.cfg.truncation.lower as f64;
        let (ln_lo, ln_hi) = (START_VA.0.ln(), START_VA.1.ln());
        rotated_halton::<3>(self.cfg.multistart_count, self.cfg.seed)
            .into_iter()
            .map(|u| {
                let zeta = START_ZETA.0 + u[0] * (START_ZETA.1 - START_ZETA.0);
                let s = START_S.0 + u[1] * (START_S.1 - START_S.0);
                let va = (ln_lo + u[2] * (ln_hi - ln_lo)).exp();
                LerchParams::new(sigmoid(zeta), s, va - a)
            })
            .collect()
    }

    fn run(&self) -> Result<(Minimum<3>, usize)> {
        let starts = self.start_points();
        let nm = self.nelder_mead();
        let results: Vec<Minimum<3>> = starts
            .par_iter()
            .map(|p| {
                let t = self.coords.to_coords(p);
                nm.minimize(|t| self.objective(t), t, self.coords.steps(p, 0.5))
            })
            .collect();
        let mut best: Option<Minimum<3>> = None;
        for m in results {
            if m.fx.is_finite() && best.is_none_or(|b| m.fx < b.fx) {
                best = Some(m);
            }
        }
        let mut best = best.ok_or_else(|| {
            LerchError::NoConvergence("objective is not finite at any start point".into())
        })?;
        for _ in 0..MAX_POLISH_ROUNDS {
            let p = self.coords.to_params(&best.x);
            let next = nm.minimize(|t| self.objective(t), best.x, self.coords.steps(&p, 0.05));
            let improved = next.fx < best.fx;
            let gain = best.fx - next.fx;
            if improved {
                best = next;
            } else {
                best.converged = next.converged;
            }
            if !improved || gain <= 1e-12 * best.fx.abs().max(1e-12) {
                break;
            }
        }
        Ok((best, starts.len()))
    }
}

fn default_grouping(data: &FrequencyTable) -> GroupingSpec {
    GroupingSpec::singletons(data.min_class(), data.max_class(), true)
}

fn at_boundary(p: &LerchParams, t: &Truncation) -> bool {
    p.z > 1.0 - 1e-8 || p.z < 1e-12 || p.v + (t.lower as f64) < 1e-8 || p.s.abs() > 500.0
}

fn check_support(data: &FrequencyTable, t: &Truncation) -> Result<()> {
    for c in data.classes() {
        if c.observed > 0.0 && !t.contains(c.count as i64) {
            return Err(LerchError::Validation(format!(
                "class {} with positive frequency lies outside the truncation range",
                c.count
            )));
        }
    }
    Ok(())
}

fn fit(data: &FrequencyTable, cfg: &FitConfig) -> Result<FitResult> {
    if cfg.multistart_count == 0 {
        return Err(LerchError::Validation("multistart_count must be >= 1".into()));
    }
    check_support(data, &cfg.truncation)?;
    let problem = Problem {
        data,
        cfg,
        grouping: cfg.grouping.clone().unwrap_or_else(|| default_grouping(data)),
        coords: Coords {
            shift: cfg.truncation.lower as f64,
            raw: cfg.raw_coordinates,
        },
    };
    let (best, starts_tried) = problem.run()?;
    let params = problem.coords.to_params(&best.x);
    Ok(FitResult {
        method: cfg.method,
        params,
        truncation: cfg.truncation,
        objective: best.fx,
        covariance: None,
        converged: best.converged,
        at_boundary: at_boundary(&params, &cfg.truncation),
        starts_tried,
    })
}

/// `Σ_{r=1}^{3} ((μ'_r - m'_r) / max(1, m'_r))²`.
fn mm_residual(d: &LerchDist, data: &FrequencyTable) -> Result<f64> {
    let mut acc = 0.0;
    for r in 1..=3 {
        let m = data.sample_moment(r);
        let e = (d.moment_uncorrected(r)? - m) / m.max(1.0);
        acc += e * e;
    }
    Ok(acc)
}

/// `-Σ O_x ln p_x`.
fn neg_log_likelihood(d: &LerchDist, data: &FrequencyTable) -> Result<f64> {
    let mut acc = 0.0;
    for c in data.classes() {
        if c.observed > 0.0 {
            acc -= c.observed * d.ln_pmf(c.count as i64);
        }
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(LerchError::Domain("log-likelihood is not finite".into()))
    }
}

/// Method of moments on the first three raw moments, solved as least
/// squares.
pub fn fit_mm(data: &FrequencyTable, cfg: &FitConfig) -> Result<FitResult> {
    if data.nonzero_classes() < 3 {
        return Err(LerchError::NoSolution(format!(
            "moment fitting needs at least 3 distinct classes, got {}",
            data.nonzero_classes()
        )));
    }
    let cfg = FitConfig {
        method: Method::Mm,
        ..cfg.clone()
    };
    let mut r = fit(data, &cfg)?;
    if r.objective > MM_EXACT {
        let problem = Problem {
            data,
            cfg: &cfg,
            grouping: default_grouping(data),
            coords: Coords {
                shift: cfg.truncation.lower as f64,
                raw: false,
            },
        };
        let t = problem.coords.to_coords(&r.params);
        let g = central_gradient(|t| problem.objective(t), &t);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm < 1e-6) {
            return Err(LerchError::NoSolution(format!(
                "moment residual {:.3e} at z={}, s={}, v={} with gradient norm {norm:.3e}",
                r.objective, r.params.z, r.params.s, r.params.v
            )));
        }
    }
    r.covariance = mm_covariance(r.params, cfg.truncation, data).ok();
    Ok(r)
}

/// Maximum likelihood over the observations expanded from the table.
pub fn fit_ml(data: &FrequencyTable, cfg: &FitConfig) -> Result<FitResult> {
    if data.nonzero_classes() < 2 {
        return Err(LerchError::NoConvergence(
            "all observations fall in one class; the likelihood has no interior maximum".into(),
        ));
    }
    let cfg = FitConfig {
        method: Method::Ml,
        ..cfg.clone()
    };
    let mut r = fit(data, &cfg)?;
    if !r.at_boundary {
        if let Ok(p) = newton_polish(r.params, &cfg, data) {
            let d = LerchDist::with_term_budget(p, cfg.truncation, cfg.term_budget)?;
            let nll = neg_log_likelihood(&d, data)?;
            if nll <= r.objective {
                r.params = p;
                r.objective = nll;
            }
        }
        r.covariance = ml_covariance(r.params, cfg.truncation, data).ok();
    }
    Ok(r)
}

/// Minimum Pearson X² over the configured grouping.
pub fn fit_minchi2(data: &FrequencyTable, cfg: &FitConfig) -> Result<FitResult> {
    let cfg = FitConfig {
        method: Method::MinChi2,
        ..cfg.clone()
    };
    fit(data, &cfg)
}

pub fn fit_with(data: &FrequencyTable, cfg: &FitConfig) -> Result<FitResult> {
    match cfg.method {
        Method::Mm => fit_mm(data, cfg),
        Method::Ml => fit_ml(data, cfg),
        Method::MinChi2 => fit_minchi2(data, cfg),
    }
}

/// `Σ (p(x) - O_x/N)²` over the listed classes.
pub fn ssd(data: &FrequencyTable, params: LerchParams, t: Truncation) -> Result<f64> {
    Ok(crate::gof::ssd(data, &LerchDist::new(params, t)?))
}

fn central_gradient<F: Fn(&[f64; 3]) -> f64>(f: F, t: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for j in 0..3 {
        let h = 1e-6 * t[j].abs().max(1.0);
        let mut up = *t;
        let mut dn = *t;
        up[j] += h;
        dn[j] -= h;
        g[j] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    g
}

/// Finite-difference step for `(z, s, v)` that keeps `z` inside `(0, 1)`
/// and `v` above `-a`.
fn fd_step(p: &LerchParams, t: &Truncation, j: usize) -> f64 {
    let theta = [p.z, p.s, p.v];
    let mut h = 1e-5 * theta[j].abs().max(1.0);
    match j {
        0 => h = h.min(0.5 * p.z).min(0.5 * (1.0 - p.z)),
        2 => h = h.min(0.5 * (p.v + t.lower as f64)),
        _ => {}
    }
    h
}

fn shifted(p: &LerchParams, j: usize, h: f64) -> LerchParams {
    let mut q = *p;
    match j {
        0 => q.z += h,
        1 => q.s += h,
        _ => q.v += h,
    }
    q
}

fn invert(m: Matrix3<f64>, what: &str) -> Result<Matrix3<f64>> {
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(LerchError::SingularMatrix(format!("{what} is zero or not finite")));
    }
    let svd = m.svd(false, false);
    let smin = svd.singular_values.min();
    let smax = svd.singular_values.max();
    if !(smin > smax * 1e-13) {
        return Err(LerchError::SingularMatrix(format!(
            "{what} is numerically rank-deficient (condition {:.3e})",
            smax / smin
        )));
    }
    m.try_inverse()
        .ok_or_else(|| LerchError::SingularMatrix(format!("{what} is not invertible")))
}

fn to_array(m: Matrix3<f64>) -> Covariance {
    let sym = (m + m.transpose()) * 0.5;
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = sym[(i, j)];
        }
    }
    out
}

/// Delta-method covariance `H⁻¹ V H⁻ᵀ` of the moment estimator, with
/// `H_rj = ∂μ'_r/∂θ_j` by central differences and
/// `V_rq = (μ'_{r+q} - μ'_r μ'_q) / n`.
pub fn mm_covariance(params: LerchParams, t: Truncation, data: &FrequencyTable) -> Result<Covariance> {
    let n = data.n_total();
    let d = LerchDist::new(params, t)?;
    let mut mu = [0.0; 7];
    for (r, m) in mu.iter_mut().enumerate().skip(1) {
        *m = d.moment_uncorrected(r as u32)?;
    }
    let mut h = Matrix3::zeros();
    for j in 0..3 {
        let step = fd_step(&params, &t, j);
        let up = LerchDist::new(shifted(&params, j, step), t)?;
        let dn = LerchDist::new(shifted(&params, j, -step), t)?;
        for r in 0..3 {
            let order = r as u32 + 1;
            h[(r, j)] = (up.moment_uncorrected(order)? - dn.moment_uncorrected(order)?) / (2.0 * step);
        }
    }
    let mut v = Matrix3::zeros();
    for r in 0..3 {
        for q in 0..3 {
            v[(r, q)] = (mu[r + q + 2] - mu[r + 1] * mu[q + 1]) / n;
        }
    }
    let hinv = invert(h, "moment Jacobian")?;
    Ok(to_array(hinv * v * hinv.transpose()))
}

/// Analytic gradient of the log-likelihood with respect to `(z, s, v)`.
pub fn log_likelihood_gradient(params: LerchParams, t: Truncation, data: &FrequencyTable) -> Result<[f64; 3]> {
    let d = LerchDist::new(params, t)?;
    let gn = d.ln_norm_gradient()?;
    let mut g = [0.0; 3];
    let mut n = 0.0;
    for c in data.classes() {
        if c.observed == 0.0 {
            continue;
        }
        let x = c.count as f64;
        n += c.observed;
        g[0] += c.observed * x / params.z;
        g[1] -= c.observed * (params.v + x).ln();
        g[2] -= c.observed * params.s / (params.v + x);
    }
    for j in 0..3 {
        g[j] -= n * gn[j];
    }
    Ok(g)
}

/// Observed information `-∂²ℓ` by central differences of the analytic
/// gradient.
pub fn observed_information(params: LerchParams, t: Truncation, data: &FrequencyTable) -> Result<Matrix3<f64>> {
    let mut info = Matrix3::zeros();
    for j in 0..3 {
        let step = fd_step(&params, &t, j);
        let up = log_likelihood_gradient(shifted(&params, j, step), t, data)?;
        let dn = log_likelihood_gradient(shifted(&params, j, -step), t, data)?;
        for i in 0..3 {
            info[(i, j)] = -(up[i] - dn[i]) / (2.0 * step);
        }
    }
    Ok((info + info.transpose()) * 0.5)
}

/// Inverse observed information at `params`.
pub fn ml_covariance(params: LerchParams, t: Truncation, data: &FrequencyTable) -> Result<Covariance> {
    let info = observed_information(params, t, data)?;
    if info.cholesky().is_none() {
        return Err(LerchError::SingularMatrix(
            "observed information is not positive definite".into(),
        ));
    }
    Ok(to_array(invert(info, "observed information")?))
}

/// Newton steps on the score with a halving line search.
fn newton_polish(start: LerchParams, cfg: &FitConfig, data: &FrequencyTable) -> Result<LerchParams> {
    let t = cfg.truncation;
    let nll = |p: LerchParams| -> Result<f64> {
        p.validate(&t)?;
        neg_log_likelihood(&LerchDist::with_term_budget(p, t, cfg.term_budget)?, data)
    };
    let mut p = start;
    let mut f = nll(p)?;
    for _ in 0..20 {
        let g = log_likelihood_gradient(p, t, data)?;
        let info = observed_information(p, t, data)?;
        let Some(chol) = info.cholesky() else { break };
        let step = chol.solve(&nalgebra::Vector3::new(g[0], g[1], g[2]));
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let q = LerchParams::new(p.z + lambda * step[0], p.s + lambda * step[1], p.v + lambda * step[2]);
            if q.z > 0.0 && q.z < 1.0 {
                if let Ok(fq) = nll(q) {
                    if fq <= f {
                        let done = (f - fq) <= 1e-14 * f.abs();
                        p = q;
                        f = fq;
                        accepted = true;
                        if done {
                            return Ok(p);
                        }
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(p)
}
