//! The Lerch distribution `p_x = c zˣ (v+x)^{-s}` on a support window
//! `[a, b]` (`b` possibly infinite), with every distribution function
//! expressed through shifted Lerch transcendents.
//!
//! Writing `W_j(lo, hi) = Σ_{x=lo}^{hi} zˣ (v+x)^{-(s-j)}
//! = z^lo Φ(z, s-j, v+lo) - z^{hi+1} Φ(z, s-j, v+hi+1)`, the normalization is
//! `1/c = W_0(a, b)`, survival is `W_0(x, b) / W_0(a, b)`, and the moments
//! of `v + X` are `W_j(a, b) / W_0(a, b)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, LerchError, Result};
use crate::phi::{term_budget, Kernel, Series};
use crate::sum::CompensatedSum;

/// Relative tolerance for every internal Φ evaluation.
pub(crate) const PHI_TOL: f64 = 1e-14;

/// Finite windows up to this many atoms are summed directly.
const DIRECT_WINDOW: u64 = 64;

pub const MAX_MOMENT_ORDER: u32 = 6;

/// Support window `[lower, upper]`; `upper = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub lower: u64,
    pub upper: Option<u64>,
}

impl Default for Truncation {
    fn default() -> Self {
        Self::NONE
    }
}

impl Truncation {
    pub const NONE: Truncation = Truncation {
        lower: 0,
        upper: None,
    };

    pub fn new(lower: u64, upper: Option<u64>) -> Result<Self> {
        if let Some(b) = upper {
            if b < lower {
                return domain(format!("truncation needs b >= a, got a = {lower}, b = {b}"));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn zero_truncated() -> Self {
        Self {
            lower: 1,
            upper: None,
        }
    }

    pub fn is_untruncated(&self) -> bool {
        self.lower == 0 && self.upper.is_none()
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lower as i64 && self.upper.is_none_or(|b| x <= b as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LerchParams {
    pub z: f64,
    pub s: f64,
    pub v: f64,
}

impl LerchParams {
    pub fn new(z: f64, s: f64, v: f64) -> Self {
        Self { z, s, v }
    }

    pub fn validate(&self, trunc: &Truncation) -> Result<()> {
        if !(self.z > 0.0 && self.z < 1.0) {
            return domain(format!("z must satisfy 0 < z < 1, got {}", self.z));
        }
        if !self.s.is_finite() {
            return domain(format!("s must be finite, got {}", self.s));
        }
        let a = trunc.lower as f64;
        if !(self.v.is_finite() && self.v > -a) {
            return if trunc.lower == 0 {
                domain(format!("v must satisfy v > 0, got {}", self.v))
            } else {
                domain(format!(
                    "v must satisfy v > -a = {}, got {}",
                    -a, self.v
                ))
            };
        }
        Ok(())
    }
}

/// An immutable Lerch distribution with its normalization cached.
#[derive(Debug, Clone, PartialEq)]
pub struct LerchDist {
    params: LerchParams,
    trunc: Truncation,
    ln_z: f64,
    /// Normalization divided by `exp(ln_ref)`.
    norm: f64,
    /// `ln(z^a (v+a)^{-s})`; every window is held relative to this atom.
    ln_ref: f64,
    budget: u64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Signed Stirling numbers of the first kind, `s(r, j)` for r ≤ 4.
fn stirling_first(r: u32, j: u32) -> f64 {
    const TABLE: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 1.0, 0.0, 0.0],
        [0.0, 2.0, -3.0, 1.0, 0.0],
        [0.0, -6.0, 11.0, -6.0, 1.0],
    ];
    TABLE[r as usize][j as usize]
}

impl LerchDist {
    pub fn new(params: LerchParams, trunc: Truncation) -> Result<Self> {
        Self::with_term_budget(params, trunc, term_budget())
    }

    pub fn untruncated(z: f64, s: f64, v: f64) -> Result<Self> {
        Self::new(LerchParams::new(z, s, v), Truncation::NONE)
    }

    /// Like [`LerchDist::new`] with an explicit cap on Φ series terms.
    pub fn with_term_budget(params: LerchParams, trunc: Truncation, budget: u64) -> Result<Self> {
        params.validate(&trunc)?;
        let mut d = Self {
            params,
            trunc,
            ln_z: params.z.ln(),
            norm: 1.0,
            ln_ref: trunc.lower as f64 * params.z.ln() - params.s * (params.v + trunc.lower as f64).ln(),
            budget: budget.max(1),
        };
        let norm = d.window(params.s, d.lower(), trunc.upper)?;
        if !(norm > 0.0 && norm.is_finite()) {
            return domain(format!("normalization is not a positive finite number: {norm}"));
        }
        d.norm = norm;
        Ok(d)
    }

    pub fn params(&self) -> LerchParams {
        self.params
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// `1/c = z^a Φ(z,s,v+a) - z^{b+1} Φ(z,s,v+b+1)`.
    pub fn norm(&self) -> f64 {
        self.ln_norm().exp()
    }

    pub fn ln_norm(&self) -> f64 {
        self.norm.ln() + self.ln_ref
    }

    fn lower(&self) -> u64 {
        self.trunc.lower
    }

    fn is_point_mass(&self) -> bool {
        self.trunc.upper == Some(self.trunc.lower)
    }

    /// `ln(zˣ (v+x)^{-s})` with the given exponent.
    fn ln_kernel(&self, ln_z: f64, s: f64, x: u64) -> f64 {
        let xf = x as f64;
        xf * ln_z - s * (self.params.v + xf).ln()
    }

    fn tail_at(&self, ln_z: f64, s: f64, from: u64) -> Result<f64> {
        let mut series = Series::tail(ln_z, s, self.params.v, from);
        series.ln_scale -= self.ln_ref;
        Ok(series.sum(PHI_TOL, self.budget)?.value)
    }

    /// `Σ_{x=lo}^{hi} zˣ (v+x)^{-s}` at an arbitrary `ln z` (used by the p.g.f.).
    fn window_at(&self, ln_z: f64, s: f64, lo: u64, hi: Option<u64>) -> Result<f64> {
        match hi {
            Some(h) if h < lo => Ok(0.0),
            Some(h) if h - lo < DIRECT_WINDOW => {
                let mut acc = CompensatedSum::new();
                for x in lo..=h {
                    acc.add((self.ln_kernel(ln_z, s, x) - self.ln_ref).exp());
                }
                Ok(acc.value())
            }
            Some(h) => Ok(self.tail_at(ln_z, s, lo)? - self.tail_at(ln_z, s, h + 1)?),
            None => self.tail_at(ln_z, s, lo),
        }
    }

    fn window(&self, s: f64, lo: u64, hi: Option<u64>) -> Result<f64> {
        self.window_at(self.ln_z, s, lo, hi)
    }

    /// `W_j(a, b)`: the normalization window with exponent `s - j`.
    fn moment_window(&self, j: u32) -> Result<f64> {
        if j == 0 {
            return Ok(self.norm);
        }
        self.window(self.params.s - j as f64, self.lower(), self.trunc.upper)
    }

    fn scaled_series(&self, s: f64, from: u64, kernel: Kernel) -> Result<f64> {
        let mut series = Series::new(self.ln_z, s, self.params.v + from as f64, kernel);
        series.ln_scale = from as f64 * self.ln_z - self.ln_ref;
        Ok(series.sum(PHI_TOL, self.budget)?.value)
    }

    /// Partials of `Σ_{x≥m} zˣ (v+x)^{-s}` with respect to `(z, s, v)`.
    fn tail_partials(&self, m: u64) -> Result<[f64; 3]> {
        let LerchParams { z, s, .. } = self.params;
        let value = self.scaled_series(s, m, Kernel::Value)?;
        let dz = m as f64 / z * value + self.scaled_series(s, m, Kernel::Dz)?;
        let ds = self.scaled_series(s, m, Kernel::Ds)?;
        let dv = if s == 0.0 {
            0.0
        } else {
            -s * self.scaled_series(s + 1.0, m, Kernel::Value)?
        };
        Ok([dz, ds, dv])
    }

    /// `∂ ln(1/c) / ∂(z, s, v)`.
    pub fn ln_norm_gradient(&self) -> Result<[f64; 3]> {
        let LerchParams { z, s, v } = self.params;
        let a = self.lower();
        let raw = match self.trunc.upper {
            Some(b) if b - a < DIRECT_WINDOW => {
                let mut g = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
                for x in a..=b {
                    let xf = x as f64;
                    let k = (self.ln_kernel(self.ln_z, s, x) - self.ln_ref).exp();
                    g[0].add(xf * k / z);
                    g[1].add(-(v + xf).ln() * k);
                    g[2].add(-s * k / (v + xf));
                }
                g.map(|acc| acc.value())
            }
            upper => {
                let mut g = self.tail_partials(a)?;
                if let Some(b) = upper {
                    let hi = self.tail_partials(b + 1)?;
                    for j in 0..3 {
                        g[j] -= hi[j];
                    }
                }
                g
            }
        };
        Ok(raw.map(|x| x / self.norm))
    }

    pub fn ln_pmf(&self, x: i64) -> f64 {
        if !self.trunc.contains(x) {
            return f64::NEG_INFINITY;
        }
        self.ln_kernel(self.ln_z, self.params.s, x as u64) - self.ln_ref - self.norm.ln()
    }

    pub fn pmf(&self, x: i64) -> f64 {
        if !self.trunc.contains(x) {
            return 0.0;
        }
        (self.ln_kernel(self.ln_z, self.params.s, x as u64) - self.ln_ref).exp() / self.norm
    }

    /// `Pr(lo ≤ X ≤ hi)`, clipped to the support; `hi = None` is unbounded.
    pub fn interval_mass(&self, lo: i64, hi: Option<i64>) -> Result<f64> {
        let lo = lo.max(self.lower() as i64) as u64;
        let hi = match (hi, self.trunc.upper) {
            (Some(h), Some(b)) => Some(h.min(b as i64)),
            (Some(h), None) => Some(h),
            (None, b) => b.map(|b| b as i64),
        };
        if let Some(h) = hi {
            if h < lo as i64 {
                return Ok(0.0);
            }
        }
        let w = self.window(self.params.s, lo, hi.map(|h| h as u64))?;
        Ok((w / self.norm).clamp(0.0, 1.0))
    }

    /// `Pr(X ≥ x)`.
    pub fn survival(&self, x: i64) -> Result<f64> {
        if x <= self.lower() as i64 {
            return Ok(1.0);
        }
        if let Some(b) = self.trunc.upper {
            if x > b as i64 {
                return Ok(0.0);
            }
        }
        self.interval_mass(x, None)
    }

    /// `Pr(X ≤ x)`.
    pub fn cdf(&self, x: i64) -> Result<f64> {
        if x < self.lower() as i64 {
            return Ok(0.0);
        }
        if let Some(b) = self.trunc.upper {
            if x >= b as i64 {
                return Ok(1.0);
            }
        }
        if ((x as u64) - self.lower()) < DIRECT_WINDOW {
            return self.interval_mass(self.lower() as i64, Some(x));
        }
        Ok((1.0 - self.survival(x + 1)?).clamp(0.0, 1.0))
    }

    /// `h(x) = Pr(X = x) / Pr(X ≥ x)`.
    pub fn hazard(&self, x: i64) -> Result<f64> {
        if !self.trunc.contains(x) {
            return domain(format!("hazard is defined on the support only, got x = {x}"));
        }
        let x = x as u64;
        let upper = self.window(self.params.s, x, self.trunc.upper)?;
        Ok((self.ln_kernel(self.ln_z, self.params.s, x) - self.ln_ref).exp() / upper)
    }

    /// Smallest supported `x` with `cdf(x) ≥ q`.
    pub fn quantile(&self, q: f64) -> Result<i64> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("quantile level must satisfy 0 < q < 1, got {q}"));
        }
        let a = self.lower() as i64;
        let b = self.trunc.upper.map(|b| b as i64);
        if self.cdf(a)? >= q {
            return Ok(a);
        }
        // cdf(lo) < q <= cdf(hi)
        let mut lo = a;
        let mut step = 1i64;
        let mut hi = loop {
            let cand = match b {
                Some(b) => (lo + step).min(b),
                None => lo + step,
            };
            if self.cdf(cand)? >= q {
                break cand;
            }
            if step > (1i64 << 52) {
                return Err(LerchError::NoConvergence(format!(
                    "quantile search for q = {q} ran past x = {cand}"
                )));
            }
            lo = cand;
            step *= 2;
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.cdf(mid)? >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    fn generating(&self, ln_zy: f64) -> Result<f64> {
        if ln_zy == f64::NEG_INFINITY {
            return Ok(if self.lower() == 0 { self.pmf(0) } else { 0.0 });
        }
        if !(ln_zy < 0.0) {
            return domain("generating function needs y·z < 1");
        }
        Ok(self.window_at(ln_zy, self.params.s, self.lower(), self.trunc.upper)? / self.norm)
    }

    /// Probability generating function `E[y^X]` for `0 ≤ y ≤ 1`.
    pub fn pgf(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return domain(format!("p.g.f. is evaluated for 0 <= y <= 1, got {y}"));
        }
        if y == 1.0 {
            return Ok(1.0);
        }
        self.generating(self.ln_z + y.ln())
    }

    /// Moment generating function `E[e^{tX}]`, defined while `z eᵗ < 1`.
    pub fn mgf(&self, t: f64) -> Result<f64> {
        if !(self.ln_z + t < 0.0) {
            return domain(format!("m.g.f. needs z·e^t < 1, got t = {t}"));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        self.generating(self.ln_z + t)
    }

    pub fn mean(&self) -> Result<f64> {
        if self.is_point_mass() {
            return Ok(self.lower() as f64);
        }
        Ok(self.moment_window(1)? / self.norm - self.params.v)
    }

    /// `σ² = (v+μ)² + (-2(v+μ) W₁ + W₂) / W₀`.
    pub fn variance(&self) -> Result<f64> {
        if self.is_point_mass() {
            return Ok(0.0);
        }
        let w1 = self.moment_window(1)?;
        let w2 = self.moment_window(2)?;
        let shifted_mean = w1 / self.norm;
        let var = shifted_mean * shifted_mean + (-2.0 * shifted_mean * w1 + w2) / self.norm;
        Ok(var.max(0.0))
    }

    fn check_order(r: u32, min: u32, max: u32) -> Result<()> {
        if r < min || r > max {
            return domain(format!("moment order must lie in {min}..={max}, got {r}"));
        }
        Ok(())
    }

    /// `E[X^r]` for `1 ≤ r ≤ 6`.
    pub fn moment_uncorrected(&self, r: u32) -> Result<f64> {
        Self::check_order(r, 1, MAX_MOMENT_ORDER)?;
        if self.is_point_mass() {
            return Ok((self.lower() as f64).powi(r as i32));
        }
        let v = self.params.v;
        let mut acc = CompensatedSum::new();
        for j in 0..=r {
            acc.add(binomial(r, j) * (-v).powi((r - j) as i32) * self.moment_window(j)?);
        }
        Ok(acc.value() / self.norm)
    }

    /// `E[(X - μ)^r]` for `2 ≤ r ≤ 6`.
    pub fn moment_central(&self, r: u32) -> Result<f64> {
        Self::check_order(r, 2, MAX_MOMENT_ORDER)?;
        if self.is_point_mass() {
            return Ok(0.0);
        }
        let shifted_mean = self.moment_window(1)? / self.norm;
        let mut acc = CompensatedSum::new();
        for j in 0..=r {
            let sign = if (r - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            acc.add(
                sign * binomial(r, j) * self.moment_window(j)? / self.norm
                    * shifted_mean.powi((r - j) as i32),
            );
        }
        Ok(acc.value())
    }

    /// `E[X(X-1)…(X-r+1)]` for `1 ≤ r ≤ 4`.
    pub fn moment_factorial(&self, r: u32) -> Result<f64> {
        Self::check_order(r, 1, 4)?;
        let mut acc = CompensatedSum::new();
        for j in 1..=r {
            acc.add(stirling_first(r, j) * self.moment_uncorrected(j)?);
        }
        Ok(acc.value())
    }

    /// Most probable value; ties resolve to the smaller `x`.
    pub fn mode(&self) -> i64 {
        let a = self.lower() as i64;
        let b = self.trunc.upper.map_or(i64::MAX, |b| b as i64);
        let LerchParams { s, v, .. } = self.params;
        if s >= 0.0 {
            return a;
        }
        // p_{x}/p_{x-1} ≥ 1  ⇔  x ≤ 1/(z^{1/s} - 1) - v + 1
        let w = (self.ln_z / s).exp();
        let edge = 1.0 / (w - 1.0) - v;
        let mut x = if edge.is_finite() {
            (edge.floor() + 1.0).clamp(a as f64, b as f64) as i64
        } else {
            b
        };
        while x > a && self.ln_pmf(x - 1) >= self.ln_pmf(x) {
            x -= 1;
        }
        while x < b && self.ln_pmf(x + 1) > self.ln_pmf(x) {
            x += 1;
        }
        x
    }

    /// Strong unimodality (log-concavity) condition `s < 0` and `v ≥ 1`.
    pub fn is_strongly_unimodal(&self) -> bool {
        self.params.s < 0.0 && self.params.v >= 1.0
    }
}

/// Critical `s* = -ln 2 / ln(1 + 1/(v² + 2v))`: for small `z` the
/// variance-to-mean ratio is below one iff `s < s*`.
pub fn vmr_threshold(v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return domain(format!("v must be positive, got {v}"));
    }
    Ok(-std::f64::consts::LN_2 / (1.0 / (v * v + 2.0 * v)).ln_1p())
}
