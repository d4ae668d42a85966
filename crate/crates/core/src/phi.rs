//! Lerch's transcendent `Φ(z, s, v) = Σ_{n≥0} zⁿ / (n + v)^s` and its first
//! partial derivatives, for real `0 < z < 1`, real `s` and `v > 0`.
//!
//! Terms are evaluated in log space and accumulated with compensated
//! summation. Summation stops once a geometric bound on the remaining tail
//! falls below the requested relative tolerance. The bound uses a ratio cap
//! `r*` that dominates every later term ratio `t_{k+1}/t_k`, so the reported
//! `error_bound` is a certified bound on the truncation error (plus the
//! rounding of the final compensated sum).

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{domain, LerchError, Result};
use crate::sum::CompensatedSum;

/// Hard cap on the number of series terms.
pub const DEFAULT_TERM_BUDGET: u64 = 10_000_000;

static TERM_BUDGET: AtomicU64 = AtomicU64::new(DEFAULT_TERM_BUDGET);

/// Overrides the process-wide term cap used by [`phi`] and friends.
pub fn set_term_budget(terms: u64) {
    TERM_BUDGET.store(terms.max(1), Ordering::Relaxed);
}

pub fn term_budget() -> u64 {
    TERM_BUDGET.load(Ordering::Relaxed)
}

/// ln(1e300); any term above this raises [`LerchError::Overflow`].
const OVERFLOW_LN: f64 = 690.775_527_898_213_7;

const MIN_REL_TOL: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiArgs {
    pub z: f64,
    pub s: f64,
    pub v: f64,
}

impl PhiArgs {
    pub fn new(z: f64, s: f64, v: f64) -> Result<Self> {
        let args = Self { z, s, v };
        args.validate()?;
        Ok(args)
    }

    fn validate(&self) -> Result<()> {
        if !(self.z > 0.0 && self.z < 1.0) {
            return domain(format!("Lerch transcendent needs 0 < z < 1, got z = {}", self.z));
        }
        if !self.s.is_finite() {
            return domain(format!("s must be finite, got {}", self.s));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return domain(format!("Lerch transcendent needs v > 0, got v = {}", self.v));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiResult {
    pub value: f64,
    /// Bound on `|true value - value|`.
    pub error_bound: f64,
    pub terms_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kernel {
    /// `zⁿ (n+v)^{-s}`
    Value,
    /// `n z^{n-1} (n+v)^{-s}`, n ≥ 1
    Dz,
    /// `-ln(n+v) zⁿ (n+v)^{-s}`
    Ds,
}

/// One Lerch-type series in log space: term n is `exp(ln_scale) · kernel(n)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Series {
    pub ln_z: f64,
    pub s: f64,
    pub v: f64,
    pub ln_scale: f64,
    pub kernel: Kernel,
}

impl Series {
    pub fn new(ln_z: f64, s: f64, v: f64, kernel: Kernel) -> Self {
        Self {
            ln_z,
            s,
            v,
            ln_scale: 0.0,
            kernel,
        }
    }

    /// `Σ_{n≥offset} zⁿ (n+v)^{-s}` written as `z^offset Φ(z, s, v+offset)`.
    pub fn tail(ln_z: f64, s: f64, v: f64, offset: u64) -> Self {
        let off = offset as f64;
        Self {
            ln_z,
            s,
            v: v + off,
            ln_scale: off * ln_z,
            kernel: Kernel::Value,
        }
    }

    fn term(&self, n: u64) -> Result<f64> {
        let nf = n as f64;
        let base = nf + self.v;
        let (ln_abs, sign) = match self.kernel {
            Kernel::Value => (nf * self.ln_z - self.s * base.ln(), 1.0),
            Kernel::Dz => {
                if n == 0 {
                    return Ok(0.0);
                }
                (nf.ln() + (nf - 1.0) * self.ln_z - self.s * base.ln(), 1.0)
            }
            Kernel::Ds => {
                let l = base.ln();
                if l == 0.0 {
                    return Ok(0.0);
                }
                (nf * self.ln_z - self.s * l + l.abs().ln(), -l.signum())
            }
        };
        let ln_abs = ln_abs + self.ln_scale;
        if ln_abs > OVERFLOW_LN {
            return Err(LerchError::Overflow { term: n });
        }
        Ok(sign * ln_abs.exp())
    }

    /// Upper bound on `|t_{k+1} / t_k|` for every `k ≥ m`.
    fn ratio_cap(&self, m: u64) -> f64 {
        let mf = m as f64;
        let x = mf + self.v;
        let z = self.ln_z.exp();
        let growth = if self.s < 0.0 {
            ((1.0 / x).ln_1p() * -self.s).exp()
        } else {
            1.0
        };
        match self.kernel {
            Kernel::Value => z * growth,
            Kernel::Dz => z * (1.0 + 1.0 / mf.max(1.0)) * growth,
            Kernel::Ds => {
                if x > 1.0 {
                    z * (1.0 + 1.0 / (x * x.ln())) * growth
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn sum(&self, rel_tol: f64, budget: u64) -> Result<PhiResult> {
        let mut n = if self.kernel == Kernel::Dz { 1 } else { 0 };
        let mut acc = CompensatedSum::new();
        let mut t = self.term(n)?;
        let mut used = 0u64;
        loop {
            acc.add(t);
            used += 1;
            let next = self.term(n + 1)?;
            let cap = self.ratio_cap(n + 1);
            if cap < 1.0 {
                let value = acc.value();
                let tail = next.abs() / (1.0 - cap);
                let bound = tail + 2.0 * f64::EPSILON * value.abs();
                if bound <= rel_tol * value.abs() {
                    return Ok(PhiResult {
                        value,
                        error_bound: bound,
                        terms_used: used,
                    });
                }
            }
            if used >= budget {
                return Err(LerchError::NoConvergence(format!(
                    "Lerch series not converged after {used} terms (z = {}, s = {}, v = {})",
                    self.ln_z.exp(),
                    self.s,
                    self.v
                )));
            }
            n += 1;
            t = next;
        }
    }
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(MIN_REL_TOL..1.0).contains(&rel_tol) {
        return domain(format!(
            "relative tolerance must lie in [{MIN_REL_TOL:e}, 1), got {rel_tol}"
        ));
    }
    Ok(())
}

fn run(args: PhiArgs, rel_tol: f64, kernel: Kernel) -> Result<PhiResult> {
    args.validate()?;
    check_tol(rel_tol)?;
    Series::new(args.z.ln(), args.s, args.v, kernel).sum(rel_tol, term_budget())
}

/// Lerch's transcendent Φ(z, s, v).
pub fn phi(args: PhiArgs, rel_tol: f64) -> Result<PhiResult> {
    run(args, rel_tol, Kernel::Value)
}

/// ∂Φ/∂z, summed term by term.
pub fn phi_dz(args: PhiArgs, rel_tol: f64) -> Result<PhiResult> {
    run(args, rel_tol, Kernel::Dz)
}

/// ∂Φ/∂s = -Σ zⁿ ln(n+v) (n+v)^{-s}.
pub fn phi_ds(args: PhiArgs, rel_tol: f64) -> Result<PhiResult> {
    run(args, rel_tol, Kernel::Ds)
}

/// ∂Φ/∂v = -s Φ(z, s+1, v).
pub fn phi_dv(args: PhiArgs, rel_tol: f64) -> Result<PhiResult> {
    let shifted = PhiArgs {
        s: args.s + 1.0,
        ..args
    };
    let r = phi(shifted, rel_tol)?;
    let value = if args.s == 0.0 { 0.0 } else { -args.s * r.value };
    Ok(PhiResult {
        value,
        error_bound: args.s.abs() * r.error_bound,
        terms_used: r.terms_used,
    })
}

/// Both sides of `Φ(z,s,v) = z^m Φ(z,s,v+m) + Σ_{x<m} z^x (x+v)^{-s}`.
pub fn phi_shift_identity(args: PhiArgs, m: u32, rel_tol: f64) -> Result<(f64, f64)> {
    let lhs = phi(args, rel_tol)?.value;
    let shifted = phi(
        PhiArgs {
            v: args.v + m as f64,
            ..args
        },
        rel_tol,
    )?
    .value;
    let mut acc = CompensatedSum::new();
    for x in 0..m {
        let xf = x as f64;
        acc.add((xf * args.z.ln() - args.s * (xf + args.v).ln()).exp());
    }
    acc.add(args.z.powi(m as i32) * shifted);
    Ok((lhs, acc.value()))
}
