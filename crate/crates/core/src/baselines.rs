//! Generalized Poisson comparison models.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gof::CountModel;
use crate::special::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum GenPoissonVariant {
    Standard,
    /// Restricted form with zero adjustment `phi`; `lambda` holds alpha.
    RestrictedAdjusted { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenPoissonParams {
    pub theta: f64,
    pub lambda: f64,
    #[serde(flatten)]
    pub variant: GenPoissonVariant,
}

impl GenPoissonParams {
    pub fn standard(theta: f64, lambda: f64) -> Self {
        Self {
            theta,
            lambda,
            variant: GenPoissonVariant::Standard,
        }
    }

    pub fn adjusted(theta: f64, alpha: f64, phi: f64) -> Self {
        Self {
            theta,
            lambda: alpha,
            variant: GenPoissonVariant::RestrictedAdjusted { phi },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return domain(format!("theta must be > 0, got {}", self.theta));
        }
        if !self.lambda.is_finite() {
            return domain("lambda must be finite");
        }
        if let GenPoissonVariant::RestrictedAdjusted { phi } = self.variant {
            if !(0.0..1.0).contains(&phi) {
                return domain(format!("phi must lie in [0, 1), got {phi}"));
            }
        }
        Ok(())
    }

    /// Largest count with positive mass when `lambda < 0`.
    pub fn support_max(&self) -> Option<u64> {
        match self.variant {
            GenPoissonVariant::Standard if self.lambda < 0.0 => Some((-self.theta / self.lambda).floor() as u64),
            _ => None,
        }
    }

    pub fn pmf(&self, x: i64) -> Result<f64> {
        match self.variant {
            GenPoissonVariant::Standard => genpoisson_pmf(self, x),
            GenPoissonVariant::RestrictedAdjusted { .. } => genpoisson_adjusted_pmf(self, x),
        }
    }
}

/// `θ(θ+xλ)^{x-1} e^{-θ-xλ} / x!`, zero beyond `[-θ/λ]` when `λ < 0`.
///
/// Not renormalized after truncation.
pub fn genpoisson_pmf(p: &GenPoissonParams, x: i64) -> Result<f64> {
    p.validate()?;
    if x < 0 {
        return domain(format!("count must be >= 0, got {x}"));
    }
    if let Some(m) = p.support_max() {
        if x as u64 > m {
            return Ok(0.0);
        }
    }
    let xf = x as f64;
    let base = p.theta + xf * p.lambda;
    if base <= 0.0 {
        return Ok(if x == 1 { p.theta * (-p.theta - p.lambda).exp() } else { 0.0 });
    }
    let ln = p.theta.ln() + (xf - 1.0) * base.ln() - p.theta - xf * p.lambda - ln_factorial(x as u64);
    Ok(ln.exp())
}

/// Zero-adjusted restricted form: `p_0 = φ + (1-φ)e^{-θ}` and
/// `p_x = (1-φ)(1+xα)^{x-1}(θe^{-αθ})^x e^{-θ}/x!` for `x ≥ 1`.
pub fn genpoisson_adjusted_pmf(p: &GenPoissonParams, x: i64) -> Result<f64> {
    p.validate()?;
    let phi = match p.variant {
        GenPoissonVariant::RestrictedAdjusted { phi } => phi,
        GenPoissonVariant::Standard => return domain("adjusted pmf needs the restricted_adjusted variant"),
    };
    if x < 0 {
        return domain(format!("count must be >= 0, got {x}"));
    }
    let theta = p.theta;
    let alpha = p.lambda;
    if x == 0 {
        return Ok(phi + (1.0 - phi) * (-theta).exp());
    }
    let xf = x as f64;
    let base = 1.0 + xf * alpha;
    if base <= 0.0 {
        return Ok(0.0);
    }
    let ln = (xf - 1.0) * base.ln() + xf * (theta.ln() - alpha * theta) - theta - ln_factorial(x as u64);
    Ok((1.0 - phi) * ln.exp())
}

impl CountModel for GenPoissonParams {
    fn pmf(&self, x: i64) -> f64 {
        if x < 0 {
            return 0.0;
        }
        GenPoissonParams::pmf(self, x).unwrap_or(f64::NAN)
    }
}
