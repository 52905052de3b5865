//! The hybrid band: DKW-padded supports plus delta-method standard errors.
//!
//! Two forms are kept apart. The proposition form pads each arm's extrema
//! by `ε_k = (1 + 4C_α)√(2 log(8/α_u)/N_k)` and uses Φ⁻¹(1 − α_u/4). The
//! simulation form pads the plug-in endpoints by a pooled
//! `ε_n = √(log C/(2nT))` and takes its supports from the baseline outcomes.

use serde::{Deserialize, Serialize};

use crate::concentration::{check_truncation, dkw_epsilon, padded_support, Dependence, PerArm, Sides, Truncation};
use crate::error::{invalid, Error, Result};
use crate::estimators::GroupStats;
use crate::manski::{
    bound_standard_errors, manski_region, prop1_band, ArmSupport, IdentificationRegion,
    ShareCoupling, SupportBounds, SupportSource,
};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandForm {
    Proposition,
    Algorithm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridBand {
    /// Supports entering the region and the gradients.
    pub padded_support: SupportBounds,
    pub region: IdentificationRegion,
    pub se_lower: f64,
    pub se_upper: f64,
    pub lower: f64,
    pub upper: f64,
    pub eps: PerArm,
    pub multiplier: f64,
    pub alpha_u: f64,
    pub form: BandForm,
}

impl HybridBand {
    pub fn interval(&self) -> IdentificationRegion {
        IdentificationRegion {
            lower: self.lower,
            upper: self.upper,
        }
    }
}

/// Hybrid band, proposition form.
pub fn hybrid_band(
    stats: &GroupStats,
    alpha_u: f64,
    c_alpha: f64,
    truncation: Truncation,
) -> Result<HybridBand> {
    if !(alpha_u > 0.0 && alpha_u < 1.0) {
        return Err(invalid(format!("alpha_u {alpha_u} must lie in (0, 1)")));
    }
    if !(c_alpha >= 0.0 && c_alpha.is_finite()) {
        return Err(invalid(format!("C_alpha {c_alpha} must be >= 0")));
    }
    stats.require_overlap()?;
    stats.require_arm_size(2)?;
    check_truncation(stats, truncation)?;

    if let Truncation::BothKnown { lambda, upper } = truncation {
        let support = SupportBounds::known(lambda, upper)?;
        let b = prop1_band(stats, &support, alpha_u)?;
        return Ok(HybridBand {
            padded_support: support,
            region: b.region,
            se_lower: b.se_lower,
            se_upper: b.se_upper,
            lower: b.band_lower,
            upper: b.band_upper,
            eps: PerArm::default(),
            multiplier: b.multiplier,
            alpha_u,
            form: BandForm::Proposition,
        });
    }

    let dep = Dependence::Mixing { c_alpha };
    let (sides, lower_known) = match truncation {
        Truncation::LowerKnown { lambda } => (Sides::One, Some(lambda)),
        _ => (Sides::Two, None),
    };
    let eps = PerArm {
        control: dkw_epsilon(alpha_u, stats.control.n, sides, 8.0, dep),
        treated: dkw_epsilon(alpha_u, stats.treated.n, sides, 8.0, dep),
    };
    let support = padded_support(stats, &eps, lower_known)?;
    let region = manski_region(stats, &support)?;
    let (se_lower, se_upper) = bound_standard_errors(stats, &support, ShareCoupling::Coupled)?;
    let z = normal::inverse_cdf(1.0 - alpha_u / 4.0);
    Ok(HybridBand {
        padded_support: support,
        region,
        se_lower,
        se_upper,
        lower: region.lower - z * se_lower,
        upper: region.upper + z * se_upper,
        eps,
        multiplier: z,
        alpha_u,
        form: BandForm::Proposition,
    })
}

/// How the simulation form picks `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SupportRule {
    /// Pooled extrema of the baseline outcomes; two-sided envelope.
    EmpiricalExtrema,
    /// Known lower limit, baseline maximum above; one-sided envelope.
    KnownLower { lower: f64 },
    /// Both limits known; the hybrid collapses to the plug-in interval.
    Known { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Algorithm1Bands {
    pub support: SupportBounds,
    pub manski: IdentificationRegion,
    pub hybrid: HybridBand,
    pub eps_n: f64,
}

/// `region` widened by `eps` plus `z` standard errors on each side.
pub fn widen(region: IdentificationRegion, eps: f64, z: f64, se_lower: f64, se_upper: f64) -> IdentificationRegion {
    IdentificationRegion {
        lower: region.lower - eps - z * se_lower,
        upper: region.upper + eps + z * se_upper,
    }
}

/// Plug-in interval and hybrid band of the single-threshold simulation.
///
/// `baseline` holds the untreated potential outcomes of every observation
/// in the replication; `stats` are built from the observed outcomes.
pub fn algorithm1_bands(
    baseline: &[f64],
    stats: &GroupStats,
    alpha: f64,
    rule: SupportRule,
    coupling: ShareCoupling,
) -> Result<Algorithm1Bands> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    if baseline.is_empty() {
        return Err(Error::Data("no baseline outcomes".into()));
    }
    stats.require_overlap()?;
    let (lo, hi) = baseline
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let (a, b, log_c) = match rule {
        SupportRule::EmpiricalExtrema => (lo, hi, Some((2.0 / alpha).ln())),
        SupportRule::KnownLower { lower } => (lower, hi, Some((1.0 / alpha).ln())),
        SupportRule::Known { lower, upper } => (lower, upper, None),
    };
    let s = ArmSupport { lower: a, upper: b };
    let source = match rule {
        SupportRule::EmpiricalExtrema => SupportSource::EmpiricalExtrema,
        _ => SupportSource::KnownConstant,
    };
    let support = SupportBounds::new(s, s, source)?;
    let manski = manski_region(stats, &support)?;

    let hybrid = match log_c {
        None => HybridBand {
            padded_support: support,
            region: manski,
            se_lower: 0.0,
            se_upper: 0.0,
            lower: manski.lower,
            upper: manski.upper,
            eps: PerArm::default(),
            multiplier: 0.0,
            alpha_u: alpha,
            form: BandForm::Algorithm1,
        },
        Some(log_c) => {
            let eps_n = (log_c / (2.0 * stats.n_total() as f64)).sqrt();
            let (se_lower, se_upper) = bound_standard_errors(stats, &support, coupling)?;
            let z = normal::inverse_cdf(1.0 - alpha / 4.0);
            let band = widen(manski, eps_n, z, se_lower, se_upper);
            HybridBand {
                padded_support: support,
                region: manski,
                se_lower,
                se_upper,
                lower: band.lower,
                upper: band.upper,
                eps: PerArm {
                    control: eps_n,
                    treated: eps_n,
                },
                multiplier: z,
                alpha_u: alpha,
                form: BandForm::Algorithm1,
            }
        }
    };
    Ok(Algorithm1Bands {
        support,
        manski,
        eps_n: hybrid.eps.control,
        hybrid,
    })
}
