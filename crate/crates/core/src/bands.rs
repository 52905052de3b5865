//! One entry point for every band method at a single threshold.

use serde::{Deserialize, Serialize};

use crate::concentration::{iid_band, mixing_band, PaddingConfig, Truncation};
use crate::error::{invalid, Error, Result};
use crate::estimators::{naive_estimate, GroupStats, VarianceMode};
use crate::hybrid::hybrid_band;
use crate::manski::{prop1_band, trimmed_support, IdentificationRegion, SupportBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Difference in means with a Wald interval.
    Naive,
    /// Delta-method band at the arm extrema.
    ManskiMax,
    /// Delta-method band at the 5%/95% quantiles.
    ManskiQ05,
    /// Delta-method band at the 10%/90% quantiles.
    ManskiQ10,
    Iid,
    Mixing,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Naive,
        Method::ManskiMax,
        Method::ManskiQ05,
        Method::ManskiQ10,
        Method::Iid,
        Method::Mixing,
        Method::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::ManskiMax => "manski-max",
            Method::ManskiQ05 => "manski-q05",
            Method::ManskiQ10 => "manski-q10",
            Method::Iid => "iid",
            Method::Mixing => "mixing",
            Method::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown method '{s}' (expected one of naive, manski-max, manski-q05, \
                     manski-q10, iid, mixing, hybrid)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    pub method: Method,
    /// Everything the padded bands need, including `alpha_u`, C_α and truncation.
    pub padding: PaddingConfig,
    pub variance_mode: VarianceMode,
}

impl BandConfig {
    pub fn new(method: Method, alpha_u: f64) -> Self {
        BandConfig {
            method,
            padding: PaddingConfig::with_alpha(alpha_u),
            variance_mode: VarianceMode::default(),
        }
    }

    pub fn alpha_u(&self) -> f64 {
        self.padding.alpha_u
    }

    pub fn with_alpha_u(mut self, alpha_u: f64) -> Self {
        self.padding.alpha_u = alpha_u;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandResult {
    pub method: Method,
    pub alpha_u: f64,
    pub n0: usize,
    pub n1: usize,
    /// Identification region (a point for the naive estimator).
    pub region: IdentificationRegion,
    pub band_lower: f64,
    pub band_upper: f64,
    pub se_lower: Option<f64>,
    pub se_upper: Option<f64>,
    pub multiplier: Option<f64>,
    pub support: Option<SupportBounds>,
}

impl BandResult {
    pub fn excludes_zero(&self) -> bool {
        self.band_lower > 0.0 || self.band_upper < 0.0
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.band_lower + self.band_upper)
    }
}

fn manski_with(stats: &GroupStats, cfg: &BandConfig, support: SupportBounds) -> Result<BandResult> {
    let b = prop1_band(stats, &support, cfg.alpha_u())?;
    Ok(BandResult {
        method: cfg.method,
        alpha_u: cfg.alpha_u(),
        n0: stats.control.n,
        n1: stats.treated.n,
        region: b.region,
        band_lower: b.band_lower,
        band_upper: b.band_upper,
        se_lower: Some(b.se_lower),
        se_upper: Some(b.se_upper),
        multiplier: Some(b.multiplier),
        support: Some(support),
    })
}

/// The band selected by `cfg.method` at size `cfg.padding.alpha_u`.
pub fn compute_band(stats: &GroupStats, cfg: &BandConfig) -> Result<BandResult> {
    let alpha_u = cfg.alpha_u();
    let (n0, n1) = (stats.control.n, stats.treated.n);
    match cfg.method {
        Method::Naive => {
            let e = naive_estimate(stats, alpha_u, cfg.variance_mode)?;
            Ok(BandResult {
                method: cfg.method,
                alpha_u,
                n0,
                n1,
                region: IdentificationRegion {
                    lower: e.delta_hat,
                    upper: e.delta_hat,
                },
                band_lower: e.ci_lower,
                band_upper: e.ci_upper,
                se_lower: Some(e.se),
                se_upper: Some(e.se),
                multiplier: Some(e.multiplier),
                support: None,
            })
        }
        Method::ManskiMax => {
            let support = match cfg.padding.truncation {
                Truncation::BothKnown { lambda, upper } => SupportBounds::known(lambda, upper)?,
                _ => SupportBounds::extrema(stats)?,
            };
            manski_with(stats, cfg, support)
        }
        Method::ManskiQ05 => manski_with(stats, cfg, trimmed_support(stats, 0.05)?),
        Method::ManskiQ10 => manski_with(stats, cfg, trimmed_support(stats, 0.10)?),
        Method::Iid | Method::Mixing => {
            let b = if cfg.method == Method::Iid {
                iid_band(stats, &cfg.padding)?
            } else {
                mixing_band(stats, &cfg.padding)?
            };
            Ok(BandResult {
                method: cfg.method,
                alpha_u,
                n0,
                n1,
                region: b.plugin,
                band_lower: b.band.lower,
                band_upper: b.band.upper,
                se_lower: None,
                se_upper: None,
                multiplier: None,
                support: Some(b.support),
            })
        }
        Method::Hybrid => {
            let h = hybrid_band(stats, alpha_u, cfg.padding.c_alpha, cfg.padding.truncation)?;
            Ok(BandResult {
                method: cfg.method,
                alpha_u,
                n0,
                n1,
                region: h.region,
                band_lower: h.lower,
                band_upper: h.upper,
                se_lower: Some(h.se_lower),
                se_upper: Some(h.se_upper),
                multiplier: Some(h.multiplier),
                support: Some(h.padded_support),
            })
        }
    }
}
