//! Finite-sample paddings (DKW, Hoeffding, Bernstein) and the padded
//! Manski bands built from them, for i.i.d. and α-mixing samples.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{Arm, ArmStats, GroupStats};
use crate::manski::{
    manski_region, prop1_band, ArmSupport, IdentificationRegion, SupportBounds, SupportSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Dependence {
    #[default]
    Iid,
    /// `c_alpha` is Σ α(k)^{1/2}; padding prefactors scale by (1 + 4 C_α).
    Mixing { c_alpha: f64 },
}

impl Dependence {
    fn prefactor(self) -> f64 {
        match self {
            Dependence::Iid => 1.0,
            Dependence::Mixing { c_alpha } => 1.0 + 4.0 * c_alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Truncation {
    #[default]
    None,
    LowerKnown { lambda: f64 },
    BothKnown { lambda: f64, upper: f64 },
}

/// Which of the two i.i.d. Bernstein regime thresholds to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanPaddingRule {
    /// `min{quadratic, linear}`.
    #[default]
    Min,
    /// `max{quadratic, linear}`; makes the full Bernstein tail equal its budget.
    Max,
}

impl std::str::FromStr for MeanPaddingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(MeanPaddingRule::Min),
            "max" => Ok(MeanPaddingRule::Max),
            other => Err(invalid(format!("unknown mean padding rule '{other}'"))),
        }
    }
}

/// Constants of the weak-dependence Bernstein inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BernsteinWeakConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub gamma: f64,
    /// Long-run variance; estimated from each arm's series when absent.
    pub v: Option<f64>,
}

impl Default for BernsteinWeakConstants {
    fn default() -> Self {
        BernsteinWeakConstants {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            gamma: 0.5,
            v: None,
        }
    }
}

impl BernsteinWeakConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("C1", self.c1), ("C2", self.c2), ("C3", self.c3), ("C4", self.c4)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("Bernstein constant {name}={c} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("gamma={} must lie in (0, 1)", self.gamma)));
        }
        if let Some(v) = self.v {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("long-run variance V={v} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaddingConfig {
    pub alpha_u: f64,
    pub c_alpha: f64,
    /// Sub-exponential norm bounds `[M_0, M_1]`; default max |Y − μ̂_k|.
    pub m_k: Option<[f64; 2]>,
    pub c_abs: f64,
    pub bernstein: BernsteinWeakConstants,
    pub truncation: Truncation,
    pub mean_rule: MeanPaddingRule,
}

impl Default for PaddingConfig {
    fn default() -> Self {
        PaddingConfig {
            alpha_u: 0.05,
            c_alpha: 0.0,
            m_k: None,
            c_abs: 1.0,
            bernstein: BernsteinWeakConstants::default(),
            truncation: Truncation::None,
            mean_rule: MeanPaddingRule::Min,
        }
    }
}

impl PaddingConfig {
    pub fn with_alpha(alpha_u: f64) -> Self {
        PaddingConfig {
            alpha_u,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_u > 0.0 && self.alpha_u < 1.0) {
            return Err(invalid(format!("alpha_u {} must lie in (0, 1)", self.alpha_u)));
        }
        if !(self.c_alpha >= 0.0 && self.c_alpha.is_finite()) {
            return Err(invalid(format!("C_alpha {} must be >= 0", self.c_alpha)));
        }
        if !(self.c_abs > 0.0 && self.c_abs.is_finite()) {
            return Err(invalid(format!("c_abs {} must be positive", self.c_abs)));
        }
        if let Some(m) = self.m_k {
            if m.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("M_k must be finite and >= 0"));
            }
        }
        if let Truncation::BothKnown { lambda, upper } = self.truncation {
            if lambda > upper || lambda.is_nan() || upper.is_nan() {
                return Err(invalid(format!("truncation [{lambda}, {upper}] is not ordered")));
            }
        }
        self.bernstein.validate()
    }

    fn m_for(&self, arm: Arm, stats: &ArmStats) -> f64 {
        match self.m_k {
            Some(m) => match arm {
                Arm::Control => m[0],
                Arm::Treated => m[1],
            },
            None => stats.max_abs_deviation(),
        }
    }
}

/// One value per arm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerArm {
    pub control: f64,
    pub treated: f64,
}

impl PerArm {
    pub fn get(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.control,
            Arm::Treated => self.treated,
        }
    }

    fn build(mut f: impl FnMut(Arm) -> Result<f64>) -> Result<Self> {
        Ok(PerArm {
            control: f(Arm::Control)?,
            treated: f(Arm::Treated)?,
        })
    }
}

/// Envelope on the extrema (ε_k), share padding (t_{p,k}) and mean padding (t_{μ,k}).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Paddings {
    pub eps: PerArm,
    pub t_p: PerArm,
    pub t_mu: PerArm,
}

/// Log argument `budget/α_u`, halved for one-sided events.
fn log_budget(alpha_u: f64, budget: f64, sides: Sides) -> f64 {
    let b = match sides {
        Sides::Two => budget,
        Sides::One => budget / 2.0,
    };
    (b / alpha_u).ln()
}

/// DKW envelope. I.i.d.: √(log(b/α_u)/(2N_k)); mixing:
/// (1 + 4C_α)·√(2 log(b/α_u)/N_k), with `b` halved for one-sided use.
pub fn dkw_epsilon(
    alpha_u: f64,
    n_k: usize,
    sides: Sides,
    budget: f64,
    dependence: Dependence,
) -> f64 {
    let l = log_budget(alpha_u, budget, sides);
    let n = n_k as f64;
    match dependence {
        Dependence::Iid => (l / (2.0 * n)).sqrt(),
        Dependence::Mixing { .. } => dependence.prefactor() * (2.0 * l / n).sqrt(),
    }
}

/// Hoeffding padding for a treatment share at the 12/α_u budget.
pub fn hoeffding_tp(alpha_u: f64, n: usize, dependence: Dependence) -> f64 {
    dkw_epsilon(alpha_u, n, Sides::Two, 12.0, dependence)
}

/// The quadratic and linear regime thresholds of the i.i.d. Bernstein bound.
pub fn bernstein_iid_regimes(alpha_u: f64, n_k: usize, m_k: f64, c_abs: f64) -> (f64, f64) {
    let l = (12.0 / alpha_u).ln();
    let cn = c_abs * n_k as f64;
    (m_k * (l / cn).sqrt(), m_k * l / cn)
}

/// `min{M_k √(log(12/α_u)/(cN_k)), M_k log(12/α_u)/(cN_k)}`.
pub fn bernstein_tmu_iid(alpha_u: f64, n_k: usize, m_k: f64, c_abs: f64) -> f64 {
    let (q, l) = bernstein_iid_regimes(alpha_u, n_k, m_k, c_abs);
    q.min(l)
}

/// t⁽¹⁾ = (C1 log(18N_k/α_u))^{1/γ} / N_k.
pub fn bernstein_weak_t1(alpha_u: f64, n_k: usize, k: &BernsteinWeakConstants) -> f64 {
    let n = n_k as f64;
    (k.c1 * (18.0 * n / alpha_u).ln()).powf(1.0 / k.gamma) / n
}

/// t⁽²⁾ = √(C2 (1 + N_k V) log(18/α_u)) / N_k.
pub fn bernstein_weak_t2(alpha_u: f64, n_k: usize, k: &BernsteinWeakConstants, v: f64) -> f64 {
    let n = n_k as f64;
    (k.c2 * (1.0 + n * v) * (18.0 / alpha_u).ln()).sqrt() / n
}

/// t⁽³⁾: the root of
/// `(N t)²/(C3 N) · exp((N t)^{γ(1−γ)} / (C4 (log N t)^γ)) = log(18/α_u)`
/// on the branch where the left side increases in t.
///
/// In u = log(N t) the log of the left side is
/// `h(u) = 2u − log(C3 N) + e^{a u}/(C4 u^γ)`, a = γ(1−γ), which tends to
/// +∞ as u ↓ 0, has a single minimum, and increases afterwards. The root
/// is taken to the right of the minimum. When the minimum already clears
/// the target the term is below α_u/18 on all of t > 1/N, and 1/N is
/// returned.
pub fn bernstein_weak_t3(alpha_u: f64, n_k: usize, k: &BernsteinWeakConstants) -> Result<f64> {
    let n = n_k as f64;
    let g = k.gamma;
    let a = g * (1.0 - g);
    let target = (18.0 / alpha_u).ln().ln();
    let h = |u: f64| 2.0 * u - (k.c3 * n).ln() + (a * u).exp() / (k.c4 * u.powf(g));
    let dh = |u: f64| 2.0 + (a * u).exp() * (a - g / u) / (k.c4 * u.powf(g));

    // dh < 0 near 0 and dh > 0 for u ≥ γ/a.
    let (mut lo, mut hi) = (f64::MIN_POSITIVE.sqrt(), g / a);
    if dh(lo) >= 0.0 {
        return Err(Error::Config("t3: objective has no interior minimum".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dh(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let u_min = hi;
    if h(u_min) >= target {
        return Ok(1.0 / n);
    }
    let mut lo = u_min;
    let mut hi = u_min.max(1.0);
    let mut expansions = 0;
    while h(hi) < target {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 || !hi.is_finite() {
            return Err(Error::Config("t3: bracket expansion failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi.exp() / n)
}

/// `max{t⁽¹⁾, t⁽²⁾, t⁽³⁾}` for one arm.
pub fn bernstein_tmu_mixing(
    alpha_u: f64,
    n_k: usize,
    k: &BernsteinWeakConstants,
    v: f64,
) -> Result<f64> {
    k.validate()?;
    let t1 = bernstein_weak_t1(alpha_u, n_k, k);
    let t2 = bernstein_weak_t2(alpha_u, n_k, k, v);
    let t3 = bernstein_weak_t3(alpha_u, n_k, k)?;
    Ok(t1.max(t2).max(t3))
}

/// `γ₀ + 2 Σ_{j≤L} (1 − j/(L+1)) |γ_j|` with L = ⌈n^{1/3}⌉.
pub fn long_run_variance(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let autocov = |j: usize| -> f64 {
        series[j..]
            .iter()
            .zip(series)
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64
    };
    let lag = ((n as f64).cbrt().ceil() as usize).min(n - 1);
    let mut v = autocov(0);
    for j in 1..=lag {
        let w = 1.0 - j as f64 / (lag as f64 + 1.0);
        v += 2.0 * w * autocov(j).abs();
    }
    v
}

/// Range of `x·y` over `x ∈ [x⁻, x⁺]`, `y ∈ [y⁻, y⁺]`.
fn product_range((x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> (f64, f64) {
    let c = [x0 * y0, x0 * y1, x1 * y0, x1 * y1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// The padded interval: each term of the bound functionals is taken at its
/// least (lower end) or greatest (upper end) value over `μ̂_k ± t_{μ,k}`,
/// `p̂_k ± t_{p,k}`. With nonnegative means and supports this is
/// `[μ₁⁻p₁⁻ + L₁p₀⁻ − U₀p₁⁺ − μ₀⁺p₀⁺, μ₁⁺p₁⁺ + U₁p₀⁺ − L₀p₁⁻ − μ₀⁻p₀⁻]`.
/// `support` holds the already padded (or known) supports.
pub fn assemble_padded_region(
    stats: &GroupStats,
    pad: &Paddings,
    support: &SupportBounds,
) -> IdentificationRegion {
    let (m1, m0) = (stats.treated.mean, stats.control.mean);
    let (p1, p0) = (stats.share(Arm::Treated), stats.share(Arm::Control));
    let (tm1, tm0) = (pad.t_mu.treated, pad.t_mu.control);
    let (tp1, tp0) = (pad.t_p.treated, pad.t_p.control);
    let (c, t) = (support.control, support.treated);
    let mu1 = (m1 - tm1, m1 + tm1);
    let mu0 = (m0 - tm0, m0 + tm0);
    let sh1 = (p1 - tp1, p1 + tp1);
    let sh0 = (p0 - tp0, p0 + tp0);

    let treated = product_range(mu1, sh1);
    let control = product_range(mu0, sh0);
    let t_lo = product_range((t.lower, t.lower), sh0);
    let t_hi = product_range((t.upper, t.upper), sh0);
    let c_lo = product_range((c.lower, c.lower), sh1);
    let c_hi = product_range((c.upper, c.upper), sh1);
    IdentificationRegion {
        lower: treated.0 + t_lo.0 - c_hi.1 - control.1,
        upper: treated.1 + t_hi.1 - c_lo.0 - control.0,
    }
}

/// Extrema widened by ε_k, or pinned to λ on a known lower tail.
pub fn padded_support(stats: &GroupStats, eps: &PerArm, lower_known: Option<f64>) -> Result<SupportBounds> {
    let arm = |a: Arm| {
        let s = stats.arm(a);
        ArmSupport {
            lower: lower_known.unwrap_or(s.min - eps.get(a)),
            upper: s.max + eps.get(a),
        }
    };
    SupportBounds::new(arm(Arm::Control), arm(Arm::Treated), SupportSource::Padded)
}

pub(crate) fn check_truncation(stats: &GroupStats, trunc: Truncation) -> Result<()> {
    let lo = stats.control.min.min(stats.treated.min);
    let hi = stats.control.max.max(stats.treated.max);
    match trunc {
        Truncation::None => Ok(()),
        Truncation::LowerKnown { lambda } if lambda > lo => Err(Error::Data(format!(
            "known lower limit {lambda} exceeds observed outcome {lo}"
        ))),
        Truncation::BothKnown { lambda, upper } if lambda > lo || upper < hi => {
            Err(Error::Data(format!(
                "known support [{lambda}, {upper}] does not cover observed range [{lo}, {hi}]"
            )))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Padded means, shares and supports.
    Padded,
    /// Both tails known: the delta-method band at the known supports.
    KnownSupportDeltaMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaddedBand {
    pub band: IdentificationRegion,
    /// The same-sample plug-in region at extrema supports.
    pub plugin: IdentificationRegion,
    pub support: SupportBounds,
    pub paddings: Paddings,
    pub alpha_u: f64,
    pub construction: Construction,
}

fn known_support_band(
    stats: &GroupStats,
    cfg: &PaddingConfig,
    lambda: f64,
    upper: f64,
) -> Result<PaddedBand> {
    let support = SupportBounds::known(lambda, upper)?;
    let b = prop1_band(stats, &support, cfg.alpha_u)?;
    Ok(PaddedBand {
        band: IdentificationRegion {
            lower: b.band_lower,
            upper: b.band_upper,
        },
        plugin: manski_region(stats, &SupportBounds::extrema(stats)?)?,
        support,
        paddings: Paddings::default(),
        alpha_u: cfg.alpha_u,
        construction: Construction::KnownSupportDeltaMethod,
    })
}

fn prepare(stats: &GroupStats, cfg: &PaddingConfig) -> Result<()> {
    cfg.validate()?;
    stats.require_overlap()?;
    check_truncation(stats, cfg.truncation)
}

fn finish(stats: &GroupStats, cfg: &PaddingConfig, paddings: Paddings) -> Result<PaddedBand> {
    let lower_known = match cfg.truncation {
        Truncation::LowerKnown { lambda } => Some(lambda),
        _ => None,
    };
    let support = padded_support(stats, &paddings.eps, lower_known)?;
    Ok(PaddedBand {
        band: assemble_padded_region(stats, &paddings, &support),
        plugin: manski_region(stats, &SupportBounds::extrema(stats)?)?,
        support,
        paddings,
        alpha_u: cfg.alpha_u,
        construction: Construction::Padded,
    })
}

/// Paddings of the i.i.d. band.
pub fn iid_paddings(stats: &GroupStats, cfg: &PaddingConfig) -> Result<Paddings> {
    let a = cfg.alpha_u;
    let eps_sides = match cfg.truncation {
        Truncation::LowerKnown { .. } => Sides::One,
        _ => Sides::Two,
    };
    let tp = hoeffding_tp(a, stats.n_total(), Dependence::Iid);
    Ok(Paddings {
        eps: PerArm::build(|k| {
            Ok(dkw_epsilon(a, stats.arm(k).n, eps_sides, 12.0, Dependence::Iid))
        })?,
        t_p: PerArm {
            control: tp,
            treated: tp,
        },
        t_mu: PerArm::build(|k| {
            let s = stats.arm(k);
            let (q, l) = bernstein_iid_regimes(a, s.n, cfg.m_for(k, s), cfg.c_abs);
            Ok(match cfg.mean_rule {
                MeanPaddingRule::Min => q.min(l),
                MeanPaddingRule::Max => q.max(l),
            })
        })?,
    })
}

/// Paddings of the α-mixing band.
pub fn mixing_paddings(stats: &GroupStats, cfg: &PaddingConfig) -> Result<Paddings> {
    let a = cfg.alpha_u;
    let dep = Dependence::Mixing {
        c_alpha: cfg.c_alpha,
    };
    let t_p = PerArm::build(|k| Ok(hoeffding_tp(a, stats.arm(k).n, dep)))?;
    let eps = match cfg.truncation {
        Truncation::LowerKnown { .. } => {
            PerArm::build(|k| Ok(dkw_epsilon(a, stats.arm(k).n, Sides::One, 12.0, dep)))?
        }
        _ => t_p,
    };
    let t_mu = PerArm::build(|k| {
        let s = stats.arm(k);
        let v = cfg.bernstein.v.unwrap_or_else(|| long_run_variance(&s.series));
        bernstein_tmu_mixing(a, s.n, &cfg.bernstein, v)
    })?;
    Ok(Paddings { eps, t_p, t_mu })
}

/// Finite-sample band under i.i.d. sampling.
pub fn iid_band(stats: &GroupStats, cfg: &PaddingConfig) -> Result<PaddedBand> {
    prepare(stats, cfg)?;
    if let Truncation::BothKnown { lambda, upper } = cfg.truncation {
        return known_support_band(stats, cfg, lambda, upper);
    }
    let pad = iid_paddings(stats, cfg)?;
    finish(stats, cfg, pad)
}

/// Finite-sample band under α-mixing sampling.
pub fn mixing_band(stats: &GroupStats, cfg: &PaddingConfig) -> Result<PaddedBand> {
    prepare(stats, cfg)?;
    if let Truncation::BothKnown { lambda, upper } = cfg.truncation {
        return known_support_band(stats, cfg, lambda, upper);
    }
    let pad = mixing_paddings(stats, cfg)?;
    finish(stats, cfg, pad)
}
