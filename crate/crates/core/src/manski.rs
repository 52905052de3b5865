//! Manski identification regions and the Bonferroni delta-method band.
//!
//! With θ = (δ₁, δ₀, p₁, p₀) the bound functionals are
//!
//! ```text
//! 𝓛(θ) = δ₁p₁ + L₁p₀ − U₀p₁ − δ₀p₀
//! 𝓤(θ) = δ₁p₁ + U₁p₀ − L₀p₁ − δ₀p₀
//! ```
//!
//! and their standard errors come from `∇ᵀ (Ω/N) ∇` with
//!
//! ```text
//! ∇𝓛 = (p₁, −p₀, δ₁ − U₀, L₁ − δ₀)
//! ∇𝓤 = (p₁, −p₀, δ₁ − L₀, U₁ − δ₀)
//! Ω  = diag(var₁/p̂₁, var₀/p̂₀, p̂₁p̂₀, p̂₁p̂₀) with Ω₃₄ = Ω₄₃ = −p̂₁p̂₀
//! ```
//!
//! The support constants enter the gradients as fixed numbers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{empirical_quantile, Arm, GroupStats};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportSource {
    EmpiricalExtrema,
    Quantile(f64),
    KnownConstant,
    Padded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSupport {
    pub lower: f64,
    pub upper: f64,
}

/// Bounding constants `[L⁽ᵏ⁾, U⁽ᵏ⁾]` for each arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBounds {
    pub control: ArmSupport,
    pub treated: ArmSupport,
    pub source: SupportSource,
}

impl SupportBounds {
    pub fn new(control: ArmSupport, treated: ArmSupport, source: SupportSource) -> Result<Self> {
        for (name, s) in [("control", control), ("treated", treated)] {
            if s.lower.is_nan() || s.upper.is_nan() || s.lower > s.upper {
                return Err(invalid(format!(
                    "{name} support [{}, {}] is not an ordered interval",
                    s.lower, s.upper
                )));
            }
        }
        Ok(SupportBounds {
            control,
            treated,
            source,
        })
    }

    /// The same known interval for both arms.
    pub fn known(lower: f64, upper: f64) -> Result<Self> {
        let s = ArmSupport { lower, upper };
        Self::new(s, s, SupportSource::KnownConstant)
    }

    /// Per-arm sample extrema `Y⁽ᵏ⁾₍₁₎, Y⁽ᵏ⁾₍N_k₎`.
    pub fn extrema(stats: &GroupStats) -> Result<Self> {
        stats.require_overlap()?;
        let arm = |a: Arm| ArmSupport {
            lower: stats.arm(a).min,
            upper: stats.arm(a).max,
        };
        Self::new(
            arm(Arm::Control),
            arm(Arm::Treated),
            SupportSource::EmpiricalExtrema,
        )
    }

    pub fn arm(&self, arm: Arm) -> ArmSupport {
        match arm {
            Arm::Control => self.control,
            Arm::Treated => self.treated,
        }
    }
}

/// Quantile-trimmed supports `L_k = Q̂⁽ᵏ⁾(p)`, `U_k = Q̂⁽ᵏ⁾(1 − p)`.
pub fn trimmed_support(stats: &GroupStats, p: f64) -> Result<SupportBounds> {
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid(format!("trimming level {p} must lie in (0, 0.5)")));
    }
    let arm = |a: Arm| -> Result<ArmSupport> {
        let sorted = &stats.arm(a).sorted;
        Ok(ArmSupport {
            lower: empirical_quantile(sorted, p)?,
            upper: empirical_quantile(sorted, 1.0 - p)?,
        })
    };
    SupportBounds::new(
        arm(Arm::Control)?,
        arm(Arm::Treated)?,
        SupportSource::Quantile(p),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationRegion {
    pub lower: f64,
    pub upper: f64,
}

impl IdentificationRegion {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// True when `other` lies inside `self`.
    pub fn encloses(&self, other: &IdentificationRegion) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// The parameter vector θ = (δ₁, δ₀, p₁, p₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub mean_treated: f64,
    pub mean_control: f64,
    pub share_treated: f64,
    pub share_control: f64,
}

impl Theta {
    pub fn from_stats(stats: &GroupStats) -> Self {
        Theta {
            mean_treated: stats.treated.mean,
            mean_control: stats.control.mean,
            share_treated: stats.share(Arm::Treated),
            share_control: stats.share(Arm::Control),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.mean_treated,
            self.mean_control,
            self.share_treated,
            self.share_control,
        ]
    }
}

/// (𝓛(θ), 𝓤(θ)) for arbitrary θ and supports.
pub fn bound_functionals(theta: &Theta, support: &SupportBounds) -> (f64, f64) {
    let Theta {
        mean_treated: d1,
        mean_control: d0,
        share_treated: p1,
        share_control: p0,
    } = *theta;
    let (c, t) = (support.control, support.treated);
    let lower = d1 * p1 + t.lower * p0 - c.upper * p1 - d0 * p0;
    let upper = d1 * p1 + t.upper * p0 - c.lower * p1 - d0 * p0;
    (lower, upper)
}

/// Analytic gradients (∇𝓛, ∇𝓤) with respect to θ.
pub fn bound_gradients(theta: &Theta, support: &SupportBounds) -> ([f64; 4], [f64; 4]) {
    let (c, t) = (support.control, support.treated);
    let (p1, p0) = (theta.share_treated, theta.share_control);
    let (d1, d0) = (theta.mean_treated, theta.mean_control);
    (
        [p1, -p0, d1 - c.upper, t.lower - d0],
        [p1, -p0, d1 - c.lower, t.upper - d0],
    )
}

pub fn manski_region(stats: &GroupStats, support: &SupportBounds) -> Result<IdentificationRegion> {
    if stats.is_degenerate() {
        return Err(Error::NoOverlap(format!(
            "identification region needs both arms (N0={}, N1={})",
            stats.control.n, stats.treated.n
        )));
    }
    let (lower, upper) = bound_functionals(&Theta::from_stats(stats), support);
    Ok(IdentificationRegion { lower, upper })
}

/// How the two share estimators enter Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShareCoupling {
    /// Off-diagonal −Var(p̂₁) between p̂₁ and p̂₀.
    #[default]
    Coupled,
    /// p̂₁ and p̂₀ treated as uncorrelated.
    Independent,
}

impl std::str::FromStr for ShareCoupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(ShareCoupling::Coupled),
            "independent" => Ok(ShareCoupling::Independent),
            other => Err(invalid(format!("unknown share coupling '{other}'"))),
        }
    }
}

/// Plug-in Ω for √N(θ̂ − θ).
pub fn omega(stats: &GroupStats, coupling: ShareCoupling) -> [[f64; 4]; 4] {
    let p1 = stats.share(Arm::Treated);
    let p0 = stats.share(Arm::Control);
    let vp = p1 * p0;
    let cov = match coupling {
        ShareCoupling::Coupled => -vp,
        ShareCoupling::Independent => 0.0,
    };
    [
        [stats.treated.var / p1, 0.0, 0.0, 0.0],
        [0.0, stats.control.var / p0, 0.0, 0.0],
        [0.0, 0.0, vp, cov],
        [0.0, 0.0, cov, vp],
    ]
}

/// √(∇ᵀ (Ω/N) ∇).
pub fn delta_method_se(grad: &[f64; 4], omega: &[[f64; 4]; 4], n: usize) -> f64 {
    let mut q = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            q += grad[i] * omega[i][j] * grad[j];
        }
    }
    (q.max(0.0) / n as f64).sqrt()
}

/// Standard errors of (𝓛(θ̂), 𝓤(θ̂)) at the given supports.
pub fn bound_standard_errors(
    stats: &GroupStats,
    support: &SupportBounds,
    coupling: ShareCoupling,
) -> Result<(f64, f64)> {
    let n = stats.n_total();
    if n == 0 {
        return Err(Error::Degenerate("delta method with N = 0".into()));
    }
    stats.require_arm_size(2)?;
    let om = omega(stats, coupling);
    let (gl, gu) = bound_gradients(&Theta::from_stats(stats), support);
    Ok((delta_method_se(&gl, &om, n), delta_method_se(&gu, &om, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaMethodBand {
    pub region: IdentificationRegion,
    pub se_lower: f64,
    pub se_upper: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    pub alpha_u: f64,
    pub multiplier: f64,
}

/// Region endpoints widened by `multiplier` standard errors.
pub fn delta_method_band(
    stats: &GroupStats,
    support: &SupportBounds,
    multiplier: f64,
    alpha_u: f64,
    coupling: ShareCoupling,
) -> Result<DeltaMethodBand> {
    let region = manski_region(stats, support)?;
    let (se_lower, se_upper) = bound_standard_errors(stats, support, coupling)?;
    Ok(DeltaMethodBand {
        region,
        se_lower,
        se_upper,
        band_lower: region.lower - multiplier * se_lower,
        band_upper: region.upper + multiplier * se_upper,
        alpha_u,
        multiplier,
    })
}

/// Two-sided Bonferroni band at size `alpha_u`: each endpoint moves by
/// Φ⁻¹(1 − α_u/2) standard errors.
pub fn prop1_band(
    stats: &GroupStats,
    support: &SupportBounds,
    alpha_u: f64,
) -> Result<DeltaMethodBand> {
    if !(alpha_u > 0.0 && alpha_u < 1.0) {
        return Err(invalid(format!("alpha_u {alpha_u} must lie in (0, 1)")));
    }
    delta_method_band(
        stats,
        support,
        normal::two_sided_critical(alpha_u),
        alpha_u,
        ShareCoupling::Coupled,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Stats with a prescribed mean per arm and a given treated share.
    fn stats_with(mean1: f64, mean0: f64, n1: usize, n0: usize) -> GroupStats {
        GroupStats::from_arms(vec![mean1; n1], vec![mean0; n0])
    }

    #[test]
    fn hand_arithmetic_region() {
        let s = stats_with(4.0, 0.0, 3, 7);
        let support = SupportBounds::known(-2.0, 6.0).unwrap();
        let r = manski_region(&s, &support).unwrap();
        assert!((r.lower - -2.0).abs() < 1e-12);
        assert!((r.upper - 6.0).abs() < 1e-12);
    }

    #[test]
    fn collapsed_support_collapses_region() {
        let s = stats_with(1.5, 1.5, 4, 6);
        let support = SupportBounds::known(1.5, 1.5).unwrap();
        let r = manski_region(&s, &support).unwrap();
        assert!(r.lower.abs() < 1e-12 && r.upper.abs() < 1e-12);
    }

    #[test]
    fn degenerate_arm_refused() {
        let s = GroupStats::from_arms(vec![1.0, 2.0], vec![]);
        let support = SupportBounds::known(0.0, 3.0).unwrap();
        assert!(matches!(
            manski_region(&s, &support),
            Err(Error::NoOverlap(_))
        ));
    }

    #[test]
    fn trimmed_supports_ceiling_rule() {
        let arm: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = GroupStats::from_arms(arm.clone(), arm);
        let t = trimmed_support(&s, 0.05).unwrap();
        assert_eq!((t.treated.lower, t.treated.upper), (1.0, 19.0));
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = GroupStats::from_arms(ten.clone(), ten);
        let t = trimmed_support(&s, 0.10).unwrap();
        assert_eq!((t.control.lower, t.control.upper), (1.0, 9.0));
        let flat = GroupStats::from_arms(vec![3.0; 5], vec![3.0; 5]);
        let t = trimmed_support(&flat, 0.2).unwrap();
        assert_eq!((t.treated.lower, t.treated.upper), (3.0, 3.0));
        assert!(trimmed_support(&flat, 0.5).is_err());
    }

    #[test]
    fn zero_variance_band_equals_region() {
        let s = stats_with(2.0, 1.0, 5, 5);
        let support = SupportBounds::known(1.0, 2.0).unwrap();
        // Zero outcome variance; share variance still enters unless the
        // share gradients cancel, which they do here: δ₁−U₀ = L₁−δ₀ = 1.
        let b = prop1_band(&s, &support, 0.05).unwrap();
        assert!(b.se_lower.abs() < 1e-12 && b.se_upper.abs() < 1e-12);
        assert_eq!(b.band_lower, b.region.lower);
        assert_eq!(b.band_upper, b.region.upper);
    }

    #[test]
    fn single_look_multiplier() {
        let s = GroupStats::from_arms(vec![1.0, 2.0, 4.0], vec![0.0, 0.5, 1.0]);
        let support = SupportBounds::extrema(&s).unwrap();
        let b = prop1_band(&s, &support, 0.05).unwrap();
        assert!((b.multiplier - 1.96).abs() < 0.001);
    }

    #[test]
    fn prop1_needs_two_per_arm() {
        let s = GroupStats::from_arms(vec![1.0], vec![0.0, 0.5, 1.0]);
        let support = SupportBounds::extrema(&s).unwrap();
        assert!(prop1_band(&s, &support, 0.05).is_err());
    }

    #[test]
    fn extrema_region_contains_mean_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n1 = rng.random_range(1..8);
            let n0 = rng.random_range(1..8);
            let t: Vec<f64> = (0..n1).map(|_| rng.random_range(-10.0..10.0)).collect();
            let c: Vec<f64> = (0..n0).map(|_| rng.random_range(-10.0..10.0)).collect();
            let s = GroupStats::from_arms(t, c);
            let r = manski_region(&s, &SupportBounds::extrema(&s).unwrap()).unwrap();
            let diff = s.treated.mean - s.control.mean;
            assert!(r.lower <= diff + 1e-9 && diff <= r.upper + 1e-9);
        }
    }

    fn arb_stats() -> impl Strategy<Value = GroupStats> {
        (
            prop::collection::vec(-20.0f64..20.0, 2..25),
            prop::collection::vec(-20.0f64..20.0, 2..25),
        )
            .prop_map(|(t, c)| GroupStats::from_arms(t, c))
    }

    proptest! {
        #[test]
        fn width_identity(s in arb_stats()) {
            let sup = SupportBounds::extrema(&s).unwrap();
            let r = manski_region(&s, &sup).unwrap();
            let expected = (sup.treated.upper - sup.treated.lower) * s.share(Arm::Control)
                + (sup.control.upper - sup.control.lower) * s.share(Arm::Treated);
            prop_assert!((r.width() - expected).abs() < 1e-9);
        }

        #[test]
        fn trimming_shrinks_region(s in arb_stats(), p in 0.01f64..0.49) {
            let raw = manski_region(&s, &SupportBounds::extrema(&s).unwrap()).unwrap();
            let trimmed = manski_region(&s, &trimmed_support(&s, p).unwrap()).unwrap();
            prop_assert!(raw.encloses(&trimmed) || (raw.lower - trimmed.lower).abs() < 1e-9);
            prop_assert!(trimmed.lower >= raw.lower - 1e-9 && trimmed.upper <= raw.upper + 1e-9);
        }

        #[test]
        fn band_covers_region_and_ignores_order(s in arb_stats(), seed in 0u64..1000) {
            let sup = SupportBounds::extrema(&s).unwrap();
            let b = prop1_band(&s, &sup, 0.01).unwrap();
            prop_assert!(b.band_lower <= b.region.lower && b.region.lower <= b.region.upper);
            prop_assert!(b.region.upper <= b.band_upper);

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = s.treated.series.clone();
            let mut c = s.control.series.clone();
            for v in [&mut t, &mut c] {
                for i in (1..v.len()).rev() {
                    v.swap(i, rng.random_range(0..=i));
                }
            }
            let shuffled = GroupStats::from_arms(t, c);
            let b2 = prop1_band(&shuffled, &sup, 0.01).unwrap();
            prop_assert!((b.band_lower - b2.band_lower).abs() < 1e-9);
            prop_assert!((b.band_upper - b2.band_upper).abs() < 1e-9);
        }
    }
}
