//! Per-arm sufficient statistics and the naive mean-comparison estimator.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::panel::{PanelDataset, TreatmentAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Treated,
}

/// Outcomes of one treatment arm.
///
/// `series` keeps panel order (unit, then time) for dependence-aware
/// quantities; `sorted` holds the order statistics. For an empty arm the
/// mean and extrema are NaN; for `n < 2` the variance is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub min: f64,
    pub max: f64,
    pub sorted: Vec<f64>,
    pub series: Vec<f64>,
}

impl ArmStats {
    pub fn from_series(series: Vec<f64>) -> Self {
        let n = series.len();
        let mut sorted = series.clone();
        sorted.sort_by(f64::total_cmp);
        if n == 0 {
            return ArmStats {
                n,
                mean: f64::NAN,
                var: 0.0,
                min: f64::NAN,
                max: f64::NAN,
                sorted,
                series,
            };
        }
        let mean = series.iter().sum::<f64>() / n as f64;
        let var = if n >= 2 {
            series.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        ArmStats {
            n,
            mean,
            var,
            min: sorted[0],
            max: sorted[n - 1],
            sorted,
            series,
        }
    }

    /// Largest absolute deviation from the arm mean.
    pub fn max_abs_deviation(&self) -> f64 {
        (self.max - self.mean).abs().max((self.mean - self.min).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub control: ArmStats,
    pub treated: ArmStats,
}

impl GroupStats {
    pub fn from_arms(treated: Vec<f64>, control: Vec<f64>) -> Self {
        GroupStats {
            control: ArmStats::from_series(control),
            treated: ArmStats::from_series(treated),
        }
    }

    pub fn arm(&self, arm: Arm) -> &ArmStats {
        match arm {
            Arm::Control => &self.control,
            Arm::Treated => &self.treated,
        }
    }

    pub fn n_total(&self) -> usize {
        self.control.n + self.treated.n
    }

    /// p̂_k = N_k / N.
    pub fn share(&self, arm: Arm) -> f64 {
        self.arm(arm).n as f64 / self.n_total() as f64
    }

    /// True when one arm is empty.
    pub fn is_degenerate(&self) -> bool {
        self.control.n == 0 || self.treated.n == 0
    }

    pub fn require_overlap(&self) -> Result<()> {
        self.require_arm_size(1)
    }

    /// Errors with [`Error::NoOverlap`] unless both arms hold `min` observations.
    pub fn require_arm_size(&self, min: usize) -> Result<()> {
        if self.control.n < min || self.treated.n < min {
            return Err(Error::NoOverlap(format!(
                "arm sizes N0={} N1={} (need at least {min} each)",
                self.control.n, self.treated.n
            )));
        }
        Ok(())
    }
}

pub fn group_stats(panel: &PanelDataset, assignment: &TreatmentAssignment) -> Result<GroupStats> {
    if panel.is_empty() {
        return Err(invalid("group statistics of an empty panel"));
    }
    if assignment.indicators.len() != panel.len() {
        return Err(invalid(format!(
            "assignment has {} indicators for {} observations",
            assignment.indicators.len(),
            panel.len()
        )));
    }
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (obs, &z) in panel.observations().iter().zip(&assignment.indicators) {
        if z {
            treated.push(obs.outcome);
        } else {
            control.push(obs.outcome);
        }
    }
    Ok(GroupStats::from_arms(treated, control))
}

/// Q̂(p) = Y_(⌈pN⌉), the left-continuous inverse of the empirical CDF.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile level {p} must lie in (0, 1)")));
    }
    if sorted.is_empty() {
        return Err(Error::NoOverlap("quantile of an empty arm".into()));
    }
    let n = sorted.len() as f64;
    // Absorb representation error in p·n (e.g. 0.95·20) before the ceiling.
    let rank = (p * n * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// σ̂² = (N−1)⁻¹ Σ (Y·w − δ̂)² with w = Z/N₁ − (1−Z)/N₀, as printed.
    Paper,
    /// var₁/N₁ + var₀/N₀.
    #[default]
    Welch,
}

impl std::str::FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(VarianceMode::Paper),
            "welch" => Ok(VarianceMode::Welch),
            other => Err(invalid(format!("unknown variance mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveEstimate {
    pub delta_hat: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha_u: f64,
    pub multiplier: f64,
}

/// Difference in arm means with a two-sided Wald interval at size `alpha_u`.
pub fn naive_estimate(
    stats: &GroupStats,
    alpha_u: f64,
    mode: VarianceMode,
) -> Result<NaiveEstimate> {
    if !(alpha_u > 0.0 && alpha_u < 1.0) {
        return Err(invalid(format!("alpha_u {alpha_u} must lie in (0, 1)")));
    }
    stats.require_overlap()?;
    let (t, c) = (&stats.treated, &stats.control);
    let delta_hat = t.mean - c.mean;
    let se = match mode {
        VarianceMode::Welch => {
            stats.require_arm_size(2)?;
            (t.var / t.n as f64 + c.var / c.n as f64).sqrt()
        }
        VarianceMode::Paper => {
            let n = stats.n_total();
            if n < 2 {
                return Err(Error::Degenerate("paper variance needs N >= 2".into()));
            }
            let (w1, w0) = (1.0 / t.n as f64, -1.0 / c.n as f64);
            let ss: f64 = t
                .series
                .iter()
                .map(|y| (y * w1 - delta_hat).powi(2))
                .chain(c.series.iter().map(|y| (y * w0 - delta_hat).powi(2)))
                .sum();
            (ss / (n - 1) as f64).sqrt()
        }
    };
    let multiplier = normal::two_sided_critical(alpha_u);
    Ok(NaiveEstimate {
        delta_hat,
        se,
        ci_lower: delta_hat - multiplier * se,
        ci_upper: delta_hat + multiplier * se,
        alpha_u,
        multiplier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_means_and_shares() {
        let s = GroupStats::from_arms(vec![2.0, 4.0], vec![1.0; 4]);
        assert_eq!(s.treated.mean, 3.0);
        assert_eq!(s.control.mean, 1.0);
        assert!((s.share(Arm::Treated) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.share(Arm::Treated) + s.share(Arm::Control), 1.0);
        assert!(!s.is_degenerate());
    }

    #[test]
    fn single_arm_is_degenerate() {
        let s = GroupStats::from_arms(vec![1.0, 2.0], vec![]);
        assert!(s.is_degenerate());
        assert!(matches!(s.require_overlap(), Err(Error::NoOverlap(_))));
        assert!(naive_estimate(&s, 0.05, VarianceMode::Welch).is_err());
    }

    #[test]
    fn two_point_variance_and_extrema() {
        let s = GroupStats::from_arms(vec![0.0, 10.0], vec![5.0]);
        assert_eq!((s.treated.min, s.treated.max), (0.0, 10.0));
        assert_eq!(s.treated.var, 50.0);
    }

    #[test]
    fn ceiling_rule_quantiles() {
        let y: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&y, 0.10).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&y, 0.95).unwrap(), 10.0);
        assert_eq!(empirical_quantile(&y, 0.90).unwrap(), 9.0);
        assert_eq!(empirical_quantile(&[7.5], 0.3).unwrap(), 7.5);
        assert!(empirical_quantile(&y, 0.0).is_err());
        assert!(empirical_quantile(&y, 1.0).is_err());
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn constant_arms_give_unit_effect() {
        let s = GroupStats::from_arms(vec![2.0, 2.0], vec![1.0, 1.0]);
        let est = naive_estimate(&s, 0.05, VarianceMode::Welch).unwrap();
        assert_eq!(est.delta_hat, 1.0);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn welch_se_plug_in() {
        // var 4 and var 1 with 100 observations per arm.
        let treated: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 4.0 }).collect();
        let control: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
        let s = GroupStats::from_arms(treated, control);
        // Sample variances with n−1: 4·100/99 and 1·100/99.
        let expected = ((4.0 + 1.0) * (100.0 / 99.0) / 100.0f64).sqrt();
        let est = naive_estimate(&s, 0.05, VarianceMode::Welch).unwrap();
        assert!((est.se - expected).abs() < 1e-12);
        assert!((0.05f64.sqrt() - 0.2236).abs() < 1e-4);
    }

    #[test]
    fn nineteen_look_multiplier() {
        let s = GroupStats::from_arms(vec![1.0, 2.0, 3.0], vec![0.0, 1.0]);
        let est = naive_estimate(&s, 0.05 / 19.0, VarianceMode::Welch).unwrap();
        assert!((est.multiplier - 3.007_786_556_473_26).abs() < 1e-9);
    }

    #[test]
    fn paper_variance_formula() {
        let s = GroupStats::from_arms(vec![1.0, 3.0], vec![0.0, 2.0, 4.0]);
        let est = naive_estimate(&s, 0.05, VarianceMode::Paper).unwrap();
        let d = 2.0 - 2.0;
        let terms = [0.5 - d, 1.5 - d, 0.0 - d, -2.0 / 3.0 - d, -4.0 / 3.0 - d];
        let expected = (terms.iter().map(|t| t * t).sum::<f64>() / 4.0).sqrt();
        assert!((est.se - expected).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn difference_equals_weighted_sum(
            treated in prop::collection::vec(-50.0f64..50.0, 1..30),
            control in prop::collection::vec(-50.0f64..50.0, 1..30),
        ) {
            let s = GroupStats::from_arms(treated.clone(), control.clone());
            let (n1, n0) = (treated.len() as f64, control.len() as f64);
            let weighted: f64 = treated.iter().map(|y| y / n1).sum::<f64>()
                - control.iter().map(|y| y / n0).sum::<f64>();
            prop_assert!((s.treated.mean - s.control.mean - weighted).abs() < 1e-9);
            prop_assert!(s.treated.min <= s.treated.mean + 1e-12);
            prop_assert!(s.treated.mean <= s.treated.max + 1e-12);
        }

        #[test]
        fn quantile_monotone_and_bracketed(
            ys in prop::collection::vec(-1e3f64..1e3, 1..40),
            p in 0.001f64..0.999, q in 0.001f64..0.999,
        ) {
            let arm = ArmStats::from_series(ys);
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            let a = empirical_quantile(&arm.sorted, lo).unwrap();
            let b = empirical_quantile(&arm.sorted, hi).unwrap();
            prop_assert!(a <= b);
            prop_assert!(arm.min <= a && b <= arm.max);
        }

        #[test]
        fn wald_interval_brackets_estimate(
            treated in prop::collection::vec(-5.0f64..5.0, 2..20),
            control in prop::collection::vec(-5.0f64..5.0, 2..20),
        ) {
            let s = GroupStats::from_arms(treated, control);
            for mode in [VarianceMode::Welch, VarianceMode::Paper] {
                let e = naive_estimate(&s, 0.05, mode).unwrap();
                prop_assert!(e.ci_lower <= e.delta_hat && e.delta_hat <= e.ci_upper);
            }
        }
    }
}
