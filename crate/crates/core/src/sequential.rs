//! Threshold-grid scans with equal alpha spending and tipping-point selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{compute_band, BandConfig, BandResult, Method};
use crate::error::{invalid, Error, Result};
use crate::estimators::group_stats;
use crate::panel::{assign_treatment, PanelDataset};

/// Strictly increasing thresholds inside (0, 100).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdGrid {
    taus: Vec<f64>,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid {
            taus: (1..=19).map(|i| 5.0 * i as f64).collect(),
        }
    }
}

impl ThresholdGrid {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(invalid("threshold grid is empty"));
        }
        if taus.iter().any(|t| !(*t > 0.0 && *t < 100.0)) {
            return Err(invalid("thresholds must lie strictly between 0 and 100"));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("thresholds must be strictly increasing"));
        }
        Ok(ThresholdGrid { taus })
    }

    /// Parses `start:stop:step`; both ends are included when the step divides
    /// the range.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(invalid(format!("grid '{spec}' is not of the form start:stop:step")));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("grid '{spec}': '{s}' is not a number")))
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        let ordered = step > 0.0 && stop >= start;
        if !ordered {
            return Err(invalid(format!("grid '{spec}' needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| start + step * i as f64).collect())
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Equal spending: every look gets α/|ℳ| and the last one absorbs the
/// floating-point residue so the schedule sums to α.
pub fn spend_alpha(alpha: f64, looks: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    if looks == 0 {
        return Err(invalid("alpha spending over zero looks"));
    }
    let each = alpha / looks as f64;
    let mut out = vec![each; looks];
    let head: f64 = out[..looks - 1].iter().sum();
    out[looks - 1] = alpha - head;
    Ok(out)
}

/// Checks a user-supplied per-look schedule against the family-wise `alpha`.
pub fn validate_schedule(alpha: f64, schedule: &[f64], looks: usize) -> Result<()> {
    if schedule.len() != looks {
        return Err(invalid(format!(
            "alpha schedule has {} entries for {looks} thresholds",
            schedule.len()
        )));
    }
    if schedule.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(invalid("every per-look alpha must lie in (0, 1)"));
    }
    let total: f64 = schedule.iter().sum();
    if total > alpha * (1.0 + 1e-12) {
        return Err(invalid(format!("alpha schedule sums to {total}, above alpha = {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub tau: f64,
    pub n0: usize,
    pub n1: usize,
    pub alpha_u: f64,
    pub band: Option<BandResult>,
    /// Reason the threshold was left out, if it was.
    pub skipped: Option<String>,
}

impl ScanRow {
    pub fn excludes_zero(&self) -> bool {
        self.band.is_some_and(|b| b.excludes_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub method: Method,
    pub alpha: f64,
    pub min_group: usize,
    pub rows: Vec<ScanRow>,
    pub tipping_tau: Option<f64>,
    pub direction: Direction,
}

impl ScanResult {
    pub fn tipping_row(&self) -> Option<&ScanRow> {
        let tau = self.tipping_tau?;
        self.rows.iter().find(|r| r.tau == tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub alpha: f64,
    pub min_group: usize,
    /// Per-look sizes; equal spending when absent.
    pub schedule: Option<Vec<f64>>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            alpha: 0.05,
            min_group: 10,
            schedule: None,
        }
    }
}

fn evaluate(panel: &PanelDataset, tau: f64, alpha_u: f64, cfg: &BandConfig, min_group: usize) -> Result<ScanRow> {
    let assignment = assign_treatment(panel, tau)?;
    let (n0, n1) = (assignment.n_control(), assignment.n_treated());
    let mut row = ScanRow {
        tau,
        n0,
        n1,
        alpha_u,
        band: None,
        skipped: None,
    };
    if n0.min(n1) < min_group {
        row.skipped = Some(format!("min(N0, N1) = {} < {min_group}", n0.min(n1)));
        return Ok(row);
    }
    let stats = group_stats(panel, &assignment)?;
    match compute_band(&stats, &cfg.with_alpha_u(alpha_u)) {
        Ok(b) => row.band = Some(b),
        Err(e @ (Error::NoOverlap(_) | Error::Degenerate(_))) => row.skipped = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Evaluates the band at every threshold and applies the inf-rule.
pub fn scan(
    panel: &PanelDataset,
    grid: &ThresholdGrid,
    cfg: &BandConfig,
    opts: &ScanOptions,
) -> Result<ScanResult> {
    if opts.min_group == 0 {
        return Err(invalid("min_group must be at least 1"));
    }
    let schedule = match &opts.schedule {
        Some(s) => {
            validate_schedule(opts.alpha, s, grid.len())?;
            s.clone()
        }
        None => spend_alpha(opts.alpha, grid.len())?,
    };
    cfg.padding.validate()?;

    let rows = grid
        .taus()
        .par_iter()
        .zip(schedule.par_iter())
        .map(|(&tau, &a)| evaluate(panel, tau, a, cfg, opts.min_group))
        .collect::<Result<Vec<_>>>()?;

    if rows.iter().all(|r| r.band.is_none()) {
        return Err(Error::EmptyScan(format!(
            "N/A: no threshold meets the minimum group size of {}",
            opts.min_group
        )));
    }
    let first = rows.iter().find(|r| r.excludes_zero());
    let direction = match first.and_then(|r| r.band) {
        Some(b) if b.band_lower > 0.0 => Direction::Positive,
        Some(_) => Direction::Negative,
        None => Direction::None,
    };
    Ok(ScanResult {
        method: cfg.method,
        alpha: opts.alpha,
        min_group: opts.min_group,
        tipping_tau: first.map(|r| r.tau),
        direction,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use crate::panel::{Observation, Schema};
    use proptest::prelude::*;

    #[test]
    fn default_grid() {
        let g = ThresholdGrid::parse("5:95:5").unwrap();
        assert_eq!(g, ThresholdGrid::default());
        assert_eq!(g.len(), 19);
        assert_eq!(ThresholdGrid::parse("10:30:7").unwrap().taus(), &[10.0, 17.0, 24.0]);
        assert!(ThresholdGrid::parse("0:50:5").is_err());
        assert!(ThresholdGrid::parse("5:95").is_err());
        assert!(ThresholdGrid::parse("5:95:0").is_err());
    }

    #[test]
    fn equal_spending() {
        let a = spend_alpha(0.05, 19).unwrap();
        assert!((a[0] - 0.0026316).abs() < 1e-7);
        assert!((a.iter().sum::<f64>() - 0.05).abs() <= 1e-15);
        assert!((normal::two_sided_critical(a[0]) - 3.0078).abs() < 1e-4);
        assert_eq!(spend_alpha(0.1, 1).unwrap(), vec![0.1]);
    }

    #[test]
    fn schedules_are_checked() {
        assert!(validate_schedule(0.05, &[0.01, 0.04], 2).is_ok());
        assert!(validate_schedule(0.05, &[0.02, 0.04], 2).is_err());
        assert!(validate_schedule(0.05, &[0.05], 2).is_err());
    }

    /// Panel where the outcome jumps by `effect` once the signal reaches `cut`.
    fn step_panel(n: usize, cut: f64, effect: f64) -> PanelDataset {
        let obs = (0..n)
            .map(|i| {
                let signal = 100.0 * (i as f64 + 0.5) / n as f64;
                let noise = ((i * 7919) % 13) as f64 / 13.0;
                Observation {
                    unit_id: format!("u{i}"),
                    group: None,
                    time: 0,
                    outcome: noise + if signal >= cut { effect } else { 0.0 },
                    signal,
                }
            })
            .collect();
        PanelDataset::new(obs, Schema::default()).unwrap()
    }

    #[test]
    fn skipping_and_empty_scan() {
        let panel = step_panel(100, 50.0, 0.0);
        let cfg = BandConfig::new(Method::Hybrid, 0.05);
        let opts = ScanOptions {
            min_group: 20,
            ..Default::default()
        };
        let r = scan(&panel, &ThresholdGrid::default(), &cfg, &opts).unwrap();
        for row in &r.rows {
            assert_eq!(row.skipped.is_some(), row.n0.min(row.n1) < 20, "tau {}", row.tau);
        }
        let opts = ScanOptions {
            min_group: 1000,
            ..Default::default()
        };
        assert!(matches!(
            scan(&panel, &ThresholdGrid::default(), &cfg, &opts),
            Err(Error::EmptyScan(_))
        ));
    }

    #[test]
    fn tipping_is_first_exclusion() {
        let panel = step_panel(4000, 50.0, 30.0);
        let cfg = BandConfig::new(Method::Naive, 0.05);
        let r = scan(&panel, &ThresholdGrid::default(), &cfg, &ScanOptions::default()).unwrap();
        let tip = r.tipping_tau.unwrap();
        assert_eq!(r.direction, Direction::Positive);
        let row = r.tipping_row().unwrap();
        assert!(row.skipped.is_none() && row.excludes_zero());
        for row in r.rows.iter().filter(|row| row.tau < tip) {
            assert!(!row.excludes_zero());
        }
    }

    #[test]
    fn negative_direction() {
        let panel = step_panel(4000, 10.0, -30.0);
        let cfg = BandConfig::new(Method::Naive, 0.05);
        let r = scan(&panel, &ThresholdGrid::default(), &cfg, &ScanOptions::default()).unwrap();
        assert_eq!(r.direction, Direction::Negative);
    }

    proptest! {
        #[test]
        fn spending_sums_exactly(alpha in 1e-4f64..0.5, looks in 1usize..200) {
            let a = spend_alpha(alpha, looks).unwrap();
            prop_assert!((a.iter().sum::<f64>() - alpha).abs() <= 1e-15);
            prop_assert!(a.iter().all(|x| *x > 0.0));
        }

        #[test]
        fn upper_tail_skipping_is_monotone(n in 30usize..300, min_group in 1usize..40) {
            let panel = step_panel(n, 50.0, 1.0);
            let cfg = BandConfig::new(Method::ManskiMax, 0.05);
            let opts = ScanOptions { min_group, ..Default::default() };
            if let Ok(r) = scan(&panel, &ThresholdGrid::default(), &cfg, &opts) {
                let mut seen = false;
                for row in &r.rows {
                    let upper_skip = row.n1 < min_group;
                    prop_assert!(!seen || upper_skip);
                    seen |= upper_skip;
                }
            }
        }
    }
}
