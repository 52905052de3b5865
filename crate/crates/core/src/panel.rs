//! Firm-quarter panels: CSV ingestion with listwise deletion, threshold
//! treatment assignment, descriptive statistics and rolling correlations.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One firm-quarter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub unit_id: String,
    pub group: Option<String>,
    pub time: i64,
    pub outcome: f64,
    /// Diversity signal in percent, `[0, 100]`.
    pub signal: f64,
}

/// Column names used when reading a panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub unit_col: String,
    pub time_col: String,
    pub outcome_col: String,
    pub signal_col: String,
    pub group_col: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            unit_col: "unit_id".into(),
            time_col: "time".into(),
            outcome_col: "outcome".into(),
            signal_col: "signal".into(),
            group_col: None,
        }
    }
}

/// Long-format panel, sorted by `(unit_id, time)`.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    observations: Vec<Observation>,
    schema: Schema,
    dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.trim(),
        "" | "NA" | "na" | "N/A" | "NaN" | "nan" | "null" | "NULL" | "."
    )
}

fn check_signal(signal: f64) -> std::result::Result<(), String> {
    if signal.is_finite() && (0.0..=100.0).contains(&signal) {
        Ok(())
    } else {
        Err(format!("signal {signal} outside [0, 100]"))
    }
}

impl PanelDataset {
    /// Builds a dataset from already-clean observations.
    pub fn new(mut observations: Vec<Observation>, schema: Schema) -> Result<Self> {
        let mut seen = HashSet::with_capacity(observations.len());
        for obs in &observations {
            check_signal(obs.signal).map_err(Error::Data)?;
            if !obs.outcome.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite outcome for unit {} at time {}",
                    obs.unit_id, obs.time
                )));
            }
            if !seen.insert((obs.unit_id.as_str(), obs.time)) {
                return Err(Error::Data(format!(
                    "duplicate (unit, time) pair ({}, {})",
                    obs.unit_id, obs.time
                )));
            }
        }
        observations.sort_by(|a, b| a.unit_id.cmp(&b.unit_id).then(a.time.cmp(&b.time)));
        Ok(PanelDataset {
            observations,
            schema,
            dropped_rows: 0,
        })
    }

    /// Reads a headered UTF-8 CSV. Rows missing the outcome or the signal
    /// are dropped and counted in [`PanelDataset::dropped_rows`].
    pub fn from_reader<R: Read>(reader: R, schema: Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
        };
        let unit_ix = column(&schema.unit_col)?;
        let time_ix = column(&schema.time_col)?;
        let outcome_ix = column(&schema.outcome_col)?;
        let signal_ix = column(&schema.signal_col)?;
        let group_ix = schema.group_col.as_deref().map(column).transpose()?;

        let mut observations = Vec::new();
        let mut dropped = 0usize;
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let row_err = |message: String| Error::Row { line, message };
            let field = |ix: usize| record.get(ix).unwrap_or("");

            let outcome_raw = field(outcome_ix);
            let signal_raw = field(signal_ix);
            if is_missing(outcome_raw) || is_missing(signal_raw) {
                dropped += 1;
                continue;
            }
            let outcome: f64 = outcome_raw
                .parse()
                .map_err(|_| row_err(format!("unparseable outcome '{outcome_raw}'")))?;
            let signal: f64 = signal_raw
                .parse()
                .map_err(|_| row_err(format!("unparseable signal '{signal_raw}'")))?;
            check_signal(signal).map_err(row_err)?;
            if !outcome.is_finite() {
                return Err(row_err(format!("non-finite outcome '{outcome_raw}'")));
            }
            let unit_id = field(unit_ix);
            if is_missing(unit_id) {
                return Err(row_err("missing unit id".into()));
            }
            let time_raw = field(time_ix);
            let time: i64 = time_raw
                .parse()
                .map_err(|_| row_err(format!("unparseable time index '{time_raw}'")))?;
            if !seen.insert((unit_id.to_string(), time)) {
                return Err(row_err(format!(
                    "duplicate (unit, time) pair ({unit_id}, {time})"
                )));
            }
            let group = group_ix
                .map(field)
                .filter(|g| !is_missing(g))
                .map(str::to_string);
            observations.push(Observation {
                unit_id: unit_id.to_string(),
                group,
                time,
                outcome,
                signal,
            });
        }
        let mut panel = PanelDataset::new(observations, schema)?;
        panel.dropped_rows = dropped;
        Ok(panel)
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Rows removed by listwise deletion at ingestion.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.outcome).collect()
    }

    pub fn signals(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.signal).collect()
    }

    /// Distinct time indices in increasing order.
    pub fn time_indices(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.observations.iter().map(|o| o.time).collect();
        set.into_iter().collect()
    }

    /// Sub-panel restricted to one group label.
    pub fn filter_group(&self, label: &str) -> PanelDataset {
        PanelDataset {
            observations: self
                .observations
                .iter()
                .filter(|o| o.group.as_deref() == Some(label))
                .cloned()
                .collect(),
            schema: self.schema.clone(),
            dropped_rows: 0,
        }
    }
}

/// Reads a panel from disk; see [`PanelDataset::from_reader`].
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<PanelDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    PanelDataset::from_reader(std::io::BufReader::new(file), schema.clone())
}

/// Binary treatment `Z = 1{signal ≥ τ}` for every observation of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentAssignment {
    pub tau: f64,
    pub indicators: Vec<bool>,
}

impl TreatmentAssignment {
    pub fn n_treated(&self) -> usize {
        self.indicators.iter().filter(|&&z| z).count()
    }

    pub fn n_control(&self) -> usize {
        self.indicators.len() - self.n_treated()
    }
}

pub fn assign_treatment(panel: &PanelDataset, tau: f64) -> Result<TreatmentAssignment> {
    if !(tau > 0.0 && tau < 100.0) {
        return Err(invalid(format!("threshold {tau} must lie in (0, 100)")));
    }
    Ok(TreatmentAssignment {
        tau,
        indicators: panel
            .observations
            .iter()
            .map(|o| o.signal >= tau)
            .collect(),
    })
}

/// Moment-based descriptive statistics. `kurtosis` is excess kurtosis and
/// `skewness` the biased third standardized moment `m3 / m2^{3/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub sd: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(invalid("summary statistics of an empty sequence"));
    }
    let n = values.len();
    let nf = n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / nf;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let ss = m2;
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let sd = (n >= 2).then(|| (ss / (nf - 1.0)).sqrt());
    let shape_defined = n >= 3 && m2 > 0.0;
    Ok(SummaryStats {
        n,
        min: sorted[0],
        mean,
        median,
        max: sorted[n - 1],
        sd,
        skewness: shape_defined.then(|| m3 / m2.powf(1.5)),
        kurtosis: shape_defined.then(|| m4 / (m2 * m2) - 3.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Kendall,
}

impl std::str::FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(CorrelationKind::Pearson),
            "kendall" => Ok(CorrelationKind::Kendall),
            other => Err(invalid(format!("unknown correlation kind '{other}'"))),
        }
    }
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort that returns the number of inversions (strictly decreasing pairs).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid])
        + sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's τ-b in O(n log n) (Knight's algorithm). `None` when either
/// variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).take(n).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ties_x = tied_pairs(&xs);
    let mut ties_xy = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            ties_xy += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_xy += run * (run - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys);

    let denom = ((total - ties_x) as f64 * (total - ties_y) as f64).sqrt();
    if denom == 0.0 {
        return None;
    }
    let numer = total as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    Some((numer / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingPoint {
    /// Last time index covered by the window.
    pub end_time: i64,
    pub n: usize,
    pub value: Option<f64>,
}

/// Signal-outcome correlation over right-aligned windows of `window`
/// consecutive distinct time indices, pooling every firm-quarter inside the
/// window.
pub fn rolling_correlation(
    panel: &PanelDataset,
    window: usize,
    kind: CorrelationKind,
) -> Result<Vec<RollingPoint>> {
    if window < 3 {
        return Err(invalid(format!("rolling window {window} must be at least 3")));
    }
    let times = panel.time_indices();
    if times.len() < window {
        return Err(invalid(format!(
            "panel has {} distinct time indices, fewer than the window {window}",
            times.len()
        )));
    }
    let mut by_time: Vec<&Observation> = panel.observations.iter().collect();
    by_time.sort_by_key(|o| o.time);

    let mut out = Vec::with_capacity(times.len() - window + 1);
    for end in (window - 1)..times.len() {
        let (lo, hi) = (times[end + 1 - window], times[end]);
        let start = by_time.partition_point(|o| o.time < lo);
        let stop = by_time.partition_point(|o| o.time <= hi);
        let slice = &by_time[start..stop];
        let x: Vec<f64> = slice.iter().map(|o| o.signal).collect();
        let y: Vec<f64> = slice.iter().map(|o| o.outcome).collect();
        let value = match kind {
            CorrelationKind::Pearson => pearson(&x, &y),
            CorrelationKind::Kendall => kendall_tau_b(&x, &y),
        };
        out.push(RollingPoint {
            end_time: hi,
            n: slice.len(),
            value,
        });
    }
    Ok(out)
}
