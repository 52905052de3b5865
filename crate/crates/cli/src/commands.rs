use std::fmt::Write;

use concate_core::concentration::{iid_paddings, mixing_paddings, Paddings, PerArm};
use concate_core::montecarlo::{coverage_table, oracle_support, ArInit};
use concate_core::panel::{rolling_correlation, summary_stats, CorrelationKind, SummaryStats};
use concate_core::{
    assign_treatment, compute_band, group_stats, hybrid_band, load_csv, scan, BandConfig, BandResult, CoverageCell,
    DgpId, DgpParams, Error, Method, PanelDataset, ScanOptions, ScanResult, Schema, ShareCoupling, SimOptions,
    ThresholdGrid,
};
use serde::Serialize;

use crate::args::{BoundsArgs, DescribeArgs, InputArgs, ScanArgs, SimulateArgs};
use crate::config::{band_config, check_alpha, input_path, parse_with, schema};
use crate::error::{CliError, Result};
use crate::output::{opt, write_csv, write_file, write_json, Metadata};
use crate::svg::band_chart;

#[derive(Debug, Serialize)]
struct InputSettings {
    schema: Schema,
    group: Option<String>,
}

fn load_panel(a: &InputArgs) -> Result<(PanelDataset, InputSettings)> {
    let path = input_path(a)?;
    let schema = schema(a);
    let mut panel = load_csv(path, &schema)?;
    if let Some(label) = &a.group {
        panel = panel.filter_group(label);
    }
    if panel.is_empty() {
        return Err(Error::Data(format!("{}: no complete observations", path.display())).into());
    }
    Ok((
        panel,
        InputSettings {
            schema,
            group: a.group.clone(),
        },
    ))
}

pub fn describe(a: &DescribeArgs, seed: Option<u64>) -> Result<String> {
    let (panel, input) = load_panel(&a.input)?;
    let periods = panel.time_indices().len();
    let window = a.window.unwrap_or(periods / 2);
    let kind: CorrelationKind = parse_with(a.correlation.as_deref(), CorrelationKind::Pearson)?;

    let rows = [
        ("outcome", summary_stats(&panel.outcomes())?),
        ("signal", summary_stats(&panel.signals())?),
    ];
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} observations, {} periods, {} rows dropped",
        panel.len(),
        periods,
        panel.dropped_rows()
    );
    let _ = writeln!(
        text,
        "{:<10}{:>8}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}",
        "variable", "N", "min", "mean", "median", "max", "sd", "skew", "kurt"
    );
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
    for (name, s) in &rows {
        let _ = writeln!(
            text,
            "{:<10}{:>8}{:>11.3}{:>11.3}{:>11.3}{:>11.3}{:>11}{:>11}{:>11}",
            name,
            s.n,
            s.min,
            s.mean,
            s.median,
            s.max,
            f(s.sd),
            f(s.skewness),
            f(s.kurtosis)
        );
    }

    if let Some(out) = &a.out {
        if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            #[derive(Serialize)]
            struct Row<'a> {
                variable: &'a str,
                #[serde(flatten)]
                stats: &'a SummaryStats,
            }
            #[derive(Serialize)]
            struct Report<'a> {
                metadata: Metadata,
                rows: Vec<Row<'a>>,
            }
            let report = Report {
                metadata: Metadata::new("describe", seed, &input)?,
                rows: rows.iter().map(|(variable, stats)| Row { variable, stats }).collect(),
            };
            write_json(out, &report)?;
        } else {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|(name, s)| {
                    vec![
                        name.to_string(),
                        s.n.to_string(),
                        s.min.to_string(),
                        s.mean.to_string(),
                        s.median.to_string(),
                        s.max.to_string(),
                        opt(s.sd),
                        opt(s.skewness),
                        opt(s.kurtosis),
                    ]
                })
                .collect();
            write_csv(
                out,
                &["variable", "n", "min", "mean", "median", "max", "sd", "skewness", "kurtosis"],
                &body,
            )?;
        }
    }

    if let Some(path) = &a.rolling {
        let points = rolling_correlation(&panel, window, kind)?;
        let body: Vec<Vec<String>> = points
            .iter()
            .map(|p| vec![p.end_time.to_string(), p.n.to_string(), opt(p.value)])
            .collect();
        write_csv(path, &["end_time", "n", "correlation"], &body)?;
        let _ = writeln!(text, "rolling {kind:?} correlation over {window} periods: {} windows", points.len());
    }
    Ok(text)
}

#[derive(Debug, Serialize)]
struct BoundsSettings<'a> {
    input: &'a InputSettings,
    band: &'a BandConfig,
    tau: f64,
}

#[derive(Debug, Serialize)]
struct BoundsReport<'a> {
    metadata: Metadata,
    tau: f64,
    band: &'a BandResult,
    /// DKW envelopes of the hybrid band.
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<PerArm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paddings: Option<Paddings>,
}

pub fn bounds(a: &BoundsArgs, seed: Option<u64>) -> Result<String> {
    let cfg = band_config(&a.band)?;
    let tau = a.tau.ok_or_else(|| CliError::usage("bounds needs a threshold (--tau)"))?;
    let (panel, input) = load_panel(&a.input)?;
    let assignment = assign_treatment(&panel, tau)?;
    let stats = group_stats(&panel, &assignment)?;
    let band = compute_band(&stats, &cfg)?;

    let (mut eps, mut paddings) = (None, None);
    match cfg.method {
        Method::Hybrid => {
            eps = Some(hybrid_band(&stats, cfg.alpha_u(), cfg.padding.c_alpha, cfg.padding.truncation)?.eps);
        }
        Method::Iid => paddings = Some(iid_paddings(&stats, &cfg.padding)?),
        Method::Mixing => paddings = Some(mixing_paddings(&stats, &cfg.padding)?),
        _ => {}
    }

    let mut text = String::new();
    let _ = writeln!(text, "threshold    {tau}%");
    let _ = writeln!(text, "method       {}", cfg.method);
    let _ = writeln!(text, "N0, N1       {}, {}", band.n0, band.n1);
    let _ = writeln!(text, "alpha_u      {}", band.alpha_u);
    let _ = writeln!(text, "region       [{:.4}, {:.4}]", band.region.lower, band.region.upper);
    let _ = writeln!(text, "band         [{:.4}, {:.4}]", band.band_lower, band.band_upper);
    if let (Some(l), Some(u)) = (band.se_lower, band.se_upper) {
        let _ = writeln!(text, "se           {l:.4}, {u:.4}");
    }
    if let Some(m) = band.multiplier {
        let _ = writeln!(text, "multiplier   {m:.4}");
    }
    if let Some(e) = eps {
        let _ = writeln!(text, "eps          {:.4}, {:.4}", e.control, e.treated);
    }
    let _ = writeln!(text, "excludes 0   {}", band.excludes_zero());

    if let Some(out) = &a.out {
        let settings = BoundsSettings {
            input: &input,
            band: &cfg,
            tau,
        };
        let report = BoundsReport {
            metadata: Metadata::new("bounds", seed, &settings)?,
            tau,
            band: &band,
            eps,
            paddings,
        };
        write_json(out, &report)?;
    }
    Ok(text)
}

#[derive(Debug, Serialize)]
struct ScanSettings<'a> {
    input: &'a InputSettings,
    band: &'a BandConfig,
    taus: &'a [f64],
    min_group: usize,
    schedule: &'a Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ScanSummary<'a> {
    metadata: Metadata,
    #[serde(flatten)]
    result: &'a ScanResult,
    looks: usize,
    skipped_taus: Vec<f64>,
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| x.to_string())
}

pub fn scan_rows(result: &ScanResult) -> Vec<Vec<String>> {
    result
        .rows
        .iter()
        .map(|r| {
            let b = r.band.as_ref();
            vec![
                r.tau.to_string(),
                r.n0.to_string(),
                r.n1.to_string(),
                r.alpha_u.to_string(),
                na(b.map(|b| b.region.lower)),
                na(b.map(|b| b.region.upper)),
                na(b.map(|b| b.band_lower)),
                na(b.map(|b| b.band_upper)),
                b.map_or_else(|| "N/A".to_string(), |b| b.excludes_zero().to_string()),
                r.skipped.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

pub const SCAN_HEADER: [&str; 10] = [
    "tau",
    "N0",
    "N1",
    "alpha_u",
    "lower",
    "upper",
    "band_lower",
    "band_upper",
    "excludes_zero",
    "skipped",
];

pub fn scan_cmd(a: &ScanArgs, seed: Option<u64>) -> Result<String> {
    let cfg = band_config(&a.band)?;
    let grid = match &a.grid {
        Some(g) => ThresholdGrid::parse(g)?,
        None => ThresholdGrid::default(),
    };
    let opts = ScanOptions {
        alpha: cfg.alpha_u(),
        min_group: a.min_group.unwrap_or(10),
        schedule: a.schedule.clone(),
    };
    let (panel, input) = load_panel(&a.input)?;
    let result = scan(&panel, &grid, &cfg, &opts)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} band, alpha = {}, {} looks, min group {}",
        result.method,
        result.alpha,
        grid.len(),
        result.min_group
    );
    let _ = writeln!(text, "{:>6}{:>8}{:>8}{:>12}{:>12}  excludes 0", "tau", "N0", "N1", "lower", "upper");
    for r in &result.rows {
        match &r.band {
            Some(b) => {
                let _ = writeln!(
                    text,
                    "{:>6}{:>8}{:>8}{:>12.4}{:>12.4}  {}",
                    r.tau,
                    r.n0,
                    r.n1,
                    b.band_lower,
                    b.band_upper,
                    if b.excludes_zero() { "yes" } else { "no" }
                );
            }
            None => {
                let _ = writeln!(
                    text,
                    "{:>6}{:>8}{:>8}{:>12}{:>12}  {}",
                    r.tau,
                    r.n0,
                    r.n1,
                    "N/A",
                    "N/A",
                    r.skipped.as_deref().unwrap_or("")
                );
            }
        }
    }
    match result.tipping_tau {
        Some(t) => {
            let _ = writeln!(text, "tipping point: {t}% ({:?})", result.direction);
        }
        None => {
            let _ = writeln!(text, "tipping point: N/A");
        }
    }

    if let Some(out) = &a.out {
        write_csv(out, &SCAN_HEADER, &scan_rows(&result))?;
    }
    if let Some(path) = &a.json {
        let settings = ScanSettings {
            input: &input,
            band: &cfg,
            taus: grid.taus(),
            min_group: opts.min_group,
            schedule: &opts.schedule,
        };
        let summary = ScanSummary {
            metadata: Metadata::new("scan", seed, &settings)?,
            result: &result,
            looks: grid.len(),
            skipped_taus: result.rows.iter().filter(|r| r.skipped.is_some()).map(|r| r.tau).collect(),
        };
        write_json(path, &summary)?;
    }
    if let Some(path) = &a.svg {
        write_file(path, band_chart(&result))?;
    }
    Ok(text)
}

fn parse_designs(s: Option<&str>) -> Result<Vec<DgpId>> {
    match s.map(str::trim) {
        None => Ok(DgpId::ALL.to_vec()),
        Some(s) if s.eq_ignore_ascii_case("all") => Ok(DgpId::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|p| p.trim().parse::<DgpId>().map_err(CliError::from))
            .collect(),
    }
}

fn parse_ar_init(s: Option<&str>) -> Result<ArInit> {
    match s {
        None | Some("standard_normal") => Ok(ArInit::StandardNormal),
        Some("stationary") => Ok(ArInit::Stationary),
        Some(other) => Err(CliError::usage(format!(
            "unknown AR(1) start '{other}' (standard_normal|stationary)"
        ))),
    }
}

#[derive(Debug, Serialize)]
struct SimSettings<'a> {
    designs: &'a [DgpId],
    n: usize,
    t: &'a [usize],
    params: &'a DgpParams,
    options: &'a SimOptions,
}

#[derive(Debug, Serialize)]
struct OracleSupport {
    dgp: DgpId,
    n_big: usize,
    a: f64,
    b: f64,
}

#[derive(Debug, Serialize)]
struct SimReport<'a> {
    metadata: Metadata,
    params: &'a DgpParams,
    options: &'a SimOptions,
    oracle_support: Vec<OracleSupport>,
    cells: &'a [CoverageCell],
}

pub fn simulate(a: &SimulateArgs, seed: Option<u64>) -> Result<String> {
    let designs = parse_designs(a.dgp.as_deref())?;
    let n = a.n.unwrap_or(50);
    let ts = a.t.clone().unwrap_or_else(|| vec![1, 2, 5]);
    if ts.is_empty() || ts.contains(&0) || n == 0 {
        return Err(CliError::usage("--n and every --T must be positive"));
    }
    let params = DgpParams {
        delta: a.delta.unwrap_or(4.0),
        ar_init: parse_ar_init(a.ar_init.as_deref())?,
        ..DgpParams::default()
    };
    let defaults = SimOptions::default();
    let opts = SimOptions {
        alpha: check_alpha(a.alpha.unwrap_or(defaults.alpha))?,
        reps: a.reps.unwrap_or(defaults.reps),
        base_seed: seed.unwrap_or(defaults.base_seed),
        manski_variant: parse_with(a.manski_variant.as_deref(), defaults.manski_variant)?,
        coupling: parse_with(a.coupling.as_deref(), ShareCoupling::Independent)?,
    };
    let cells = coverage_table(&designs, n, &ts, &params, &opts)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "coverage (%) of Delta = {}, B = {}, alpha = {}, seed = {}",
        params.delta, opts.reps, opts.alpha, opts.base_seed
    );
    let _ = writeln!(text, "{:<5}{:>8}{:>10}{:>10}{:>10}", "DGP", "N", "Manski", "Hybrid", "redraws");
    for pair in cells.chunks(2) {
        let _ = writeln!(
            text,
            "{:<5}{:>8}{:>10.2}{:>10.2}{:>10}",
            pair[0].dgp.letter(),
            pair[0].n_obs,
            pair[0].coverage_pct(),
            pair[1].coverage_pct(),
            pair[0].redraws
        );
    }

    if let Some(out) = &a.out {
        let body: Vec<Vec<String>> = cells
            .iter()
            .map(|c| {
                vec![
                    c.dgp.letter().to_string(),
                    c.n_obs.to_string(),
                    c.method.name().to_string(),
                    format!("{:.2}", c.coverage_pct()),
                    c.reps.to_string(),
                    c.seed.to_string(),
                    c.redraws.to_string(),
                ]
            })
            .collect();
        write_csv(out, &["dgp", "N", "method", "coverage_pct", "B", "seed", "redraws"], &body)?;
    }
    if let Some(path) = &a.json {
        let n_big = a.oracle_n.unwrap_or(1_000_000);
        let oracle = designs
            .iter()
            .map(|&id| {
                let (lo, hi) = oracle_support(id, &params, n_big, opts.base_seed);
                OracleSupport {
                    dgp: id,
                    n_big,
                    a: lo,
                    b: hi,
                }
            })
            .collect();
        let settings = SimSettings {
            designs: &designs,
            n,
            t: &ts,
            params: &params,
            options: &opts,
        };
        let report = SimReport {
            metadata: Metadata::new("simulate", Some(opts.base_seed), &settings)?,
            params: &params,
            options: &opts,
            oracle_support: oracle,
            cells: &cells,
        };
        write_json(path, &report)?;
    }
    Ok(text)
}
