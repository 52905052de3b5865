//! Config files and flag resolution.
//!
//! A config file may set any flag by its snake_case name. Values from the
//! file override values given on the command line; anything set in
//! neither place takes its built-in default.

use std::path::{Path, PathBuf};

use concate_core::concentration::BernsteinWeakConstants;
use concate_core::{BandConfig, Method, PaddingConfig, Schema, Truncation};
use serde::Deserialize;

use crate::args::{BandArgs, BoundsArgs, Cli, Command, DescribeArgs, InputArgs, ScanArgs, SimulateArgs};
use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,

    pub input: Option<PathBuf>,
    pub unit_col: Option<String>,
    pub time_col: Option<String>,
    pub outcome_col: Option<String>,
    pub signal_col: Option<String>,
    pub group_col: Option<String>,
    pub group: Option<String>,

    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub c_alpha: Option<f64>,
    pub truncation_lower: Option<f64>,
    pub truncation_upper: Option<f64>,
    pub mean_rule: Option<String>,
    pub m_bound: Option<[f64; 2]>,
    pub c_abs: Option<f64>,
    pub bernstein: Option<BernsteinWeakConstants>,
    pub long_run_var: Option<f64>,
    pub variance: Option<String>,

    pub tau: Option<f64>,
    pub grid: Option<String>,
    pub min_group: Option<usize>,
    pub schedule: Option<Vec<f64>>,

    pub window: Option<usize>,
    pub correlation: Option<String>,
    pub rolling: Option<PathBuf>,

    pub dgp: Option<String>,
    pub n: Option<usize>,
    #[serde(alias = "T")]
    pub t: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub delta: Option<f64>,
    pub manski_variant: Option<String>,
    pub coupling: Option<String>,
    pub ar_init: Option<String>,
    pub oracle_n: Option<usize>,

    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| CliError::ConfigFile {
            path: path.to_path_buf(),
            message,
        })
    }
}

fn put<T>(slot: &mut Option<T>, file: Option<T>) {
    if file.is_some() {
        *slot = file;
    }
}

fn overlay_input(a: &mut InputArgs, f: &mut FileConfig) {
    put(&mut a.input, f.input.take());
    put(&mut a.unit_col, f.unit_col.take());
    put(&mut a.time_col, f.time_col.take());
    put(&mut a.outcome_col, f.outcome_col.take());
    put(&mut a.signal_col, f.signal_col.take());
    put(&mut a.group_col, f.group_col.take());
    put(&mut a.group, f.group.take());
}

fn overlay_band(a: &mut BandArgs, f: &mut FileConfig) {
    put(&mut a.method, f.method.take());
    put(&mut a.alpha, f.alpha);
    put(&mut a.c_alpha, f.c_alpha);
    put(&mut a.truncation_lower, f.truncation_lower);
    put(&mut a.truncation_upper, f.truncation_upper);
    put(&mut a.mean_rule, f.mean_rule.take());
    put(&mut a.m_bound, f.m_bound.map(Vec::from));
    put(&mut a.c_abs, f.c_abs);
    if let Some(k) = f.bernstein {
        a.bernstein = Some(vec![k.c1, k.c2, k.c3, k.c4, k.gamma]);
        put(&mut a.long_run_var, k.v);
    }
    put(&mut a.long_run_var, f.long_run_var);
    put(&mut a.variance, f.variance.take());
}

/// Applies the config file named by `--config`, if any, to the parsed flags.
pub fn apply_file(cli: &mut Cli) -> Result<()> {
    let Some(path) = cli.config.clone() else {
        return Ok(());
    };
    let mut f = FileConfig::load(&path)?;
    put(&mut cli.threads, f.threads);
    put(&mut cli.seed, f.seed);
    match &mut cli.command {
        Command::Describe(a) => overlay_describe(a, &mut f),
        Command::Bounds(a) => overlay_bounds(a, &mut f),
        Command::Scan(a) => overlay_scan(a, &mut f),
        Command::Simulate(a) => overlay_simulate(a, &mut f),
    }
    Ok(())
}

fn overlay_describe(a: &mut DescribeArgs, f: &mut FileConfig) {
    overlay_input(&mut a.input, f);
    put(&mut a.out, f.out.take());
    put(&mut a.rolling, f.rolling.take());
    put(&mut a.window, f.window);
    put(&mut a.correlation, f.correlation.take());
}

fn overlay_bounds(a: &mut BoundsArgs, f: &mut FileConfig) {
    overlay_input(&mut a.input, f);
    overlay_band(&mut a.band, f);
    put(&mut a.tau, f.tau);
    put(&mut a.out, f.out.take());
}

fn overlay_scan(a: &mut ScanArgs, f: &mut FileConfig) {
    overlay_input(&mut a.input, f);
    overlay_band(&mut a.band, f);
    put(&mut a.grid, f.grid.take());
    put(&mut a.min_group, f.min_group);
    put(&mut a.schedule, f.schedule.take());
    put(&mut a.out, f.out.take());
    put(&mut a.json, f.json.take());
    put(&mut a.svg, f.svg.take());
}

fn overlay_simulate(a: &mut SimulateArgs, f: &mut FileConfig) {
    put(&mut a.dgp, f.dgp.take());
    put(&mut a.n, f.n);
    put(&mut a.t, f.t.take());
    put(&mut a.reps, f.reps);
    put(&mut a.alpha, f.alpha);
    put(&mut a.delta, f.delta);
    put(&mut a.manski_variant, f.manski_variant.take());
    put(&mut a.coupling, f.coupling.take());
    put(&mut a.ar_init, f.ar_init.take());
    put(&mut a.oracle_n, f.oracle_n);
    put(&mut a.out, f.out.take());
    put(&mut a.json, f.json.take());
}

pub fn parse_with<T: std::str::FromStr>(value: Option<&str>, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match value {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: T::Err| CliError::usage(e.to_string())),
    }
}

pub fn check_alpha(alpha: f64) -> Result<f64> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(CliError::usage(format!("--alpha {alpha} must lie in (0, 1)")))
    }
}

pub fn schema(a: &InputArgs) -> Schema {
    let d = Schema::default();
    Schema {
        unit_col: a.unit_col.clone().unwrap_or(d.unit_col),
        time_col: a.time_col.clone().unwrap_or(d.time_col),
        outcome_col: a.outcome_col.clone().unwrap_or(d.outcome_col),
        signal_col: a.signal_col.clone().unwrap_or(d.signal_col),
        group_col: a.group_col.clone().or(d.group_col),
    }
}

pub fn input_path(a: &InputArgs) -> Result<&Path> {
    a.input
        .as_deref()
        .ok_or_else(|| CliError::usage("an input panel is required (--input FILE)"))
}

/// Band settings from flags. `alpha` is the overall size; callers that
/// split it across looks overwrite `padding.alpha_u`.
pub fn band_config(a: &BandArgs) -> Result<BandConfig> {
    let method: Method = parse_with(a.method.as_deref(), Method::Hybrid)?;
    let alpha = check_alpha(a.alpha.unwrap_or(0.05))?;
    let truncation = match (a.truncation_lower, a.truncation_upper) {
        (None, None) => Truncation::None,
        (Some(lambda), None) => Truncation::LowerKnown { lambda },
        (Some(lambda), Some(upper)) => Truncation::BothKnown { lambda, upper },
        (None, Some(_)) => {
            return Err(CliError::usage(
                "--truncation-upper needs --truncation-lower; an upper bound alone is not supported",
            ))
        }
    };
    let mut bernstein = BernsteinWeakConstants::default();
    if let Some(k) = &a.bernstein {
        let [c1, c2, c3, c4, gamma] = k[..] else {
            return Err(CliError::usage("--bernstein takes five values: C1,C2,C3,C4,gamma"));
        };
        bernstein = BernsteinWeakConstants {
            c1,
            c2,
            c3,
            c4,
            gamma,
            v: None,
        };
    }
    bernstein.v = a.long_run_var;
    let m_k = match &a.m_bound {
        None => None,
        Some(v) => match v[..] {
            [m0, m1] => Some([m0, m1]),
            _ => return Err(CliError::usage("--m-bound takes two values: M_0,M_1")),
        },
    };
    let padding = PaddingConfig {
        alpha_u: alpha,
        c_alpha: a.c_alpha.unwrap_or(0.0),
        m_k,
        c_abs: a.c_abs.unwrap_or(1.0),
        bernstein,
        truncation,
        mean_rule: parse_with(a.mean_rule.as_deref(), Default::default())?,
    };
    padding.validate()?;
    Ok(BandConfig {
        method,
        padding,
        variance_mode: parse_with(a.variance.as_deref(), Default::default())?,
    })
}
