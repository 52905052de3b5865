//! Simulation designs and the single-threshold coverage harness.
//!
//! Every replication owns a ChaCha8 stream seeded from
//! `stable_hash(base_seed, design, n, T, replication, attempt)`, so tables
//! are identical whatever the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::GroupStats;
use crate::hybrid::{algorithm1_bands, widen, Algorithm1Bands, SupportRule};
use crate::manski::{IdentificationRegion, ShareCoupling};
use crate::normal;

/// Identity of the generator behind every simulated draw.
pub const RNG_IDENTITY: &str = "rand_chacha::ChaCha8Rng seeded via splitmix64 stream hash";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpId {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl DgpId {
    pub const ALL: [DgpId; 7] = [
        DgpId::A,
        DgpId::B,
        DgpId::C,
        DgpId::D,
        DgpId::E,
        DgpId::F,
        DgpId::G,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            DgpId::A => "A",
            DgpId::B => "B",
            DgpId::C => "C",
            DgpId::D => "D",
            DgpId::E => "E",
            DgpId::F => "F",
            DgpId::G => "G",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            DgpId::A => "i.i.d. standard normal",
            DgpId::B => "heavy tail t3/sqrt(3)",
            DgpId::C => "AR(1) panel, negative selection",
            DgpId::D => "AR(1) panel, positive selection",
            DgpId::E => "rare extreme point mass",
            DgpId::F => "left-truncated chi-square(3)",
            DgpId::G => "uniform on known support",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }

    /// How Algorithm 1 picks the supports for this design.
    pub fn support_rule(self) -> SupportRule {
        match self {
            DgpId::F => SupportRule::KnownLower { lower: 0.0 },
            DgpId::G => SupportRule::Known {
                lower: -5.0,
                upper: 5.0,
            },
            _ => SupportRule::EmpiricalExtrema,
        }
    }
}

impl std::fmt::Display for DgpId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.letter())
    }
}

impl std::str::FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpId::ALL
            .into_iter()
            .find(|d| d.letter().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown design '{s}' (expected A..G)")))
    }
}

/// First-period law of the AR(1) designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArInit {
    /// Y⁰ᵢ₁ ~ N(0, 1).
    #[default]
    StandardNormal,
    /// Y⁰ᵢ₁ ~ N(0, 1/(1 − ρ²)).
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpParams {
    pub delta: f64,
    pub p_treat: f64,
    pub rho: f64,
    pub selection: f64,
    pub eta_sd: f64,
    pub ar_init: ArInit,
    pub extreme_prob: f64,
    pub extreme_value: f64,
    pub chi_df: f64,
    pub uniform: (f64, f64),
}

impl Default for DgpParams {
    fn default() -> Self {
        DgpParams {
            delta: 4.0,
            p_treat: 0.3,
            rho: 0.4,
            selection: 0.5,
            eta_sd: 0.5,
            ar_init: ArInit::default(),
            extreme_prob: 0.002,
            extreme_value: 10.0,
            chi_df: 3.0,
            uniform: (-5.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: DgpId,
    /// Firms.
    pub n: usize,
    /// Periods.
    pub t: usize,
    pub params: DgpParams,
}

impl DgpSpec {
    pub fn new(id: DgpId, n: usize, t: usize) -> Self {
        DgpSpec {
            id,
            n,
            t,
            params: DgpParams::default(),
        }
    }

    pub fn n_obs(&self) -> usize {
        self.n * self.t
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.t < 1 {
            return Err(invalid(format!("design needs n >= 2 and T >= 1 (got n={}, T={})", self.n, self.t)));
        }
        let p = &self.params;
        if !(p.p_treat > 0.0 && p.p_treat < 1.0) {
            return Err(invalid("treatment probability must lie in (0, 1)"));
        }
        if !(p.eta_sd >= 0.0 && p.chi_df > 0.0 && p.uniform.0 < p.uniform.1) {
            return Err(invalid("invalid design constants"));
        }
        if !(0.0..=0.5).contains(&p.extreme_prob) {
            return Err(invalid("extreme-value probability must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

/// One simulated panel, stored firm-major (firm i, period t at `i*T + t`).
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub y0: Vec<f64>,
    pub d: Vec<bool>,
    pub y: Vec<f64>,
}

impl Draw {
    pub fn group_stats(&self) -> GroupStats {
        let mut treated = Vec::new();
        let mut control = Vec::new();
        for (&y, &z) in self.y.iter().zip(&self.d) {
            if z {
                treated.push(y);
            } else {
                control.push(y);
            }
        }
        GroupStats::from_arms(treated, control)
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&z| z).count()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws baseline outcomes and treatment for one replication.
pub fn generate<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Draw {
    let p = &spec.params;
    let n_obs = spec.n_obs();
    let mut y0 = Vec::with_capacity(n_obs);
    let mut d = Vec::with_capacity(n_obs);
    let bern = |rng: &mut R| rng.random::<f64>() < p.p_treat;
    match spec.id {
        DgpId::A => {
            for _ in 0..n_obs {
                y0.push(rng.sample::<f64, _>(StandardNormal));
                d.push(bern(rng));
            }
        }
        DgpId::B => {
            let t3 = StudentT::new(3.0).expect("3 degrees of freedom");
            for _ in 0..n_obs {
                y0.push(t3.sample(rng) / 3f64.sqrt());
                d.push(bern(rng));
            }
        }
        DgpId::C | DgpId::D => {
            let s = if spec.id == DgpId::C { -p.selection } else { p.selection };
            let eta = Normal::new(0.0, p.eta_sd).expect("finite sd");
            let init_sd = match p.ar_init {
                ArInit::StandardNormal => 1.0,
                ArInit::Stationary => (1.0 - p.rho * p.rho).sqrt().recip(),
            };
            for _ in 0..spec.n {
                let mut prev = init_sd * rng.sample::<f64, _>(StandardNormal);
                for t in 0..spec.t {
                    if t > 0 {
                        prev = p.rho * prev + rng.sample::<f64, _>(StandardNormal);
                    }
                    y0.push(prev);
                    let prob = logistic(s * prev + eta.sample(rng));
                    d.push(rng.random::<f64>() < prob);
                }
            }
        }
        DgpId::E => {
            for _ in 0..n_obs {
                let u: f64 = rng.random();
                let z: f64 = rng.sample(StandardNormal);
                y0.push(if u < p.extreme_prob {
                    -p.extreme_value
                } else if u >= 1.0 - p.extreme_prob {
                    p.extreme_value
                } else {
                    z
                });
                d.push(bern(rng));
            }
        }
        DgpId::F => {
            let chi = ChiSquared::new(p.chi_df).expect("positive df");
            for _ in 0..n_obs {
                y0.push(chi.sample(rng));
                d.push(bern(rng));
            }
        }
        DgpId::G => {
            let (lo, hi) = p.uniform;
            for _ in 0..n_obs {
                y0.push(rng.random_range(lo..hi));
                d.push(bern(rng));
            }
        }
    }
    let y = y0
        .iter()
        .zip(&d)
        .map(|(&b, &z)| if z { b + p.delta } else { b })
        .collect();
    Draw { y0, d, y }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Order-sensitive hash of a word sequence; fixed across platforms.
pub fn stable_hash(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Seed of replication `rep` (attempt `attempt`) of a cell.
pub fn replication_seed(base_seed: u64, spec: &DgpSpec, rep: u64, attempt: u64) -> u64 {
    stable_hash(&[
        base_seed,
        spec.id.index(),
        spec.n as u64,
        spec.t as u64,
        rep,
        attempt,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManskiVariant {
    /// Raw plug-in interval.
    #[default]
    Plugin,
    /// Plug-in interval widened by Φ⁻¹(1 − α/2) delta-method SEs.
    Prop1,
}

impl std::str::FromStr for ManskiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plugin" => Ok(ManskiVariant::Plugin),
            "prop1" => Ok(ManskiVariant::Prop1),
            other => Err(invalid(format!("unknown Manski variant '{other}' (plugin|prop1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub alpha: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub manski_variant: ManskiVariant,
    pub coupling: ShareCoupling,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            alpha: 0.05,
            reps: 2000,
            base_seed: 20_240_601,
            manski_variant: ManskiVariant::Plugin,
            coupling: ShareCoupling::Independent,
        }
    }
}

/// Smallest arm size a replication must reach before it is scored.
pub const MIN_ARM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub draw: Draw,
    pub bands: Algorithm1Bands,
    /// Interval scored as "Manski" under the chosen variant.
    pub manski: IdentificationRegion,
    pub redraws: u64,
}

impl Replication {
    pub fn manski_hit(&self, delta: f64) -> bool {
        self.manski.contains(delta)
    }

    pub fn hybrid_hit(&self, delta: f64) -> bool {
        self.bands.hybrid.interval().contains(delta)
    }
}

/// Runs replication `rep` of a cell, redrawing while an arm is too small.
pub fn replicate(spec: &DgpSpec, opts: &SimOptions, rep: u64) -> Result<Replication> {
    let mut attempt = 0u64;
    let draw = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(opts.base_seed, spec, rep, attempt));
        let draw = generate(spec, &mut rng);
        let n1 = draw.n_treated();
        if n1 >= MIN_ARM && draw.d.len() - n1 >= MIN_ARM {
            break draw;
        }
        attempt += 1;
        if attempt > 10_000 {
            return Err(Error::Degenerate(format!(
                "design {} never produced two observations per arm",
                spec.id
            )));
        }
    };
    let stats = draw.group_stats();
    let bands = algorithm1_bands(&draw.y0, &stats, opts.alpha, spec.id.support_rule(), opts.coupling)?;
    let manski = match opts.manski_variant {
        ManskiVariant::Plugin => bands.manski,
        ManskiVariant::Prop1 => {
            let (sl, su) = crate::manski::bound_standard_errors(&stats, &bands.support, opts.coupling)?;
            widen(bands.manski, 0.0, normal::two_sided_critical(opts.alpha), sl, su)
        }
    };
    Ok(Replication {
        draw,
        bands,
        manski,
        redraws: attempt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMethod {
    Manski,
    Hybrid,
}

impl CoverageMethod {
    pub fn name(self) -> &'static str {
        match self {
            CoverageMethod::Manski => "manski",
            CoverageMethod::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageCell {
    pub dgp: DgpId,
    pub n_obs: usize,
    pub method: CoverageMethod,
    pub hits: u64,
    pub reps: u64,
    pub seed: u64,
    pub redraws: u64,
}

impl CoverageCell {
    pub fn coverage(&self) -> f64 {
        self.hits as f64 / self.reps as f64
    }

    pub fn coverage_pct(&self) -> f64 {
        100.0 * self.coverage()
    }
}

/// Manski and hybrid coverage of one design at one panel length.
pub fn run_cell(spec: &DgpSpec, opts: &SimOptions) -> Result<[CoverageCell; 2]> {
    spec.validate()?;
    if opts.reps == 0 {
        return Err(invalid("at least one replication is required"));
    }
    let delta = spec.params.delta;
    let outcomes = (0..opts.reps as u64)
        .into_par_iter()
        .map(|r| {
            replicate(spec, opts, r).map(|rep| (rep.manski_hit(delta), rep.hybrid_hit(delta), rep.redraws))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut hm, mut hh, mut redraws) = (0u64, 0u64, 0u64);
    for (m, h, r) in outcomes {
        hm += m as u64;
        hh += h as u64;
        redraws += r;
    }
    let cell = |method, hits| CoverageCell {
        dgp: spec.id,
        n_obs: spec.n_obs(),
        method,
        hits,
        reps: opts.reps as u64,
        seed: opts.base_seed,
        redraws,
    };
    Ok([cell(CoverageMethod::Manski, hm), cell(CoverageMethod::Hybrid, hh)])
}

/// Coverage cells for every design × panel length, in table order
/// (design, then N, then Manski before hybrid).
pub fn coverage_table(
    designs: &[DgpId],
    n: usize,
    ts: &[usize],
    params: &DgpParams,
    opts: &SimOptions,
) -> Result<Vec<CoverageCell>> {
    let mut out = Vec::with_capacity(designs.len() * ts.len() * 2);
    for &id in designs {
        for &t in ts {
            let spec = DgpSpec {
                id,
                n,
                t,
                params: *params,
            };
            out.extend(run_cell(&spec, opts)?);
        }
    }
    Ok(out)
}

/// Step-0 oracle support `(a*, b*)` from `n_big` baseline draws.
pub fn oracle_support(id: DgpId, params: &DgpParams, n_big: usize, seed: u64) -> (f64, f64) {
    if id == DgpId::G {
        return params.uniform;
    }
    let spec = DgpSpec {
        id,
        n: n_big,
        t: 1,
        params: *params,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[seed, id.index(), n_big as u64, u64::MAX]));
    let draw = generate(&spec, &mut rng);
    let (lo, hi) = draw
        .y0
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let a = if id == DgpId::F { 0.0 } else { lo };
    (a, hi + params.delta)
}
