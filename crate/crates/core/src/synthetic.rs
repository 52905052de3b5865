//! Constructed panels for scan checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::panel::{Observation, PanelDataset, Schema};

fn build(obs: Vec<Observation>) -> PanelDataset {
    PanelDataset::new(obs, Schema::default()).expect("generated panel is valid")
}

/// Outcome independent of the signal: N(0, 1) outcomes, uniform signals.
pub fn null_panel(units: usize, periods: usize, seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(units * periods);
    for u in 0..units {
        for t in 0..periods {
            obs.push(Observation {
                unit_id: format!("firm{u:04}"),
                group: None,
                time: t as i64,
                outcome: rng.sample(StandardNormal),
                signal: rng.random_range(0.0..100.0),
            });
        }
    }
    build(obs)
}

/// Panel whose band first excludes zero at a signal threshold of 55.
///
/// Observations with signal below 55 draw outcomes from U[−5, 5]; those at
/// or above 55 from U[10, 11]. Below the cut the treated arm always mixes
/// both kinds and the identification region's lower end stays near −0.5.
/// Only `few_high` observations have a signal of 90 or more, so the upper
/// thresholds fall short of a minimum group size of 10.
pub fn tipping_panel(units: usize, periods: usize, few_high: usize, seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = units * periods;
    let stride = (total / few_high.max(1)).max(1);
    let mut obs = Vec::with_capacity(total);
    for i in 0..total {
        let signal = if few_high > 0 && i % stride == 0 && i / stride < few_high {
            rng.random_range(90.0..100.0)
        } else {
            rng.random_range(0.0..90.0)
        };
        let outcome = if signal >= 55.0 {
            rng.random_range(10.0..11.0)
        } else {
            rng.random_range(-5.0..5.0)
        };
        obs.push(Observation {
            unit_id: format!("firm{:04}", i / periods),
            group: Some(if i % 2 == 0 { "growth" } else { "value" }.to_string()),
            time: (i % periods) as i64,
            outcome,
            signal,
        });
    }
    build(obs)
}
