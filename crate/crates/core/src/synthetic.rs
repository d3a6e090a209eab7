//! Synthetic burden tables with the same layout as the real data: seven
//! communicable, ten non-communicable and six injury causes over 1990-2016,
//! each a smooth latent trend with multiplicative Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{DalyTable, Group, GroupConfig, IngestError};

pub const FIRST_YEAR: i32 = 1990;
pub const LAST_YEAR: i32 = 2016;

struct Cause {
    name: &'static str,
    group: Group,
    base: f64,
    /// Weights on the group's two latent trends.
    weights: [f64; 2],
}

const fn cause(name: &'static str, group: Group, base: f64, a: f64, b: f64) -> Cause {
    Cause { name, group, base, weights: [a, b] }
}

const CAUSES: [Cause; 23] = [
    cause("hiv", Group::Communicable, 40_000.0, -0.10, 0.45),
    cause("diarrhea", Group::Communicable, 900_000.0, 0.50, 0.05),
    cause("malaria", Group::Communicable, 60_000.0, 0.05, 0.40),
    cause("maternal", Group::Communicable, 120_000.0, -0.05, 0.35),
    cause("neonatal", Group::Communicable, 1_500_000.0, 0.45, -0.05),
    cause("nutritional", Group::Communicable, 400_000.0, 0.50, 0.00),
    cause("other_communicable", Group::Communicable, 700_000.0, 0.40, 0.10),
    cause("cancers", Group::Noncommunicable, 1_100_000.0, 0.45, 0.0),
    cause("cardiovascular", Group::Noncommunicable, 2_400_000.0, 0.50, 0.0),
    cause("respiratory", Group::Noncommunicable, 600_000.0, 0.40, 0.0),
    cause("liver", Group::Noncommunicable, 300_000.0, 0.35, 0.0),
    cause("digestive", Group::Noncommunicable, 250_000.0, 0.30, 0.0),
    cause("neurology", Group::Noncommunicable, 350_000.0, 0.45, 0.0),
    cause("mental", Group::Noncommunicable, 500_000.0, 0.40, 0.0),
    cause("diabetes", Group::Noncommunicable, 700_000.0, 0.55, 0.0),
    cause("musculoskeletal", Group::Noncommunicable, 450_000.0, 0.35, 0.0),
    cause("other_ncd", Group::Noncommunicable, 400_000.0, 0.40, 0.0),
    cause("transport", Group::Injury, 350_000.0, 0.45, 0.05),
    cause("natural", Group::Injury, 40_000.0, -0.05, 0.45),
    cause("conflict", Group::Injury, 30_000.0, 0.00, 0.40),
    cause("self_harm", Group::Injury, 90_000.0, -0.10, 0.35),
    cause("interpersonal", Group::Injury, 400_000.0, 0.45, 0.00),
    cause("unintentional", Group::Injury, 600_000.0, 0.40, 0.10),
];

/// Latent trends on `s in [0, 1]`, centred so weights shift levels symmetrically.
fn latent(group: Group, s: f64) -> [f64; 2] {
    match group {
        Group::Communicable => [(-1.5 * s).exp() - 0.52, 4.0 * s * (1.0 - s) - 0.67],
        Group::Noncommunicable => [s + 0.4 * s * s - 0.63, 0.0],
        Group::Injury => [1.0 - (-2.0 * s).exp() - 0.57, (std::f64::consts::PI * s).sin() - 0.64],
    }
}

/// A complete 1990-2016 table and its group mapping. `noise` is the relative
/// standard deviation of the multiplicative noise (0.01 for 1%).
pub fn synthetic_burden(seed: u64, noise: f64) -> Result<(DalyTable, GroupConfig), IngestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut config = GroupConfig::new();
    for c in &CAUSES {
        config.insert(c.name, c.group);
    }
    let span = f64::from(LAST_YEAR - FIRST_YEAR);
    let rows = (FIRST_YEAR..=LAST_YEAR)
        .map(|year| {
            let s = f64::from(year - FIRST_YEAR) / span;
            let values = CAUSES
                .iter()
                .map(|c| {
                    let f = latent(c.group, s);
                    let level = c.base * (1.0 + c.weights[0] * f[0] + c.weights[1] * f[1]);
                    let eps: f64 = normal.sample(&mut rng);
                    (level * (1.0 + noise * eps)).max(0.0)
                })
                .collect();
            (year, values)
        })
        .collect();
    let causes = CAUSES.iter().map(|c| c.name.to_string()).collect();
    let table = DalyTable::new(causes, rows, &config)?;
    Ok((table, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let (table, config) = synthetic_burden(1, 0.01).unwrap();
        assert_eq!(table.years().len(), 27);
        assert_eq!(table.group_columns(Group::Communicable).len(), 7);
        assert_eq!(table.group_columns(Group::Noncommunicable).len(), 10);
        assert_eq!(table.group_columns(Group::Injury).len(), 6);
        assert_eq!(config.len(), 23);
        assert_eq!(synthetic_burden(1, 0.01).unwrap().0, table);
    }
}
