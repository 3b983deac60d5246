//! Shared fixtures for the engine benchmarks (see `benches/engine.rs`).

use cascade_core::corpus::{self, random_structure, CorpusConfig};
use cascade_core::inflow::{Dependence, Hazard, PoolSpec, Unit};
use cascade_core::money::{money, Money};
use cascade_core::StructureSpec;

/// Mid-size structure: up to six positions, mixed tier modes, triggers and
/// rules enabled, drawn from a fixed seed.
pub fn benchmark_structure(seed: u64) -> (StructureSpec, Vec<Money>, Vec<Money>) {
    let mut rng = corpus::rng(seed);
    let spec = random_structure(&mut rng, &CorpusConfig::full());
    let inflows = corpus::random_inflows(&mut rng, spec.horizon, 500_000);
    let losses = corpus::random_losses(&mut rng, spec.horizon, 200_000);
    (spec, inflows, losses)
}

/// Pool with `units` amortising loans over `horizon` periods.
pub fn benchmark_pool(units: usize, horizon: usize) -> PoolSpec {
    PoolSpec {
        horizon,
        dependence: Dependence::OneFactor { rho: 0.25 },
        units: (0..units)
            .map(|index| Unit {
                id: format!("loan-{:04}", index),
                baseline: vec![money(1_000); horizon],
                outstanding_principal: money(1_000 * horizon as i64),
                default_hazard: Hazard::Flat(150),
                prepay_hazard: Hazard::Flat(400),
                recovery_rate_bps: 4_500,
                recovery_lag: 2,
            })
            .collect(),
    }
}
