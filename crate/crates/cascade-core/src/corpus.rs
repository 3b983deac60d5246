//! Seeded random structures, inflow paths, and pools.
//!
//! Property suites, the acceptance tests, and the benchmarks all need a
//! stream of valid-but-varied specifications: mixed sequential and pro-rata
//! tiers, schedule and rate-derived dues, triggers, and rules. Everything is
//! driven by an explicit seed so a failing case can be replayed exactly.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::inflow::{Dependence, Hazard, PoolSpec, Unit};
use crate::money::{money, Money};
use crate::rational::Rational;
use crate::structure::{
    Comparator, ContractParams, Position, PositionKind, Rule, RuleCondition, RuleEffect,
    StructureSpec, Tier, TierMode, Trigger, TriggerMetric,
};

/// Deterministic generator for a given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which structural features the generator may use.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub max_positions: usize,
    pub max_horizon: usize,
    pub allow_pro_rata: bool,
    pub allow_triggers: bool,
    pub allow_rules: bool,
    pub allow_caps: bool,
    pub allow_cumulative: bool,
    pub allow_amortizing: bool,
}

impl CorpusConfig {
    /// Everything on: the corpus for conservation and priority suites.
    pub fn full() -> Self {
        CorpusConfig {
            max_positions: 6,
            max_horizon: 6,
            allow_pro_rata: true,
            allow_triggers: true,
            allow_rules: true,
            allow_caps: true,
            allow_cumulative: true,
            allow_amortizing: true,
        }
    }

    /// Sequential tiers, payment-independent dues, no regime switches: the
    /// domain on which argwise monotonicity holds.
    pub fn sequential_trigger_free() -> Self {
        CorpusConfig {
            max_positions: 6,
            max_horizon: 6,
            allow_pro_rata: false,
            allow_triggers: false,
            allow_rules: false,
            allow_caps: false,
            allow_cumulative: false,
            allow_amortizing: false,
        }
    }
}

/// Positive integer-percent weights summing to exactly 1.
fn random_weights(rng: &mut impl Rng, count: usize) -> Vec<Rational> {
    // Distribute 100 points with at least one per member.
    let mut points = vec![1u32; count];
    for _ in 0..(100 - count as u32) {
        points[rng.gen_range(0..count)] += 1;
    }
    points
        .into_iter()
        .map(|p| Rational::new(p.into(), 100.into()))
        .collect()
}

fn random_position(rng: &mut impl Rng, index: usize, horizon: usize, config: &CorpusConfig) -> Position {
    let kind = match rng.gen_range(0..10) {
        0 => PositionKind::Cost,
        9 => PositionKind::Residual,
        _ => PositionKind::Note,
    };
    let notional = money(rng.gen_range(0..=1_000_000));
    let use_schedule = rng.gen_bool(0.5);
    let due_schedule = use_schedule.then(|| {
        let mut schedule = BTreeMap::new();
        for period in 0..horizon {
            // Sparse tables are legal: some periods owe nothing.
            if rng.gen_bool(0.8) {
                schedule.insert(period, money(rng.gen_range(0..=100_000)));
            }
        }
        schedule
    });
    let contract = if use_schedule {
        ContractParams::default()
    } else {
        ContractParams {
            rate_bps: rng.gen_range(0..=2_000),
            cap: (config.allow_caps && rng.gen_bool(0.2))
                .then(|| money(rng.gen_range(0..=50_000))),
            cumulative_dues: config.allow_cumulative && rng.gen_bool(0.25),
            amortizing: config.allow_amortizing && rng.gen_bool(0.25),
        }
    };
    Position {
        name: format!("p{}", index),
        kind,
        notional,
        priority_rank: index as u32,
        maturity: rng.gen_bool(0.2).then(|| rng.gen_range(0..horizon)),
        contract,
        due_schedule,
    }
}

/// Generate a random valid structure under the given feature set.
pub fn random_structure(rng: &mut impl Rng, config: &CorpusConfig) -> StructureSpec {
    let horizon = rng.gen_range(1..=config.max_horizon);
    let position_count = rng.gen_range(2..=config.max_positions);
    let positions: Vec<Position> = (0..position_count)
        .map(|i| random_position(rng, i, horizon, config))
        .collect();

    // Partition positions into 1..=3 tiers, preserving order.
    let tier_count = rng.gen_range(1..=3.min(position_count));
    let mut cut_points: Vec<usize> = (1..position_count).collect();
    cut_points.shuffle(rng);
    let mut cuts: Vec<usize> = cut_points.into_iter().take(tier_count - 1).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(position_count);

    let tiers: Vec<Tier> = cuts
        .windows(2)
        .enumerate()
        .map(|(tier_index, bounds)| {
            let members: Vec<String> = positions[bounds[0]..bounds[1]]
                .iter()
                .map(|p| p.name.clone())
                .collect();
            let pro_rata = config.allow_pro_rata && members.len() >= 2 && rng.gen_bool(0.4);
            if pro_rata {
                let weights = random_weights(rng, members.len());
                Tier {
                    name: format!("tier{}", tier_index),
                    mode: TierMode::ProRata,
                    members,
                    weights: Some(weights),
                }
            } else {
                Tier {
                    name: format!("tier{}", tier_index),
                    mode: TierMode::Sequential,
                    members,
                    weights: None,
                }
            }
        })
        .collect();

    let triggers = if config.allow_triggers && rng.gen_bool(0.6) {
        (0..rng.gen_range(1..=2))
            .map(|i| {
                let metric = match rng.gen_range(0..5) {
                    0 => TriggerMetric::CumulativePoolLoss,
                    1 => TriggerMetric::CumulativePositionShortfall {
                        position: positions[rng.gen_range(0..position_count)].name.clone(),
                    },
                    2 => TriggerMetric::ResidualBalance,
                    3 => TriggerMetric::PeriodInflow,
                    _ => TriggerMetric::PeriodIndex,
                };
                let threshold = match metric {
                    TriggerMetric::PeriodIndex => rng.gen_range(0..horizon as i64),
                    _ => rng.gen_range(0..=200_000),
                };
                Trigger {
                    name: format!("trig{}", i),
                    metric,
                    comparator: match rng.gen_range(0..4) {
                        0 => Comparator::Lt,
                        1 => Comparator::Le,
                        2 => Comparator::Gt,
                        _ => Comparator::Ge,
                    },
                    threshold,
                    latching: rng.gen_bool(0.5),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let rules = if config.allow_rules && rng.gen_bool(0.6) {
        (0..rng.gen_range(1..=3))
            .map(|_| {
                let when = if !triggers.is_empty() && rng.gen_bool(0.7) {
                    let trigger: &Trigger =
                        &triggers[rng.gen_range(0..triggers.len())];
                    RuleCondition::Trigger(trigger.name.clone())
                } else {
                    RuleCondition::Always
                };
                let effect = match rng.gen_range(0..3) {
                    0 => {
                        let mut order: Vec<String> =
                            tiers.iter().map(|t| t.name.clone()).collect();
                        order.shuffle(rng);
                        RuleEffect::UseTierOrder(order)
                    }
                    1 => RuleEffect::DivertResidualTo(
                        positions[rng.gen_range(0..position_count)].name.clone(),
                    ),
                    _ => RuleEffect::ZeroDuesOf(
                        positions[rng.gen_range(0..position_count)].name.clone(),
                    ),
                };
                Rule { when, effect }
            })
            .collect()
    } else {
        Vec::new()
    };

    let spec = StructureSpec {
        name: "corpus".to_string(),
        horizon,
        initial_residual: money(rng.gen_range(0..=10_000)),
        positions,
        tiers,
        triggers,
        rules,
    };
    debug_assert!(spec.validate().is_ok(), "corpus produced an invalid spec");
    spec
}

/// Random non-negative inflow path for a horizon.
pub fn random_inflows(rng: &mut impl Rng, horizon: usize, max: i64) -> Vec<Money> {
    (0..horizon).map(|_| money(rng.gen_range(0..=max))).collect()
}

/// Random per-period pool-loss path.
pub fn random_losses(rng: &mut impl Rng, horizon: usize, max: i64) -> Vec<Money> {
    random_inflows(rng, horizon, max)
}

/// A pointwise-dominated inflow pair: `high[t] ≥ low[t]` for every period.
pub fn dominated_pair(rng: &mut impl Rng, horizon: usize, max: i64) -> (Vec<Money>, Vec<Money>) {
    let low = random_inflows(rng, horizon, max);
    let high = low
        .iter()
        .map(|&f| f + money(rng.gen_range(0..=max / 2)))
        .collect();
    (low, high)
}

/// Small independent pool that exact enumeration can handle (≤ 3 units,
/// ≤ 3 periods, hazards in round basis points).
pub fn random_enumerable_pool(rng: &mut impl Rng) -> PoolSpec {
    let horizon = rng.gen_range(1..=3);
    let unit_count = rng.gen_range(1..=3);
    let units = (0..unit_count)
        .map(|i| {
            let default_bps = rng.gen_range(0..=3_000);
            let prepay_bps = rng.gen_range(0..=(10_000 - default_bps).min(2_000));
            Unit {
                id: format!("u{}", i),
                baseline: (0..horizon).map(|_| money(rng.gen_range(0..=1_000))).collect(),
                outstanding_principal: money(rng.gen_range(0..=5_000)),
                default_hazard: Hazard::Flat(default_bps),
                prepay_hazard: Hazard::Flat(prepay_bps),
                recovery_rate_bps: rng.gen_range(0..=10_000),
                recovery_lag: rng.gen_range(0..=2),
            }
        })
        .collect();
    PoolSpec {
        horizon,
        dependence: Dependence::Independent,
        units,
    }
}

/// Small sequential structure with schedule dues, sized for a pool's
/// horizon; used to pair with enumerable pools in oracle tests.
pub fn random_small_structure(rng: &mut impl Rng, horizon: usize) -> StructureSpec {
    let position_count = rng.gen_range(2..=3);
    let positions: Vec<Position> = (0..position_count)
        .map(|i| {
            let schedule: BTreeMap<usize, Money> = (0..horizon)
                .map(|t| (t, money(rng.gen_range(0..=800))))
                .collect();
            Position {
                name: format!("p{}", i),
                kind: PositionKind::Note,
                notional: money(1_000),
                priority_rank: i as u32,
                maturity: None,
                contract: ContractParams::default(),
                due_schedule: Some(schedule),
            }
        })
        .collect();
    let spec = StructureSpec {
        name: "oracle".to_string(),
        horizon,
        initial_residual: Money::ZERO,
        positions: positions.clone(),
        tiers: vec![Tier {
            name: "waterfall".to_string(),
            mode: TierMode::Sequential,
            members: positions.iter().map(|p| p.name.clone()).collect(),
            weights: None,
        }],
        triggers: vec![],
        rules: vec![],
    };
    debug_assert!(spec.validate().is_ok());
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_structures_validate() {
        let config = CorpusConfig::full();
        for seed in 0..200 {
            let spec = random_structure(&mut rng(seed), &config);
            assert!(
                spec.validate().is_ok(),
                "seed {} produced invalid spec",
                seed
            );
        }
    }

    #[test]
    fn trigger_free_config_stays_trigger_free() {
        let config = CorpusConfig::sequential_trigger_free();
        for seed in 0..100 {
            let spec = random_structure(&mut rng(seed), &config);
            assert!(spec.triggers.is_empty());
            assert!(spec.rules.is_empty());
            assert!(spec.tiers.iter().all(|t| t.mode == TierMode::Sequential));
        }
    }

    #[test]
    fn dominated_pairs_dominate() {
        for seed in 0..50 {
            let mut generator = rng(seed);
            let (low, high) = dominated_pair(&mut generator, 5, 10_000);
            assert!(low.iter().zip(&high).all(|(l, h)| h >= l));
        }
    }

    #[test]
    fn enumerable_pools_validate() {
        for seed in 0..50 {
            let pool = random_enumerable_pool(&mut rng(seed));
            assert!(pool.validate().is_ok());
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let config = CorpusConfig::full();
        let a = random_structure(&mut rng(7), &config);
        let b = random_structure(&mut rng(7), &config);
        assert_eq!(a, b);
    }
}
