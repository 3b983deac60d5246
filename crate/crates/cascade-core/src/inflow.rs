//! Stochastic inflow generation from a pool of cash-flow generating units.
//!
//! Each unit carries a deterministic baseline schedule and per-period default
//! and prepayment hazards. A scenario is a joint realisation of unit events;
//! unit flows are transformed accordingly and summed into the aggregate
//! inflow path the allocation operator consumes.
//!
//! Random draws come from a counter-style stream keyed by
//! `(master_seed, scenario, unit, period)`, so a scenario's content does not
//! depend on how many scenarios are generated, in what order, or on how the
//! work is spread across threads. Small pools can be enumerated exactly with
//! rational probability weights, which serves as the oracle the sampler is
//! tested against.

use num::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::money::{Money, BPS_SCALE};
use crate::rational::{self, Rational};

/// Hazard expressed in integer basis points, flat or per period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hazard {
    Flat(i64),
    PerPeriod(Vec<i64>),
}

impl Default for Hazard {
    fn default() -> Self {
        Hazard::Flat(0)
    }
}

impl Hazard {
    pub fn bps_at(&self, period: usize) -> i64 {
        match self {
            Hazard::Flat(bps) => *bps,
            Hazard::PerPeriod(curve) => curve.get(period).copied().unwrap_or(0),
        }
    }
}

/// A cash-flow generating unit: baseline schedule plus event dynamics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub id: String,
    /// Scheduled flow per period while performing.
    pub baseline: Vec<Money>,
    pub outstanding_principal: Money,
    #[serde(default)]
    pub default_hazard: Hazard,
    #[serde(default)]
    pub prepay_hazard: Hazard,
    /// Fraction of outstanding principal recovered after default, in bps.
    #[serde(default)]
    pub recovery_rate_bps: i64,
    /// Periods between default and the recovery payment.
    #[serde(default)]
    pub recovery_lag: usize,
}

impl Unit {
    /// Recovery amount implied by the unit's terms.
    pub fn recovery_amount(&self) -> Money {
        self.outstanding_principal
            .scale_bps_half_even(self.recovery_rate_bps)
    }
}

/// Dependence across units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Dependence {
    Independent,
    /// One-factor Gaussian copula on default events with loading `rho`.
    OneFactor { rho: f64 },
}

impl Default for Dependence {
    fn default() -> Self {
        Dependence::Independent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub horizon: usize,
    #[serde(default)]
    pub dependence: Dependence,
    pub units: Vec<Unit>,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::EmptyInput("pool horizon must be at least 1"));
        }
        if let Dependence::OneFactor { rho } = self.dependence {
            if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
                return Err(Error::BadCorrelation(rho));
            }
        }
        for unit in &self.units {
            if unit.baseline.len() != self.horizon {
                return Err(Error::LengthMismatch {
                    expected: self.horizon,
                    got: unit.baseline.len(),
                });
            }
            if unit.baseline.iter().any(|b| b.is_negative()) {
                return Err(Error::NegativeInput {
                    context: format!("baseline of unit `{}`", unit.id),
                });
            }
            if unit.outstanding_principal.is_negative() {
                return Err(Error::NegativeInput {
                    context: format!("outstanding principal of unit `{}`", unit.id),
                });
            }
            if !(0..=BPS_SCALE).contains(&unit.recovery_rate_bps) {
                return Err(Error::BadHazard {
                    context: format!("recovery rate of unit `{}`", unit.id),
                });
            }
            for period in 0..self.horizon {
                let d = unit.default_hazard.bps_at(period);
                let p = unit.prepay_hazard.bps_at(period);
                if d < 0 || p < 0 || d + p > BPS_SCALE {
                    return Err(Error::BadHazard {
                        context: format!("unit `{}`, period {}", unit.id, period),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Terminal outcome of one unit along a scenario: transitions are absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOutcome {
    Performing,
    Defaulted { at: usize },
    Prepaid { at: usize },
}

/// One realised scenario: unit events, unit flows, and the aggregate path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflowScenario {
    pub id: u64,
    pub outcomes: Vec<UnitOutcome>,
    /// Realised flow per unit per period.
    pub unit_flows: Vec<Vec<Money>>,
    /// Aggregate inflow F_t = Σ_i F_{i,t}, exact column sums.
    pub aggregate: Vec<Money>,
    /// Net pool loss realised per period (principal lost at default, net of
    /// the contractual recovery), feeding loss-based triggers.
    pub pool_losses: Vec<Money>,
    /// Exact probability mass; present in enumeration mode only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<Rational>,
}

/// Apply event semantics to a unit's baseline schedule.
///
/// Performing units pay the baseline. A default at `t` kills the flow from
/// `t` onward and pays the contractual recovery at `min(t + lag, last)`.
/// A prepayment at `t` replaces the period-`t` flow with the outstanding
/// principal and kills everything after.
pub fn unit_cashflow(unit: &Unit, outcome: UnitOutcome) -> Result<Vec<Money>> {
    let horizon = unit.baseline.len();
    let within = |at: usize| -> Result<()> {
        if at >= horizon {
            Err(Error::InconsistentTrace(format!(
                "unit `{}` event at period {} beyond horizon {}",
                unit.id, at, horizon
            )))
        } else {
            Ok(())
        }
    };
    let mut flows = unit.baseline.clone();
    match outcome {
        UnitOutcome::Performing => {}
        UnitOutcome::Defaulted { at } => {
            within(at)?;
            for flow in flows.iter_mut().skip(at) {
                *flow = Money::ZERO;
            }
            let recovery_period = (at + unit.recovery_lag).min(horizon - 1);
            flows[recovery_period] += unit.recovery_amount();
        }
        UnitOutcome::Prepaid { at } => {
            within(at)?;
            flows[at] = unit.outstanding_principal;
            for flow in flows.iter_mut().skip(at + 1) {
                *flow = Money::ZERO;
            }
        }
    }
    Ok(flows)
}

/// Exact column sums of a rectangular unit × period flow matrix.
pub fn aggregate_inflows(unit_flows: &[Vec<Money>]) -> Result<Vec<Money>> {
    let Some(first) = unit_flows.first() else {
        return Ok(Vec::new());
    };
    let width = first.len();
    let mut totals = vec![Money::ZERO; width];
    for (row, flows) in unit_flows.iter().enumerate() {
        if flows.len() != width {
            return Err(Error::RaggedInput {
                row,
                expected: width,
                got: flows.len(),
            });
        }
        for (total, &flow) in totals.iter_mut().zip(flows) {
            *total += flow;
        }
    }
    Ok(totals)
}

/// Per-period net pool losses implied by the unit outcomes.
fn pool_losses(units: &[Unit], outcomes: &[UnitOutcome], horizon: usize) -> Vec<Money> {
    let mut losses = vec![Money::ZERO; horizon];
    for (unit, outcome) in units.iter().zip(outcomes) {
        if let UnitOutcome::Defaulted { at } = outcome {
            losses[*at] += unit
                .outstanding_principal
                .saturating_sub_at_zero(unit.recovery_amount());
        }
    }
    losses
}

fn assemble_scenario(
    pool: &PoolSpec,
    id: u64,
    outcomes: Vec<UnitOutcome>,
    weight: Option<Rational>,
) -> Result<InflowScenario> {
    let unit_flows = pool
        .units
        .iter()
        .zip(&outcomes)
        .map(|(unit, &outcome)| unit_cashflow(unit, outcome))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = if unit_flows.is_empty() {
        vec![Money::ZERO; pool.horizon]
    } else {
        aggregate_inflows(&unit_flows)?
    };
    let losses = pool_losses(&pool.units, &outcomes, pool.horizon);
    Ok(InflowScenario {
        id,
        outcomes,
        unit_flows,
        aggregate,
        pool_losses: losses,
        weight,
    })
}

// ── counter-based random streams ────────────────────────────────────

/// Draw purposes, kept distinct so streams never collide.
#[derive(Clone, Copy)]
enum DrawKind {
    Event = 1,
    CommonFactor = 2,
    Idiosyncratic = 3,
    Prepay = 4,
}

/// SplitMix64 finaliser: a bijective mixer with full avalanche, applied to a
/// combined counter. Equal keys give equal draws; nothing is sequential, so
/// generation order is irrelevant.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fold_id(id: &str) -> u64 {
    // FNV-1a over the unit id, so streams follow the unit, not its index.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in id.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Uniform draw in the open interval (0, 1) for the given coordinates.
fn uniform_draw(seed: u64, scenario: u64, unit_key: u64, period: usize, kind: DrawKind) -> f64 {
    let mut state = mix64(seed ^ 0x5bf0_3635_fa18_0f1d);
    state = mix64(state ^ scenario);
    state = mix64(state ^ unit_key);
    state = mix64(state ^ (period as u64));
    state = mix64(state ^ (kind as u64));
    // 53 mantissa bits, offset by half a step: strictly inside (0, 1).
    (((state >> 11) as f64) + 0.5) / (1u64 << 53) as f64
}

fn hazard_probability(bps: i64) -> f64 {
    bps as f64 / BPS_SCALE as f64
}

/// Sample one scenario for the given index under the pool's dependence mode.
///
/// Independent mode partitions a single uniform per (unit, period) into
/// default, prepayment, and survival. One-factor mode decides defaults by a
/// Gaussian copula over a common factor drawn per period, with prepayment
/// decided by an independent uniform among survivors.
pub fn sample_scenario(pool: &PoolSpec, master_seed: u64, scenario: u64) -> Result<InflowScenario> {
    pool.validate()?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let rho = match pool.dependence {
        Dependence::Independent => None,
        Dependence::OneFactor { rho } => Some(rho),
    };

    let mut outcomes = vec![UnitOutcome::Performing; pool.units.len()];
    for period in 0..pool.horizon {
        let common = rho.map(|_| {
            let u = uniform_draw(master_seed, scenario, 0, period, DrawKind::CommonFactor);
            normal.inverse_cdf(u)
        });
        for (index, unit) in pool.units.iter().enumerate() {
            if outcomes[index] != UnitOutcome::Performing {
                continue;
            }
            let unit_key = fold_id(&unit.id);
            let h_default = hazard_probability(unit.default_hazard.bps_at(period));
            let h_prepay = hazard_probability(unit.prepay_hazard.bps_at(period));

            match (rho, common) {
                (Some(rho), Some(factor)) => {
                    let defaulted = if h_default <= 0.0 {
                        false
                    } else if h_default >= 1.0 {
                        true
                    } else {
                        let eps = normal.inverse_cdf(uniform_draw(
                            master_seed,
                            scenario,
                            unit_key,
                            period,
                            DrawKind::Idiosyncratic,
                        ));
                        let latent = rho.sqrt() * factor + (1.0 - rho).sqrt() * eps;
                        latent < normal.inverse_cdf(h_default)
                    };
                    if defaulted {
                        outcomes[index] = UnitOutcome::Defaulted { at: period };
                    } else if h_prepay > 0.0 {
                        let u = uniform_draw(
                            master_seed,
                            scenario,
                            unit_key,
                            period,
                            DrawKind::Prepay,
                        );
                        if u < h_prepay {
                            outcomes[index] = UnitOutcome::Prepaid { at: period };
                        }
                    }
                }
                _ => {
                    let u =
                        uniform_draw(master_seed, scenario, unit_key, period, DrawKind::Event);
                    if u < h_default {
                        outcomes[index] = UnitOutcome::Defaulted { at: period };
                    } else if u < h_default + h_prepay {
                        outcomes[index] = UnitOutcome::Prepaid { at: period };
                    }
                }
            }
        }
    }

    assemble_scenario(pool, scenario, outcomes, None)
}

/// Sample a block of scenarios `0..count`, in parallel when a rayon pool is
/// active. Scenario content is a pure function of `(master_seed, index)`.
pub fn sample_scenarios(pool: &PoolSpec, master_seed: u64, count: u64) -> Result<Vec<InflowScenario>> {
    use rayon::prelude::*;
    pool.validate()?;
    (0..count)
        .into_par_iter()
        .map(|index| sample_scenario(pool, master_seed, index))
        .collect()
}

/// Order-sensitive digest of a scenario set, used to assert that design
/// evaluations share one identical set (common random numbers).
pub fn scenario_fingerprint(scenarios: &[InflowScenario]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |value: u64| {
        for byte in value.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for scenario in scenarios {
        eat(scenario.id);
        for &flow in &scenario.aggregate {
            eat(flow.minor() as u64);
        }
        for &loss in &scenario.pool_losses {
            eat(loss.minor() as u64);
        }
    }
    hash
}

/// Hard cap on the exact enumeration size.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Outcome with its exact probability, for one unit.
struct WeightedOutcome {
    outcome: UnitOutcome,
    probability: Rational,
}

/// Nonzero-probability outcomes of a single unit with exact masses.
fn unit_outcomes(unit: &Unit, horizon: usize) -> Vec<WeightedOutcome> {
    let mut outcomes = Vec::new();
    let mut survival = Rational::one();
    for period in 0..horizon {
        let p_default = rational::from_bps(unit.default_hazard.bps_at(period));
        let p_prepay = rational::from_bps(unit.prepay_hazard.bps_at(period));
        if !p_default.is_zero() {
            outcomes.push(WeightedOutcome {
                outcome: UnitOutcome::Defaulted { at: period },
                probability: &survival * &p_default,
            });
        }
        if !p_prepay.is_zero() {
            outcomes.push(WeightedOutcome {
                outcome: UnitOutcome::Prepaid { at: period },
                probability: &survival * &p_prepay,
            });
        }
        survival *= Rational::one() - p_default - p_prepay;
        if survival.is_zero() {
            break;
        }
    }
    if !survival.is_zero() {
        outcomes.push(WeightedOutcome {
            outcome: UnitOutcome::Performing,
            probability: survival,
        });
    }
    outcomes
}

/// Enumerate every joint event trajectory of an independent pool, with exact
/// rational probability weights summing to one.
pub fn enumerate_scenarios(pool: &PoolSpec) -> Result<Vec<InflowScenario>> {
    pool.validate()?;
    if pool.dependence != Dependence::Independent {
        return Err(Error::UnsupportedDependence);
    }

    let per_unit: Vec<Vec<WeightedOutcome>> = pool
        .units
        .iter()
        .map(|unit| unit_outcomes(unit, pool.horizon))
        .collect();

    let mut total: u128 = 1;
    for outcomes in &per_unit {
        total = total.saturating_mul(outcomes.len() as u128);
        if total > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                scenarios: total,
                limit: ENUMERATION_LIMIT,
            });
        }
    }

    // Odometer over the per-unit outcome lists, last unit fastest.
    let mut scenarios = Vec::with_capacity(total as usize);
    let mut cursor = vec![0usize; per_unit.len()];
    let mut id: u64 = 0;
    loop {
        let mut outcomes = Vec::with_capacity(per_unit.len());
        let mut weight = Rational::one();
        for (unit_index, &choice) in cursor.iter().enumerate() {
            let picked = &per_unit[unit_index][choice];
            outcomes.push(picked.outcome);
            weight *= picked.probability.clone();
        }
        scenarios.push(assemble_scenario(pool, id, outcomes, Some(weight))?);
        id += 1;

        // Advance the odometer.
        let mut digit = per_unit.len();
        loop {
            if digit == 0 {
                return Ok(scenarios);
            }
            digit -= 1;
            cursor[digit] += 1;
            if cursor[digit] < per_unit[digit].len() {
                break;
            }
            cursor[digit] = 0;
        }
    }
}
