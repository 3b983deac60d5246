//! The deterministic allocation operator.
//!
//! Given available funds, dues, and the effective tier ordering, funds are
//! applied senior-first: sequentially inside sequential tiers, by an
//! iterative capped largest-remainder split inside pro-rata tiers, with the
//! leftover of each tier handed to the next. Whatever survives the last tier
//! becomes the residual carried into the following period. Everything is
//! exact integer arithmetic: conservation of funds holds with `==`.

use num::{BigInt, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::rational::Rational;
use crate::structure::{
    derive_dues, evaluate_trigger, RuleCondition, RuleEffect, StructureSpec, StructureState,
    TierMode,
};

/// One period's complete allocation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodAllocation {
    pub period: usize,
    /// Total available funds A_t = F_t + R_t.
    pub available: Money,
    /// Payments per position, parallel to `spec.positions`.
    pub payments: Vec<Money>,
    /// Effective dues per position for the period, parallel to payments.
    pub dues: Vec<Money>,
    /// Residual carried out of the period.
    pub residual_after: Money,
    /// Tier names in the order actually processed.
    pub effective_tier_order: Vec<String>,
    /// Evaluated trigger values, parallel to `spec.triggers`.
    pub trigger_values: Vec<bool>,
}

/// Full run of the operator over one inflow path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentMatrix {
    pub scenario_id: u64,
    /// Position names in spec order, for self-contained reporting.
    pub positions: Vec<String>,
    pub periods: Vec<PeriodAllocation>,
    pub final_state: StructureState,
}

impl PaymentMatrix {
    pub fn position_index(&self, name: &str) -> Option<usize> {
        self.positions.iter().position(|p| p == name)
    }

    /// Payments to one position across all periods.
    pub fn payment_path(&self, position: usize) -> impl Iterator<Item = Money> + '_ {
        self.periods.iter().map(move |p| p.payments[position])
    }
}

/// Pay dues strictly in order: each position receives `min(due, remaining)`.
pub fn allocate_sequential(available: Money, dues: &[Money]) -> Result<(Vec<Money>, Money)> {
    ensure_non_negative(available, dues)?;
    let mut remaining = available;
    let payments = dues
        .iter()
        .map(|&due| {
            let paid = due.min(remaining);
            remaining -= paid;
            paid
        })
        .collect();
    Ok((payments, remaining))
}

/// Split funds proportionally with caps at dues.
///
/// Each round distributes the open budget across uncapped members by their
/// renormalised weights using a largest-remainder integer split (ties to the
/// lower index), caps every member at its due, and feeds the freed excess
/// into the next round. Terminates when no funds remain or every member is
/// capped; leftovers are returned for carry.
pub fn allocate_pro_rata(
    available: Money,
    dues: &[Money],
    weights: &[Rational],
) -> Result<(Vec<Money>, Money)> {
    ensure_non_negative(available, dues)?;
    if weights.len() != dues.len()
        || weights.iter().any(|w| w < &Rational::zero())
        || !crate::rational::sums_to_one(weights)
    {
        return Err(Error::BadWeights);
    }

    let mut paid = vec![Money::ZERO; dues.len()];
    let mut budget = available;
    // Members still able to receive: positive weight and headroom left.
    let mut active: Vec<usize> = (0..dues.len())
        .filter(|&i| weights[i] > Rational::zero())
        .collect();

    while budget > Money::ZERO && !active.is_empty() {
        let shares = largest_remainder_split(budget, &active, weights);
        let mut freed = Money::ZERO;
        let mut still_active = Vec::with_capacity(active.len());
        for (&index, share) in active.iter().zip(shares) {
            let headroom = dues[index] - paid[index];
            let grant = share.min(headroom);
            paid[index] += grant;
            freed += share - grant;
            if paid[index] < dues[index] {
                still_active.push(index);
            }
        }
        if freed.is_zero() {
            break;
        }
        budget = freed;
        active = still_active;
    }

    let total: Money = paid.iter().copied().sum();
    Ok((paid, available - total))
}

/// Largest-remainder apportionment of `budget` across `active` members,
/// proportional to their (renormalised) weights. The result sums to `budget`
/// exactly; leftover units go to the largest fractional remainders, lowest
/// index first on ties.
fn largest_remainder_split(budget: Money, active: &[usize], weights: &[Rational]) -> Vec<Money> {
    let total_weight: Rational = active.iter().map(|&i| weights[i].clone()).sum();
    debug_assert!(total_weight > Rational::zero());
    let budget_int = Rational::from_integer(BigInt::from(budget.minor()));

    let mut floors = Vec::with_capacity(active.len());
    let mut remainders = Vec::with_capacity(active.len());
    let mut assigned: i64 = 0;
    for &index in active {
        let quota = &budget_int * &weights[index] / &total_weight;
        let floor = quota.floor();
        let remainder = &quota - &floor;
        let floor_i64 = floor_to_i64(&floor);
        assigned += floor_i64;
        floors.push(floor_i64);
        remainders.push(remainder);
    }

    let mut leftover = budget.minor() - assigned;
    debug_assert!(leftover >= 0 && (leftover as usize) <= active.len());
    let mut order: Vec<usize> = (0..active.len()).collect();
    // Stable sort keeps the lower index first among equal remainders.
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    for position in order {
        if leftover == 0 {
            break;
        }
        floors[position] += 1;
        leftover -= 1;
    }
    floors.into_iter().map(Money::from_minor).collect()
}

fn floor_to_i64(value: &Rational) -> i64 {
    debug_assert!(value.is_integer());
    let digits = value.to_integer();
    i64::try_from(digits).expect("allocation amount exceeds 64-bit minor units")
}

fn ensure_non_negative(available: Money, dues: &[Money]) -> Result<()> {
    if available.is_negative() {
        return Err(Error::NegativeInput {
            context: format!("available funds {}", available),
        });
    }
    if let Some(due) = dues.iter().find(|d| d.is_negative()) {
        return Err(Error::NegativeInput {
            context: format!("due amount {}", due),
        });
    }
    Ok(())
}

/// Effects selected by the rule list for one period.
struct EffectivePolicy {
    tier_order: Vec<usize>,
    divert_residual_to: Option<usize>,
    zero_dues: Vec<bool>,
}

/// Resolve the rule list against evaluated trigger values.
///
/// First matching `use_tier_order` wins; first matching `divert_residual_to`
/// wins; every matching `zero_dues_of` applies. No match leaves the declared
/// tier order and plain residual carry.
fn resolve_rules(
    spec: &StructureSpec,
    trigger_values: &[bool],
) -> Result<EffectivePolicy> {
    let mut tier_order: Option<Vec<usize>> = None;
    let mut divert: Option<usize> = None;
    let mut zero_dues = vec![false; spec.positions.len()];

    for rule in &spec.rules {
        let matches = match &rule.when {
            RuleCondition::Always => true,
            RuleCondition::Trigger(name) => {
                let index = spec
                    .trigger_index(name)
                    .ok_or_else(|| Error::UnknownTrigger(name.clone()))?;
                trigger_values[index]
            }
        };
        if !matches {
            continue;
        }
        match &rule.effect {
            RuleEffect::UseTierOrder(order) => {
                if tier_order.is_none() {
                    let indices = order
                        .iter()
                        .map(|name| {
                            spec.tier_index(name)
                                .ok_or_else(|| Error::UnknownTier(name.clone()))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    tier_order = Some(indices);
                }
            }
            RuleEffect::DivertResidualTo(name) => {
                if divert.is_none() {
                    divert = Some(
                        spec.position_index(name)
                            .ok_or_else(|| Error::UnknownPosition(name.clone()))?,
                    );
                }
            }
            RuleEffect::ZeroDuesOf(name) => {
                let index = spec
                    .position_index(name)
                    .ok_or_else(|| Error::UnknownPosition(name.clone()))?;
                zero_dues[index] = true;
            }
        }
    }

    Ok(EffectivePolicy {
        tier_order: tier_order.unwrap_or_else(|| (0..spec.tiers.len()).collect()),
        divert_residual_to: divert,
        zero_dues,
    })
}

/// Run one period of the waterfall.
///
/// The period opens by booking the realised pool loss and inflow into state,
/// so triggers test information contemporaneous with the cash being
/// allocated; allocation then proceeds under the selected tier order and the
/// state advances (cumulative paid/shortfall, arrears, amortisation,
/// latches, residual chain).
pub fn allocate_period(
    spec: &StructureSpec,
    state: &StructureState,
    inflow: Money,
    pool_loss: Money,
) -> Result<(PeriodAllocation, StructureState)> {
    if inflow.is_negative() {
        return Err(Error::NegativeInput {
            context: format!("inflow {}", inflow),
        });
    }
    if pool_loss.is_negative() {
        return Err(Error::NegativeInput {
            context: format!("pool loss {}", pool_loss),
        });
    }

    let period = state.period;
    let mut state = state.clone();
    state.period_inflow = inflow;
    state.cumulative_pool_loss += pool_loss;

    // Trigger pass on start-of-period state, then record fresh latches.
    let mut trigger_values = Vec::with_capacity(spec.triggers.len());
    for (index, trigger) in spec.triggers.iter().enumerate() {
        let active = evaluate_trigger(trigger, spec, &state, state.latched[index])?;
        if trigger.latching && active {
            state.latched[index] = true;
        }
        trigger_values.push(active);
    }

    let policy = resolve_rules(spec, &trigger_values)?;

    // Effective dues for the period.
    let dues: Vec<Money> = spec
        .positions
        .iter()
        .enumerate()
        .map(|(index, position)| {
            if policy.zero_dues[index] {
                Money::ZERO
            } else {
                derive_dues(position, &state.positions[index], period)
            }
        })
        .collect();

    let available = inflow + state.residual;
    let mut payments = vec![Money::ZERO; spec.positions.len()];
    let mut remaining = available;
    let mut tier_order_names = Vec::with_capacity(spec.tiers.len());

    for &tier_index in &policy.tier_order {
        let tier = &spec.tiers[tier_index];
        tier_order_names.push(tier.name.clone());
        let member_indices: Vec<usize> = tier
            .members
            .iter()
            .map(|name| {
                spec.position_index(name)
                    .ok_or_else(|| Error::UnknownPosition(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let member_dues: Vec<Money> = member_indices.iter().map(|&i| dues[i]).collect();
        let (tier_payments, leftover) = match tier.mode {
            TierMode::Sequential => allocate_sequential(remaining, &member_dues)?,
            TierMode::ProRata => allocate_pro_rata(remaining, &member_dues, tier.weights())?,
        };
        for (&member, paid) in member_indices.iter().zip(tier_payments) {
            payments[member] = paid;
        }
        remaining = leftover;
    }

    // Leftover disposition: carried, unless a divert rule is active.
    let residual_after = match policy.divert_residual_to {
        Some(target) if remaining > Money::ZERO => {
            payments[target] += remaining;
            Money::ZERO
        }
        _ => remaining,
    };

    // Advance state.
    for (index, position) in spec.positions.iter().enumerate() {
        let paid = payments[index];
        let due = dues[index];
        let entry = &mut state.positions[index];
        entry.cumulative_paid += paid;
        entry.cumulative_shortfall += (due - paid).positive_part();
        if position.contract.cumulative_dues && position.due_schedule.is_none() {
            // Arrears track the unpaid part of the effective due (which
            // already includes previously carried arrears). A due suppressed
            // by a zero_dues rule defers carried arrears, it does not
            // forgive them.
            if !policy.zero_dues[index] {
                entry.arrears = (due - paid).positive_part();
            }
        }
        if position.contract.amortizing {
            entry.outstanding_notional = entry.outstanding_notional.saturating_sub_at_zero(paid);
        }
    }
    state.residual = residual_after;
    state.period = period + 1;

    let allocation = PeriodAllocation {
        period,
        available,
        payments,
        dues,
        residual_after,
        effective_tier_order: tier_order_names,
        trigger_values,
    };
    Ok((allocation, state))
}

/// Run the waterfall over a full inflow path with no pool-loss feed.
pub fn run_waterfall(spec: &StructureSpec, inflows: &[Money]) -> Result<PaymentMatrix> {
    run_waterfall_scenario(spec, inflows, None, 0)
}

/// Run the waterfall over a full inflow path, optionally with per-period
/// realised pool losses feeding loss-based triggers.
///
/// Deterministic: identical inputs give bit-identical output.
pub fn run_waterfall_scenario(
    spec: &StructureSpec,
    inflows: &[Money],
    pool_losses: Option<&[Money]>,
    scenario_id: u64,
) -> Result<PaymentMatrix> {
    if inflows.len() != spec.horizon {
        return Err(Error::LengthMismatch {
            expected: spec.horizon,
            got: inflows.len(),
        });
    }
    if let Some(losses) = pool_losses {
        if losses.len() != spec.horizon {
            return Err(Error::LengthMismatch {
                expected: spec.horizon,
                got: losses.len(),
            });
        }
    }

    let mut state = StructureState::initial(spec);
    let mut periods = Vec::with_capacity(spec.horizon);
    for (period, &inflow) in inflows.iter().enumerate() {
        let loss = pool_losses.map_or(Money::ZERO, |l| l[period]);
        let (allocation, next) = allocate_period(spec, &state, inflow, loss)?;
        periods.push(allocation);
        state = next;
    }

    Ok(PaymentMatrix {
        scenario_id,
        positions: spec.positions.iter().map(|p| p.name.clone()).collect(),
        periods,
        final_state: state,
    })
}
