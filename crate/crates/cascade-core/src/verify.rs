//! Independent invariant checks on allocation output.
//!
//! Each check recomputes a structural property from a finished
//! [`PaymentMatrix`] and its inputs, without reusing any of the allocation
//! path that produced it. They back the property and acceptance suites and
//! can audit any run after the fact.

use crate::allocation::PaymentMatrix;
use crate::money::Money;
use crate::rational::Rational;
use crate::structure::{StructureSpec, TierMode};

/// Conservation: for every period, Σ payments + R_{t+1} = F_t + R_t, with
/// non-negative payments and residuals throughout.
pub fn check_conservation(
    matrix: &PaymentMatrix,
    inflows: &[Money],
    initial_residual: Money,
) -> Result<(), String> {
    if inflows.len() != matrix.periods.len() {
        return Err(format!(
            "inflow path has {} periods, matrix has {}",
            inflows.len(),
            matrix.periods.len()
        ));
    }
    let mut residual_in = initial_residual;
    for (period, allocation) in matrix.periods.iter().enumerate() {
        if allocation.residual_after.is_negative() {
            return Err(format!("period {}: negative residual", period));
        }
        if let Some(p) = allocation.payments.iter().position(|p| p.is_negative()) {
            return Err(format!("period {}: negative payment to {}", period, matrix.positions[p]));
        }
        let paid: Money = allocation.payments.iter().copied().sum();
        let left = paid + allocation.residual_after;
        let right = inflows[period] + residual_in;
        if left != right {
            return Err(format!(
                "period {}: paid {} + residual {} != inflow {} + carried {}",
                period, paid, allocation.residual_after, inflows[period], residual_in
            ));
        }
        residual_in = allocation.residual_after;
    }
    Ok(())
}

/// Payment bounds: each payment stays within its due, except that a single
/// residual-diversion target per period may exceed it — and then only with
/// nothing carried and every other position paid exactly in full.
pub fn check_payment_bounds(matrix: &PaymentMatrix) -> Result<(), String> {
    for allocation in &matrix.periods {
        let over: Vec<usize> = (0..allocation.payments.len())
            .filter(|&p| allocation.payments[p] > allocation.dues[p])
            .collect();
        match over.as_slice() {
            [] => {}
            [target] => {
                if !allocation.residual_after.is_zero() {
                    return Err(format!(
                        "period {}: diverted payment with nonzero residual",
                        allocation.period
                    ));
                }
                for p in 0..allocation.payments.len() {
                    if p != *target && allocation.payments[p] != allocation.dues[p] {
                        return Err(format!(
                            "period {}: diversion while {} not fully paid",
                            allocation.period, matrix.positions[p]
                        ));
                    }
                }
            }
            _ => {
                return Err(format!(
                    "period {}: multiple positions paid beyond their dues",
                    allocation.period
                ))
            }
        }
    }
    Ok(())
}

/// Priority consistency under the effective tier order of each period.
///
/// Within a sequential tier, a positive payment to a member means every
/// more-senior member received its full due. Across tiers, any funds in a
/// lower tier mean every claiming member of the higher tiers was paid in
/// full (zero-weight pro-rata members hold no claim on their tier's split).
pub fn check_priority_consistency(
    spec: &StructureSpec,
    matrix: &PaymentMatrix,
) -> Result<(), String> {
    for allocation in &matrix.periods {
        let mut higher_tiers_full = true;
        for tier_name in &allocation.effective_tier_order {
            let tier = spec
                .tiers
                .iter()
                .find(|t| &t.name == tier_name)
                .ok_or_else(|| format!("unknown tier `{}` in matrix", tier_name))?;
            let members: Vec<usize> = tier
                .members
                .iter()
                .map(|name| {
                    matrix
                        .position_index(name)
                        .ok_or_else(|| format!("unknown position `{}`", name))
                })
                .collect::<Result<_, _>>()?;

            let tier_receives = members
                .iter()
                .any(|&p| allocation.payments[p] > Money::ZERO);
            if tier_receives && !higher_tiers_full {
                return Err(format!(
                    "period {}: tier `{}` paid while a higher tier was short",
                    allocation.period, tier_name
                ));
            }

            if tier.mode == TierMode::Sequential {
                for (rank, &member) in members.iter().enumerate() {
                    if allocation.payments[member] > Money::ZERO {
                        for &senior in &members[..rank] {
                            if allocation.payments[senior] < allocation.dues[senior] {
                                return Err(format!(
                                    "period {}: `{}` paid before `{}` was full",
                                    allocation.period,
                                    matrix.positions[member],
                                    matrix.positions[senior]
                                ));
                            }
                        }
                    }
                }
            }

            let claiming_full = members.iter().enumerate().all(|(rank, &member)| {
                let claims = match tier.mode {
                    TierMode::Sequential => true,
                    TierMode::ProRata => tier.weights()[rank] > Rational::from_integer(0.into()),
                };
                !claims || allocation.payments[member] >= allocation.dues[member]
            });
            higher_tiers_full = higher_tiers_full && claiming_full;
        }
    }
    Ok(())
}

/// Argwise monotonicity: under a pointwise-dominated inflow pair, cumulative
/// payments to every position never decrease at any horizon.
pub fn check_cumulative_monotonicity(
    low: &PaymentMatrix,
    high: &PaymentMatrix,
) -> Result<(), String> {
    if low.positions != high.positions || low.periods.len() != high.periods.len() {
        return Err("matrices are not comparable".to_string());
    }
    let positions = low.positions.len();
    let mut low_cumulative = vec![Money::ZERO; positions];
    let mut high_cumulative = vec![Money::ZERO; positions];
    for (t, (low_period, high_period)) in low.periods.iter().zip(&high.periods).enumerate() {
        for p in 0..positions {
            low_cumulative[p] += low_period.payments[p];
            high_cumulative[p] += high_period.payments[p];
            if high_cumulative[p] < low_cumulative[p] {
                return Err(format!(
                    "position `{}` cumulative payment dropped under dominating inflows at period {} ({} < {})",
                    low.positions[p], t, high_cumulative[p], low_cumulative[p]
                ));
            }
        }
    }
    Ok(())
}

/// Latching triggers report a monotone non-decreasing value sequence.
pub fn check_latch_monotonicity(
    spec: &StructureSpec,
    matrix: &PaymentMatrix,
) -> Result<(), String> {
    for (index, trigger) in spec.triggers.iter().enumerate() {
        if !trigger.latching {
            continue;
        }
        let mut seen_active = false;
        for allocation in &matrix.periods {
            let active = allocation.trigger_values[index];
            if seen_active && !active {
                return Err(format!(
                    "latching trigger `{}` deactivated at period {}",
                    trigger.name, allocation.period
                ));
            }
            seen_active = seen_active || active;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::run_waterfall;
    use crate::example::{scenario_b_inflows, three_position_example};

    #[test]
    fn worked_example_passes_all_checks() {
        let spec = three_position_example();
        let inflows = scenario_b_inflows();
        let matrix = run_waterfall(&spec, &inflows).unwrap();
        check_conservation(&matrix, &inflows, spec.initial_residual).unwrap();
        check_payment_bounds(&matrix).unwrap();
        check_priority_consistency(&spec, &matrix).unwrap();
        check_latch_monotonicity(&spec, &matrix).unwrap();
    }

    #[test]
    fn doctored_matrix_fails_conservation() {
        let spec = three_position_example();
        let inflows = scenario_b_inflows();
        let mut matrix = run_waterfall(&spec, &inflows).unwrap();
        matrix.periods[1].payments[2] += crate::money::money(1);
        assert!(check_conservation(&matrix, &inflows, spec.initial_residual).is_err());
    }

    #[test]
    fn doctored_matrix_fails_priority() {
        let spec = three_position_example();
        let inflows = scenario_b_inflows();
        let mut matrix = run_waterfall(&spec, &inflows).unwrap();
        // Pay junior in the shock period while senior is short.
        matrix.periods[1].payments[1] -= crate::money::money(1);
        matrix.periods[1].payments[2] += crate::money::money(1);
        assert!(check_priority_consistency(&spec, &matrix).is_err());
    }
}
