//! Valuation and risk measures over scenario-dependent payment matrices.
//!
//! Aggregation is exact for as long as possible: payment sums accumulate in
//! integers (or exact rationals when scenario weights are present) and a
//! single final division produces the real-valued estimate. Present values
//! are the one deliberately floating-point quantity, since discount factors
//! are inherently real.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::allocation::{run_waterfall_scenario, PaymentMatrix};
use crate::error::{Error, Result};
use crate::inflow::InflowScenario;
use crate::money::Money;
use crate::rational::Rational;
use crate::structure::StructureSpec;

/// Discount factors per period, constrained to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountCurve {
    pub factors: Vec<f64>,
}

impl DiscountCurve {
    /// Zero-discount curve (`d ≡ 1`) over the given number of periods.
    pub fn flat(periods: usize) -> Self {
        DiscountCurve {
            factors: vec![1.0; periods],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &factor in &self.factors {
            if !(0.0..=1.0).contains(&factor) || factor.is_nan() {
                return Err(Error::BadLevel(factor));
            }
        }
        Ok(())
    }
}

/// Loss statistics for one position over a scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub expected_loss: f64,
    pub shortfall_probability: f64,
    /// Nearest-rank quantiles, one per requested level.
    pub quantiles: Vec<QuantilePoint>,
    /// Per-scenario loss sample, in matrix order.
    pub samples: Vec<Money>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub level: f64,
    pub value: Money,
}

/// Full per-position report: expected payment path, valuation, losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub positions: Vec<PositionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionMetrics {
    pub name: String,
    pub expected_payments: Vec<f64>,
    pub present_value: f64,
    pub expected_loss: f64,
    pub shortfall_probability: f64,
    pub quantiles: Vec<QuantilePoint>,
    pub loss_samples: Vec<Money>,
}

fn check_shape(matrices: &[PaymentMatrix]) -> Result<(usize, usize)> {
    let first = matrices.first().ok_or(Error::EmptyInput("payment matrices"))?;
    let positions = first.positions.len();
    let periods = first.periods.len();
    for (row, matrix) in matrices.iter().enumerate() {
        if matrix.positions != first.positions {
            return Err(Error::RaggedInput {
                row,
                expected: positions,
                got: matrix.positions.len(),
            });
        }
        if matrix.periods.len() != periods {
            return Err(Error::RaggedInput {
                row,
                expected: periods,
                got: matrix.periods.len(),
            });
        }
    }
    Ok((positions, periods))
}

fn check_weights(weights: Option<&[Rational]>, count: usize) -> Result<()> {
    if let Some(weights) = weights {
        if weights.len() != count {
            return Err(Error::WeightMismatch {
                expected: count,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| w < &Rational::zero())
            || !crate::rational::sums_to_one(weights)
        {
            return Err(Error::BadWeights);
        }
    }
    Ok(())
}

/// Exact expected payment paths: one rational per (position, period).
///
/// Without weights this is the arithmetic mean over matrices; with weights
/// (enumeration mode) the probability-weighted sum.
pub fn expected_payments_exact(
    matrices: &[PaymentMatrix],
    weights: Option<&[Rational]>,
) -> Result<Vec<Vec<Rational>>> {
    let (positions, periods) = check_shape(matrices)?;
    check_weights(weights, matrices.len())?;

    match weights {
        None => {
            // Exact integer accumulation, one division at the end.
            let mut sums = vec![vec![0i128; periods]; positions];
            for matrix in matrices {
                for (t, allocation) in matrix.periods.iter().enumerate() {
                    for (p, payment) in allocation.payments.iter().enumerate() {
                        sums[p][t] += payment.minor() as i128;
                    }
                }
            }
            let count = BigInt::from(matrices.len());
            Ok(sums
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|total| Rational::new(BigInt::from(total), count.clone()))
                        .collect()
                })
                .collect())
        }
        Some(weights) => {
            let mut sums = vec![vec![Rational::zero(); periods]; positions];
            for (matrix, weight) in matrices.iter().zip(weights) {
                for (t, allocation) in matrix.periods.iter().enumerate() {
                    for (p, payment) in allocation.payments.iter().enumerate() {
                        sums[p][t] += weight * Rational::from_integer(payment.minor().into());
                    }
                }
            }
            Ok(sums)
        }
    }
}

/// Expected payment paths as reals; the exact accumulation of
/// [`expected_payments_exact`] converted at the very end.
pub fn expected_payments(
    matrices: &[PaymentMatrix],
    weights: Option<&[Rational]>,
) -> Result<Vec<Vec<f64>>> {
    Ok(expected_payments_exact(matrices, weights)?
        .into_iter()
        .map(|row| row.into_iter().map(|v| rational_to_f64(&v)).collect())
        .collect())
}

fn rational_to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Present value of an expected payment path under a discount curve.
pub fn present_value(expected_path: &[f64], curve: &DiscountCurve) -> Result<f64> {
    curve.validate()?;
    if expected_path.len() != curve.factors.len() {
        return Err(Error::LengthMismatch {
            expected: curve.factors.len(),
            got: expected_path.len(),
        });
    }
    Ok(expected_path
        .iter()
        .zip(&curve.factors)
        .map(|(payment, factor)| payment * factor)
        .sum())
}

/// Cumulative loss of one position under one scenario: Σ_t (due − paid)⁺.
pub fn cumulative_loss(matrix: &PaymentMatrix, position: &str) -> Result<Money> {
    let index = matrix
        .position_index(position)
        .ok_or_else(|| Error::UnknownPosition(position.to_string()))?;
    Ok(matrix
        .periods
        .iter()
        .map(|p| (p.dues[index] - p.payments[index]).positive_part())
        .sum())
}

fn loss_samples(matrices: &[PaymentMatrix], position: usize) -> Vec<Money> {
    matrices
        .iter()
        .map(|matrix| {
            matrix
                .periods
                .iter()
                .map(|p| (p.dues[position] - p.payments[position]).positive_part())
                .sum()
        })
        .collect()
}

fn effective_weights(weights: Option<&[Rational]>, count: usize) -> Vec<Rational> {
    match weights {
        Some(weights) => weights.to_vec(),
        None => {
            let each = Rational::new(BigInt::one(), BigInt::from(count));
            vec![each; count]
        }
    }
}

/// Nearest-rank quantile on a weighted empirical distribution: the smallest
/// sample value whose cumulative weight reaches the level. Lower tie-break
/// comes from taking the first qualifying value in ascending order.
fn nearest_rank_quantile(
    sorted: &[(Money, Rational)],
    level: &Rational,
) -> Money {
    let mut cumulative = Rational::zero();
    for (value, weight) in sorted {
        cumulative += weight.clone();
        if &cumulative >= level {
            return *value;
        }
    }
    // Total mass is 1 and levels are < 1, so this is unreachable on valid
    // input; fall back to the maximum.
    sorted.last().map(|(v, _)| *v).unwrap_or(Money::ZERO)
}

fn convert_levels(levels: &[f64]) -> Result<Vec<(f64, Rational)>> {
    levels
        .iter()
        .map(|&level| {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::BadLevel(level));
            }
            let exact = BigRational::from_float(level).ok_or(Error::BadLevel(level))?;
            Ok((level, exact))
        })
        .collect()
}

/// Loss distribution per position: expected loss, shortfall probability, and
/// nearest-rank quantiles at the requested levels.
pub fn loss_distribution(
    matrices: &[PaymentMatrix],
    weights: Option<&[Rational]>,
    levels: &[f64],
) -> Result<Vec<LossDistribution>> {
    let (positions, _) = check_shape(matrices)?;
    check_weights(weights, matrices.len())?;
    let levels = convert_levels(levels)?;
    let weights = effective_weights(weights, matrices.len());

    (0..positions)
        .map(|position| {
            let samples = loss_samples(matrices, position);

            let mut expected = Rational::zero();
            let mut shortfall_mass = Rational::zero();
            for (loss, weight) in samples.iter().zip(&weights) {
                expected += weight * Rational::from_integer(loss.minor().into());
                if *loss > Money::ZERO {
                    shortfall_mass += weight.clone();
                }
            }

            let mut sorted: Vec<(Money, Rational)> = samples
                .iter()
                .copied()
                .zip(weights.iter().cloned())
                .collect();
            sorted.sort_by_key(|(value, _)| *value);

            let quantiles = levels
                .iter()
                .map(|(level, exact)| QuantilePoint {
                    level: *level,
                    value: nearest_rank_quantile(&sorted, exact),
                })
                .collect();

            Ok(LossDistribution {
                expected_loss: rational_to_f64(&expected),
                shortfall_probability: rational_to_f64(&shortfall_mass),
                quantiles,
                samples,
            })
        })
        .collect()
}

/// Assemble the full report for a scenario set.
pub fn build_report(
    matrices: &[PaymentMatrix],
    weights: Option<&[Rational]>,
    curve: &DiscountCurve,
    levels: &[f64],
) -> Result<MetricReport> {
    let paths = expected_payments(matrices, weights)?;
    let losses = loss_distribution(matrices, weights, levels)?;
    let names = &matrices[0].positions;

    let positions = names
        .iter()
        .zip(paths)
        .zip(losses)
        .map(|((name, path), loss)| {
            let pv = present_value(&path, curve)?;
            Ok(PositionMetrics {
                name: name.clone(),
                expected_payments: path,
                present_value: pv,
                expected_loss: loss.expected_loss,
                shortfall_probability: loss.shortfall_probability,
                quantiles: loss.quantiles,
                loss_samples: loss.samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MetricReport { positions })
}

/// Run a fixed scenario set through a structure.
///
/// The scenario set is reused as-is (common random numbers); only the
/// allocation differs between calls with different specs.
pub fn run_scenarios(
    spec: &StructureSpec,
    scenarios: &[InflowScenario],
) -> Result<Vec<PaymentMatrix>> {
    use rayon::prelude::*;
    scenarios
        .par_iter()
        .map(|scenario| {
            run_waterfall_scenario(
                spec,
                &scenario.aggregate,
                Some(&scenario.pool_losses),
                scenario.id,
            )
        })
        .collect()
}

/// Scenario weights when every scenario carries one (enumeration mode).
pub fn scenario_weights(scenarios: &[InflowScenario]) -> Option<Vec<Rational>> {
    scenarios
        .iter()
        .map(|s| s.weight.clone())
        .collect::<Option<Vec<_>>>()
}

/// One point of a notional sweep.
#[derive(Debug, Clone)]
pub struct ThicknessPoint {
    pub notional: Money,
    /// Loss distributions for every position at this grid point.
    pub distributions: Vec<LossDistribution>,
    /// Expected payment paths for every position at this grid point.
    pub expected_payments: Vec<Vec<f64>>,
}

/// Sweep a position's notional across a grid, re-running the allocation on
/// the identical scenario set at each point.
pub fn thickness_sensitivity(
    spec: &StructureSpec,
    scenarios: &[InflowScenario],
    position: &str,
    grid: &[Money],
    levels: &[f64],
) -> Result<Vec<ThicknessPoint>> {
    let index = spec
        .position_index(position)
        .ok_or_else(|| Error::UnknownPosition(position.to_string()))?;
    if scenarios.is_empty() {
        return Err(Error::EmptyInput("scenario set"));
    }
    let weights = scenario_weights(scenarios);

    grid.iter()
        .map(|&notional| {
            if notional.is_negative() {
                return Err(Error::NegativeInput {
                    context: format!("grid notional {}", notional),
                });
            }
            let mut point_spec = spec.clone();
            point_spec.positions[index].notional = notional;
            point_spec.validate().map_err(Error::Validation)?;

            let matrices = run_scenarios(&point_spec, scenarios)?;
            let distributions = loss_distribution(&matrices, weights.as_deref(), levels)?;
            let expected = expected_payments(&matrices, weights.as_deref())?;
            Ok(ThicknessPoint {
                notional,
                distributions,
                expected_payments: expected,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::run_waterfall;
    use crate::example::{scenario_a_inflows, scenario_b_inflows, three_position_example};
    use crate::inflow::{Dependence, Hazard, PoolSpec, Unit};
    use crate::money::money;
    use crate::rational::parse_decimal;

    fn scenario_a_matrix() -> PaymentMatrix {
        run_waterfall(&three_position_example(), &scenario_a_inflows()).unwrap()
    }

    fn scenario_b_matrix() -> PaymentMatrix {
        run_waterfall(&three_position_example(), &scenario_b_inflows()).unwrap()
    }

    #[test]
    fn single_matrix_expectation_is_the_payment_path() {
        let paths = expected_payments(&[scenario_a_matrix()], None).unwrap();
        // senior is position index 1
        assert_eq!(paths[1], vec![40.0, 40.0, 40.0]);
    }

    #[test]
    fn two_matrix_expectation_is_the_elementwise_mean() {
        let paths = expected_payments(&[scenario_a_matrix(), scenario_b_matrix()], None).unwrap();
        // junior pays 30/30/30 and 30/0/5 → mean 30/15/17.5
        assert_eq!(paths[2], vec![30.0, 15.0, 17.5]);
    }

    #[test]
    fn weighted_expectation_matches_hand_mix() {
        let weights = vec![
            parse_decimal("0.8").unwrap(),
            parse_decimal("0.2").unwrap(),
        ];
        let paths =
            expected_payments(&[scenario_a_matrix(), scenario_b_matrix()], Some(&weights))
                .unwrap();
        // senior period 1: 0.8·40 + 0.2·30 = 38
        assert_eq!(paths[1][1], 38.0);
    }

    #[test]
    fn empty_input_and_weight_mismatch_are_rejected() {
        assert_eq!(
            expected_payments(&[], None).unwrap_err().code(),
            "EmptyInput"
        );
        let weights = vec![parse_decimal("1").unwrap()];
        assert_eq!(
            expected_payments(&[scenario_a_matrix(), scenario_b_matrix()], Some(&weights))
                .unwrap_err()
                .code(),
            "WeightMismatch"
        );
    }

    #[test]
    fn present_value_sums_under_flat_curve() {
        let paths = expected_payments(&[scenario_a_matrix()], None).unwrap();
        let pv = present_value(&paths[1], &DiscountCurve::flat(3)).unwrap();
        assert_eq!(pv, 120.0);
    }

    #[test]
    fn present_value_of_zero_path_is_zero() {
        let pv = present_value(&[0.0, 0.0], &DiscountCurve::flat(2)).unwrap();
        assert_eq!(pv, 0.0);
    }

    #[test]
    fn present_value_discounts_later_periods() {
        let curve = DiscountCurve {
            factors: vec![1.0, 0.9, 0.8],
        };
        let pv = present_value(&[100.0, 0.0, 0.0], &curve).unwrap();
        assert_eq!(pv, 100.0);
    }

    #[test]
    fn present_value_checks_lengths_and_factors() {
        assert_eq!(
            present_value(&[1.0, 2.0], &DiscountCurve::flat(3))
                .unwrap_err()
                .code(),
            "LengthMismatch"
        );
        let bad = DiscountCurve {
            factors: vec![1.2],
        };
        assert!(present_value(&[1.0], &bad).is_err());
    }

    #[test]
    fn shock_scenario_losses_match_hand_computation() {
        let matrix = scenario_b_matrix();
        // senior: (40−30)⁺ + 0 + 0 = 10
        assert_eq!(cumulative_loss(&matrix, "senior").unwrap(), money(10));
        // junior: 0 + (30−0)⁺ + (30−5)⁺ = 55
        assert_eq!(cumulative_loss(&matrix, "junior").unwrap(), money(55));
        // cost is fully paid throughout
        assert_eq!(cumulative_loss(&matrix, "cost").unwrap(), Money::ZERO);
    }

    #[test]
    fn unknown_position_is_reported() {
        let err = cumulative_loss(&scenario_a_matrix(), "ghost").unwrap_err();
        assert_eq!(err.code(), "UnknownPosition");
    }

    #[test]
    fn point_mass_distribution() {
        let stats = loss_distribution(&[scenario_b_matrix()], None, &[0.5, 0.99]).unwrap();
        let senior = &stats[1];
        assert_eq!(senior.expected_loss, 10.0);
        assert_eq!(senior.shortfall_probability, 1.0);
        assert!(senior.quantiles.iter().all(|q| q.value == money(10)));
    }

    #[test]
    fn two_point_distribution_nearest_rank() {
        // Losses {0, 10} with equal weight: EL 5, Pr 0.5, q(0.5)=0, q(0.9)=10.
        let stats = loss_distribution(
            &[scenario_a_matrix(), scenario_b_matrix()],
            None,
            &[0.5, 0.9],
        )
        .unwrap();
        let senior = &stats[1];
        assert_eq!(senior.expected_loss, 5.0);
        assert_eq!(senior.shortfall_probability, 0.5);
        assert_eq!(senior.quantiles[0].value, Money::ZERO);
        assert_eq!(senior.quantiles[1].value, money(10));
    }

    #[test]
    fn quantiles_are_monotone_in_level() {
        let levels = [0.05, 0.25, 0.5, 0.75, 0.9, 0.99];
        let stats = loss_distribution(
            &[scenario_a_matrix(), scenario_b_matrix()],
            None,
            &levels,
        )
        .unwrap();
        for position in &stats {
            for pair in position.quantiles.windows(2) {
                assert!(pair[0].value <= pair[1].value);
            }
        }
    }

    #[test]
    fn bad_levels_are_rejected() {
        let err = loss_distribution(&[scenario_a_matrix()], None, &[0.0]).unwrap_err();
        assert_eq!(err.code(), "BadLevel");
        let err = loss_distribution(&[scenario_a_matrix()], None, &[1.0]).unwrap_err();
        assert_eq!(err.code(), "BadLevel");
    }

    #[test]
    fn loss_bounded_by_total_dues() {
        let matrix = scenario_b_matrix();
        for name in ["cost", "senior", "junior"] {
            let index = matrix.position_index(name).unwrap();
            let total_due: Money = matrix.periods.iter().map(|p| p.dues[index]).sum();
            assert!(cumulative_loss(&matrix, name).unwrap() <= total_due);
        }
    }

    fn bernoulli_pool() -> PoolSpec {
        PoolSpec {
            horizon: 1,
            dependence: Dependence::Independent,
            units: vec![Unit {
                id: "u".to_string(),
                baseline: vec![money(10)],
                outstanding_principal: money(100),
                default_hazard: Hazard::Flat(2_000),
                prepay_hazard: Hazard::Flat(0),
                recovery_rate_bps: 0,
                recovery_lag: 0,
            }],
        }
    }

    /// Single-position structure paired with the Bernoulli pool.
    fn bernoulli_structure() -> StructureSpec {
        use crate::structure::{ContractParams, Position, PositionKind, Tier, TierMode};
        use std::collections::BTreeMap;
        StructureSpec {
            name: "bernoulli".to_string(),
            horizon: 1,
            initial_residual: Money::ZERO,
            positions: vec![Position {
                name: "note".to_string(),
                kind: PositionKind::Note,
                notional: money(10),
                priority_rank: 0,
                maturity: None,
                contract: ContractParams::default(),
                due_schedule: Some(BTreeMap::from([(0usize, money(10))])),
            }],
            tiers: vec![Tier {
                name: "only".to_string(),
                mode: TierMode::Sequential,
                members: vec!["note".to_string()],
                weights: None,
            }],
            triggers: vec![],
            rules: vec![],
        }
    }

    #[test]
    fn enumeration_weighted_metrics_are_exact() {
        let pool = bernoulli_pool();
        let spec = bernoulli_structure();
        let scenarios = crate::inflow::enumerate_scenarios(&pool).unwrap();
        let matrices = run_scenarios(&spec, &scenarios).unwrap();
        let weights = scenario_weights(&scenarios).unwrap();

        // 0.8 of the mass pays 10, 0.2 pays 0 → E[P] = 8 exactly.
        let exact = expected_payments_exact(&matrices, Some(&weights)).unwrap();
        assert_eq!(exact[0][0], parse_decimal("8").unwrap());

        let stats = loss_distribution(&matrices, Some(&weights), &[0.5, 0.9]).unwrap();
        assert_eq!(stats[0].expected_loss, 2.0);
        assert_eq!(stats[0].shortfall_probability, 0.2);
        // q(0.5) = 0 (cumulative 0.8 at loss 0), q(0.9) = 10.
        assert_eq!(stats[0].quantiles[0].value, Money::ZERO);
        assert_eq!(stats[0].quantiles[1].value, money(10));
    }

    #[test]
    fn single_point_sweep_equals_plain_distribution() {
        let pool = bernoulli_pool();
        let spec = bernoulli_structure();
        let scenarios = crate::inflow::enumerate_scenarios(&pool).unwrap();
        let matrices = run_scenarios(&spec, &scenarios).unwrap();
        let weights = scenario_weights(&scenarios);
        let direct = loss_distribution(&matrices, weights.as_deref(), &[0.9]).unwrap();

        let sweep = thickness_sensitivity(
            &spec,
            &scenarios,
            "note",
            &[spec.positions[0].notional],
            &[0.9],
        )
        .unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].distributions, direct);
    }

    #[test]
    fn oversized_senior_starves_junior() {
        use crate::structure::{ContractParams, Position, PositionKind, Tier, TierMode};
        // Derived dues: senior accrues 100% of notional per period, junior
        // owes a fixed 10. A senior notional beyond the pool's total flow
        // absorbs everything.
        let spec = StructureSpec {
            name: "starved".to_string(),
            horizon: 1,
            initial_residual: Money::ZERO,
            positions: vec![
                Position {
                    name: "senior".to_string(),
                    kind: PositionKind::Note,
                    notional: money(5),
                    priority_rank: 0,
                    maturity: None,
                    contract: ContractParams {
                        rate_bps: 10_000,
                        ..ContractParams::default()
                    },
                    due_schedule: None,
                },
                Position {
                    name: "junior".to_string(),
                    kind: PositionKind::Note,
                    notional: money(10),
                    priority_rank: 1,
                    maturity: None,
                    contract: ContractParams {
                        rate_bps: 10_000,
                        ..ContractParams::default()
                    },
                    due_schedule: None,
                },
            ],
            tiers: vec![Tier {
                name: "waterfall".to_string(),
                mode: TierMode::Sequential,
                members: vec!["senior".to_string(), "junior".to_string()],
                weights: None,
            }],
            triggers: vec![],
            rules: vec![],
        };
        let scenarios = crate::inflow::enumerate_scenarios(&bernoulli_pool()).unwrap();
        let sweep =
            thickness_sensitivity(&spec, &scenarios, "senior", &[money(1_000)], &[0.5]).unwrap();
        // Junior expected payment collapses to zero at the oversized point.
        assert!(sweep[0].expected_payments[1].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn sweep_varies_only_through_allocation() {
        // Two identical grid points produce identical outputs: the scenario
        // set is shared, so any difference could only come from allocation.
        let spec = bernoulli_structure();
        let scenarios = crate::inflow::enumerate_scenarios(&bernoulli_pool()).unwrap();
        let sweep = thickness_sensitivity(
            &spec,
            &scenarios,
            "note",
            &[money(10), money(10)],
            &[0.5],
        )
        .unwrap();
        assert_eq!(sweep[0].distributions, sweep[1].distributions);
        assert_eq!(sweep[0].expected_payments, sweep[1].expected_payments);
    }
}
