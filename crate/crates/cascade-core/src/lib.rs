//! Cash-flow allocation engine for contractual waterfalls.
//!
//! The crate is organised around the pipeline the problem naturally splits
//! into:
//!
//! * [`structure`] — contractual objects: positions, tiers, triggers, rules,
//!   the structure specification and its validation, per-scenario state.
//! * [`allocation`] — the deterministic allocation operator: sequential and
//!   pro-rata splits, trigger-switched tier orderings, full waterfall runs.
//! * [`inflow`] — stochastic inflow scenarios from a pool of cash-flow
//!   generating units, with exact enumeration for small pools.
//! * [`metrics`] — expected payments, present values, loss distributions,
//!   and notional-sweep sensitivities over fixed scenario sets.
//! * [`design`] — grid and seeded random search over structural parameters
//!   against one shared scenario set.
//! * [`io`] — file formats (JSON specs, CSV paths and tables) and the run
//!   manifest.
//!
//! Money is an exact integer in minor units throughout; every conservation
//! statement in the engine is an equality, not a tolerance.

pub mod allocation;
pub mod corpus;
pub mod design;
pub mod error;
pub mod example;
pub mod inflow;
pub mod io;
pub mod metrics;
pub mod money;
pub mod rational;
pub mod structure;
pub mod verify;

pub use allocation::{
    allocate_period, allocate_pro_rata, allocate_sequential, run_waterfall,
    run_waterfall_scenario, PaymentMatrix, PeriodAllocation,
};
pub use error::{Error, Result, ValidationIssue};
pub use inflow::{
    aggregate_inflows, enumerate_scenarios, sample_scenario, sample_scenarios, Dependence,
    Hazard, InflowScenario, PoolSpec, Unit, UnitOutcome,
};
pub use metrics::{
    cumulative_loss, expected_payments, loss_distribution, present_value, thickness_sensitivity,
    DiscountCurve, LossDistribution, MetricReport,
};
pub use money::{money, Money};
pub use rational::Rational;
pub use structure::{
    derive_dues, evaluate_trigger, validate_spec, Comparator, ContractParams, Position,
    PositionKind, Rule, RuleCondition, RuleEffect, StructureSpec, StructureState, Tier, TierMode,
    Trigger, TriggerMetric,
};
