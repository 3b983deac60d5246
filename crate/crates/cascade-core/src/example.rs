//! The bundled three-position reference structure.
//!
//! A minimal cost / senior / junior waterfall over three periods with fixed
//! dues of 5 / 40 / 30 per period, paid strictly sequentially. It doubles as
//! the golden fixture for the acceptance suite and as the output of
//! `cascade example`.

use std::collections::BTreeMap;

use crate::money::{money, Money};
use crate::structure::{
    ContractParams, Position, PositionKind, StructureSpec, Tier, TierMode,
};

fn flat_schedule(amount: i64, horizon: usize) -> BTreeMap<usize, Money> {
    (0..horizon).map(|t| (t, money(amount))).collect()
}

/// Build the three-position example structure (horizon 3, dues 5/40/30).
pub fn three_position_example() -> StructureSpec {
    let horizon = 3;
    StructureSpec {
        name: "three-position-example".to_string(),
        horizon,
        initial_residual: Money::ZERO,
        positions: vec![
            Position {
                name: "cost".to_string(),
                kind: PositionKind::Cost,
                notional: Money::ZERO,
                priority_rank: 0,
                maturity: None,
                contract: ContractParams::default(),
                due_schedule: Some(flat_schedule(5, horizon)),
            },
            Position {
                name: "senior".to_string(),
                kind: PositionKind::Note,
                notional: money(120),
                priority_rank: 1,
                maturity: None,
                contract: ContractParams::default(),
                due_schedule: Some(flat_schedule(40, horizon)),
            },
            Position {
                name: "junior".to_string(),
                kind: PositionKind::Note,
                notional: money(90),
                priority_rank: 2,
                maturity: None,
                contract: ContractParams::default(),
                due_schedule: Some(flat_schedule(30, horizon)),
            },
        ],
        tiers: vec![Tier {
            name: "waterfall".to_string(),
            mode: TierMode::Sequential,
            members: vec!["cost".to_string(), "senior".to_string(), "junior".to_string()],
            weights: None,
        }],
        triggers: vec![],
        rules: vec![],
    }
}

/// Inflow path of the performing scenario: 80 per period.
pub fn scenario_a_inflows() -> Vec<Money> {
    vec![money(80), money(80), money(80)]
}

/// Inflow path with the period-2 shock: 80, 30, 50.
pub fn scenario_b_inflows() -> Vec<Money> {
    vec![money(80), money(30), money(50)]
}
