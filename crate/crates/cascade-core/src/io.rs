//! File formats: JSON specifications, CSV paths and tables, run manifests.
//!
//! The JSON schema is closed-world: unknown fields are rejected, amounts
//! must be integers, weights are decimal strings. A structure document that
//! parses is fully described by the documented schema — a typo surfaces as
//! an error, never as silently ignored contract language.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{PaymentMatrix, PeriodAllocation};
use crate::design::{DesignConstraint, EvaluatedPoint, Objective, ParameterAxis, SearchOutcome};
use crate::error::{Error, Result};
use crate::inflow::{InflowScenario, PoolSpec};
use crate::metrics::{DiscountCurve, MetricReport};
use crate::money::Money;
use crate::rational::{self, Rational};
use crate::structure::{StructureSpec, StructureState};

// ── JSON parsing ────────────────────────────────────────────────────

fn from_json_strict<T: DeserializeOwned>(text: &str) -> Result<T> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize(deserializer) {
        Ok(value) => Ok(value),
        Err(err) => {
            let inner = err.inner();
            if inner.is_syntax() || inner.is_eof() {
                Err(Error::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                })
            } else {
                Err(Error::Schema {
                    path: err.path().to_string(),
                    message: inner.to_string(),
                })
            }
        }
    }
}

/// Strict parse of a structure document, then full validation.
pub fn parse_structure(text: &str) -> Result<StructureSpec> {
    let spec: StructureSpec = from_json_strict(text)?;
    spec.validate().map_err(Error::Validation)?;
    Ok(spec)
}

pub fn serialize_structure(spec: &StructureSpec) -> String {
    serde_json::to_string_pretty(spec).expect("structure serialization cannot fail") + "\n"
}

/// Strict parse of a pool document, then validation.
pub fn parse_pool(text: &str) -> Result<PoolSpec> {
    let pool: PoolSpec = from_json_strict(text)?;
    pool.validate()?;
    Ok(pool)
}

pub fn serialize_pool(pool: &PoolSpec) -> String {
    serde_json::to_string_pretty(pool).expect("pool serialization cannot fail") + "\n"
}

/// Design-space document: parameter axes and constraints. The base
/// structure arrives separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub parameters: Vec<ParameterAxis>,
    #[serde(default)]
    pub constraints: Vec<DesignConstraint>,
}

pub fn parse_space(text: &str) -> Result<SpaceFile> {
    from_json_strict(text)
}

pub fn parse_objective(text: &str) -> Result<Objective> {
    from_json_strict(text)
}

// ── CSV: inflow paths ───────────────────────────────────────────────

fn csv_error(line: usize, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

fn parse_amount(field: &str, line: usize) -> Result<Money> {
    let value: i64 = field
        .trim()
        .parse()
        .map_err(|_| csv_error(line, format!("`{}` is not an integer amount", field)))?;
    Ok(Money::from_minor(value))
}

/// Parse `period,amount` rows. Periods must run 0..n contiguously.
pub fn read_inflows(text: &str) -> Result<Vec<Money>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "period,amount" => {}
        Some((_, header)) => {
            return Err(csv_error(1, format!("expected header `period,amount`, got `{}`", header)))
        }
        None => return Err(csv_error(1, "empty file")),
    }
    let mut inflows = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let (period, amount) = line
            .split_once(',')
            .ok_or_else(|| csv_error(number, "expected two comma-separated fields"))?;
        let period: usize = period
            .trim()
            .parse()
            .map_err(|_| csv_error(number, format!("`{}` is not a period index", period)))?;
        if period != inflows.len() {
            return Err(csv_error(
                number,
                format!("periods must be contiguous from 0; expected {}, got {}", inflows.len(), period),
            ));
        }
        let amount = parse_amount(amount, number)?;
        if amount.is_negative() {
            return Err(csv_error(number, "inflow amounts must be non-negative"));
        }
        inflows.push(amount);
    }
    Ok(inflows)
}

pub fn render_inflows(inflows: &[Money]) -> String {
    let mut out = String::from("period,amount\n");
    for (period, amount) in inflows.iter().enumerate() {
        out.push_str(&format!("{},{}\n", period, amount));
    }
    out
}

// ── CSV: discount curves ────────────────────────────────────────────

/// Parse `period,factor` rows into a discount curve.
pub fn read_curve(text: &str) -> Result<DiscountCurve> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "period,factor" => {}
        Some((_, header)) => {
            return Err(csv_error(1, format!("expected header `period,factor`, got `{}`", header)))
        }
        None => return Err(csv_error(1, "empty file")),
    }
    let mut factors = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let (period, factor) = line
            .split_once(',')
            .ok_or_else(|| csv_error(number, "expected two comma-separated fields"))?;
        let period: usize = period
            .trim()
            .parse()
            .map_err(|_| csv_error(number, format!("`{}` is not a period index", period)))?;
        if period != factors.len() {
            return Err(csv_error(number, "periods must be contiguous from 0"));
        }
        let factor: f64 = factor
            .trim()
            .parse()
            .map_err(|_| csv_error(number, format!("`{}` is not a discount factor", factor)))?;
        factors.push(factor);
    }
    let curve = DiscountCurve { factors };
    curve.validate()?;
    Ok(curve)
}

// ── CSV: payment matrices ───────────────────────────────────────────

pub const PAYMENTS_HEADER: &str = "scenario,period,position,due,paid,residual_after";

/// Render payment matrices, one row per (scenario, period, position) in
/// spec position order. Integers only, no exponent notation anywhere.
pub fn render_payments(matrices: &[PaymentMatrix]) -> String {
    let mut out = String::from(PAYMENTS_HEADER);
    out.push('\n');
    for matrix in matrices {
        for period in &matrix.periods {
            for (index, name) in matrix.positions.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    matrix.scenario_id,
                    period.period,
                    name,
                    period.dues[index],
                    period.payments[index],
                    period.residual_after,
                ));
            }
        }
    }
    out
}

/// Rebuild payment matrices from a payments table.
///
/// Only the allocation content (dues, payments, residuals) round-trips; the
/// attached final state is a neutral placeholder, which is all the metrics
/// layer consumes.
pub fn read_payments(text: &str) -> Result<Vec<PaymentMatrix>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == PAYMENTS_HEADER => {}
        Some((_, header)) => {
            return Err(csv_error(1, format!("expected header `{}`, got `{}`", PAYMENTS_HEADER, header)))
        }
        None => return Err(csv_error(1, "empty file")),
    }

    struct Row {
        scenario: u64,
        period: usize,
        position: String,
        due: Money,
        paid: Money,
        residual_after: Money,
    }

    let mut rows = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(csv_error(number, "expected six comma-separated fields"));
        }
        rows.push(Row {
            scenario: fields[0]
                .parse()
                .map_err(|_| csv_error(number, "bad scenario id"))?,
            period: fields[1]
                .parse()
                .map_err(|_| csv_error(number, "bad period index"))?,
            position: fields[2].to_string(),
            due: parse_amount(fields[3], number)?,
            paid: parse_amount(fields[4], number)?,
            residual_after: parse_amount(fields[5], number)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("payments table"));
    }

    let mut matrices: Vec<PaymentMatrix> = Vec::new();
    let mut current: Option<(u64, Vec<String>, Vec<PeriodAllocation>)> = None;

    let flush = |current: Option<(u64, Vec<String>, Vec<PeriodAllocation>)>,
                 matrices: &mut Vec<PaymentMatrix>| {
        if let Some((scenario_id, positions, periods)) = current {
            matrices.push(PaymentMatrix {
                scenario_id,
                positions,
                periods,
                final_state: StructureState {
                    period: 0,
                    residual: Money::ZERO,
                    positions: Vec::new(),
                    cumulative_pool_loss: Money::ZERO,
                    period_inflow: Money::ZERO,
                    latched: Vec::new(),
                },
            });
        }
    };

    for row in rows {
        let start_new = match &current {
            None => true,
            Some((scenario, _, _)) => *scenario != row.scenario,
        };
        if start_new {
            flush(current.take(), &mut matrices);
            current = Some((row.scenario, Vec::new(), Vec::new()));
        }
        let (_, positions, periods) = current.as_mut().expect("current scenario exists");
        if row.period == periods.len() {
            periods.push(PeriodAllocation {
                period: row.period,
                available: Money::ZERO,
                payments: Vec::new(),
                dues: Vec::new(),
                residual_after: row.residual_after,
                effective_tier_order: Vec::new(),
                trigger_values: Vec::new(),
            });
        }
        // Position names are fixed by the first period's rows.
        if periods.len() == 1 && !positions.contains(&row.position) {
            positions.push(row.position.clone());
        }
        match periods.last_mut() {
            Some(allocation) if allocation.period == row.period => {
                allocation.dues.push(row.due);
                allocation.payments.push(row.paid);
                allocation.residual_after = row.residual_after;
            }
            _ => {
                return Err(Error::Csv {
                    line: 0,
                    message: "periods out of order within a scenario".to_string(),
                })
            }
        }
    }
    flush(current, &mut matrices);

    // Shape checks: every period row count equals the position count.
    for matrix in &matrices {
        for period in &matrix.periods {
            if period.payments.len() != matrix.positions.len() {
                return Err(Error::RaggedInput {
                    row: period.period,
                    expected: matrix.positions.len(),
                    got: period.payments.len(),
                });
            }
        }
    }
    Ok(matrices)
}

// ── CSV: scenario paths ─────────────────────────────────────────────

/// Render scenario paths. Enumerated scenarios carry the exact probability
/// weight in a fourth column.
pub fn render_scenarios(scenarios: &[InflowScenario]) -> String {
    let weighted = scenarios.iter().all(|s| s.weight.is_some());
    let mut out = String::from(if weighted {
        "scenario,period,inflow,weight\n"
    } else {
        "scenario,period,inflow\n"
    });
    for scenario in scenarios {
        for (period, inflow) in scenario.aggregate.iter().enumerate() {
            if weighted {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    scenario.id,
                    period,
                    inflow,
                    rational::to_decimal_string(scenario.weight.as_ref().expect("weighted")),
                ));
            } else {
                out.push_str(&format!("{},{},{}\n", scenario.id, period, inflow));
            }
        }
    }
    out
}

/// Scenario weights recovered from a scenarios table, when present.
pub fn read_scenario_weights(text: &str) -> Result<Option<Vec<Rational>>> {
    let mut lines = text.lines().enumerate();
    let weighted = match lines.next() {
        Some((_, header)) if header.trim() == "scenario,period,inflow,weight" => true,
        Some((_, header)) if header.trim() == "scenario,period,inflow" => false,
        Some((_, header)) => {
            return Err(csv_error(1, format!("unrecognised scenarios header `{}`", header)))
        }
        None => return Err(csv_error(1, "empty file")),
    };
    if !weighted {
        return Ok(None);
    }
    let mut weights: Vec<(u64, Rational)> = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let number = index + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(csv_error(number, "expected four comma-separated fields"));
        }
        let scenario: u64 = fields[0]
            .parse()
            .map_err(|_| csv_error(number, "bad scenario id"))?;
        let weight = rational::parse_decimal(fields[3])
            .map_err(|_| csv_error(number, format!("`{}` is not a decimal weight", fields[3])))?;
        match weights.last() {
            Some((last, _)) if *last == scenario => {}
            _ => weights.push((scenario, weight)),
        }
    }
    Ok(Some(weights.into_iter().map(|(_, w)| w).collect()))
}

// ── CSV: sweep tables ───────────────────────────────────────────────

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Render the design-search result table: one row per evaluated point with
/// parameter values, objective, feasibility, and per-constraint slack.
pub fn render_sweep_table(
    axes: &[ParameterAxis],
    constraints: &[DesignConstraint],
    outcome: &SearchOutcome,
) -> String {
    let mut header = String::from("point");
    for axis in axes {
        header.push_str(&format!(",{}", csv_quote(&axis.path_label())));
    }
    header.push_str(",objective,feasible,best");
    for (index, constraint) in constraints.iter().enumerate() {
        header.push_str(&format!(",slack_{}:{}", index, csv_quote(&constraint.describe())));
    }
    header.push_str(",error\n");

    let mut out = header;
    for point in &outcome.points {
        out.push_str(&render_sweep_row(point, constraints.len(), outcome.best));
    }
    out
}

fn render_sweep_row(point: &EvaluatedPoint, constraint_count: usize, best: usize) -> String {
    let mut row = format!("{}", point.index);
    for value in &point.values {
        row.push_str(&format!(",{}", csv_quote(&value.render())));
    }
    match point.objective {
        Some(objective) => row.push_str(&format!(",{}", objective)),
        None => row.push(','),
    }
    row.push_str(&format!(",{}", point.feasible));
    row.push_str(&format!(",{}", point.index == best));
    for index in 0..constraint_count {
        match point.constraints.get(index) {
            Some(status) => row.push_str(&format!(",{}", status.slack)),
            None => row.push(','),
        }
    }
    match &point.error {
        Some(error) => row.push_str(&format!(",{}", csv_quote(error))),
        None => row.push(','),
    }
    row.push('\n');
    row
}

// ── metric reports ──────────────────────────────────────────────────

fn amount_string(value: f64) -> serde_json::Value {
    serde_json::Value::String(format!("{}", value))
}

/// Render a metric report as JSON with amounts as decimal strings.
pub fn report_to_json(report: &MetricReport) -> serde_json::Value {
    let positions: Vec<serde_json::Value> = report
        .positions
        .iter()
        .map(|p| {
            serde_json::json!({
                "name": p.name,
                "expected_payments": p.expected_payments.iter().map(|&v| amount_string(v)).collect::<Vec<_>>(),
                "present_value": amount_string(p.present_value),
                "expected_loss": amount_string(p.expected_loss),
                "shortfall_probability": p.shortfall_probability,
                "quantiles": p.quantiles.iter().map(|q| serde_json::json!({
                    "level": q.level,
                    "value": q.value.to_string(),
                })).collect::<Vec<_>>(),
                "loss_samples": p.loss_samples.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({ "positions": positions })
}

/// Render a metric report as CSV rows `position,metric,index,value`.
pub fn report_to_csv(report: &MetricReport) -> String {
    let mut out = String::from("position,metric,index,value\n");
    for p in &report.positions {
        for (t, value) in p.expected_payments.iter().enumerate() {
            out.push_str(&format!("{},expected_payment,{},{}\n", p.name, t, value));
        }
        out.push_str(&format!("{},present_value,,{}\n", p.name, p.present_value));
        out.push_str(&format!("{},expected_loss,,{}\n", p.name, p.expected_loss));
        out.push_str(&format!(
            "{},shortfall_probability,,{}\n",
            p.name, p.shortfall_probability
        ));
        for q in &p.quantiles {
            out.push_str(&format!("{},quantile_{},,{}\n", p.name, q.level, q.value));
        }
        for (scenario, loss) in p.loss_samples.iter().enumerate() {
            out.push_str(&format!("{},loss_sample,{},{}\n", p.name, scenario, loss));
        }
    }
    out
}

// ── run manifests ───────────────────────────────────────────────────

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Provenance record written alongside outputs: with equal manifests
/// (timestamp aside), outputs are bit-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Input file name → sha256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_count: Option<u64>,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(tool_version: &str, command: &str, inputs: &[(String, &[u8])]) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool_version: tool_version.to_string(),
            command: command.to_string(),
            input_digests: inputs
                .iter()
                .map(|(name, bytes)| (name.clone(), sha256_hex(bytes)))
                .collect(),
            master_seed: None,
            scenario_count: None,
            timestamp_unix,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail") + "\n"
    }
}

/// Write a file atomically: temp sibling, then rename over the target.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let directory = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(directory)?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());
    let tmp = directory.join(format!(".{}.tmp-{}", file_name, std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::run_waterfall;
    use crate::example::{scenario_a_inflows, three_position_example};
    use crate::money::money;

    #[test]
    fn structure_round_trips_through_json() {
        let spec = three_position_example();
        let text = serialize_structure(&spec);
        let parsed = parse_structure(&text).unwrap();
        assert_eq!(parsed, spec);
        // And a second round trip is byte-identical.
        assert_eq!(serialize_structure(&parsed), text);
    }

    #[test]
    fn fractional_amount_is_a_schema_error_with_path() {
        let text = serialize_structure(&three_position_example());
        let bad = text.replace("\"notional\": 120", "\"notional\": 5.5");
        let err = parse_structure(&bad).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert!(path.contains("notional"), "path {}", path),
            other => panic!("expected Schema error, got {:?}", other),
        }
    }

    #[test]
    fn unknown_field_is_rejected_by_name() {
        let text = serialize_structure(&three_position_example());
        let bad = text.replacen('{', "{\n  \"watermark\": 1,", 1);
        let err = parse_structure(&bad).unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("watermark")),
            other => panic!("expected Schema error, got {:?}", other),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_structure("{ \"name\": ").unwrap_err();
        assert_eq!(err.code(), "SyntaxError");
    }

    #[test]
    fn inflow_csv_round_trips() {
        let inflows = vec![money(80), money(30), money(50)];
        let text = render_inflows(&inflows);
        assert_eq!(read_inflows(&text).unwrap(), inflows);
    }

    #[test]
    fn inflow_csv_rejects_gaps_and_garbage() {
        assert!(read_inflows("period,amount\n1,80\n").is_err());
        assert!(read_inflows("period,amount\n0,80.5\n").is_err());
        assert!(read_inflows("period,amount\n0,-3\n").is_err());
        assert!(read_inflows("amount,period\n").is_err());
    }

    #[test]
    fn payments_csv_round_trips_allocation_content() {
        let matrix = run_waterfall(&three_position_example(), &scenario_a_inflows()).unwrap();
        let text = render_payments(std::slice::from_ref(&matrix));
        let parsed = read_payments(&text).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].positions, matrix.positions);
        for (a, b) in parsed[0].periods.iter().zip(&matrix.periods) {
            assert_eq!(a.payments, b.payments);
            assert_eq!(a.dues, b.dues);
            assert_eq!(a.residual_after, b.residual_after);
        }
    }

    #[test]
    fn curve_csv_parses_and_validates() {
        let curve = read_curve("period,factor\n0,1\n1,0.9\n2,0.8\n").unwrap();
        assert_eq!(curve.factors, vec![1.0, 0.9, 0.8]);
        assert!(read_curve("period,factor\n0,1.5\n").is_err());
    }

    #[test]
    fn scenario_weights_round_trip() {
        let scenarios = crate::inflow::enumerate_scenarios(&crate::inflow::PoolSpec {
            horizon: 1,
            dependence: crate::inflow::Dependence::Independent,
            units: vec![crate::inflow::Unit {
                id: "u".to_string(),
                baseline: vec![money(10)],
                outstanding_principal: money(100),
                default_hazard: crate::inflow::Hazard::Flat(2_000),
                prepay_hazard: crate::inflow::Hazard::Flat(0),
                recovery_rate_bps: 0,
                recovery_lag: 0,
            }],
        })
        .unwrap();
        let text = render_scenarios(&scenarios);
        let weights = read_scenario_weights(&text).unwrap().unwrap();
        assert_eq!(weights.len(), 2);
        let total: Rational = weights.iter().cloned().sum();
        assert!(num::One::is_one(&total));
    }

    #[test]
    fn manifest_digests_inputs() {
        let manifest = RunManifest::new(
            "0.1.0",
            "run",
            &[("structure.json".to_string(), b"abc".as_slice())],
        );
        assert_eq!(
            manifest.input_digests["structure.json"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
