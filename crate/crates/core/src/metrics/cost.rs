use std::fmt;
use std::ops::{Add, AddAssign};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{round_div, MetricsError, Tenths};
use crate::agent::TokenUsage;
use crate::catalog::AgentRole;

/// Integer micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Micros(pub u64);

impl Micros {
    /// From a dollar amount, rounded to the nearest micro-dollar.
    pub fn from_dollars(d: f64) -> Result<Self, MetricsError> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(MetricsError::BadPrices(format!("price {d} is not a non-negative number")));
        }
        Ok(Micros((d * 1e6).round() as u64))
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for Micros {
    type Output = Micros;

    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

/// `$0.024`: at least three decimals, more only when non-zero.
impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frac = format!("{:06}", self.0 % 1_000_000);
        let mut frac = frac.trim_end_matches('0').to_string();
        while frac.len() < 3 {
            frac.push('0');
        }
        write!(f, "${}.{frac}", self.0 / 1_000_000)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolPricing {
    /// Tool traffic is fed back as context, so it bills like input.
    #[default]
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PriceTable {
    pub input_per_mtok: Micros,
    pub output_per_mtok: Micros,
    pub tool_tokens_priced_as: ToolPricing,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrices {
    input_per_mtok: f64,
    output_per_mtok: f64,
    #[serde(default)]
    tool_as: ToolPricing,
}

impl PriceTable {
    /// Prices in dollars per million tokens.
    pub fn new(input_per_mtok: f64, output_per_mtok: f64, tool_as: ToolPricing) -> Result<Self, MetricsError> {
        Ok(Self {
            input_per_mtok: Micros::from_dollars(input_per_mtok)?,
            output_per_mtok: Micros::from_dollars(output_per_mtok)?,
            tool_tokens_priced_as: tool_as,
        })
    }

    /// `{input_per_mtok, output_per_mtok, tool_as}`, dollars per million tokens.
    pub fn from_yaml(text: &str) -> Result<Self, MetricsError> {
        let raw: RawPrices = serde_yaml::from_str(text).map_err(|e| MetricsError::BadPrices(e.to_string()))?;
        Self::new(raw.input_per_mtok, raw.output_per_mtok, raw.tool_as)
    }

    fn tool_rate(&self) -> Micros {
        match self.tool_tokens_priced_as {
            ToolPricing::Input => self.input_per_mtok,
            ToolPricing::Output => self.output_per_mtok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub agent: String,
    pub input_cost: Micros,
    pub tool_cost: Micros,
    pub output_cost: Micros,
    pub total: Micros,
}

impl CostRecord {
    pub fn new(agent: impl Into<String>, input: Micros, tool: Micros, output: Micros) -> Self {
        Self {
            agent: agent.into(),
            input_cost: input,
            tool_cost: tool,
            output_cost: output,
            total: input + tool + output,
        }
    }
}

fn price(tokens: u64, per_mtok: Micros) -> Micros {
    Micros(round_div(tokens as i128 * per_mtok.0 as i128, 1_000_000) as u64)
}

pub fn compute_cost(agent: &str, usage: &TokenUsage, prices: &PriceTable) -> CostRecord {
    CostRecord::new(
        agent,
        price(usage.input, prices.input_per_mtok),
        price(usage.tool, prices.tool_rate()),
        price(usage.output, prices.output_per_mtok),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostGroup {
    FunctionAnalyzer,
    ContextAnalyzer,
    ExistingAgents,
}

impl CostGroup {
    pub const ALL: [CostGroup; 3] = [
        CostGroup::FunctionAnalyzer,
        CostGroup::ContextAnalyzer,
        CostGroup::ExistingAgents,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CostGroup::FunctionAnalyzer => "Function Analyzer",
            CostGroup::ContextAnalyzer => "Context Analyzer",
            CostGroup::ExistingAgents => "Existing agents",
        }
    }
}

/// Cost-table row an agent belongs to; evaluation-only agents have none.
pub fn cost_group(agent: &str) -> Option<CostGroup> {
    match agent.parse::<AgentRole>().ok()? {
        AgentRole::FunctionAnalyzer => Some(CostGroup::FunctionAnalyzer),
        AgentRole::CrashValidator => Some(CostGroup::ContextAnalyzer),
        AgentRole::ConstraintJudge => None,
        _ => Some(CostGroup::ExistingAgents),
    }
}

/// Average per-driver cost by agent group. Every row's total is the exact
/// sum of its components, and the per-driver row is the column sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub drivers: usize,
    pub rows: Vec<CostRecord>,
    pub per_driver: CostRecord,
}

pub fn aggregate_costs(records: &[CostRecord], drivers: usize) -> Result<CostTable, MetricsError> {
    if drivers == 0 {
        return Err(MetricsError::InvalidBaseline("no drivers to average over".into()));
    }
    let mut sums: IndexMap<CostGroup, (Micros, Micros, Micros)> =
        CostGroup::ALL.iter().map(|g| (*g, Default::default())).collect();
    for r in records {
        if let Some(g) = cost_group(&r.agent) {
            let e = sums.get_mut(&g).expect("all groups present");
            e.0 += r.input_cost;
            e.1 += r.tool_cost;
            e.2 += r.output_cost;
        }
    }
    let avg = |m: Micros| Micros(round_div(m.0 as i128, drivers as i128) as u64);
    let rows: Vec<CostRecord> = sums
        .into_iter()
        .map(|(g, (i, t, o))| CostRecord::new(g.label(), avg(i), avg(t), avg(o)))
        .collect();
    let per_driver = rows.iter().fold(
        CostRecord::new("Cost (per driver)", Micros(0), Micros(0), Micros(0)),
        |acc, r| {
            CostRecord::new(
                acc.agent,
                acc.input_cost + r.input_cost,
                acc.tool_cost + r.tool_cost,
                acc.output_cost + r.output_cost,
            )
        },
    );
    Ok(CostTable {
        drivers,
        rows,
        per_driver,
    })
}

/// Cost of the added agents relative to the existing ones, in percent.
pub fn cost_overhead(added: Micros, existing: Micros) -> Result<Tenths, MetricsError> {
    if existing.0 == 0 {
        return Err(MetricsError::InvalidBaseline("existing agents cost nothing".into()));
    }
    Ok(Tenths::percent(added.0 as i128, existing.0 as i128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let p = PriceTable::new(1.25, 10.0, ToolPricing::Input).unwrap();
        let c = compute_cost(
            "x",
            &TokenUsage {
                input: 1_000_000,
                tool: 0,
                output: 0,
            },
            &p,
        );
        assert_eq!((c.input_cost, c.tool_cost, c.output_cost, c.total), (Micros(1_250_000), Micros(0), Micros(0), Micros(1_250_000)));
        assert_eq!(c.total.to_string(), "$1.250");
        let z = compute_cost("x", &TokenUsage::default(), &p);
        assert_eq!(z.total, Micros(0));
        assert_eq!(Micros(24_000).to_string(), "$0.024");
        assert_eq!(Micros(1).to_string(), "$0.000001");
    }

    #[test]
    fn prices_yaml() {
        let p = PriceTable::from_yaml("input_per_mtok: 1.25\noutput_per_mtok: 10\ntool_as: output\n").unwrap();
        assert_eq!(p.tool_tokens_priced_as, ToolPricing::Output);
        assert_eq!(p.output_per_mtok, Micros(10_000_000));
        assert!(PriceTable::from_yaml("input_per_mtok: -1\noutput_per_mtok: 1\n").is_err());
    }

    #[test]
    fn groups() {
        assert_eq!(cost_group("function-analyzer"), Some(CostGroup::FunctionAnalyzer));
        assert_eq!(cost_group("crash-validator"), Some(CostGroup::ContextAnalyzer));
        assert_eq!(cost_group("enhancer"), Some(CostGroup::ExistingAgents));
        assert_eq!(cost_group("constraint-judge"), None);
        assert_eq!(cost_group("nobody"), None);
    }
}
