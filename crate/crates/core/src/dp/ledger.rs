//! Privacy accounting under sequential and parallel composition.
//!
//! Every charge carries a [`Scope`]. Charges are grouped into phases keyed
//! by `(holder, level)`. Inside a phase, charges that name a cell (a tree
//! node) touch disjoint data and compose in parallel; charges without a cell
//! touch the holder's whole data and compose sequentially with everything
//! else in the phase. Phases of one holder sum. Entity holders own disjoint
//! shards, so their costs compose in parallel; GLOBAL charges cover all data
//! and add on top.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack for floating-point summation when comparing against the
/// total budget.
pub const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Holder {
    Global,
    Entity(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Split,
    Weight,
    Label,
}

/// Budget level a charge belongs to: a depth of the budget schedule, or the
/// final leaf-labeling pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Depth(u32),
    Leaves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub holder: Holder,
    pub purpose: Purpose,
    pub level: Level,
    /// Node whose data the charge touches; `None` means all of the holder's data.
    pub cell: Option<usize>,
}

impl Scope {
    pub fn new(holder: Holder, purpose: Purpose, level: Level) -> Self {
        Scope {
            holder,
            purpose,
            level,
            cell: None,
        }
    }

    pub fn at_cell(mut self, cell: usize) -> Self {
        self.cell = Some(cell);
        self
    }

    pub fn with_holder(mut self, holder: Holder) -> Self {
        self.holder = holder;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub scope: Scope,
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LedgerMode {
    /// Record everything and verify afterwards.
    #[default]
    Audit,
    /// Reject the charge that pushes the effective cost over the total.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    total: f64,
    mode: LedgerMode,
    entries: Vec<Charge>,
}

impl PrivacyLedger {
    pub fn new(total: f64, mode: LedgerMode) -> Result<Self> {
        crate::dp::noise::check_positive("total privacy budget", total)?;
        Ok(PrivacyLedger {
            total,
            mode,
            entries: Vec::new(),
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mode(&self) -> LedgerMode {
        self.mode
    }

    pub fn entries(&self) -> &[Charge] {
        &self.entries
    }

    pub fn charge(&mut self, scope: Scope, budget: f64) -> Result<()> {
        crate::dp::noise::check_positive("charged budget", budget)?;
        self.entries.push(Charge { scope, budget });
        if self.mode == LedgerMode::Strict && !self.within_budget() {
            return Err(self.exceeded());
        }
        Ok(())
    }

    /// Appends all entries of `other` (e.g. entity ledgers into a run ledger).
    pub fn absorb(&mut self, other: &PrivacyLedger) {
        self.entries.extend_from_slice(&other.entries);
    }

    /// Composed privacy cost of all recorded charges.
    pub fn effective_cost(&self) -> f64 {
        let mut holders: BTreeMap<Holder, f64> = BTreeMap::new();
        for (holder, cost) in self.holder_costs() {
            holders.insert(holder, cost);
        }
        let global = holders.remove(&Holder::Global).unwrap_or(0.0);
        let entities = holders.values().copied().fold(0.0, f64::max);
        global + entities
    }

    /// Cost of each holder on its own data.
    pub fn holder_costs(&self) -> Vec<(Holder, f64)> {
        // holder -> level -> (sequential part, per-cell sums)
        type Phase = (f64, BTreeMap<usize, f64>);
        let mut phases: BTreeMap<Holder, BTreeMap<Level, Phase>> = BTreeMap::new();
        for c in &self.entries {
            let phase = phases
                .entry(c.scope.holder)
                .or_default()
                .entry(c.scope.level)
                .or_default();
            match c.scope.cell {
                None => phase.0 += c.budget,
                Some(cell) => *phase.1.entry(cell).or_insert(0.0) += c.budget,
            }
        }
        phases
            .into_iter()
            .map(|(holder, levels)| {
                let cost = levels
                    .values()
                    .map(|(shared, cells)| shared + cells.values().copied().fold(0.0, f64::max))
                    .sum();
                (holder, cost)
            })
            .collect()
    }

    pub fn holder_cost(&self, holder: Holder) -> f64 {
        self.holder_costs()
            .into_iter()
            .find(|(h, _)| *h == holder)
            .map_or(0.0, |(_, c)| c)
    }

    pub fn within_budget(&self) -> bool {
        self.effective_cost() <= self.total * (1.0 + ROUNDING_SLACK)
    }

    /// Post-hoc audit used in audit mode.
    pub fn audit(&self) -> Result<()> {
        if self.within_budget() {
            Ok(())
        } else {
            Err(self.exceeded())
        }
    }

    fn exceeded(&self) -> Error {
        Error::BudgetExceeded {
            spent: self.effective_cost(),
            budget: self.total,
            ledger: Box::new(self.clone()),
        }
    }
}
