use serde::{Deserialize, Serialize};

use crate::dp::ROUNDING_SLACK;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `B(d) = 1/M`.
    Uniform,
    /// `B(d) = 2^-d`.
    #[default]
    Decay,
}

/// Per-level fraction `B(d)` of the split budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    pub kind: ScheduleKind,
    /// Number of levels `M`.
    pub levels: u32,
}

impl BudgetSchedule {
    pub fn new(kind: ScheduleKind, levels: u32) -> Result<Self> {
        if levels == 0 {
            return Err(Error::invalid("budget schedule needs at least one level"));
        }
        Ok(BudgetSchedule { kind, levels })
    }

    pub fn uniform(levels: u32) -> Result<Self> {
        Self::new(ScheduleKind::Uniform, levels)
    }

    pub fn decay(levels: u32) -> Result<Self> {
        Self::new(ScheduleKind::Decay, levels)
    }

    pub fn budget_at_depth(&self, d: u32) -> Result<f64> {
        if d == 0 || (self.kind == ScheduleKind::Uniform && d > self.levels) {
            return Err(Error::invalid(format!(
                "depth {d} outside 1..={} for {:?} schedule",
                self.levels, self.kind
            )));
        }
        Ok(match self.kind {
            ScheduleKind::Uniform => 1.0 / f64::from(self.levels),
            ScheduleKind::Decay => 0.5f64.powi(d as i32),
        })
    }

    /// `b = min_{1≤d≤M} B(d)`.
    pub fn min_budget(&self) -> f64 {
        self.budget_at_depth(self.levels).expect("level M is in range")
    }

    /// `Σ_{d=1}^{M} B(d)`.
    pub fn total(&self) -> f64 {
        (1..=self.levels)
            .map(|d| self.budget_at_depth(d).expect("in range"))
            .sum()
    }

    /// Checks `Σ B(d) ≤ 1`.
    pub fn validate(&self) -> Result<()> {
        let total = self.total();
        if total > 1.0 + ROUNDING_SLACK {
            return Err(Error::invalid(format!("schedule sums to {total} > 1")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_values() {
        let s = BudgetSchedule::decay(512).unwrap();
        assert_eq!(s.budget_at_depth(1).unwrap(), 0.5);
        assert_eq!(s.budget_at_depth(2).unwrap(), 0.25);
        assert!(s.total() <= 1.0);
        s.validate().unwrap();
        assert!(s.budget_at_depth(0).is_err());
    }

    #[test]
    fn uniform_values() {
        let s = BudgetSchedule::uniform(512).unwrap();
        for d in [1, 100, 512] {
            assert_eq!(s.budget_at_depth(d).unwrap(), 1.0 / 512.0);
        }
        assert!(s.budget_at_depth(513).is_err());
        s.validate().unwrap();
        assert_eq!(s.min_budget(), 1.0 / 512.0);
        for m in 1..200 {
            BudgetSchedule::uniform(m).unwrap().validate().unwrap();
        }
    }
}
