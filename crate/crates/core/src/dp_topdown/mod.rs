//! The private greedy TopDown loop.
//!
//! Data access goes through two interfaces: [`TrainingData`] answers noisy
//! leaf-size and label queries, [`PrivateSplitter`] selects splits. Both
//! charge the ledger themselves, since only they know the actual spend.

mod schedule;

pub use schedule::{BudgetSchedule, ScheduleKind};

use serde::{Deserialize, Serialize};

use crate::dp::{Level, LedgerMode, PrivacyLedger, RandomSource};
use crate::error::{Error, Result};
use crate::tree::{Criterion, DecisionTree, LeafQueue, PathStep, SplitClass, DEFAULT_MIN_GAIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpTopDownConfig {
    /// Total privacy budget.
    pub alpha: f64,
    /// Maximum number of internal nodes `M`.
    pub max_splits: u32,
    /// Target error; leaves lighter than `ε/M` are not queued.
    pub epsilon: f64,
    pub delta: f64,
    /// Fraction of `alpha` reserved for leaf labeling.
    pub lpf: f64,
    pub schedule: ScheduleKind,
    pub criterion: Criterion,
    pub min_gain: f64,
    pub ledger_mode: LedgerMode,
}

impl Default for DpTopDownConfig {
    fn default() -> Self {
        DpTopDownConfig {
            alpha: 1.0,
            max_splits: 512,
            epsilon: 0.1,
            delta: 0.1,
            lpf: 0.5,
            schedule: ScheduleKind::Decay,
            criterion: Criterion::Entropy,
            min_gain: DEFAULT_MIN_GAIN,
            ledger_mode: LedgerMode::Audit,
        }
    }
}

impl DpTopDownConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::invalid(m));
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return err(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.max_splits == 0 {
            return err("max_splits must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return err(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return err(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.lpf > 0.0 && self.lpf < 1.0) {
            return err(format!("lpf must lie in (0, 1), got {}", self.lpf));
        }
        if !self.min_gain.is_finite() {
            return err("min_gain must be finite".into());
        }
        self.budget_schedule()?.validate()
    }

    pub fn budget_schedule(&self) -> Result<BudgetSchedule> {
        BudgetSchedule::new(self.schedule, self.max_splits)
    }

    /// `(1 − LPF)·α`.
    pub fn split_budget(&self) -> f64 {
        (1.0 - self.lpf) * self.alpha
    }

    /// `LPF·α`.
    pub fn leaf_budget(&self) -> f64 {
        self.lpf * self.alpha
    }

    /// Failure probability handed to each split call, `δ/(2(2M+1))`.
    pub fn split_delta(&self) -> f64 {
        self.delta / (2.0 * (2.0 * f64::from(self.max_splits) + 1.0))
    }

    /// `ε/M`.
    pub fn weight_floor(&self) -> f64 {
        self.epsilon / f64::from(self.max_splits)
    }
}

/// A leaf as seen by the data holders: its node id (the ledger cell), its
/// budget level and the path that defines its membership.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafRef {
    pub node: usize,
    pub level: Level,
    pub path: Vec<PathStep>,
}

impl LeafRef {
    pub fn new(tree: &DecisionTree, node: usize, level: Level) -> Self {
        LeafRef {
            node,
            level,
            path: tree.path(node),
        }
    }

    /// Budget-level depth; 0 for the labeling pass.
    pub fn depth_level(&self) -> u32 {
        match self.level {
            Level::Depth(d) => d,
            Level::Leaves => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceShape {
    SingleMachine,
    Distributed,
}

/// Private access to the training data.
pub trait TrainingData {
    fn shape(&self) -> SourceShape;

    /// `|S|`, treated as public.
    fn public_size(&self) -> usize;

    fn n_labels(&self) -> usize;

    fn class(&self) -> &SplitClass;

    /// Called once before a run; distributed sources reset entity state.
    fn begin_run(&self, _rng: &RandomSource, _total: f64, _mode: LedgerMode) -> Result<()> {
        Ok(())
    }

    /// `|S_ℓ|` plus Laplace noise of scale `1/budget`, charging `budget`.
    fn noisy_leaf_count(
        &self,
        leaf: &LeafRef,
        budget: f64,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<f64>;

    /// Private majority label of a leaf using at most `budget`.
    fn private_label(
        &self,
        leaf: &LeafRef,
        budget: f64,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<u32>;

    /// Called once after a run; distributed sources move entity charges
    /// into `ledger`.
    fn finish_run(&self, _ledger: &mut PrivacyLedger) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub split: usize,
    /// Noisy gain estimate `Ĵ`.
    pub gain: f64,
}

/// PrivateSplit: an α-DP choice of a near-best split and its gain.
pub trait PrivateSplitter {
    fn shape(&self) -> SourceShape;

    /// `None` when the leaf is too small to split.
    fn split(
        &self,
        leaf: &LeafRef,
        alpha: f64,
        delta: f64,
        criterion: Criterion,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<Option<SplitChoice>>;

    /// Number of times an entity substituted a random split for a local
    /// choice (only meaningful for LocalRNM).
    fn fallbacks(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushRecord {
    pub node: usize,
    pub weight: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub depth: u32,
    pub internal_nodes: usize,
    pub iterations: usize,
    pub popped_priorities: Vec<f64>,
    /// Highest priority left in the queue right after each pop.
    pub max_remaining_after_pop: Vec<Option<f64>>,
    /// Children queued after the root, with their noisy weight and gain.
    pub pushed: Vec<PushRecord>,
    pub filtered_by_weight: usize,
    pub unsplittable: usize,
    pub local_fallbacks: usize,
    pub ledger_effective_cost: f64,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

#[derive(Debug, Clone)]
pub struct DpRun {
    pub tree: DecisionTree,
    pub ledger: PrivacyLedger,
    pub stats: RunStats,
}

/// Noise scale of the weight estimate, `2/(|S|·α_ℓ)`.
pub fn weight_noise_scale(n: usize, alpha_level: f64) -> f64 {
    2.0 / (n as f64 * alpha_level)
}

/// `|S_ℓ|/|S| + Lap(2/(|S|·α_ℓ))`, charging `α_ℓ/2`. Not clamped.
pub fn estimate_weight(
    data: &dyn TrainingData,
    leaf: &LeafRef,
    alpha_level: f64,
    rng: &mut RandomSource,
    ledger: &mut PrivacyLedger,
) -> Result<f64> {
    let n = data.public_size();
    if n == 0 {
        return Err(Error::invalid("weight of a leaf in an empty dataset"));
    }
    Ok(data.noisy_leaf_count(leaf, alpha_level / 2.0, rng, ledger)? / n as f64)
}

/// Labels every leaf privately with `budget` each; leaves are disjoint so
/// the cost composes in parallel.
pub fn label_leaves(
    tree: &mut DecisionTree,
    data: &dyn TrainingData,
    budget: f64,
    rng: &mut RandomSource,
    ledger: &mut PrivacyLedger,
) -> Result<()> {
    for leaf in tree.leaves() {
        let r = LeafRef::new(tree, leaf, Level::Leaves);
        let label = data.private_label(&r, budget, rng, ledger)?;
        tree.set_label(leaf, label)?;
    }
    Ok(())
}

/// Runs DP-TopDown and audits the ledger.
pub fn dp_topdown(
    data: &dyn TrainingData,
    splitter: &dyn PrivateSplitter,
    config: &DpTopDownConfig,
    rng: &mut RandomSource,
) -> Result<DpRun> {
    config.validate()?;
    if data.shape() != splitter.shape() {
        return Err(Error::Config(format!(
            "splitter expects {:?} data, got {:?}",
            splitter.shape(),
            data.shape()
        )));
    }
    if data.public_size() == 0 {
        return Err(Error::invalid("cannot grow a tree on an empty dataset"));
    }
    let mut ledger = PrivacyLedger::new(config.alpha, config.ledger_mode)?;
    data.begin_run(rng, config.alpha, config.ledger_mode)?;
    let (mut tree, mut stats) = grow(data, splitter, config, rng, &mut ledger)?;
    label_leaves(&mut tree, data, config.leaf_budget(), rng, &mut ledger)?;
    data.finish_run(&mut ledger)?;
    ledger.audit()?;
    stats.depth = tree.depth();
    stats.internal_nodes = tree.internal_nodes();
    stats.local_fallbacks = splitter.fallbacks();
    stats.ledger_effective_cost = ledger.effective_cost();
    Ok(DpRun { tree, ledger, stats })
}

fn grow(
    data: &dyn TrainingData,
    splitter: &dyn PrivateSplitter,
    config: &DpTopDownConfig,
    rng: &mut RandomSource,
    ledger: &mut PrivacyLedger,
) -> Result<(DecisionTree, RunStats)> {
    let schedule = config.budget_schedule()?;
    let split_budget = config.split_budget();
    let delta = config.split_delta();
    let floor = config.weight_floor();
    let class = data.class();
    let mut stats = RunStats::default();
    let mut tree = DecisionTree::new();
    let mut queue = LeafQueue::new();

    // The root is funded by level 1; a node at tree depth d by level d + 1.
    let root = LeafRef::new(&tree, DecisionTree::ROOT, Level::Depth(1));
    let alpha_root = split_budget * schedule.budget_at_depth(1)?;
    match splitter.split(&root, alpha_root, delta, config.criterion, rng, ledger)? {
        Some(c) if c.gain > config.min_gain => queue.push(c.gain, (root.node, c.split)),
        Some(_) => {}
        None => stats.unsplittable += 1,
    }

    for t in 1..=config.max_splits {
        let Some((priority, (leaf, h))) = queue.pop() else {
            break;
        };
        stats.popped_priorities.push(priority);
        stats.max_remaining_after_pop.push(queue.max_priority());
        stats.iterations = t as usize;
        let children = tree.split_leaf(leaf, class.get(h).clone())?;
        if t == config.max_splits {
            break;
        }
        for c in children {
            let level = tree.node(c).depth + 1;
            let alpha_level = split_budget * schedule.budget_at_depth(level)?;
            let r = LeafRef::new(&tree, c, Level::Depth(level));
            let w = estimate_weight(data, &r, alpha_level, rng, ledger)?;
            if w < floor {
                stats.filtered_by_weight += 1;
                continue;
            }
            match splitter.split(&r, alpha_level / 2.0, delta, config.criterion, rng, ledger)? {
                Some(choice) if choice.gain > config.min_gain => {
                    queue.push(w * choice.gain, (c, choice.split));
                    stats.pushed.push(PushRecord {
                        node: c,
                        weight: w,
                        gain: choice.gain,
                    });
                }
                Some(_) => {}
                None => stats.unsplittable += 1,
            }
        }
    }
    Ok((tree, stats))
}
