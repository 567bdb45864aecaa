use crate::dataset::LabeledDataset;
use crate::dp::{laplace_mechanism, report_noisy_max, Holder, LedgerMode, Level, PrivacyLedger, Purpose, RandomSource, Scope};
use crate::dp_topdown::{LeafRef, PrivateSplitter, SourceShape, SplitChoice, TrainingData};
use crate::error::{Error, Result};
use crate::tree::{split_gain, Criterion, SplitClass, SplitTable, MIN_SPLIT_ROWS};

/// Sensitivity of the gain scores used by Report Noisy Max at a leaf of
/// `m` rows: `10·lg(m)/m` for entropy, `20/m` for Gini, `10/m` for Root Gini.
pub fn rnm_score_sensitivity(criterion: Criterion, m: usize) -> f64 {
    let m = m as f64;
    match criterion {
        Criterion::Entropy => 10.0 * m.log2() / m,
        Criterion::Gini => 20.0 / m,
        Criterion::RootGini => 10.0 / m,
    }
}

/// Per-score Laplace scale `2Δ/α`, e.g. `20·lg(m)/(α·m)` for entropy.
pub fn rnm_noise_scale(criterion: Criterion, m: usize, alpha: f64) -> f64 {
    2.0 * rnm_score_sensitivity(criterion, m) / alpha
}

/// Report Noisy Max over the gains of every split at `rows`. Charging is
/// the caller's job.
pub fn single_machine_rnm_split(
    table: &SplitTable,
    rows: &[usize],
    alpha: f64,
    criterion: Criterion,
    rng: &mut RandomSource,
) -> Result<SplitChoice> {
    if rows.len() < MIN_SPLIT_ROWS {
        return Err(Error::DegenerateLeaf {
            rows: rows.len(),
            min: MIN_SPLIT_ROWS,
        });
    }
    let scores: Vec<f64> = table
        .joint_counts(rows)
        .iter()
        .map(|c| split_gain(c, criterion).value)
        .collect();
    let sensitivity = rnm_score_sensitivity(criterion, rows.len());
    let (split, gain) = report_noisy_max(&scores, sensitivity, alpha, rng)?;
    Ok(SplitChoice { split, gain })
}

/// The whole dataset held by one trusted curator.
#[derive(Debug, Clone)]
pub struct CentralData {
    data: LabeledDataset,
    class: SplitClass,
    table: SplitTable,
}

impl CentralData {
    pub fn new(data: LabeledDataset, class: SplitClass) -> Result<Self> {
        let table = SplitTable::build(&data, &class)?;
        Ok(CentralData { data, class, table })
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn table(&self) -> &SplitTable {
        &self.table
    }

    pub fn rows_at(&self, leaf: &LeafRef) -> Vec<usize> {
        self.table.rows_at(&leaf.path)
    }
}

fn global(purpose: Purpose, leaf: &LeafRef) -> Scope {
    Scope::new(Holder::Global, purpose, leaf.level).at_cell(leaf.node)
}

impl TrainingData for CentralData {
    fn shape(&self) -> SourceShape {
        SourceShape::SingleMachine
    }

    fn public_size(&self) -> usize {
        self.data.len()
    }

    fn n_labels(&self) -> usize {
        self.data.n_labels()
    }

    fn class(&self) -> &SplitClass {
        &self.class
    }

    fn begin_run(&self, _rng: &RandomSource, _total: f64, _mode: LedgerMode) -> Result<()> {
        Ok(())
    }

    fn noisy_leaf_count(
        &self,
        leaf: &LeafRef,
        budget: f64,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<f64> {
        let count = self.rows_at(leaf).len() as f64;
        let noisy = laplace_mechanism(count, 1.0, budget, rng)?;
        ledger.charge(global(Purpose::Weight, leaf), budget)?;
        Ok(noisy)
    }

    fn private_label(
        &self,
        leaf: &LeafRef,
        budget: f64,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<u32> {
        let rows = self.rows_at(leaf);
        let counts: Vec<f64> = self
            .table
            .label_counts(&rows)
            .into_iter()
            .map(|c| c as f64)
            .collect();
        let (label, _) = report_noisy_max(&counts, 1.0, budget, rng)?;
        ledger.charge(Scope::new(Holder::Global, Purpose::Label, Level::Leaves).at_cell(leaf.node), budget)?;
        Ok(label as u32)
    }
}

/// Single-machine PrivateSplit by Report Noisy Max over all of H.
#[derive(Debug, Clone, Copy)]
pub struct RnmSplitter<'a> {
    data: &'a CentralData,
}

impl<'a> RnmSplitter<'a> {
    pub fn new(data: &'a CentralData) -> Self {
        RnmSplitter { data }
    }
}

impl PrivateSplitter for RnmSplitter<'_> {
    fn shape(&self) -> SourceShape {
        SourceShape::SingleMachine
    }

    fn split(
        &self,
        leaf: &LeafRef,
        alpha: f64,
        _delta: f64,
        criterion: Criterion,
        rng: &mut RandomSource,
        ledger: &mut PrivacyLedger,
    ) -> Result<Option<SplitChoice>> {
        ledger.charge(global(Purpose::Split, leaf), alpha)?;
        let rows = self.data.rows_at(leaf);
        match single_machine_rnm_split(self.data.table(), &rows, alpha, criterion, rng) {
            Ok(choice) => Ok(Some(choice)),
            Err(Error::DegenerateLeaf { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}
