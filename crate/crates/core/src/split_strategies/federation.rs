use std::io::Write;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::messages::{Direction, Entity, InProcessTransport, LogRecord, Payload, Query, QueryKind, Response, Transport};
use crate::dataset::LabeledDataset;
use crate::dp::{LedgerMode, Level, PrivacyLedger, RandomSource};
use crate::dp_topdown::{LeafRef, PrivateSplitter, SourceShape, SplitChoice, TrainingData};
use crate::error::{Error, Result};
use crate::tree::{split_gain, Criterion, LeafCounts, SplitClass, MIN_SPLIT_ROWS};

const ENTITY_STREAM_TAG: u64 = 0x656e_7469_7479;

/// Coordinator view of `k` entities. Only public metadata (total size,
/// label count, H) is held here; all data access goes through queries.
pub struct Federation {
    transport: Arc<dyn Transport>,
    n_total: usize,
    n_labels: usize,
    class: SplitClass,
    nonce: AtomicU64,
    log: Mutex<Vec<LogRecord>>,
}

impl std::fmt::Debug for Federation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Federation")
            .field("entities", &self.transport.n_entities())
            .field("n_total", &self.n_total)
            .finish()
    }
}

impl Federation {
    pub fn new(transport: Arc<dyn Transport>, n_total: usize, n_labels: usize, class: SplitClass) -> Result<Self> {
        if transport.n_entities() == 0 {
            return Err(Error::invalid("a federation needs at least one entity"));
        }
        Ok(Federation {
            transport,
            n_total,
            n_labels,
            class,
            nonce: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    /// Entities over `shards` behind an in-process transport, which is
    /// also returned so tests can take entities offline.
    pub fn in_process(shards: Vec<LabeledDataset>, class: SplitClass) -> Result<(Self, Arc<InProcessTransport>)> {
        let first = shards
            .first()
            .ok_or_else(|| Error::invalid("a federation needs at least one entity"))?;
        let n_labels = first.n_labels();
        let n_total = shards.iter().map(LabeledDataset::len).sum();
        let entities = shards
            .into_iter()
            .enumerate()
            .map(|(i, s)| Entity::new(i, s, &class))
            .collect::<Result<Vec<_>>>()?;
        let transport = Arc::new(InProcessTransport::new(entities));
        let fed = Federation::new(transport.clone(), n_total, n_labels, class)?;
        Ok((fed, transport))
    }

    pub fn n_entities(&self) -> usize {
        self.transport.n_entities()
    }

    pub fn message_log(&self) -> Vec<LogRecord> {
        self.log.lock().expect("log poisoned").clone()
    }

    pub fn clear_message_log(&self) {
        self.log.lock().expect("log poisoned").clear();
    }

    pub fn write_message_log(&self, mut out: impl Write) -> Result<()> {
        for r in self.message_log() {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// One synchronous round: the same query to every entity. Any failure
    /// aborts the round.
    pub fn broadcast(&self, kind: QueryKind, budget: f64, level: Level, cell: usize) -> Result<Vec<Response>> {
        let mut out = Vec::with_capacity(self.n_entities());
        for e in 0..self.n_entities() {
            let q = Query {
                nonce: self.nonce.fetch_add(1, Ordering::Relaxed),
                kind: kind.clone(),
                budget,
                level,
                cell,
            };
            self.record(Direction::Query, e, &q.kind, budget, String::new());
            let r = self.transport.send(e, &q)?;
            if r.entity != e || r.nonce != q.nonce {
                return Err(Error::Protocol(format!("mismatched response from entity {e}")));
            }
            self.record(Direction::Response, e, &q.kind, budget, r.payload.summary());
            out.push(r);
        }
        Ok(out)
    }

    fn record(&self, direction: Direction, entity: usize, kind: &QueryKind, budget: f64, payload_summary: String) {
        self.log.lock().expect("log poisoned").push(LogRecord {
            direction,
            entity,
            kind: kind.name().into(),
            budget,
            payload_summary,
        });
    }

    /// Each entity publishes `|S^i_ℓ| + Lap(2/α_ℓ)`; the sum over `|S|`.
    pub fn distributed_weight_estimate(&self, leaf: &LeafRef, alpha_level: f64) -> Result<f64> {
        Ok(self.noisy_count(leaf, alpha_level / 2.0)? / self.n_total as f64)
    }

    fn noisy_count(&self, leaf: &LeafRef, budget: f64) -> Result<f64> {
        let kind = QueryKind::LeafCount { path: leaf.path.clone() };
        let mut total = 0.0;
        for r in self.broadcast(kind, budget, leaf.level, leaf.node)? {
            match r.payload {
                Payload::Count { value } => total += value,
                p => return Err(unexpected(r.entity, &p)),
            }
        }
        Ok(total)
    }

    /// Summed per-label noisy counts. Each entity adds `Lap(4/budget)` per
    /// label, twice the single-machine RNM scale.
    pub fn distributed_label_counts(&self, leaf: &LeafRef, budget: f64) -> Result<Vec<f64>> {
        let kind = QueryKind::LabelCounts { path: leaf.path.clone() };
        let mut totals = vec![0.0; self.n_labels];
        for r in self.broadcast(kind, budget / 4.0, Level::Leaves, leaf.node)? {
            match r.payload {
                Payload::LabelCounts { values } if values.len() == self.n_labels => {
                    for (t, v) in totals.iter_mut().zip(values) {
                        *t += v;
                    }
                }
                p => return Err(unexpected(r.entity, &p)),
            }
        }
        Ok(totals)
    }

    /// Noisy joint histograms for `splits`, summed over entities. Each
    /// entity spends `α/3`, i.e. `Lap(3|splits|/α)` per cell.
    pub fn aggregate_histograms(&self, leaf: &LeafRef, splits: &[usize], alpha: f64) -> Result<Vec<LeafCounts>> {
        let kind = QueryKind::JointHistogram {
            path: leaf.path.clone(),
            splits: splits.to_vec(),
        };
        let mut agg = vec![LeafCounts::zeros(self.n_labels); splits.len()];
        for r in self.broadcast(kind, alpha / 3.0, leaf.level, leaf.node)? {
            match r.payload {
                Payload::Histograms { cells, .. }
                    if cells.len() == splits.len() && cells.iter().all(|c| c.len() == 2 * self.n_labels) =>
                {
                    for (a, c) in agg.iter_mut().zip(cells) {
                        a.merge(&LeafCounts::from_cells(c));
                    }
                }
                p => return Err(unexpected(r.entity, &p)),
            }
        }
        Ok(agg)
    }

    /// NoisyCounts over the candidate list `splits` (duplicates allowed).
    /// `None` when the mean sanitized leaf total is below the minimum
    /// split size.
    pub fn noisy_counts_split(
        &self,
        leaf: &LeafRef,
        splits: &[usize],
        alpha: f64,
        criterion: Criterion,
    ) -> Result<Option<SplitChoice>> {
        if splits.is_empty() {
            return Err(Error::invalid("noisy counts needs at least one candidate split"));
        }
        let agg = self.aggregate_histograms(leaf, splits, alpha)?;
        let mean_total = agg.iter().map(|c| c.sanitized().total()).sum::<f64>() / agg.len() as f64;
        if mean_total < MIN_SPLIT_ROWS as f64 {
            return Ok(None);
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in agg.iter().enumerate() {
            let j = split_gain(c, criterion).value;
            if j > best.1 {
                best = (i, j);
            }
        }
        Ok(Some(SplitChoice {
            split: splits[best.0],
            gain: best.1,
        }))
    }

    /// Phase 1 of LocalRNM: each entity's RNM choice with budget `α`.
    /// Returns the `k` candidates and how many were random fallbacks.
    pub fn local_candidates(&self, leaf: &LeafRef, alpha: f64, criterion: Criterion) -> Result<(Vec<usize>, usize)> {
        let kind = QueryKind::LocalBestSplit {
            path: leaf.path.clone(),
            criterion,
        };
        let mut candidates = Vec::with_capacity(self.n_entities());
        let mut fallbacks = 0;
        for r in self.broadcast(kind, alpha, leaf.level, leaf.node)? {
            match r.payload {
                Payload::Split { split, fallback } if split < self.class.len() => {
                    candidates.push(split);
                    fallbacks += usize::from(fallback);
                }
                p => return Err(unexpected(r.entity, &p)),
            }
        }
        Ok((candidates, fallbacks))
    }

    /// LocalRNM: local RNM choices with `α/2`, then NoisyCounts over the
    /// `k` candidates with `α/2`. Also returns the number of fallbacks.
    pub fn local_rnm_split(&self, leaf: &LeafRef, alpha: f64, criterion: Criterion) -> Result<(Option<SplitChoice>, usize)> {
        let (candidates, fallbacks) = self.local_candidates(leaf, alpha / 2.0, criterion)?;
        let choice = self.noisy_counts_split(leaf, &candidates, alpha / 2.0, criterion)?;
        Ok((choice, fallbacks))
    }
}

fn unexpected(entity: usize, p: &Payload) -> Error {
    Error::Protocol(format!("unexpected payload from entity {entity}: {}", p.summary()))
}

impl TrainingData for Federation {
    fn shape(&self) -> SourceShape {
        SourceShape::Distributed
    }

    fn public_size(&self) -> usize {
        self.n_total
    }

    fn n_labels(&self) -> usize {
        self.n_labels
    }

    fn class(&self) -> &SplitClass {
        &self.class
    }

    fn begin_run(&self, rng: &RandomSource, total: f64, mode: LedgerMode) -> Result<()> {
        for e in 0..self.n_entities() {
            let q = Query {
                nonce: self.nonce.fetch_add(1, Ordering::Relaxed),
                kind: QueryKind::Begin {
                    seed: rng.seed(),
                    stream: rng.derive(&[ENTITY_STREAM_TAG, e as u64]).stream(),
                    zero_noise: rng.zero_noise(),
                    total,
                    mode,
                },
                budget: 0.0,
                level: Level::Depth(0),
                cell: 0,
            };
            self.record(Direction::Query, e, &q.kind, 0.0, String::new());
            let r = self.transport.send(e, &q)?;
            self.record(Direction::Response, e, &q.kind, 0.0, r.payload.summary());
        }
        Ok(())
    }

    fn noisy_leaf_count(
        &self,
        leaf: &LeafRef,
        budget: f64,
        _rng: &mut RandomSource,
        _ledger: &mut PrivacyLedger,
    ) -> Result<f64> {
        self.noisy_count(leaf, budget)
    }

    fn private_label(
        &self,
        leaf: &LeafRef,
        budget: f64,
        _rng: &mut RandomSource,
        _ledger: &mut PrivacyLedger,
    ) -> Result<u32> {
        let counts = self.distributed_label_counts(leaf, budget)?;
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        Ok(best as u32)
    }

    fn finish_run(&self, ledger: &mut PrivacyLedger) -> Result<()> {
        for r in self.broadcast(QueryKind::Ledger, 0.0, Level::Leaves, 0)? {
            match r.payload {
                Payload::Ledger { ledger: l } => ledger.absorb(&l),
                p => return Err(unexpected(r.entity, &p)),
            }
        }
        Ok(())
    }
}

/// Distributed PrivateSplit publishing noisy histograms for all of H.
#[derive(Debug, Clone, Copy)]
pub struct NoisyCountsSplitter<'a> {
    fed: &'a Federation,
}

impl<'a> NoisyCountsSplitter<'a> {
    pub fn new(fed: &'a Federation) -> Self {
        NoisyCountsSplitter { fed }
    }
}

impl PrivateSplitter for NoisyCountsSplitter<'_> {
    fn shape(&self) -> SourceShape {
        SourceShape::Distributed
    }

    fn split(
        &self,
        leaf: &LeafRef,
        alpha: f64,
        _delta: f64,
        criterion: Criterion,
        _rng: &mut RandomSource,
        _ledger: &mut PrivacyLedger,
    ) -> Result<Option<SplitChoice>> {
        let all: Vec<usize> = (0..self.fed.class.len()).collect();
        self.fed.noisy_counts_split(leaf, &all, alpha, criterion)
    }
}

/// Distributed PrivateSplit: local RNM picks, then NoisyCounts over them.
#[derive(Debug)]
pub struct LocalRnmSplitter<'a> {
    fed: &'a Federation,
    fallbacks: AtomicUsize,
}

impl<'a> LocalRnmSplitter<'a> {
    pub fn new(fed: &'a Federation) -> Self {
        LocalRnmSplitter {
            fed,
            fallbacks: AtomicUsize::new(0),
        }
    }
}

impl PrivateSplitter for LocalRnmSplitter<'_> {
    fn shape(&self) -> SourceShape {
        SourceShape::Distributed
    }

    fn split(
        &self,
        leaf: &LeafRef,
        alpha: f64,
        _delta: f64,
        criterion: Criterion,
        _rng: &mut RandomSource,
        _ledger: &mut PrivacyLedger,
    ) -> Result<Option<SplitChoice>> {
        let (choice, fallbacks) = self.fed.local_rnm_split(leaf, alpha, criterion)?;
        self.fallbacks.fetch_add(fallbacks, Ordering::Relaxed);
        Ok(choice)
    }

    fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }
}
