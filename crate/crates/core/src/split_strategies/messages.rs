use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::central::single_machine_rnm_split;
use crate::dataset::LabeledDataset;
use crate::dp::{laplace_mechanism, sample_laplace, Holder, LedgerMode, Level, NoiseScale, PrivacyLedger, Purpose, RandomSource, Scope};
use crate::error::{Error, Result};
use crate::tree::{Criterion, PathStep, SplitClass, SplitTable, MIN_SPLIT_ROWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QueryKind {
    /// Reset the entity for a new run.
    Begin {
        seed: u64,
        stream: u64,
        zero_noise: bool,
        total: f64,
        mode: LedgerMode,
    },
    /// Noisy label × branch histograms at a leaf, one per listed split.
    JointHistogram { path: Vec<PathStep>, splits: Vec<usize> },
    /// The entity's own RNM choice at a leaf.
    LocalBestSplit { path: Vec<PathStep>, criterion: Criterion },
    LeafCount { path: Vec<PathStep> },
    LabelCounts { path: Vec<PathStep> },
    /// Hand over (and clear) the charges recorded since the last request.
    Ledger,
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            QueryKind::Begin { .. } => "begin",
            QueryKind::JointHistogram { .. } => "joint_histogram",
            QueryKind::LocalBestSplit { .. } => "local_best_split",
            QueryKind::LeafCount { .. } => "leaf_count",
            QueryKind::LabelCounts { .. } => "label_counts",
            QueryKind::Ledger => "ledger",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub nonce: u64,
    pub kind: QueryKind,
    /// Budget the entity spends answering; 0 for control messages.
    pub budget: f64,
    pub level: Level,
    /// Node whose data the query touches.
    pub cell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Ack,
    /// One flat `[y0b0, y0b1, y1b0, ...]` cell vector per requested split.
    Histograms { scale: f64, cells: Vec<Vec<f64>> },
    Split { split: usize, fallback: bool },
    Count { value: f64 },
    LabelCounts { values: Vec<f64> },
    Ledger { ledger: PrivacyLedger },
}

impl Payload {
    pub fn summary(&self) -> String {
        match self {
            Payload::Ack => "ack".into(),
            Payload::Histograms { scale, cells } => format!(
                "{} histograms x {} noisy cells, scale {scale}",
                cells.len(),
                cells.first().map_or(0, Vec::len)
            ),
            Payload::Split { split, fallback } => {
                format!("split {split}{}", if *fallback { " (random fallback)" } else { "" })
            }
            Payload::Count { .. } => "1 noisy count".into(),
            Payload::LabelCounts { values } => format!("{} noisy label counts", values.len()),
            Payload::Ledger { ledger } => format!("{} ledger entries", ledger.entries().len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub entity: usize,
    pub nonce: u64,
    pub payload: Payload,
}

/// Coordinator-to-entity channel.
pub trait Transport: Send + Sync {
    fn n_entities(&self) -> usize;

    fn send(&self, entity: usize, query: &Query) -> Result<Response>;
}

#[derive(Debug)]
struct EntityState {
    rng: RandomSource,
    ledger: PrivacyLedger,
}

/// A data holder. It only reads its own shard and answers every query
/// through a Laplace-based mechanism charged to its own ledger.
#[derive(Debug)]
pub struct Entity {
    id: usize,
    shard: LabeledDataset,
    table: SplitTable,
    state: Mutex<Option<EntityState>>,
}

impl Entity {
    pub fn new(id: usize, shard: LabeledDataset, class: &SplitClass) -> Result<Self> {
        let table = SplitTable::build(&shard, class)?;
        Ok(Entity {
            id,
            shard,
            table,
            state: Mutex::new(None),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shard_len(&self) -> usize {
        self.shard.len()
    }

    pub fn handle(&self, q: &Query) -> Result<Response> {
        let mut guard = self.state.lock().expect("entity state poisoned");
        if let QueryKind::Begin {
            seed,
            stream,
            zero_noise,
            total,
            mode,
        } = q.kind
        {
            *guard = Some(EntityState {
                rng: RandomSource::new(seed, stream).with_zero_noise(zero_noise),
                ledger: PrivacyLedger::new(total, mode)?,
            });
            return Ok(self.respond(q, Payload::Ack));
        }
        let st = guard
            .as_mut()
            .ok_or_else(|| Error::Protocol(format!("entity {} queried before begin", self.id)))?;
        let payload = match &q.kind {
            QueryKind::Begin { .. } => unreachable!(),
            QueryKind::Ledger => {
                let fresh = PrivacyLedger::new(st.ledger.total(), st.ledger.mode())?;
                Payload::Ledger {
                    ledger: std::mem::replace(&mut st.ledger, fresh),
                }
            }
            QueryKind::JointHistogram { path, splits } => {
                self.charge(st, Purpose::Split, q)?;
                let rows = self.table.rows_at(path);
                // each histogram's cells partition the leaf; the histograms
                // themselves compose sequentially
                let scale = NoiseScale::for_mechanism(splits.len() as f64, q.budget)?;
                let cells = self
                    .table
                    .joint_counts_for(&rows, splits)
                    .into_iter()
                    .map(|c| {
                        c.cells()
                            .iter()
                            .map(|&v| v + sample_laplace(scale, &mut st.rng))
                            .collect()
                    })
                    .collect();
                Payload::Histograms {
                    scale: scale.get(),
                    cells,
                }
            }
            QueryKind::LocalBestSplit { path, criterion } => {
                self.charge(st, Purpose::Split, q)?;
                let rows = self.table.rows_at(path);
                if rows.len() < MIN_SPLIT_ROWS {
                    let split = st.rng.gen_range(0..self.table.n_splits());
                    Payload::Split {
                        split,
                        fallback: true,
                    }
                } else {
                    let c = single_machine_rnm_split(&self.table, &rows, q.budget, *criterion, &mut st.rng)?;
                    Payload::Split {
                        split: c.split,
                        fallback: false,
                    }
                }
            }
            QueryKind::LeafCount { path } => {
                self.charge(st, Purpose::Weight, q)?;
                let count = self.table.rows_at(path).len() as f64;
                Payload::Count {
                    value: laplace_mechanism(count, 1.0, q.budget, &mut st.rng)?,
                }
            }
            QueryKind::LabelCounts { path } => {
                self.charge(st, Purpose::Label, q)?;
                let rows = self.table.rows_at(path);
                let values = self
                    .table
                    .label_counts(&rows)
                    .into_iter()
                    .map(|c| laplace_mechanism(c as f64, 1.0, q.budget, &mut st.rng))
                    .collect::<Result<_>>()?;
                Payload::LabelCounts { values }
            }
        };
        Ok(self.respond(q, payload))
    }

    fn charge(&self, st: &mut EntityState, purpose: Purpose, q: &Query) -> Result<()> {
        let scope = Scope::new(Holder::Entity(self.id), purpose, q.level).at_cell(q.cell);
        st.ledger.charge(scope, q.budget)
    }

    fn respond(&self, q: &Query, payload: Payload) -> Response {
        Response {
            entity: self.id,
            nonce: q.nonce,
            payload,
        }
    }
}

/// Entities living in the same process. Entities can be taken offline to
/// simulate fail-stop failures.
#[derive(Debug)]
pub struct InProcessTransport {
    entities: Vec<Entity>,
    offline: Vec<AtomicBool>,
}

impl InProcessTransport {
    pub fn new(entities: Vec<Entity>) -> Self {
        let offline = entities.iter().map(|_| AtomicBool::new(false)).collect();
        InProcessTransport { entities, offline }
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn set_offline(&self, entity: usize, offline: bool) {
        self.offline[entity].store(offline, Ordering::SeqCst);
    }
}

impl Transport for InProcessTransport {
    fn n_entities(&self) -> usize {
        self.entities.len()
    }

    fn send(&self, entity: usize, query: &Query) -> Result<Response> {
        let e = self
            .entities
            .get(entity)
            .ok_or_else(|| Error::Protocol(format!("no entity {entity}")))?;
        if self.offline[entity].load(Ordering::SeqCst) {
            return Err(Error::Protocol(format!("entity {entity} did not respond")));
        }
        e.handle(query)
    }
}

/// One line of the JSON-lines message log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub direction: Direction,
    pub entity: usize,
    pub kind: String,
    pub budget: f64,
    pub payload_summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Query,
    Response,
}
