//! Seeded training runs, parameter sweeps and their summaries.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::data::{self, DataSchema, PartitionMode, PartitionSpec};
use crate::dataset::LabeledDataset;
use crate::dp::{stream_id, LedgerMode, RandomSource, ROUNDING_SLACK};
use crate::dp_topdown::{dp_topdown, DpTopDownConfig, ScheduleKind};
use crate::error::{Error, Result};
use crate::split_strategies::{CentralData, Federation, LocalRnmSplitter, NoisyCountsSplitter, RnmSplitter};
use crate::tree::{topdown_nonprivate, Criterion, SplitClass, TopDownParams, DEFAULT_MIN_GAIN};

/// Header of every result CSV.
pub const CSV_HEADER: &str = "algorithm,alpha,lpf,train_fraction,run,seed,train_acc,test_acc,depth,nodes,ledger_cost,wall_ms";

/// Overrides the directory relative output paths are resolved against.
pub const OUT_DIR_ENV: &str = "DPTREE_OUT_DIR";
/// Overrides the worker count of sweeps.
pub const THREADS_ENV: &str = "DPTREE_THREADS";

const DATA_STREAM: u64 = 0x6461_7461;
const SUBSAMPLE_STREAM: u64 = 1;
const PARTITION_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Baseline,
    SingleRnm,
    NoisyCounts,
    LocalRnm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Baseline,
        Algorithm::SingleRnm,
        Algorithm::NoisyCounts,
        Algorithm::LocalRnm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Baseline => "baseline",
            Algorithm::SingleRnm => "single-rnm",
            Algorithm::NoisyCounts => "noisy-counts",
            Algorithm::LocalRnm => "local-rnm",
        }
    }

    pub fn is_private(self) -> bool {
        self != Algorithm::Baseline
    }

    pub fn is_distributed(self) -> bool {
        matches!(self, Algorithm::NoisyCounts | Algorithm::LocalRnm)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTarget {
    Depth2,
    Depth3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetConfig {
    /// A CSV with its schema. Without `test_path` the file is split by
    /// `ratio` once per base seed.
    Csv {
        schema: PathBuf,
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
        #[serde(default = "default_ratio")]
        ratio: [u32; 2],
    },
    /// Uniform points labeled by a fixed threshold tree, grid of 9
    /// thresholds per feature.
    Synthetic {
        target: SyntheticTarget,
        n: usize,
        #[serde(default)]
        label_noise: f64,
        #[serde(default = "default_ratio")]
        ratio: [u32; 2],
    },
}

fn default_ratio() -> [u32; 2] {
    [9, 1]
}

/// Default privacy grid 2^-3, ..., 2^9.
pub fn default_alphas() -> Vec<f64> {
    (-3..=9).map(|e| 2f64.powi(e)).collect()
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Algorithm>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Algorithm),
        Many(Vec<Algorithm>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(a) => vec![a],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// One algorithm or a list; `algorithm` is accepted too.
    #[serde(alias = "algorithm", deserialize_with = "one_or_many")]
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    pub lpfs: Vec<f64>,
    pub train_fractions: Vec<f64>,
    /// Entity count for the distributed algorithms.
    pub k: usize,
    pub partition: PartitionMode,
    pub max_splits: u32,
    pub epsilon: f64,
    pub delta: f64,
    pub criterion: Criterion,
    pub schedule: ScheduleKind,
    pub min_gain: f64,
    pub ledger_mode: LedgerMode,
    pub runs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// When false `wall_ms` is written as 0 so reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::Synthetic {
                target: SyntheticTarget::Depth3,
                n: 10_000,
                label_noise: 0.0,
                ratio: default_ratio(),
            },
            algorithms: vec![Algorithm::SingleRnm],
            alphas: default_alphas(),
            lpfs: vec![0.5],
            train_fractions: vec![1.0],
            k: 4,
            partition: PartitionMode::Uniform,
            max_splits: 512,
            epsilon: 0.1,
            delta: 0.1,
            criterion: Criterion::Entropy,
            schedule: ScheduleKind::Decay,
            min_gain: DEFAULT_MIN_GAIN,
            ledger_mode: LedgerMode::Audit,
            runs: 100,
            seed: 0,
            out: None,
            record_wall_time: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config; relative dataset paths are taken relative to the
    /// config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetConfig::Csv {
            schema,
            path,
            test_path,
            ..
        } = &mut config.dataset
        {
            for p in [Some(schema), Some(path), test_path.as_mut()].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.algorithms.is_empty() || self.alphas.is_empty() || self.lpfs.is_empty() || self.train_fractions.is_empty()
        {
            return bad("algorithm, alpha, lpf and train fraction lists must be nonempty".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(f) = self.train_fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("train fraction {f} outside (0, 1]"));
        }
        match &self.dataset {
            DatasetConfig::Csv { ratio, .. } | DatasetConfig::Synthetic { ratio, .. } if ratio.contains(&0) => {
                return bad("ratio parts must be positive".into());
            }
            DatasetConfig::Synthetic { label_noise, .. } if !(0.0..=0.5).contains(label_noise) => {
                return bad(format!("label noise {label_noise} outside [0, 0.5]"));
            }
            _ => {}
        }
        for &alpha in &self.alphas {
            for &lpf in &self.lpfs {
                self.dp_config(alpha, lpf).validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn dp_config(&self, alpha: f64, lpf: f64) -> DpTopDownConfig {
        DpTopDownConfig {
            alpha,
            max_splits: self.max_splits,
            epsilon: self.epsilon,
            delta: self.delta,
            lpf,
            schedule: self.schedule,
            criterion: self.criterion,
            min_gain: self.min_gain,
            ledger_mode: self.ledger_mode,
        }
    }

    /// Parameters of the non-private baseline: same `M`, weight filter and
    /// minimum gain as the private runs.
    pub fn baseline_params(&self) -> TopDownParams {
        TopDownParams {
            max_splits: self.max_splits as usize,
            criterion: self.criterion,
            min_gain: self.min_gain,
            weight_floor: Some(self.epsilon / self.max_splits as f64),
        }
    }

    /// Every run of the grid in output order: algorithm, alpha, lpf, train
    /// fraction, run.
    pub fn points(&self) -> Vec<RunPoint> {
        let mut out = Vec::new();
        for (ai, &algorithm) in self.algorithms.iter().enumerate() {
            for (pi, &alpha) in self.alphas.iter().enumerate() {
                for (li, &lpf) in self.lpfs.iter().enumerate() {
                    for (fi, &train_fraction) in self.train_fractions.iter().enumerate() {
                        for run in 0..self.runs {
                            // the baseline ignores alpha and lpf, so its seed does too
                            let (pi, li) = if algorithm.is_private() { (pi, li) } else { (0, 0) };
                            let cell = [self.seed, ai as u64, pi as u64, li as u64, fi as u64, run as u64];
                            out.push(RunPoint {
                                algorithm,
                                alpha,
                                lpf,
                                train_fraction,
                                run,
                                seed: stream_id(&cell),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub lpf: f64,
    pub train_fraction: f64,
    pub run: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub lpf: f64,
    pub train_fraction: f64,
    pub run: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub depth: u32,
    pub nodes: usize,
    pub ledger_cost: f64,
    pub wall_ms: u64,
}

/// Train/test data and the splitting class, fixed for a whole sweep.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub class: SplitClass,
}

impl PreparedData {
    pub fn new(train: LabeledDataset, test: LabeledDataset, class: SplitClass) -> Result<Self> {
        if train.n_features() != class.n_features() || test.n_features() != class.n_features() {
            return Err(Error::invalid("datasets and splitting class disagree on the feature count"));
        }
        Ok(PreparedData { train, test, class })
    }

    /// Loads or generates the data. The train/test split depends only on
    /// the base seed.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let mut rng = RandomSource::new(config.seed, DATA_STREAM);
        match &config.dataset {
            DatasetConfig::Csv {
                schema,
                path,
                test_path,
                ratio,
            } => {
                let schema = DataSchema::load(schema)?;
                // H is fixed before any row is read
                let class = schema.build_splitting_class()?;
                let all = data::load_csv(path, &schema)?;
                let (train, test) = match test_path {
                    Some(t) => (all, data::load_csv(t, &schema)?),
                    None => data::train_test_split(&all, (ratio[0], ratio[1]), &mut rng)?,
                };
                Self::new(train, test, class)
            }
            DatasetConfig::Synthetic {
                target,
                n,
                label_noise,
                ratio,
            } => {
                let (truth, d) = match target {
                    SyntheticTarget::Depth2 => (data::depth2_truth(), 3),
                    SyntheticTarget::Depth3 => (data::depth3_truth(), 4),
                };
                let class = data::synthetic_schema(d, data::SYNTHETIC_THRESHOLDS).build_splitting_class()?;
                let all = data::generate(&truth, *n, d, *label_noise, &mut rng)?;
                let (train, test) = data::train_test_split(&all, (ratio[0], ratio[1]), &mut rng)?;
                Self::new(train, test, class)
            }
        }
    }
}

/// One seeded train/evaluate cycle.
pub fn run_single(
    config: &ExperimentConfig,
    prepared: &PreparedData,
    point: &RunPoint,
    zero_noise: bool,
) -> Result<ResultRow> {
    let start = Instant::now();
    let rng = RandomSource::new(point.seed, 0).with_zero_noise(zero_noise);
    let train = if point.train_fraction < 1.0 {
        data::subsample(&prepared.train, point.train_fraction, &mut rng.derive(&[SUBSAMPLE_STREAM]))?
    } else {
        prepared.train.clone()
    };
    let (tree, ledger_cost) = match point.algorithm {
        Algorithm::Baseline => (topdown_nonprivate(&train, &prepared.class, &config.baseline_params())?, 0.0),
        Algorithm::SingleRnm => {
            let central = CentralData::new(train.clone(), prepared.class.clone())?;
            let splitter = RnmSplitter::new(&central);
            let run = dp_topdown(
                &central,
                &splitter,
                &config.dp_config(point.alpha, point.lpf),
                &mut rng.derive(&[TRAIN_STREAM]),
            )?;
            (run.tree, run.stats.ledger_effective_cost)
        }
        Algorithm::NoisyCounts | Algorithm::LocalRnm => {
            let spec = PartitionSpec {
                k: config.k,
                mode: config.partition.clone(),
            };
            let shards = data::partition(&train, &spec, &mut rng.derive(&[PARTITION_STREAM]))?;
            let (fed, _) = Federation::in_process(shards, prepared.class.clone())?;
            let dp = config.dp_config(point.alpha, point.lpf);
            let mut trng = rng.derive(&[TRAIN_STREAM]);
            let run = if point.algorithm == Algorithm::NoisyCounts {
                dp_topdown(&fed, &NoisyCountsSplitter::new(&fed), &dp, &mut trng)?
            } else {
                dp_topdown(&fed, &LocalRnmSplitter::new(&fed), &dp, &mut trng)?
            };
            (run.tree, run.stats.ledger_effective_cost)
        }
    };
    let wall_ms = if config.record_wall_time {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(ResultRow {
        algorithm: point.algorithm,
        alpha: point.alpha,
        lpf: point.lpf,
        train_fraction: point.train_fraction,
        run: point.run,
        seed: point.seed,
        train_acc: tree.accuracy(&train)?,
        test_acc: tree.accuracy(&prepared.test)?,
        depth: tree.depth(),
        nodes: tree.internal_nodes(),
        ledger_cost,
        wall_ms,
    })
}

/// Resolves a relative output path against `DPTREE_OUT_DIR` when set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Worker count from `DPTREE_THREADS`, else rayon's default.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepReport {
    /// Rows already present from an earlier, interrupted sweep.
    pub resumed: usize,
    pub written: usize,
}

/// Runs the whole grid, streaming rows to `out` in grid order. An existing
/// file whose rows match the start of the grid is resumed; a trailing
/// partial line is dropped first.
pub fn run_sweep(config: &ExperimentConfig, prepared: &PreparedData, out: &Path, threads: usize) -> Result<SweepReport> {
    config.validate()?;
    let points = config.points();
    let resumed = resume_point(out, &points)?;
    let mut file = if resumed == 0 {
        let mut f = File::create(out)?;
        writeln!(f, "{CSV_HEADER}")?;
        f
    } else {
        OpenOptions::new().append(true).open(out)?
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut written = 0;
    for chunk in points[resumed..].chunks(threads.max(1) * 4) {
        let rows: Vec<Result<ResultRow>> =
            pool.install(|| chunk.par_iter().map(|p| run_single(config, prepared, p, false)).collect());
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in rows {
            w.serialize(row?)?;
            written += 1;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.write_all(&bytes)?;
        file.flush()?;
    }
    Ok(SweepReport { resumed, written })
}

fn resume_point(out: &Path, points: &[RunPoint]) -> Result<usize> {
    let Ok(file) = File::open(out) else {
        return Ok(0);
    };
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if header.trim_end() != CSV_HEADER {
        return Ok(0);
    }
    let mut keep = header.len() as u64;
    let mut done = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            break;
        }
        let Some(seed) = line.split(',').nth(5).and_then(|s| s.parse::<u64>().ok()) else {
            break;
        };
        if done >= points.len() || points[done].seed != seed {
            return Err(Error::Config(format!(
                "{} holds rows of a different sweep; remove it or choose another output",
                out.display()
            )));
        }
        keep += line.len() as u64;
        done += 1;
    }
    OpenOptions::new().write(true).open(out)?.set_len(keep)?;
    Ok(done)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Load {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected header".into(),
        });
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator, 0 for one value).
    pub std: f64,
    /// Standard deviation of the mean, `std/sqrt(n)`.
    pub sem: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
                sem: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            std,
            sem: std / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub lpf: f64,
    pub train_fraction: f64,
    pub runs: usize,
    pub train_acc: Stat,
    pub test_acc: Stat,
    pub depth: Stat,
    pub nodes: Stat,
    pub max_ledger_cost: f64,
    /// Rows whose ledger cost exceeds their alpha.
    pub budget_violations: usize,
}

/// Groups rows by cell in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut cells: Vec<(RunPoint, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let same = |p: &RunPoint| {
            p.algorithm == r.algorithm && p.alpha == r.alpha && p.lpf == r.lpf && p.train_fraction == r.train_fraction
        };
        match cells.iter_mut().find(|(p, _)| same(p)) {
            Some((_, v)) => v.push(r),
            None => cells.push((
                RunPoint {
                    algorithm: r.algorithm,
                    alpha: r.alpha,
                    lpf: r.lpf,
                    train_fraction: r.train_fraction,
                    run: 0,
                    seed: 0,
                },
                vec![r],
            )),
        }
    }
    cells
        .into_iter()
        .map(|(p, v)| {
            let col = |f: fn(&ResultRow) -> f64| Stat::of(&v.iter().map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                algorithm: p.algorithm,
                alpha: p.alpha,
                lpf: p.lpf,
                train_fraction: p.train_fraction,
                runs: v.len(),
                train_acc: col(|r| r.train_acc),
                test_acc: col(|r| r.test_acc),
                depth: col(|r| r.depth as f64),
                nodes: col(|r| r.nodes as f64),
                max_ledger_cost: v.iter().map(|r| r.ledger_cost).fold(0.0, f64::max),
                budget_violations: v
                    .iter()
                    .filter(|r| r.ledger_cost > r.alpha * (1.0 + ROUNDING_SLACK))
                    .count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(algorithms: Vec<Algorithm>) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetConfig::Synthetic {
                target: SyntheticTarget::Depth2,
                n: 2000,
                label_noise: 0.0,
                ratio: [9, 1],
            },
            algorithms,
            alphas: vec![1.0, 4.0],
            runs: 3,
            max_splits: 8,
            seed: 11,
            record_wall_time: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.alphas.len(), 13);
        assert_eq!((c.alphas[0], c.alphas[12]), (0.125, 512.0));
        assert_eq!((c.max_splits, c.k, c.runs), (512, 4, 100));
        let parsed = ExperimentConfig::from_json(r#"{"algorithm": "noisy-counts"}"#).unwrap();
        assert_eq!(parsed.algorithms, vec![Algorithm::NoisyCounts]);
        assert!(ExperimentConfig::from_json(r#"{"runs": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"alphas": []}"#).is_err());
    }

    #[test]
    fn baseline_recovers_depth_two_truth() {
        let c = small(vec![Algorithm::Baseline]);
        let data = PreparedData::load(&c).unwrap();
        let row = run_single(&c, &data, &c.points()[0], false).unwrap();
        assert_eq!(row.train_acc, 1.0);
        assert_eq!(row.ledger_cost, 0.0);
    }

    #[test]
    fn zero_noise_private_row_matches_baseline() {
        let c = small(vec![Algorithm::Baseline, Algorithm::SingleRnm, Algorithm::NoisyCounts]);
        let data = PreparedData::load(&c).unwrap();
        let points = c.points();
        let base = run_single(&c, &data, &points[0], true).unwrap();
        for p in points.iter().filter(|p| p.algorithm.is_private() && p.run == 0) {
            let row = run_single(&c, &data, p, true).unwrap();
            assert_eq!(
                (row.train_acc, row.test_acc, row.depth, row.nodes),
                (base.train_acc, base.test_acc, base.depth, base.nodes)
            );
            assert!(row.ledger_cost <= p.alpha * (1.0 + ROUNDING_SLACK));
        }
    }

    #[test]
    fn sweep_is_reproducible_and_resumable() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(vec![Algorithm::Baseline, Algorithm::SingleRnm]);
        let data = PreparedData::load(&c).unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let report = run_sweep(&c, &data, &a, 2).unwrap();
        assert_eq!(report, SweepReport { resumed: 0, written: 12 });
        run_sweep(&c, &data, &b, 1).unwrap();
        let full = std::fs::read(&a).unwrap();
        assert_eq!(full, std::fs::read(&b).unwrap());

        // cut mid-row, then resume
        let text = String::from_utf8(full.clone()).unwrap();
        let cut = text.match_indices('\n').nth(5).unwrap().0 + 10;
        std::fs::write(&b, &full[..cut]).unwrap();
        let report = run_sweep(&c, &data, &b, 1).unwrap();
        assert_eq!(report, SweepReport { resumed: 5, written: 7 });
        assert_eq!(full, std::fs::read(&b).unwrap());

        let rows = read_results(&a).unwrap();
        assert_eq!(rows.len(), 12);
        let cells = summarize(&rows);
        assert_eq!(cells.len(), 4);
        // baseline cells do not depend on alpha
        assert_eq!(cells[0].test_acc, cells[1].test_acc);
        assert!(cells.iter().all(|c| c.budget_violations == 0 && c.runs == 3));
    }

    #[test]
    fn sem_is_std_over_root_n() {
        let values: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let s = Stat::of(&values);
        assert!((s.sem - s.std / 10.0).abs() < 1e-15);
        assert_eq!(Stat::of(&[0.5]).std, 0.0);
    }
}
