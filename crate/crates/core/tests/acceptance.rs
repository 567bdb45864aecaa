//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Select criteria by number:
//! `cargo test --test acceptance -- 4 9`.

use std::path::PathBuf;
use std::time::Instant;

use dptree::data::{self, PartitionSpec};
use dptree::dp::{sample_laplace, LedgerMode, Level, NoiseScale, RandomSource, ROUNDING_SLACK};
use dptree::dp_topdown::{dp_topdown, DpRun, DpTopDownConfig, LeafRef, ScheduleKind, TrainingData};
use dptree::experiment::{
    run_single, summarize, Algorithm, CellSummary, DatasetConfig, ExperimentConfig, PreparedData, SyntheticTarget,
};
use dptree::split_strategies::{
    single_machine_rnm_split, CentralData, Federation, LocalRnmSplitter, NoisyCountsSplitter, RnmSplitter,
};
use dptree::theory::{self, SplitterKind, WeakLearningParams};
use dptree::tree::{split_gain, topdown_nonprivate, Criterion, DecisionTree, SplitClass, SplitTable, TopDownParams};
use dptree::LabeledDataset;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(u32, &str, Check); 11] = [
        (1, "privacy accounting", c1_privacy_accounting),
        (2, "zero-noise equivalence", c2_zero_noise_equivalence),
        (3, "mechanism statistics", c3_mechanism_statistics),
        (4, "sensitivity bounds", c4_sensitivity_bounds),
        (5, "boosting at desk scale", c5_boosting),
        (6, "privacy-accuracy curve", c6_privacy_curve),
        (7, "dataset-size trend", c7_dataset_size),
        (8, "leaf fraction trade-off", c8_lpf_tradeoff),
        (9, "split utility contracts", c9_split_utility),
        (10, "theory calculators", c10_theory),
        (11, "splitting-class counts", c11_class_counts),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {name:<26} {verdict}  [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
        if !out.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn synthetic(n: usize, seed: u64) -> (LabeledDataset, SplitClass) {
    let d = data::generate(&data::depth3_truth(), n, 4, 0.0, &mut RandomSource::new(seed, 0)).unwrap();
    let class = data::synthetic_schema(4, data::SYNTHETIC_THRESHOLDS).build_splitting_class().unwrap();
    (d, class)
}

fn private_run(
    algorithm: Algorithm,
    train: &LabeledDataset,
    class: &SplitClass,
    k: usize,
    config: &DpTopDownConfig,
    rng: &mut RandomSource,
) -> dptree::Result<DpRun> {
    match algorithm {
        Algorithm::SingleRnm => {
            let central = CentralData::new(train.clone(), class.clone())?;
            dp_topdown(&central, &RnmSplitter::new(&central), config, rng)
        }
        Algorithm::NoisyCounts | Algorithm::LocalRnm => {
            let shards = data::partition(train, &PartitionSpec::uniform(k), &mut rng.derive(&[99]))?;
            let (fed, _) = Federation::in_process(shards, class.clone())?;
            if algorithm == Algorithm::NoisyCounts {
                dp_topdown(&fed, &NoisyCountsSplitter::new(&fed), config, rng)
            } else {
                dp_topdown(&fed, &LocalRnmSplitter::new(&fed), config, rng)
            }
        }
        Algorithm::Baseline => unreachable!(),
    }
}

const PRIVATE: [Algorithm; 3] = [Algorithm::SingleRnm, Algorithm::NoisyCounts, Algorithm::LocalRnm];

fn c1_privacy_accounting() -> Outcome {
    let (d, class) = synthetic(10_000, 1);
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let mut bad = Vec::new();
    for alg in PRIVATE {
        for schedule in [ScheduleKind::Uniform, ScheduleKind::Decay] {
            for lpf in [0.1, 0.5, 0.9] {
                for seed in 0..20 {
                    let config = DpTopDownConfig {
                        alpha: 1.0,
                        lpf,
                        schedule,
                        ..DpTopDownConfig::default()
                    };
                    let mut rng = RandomSource::new(seed, 1);
                    match private_run(alg, &d, &class, 4, &config, &mut rng) {
                        Ok(run) => {
                            let cost = run.ledger.effective_cost();
                            worst = worst.max(cost);
                            if cost > config.alpha * (1.0 + ROUNDING_SLACK) || run.ledger.audit().is_err() {
                                bad.push(format!("{}/{schedule:?}/{lpf}/{seed}: {cost}", alg.name()));
                            }
                        }
                        Err(e) => bad.push(format!("{}/{schedule:?}/{lpf}/{seed}: {e}", alg.name())),
                    }
                    runs += 1;
                }
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("{runs} runs, max effective cost {worst:.6} of 1; violations {bad:?}"),
    )
}

fn random_dataset(i: u64) -> (LabeledDataset, SplitClass) {
    use rand::Rng;
    let mut rng = RandomSource::new(1000 + i, 0);
    let n = rng.gen_range(200..3000);
    let d = rng.gen_range(2..6);
    let n_labels = rng.gen_range(2..4u32);
    let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
        let mut y = u32::from(x[0] > a) ^ u32::from(x[1] > b);
        if n_labels == 3 && x[d - 1] > 0.8 {
            y = 2;
        }
        if rng.gen::<f64>() < 0.1 {
            y = rng.gen_range(0..n_labels);
        }
        rows.push(x);
        labels.push(y);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let label_names = (0..n_labels).map(|y| y.to_string()).collect();
    let data = LabeledDataset::from_rows(names, label_names, &rows, labels).unwrap();
    let class = data::synthetic_schema(d, data::SYNTHETIC_THRESHOLDS).build_splitting_class().unwrap();
    (data, class)
}

fn c2_zero_noise_equivalence() -> Outcome {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for i in 0..10 {
        let (d, class) = random_dataset(i);
        let config = DpTopDownConfig {
            alpha: 1.0,
            max_splits: 32,
            ..DpTopDownConfig::default()
        };
        let params = TopDownParams {
            max_splits: 32,
            criterion: config.criterion,
            min_gain: config.min_gain,
            weight_floor: Some(config.weight_floor()),
        };
        let baseline = topdown_nonprivate(&d, &class, &params).unwrap().to_json();
        for (alg, k) in [
            (Algorithm::SingleRnm, 1),
            (Algorithm::NoisyCounts, 1),
            (Algorithm::NoisyCounts, 4),
            (Algorithm::LocalRnm, 1),
        ] {
            let mut rng = RandomSource::new(i, 7).with_zero_noise(true);
            let tree = private_run(alg, &d, &class, k, &config, &mut rng).unwrap().tree.to_json();
            compared += 1;
            if tree != baseline {
                mismatches.push(format!("dataset {i} {} k={k}", alg.name()));
            }
        }
    }
    Outcome::new(
        mismatches.is_empty(),
        format!("{compared} trees compared byte-for-byte; mismatches {mismatches:?}"),
    )
}

fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

fn c3_mechanism_statistics() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, b) in [0.5, 1.0, 5.0].into_iter().enumerate() {
        let mut rng = RandomSource::new(3, i as u64);
        let scale = NoiseScale::new(b).unwrap();
        let mut xs: Vec<f64> = (0..DRAWS).map(|_| sample_laplace(scale, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let n = DRAWS as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let f = laplace_cdf(x, b);
                (f - j as f64 / n).abs().max((f - (j + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        ok &= ks < 0.01;
        parts.push(format!("KS(b={b})={ks:.4}"));
        for delta in [0.5f64, 0.1, 0.01] {
            let t = (1.0 / delta).ln() * b;
            let freq = xs.iter().filter(|x| x.abs() >= t).count() as f64 / n;
            let se = (delta * (1.0 - delta) / n).sqrt();
            let z = (freq - delta) / se;
            ok &= z.abs() <= 3.0;
            parts.push(format!("tail(b={b},δ={delta})={freq:.4} z={z:+.2}"));
        }
    }
    Outcome::new(ok, parts.join(", "))
}

fn c4_sensitivity_bounds() -> Outcome {
    let mut violations = Vec::new();
    for (ci, crit) in Criterion::ALL.into_iter().enumerate() {
        for (mi, m) in [8, 16, 32, 64, 128, 256, 512].into_iter().enumerate() {
            let mut rng = RandomSource::new(4, (ci * 10 + mi) as u64);
            let emp = theory::empirical_sensitivity(crit, m, 10_000, &mut rng);
            let bound = theory::sensitivity_bound(crit, m).unwrap();
            if emp > bound {
                violations.push(format!("{crit:?} m={m}: {emp:.4} > {bound:.4}"));
            }
        }
    }
    Outcome::new(
        violations.is_empty(),
        format!("21 (criterion, m) pairs x 10^4 trials; violations {violations:?}"),
    )
}

fn c5_boosting() -> Outcome {
    let (d, class) = synthetic(100_000, 5);
    let baseline = topdown_nonprivate(&d, &class, &TopDownParams::new(16, Criterion::Entropy)).unwrap();
    let base_err = baseline.tree_error(&d).unwrap();
    let central = CentralData::new(d.clone(), class).unwrap();
    // everything but alpha at its default (M = 512, decay, LPF 0.5)
    let config = DpTopDownConfig {
        alpha: 8.0,
        ..DpTopDownConfig::default()
    };
    let errors: Vec<f64> = (0..50)
        .map(|s| {
            let run = dp_topdown(&central, &RnmSplitter::new(&central), &config, &mut RandomSource::new(s, 5)).unwrap();
            run.tree.tree_error(&d).unwrap()
        })
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Outcome::new(
        base_err <= 0.01 && mean <= 0.05,
        format!(
            "non-private error {base_err:.4} with {} splits; private mean error {mean:.4} over 50 runs",
            baseline.internal_nodes()
        ),
    )
}

fn synthetic_experiment() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetConfig::Synthetic {
            target: SyntheticTarget::Depth3,
            n: 10_000,
            label_noise: 0.05,
            ratio: [9, 1],
        },
        runs: 50,
        seed: 6,
        record_wall_time: false,
        ..ExperimentConfig::default()
    }
}

fn diamonds_experiment() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetConfig::Csv {
            schema: repo_file("data/diamonds.schema.json"),
            path: repo_file("data/diamonds.csv"),
            test_path: None,
            ratio: [9, 1],
        },
        ..synthetic_experiment()
    }
}

fn sweep(config: &ExperimentConfig) -> Vec<CellSummary> {
    let data = PreparedData::load(config).unwrap();
    let rows: Vec<_> = config
        .points()
        .iter()
        .map(|p| run_single(config, &data, p, false).unwrap())
        .collect();
    summarize(&rows)
}

fn combined(a: &CellSummary, b: &CellSummary) -> f64 {
    (a.test_acc.sem.powi(2) + b.test_acc.sem.powi(2)).sqrt()
}

fn curve(cells: &[CellSummary]) -> String {
    cells
        .iter()
        .map(|c| format!("{:.4}±{:.4}", c.test_acc.mean, c.test_acc.sem))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Adjacent points non-decreasing up to 2 combined standard errors.
fn monotone(cells: &[CellSummary]) -> bool {
    cells
        .windows(2)
        .all(|w| w[1].test_acc.mean >= w[0].test_acc.mean - 2.0 * combined(&w[0], &w[1]))
}

fn c6_privacy_curve() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, base) in [("synthetic", synthetic_experiment()), ("diamonds", diamonds_experiment())] {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::Baseline, Algorithm::SingleRnm],
            alphas: dptree::experiment::default_alphas(),
            ..base
        };
        let cells = sweep(&config);
        let (baseline, private) = cells.split_at(config.alphas.len());
        let last = private.last().unwrap();
        let mono = monotone(private);
        let close = (last.test_acc.mean - baseline[0].test_acc.mean).abs() <= 2.0 * combined(last, &baseline[0]);
        ok &= mono && close;
        parts.push(format!(
            "{name}: baseline {:.4}, curve [{}], monotone {mono}, converged {close}",
            baseline[0].test_acc.mean,
            curve(private)
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn c7_dataset_size() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, base) in [("synthetic", synthetic_experiment()), ("diamonds", diamonds_experiment())] {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::SingleRnm],
            alphas: vec![1.0],
            train_fractions: vec![0.05, 0.25, 1.0],
            ..base
        };
        let cells = sweep(&config);
        let mono = monotone(&cells);
        ok &= mono;
        parts.push(format!("{name}: [{}] monotone {mono}", curve(&cells)));
    }
    Outcome::new(ok, parts.join("; "))
}

fn c8_lpf_tradeoff() -> Outcome {
    let config = ExperimentConfig {
        algorithms: vec![Algorithm::SingleRnm],
        alphas: vec![1.0],
        lpfs: vec![0.02, 0.5, 0.98],
        ..synthetic_experiment()
    };
    let cells = sweep(&config);
    let (lo, mid, hi) = (&cells[0], &cells[1], &cells[2]);
    let ok = mid.test_acc.mean - lo.test_acc.mean >= 2.0 * combined(mid, lo)
        && mid.test_acc.mean - hi.test_acc.mean >= 2.0 * combined(mid, hi);
    Outcome::new(ok, format!("LPF 0.02/0.5/0.98: [{}]", curve(&cells)))
}

/// Dataset for the utility trials: one feature, 10 thresholds, noisy step
/// labels.
fn utility_data(n: usize, seed: u64) -> (LabeledDataset, SplitClass) {
    use rand::Rng;
    let mut rng = RandomSource::new(seed, 0);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.gen();
        let flip = rng.gen::<f64>() < 0.2;
        features.push(x);
        labels.push(u32::from((x > 0.55) ^ flip));
    }
    let data = LabeledDataset::new(vec!["x".into()], vec!["0".into(), "1".into()], features, labels).unwrap();
    let kinds = (1..=10)
        .map(|r| dptree::tree::SplitKind::Threshold {
            feature: 0,
            threshold: r as f64 / 11.0,
        })
        .collect();
    (data, SplitClass::new(1, kinds).unwrap())
}

fn true_gains(table: &SplitTable, rows: &[usize], crit: Criterion) -> Vec<f64> {
    table.joint_counts(rows).iter().map(|c| split_gain(c, crit).value).collect()
}

fn utility_verdict(name: &str, hits: usize, trials: usize, delta: f64, n: usize) -> (bool, String) {
    let t = trials as f64;
    let need = (1.0 - delta) * t - 3.0 * (t * delta * (1.0 - delta)).sqrt();
    (
        hits as f64 >= need,
        format!("{name} (n={n}): {hits}/{trials} good, need {need:.1}"),
    )
}

fn c9_split_utility() -> Outcome {
    const TRIALS: usize = 500;
    let (zeta, delta, alpha, crit) = (0.1, 0.1, 1.0, Criterion::Entropy);
    let good = |gains: &[f64], split: usize, estimate: f64| {
        let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gains[split] >= best - zeta && (gains[split] - estimate).abs() <= zeta
    };

    let n = theory::rnm_sample_bound(zeta, alpha, delta, 10).unwrap() as usize;
    let (d, class) = utility_data(n, 9);
    let table = SplitTable::build(&d, &class).unwrap();
    let rows: Vec<usize> = (0..d.len()).collect();
    let gains = true_gains(&table, &rows, crit);
    let mut rng = RandomSource::new(9, 1);
    let hits = (0..TRIALS)
        .filter(|_| {
            let c = single_machine_rnm_split(&table, &rows, alpha, crit, &mut rng).unwrap();
            good(&gains, c.split, c.gain)
        })
        .count();
    let (ok_rnm, rnm) = utility_verdict("single-rnm", hits, TRIALS, delta, n);

    let n = theory::noisycounts_sample_bound(zeta, alpha, delta, 4, 10).unwrap() as usize;
    let (d, class) = utility_data(n, 10);
    let gains = true_gains(&SplitTable::build(&d, &class).unwrap(), &(0..d.len()).collect::<Vec<_>>(), crit);
    let shards = data::partition(&d, &PartitionSpec::uniform(4), &mut RandomSource::new(10, 1)).unwrap();
    drop(d);
    let (fed, _) = Federation::in_process(shards, class).unwrap();
    let leaf = LeafRef::new(&DecisionTree::new(), DecisionTree::ROOT, Level::Depth(1));
    let splits: Vec<usize> = (0..10).collect();
    let hits = (0..TRIALS as u64)
        .filter(|&t| {
            fed.begin_run(&RandomSource::new(10, t), alpha, LedgerMode::Audit).unwrap();
            fed.clear_message_log();
            let c = fed.noisy_counts_split(&leaf, &splits, alpha, crit).unwrap().unwrap();
            good(&gains, c.split, c.gain)
        })
        .count();
    let (ok_nc, nc) = utility_verdict("noisy-counts k=4", hits, TRIALS, delta, n);
    Outcome::new(ok_rnm && ok_nc, format!("{rnm}; {nc}"))
}

fn c10_theory() -> Outcome {
    let mut bad = Vec::new();
    let mut check = |name: &str, got: dptree::Result<u64>, want: u64| match got {
        Ok(v) if v == want => {}
        other => bad.push(format!("{name}: {other:?} != {want}")),
    };
    check("rnm(0.1,1,0.05,159)", theory::rnm_sample_bound(0.1, 1.0, 0.05, 159), 52_124);
    check("noisycounts(0.1,1,0.05,4,100)", theory::noisycounts_sample_bound(0.1, 1.0, 0.05, 4, 100), 71_163_163);
    check("recurrence(0.5,0.5,4)", theory::boosting_recurrence(0.5, 0.5, 4), 8_349_448);
    check("recurrence(0.8,0.5,8)", theory::boosting_recurrence(0.8, 0.5, 8), 2105);
    let p = WeakLearningParams {
        gamma: 0.25,
        epsilon: 0.1,
        delta: 0.1,
        max_splits: 16,
        alpha: 1.0,
        k: 1,
        schedule: ScheduleKind::Uniform,
    };
    match theory::dataset_requirement(&p, SplitterKind::Rnm, 50) {
        Ok(t) => {
            for (name, got, want) in [
                ("weight", t.weight, 243_178_405),
                ("leaf", t.leaf, 8_871),
                ("split", t.split, 211_591_309_208_640),
            ] {
                if got != want {
                    bad.push(format!("requirement {name}: {got} != {want}"));
                }
            }
            if t.requirement != t.weight.max(t.leaf).max(t.split) {
                bad.push(format!("requirement requirement is not the max of its terms: {t:?}"));
            }
        }
        Err(e) => bad.push(format!("requirement: {e}")),
    }
    let p = WeakLearningParams { k: 4, ..p };
    match theory::dataset_requirement(&p, SplitterKind::NoisyCounts, 50) {
        Ok(t) if (t.weight, t.leaf, t.split) == (1_161_188_795, 43_022, 98_549_199_379_196_800) => {}
        other => bad.push(format!("requirement distributed: {other:?}")),
    }
    // each bound satisfies its own defining inequality
    for (zeta, alpha, h) in [(0.1, 1.0, 10), (0.05, 0.5, 159), (0.1, 0.25, 427)] {
        let n = theory::rnm_sample_bound(zeta, alpha, 0.1, h).unwrap() as f64;
        let lhs = (h as f64 / 0.1).ln() * 2.0 * 20.0 * n.log2() / (alpha * n);
        if lhs > zeta {
            bad.push(format!("rnm bound ({zeta},{alpha},{h}) gives {lhs} > zeta"));
        }
    }
    for (eps, gamma) in [(0.5, 0.5), (0.8, 0.5), (0.9, 0.4)] {
        let t = theory::boosting_recurrence(eps, gamma, 4).unwrap();
        let (before, at) = theory::recurrence_values(gamma, 4, t);
        if t > 0 && !(at <= eps && before > eps) {
            bad.push(format!("recurrence ({eps},{gamma}) stops at {t} with G = {before}, {at}"));
        }
    }
    Outcome::new(bad.is_empty(), format!("golden values and invariants; problems {bad:?}"))
}

fn c11_class_counts() -> Outcome {
    let count = |f: &str| {
        data::DataSchema::load(repo_file(f))
            .and_then(|s| s.build_splitting_class())
            .map(|h| h.len())
    };
    let declared_ctr = {
        let s = data::DataSchema::load(repo_file("configs/ctr.schema.json")).unwrap();
        s.splits.per_feature.values().sum::<i64>() as usize
    };
    let got = [
        ("skin", count("configs/skin.schema.json").ok(), 96),
        ("ctr", count("configs/ctr.schema.json").ok(), declared_ctr),
        ("adult", count("configs/adult.schema.json").ok(), 159),
        ("mnist", count("configs/mnist.schema.json").ok(), 147),
    ];
    let ok = got.iter().all(|(_, g, w)| *g == Some(*w));
    let detail = got
        .iter()
        .map(|(n, g, w)| format!("{n} |H|={g:?} want {w}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(ok, detail)
}
