//! Computable forms of the sensitivity, sample-size and boosting bounds.
//!
//! `log` in the `2b·log(b)` sample bounds is natural; `lg` (base 2) appears
//! only in the entropy sensitivity and the boosting recurrence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::RandomSource;
use crate::dp_topdown::{BudgetSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::tree::{split_gain, Criterion, LeafCounts, MIN_SPLIT_ROWS};

/// Iteration cap of [`boosting_recurrence`].
pub const RECURRENCE_CAP: u64 = 1_000_000_000;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")))
    }
}

/// Closed-form bound on the gain sensitivity at `m` rows.
///
/// Entropy `(2/m)(3·lg m + 1)`, Gini `20/m`, Root Gini `10/m`.
pub fn sensitivity_bound(criterion: Criterion, m: usize) -> Result<f64> {
    if m < MIN_SPLIT_ROWS {
        return Err(Error::invalid(format!("sensitivity bound needs m >= 3, got {m}")));
    }
    let mf = m as f64;
    Ok(match criterion {
        Criterion::Entropy => 2.0 / mf * (3.0 * mf.log2() + 1.0),
        Criterion::Gini => 20.0 / mf,
        Criterion::RootGini => 10.0 / mf,
    })
}

/// Binary dataset of `m` points summarized by its (label, branch) cells.
fn random_cells(m: usize, rng: &mut RandomSource) -> [u32; 4] {
    let p: f64 = rng.gen();
    let s: f64 = rng.gen();
    let mut cells = [0u32; 4];
    for _ in 0..m {
        let y = usize::from(rng.gen::<f64>() < p);
        let b = usize::from(rng.gen::<f64>() < s);
        cells[2 * y + b] += 1;
    }
    cells
}

fn gain_of(cells: &[u32; 4], criterion: Criterion) -> f64 {
    split_gain(&LeafCounts::from_cells(cells.iter().map(|&c| f64::from(c)).collect()), criterion).value
}

/// Max of `|J(S, h) − J(S′, h)|` over `trials` random datasets of `m`
/// points (random label rate and split rate), each paired with a neighbor
/// that replaces one random point by a uniformly random (label, branch).
pub fn empirical_sensitivity(criterion: Criterion, m: usize, trials: usize, rng: &mut RandomSource) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let cells = random_cells(m, rng);
        // the replaced point, chosen uniformly among the m points
        let mut pick = rng.gen_range(0..m as u32);
        let mut from = 0;
        while pick >= cells[from] {
            pick -= cells[from];
            from += 1;
        }
        let to = rng.gen_range(0..4);
        let mut neighbor = cells;
        neighbor[from] -= 1;
        neighbor[to] += 1;
        worst = worst.max((gain_of(&cells, criterion) - gain_of(&neighbor, criterion)).abs());
    }
    worst
}

/// Gain gap of a constructed bad pair: all label 0 except one label-1 point
/// that `h` isolates, against the same data with that point relabeled 0.
pub fn adversarial_sensitivity(criterion: Criterion, m: usize) -> f64 {
    let m = m as u32;
    let s = [m - 1, 0, 0, 1];
    let s_prime = [m - 1, 1, 0, 0];
    (gain_of(&s, criterion) - gain_of(&s_prime, criterion)).abs()
}

fn sample_bound_from_b(b: f64) -> Result<u64> {
    if b <= 1.0 {
        return Ok(MIN_SPLIT_ROWS as u64);
    }
    let n = (2.0 * b * b.ln()).ceil();
    to_u64(n.max(MIN_SPLIT_ROWS as f64))
}

fn to_u64(v: f64) -> Result<u64> {
    // 2^64 is exactly representable; anything at or above it does not fit
    if !(v.is_finite() && (0.0..18_446_744_073_709_551_616.0).contains(&v)) {
        return Err(Error::Overflow(v));
    }
    Ok(v as u64)
}

fn check_bound_params(zeta: f64, alpha: f64, delta: f64, h_size: usize) -> Result<()> {
    unit("zeta", zeta)?;
    positive("alpha", alpha)?;
    unit("delta", delta)?;
    if h_size == 0 {
        return Err(Error::invalid("|H| must be at least 1"));
    }
    Ok(())
}

/// `b = ln(|H|/δ)·40/(αζ)` of the RNM utility bound.
pub fn rnm_bound_b(zeta: f64, alpha: f64, delta: f64, h_size: usize) -> Result<f64> {
    check_bound_params(zeta, alpha, delta, h_size)?;
    Ok((h_size as f64 / delta).ln() * 40.0 / (alpha * zeta))
}

/// Leaf size `N = ⌈2b·ln b⌉` above which RNM is ζ-accurate with
/// probability `1 − δ`; 3 when `b ≤ 1`.
pub fn rnm_sample_bound(zeta: f64, alpha: f64, delta: f64, h_size: usize) -> Result<u64> {
    sample_bound_from_b(rnm_bound_b(zeta, alpha, delta, h_size)?)
}

/// `b = 60·ln(3k|H|/δ)·k|H|/(αζ)` of the NoisyCounts utility bound.
pub fn noisycounts_bound_b(zeta: f64, alpha: f64, delta: f64, k: usize, h_size: usize) -> Result<f64> {
    check_bound_params(zeta, alpha, delta, h_size)?;
    if k == 0 {
        return Err(Error::invalid("entity count must be at least 1"));
    }
    let (kf, hf) = (k as f64, h_size as f64);
    Ok(60.0 * (3.0 * kf * hf / delta).ln() * kf * hf / (alpha * zeta))
}

pub fn noisycounts_sample_bound(zeta: f64, alpha: f64, delta: f64, k: usize, h_size: usize) -> Result<u64> {
    sample_bound_from_b(noisycounts_bound_b(zeta, alpha, delta, k, h_size)?)
}

/// Iterates `G_{t+1} = G_t − γ²G_t/(s·t·lg(2/G_t))` from `G_1 = 1` and
/// returns the first `t` with `G_t ≤ ε`.
pub fn boosting_recurrence(epsilon: f64, gamma: f64, slowdown: u32) -> Result<u64> {
    unit("epsilon", epsilon)?;
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1/2], got {gamma}")));
    }
    if slowdown == 0 {
        return Err(Error::invalid("slowdown must be positive"));
    }
    let s = f64::from(slowdown);
    let g2 = gamma * gamma;
    let mut g = 1.0f64;
    let mut t: u64 = 1;
    while g > epsilon {
        g -= g2 * g / (s * t as f64 * (2.0 / g).log2());
        t += 1;
        if t > RECURRENCE_CAP {
            return Err(Error::CapExceeded(RECURRENCE_CAP));
        }
    }
    Ok(t)
}

/// Re-simulates the recurrence and returns `(G_{t−1}, G_t)` for checking.
pub fn recurrence_values(gamma: f64, slowdown: u32, t: u64) -> (f64, f64) {
    let (s, g2) = (f64::from(slowdown), gamma * gamma);
    let mut prev = f64::INFINITY;
    let mut g = 1.0f64;
    for i in 1..t {
        prev = g;
        g -= g2 * g / (s * i as f64 * (2.0 / g).log2());
    }
    (prev, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitterKind {
    Rnm,
    NoisyCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakLearningParams {
    /// Advantage `γ ∈ (0, 1/2]`.
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub max_splits: u32,
    pub alpha: f64,
    /// Entity count; 1 on a single machine.
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub schedule: ScheduleKind,
}

fn one() -> usize {
    1
}

impl WeakLearningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1/2], got {}", self.gamma)));
        }
        unit("epsilon", self.epsilon)?;
        unit("delta", self.delta)?;
        positive("alpha", self.alpha)?;
        if self.max_splits == 0 || self.k == 0 {
            return Err(Error::invalid("max_splits and k must be at least 1"));
        }
        Ok(())
    }

    /// `b = min_d B(d)`.
    pub fn min_budget(&self) -> Result<f64> {
        Ok(BudgetSchedule::new(self.schedule, self.max_splits)?.min_budget())
    }
}

/// The three explicit dataset-size terms and their max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequirementTerms {
    pub zeta: f64,
    pub alpha_level: f64,
    pub weight: u64,
    pub leaf: u64,
    pub split: u64,
    pub requirement: u64,
}

/// `ζ = γ²ε/(48·M·lg(2/ε))`.
pub fn requirement_zeta(p: &WeakLearningParams) -> f64 {
    p.gamma * p.gamma * p.epsilon / (48.0 * f64::from(p.max_splits) * (2.0 / p.epsilon).log2())
}

/// Weight-estimation term `ln(8kM/δ)·2k/(ζ·α_ℓ)` (k = 1 on one machine).
pub fn requirement_weight_term(p: &WeakLearningParams, kind: SplitterKind) -> Result<u64> {
    p.validate()?;
    let k = entity_factor(p, kind);
    let m = f64::from(p.max_splits);
    let alpha_level = p.alpha / 2.0 * p.min_budget()?;
    to_u64(((8.0 * k * m / p.delta).ln() * 2.0 * k / (requirement_zeta(p) * alpha_level)).ceil())
}

/// Leaf-labeling term `ln(4k(M+1)/δ)·8k(M+1)/(εα)`.
pub fn requirement_leaf_term(p: &WeakLearningParams, kind: SplitterKind) -> Result<u64> {
    p.validate()?;
    let k = entity_factor(p, kind);
    let m1 = f64::from(p.max_splits) + 1.0;
    to_u64(((4.0 * k * m1 / p.delta).ln() * 8.0 * k * m1 / (p.epsilon * p.alpha)).ceil())
}

/// Split term `(2M/ε)·N(ζ, α_ℓ/2, δ/(2(2M+1)))`.
pub fn requirement_split_term(p: &WeakLearningParams, kind: SplitterKind, h_size: usize) -> Result<u64> {
    p.validate()?;
    let m = f64::from(p.max_splits);
    let zeta = requirement_zeta(p);
    let alpha_level = p.alpha / 2.0 * p.min_budget()?;
    let delta_call = p.delta / (2.0 * (2.0 * m + 1.0));
    let n = match kind {
        SplitterKind::Rnm => rnm_sample_bound(zeta, alpha_level / 2.0, delta_call, h_size)?,
        SplitterKind::NoisyCounts => noisycounts_sample_bound(zeta, alpha_level / 2.0, delta_call, p.k, h_size)?,
    };
    to_u64((2.0 * m / p.epsilon * n as f64).ceil())
}

fn entity_factor(p: &WeakLearningParams, kind: SplitterKind) -> f64 {
    match kind {
        SplitterKind::Rnm => 1.0,
        SplitterKind::NoisyCounts => p.k as f64,
    }
}

/// Dataset size sufficient for DP-TopDown to reach error ε: the max of the
/// weight, leaf and split terms.
pub fn dataset_requirement(p: &WeakLearningParams, kind: SplitterKind, h_size: usize) -> Result<RequirementTerms> {
    let weight = requirement_weight_term(p, kind)?;
    let leaf = requirement_leaf_term(p, kind)?;
    let split = requirement_split_term(p, kind, h_size)?;
    Ok(RequirementTerms {
        zeta: requirement_zeta(p),
        alpha_level: p.alpha / 2.0 * p.min_budget()?,
        weight,
        leaf,
        split,
        requirement: weight.max(leaf).max(split),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensitivity_examples() {
        assert!((sensitivity_bound(Criterion::Entropy, 1024).unwrap() - 0.060547).abs() < 1e-6);
        assert!((sensitivity_bound(Criterion::Gini, 100).unwrap() - 0.2).abs() < 1e-15);
        assert!((sensitivity_bound(Criterion::RootGini, 100).unwrap() - 0.1).abs() < 1e-15);
        assert!(sensitivity_bound(Criterion::Gini, 2).is_err());
    }

    #[test]
    fn adversarial_gap_has_the_bound_order() {
        for m in [64, 512] {
            let gap = adversarial_sensitivity(Criterion::Entropy, m);
            let bound = sensitivity_bound(Criterion::Entropy, m).unwrap();
            assert!(gap <= bound && gap >= bound / 20.0, "m={m} gap={gap} bound={bound}");
        }
    }

    #[test]
    fn empirical_entropy_and_gini_within_bounds() {
        let mut rng = RandomSource::new(17, 0);
        let e = empirical_sensitivity(Criterion::Entropy, 64, 10_000, &mut rng);
        assert!(e <= sensitivity_bound(Criterion::Entropy, 64).unwrap(), "{e}");
        let g = empirical_sensitivity(Criterion::Gini, 20, 10_000, &mut rng);
        assert!(g <= 1.0, "{g}");
    }

    #[test]
    fn rnm_bound_golden() {
        let b = rnm_bound_b(0.1, 1.0, 0.05, 159).unwrap();
        assert!((b - 3225.854590309689).abs() < 1e-9);
        assert_eq!(rnm_sample_bound(0.1, 1.0, 0.05, 159).unwrap(), 52_124);
        assert_eq!(rnm_sample_bound(1.0, 1e6, 0.5, 2).unwrap(), 3);
        let b2 = rnm_bound_b(0.1, 2.0, 0.05, 159).unwrap();
        assert!((b2 - b / 2.0).abs() < 1e-9);
    }

    #[test]
    fn noisycounts_bound_golden() {
        let b = noisycounts_bound_b(0.1, 1.0, 0.05, 4, 100).unwrap();
        assert!((b - 2_420_594.186_2).abs() < 1e-3, "{b}");
        assert_eq!(noisycounts_sample_bound(0.1, 1.0, 0.05, 4, 100).unwrap(), 71_163_163);
        let b1 = noisycounts_bound_b(0.2, 1.0, 0.05, 1, 1).unwrap();
        assert!((b1 - 60.0 * (3.0f64 / 0.05).ln() / 0.2).abs() < 1e-9);
        let mut prev = 0;
        for k in 1..6 {
            let n = noisycounts_sample_bound(0.1, 1.0, 0.05, k, 10).unwrap();
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(rnm_sample_bound(0.0, 1.0, 0.1, 10).is_err());
        assert!(rnm_sample_bound(0.1, -1.0, 0.1, 10).is_err());
        assert!(rnm_sample_bound(0.1, 1.0, 0.1, 0).is_err());
        assert!(noisycounts_sample_bound(0.1, 1.0, 0.1, 0, 10).is_err());
        assert!(boosting_recurrence(0.5, 0.6, 4).is_err());
    }

    #[test]
    fn recurrence_golden() {
        assert_eq!(boosting_recurrence(1.0, 0.3, 4).unwrap(), 1);
        assert_eq!(boosting_recurrence(0.9, 0.5, 4).unwrap(), 4);
        assert_eq!(boosting_recurrence(0.9, 0.5, 8).unwrap(), 21);
        assert_eq!(boosting_recurrence(0.8, 0.5, 8).unwrap(), 2105);
        assert_eq!(boosting_recurrence(0.9, 0.4, 8).unwrap(), 157);
        let (prev, last) = recurrence_values(0.5, 8, 2105);
        assert!(last <= 0.8 && prev > 0.8);
    }

    fn requirement_params() -> WeakLearningParams {
        WeakLearningParams {
            gamma: 0.25,
            epsilon: 0.1,
            delta: 0.1,
            max_splits: 16,
            alpha: 1.0,
            k: 1,
            schedule: ScheduleKind::Uniform,
        }
    }

    #[test]
    fn requirement_single_machine_golden() {
        let t = dataset_requirement(&requirement_params(), SplitterKind::Rnm, 50).unwrap();
        assert!((t.zeta - 1.882960719073561e-06).abs() < 1e-20);
        assert_eq!(t.alpha_level, 0.03125);
        assert_eq!(t.weight, 243_178_405);
        assert_eq!(t.leaf, 8_871);
        assert_eq!(t.split, 211_591_309_208_640);
        assert_eq!(t.requirement, t.split);
    }

    #[test]
    fn requirement_distributed_golden_and_ratio() {
        let p = WeakLearningParams { k: 4, ..requirement_params() };
        let t = dataset_requirement(&p, SplitterKind::NoisyCounts, 50).unwrap();
        assert_eq!(t.weight, 1_161_188_795);
        assert_eq!(t.leaf, 43_022);
        assert_eq!(t.split, 98_549_199_379_196_800);
        assert_eq!(t.requirement, t.weight.max(t.leaf).max(t.split));
        let single = requirement_weight_term(&p, SplitterKind::Rnm).unwrap() as f64;
        let ratio = 4.0 * (8.0 * 4.0 * 16.0 / 0.1f64).ln() / (8.0 * 16.0 / 0.1f64).ln();
        assert!((t.weight as f64 / single - ratio).abs() < 1e-6);
    }

    #[test]
    fn requirement_monotonicity() {
        let base = dataset_requirement(&requirement_params(), SplitterKind::Rnm, 50).unwrap().requirement;
        let more_alpha = WeakLearningParams { alpha: 2.0, ..requirement_params() };
        let more_m = WeakLearningParams { max_splits: 32, ..requirement_params() };
        assert!(dataset_requirement(&more_alpha, SplitterKind::Rnm, 50).unwrap().requirement < base);
        assert!(dataset_requirement(&more_m, SplitterKind::Rnm, 50).unwrap().requirement > base);
    }

    #[test]
    fn overflow_is_reported() {
        let p = WeakLearningParams {
            alpha: 1e-12,
            max_splits: 512,
            schedule: ScheduleKind::Decay,
            ..requirement_params()
        };
        assert!(matches!(dataset_requirement(&p, SplitterKind::Rnm, 50), Err(Error::Overflow(_))));
    }
}
