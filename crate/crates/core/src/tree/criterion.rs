use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probabilities that drift slightly outside [0, 1].
const PROB_TOLERANCE: f64 = 1e-9;

/// Splitting criterion `G`: concave, symmetric about 1/2, `G(1/2) = 1`,
/// `G(0) = G(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Binary entropy in bits.
    #[default]
    Entropy,
    /// `4q(1 − q)`.
    Gini,
    /// `2·sqrt(q(1 − q))`.
    RootGini,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Entropy, Criterion::Gini, Criterion::RootGini];

    /// `G(q)` for the binary case, `q` the fraction of label 1.
    pub fn value(self, q: f64) -> Result<f64> {
        if !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&q) {
            return Err(Error::invalid(format!("probability {q} outside [0, 1]")));
        }
        let q = q.clamp(0.0, 1.0);
        Ok(self.binary(q))
    }

    fn binary(self, q: f64) -> f64 {
        match self {
            Criterion::Entropy => xlgx(q) + xlgx(1.0 - q),
            Criterion::Gini => 4.0 * q * (1.0 - q),
            Criterion::RootGini => 2.0 * (q * (1.0 - q)).sqrt(),
        }
    }

    /// Generalized criterion over a label distribution given as counts.
    ///
    /// Entropy is normalized by `lg |Y|`, Gini by `|Y|/(|Y| − 1)`, and Root
    /// Gini is the square root of normalized Gini, so each reduces to the
    /// binary formula for two labels. A zero total yields 0.
    pub fn of_counts(self, counts: &[f64]) -> f64 {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 || counts.len() < 2 {
            return 0.0;
        }
        if counts.len() == 2 {
            return self.binary(counts[1] / total);
        }
        let k = counts.len() as f64;
        match self {
            Criterion::Entropy => {
                counts.iter().map(|&c| xlgx(c / total)).sum::<f64>() / k.log2()
            }
            Criterion::Gini => normalized_gini(counts, total, k),
            Criterion::RootGini => normalized_gini(counts, total, k).sqrt(),
        }
    }
}

fn normalized_gini(counts: &[f64], total: f64, k: f64) -> f64 {
    let sum_sq: f64 = counts.iter().map(|&c| (c / total) * (c / total)).sum();
    ((1.0 - sum_sq) * k / (k - 1.0)).max(0.0)
}

/// `−x·lg x` with `0·lg 0 = 0`.
fn xlgx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Criterion::Entropy),
            "gini" => Ok(Criterion::Gini),
            "root-gini" | "rootgini" => Ok(Criterion::RootGini),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}
