use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument("distributions must be nonempty".into()));
    }
    Ok(())
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Wasserstein-1 distance between the uniform empirical distributions on
/// `p` and `q`: `(1/n) Σ |sort(p)_i − sort(q)_i|`.
pub fn wasserstein_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let (sp, sq) = (sorted(p), sorted(q));
    Ok(sp.iter().zip(&sq).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

pub fn euclidean(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    Ok(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// One minus cosine similarity. A zero vector is treated as orthogonal to
/// everything (distance 1).
pub fn cosine_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - dot / (np * nq))
}

/// Distance used by the two-means clustering. Wasserstein compares value
/// distributions and ignores element order; Euclidean and cosine compare
/// vectors position by position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Wasserstein,
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn distance(self, p: &[f64], q: &[f64]) -> Result<f64> {
        match self {
            Metric::Wasserstein => wasserstein_1d(p, q),
            Metric::Euclidean => euclidean(p, q),
            Metric::Cosine => cosine_distance(p, q),
        }
    }

    /// Cluster center of `members` (all of equal length, at least one).
    /// For Wasserstein this is the quantile-wise mean, i.e. the barycenter
    /// of uniform empirical distributions, and comes out sorted ascending;
    /// the other metrics use the element-wise mean.
    pub fn centroid(self, members: &[&[f64]]) -> Vec<f64> {
        let len = members[0].len();
        let mut acc = vec![0.0; len];
        for m in members {
            let owned;
            let values: &[f64] = if self == Metric::Wasserstein {
                owned = sorted(m);
                &owned
            } else {
                m
            };
            for (a, v) in acc.iter_mut().zip(values) {
                *a += v;
            }
        }
        let n = members.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Wasserstein => "wasserstein",
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wasserstein" => Ok(Metric::Wasserstein),
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}
