//! Positive semidefinite kernels on ℝ^d.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gram eigenvalues below this are treated as evidence of indefiniteness.
pub const PSD_TOL: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `κ(x, y) = x·y + offset`.
    Linear { offset: f64 },
    /// `κ(x, y) = exp(−‖x − y‖² / (2σ²))`.
    Rbf { bandwidth: f64 },
}

impl Kernel {
    pub fn linear() -> Self {
        Kernel::Linear { offset: 0.0 }
    }

    /// Linear kernel on the augmented features `(x, 1)`.
    pub fn affine() -> Self {
        Kernel::Linear { offset: 1.0 }
    }

    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if bandwidth > 0.0 && bandwidth.is_finite() {
            Ok(Kernel::Rbf { bandwidth })
        } else {
            Err(Error::Domain {
                what: "rbf bandwidth",
                value: bandwidth,
                domain: "(0,∞)",
            })
        }
    }

    /// RBF kernel with the median-heuristic bandwidth for `points`.
    pub fn rbf_median(points: &[Vec<f64>]) -> Result<Self> {
        Self::rbf(median_heuristic(points)?)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear { offset } => x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + offset,
            Kernel::Rbf { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }

    pub fn gram(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&points[i], &points[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Smallest Gram eigenvalue on `points` (0 for an empty set).
    pub fn min_eigenvalue(&self, points: &[Vec<f64>]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        SymmetricEigen::new(self.gram(points))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Errors with [`Error::IndefiniteKernel`] when the Gram matrix on
    /// `points` has an eigenvalue below [`PSD_TOL`].
    pub fn check_psd(&self, points: &[Vec<f64>]) -> Result<()> {
        let lo = self.min_eigenvalue(points);
        if lo < PSD_TOL {
            Err(Error::IndefiniteKernel(lo))
        } else {
            Ok(())
        }
    }

    /// Parses `linear`, `affine`, `rbf:<bandwidth>`; a bare `rbf` takes its
    /// bandwidth from the median heuristic over `pooled`.
    pub fn parse_with_data(spec: &str, pooled: &[Vec<f64>]) -> Result<Self> {
        match spec.trim() {
            "rbf" => Self::rbf_median(pooled),
            other => other.parse(),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "linear" => return Ok(Kernel::linear()),
            "affine" => return Ok(Kernel::affine()),
            _ => {}
        }
        if let Some(bw) = s.strip_prefix("rbf:") {
            let bw: f64 = bw
                .parse()
                .map_err(|_| Error::invalid(format!("bad rbf bandwidth '{bw}'")))?;
            return Kernel::rbf(bw);
        }
        if let Some(off) = s.strip_prefix("linear:") {
            let offset: f64 = off
                .parse()
                .map_err(|_| Error::invalid(format!("bad linear offset '{off}'")))?;
            if !(offset >= 0.0) {
                return Err(Error::invalid("linear kernel offset must be non-negative"));
            }
            return Ok(Kernel::Linear { offset });
        }
        Err(Error::invalid(format!("unknown kernel '{s}'")))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Kernel::Linear { offset: 0.0 } => write!(f, "linear"),
            Kernel::Linear { offset: 1.0 } => write!(f, "affine"),
            Kernel::Linear { offset } => write!(f, "linear:{offset}"),
            Kernel::Rbf { bandwidth } => write!(f, "rbf:{bandwidth}"),
        }
    }
}

/// Median of pairwise Euclidean distances between distinct indices. Falls
/// back to the mean positive distance when more than half the pairs coincide.
pub fn median_heuristic(points: &[Vec<f64>]) -> Result<f64> {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(euclidean(&points[i], &points[j]));
        }
    }
    if d.is_empty() {
        return Err(Error::invalid("median heuristic needs at least two points"));
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    if median > 0.0 {
        return Ok(median);
    }
    let positive: Vec<f64> = d.into_iter().filter(|&x| x > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::invalid("median heuristic: all points coincide"));
    }
    Ok(positive.iter().sum::<f64>() / positive.len() as f64)
}

pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
