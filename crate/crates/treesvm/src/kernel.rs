//! Kernel functions and an LRU row cache shared by the solver and by
//! model evaluation.

use std::collections::HashMap;
use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Default cache budget, following the LIBSVM convention.
pub const DEFAULT_CACHE_MB: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rbf,
    Linear,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::Rbf => write!(f, "rbf"),
            KernelKind::Linear => write!(f, "linear"),
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel selection plus the RBF width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl KernelParams {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rbf gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            kind: KernelKind::Rbf,
            gamma,
        })
    }

    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: 0.0,
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Evaluate the kernel: RBF `exp(-gamma * ||x-y||^2)` or the inner product.
pub fn kernel_eval(p: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(match p.kind {
        KernelKind::Linear => dot(x, y),
        KernelKind::Rbf => {
            // ||x||^2 + ||y||^2 - 2 x.y, clamped at 0 against negative round-off.
            let d2 = (dot(x, x) + dot(y, y) - 2.0 * dot(x, y)).max(0.0);
            (-p.gamma * d2).exp()
        }
    })
}

/// Kernel rows over a fixed dataset with least-recently-used eviction under
/// a byte budget. Single-writer: callers needing concurrency give each
/// worker its own cache. Misses are recomputed idempotently, so cached rows
/// are byte-identical to fresh computation.
pub struct KernelCache<'a> {
    params: KernelParams,
    ds: &'a Dataset,
    sq_norms: Vec<f64>,
    rows: HashMap<usize, (u64, Arc<Vec<f64>>)>,
    stamp: u64,
    budget_rows: usize,
}

impl<'a> KernelCache<'a> {
    pub fn new(params: KernelParams, ds: &'a Dataset, budget_mb: usize) -> Self {
        let n = ds.len();
        let sq_norms = match params.kind {
            KernelKind::Rbf => ds.features().iter().map(|x| dot(x, x)).collect(),
            KernelKind::Linear => Vec::new(),
        };
        let row_bytes = n.max(1) * std::mem::size_of::<f64>();
        let budget_rows = (budget_mb.saturating_mul(1024 * 1024) / row_bytes).max(1);
        Self {
            params,
            ds,
            sq_norms,
            rows: HashMap::new(),
            stamp: 0,
            budget_rows,
        }
    }

    fn compute_row(&self, i: usize) -> Vec<f64> {
        let n = self.ds.len();
        let xi = self.ds.feature(i);
        let mut row = Vec::with_capacity(n);
        match self.params.kind {
            KernelKind::Linear => {
                for j in 0..n {
                    row.push(dot(xi, self.ds.feature(j)));
                }
            }
            KernelKind::Rbf => {
                let ni = self.sq_norms[i];
                for j in 0..n {
                    let d2 = (ni + self.sq_norms[j] - 2.0 * dot(xi, self.ds.feature(j))).max(0.0);
                    row.push((-self.params.gamma * d2).exp());
                }
            }
        }
        row
    }

    /// Row `i` of the Gram matrix: `row[j] = K(x_i, x_j)`.
    pub fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        self.stamp += 1;
        if let Some((stamp, row)) = self.rows.get_mut(&i) {
            *stamp = self.stamp;
            return Arc::clone(row);
        }
        let row = Arc::new(self.compute_row(i));
        while self.rows.len() >= self.budget_rows {
            let oldest = self
                .rows
                .iter()
                .min_by_key(|(_, (stamp, _))| *stamp)
                .map(|(&k, _)| k)
                .expect("nonempty map has a minimum");
            self.rows.remove(&oldest);
        }
        self.rows.insert(i, (self.stamp, Arc::clone(&row)));
        row
    }

    pub fn cached_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Spec-shaped free function over the cache.
pub fn kernel_row(cache: &mut KernelCache<'_>, i: usize) -> Arc<Vec<f64>> {
    cache.row(i)
}
