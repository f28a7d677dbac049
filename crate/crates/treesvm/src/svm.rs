//! Soft-margin binary C-SVC trained by sequential minimal optimization.
//!
//! The solver works on the dual in its minimization form
//! `f(a) = a^T Q a / 2 - e^T a` with `Q_ij = y_i y_j K(x_i, x_j)`,
//! subject to `0 <= a_i <= C` and `y^T a = 0`, keeping the gradient
//! `G = Q a - e` incrementally up to date. Each step picks the maximal
//! violating pair: the worst KKT violator from the "up" set paired with
//! the candidate maximizing the error gap on the "low" set.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, KernelCache, KernelParams, DEFAULT_CACHE_MB};

/// Curvature threshold below which a pair is considered degenerate.
const ETA_MIN: f64 = 1e-12;

/// Solver parameters. `max_passes` is the number of consecutive
/// no-progress iterations tolerated before halting; `None` means `10 * n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub c: f64,
    pub kkt_tol: f64,
    pub max_passes: Option<usize>,
    pub cache_mb: usize,
}

impl SolverConfig {
    pub fn new(c: f64) -> Result<Self> {
        let cfg = Self {
            c,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kkt_tol must be positive, got {}",
                self.kkt_tol
            )));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kkt_tol: 1e-3,
            max_passes: None,
            cache_mb: DEFAULT_CACHE_MB,
        }
    }
}

/// A trained binary classifier: support vectors, their signed dual
/// coefficients `a_i * y_i`, and the bias of the decision function.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub signed_coeffs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelParams,
    /// Cost the model was trained with, kept for auditability.
    pub c: f64,
    pub converged: bool,
    /// Final dual objective value reached by the solver.
    pub dual_objective: f64,
}

impl BinarySvmModel {
    pub fn n_sv(&self) -> usize {
        self.support_vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, |sv| sv.len())
    }

    /// The value whose sign classifies `z`:
    /// `sum_i coeff_i * K(sv_i, z) + bias`.
    pub fn decision_value(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let mut sum = self.bias;
        for (sv, &coeff) in self.support_vectors.iter().zip(&self.signed_coeffs) {
            sum += coeff * kernel_eval(&self.kernel, sv, z)?;
        }
        Ok(sum)
    }

    /// `+1` when the decision value is >= 0 (ties go to the positive class),
    /// `-1` otherwise.
    pub fn predict_sign(&self, z: &[f64]) -> Result<i32> {
        Ok(if self.decision_value(z)? >= 0.0 { 1 } else { -1 })
    }
}

struct Selection {
    i_up: usize,
    m: f64,
    j_low: usize,
    big_m: f64,
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y < 0.0 && alpha < c) || (y > 0.0 && alpha > 0.0)
}

/// Maximal violating pair over the feasible point (alpha, y).
/// `-y_i G_i` is maximized over the up set and minimized over the low set.
fn select_pair(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> Option<Selection> {
    let mut best_up: Option<(usize, f64)> = None;
    let mut best_low: Option<(usize, f64)> = None;
    for i in 0..alpha.len() {
        let v = -y[i] * grad[i];
        if in_up(alpha[i], y[i], c) && best_up.is_none_or(|(_, m)| v > m) {
            best_up = Some((i, v));
        }
        if in_low(alpha[i], y[i], c) && best_low.is_none_or(|(_, m)| v < m) {
            best_low = Some((i, v));
        }
    }
    match (best_up, best_low) {
        (Some((i_up, m)), Some((j_low, big_m))) => Some(Selection {
            i_up,
            m,
            j_low,
            big_m,
        }),
        _ => None,
    }
}

/// Train a soft-margin binary SVM on a dataset whose labels are exactly
/// {+1, -1}. On non-convergence the best-so-far model is returned with
/// `converged = false`.
pub fn train_binary(ds: &Dataset, kernel: &KernelParams, cfg: &SolverConfig) -> Result<BinarySvmModel> {
    cfg.validate()?;
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 instances to train".into(),
        ));
    }
    for &l in ds.labels() {
        if l != 1 && l != -1 {
            return Err(Error::InvalidParameter(format!(
                "binary training labels must be +1 or -1, got {l}"
            )));
        }
    }
    let y: Vec<f64> = ds.labels().iter().map(|&l| l as f64).collect();
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }

    let c = cfg.c;
    let tol = cfg.kkt_tol;
    let mut cache = KernelCache::new(*kernel, ds, cfg.cache_mb);

    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];

    let max_no_progress = cfg.max_passes.unwrap_or(10 * n).max(1);
    let hard_cap = (100 * n).max(100_000);
    let mut no_progress = 0usize;
    let mut converged = false;

    let mut iter = 0usize;
    'outer: while iter < hard_cap {
        iter += 1;
        let Some(sel) = select_pair(&alpha, &y, &grad, c) else {
            // Feasibility keeps both index sets populated when both labels
            // are present; reaching this means the data was degenerate.
            break;
        };
        if sel.m - sel.big_m <= tol {
            converged = true;
            break;
        }
        if no_progress >= max_no_progress {
            break;
        }

        let i = sel.i_up;
        let row_i = cache.row(i);
        let mut j = sel.j_low;
        let mut eta = row_i[i] + cache.row(j)[j] - 2.0 * row_i[j];
        if eta <= ETA_MIN {
            // Degenerate curvature: skip this pair and fall back to the most
            // violating usable partner for i.
            let mut fallback: Option<(usize, f64)> = None;
            for cand in 0..n {
                if cand == i || !in_low(alpha[cand], y[cand], c) {
                    continue;
                }
                let violation = sel.m - (-y[cand] * grad[cand]);
                if violation <= tol {
                    continue;
                }
                let eta_cand = row_i[i] + cache.row(cand)[cand] - 2.0 * row_i[cand];
                if eta_cand <= ETA_MIN {
                    continue;
                }
                if fallback.is_none_or(|(_, v)| violation > v) {
                    fallback = Some((cand, violation));
                }
            }
            match fallback {
                Some((cand, _)) => {
                    j = cand;
                    eta = row_i[i] + cache.row(j)[j] - 2.0 * row_i[j];
                }
                None => {
                    no_progress += 1;
                    continue 'outer;
                }
            }
        }

        let row_j = cache.row(j);
        let e_i = y[i] * grad[i];
        let e_j = y[j] * grad[j];

        let (lo, hi) = if y[i] != y[j] {
            ((alpha[j] - alpha[i]).max(0.0), (c + alpha[j] - alpha[i]).min(c))
        } else {
            ((alpha[i] + alpha[j] - c).max(0.0), (alpha[i] + alpha[j]).min(c))
        };

        let alpha_j_new = (alpha[j] + y[j] * (e_i - e_j) / eta).clamp(lo, hi);
        let delta_j = alpha_j_new - alpha[j];
        if delta_j.abs() < 1e-15 {
            no_progress += 1;
            continue;
        }
        no_progress = 0;
        let delta_i = -y[i] * y[j] * delta_j;
        alpha[i] += delta_i;
        alpha[j] += delta_j;

        for k in 0..n {
            grad[k] += delta_i * y[i] * y[k] * row_i[k] + delta_j * y[j] * y[k] * row_j[k];
        }
    }

    // Dual objective of the maximization form: sum(a) - a^T Q a / 2.
    let dual_objective = 0.5
        * alpha
            .iter()
            .zip(&grad)
            .map(|(&a, &g)| a * (1.0 - g))
            .sum::<f64>();

    // Snap numerically-at-bound multipliers before classifying them.
    let snap = 1e-12 * c.max(1.0);
    for a in alpha.iter_mut() {
        if *a <= snap {
            *a = 0.0;
        } else if *a >= c - snap {
            *a = c;
        }
    }

    // Bias: average of -y_i G_i over free support vectors; the midpoint of
    // the violating-pair interval when none are free.
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0 && alpha[i] < c).collect();
    let bias = if free.is_empty() {
        let sel = select_pair(&alpha, &y, &grad, c).expect("both labels present");
        (sel.m + sel.big_m) / 2.0
    } else {
        free.iter().map(|&i| -y[i] * grad[i]).sum::<f64>() / free.len() as f64
    };

    let mut support_vectors = Vec::new();
    let mut signed_coeffs = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support_vectors.push(ds.feature(i).to_vec());
            signed_coeffs.push(alpha[i] * y[i]);
        }
    }

    Ok(BinarySvmModel {
        support_vectors,
        signed_coeffs,
        bias,
        kernel: *kernel,
        c,
        converged,
        dual_objective,
    })
}

/// Build a {+1, -1} dataset from `ds`, mapping labels in `positive` to +1
/// and everything else to -1.
pub fn to_signed(ds: &Dataset, positive: &[i32]) -> Result<Dataset> {
    ds.relabel(|l| if positive.contains(&l) { 1 } else { -1 })
}
