//! Training objective and its gradient with respect to generator outputs.
//!
//! For outputs `Y_1..Y_n`, frequencies `W_1..W_m` and target values
//! `Φ_l = Φ_P(W_l)`:
//!
//! ```text
//! L = 1/(m n(n−1)) Σ_{i≠j} Σ_l cos(W_lᵀ(Y_i − Y_j))
//!     − 2/(nm) Σ_{i,l} [cos(W_lᵀY_i)·Re Φ_l + sin(W_lᵀY_i)·Im Φ_l]
//! ```
//!
//! The pair sum is evaluated through `C_l = Σ_i cos θ_il`, `S_l = Σ_i sin θ_il`
//! as `Σ_l (C_l² + S_l² − n)`, which is O(nm) instead of O(n²m).

use serde::{Deserialize, Serialize};

use crate::charfn::{check_dim, CharFn};
use crate::error::{Error, Result};
use crate::kernel::{cp_from_values, FrequencyBatch};
use crate::numkit::{dot, gemm, par_blocks, ComplexValue, MatRef, Matrix, BLOCK_ROWS};

/// Sine/cosine tables are kept between the two passes when `n·m` is at most
/// this many entries; larger problems recompute them.
const TRIG_CACHE_LIMIT: usize = 1 << 24;

/// Loss, `Ĉ_P`, and their sum (an estimate of `MMD²`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub cp_hat: f64,
    pub interpretable: f64,
}

impl LossReport {
    pub fn new(loss: f64, cp_hat: f64) -> Self {
        Self {
            loss,
            cp_hat,
            interpretable: loss + cp_hat,
        }
    }
}

/// Target values `Φ_P(W_l)` split into real and imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetValues {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TargetValues {
    pub fn evaluate(phi: &dyn CharFn, freqs: &FrequencyBatch) -> Result<Self> {
        Ok(Self::from_complex(&phi.eval_batch(&freqs.w)?))
    }

    pub fn from_complex(values: &[ComplexValue]) -> Self {
        Self {
            re: values.iter().map(|v| v.re).collect(),
            im: values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn cp_hat(&self) -> f64 {
        let v: Vec<ComplexValue> = self.re.iter().zip(&self.im).map(|(r, i)| ComplexValue::new(*r, *i)).collect();
        cp_from_values(&v)
    }
}

fn check_inputs(y: &Matrix, w: &Matrix, target: &TargetValues) -> Result<()> {
    if y.rows() < 2 {
        return Err(Error::TooFewRows {
            what: "loss",
            needed: 2,
            got: y.rows(),
        });
    }
    if w.rows() == 0 {
        return Err(Error::Empty("frequency batch"));
    }
    check_dim(w.cols(), y.cols())?;
    check_dim(w.rows(), target.re.len())?;
    check_dim(w.rows(), target.im.len())
}

/// Per-block cos/sin of `θ = Y_b Wᵀ` plus the block's column sums.
struct TrigBlock {
    cos: Vec<f64>,
    sin: Vec<f64>,
    col_cos: Vec<f64>,
    col_sin: Vec<f64>,
}

fn trig_block(y: &Matrix, w: &Matrix, start: usize, end: usize, keep: bool) -> TrigBlock {
    let (rows, m, d) = (end - start, w.rows(), w.cols());
    let mut theta = vec![0.0; rows * m];
    gemm(
        rows,
        d,
        m,
        1.0,
        MatRef::normal(&y.data()[start * d..end * d], d),
        MatRef::transposed(w.data(), d),
        0.0,
        &mut theta,
    );
    let mut col_cos = vec![0.0; m];
    let mut col_sin = vec![0.0; m];
    let mut sin = if keep { vec![0.0; rows * m] } else { Vec::new() };
    for r in 0..rows {
        for l in 0..m {
            let (s, c) = theta[r * m + l].sin_cos();
            col_cos[l] += c;
            col_sin[l] += s;
            if keep {
                theta[r * m + l] = c;
                sin[r * m + l] = s;
            }
        }
    }
    TrigBlock {
        cos: if keep { theta } else { Vec::new() },
        sin,
        col_cos,
        col_sin,
    }
}

/// Column sums `C_l`, `S_l`, and the per-block tables when cached.
fn column_sums(y: &Matrix, w: &Matrix, keep: bool) -> (Vec<f64>, Vec<f64>, Vec<TrigBlock>) {
    let blocks = par_blocks(y.rows(), BLOCK_ROWS, |r| trig_block(y, w, r.start, r.end, keep));
    let m = w.rows();
    let mut c = vec![0.0; m];
    let mut s = vec![0.0; m];
    for b in &blocks {
        for l in 0..m {
            c[l] += b.col_cos[l];
            s[l] += b.col_sin[l];
        }
    }
    (c, s, blocks)
}

fn loss_from_sums(n: usize, c: &[f64], s: &[f64], target: &TargetValues) -> f64 {
    let (nf, m) = (n as f64, c.len() as f64);
    let mut pair = 0.0;
    let mut cross = 0.0;
    for l in 0..c.len() {
        pair += c[l] * c[l] + s[l] * s[l] - nf;
        cross += c[l] * target.re[l] + s[l] * target.im[l];
    }
    pair / (m * nf * (nf - 1.0)) - 2.0 * cross / (nf * m)
}

/// Loss from precomputed target values.
pub fn loss_value_with(y: &Matrix, w: &Matrix, target: &TargetValues) -> Result<f64> {
    check_inputs(y, w, target)?;
    let (c, s, _) = column_sums(y, w, false);
    Ok(loss_from_sums(y.rows(), &c, &s, target))
}

/// Loss and `∂L/∂Y` from precomputed target values.
pub fn loss_and_grad_with(y: &Matrix, w: &Matrix, target: &TargetValues) -> Result<(f64, Matrix)> {
    check_inputs(y, w, target)?;
    let (n, m, d) = (y.rows(), w.rows(), w.cols());
    let keep = n.saturating_mul(m) <= TRIG_CACHE_LIMIT;
    let (c, s, blocks) = column_sums(y, w, keep);
    let loss = loss_from_sums(n, &c, &s, target);

    // ∂L/∂Y_i = Σ_l (a_l cos θ_il + b_l sin θ_il) W_l.
    let (nf, mf) = (n as f64, m as f64);
    let pair_scale = 2.0 / (mf * nf * (nf - 1.0));
    let cross_scale = 2.0 / (nf * mf);
    let a: Vec<f64> = (0..m).map(|l| pair_scale * s[l] - cross_scale * target.im[l]).collect();
    let b: Vec<f64> = (0..m).map(|l| -pair_scale * c[l] + cross_scale * target.re[l]).collect();

    let ranges = crate::numkit::block_ranges(n, BLOCK_ROWS);
    let grads = par_blocks(n, BLOCK_ROWS, |range| {
        let rows = range.end - range.start;
        let bi = range.start / BLOCK_ROWS;
        let recomputed;
        let tb = if keep {
            &blocks[bi]
        } else {
            recomputed = trig_block(y, w, range.start, range.end, true);
            &recomputed
        };
        let mut coef = vec![0.0; rows * m];
        for r in 0..rows {
            for l in 0..m {
                coef[r * m + l] = a[l] * tb.cos[r * m + l] + b[l] * tb.sin[r * m + l];
            }
        }
        let mut g = vec![0.0; rows * d];
        gemm(rows, m, d, 1.0, MatRef::normal(&coef, m), MatRef::normal(w.data(), d), 0.0, &mut g);
        g
    });
    debug_assert_eq!(ranges.len(), grads.len());
    let data: Vec<f64> = grads.into_iter().flatten().collect();
    Ok((loss, Matrix::from_raw(n, d, data)))
}

/// Training loss `L(Y, W, Φ_P)`.
pub fn loss_value(y: &Matrix, freqs: &FrequencyBatch, phi: &dyn CharFn) -> Result<f64> {
    check_dim(phi.dim(), y.cols())?;
    let target = TargetValues::evaluate(phi, freqs)?;
    loss_value_with(y, &freqs.w, &target)
}

/// `∂L/∂Y`, one row per output.
pub fn loss_grad_outputs(y: &Matrix, freqs: &FrequencyBatch, phi: &dyn CharFn) -> Result<Matrix> {
    check_dim(phi.dim(), y.cols())?;
    let target = TargetValues::evaluate(phi, freqs)?;
    Ok(loss_and_grad_with(y, &freqs.w, &target)?.1)
}

/// Loss together with `Ĉ_P`.
pub fn loss_report(y: &Matrix, freqs: &FrequencyBatch, phi: &dyn CharFn) -> Result<LossReport> {
    check_dim(phi.dim(), y.cols())?;
    let target = TargetValues::evaluate(phi, freqs)?;
    let loss = loss_value_with(y, &freqs.w, &target)?;
    Ok(LossReport::new(loss, target.cp_hat()))
}

/// Reference O(n²m) evaluation of the same loss, summing every ordered pair
/// `i ≠ j` directly.
pub fn loss_value_bruteforce(y: &Matrix, freqs: &FrequencyBatch, phi: &dyn CharFn) -> Result<f64> {
    check_dim(phi.dim(), y.cols())?;
    let target = TargetValues::evaluate(phi, freqs)?;
    check_inputs(y, &freqs.w, &target)?;
    let (n, m) = (y.rows(), freqs.len());
    let mut pair = 0.0;
    let mut delta = vec![0.0; y.cols()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for (dv, (a, b)) in delta.iter_mut().zip(y.row(i).iter().zip(y.row(j))) {
                *dv = a - b;
            }
            for w in freqs.w.iter_rows() {
                pair += dot(w, &delta).cos();
            }
        }
    }
    let mut cross = 0.0;
    for yi in y.iter_rows() {
        for (l, w) in freqs.w.iter_rows().enumerate() {
            let (s, c) = dot(w, yi).sin_cos();
            cross += c * target.re[l] + s * target.im[l];
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(pair / (mf * nf * (nf - 1.0)) - 2.0 * cross / (nf * mf))
}
