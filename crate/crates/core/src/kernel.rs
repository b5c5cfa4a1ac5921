//! Translation-invariant kernels and MMD estimators.
//!
//! A kernel `k(x, y) = E[exp(i Wᵀ(x − y))]` is described by its frequency
//! law `W`. Mixtures over a bandwidth set `B` draw a bandwidth `η` first and
//! then a frequency at that bandwidth:
//!
//! | family   | `k` at bandwidth `σ`      | `W` at bandwidth `σ`             |
//! |----------|---------------------------|----------------------------------|
//! | gaussian | `exp(−‖x − y‖₂² / σ)`     | i.i.d. `N(0, 2/σ)` components    |
//! | laplace  | `exp(−‖x − y‖₁ / σ)`      | i.i.d. Cauchy(0, 1/σ) components |

use serde::{Deserialize, Serialize};

use crate::charfn::{check_dim, CharFn};
use crate::error::{invalid, Error, Result};
use crate::numkit::{dot, par_blocks, ComplexValue, Matrix, RngStream, BLOCK_ROWS};

/// Bandwidth set of the default kernel mixture.
pub const DEFAULT_BANDWIDTHS: [f64; 5] = [0.02, 0.5, 1.0, 5.0, 100.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
}

/// Mixture of one kernel family over a bandwidth set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelDoc", into = "KernelDoc")]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidths: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    family: KernelFamily,
    bandwidths: Vec<f64>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl TryFrom<KernelDoc> for KernelSpec {
    type Error = Error;

    fn try_from(doc: KernelDoc) -> Result<Self> {
        let spec = Self::new(doc.family, doc.bandwidths)?;
        match doc.weights {
            Some(w) => spec.with_weights(w),
            None => Ok(spec),
        }
    }
}

impl From<KernelSpec> for KernelDoc {
    fn from(s: KernelSpec) -> Self {
        Self {
            family: s.family,
            bandwidths: s.bandwidths,
            weights: Some(s.weights),
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::new(KernelFamily::Gaussian, DEFAULT_BANDWIDTHS.to_vec()).expect("default bandwidths are valid")
    }
}

impl KernelSpec {
    /// Uniform mixture over `bandwidths`.
    pub fn new(family: KernelFamily, bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(invalid("bandwidths", "must not be empty"));
        }
        for (i, b) in bandwidths.iter().enumerate() {
            if !(*b > 0.0) || !b.is_finite() {
                return Err(invalid(format!("bandwidths[{i}]"), format!("{b} is not a positive number")));
            }
        }
        let k = bandwidths.len();
        Ok(Self {
            family,
            bandwidths,
            weights: vec![1.0 / k as f64; k],
        })
    }

    pub fn gaussian(bandwidths: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidths)
    }

    pub fn laplace(bandwidths: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Laplace, bandwidths)
    }

    /// Replaces the uniform mixture weights.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.bandwidths.len() {
            return Err(invalid(
                "weights",
                format!("{} weights for {} bandwidths", weights.len(), self.bandwidths.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("weights", format!("sum to {total}, not 1")));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn draw_bandwidth(&self, stream: &mut RngStream) -> f64 {
        let u = stream.uniform01();
        let mut acc = 0.0;
        for (b, w) in self.bandwidths.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *b;
            }
        }
        *self.bandwidths.last().expect("nonempty")
    }

    /// `ψ(Δ)` for a difference vector.
    fn psi(&self, delta: impl Iterator<Item = f64>) -> f64 {
        let dist = match self.family {
            KernelFamily::Gaussian => delta.map(|v| v * v).sum::<f64>(),
            KernelFamily::Laplace => delta.map(f64::abs).sum::<f64>(),
        };
        let mut acc = 0.0;
        for (b, w) in self.bandwidths.iter().zip(&self.weights) {
            let e = dist / b;
            if e < 745.0 {
                acc += w * (-e).exp();
            }
        }
        acc
    }
}

/// `m × d` frequency draws together with the kernel they were drawn for.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyBatch {
    pub w: Matrix,
    pub spec: KernelSpec,
}

impl FrequencyBatch {
    pub fn len(&self) -> usize {
        self.w.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }
}

/// Draws `m` frequencies: per row a bandwidth `η` from the mixture, then a
/// Gaussian vector scaled by `√(2/η)` or a Cauchy vector scaled by `1/η`.
pub fn sample_frequencies(spec: &KernelSpec, stream: &mut RngStream, m: usize, d: usize) -> Result<FrequencyBatch> {
    if m == 0 || d == 0 {
        return Err(invalid("m/d", "frequency batch must be nonempty"));
    }
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        let eta = spec.draw_bandwidth(stream);
        match spec.family {
            KernelFamily::Gaussian => {
                let scale = (2.0 / eta).sqrt();
                data.extend((0..d).map(|_| scale * stream.std_normal()));
            }
            KernelFamily::Laplace => {
                let scale = 1.0 / eta;
                data.extend((0..d).map(|_| scale * stream.std_cauchy()));
            }
        }
    }
    Ok(FrequencyBatch {
        w: Matrix::new(m, d, data)?,
        spec: spec.clone(),
    })
}

/// Mixture kernel `Σ_b w_b ψ_b(x − y)` in closed form.
pub fn closed_form_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(spec.psi(x.iter().zip(y).map(|(a, b)| a - b)))
}

/// Random-feature kernel `k_m(x, y) = (1/m) Σ_l cos(W_lᵀ(x − y))`.
pub fn random_feature_kernel(freqs: &FrequencyBatch, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(freqs.dim(), x.len())?;
    check_dim(x.len(), y.len())?;
    let delta: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let s: f64 = freqs.w.iter_rows().map(|w| dot(w, &delta).cos()).sum();
    Ok(s / freqs.len() as f64)
}

/// `Ĉ_P = (1/m) Σ_l |Φ_P(W_l)|²`.
pub fn estimate_cp(phi: &dyn CharFn, freqs: &FrequencyBatch) -> Result<f64> {
    if freqs.is_empty() {
        return Err(Error::Empty("frequency batch"));
    }
    Ok(cp_from_values(&phi.eval_batch(&freqs.w)?))
}

/// [`estimate_cp`] from precomputed values `Φ_P(W_l)`.
pub fn cp_from_values(values: &[ComplexValue]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum::<f64>() / values.len() as f64
}

/// U-statistic estimate of `MMD²_{k_m}(P_n, P)` computed pair by pair.
///
/// `(1/(n(n−1))) Σ_{i≠j} k_m(Y_i, Y_j) − (2/n) Σ_i Re[(1/m) Σ_l e^{−iW_lᵀY_i} Φ_P(W_l)] + Ĉ_P`.
///
/// This is O(n²m) with complex arithmetic for the cross term; it shares no
/// code with [`crate::loss::loss_value`] and serves as its cross-check.
pub fn mmd2_u_cf(sample: &Matrix, phi: &dyn CharFn, freqs: &FrequencyBatch) -> Result<f64> {
    let n = sample.rows();
    if n < 2 {
        return Err(Error::TooFewRows {
            what: "mmd2_u_cf",
            needed: 2,
            got: n,
        });
    }
    if freqs.is_empty() {
        return Err(Error::Empty("frequency batch"));
    }
    check_dim(freqs.dim(), sample.cols())?;
    check_dim(phi.dim(), sample.cols())?;
    let m = freqs.len() as f64;
    let values = phi.eval_batch(&freqs.w)?;

    let mut pair = 0.0;
    let mut delta = vec![0.0; sample.cols()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for (d, (a, b)) in delta.iter_mut().zip(sample.row(i).iter().zip(sample.row(j))) {
                *d = a - b;
            }
            let k: f64 = freqs.w.iter_rows().map(|w| dot(w, &delta).cos()).sum();
            pair += k / m;
        }
    }
    pair /= (n * (n - 1)) as f64;

    let mut cross = ComplexValue::new(0.0, 0.0);
    for y in sample.iter_rows() {
        for (w, v) in freqs.w.iter_rows().zip(&values) {
            cross += ComplexValue::from_polar(1.0, -dot(w, y)) * v;
        }
    }
    let cross = 2.0 * cross.re / (n as f64 * m);

    Ok(pair - cross + cp_from_values(&values))
}

/// Unbiased two-sample `MMD²` with the closed-form kernel:
/// `(1/(n(n−1)))Σ_{i≠j}k(X_i,X_j) + (1/(n'(n'−1)))Σ_{i≠j}k(Y_i,Y_j) − (2/(nn'))Σ_{i,j}k(X_i,Y_j)`.
pub fn mmd2_u_twosample(x: &Matrix, y: &Matrix, spec: &KernelSpec) -> Result<f64> {
    for (what, s) in [("mmd2_u_twosample (X)", x), ("mmd2_u_twosample (Y)", y)] {
        if s.rows() < 2 {
            return Err(Error::TooFewRows {
                what,
                needed: 2,
                got: s.rows(),
            });
        }
    }
    check_dim(x.cols(), y.cols())?;
    let (n, n2) = (x.rows() as f64, y.rows() as f64);
    let kxx = 2.0 * within_sum(x, spec) / (n * (n - 1.0));
    let kyy = 2.0 * within_sum(y, spec) / (n2 * (n2 - 1.0));
    let kxy = cross_sum(x, y, spec) / (n * n2);
    Ok(kxx + kyy - 2.0 * kxy)
}

/// `Σ_{i<j} k(X_i, X_j)`, blocked over `i`.
pub(crate) fn within_sum(x: &Matrix, spec: &KernelSpec) -> f64 {
    par_blocks(x.rows(), BLOCK_ROWS, |range| {
        let mut s = 0.0;
        for i in range {
            let xi = x.row(i);
            for j in i + 1..x.rows() {
                s += spec.psi(xi.iter().zip(x.row(j)).map(|(a, b)| a - b));
            }
        }
        s
    })
    .into_iter()
    .sum()
}

/// `Σ_{i,j} k(X_i, Y_j)`, blocked over `i`.
pub(crate) fn cross_sum(x: &Matrix, y: &Matrix, spec: &KernelSpec) -> f64 {
    par_blocks(x.rows(), BLOCK_ROWS, |range| {
        let mut s = 0.0;
        for i in range {
            let xi = x.row(i);
            for yj in y.iter_rows() {
                s += spec.psi(xi.iter().zip(yj).map(|(a, b)| a - b));
            }
        }
        s
    })
    .into_iter()
    .sum()
}
