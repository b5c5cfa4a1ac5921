use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{gemm, MatRef, Matrix, RngStream};

/// Layer sizes of a ReLU network with a linear output layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArch {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    /// Requires depth ≥ 2 and every width ≥ 7·output_dim + 1.
    #[serde(default)]
    pub theory_guard: bool,
}

impl NetArch {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_widths,
            output_dim,
            theory_guard: false,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Latent dimension `2d`, hidden widths 300 and 50.
    pub fn default_for(output_dim: usize) -> Result<Self> {
        Self::new(2 * output_dim, vec![300, 50], output_dim)
    }

    pub fn with_theory_guard(mut self, on: bool) -> Result<Self> {
        self.theory_guard = on;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(invalid("input_dim", "must be positive"));
        }
        if self.output_dim == 0 {
            return Err(invalid("output_dim", "must be positive"));
        }
        if let Some(i) = self.hidden_widths.iter().position(|&w| w == 0) {
            return Err(invalid(format!("hidden_widths[{i}]"), "must be positive"));
        }
        if self.theory_guard {
            if self.hidden_widths.len() < 2 {
                return Err(invalid("hidden_widths", "theory_guard needs at least two hidden layers"));
            }
            let min = 7 * self.output_dim + 1;
            if let Some(i) = self.hidden_widths.iter().position(|&w| w < min) {
                return Err(invalid(
                    format!("hidden_widths[{i}]"),
                    format!("theory_guard needs width ≥ {min}"),
                ));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per affine layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut sizes = Vec::with_capacity(self.hidden_widths.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden_widths);
        sizes.push(self.output_dim);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Offsets of each layer's weight block (`fan_in × fan_out`, row-major)
    /// and bias inside the flat parameter vector.
    fn offsets(&self) -> Vec<LayerOffsets> {
        let mut at = 0;
        self.layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let o = LayerOffsets {
                    fan_in,
                    fan_out,
                    weights: at,
                    bias: at + fan_in * fan_out,
                };
                at = o.bias + fan_out;
                o
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct LayerOffsets {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Flat parameter vector θ. Layer `k` stores a `fan_in × fan_out` weight
/// block followed by `fan_out` biases; a layer maps `h ↦ hW + b`.
#[derive(Debug, Serialize, Deserialize)]
pub struct MlpParams {
    arch: NetArch,
    theta: Vec<f64>,
    #[serde(skip, default = "next_generation")]
    generation: u64,
}

impl Clone for MlpParams {
    fn clone(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            theta: self.theta.clone(),
            generation: next_generation(),
        }
    }
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.theta == other.theta
    }
}

impl MlpParams {
    pub fn from_theta(arch: NetArch, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(Self {
            arch,
            theta,
            generation: next_generation(),
        })
    }

    pub fn zeros(arch: NetArch) -> Result<Self> {
        let p = arch.param_count();
        Self::from_theta(arch, vec![0.0; p])
    }

    pub fn arch(&self) -> &NetArch {
        &self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Mutable access; invalidates every outstanding forward cache.
    pub fn theta_mut(&mut self) -> &mut [f64] {
        self.generation = next_generation();
        &mut self.theta
    }

    /// Weight block of layer `k` (`fan_in × fan_out`) and its biases.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let o = self.arch.offsets()[k];
        (
            &self.theta[o.weights..o.bias],
            &self.theta[o.bias..o.bias + o.fan_out],
        )
    }
}

/// He initialization: weights `N(0, 2/fan_in)`, biases zero.
pub fn init_mlp(arch: &NetArch, stream: &mut RngStream) -> Result<MlpParams> {
    arch.validate()?;
    let mut theta = vec![0.0; arch.param_count()];
    for o in arch.offsets() {
        let sd = (2.0 / o.fan_in as f64).sqrt();
        for w in &mut theta[o.weights..o.bias] {
            *w = sd * stream.std_normal();
        }
    }
    MlpParams::from_theta(arch.clone(), theta)
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    rows: usize,
    input: Vec<f64>,
    /// Post-ReLU outputs of each hidden layer; `> 0` exactly where the
    /// pre-activation was positive.
    hidden: Vec<Vec<f64>>,
}

/// Runs the network on each row of `z`.
pub fn forward(params: &MlpParams, z: &Matrix) -> Result<(Matrix, ForwardCache)> {
    let arch = &params.arch;
    if z.cols() != arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim,
            got: z.cols(),
        });
    }
    let n = z.rows();
    let offsets = arch.offsets();
    let last = offsets.len() - 1;
    let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(last);
    let mut out = Vec::new();
    for (k, o) in offsets.iter().enumerate() {
        let input: &[f64] = if k == 0 { z.data() } else { &hidden[k - 1] };
        let bias = &params.theta[o.bias..o.bias + o.fan_out];
        let mut h: Vec<f64> = (0..n).flat_map(|_| bias.iter().copied()).collect();
        gemm(
            n,
            o.fan_in,
            o.fan_out,
            1.0,
            MatRef::normal(input, o.fan_in),
            MatRef::normal(&params.theta[o.weights..o.bias], o.fan_out),
            1.0,
            &mut h,
        );
        if k == last {
            out = h;
        } else {
            h.iter_mut().for_each(|v| *v = v.max(0.0));
            hidden.push(h);
        }
    }
    let cache = ForwardCache {
        generation: params.generation,
        rows: n,
        input: z.data().to_vec(),
        hidden,
    };
    Ok((Matrix::from_raw(n, arch.output_dim, out), cache))
}

/// Gradient of a scalar loss with respect to θ, given `∂L/∂Y` for the batch
/// that produced `cache`.
pub fn backward(params: &MlpParams, cache: &ForwardCache, grad_outputs: &Matrix) -> Result<Vec<f64>> {
    if cache.generation != params.generation {
        return Err(Error::StaleCache);
    }
    let arch = &params.arch;
    let n = cache.rows;
    if grad_outputs.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grad_outputs.rows(),
        });
    }
    if grad_outputs.cols() != arch.output_dim {
        return Err(Error::DimensionMismatch {
            expected: arch.output_dim,
            got: grad_outputs.cols(),
        });
    }
    let offsets = arch.offsets();
    let mut grad = vec![0.0; params.theta.len()];
    let mut delta = grad_outputs.data().to_vec();
    for (k, o) in offsets.iter().enumerate().rev() {
        let input: &[f64] = if k == 0 { &cache.input } else { &cache.hidden[k - 1] };
        // ∂W = inputᵀ·δ, ∂b = column sums of δ.
        gemm(
            o.fan_in,
            n,
            o.fan_out,
            1.0,
            MatRef::transposed(input, o.fan_in),
            MatRef::normal(&delta, o.fan_out),
            0.0,
            &mut grad[o.weights..o.bias],
        );
        let gb = &mut grad[o.bias..o.bias + o.fan_out];
        for row in delta.chunks_exact(o.fan_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if k == 0 {
            break;
        }
        let mut prev = vec![0.0; n * o.fan_in];
        gemm(
            n,
            o.fan_out,
            o.fan_in,
            1.0,
            MatRef::normal(&delta, o.fan_out),
            MatRef::transposed(&params.theta[o.weights..o.bias], o.fan_out),
            0.0,
            &mut prev,
        );
        for (p, a) in prev.iter_mut().zip(input) {
            if *a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::seed_stream;

    #[test]
    fn default_param_count() {
        let arch = NetArch::default_for(2).unwrap();
        assert_eq!(arch.param_count(), 4 * 300 + 300 + 300 * 50 + 50 + 50 * 2 + 2);
        assert_eq!(arch.param_count(), 16652);
    }

    #[test]
    fn init_is_reproducible() {
        let arch = NetArch::default_for(2).unwrap();
        let a = init_mlp(&arch, &mut seed_stream(3)).unwrap();
        let b = init_mlp(&arch, &mut seed_stream(3)).unwrap();
        assert_eq!(a, b);
        let (_, bias) = a.layer(0);
        assert!(bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theory_guard_rejects_narrow_layers() {
        let arch = NetArch::new(4, vec![8, 8], 2).unwrap();
        assert!(arch.clone().with_theory_guard(true).is_err());
        let wide = NetArch::new(4, vec![15, 15], 2).unwrap();
        assert!(wide.with_theory_guard(true).is_ok());
        assert!(NetArch::new(4, vec![15], 2).unwrap().with_theory_guard(true).is_err());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::zeros(NetArch::new(3, vec![5, 4], 2).unwrap()).unwrap();
        let z = Matrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.5, 9.0]).unwrap();
        let (y, _) = forward(&p, &z).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_built_relu() {
        // 2 → 2 (identity, ReLU) → 2 (identity): y = ReLU(z).
        let arch = NetArch::new(2, vec![2], 2).unwrap();
        let theta = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let p = MlpParams::from_theta(arch, theta).unwrap();
        let z = Matrix::new(2, 2, vec![-1.5, 2.0, 0.0, -0.25]).unwrap();
        let (y, _) = forward(&p, &z).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn positive_homogeneity_without_bias() {
        let arch = NetArch::new(2, vec![2], 2).unwrap();
        let p = init_mlp(&arch, &mut seed_stream(9)).unwrap();
        let z = Matrix::new(1, 2, vec![0.7, -0.3]).unwrap();
        let z2 = Matrix::new(1, 2, vec![1.4, -0.6]).unwrap();
        let (y, _) = forward(&p, &z).unwrap();
        let (y2, _) = forward(&p, &z2).unwrap();
        for (a, b) in y.data().iter().zip(y2.data()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_linear_layer_sum_loss() {
        let arch = NetArch::new(3, vec![], 1).unwrap();
        let p = init_mlp(&arch, &mut seed_stream(1)).unwrap();
        let z = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0]).unwrap();
        let (_, cache) = forward(&p, &z).unwrap();
        let g = backward(&p, &cache, &Matrix::new(2, 1, vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(g, vec![0.0, 2.5, 7.0, 2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grad() {
        let arch = NetArch::new(2, vec![4, 3], 2).unwrap();
        let p = init_mlp(&arch, &mut seed_stream(2)).unwrap();
        let z = Matrix::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let (_, cache) = forward(&p, &z).unwrap();
        let g = backward(&p, &cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let arch = NetArch::new(2, vec![3], 1).unwrap();
        let mut p = init_mlp(&arch, &mut seed_stream(2)).unwrap();
        let z = Matrix::new(1, 2, vec![0.1, 0.2]).unwrap();
        let (_, cache) = forward(&p, &z).unwrap();
        p.theta_mut()[0] += 1.0;
        assert!(matches!(
            backward(&p, &cache, &Matrix::zeros(1, 1)),
            Err(Error::StaleCache)
        ));
        let other = p.clone();
        assert!(matches!(
            backward(&other, &cache, &Matrix::zeros(1, 1)),
            Err(Error::StaleCache)
        ));
    }
}
