use crate::charfn::GaussianMixtureSpec;
use crate::error::{invalid, Result};
use crate::numkit::{dot, par_blocks, Matrix, RngStream};

const SAMPLE_BLOCK: usize = 16_384;

/// `n` exact draws: a uniformly chosen component `j`, then
/// `μ_j + L_j ε` with `L_j L_jᵀ = Σ_j` and `ε` standard normal.
pub fn sample_gaussian_mixture(spec: &GaussianMixtureSpec, stream: &RngStream, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let d = spec.dim();
    let chols = spec.cholesky_factors();
    let blocks = par_blocks(n, SAMPLE_BLOCK, |r| {
        let mut s = stream.split_index((r.start / SAMPLE_BLOCK) as u64);
        let mut out = Vec::with_capacity((r.end - r.start) * d);
        let mut eps = vec![0.0; d];
        for _ in r {
            let j = s.below(spec.components());
            eps.iter_mut().for_each(|e| *e = s.std_normal());
            let (mu, l) = (&spec.mus()[j], &chols[j]);
            for a in 0..d {
                out.push(mu[a] + dot(&l.row(a)[..=a], &eps[..=a]));
            }
        }
        out
    });
    Matrix::new(n, d, blocks.concat())
}
