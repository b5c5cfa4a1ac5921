use serde::{Deserialize, Serialize};

use super::{check_dim, CharFn};
use crate::error::{invalid, Error, Result};
use crate::numkit::{dot, ComplexValue, Matrix, RngStream};

/// Equal-weight mixture of `J` Gaussians on `R^d`.
///
/// The covariances are validated (symmetric, Cholesky succeeds) when the
/// spec is built or deserialized; the factors are kept for sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianMixtureDoc", into = "GaussianMixtureDoc")]
pub struct GaussianMixtureSpec {
    mus: Vec<Vec<f64>>,
    sigmas: Vec<Matrix>,
    chols: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianMixtureDoc {
    mus: Vec<Vec<f64>>,
    sigmas: Vec<Matrix>,
}

impl TryFrom<GaussianMixtureDoc> for GaussianMixtureSpec {
    type Error = Error;

    fn try_from(doc: GaussianMixtureDoc) -> Result<Self> {
        Self::new(doc.mus, doc.sigmas)
    }
}

impl From<GaussianMixtureSpec> for GaussianMixtureDoc {
    fn from(spec: GaussianMixtureSpec) -> Self {
        Self {
            mus: spec.mus,
            sigmas: spec.sigmas,
        }
    }
}

impl GaussianMixtureSpec {
    pub fn new(mus: Vec<Vec<f64>>, sigmas: Vec<Matrix>) -> Result<Self> {
        if mus.is_empty() {
            return Err(Error::Empty("mixture components"));
        }
        if mus.len() != sigmas.len() {
            return Err(invalid(
                "sigmas",
                format!("{} means but {} covariances", mus.len(), sigmas.len()),
            ));
        }
        let d = mus[0].len();
        if d == 0 {
            return Err(invalid("mus", "zero-dimensional location"));
        }
        let mut chols = Vec::with_capacity(mus.len());
        for (j, (mu, sigma)) in mus.iter().zip(&sigmas).enumerate() {
            check_dim(d, mu.len())?;
            if sigma.rows() != d || sigma.cols() != d {
                return Err(invalid(
                    format!("sigmas[{j}]"),
                    format!("expected {d}x{d}, got {}x{}", sigma.rows(), sigma.cols()),
                ));
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("mus[{j}]")));
            }
            for a in 0..d {
                for b in 0..a {
                    let (x, y) = (sigma.get(a, b), sigma.get(b, a));
                    if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                        return Err(Error::NotPositiveDefinite(j));
                    }
                }
            }
            chols.push(sigma.cholesky().ok_or(Error::NotPositiveDefinite(j))?);
        }
        Ok(Self { mus, sigmas, chols })
    }

    /// Single standard normal component in `d` dimensions.
    pub fn standard_normal(d: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; d]], vec![Matrix::identity(d)])
    }

    /// Random mixture: locations uniform on `[-mean_scale, mean_scale]^d`,
    /// covariances `Q · diag(1 + U) · Qᵀ` with `Q` a random orthogonal
    /// matrix and `U` uniform on `[0, 1)`.
    pub fn random(d: usize, components: usize, mean_scale: f64, stream: &mut RngStream) -> Result<Self> {
        if d == 0 || components == 0 {
            return Err(invalid("dim/components", "must be positive"));
        }
        let mut mus = Vec::with_capacity(components);
        let mut sigmas = Vec::with_capacity(components);
        for _ in 0..components {
            mus.push(
                (0..d)
                    .map(|_| mean_scale * (2.0 * stream.uniform01() - 1.0))
                    .collect(),
            );
            let q = random_orthogonal(d, stream);
            let eig: Vec<f64> = (0..d).map(|_| 1.0 + stream.uniform01()).collect();
            let mut s = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..=a {
                    let v: f64 = (0..d).map(|k| q.get(a, k) * eig[k] * q.get(b, k)).sum();
                    s[a * d + b] = v;
                    s[b * d + a] = v;
                }
            }
            sigmas.push(Matrix::new(d, d, s)?);
        }
        Self::new(mus, sigmas)
    }

    pub fn dim(&self) -> usize {
        self.mus[0].len()
    }

    pub fn components(&self) -> usize {
        self.mus.len()
    }

    pub fn mus(&self) -> &[Vec<f64>] {
        &self.mus
    }

    pub fn sigmas(&self) -> &[Matrix] {
        &self.sigmas
    }

    pub(crate) fn cholesky_factors(&self) -> &[Matrix] {
        &self.chols
    }

    fn eval_unchecked(&self, z: &[f64]) -> ComplexValue {
        let d = z.len();
        let mut acc = ComplexValue::new(0.0, 0.0);
        for (mu, sigma) in self.mus.iter().zip(&self.sigmas) {
            let phase = dot(mu, z);
            let mut quad = 0.0;
            for a in 0..d {
                quad += z[a] * dot(sigma.row(a), z);
            }
            acc += ComplexValue::from_polar((-0.5 * quad).exp(), phase);
        }
        acc / self.mus.len() as f64
    }
}

/// `(1/J) Σ_j exp(i μ_jᵀz − zᵀΣ_j z / 2)`.
pub fn eval_gaussian_mixture_cf(spec: &GaussianMixtureSpec, z: &[f64]) -> Result<ComplexValue> {
    check_dim(spec.dim(), z.len())?;
    Ok(spec.eval_unchecked(z))
}

impl CharFn for GaussianMixtureSpec {
    fn dim(&self) -> usize {
        GaussianMixtureSpec::dim(self)
    }

    fn eval(&self, z: &[f64]) -> Result<ComplexValue> {
        eval_gaussian_mixture_cf(self, z)
    }

    fn eval_batch(&self, z: &Matrix) -> Result<Vec<ComplexValue>> {
        check_dim(self.dim(), z.cols())?;
        Ok(z.iter_rows().map(|r| self.eval_unchecked(r)).collect())
    }
}

/// Orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal(d: usize, stream: &mut RngStream) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| stream.std_normal()).collect())
            .collect();
        let mut ok = true;
        for k in 0..d {
            for j in 0..k {
                let p = dot(&cols[k], &cols[j]);
                let (head, tail) = cols.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= p * y;
                }
            }
            let norm = dot(&cols[k], &cols[k]).sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[k].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            let mut data = vec![0.0; d * d];
            for (k, col) in cols.iter().enumerate() {
                for (a, v) in col.iter().enumerate() {
                    data[a * d + k] = *v;
                }
            }
            return Matrix::from_raw(d, d, data);
        }
    }
}
