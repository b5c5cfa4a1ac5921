use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use super::{check_dim, CharFn};
use crate::error::{invalid, Error, Result};
use crate::numkit::{dot, par_blocks, ComplexValue, Matrix, RngStream};

/// Gaussian whose normalized draws `Z/‖Z‖₂` define a spectral measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSource {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

/// α-stable law on `R^d` with a discrete spectral measure
/// `Λ = Σ_j w_j δ_{u_j}` of total mass one and shift `τ`.
///
/// The atoms are fixed at construction, so the characteristic function is
/// a deterministic function for the lifetime of the spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StableDoc", into = "StableDoc")]
pub struct StableSpec {
    alpha: f64,
    tau: Vec<f64>,
    atoms: Matrix,
    weights: Vec<f64>,
    spectral_source: Option<SpectralSource>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StableDoc {
    alpha: f64,
    tau: Vec<f64>,
    atoms: Matrix,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spectral_source: Option<SpectralSource>,
}

impl TryFrom<StableDoc> for StableSpec {
    type Error = Error;

    fn try_from(doc: StableDoc) -> Result<Self> {
        let mut spec = Self::new(doc.alpha, doc.tau, doc.atoms, doc.weights)?;
        spec.spectral_source = doc.spectral_source;
        Ok(spec)
    }
}

impl From<StableSpec> for StableDoc {
    fn from(s: StableSpec) -> Self {
        Self {
            alpha: s.alpha,
            tau: s.tau,
            atoms: s.atoms,
            weights: s.weights,
            spectral_source: s.spectral_source,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64, allow_two: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 2.0 || (allow_two && alpha == 2.0));
    if ok {
        Ok(())
    } else {
        Err(invalid(
            "alpha",
            format!("{alpha} outside (0,{}", if allow_two { "2]" } else { "2)" }),
        ))
    }
}

impl StableSpec {
    pub fn new(alpha: f64, tau: Vec<f64>, atoms: Matrix, weights: Vec<f64>) -> Result<Self> {
        check_alpha(alpha, false)?;
        let d = tau.len();
        if d == 0 {
            return Err(invalid("tau", "zero-dimensional shift"));
        }
        check_dim(d, atoms.cols())?;
        if atoms.rows() == 0 {
            return Err(Error::Empty("spectral atoms"));
        }
        if weights.len() != atoms.rows() {
            return Err(invalid(
                "weights",
                format!("{} weights for {} atoms", weights.len(), atoms.rows()),
            ));
        }
        for (j, u) in atoms.iter_rows().enumerate() {
            let norm = dot(u, u).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("atoms[{j}]"), format!("norm {norm} is not 1")));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("sum to {total}, not 1")));
        }
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("tau".into()));
        }
        Ok(Self {
            alpha,
            tau,
            atoms,
            weights,
            spectral_source: None,
        })
    }

    /// Draws `num_atoms` atoms `Z/‖Z‖₂` with `Z ~ N(mean, cov)` and gives
    /// each weight `1/num_atoms`.
    pub fn from_gaussian_spectral(
        alpha: f64,
        tau: Vec<f64>,
        source: SpectralSource,
        num_atoms: usize,
        stream: &mut RngStream,
    ) -> Result<Self> {
        let d = tau.len();
        check_dim(d, source.mean.len())?;
        if num_atoms == 0 {
            return Err(Error::Empty("spectral atoms"));
        }
        if source.cov.rows() != d || source.cov.cols() != d {
            return Err(invalid("spectral_cov", format!("expected {d}x{d}")));
        }
        let chol = source.cov.cholesky().ok_or(Error::NotPositiveDefinite(0))?;
        let mut data = Vec::with_capacity(num_atoms * d);
        let mut eps = vec![0.0; d];
        let mut z = vec![0.0; d];
        for _ in 0..num_atoms {
            loop {
                eps.iter_mut().for_each(|e| *e = stream.std_normal());
                for a in 0..d {
                    z[a] = source.mean[a] + dot(&chol.row(a)[..=a], &eps[..=a]);
                }
                let norm = dot(&z, &z).sqrt();
                if norm > 1e-300 {
                    data.extend(z.iter().map(|v| v / norm));
                    break;
                }
            }
        }
        let atoms = Matrix::new(num_atoms, d, data)?;
        let weights = vec![1.0 / num_atoms as f64; num_atoms];
        let weights = normalize(weights);
        let mut spec = Self::new(alpha, tau, atoms, weights)?;
        spec.spectral_source = Some(source);
        Ok(spec)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spectral_source(&self) -> Option<&SpectralSource> {
        self.spectral_source.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.tau.len()
    }

    /// `exp(i zᵀτ − Σ_j w_j f_α(z, u_j))` given the projections `s_j = zᵀu_j`.
    fn cf_from_projections(&self, z_tau: f64, proj: &[f64]) -> ComplexValue {
        let (modulus_exp, angle) = if is_cauchy_index(self.alpha) {
            let mut re = 0.0;
            let mut im = 0.0;
            for (&s, &w) in proj.iter().zip(&self.weights) {
                let a = s.abs();
                re += w * a;
                // s·log|s| → 0 as s → 0.
                if a >= 1e-300 {
                    im += w * s * a.ln();
                }
            }
            (re, z_tau - FRAC_2_PI * im)
        } else {
            let t = (PI * self.alpha / 2.0).tan();
            let mut re = 0.0;
            let mut signed = 0.0;
            for (&s, &w) in proj.iter().zip(&self.weights) {
                let p = w * s.abs().powf(self.alpha);
                re += p;
                if s > 0.0 {
                    signed += p;
                } else if s < 0.0 {
                    signed -= p;
                }
            }
            (re, z_tau + t * signed)
        };
        ComplexValue::from_polar((-modulus_exp).exp(), angle)
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// The α = 1 branch of `f_α` is used exactly at α = 1.
pub(crate) fn is_cauchy_index(alpha: f64) -> bool {
    alpha == 1.0
}

/// Characteristic function of a [`StableSpec`] at `z`.
pub fn eval_stable_cf(spec: &StableSpec, z: &[f64]) -> Result<ComplexValue> {
    check_dim(spec.dim(), z.len())?;
    let proj: Vec<f64> = spec.atoms.iter_rows().map(|u| dot(u, z)).collect();
    Ok(spec.cf_from_projections(dot(z, &spec.tau), &proj))
}

impl CharFn for StableSpec {
    fn dim(&self) -> usize {
        StableSpec::dim(self)
    }

    fn eval(&self, z: &[f64]) -> Result<ComplexValue> {
        eval_stable_cf(self, z)
    }

    /// All projections `zᵀu_j` of a block come from one matrix product.
    fn eval_batch(&self, z: &Matrix) -> Result<Vec<ComplexValue>> {
        check_dim(self.dim(), z.cols())?;
        let blocks = par_blocks(z.rows(), 64, |range| {
            let zb = z.slice_rows(range.start, range.end);
            let proj = zb.matmul_t(&self.atoms).expect("shapes checked");
            zb.iter_rows()
                .zip(proj.iter_rows())
                .map(|(zr, pr)| self.cf_from_projections(dot(zr, &self.tau), pr))
                .collect::<Vec<_>>()
        });
        Ok(blocks.into_iter().flatten().collect())
    }
}
