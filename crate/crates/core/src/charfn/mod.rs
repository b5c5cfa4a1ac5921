//! Characteristic functions.
//!
//! The trainer treats a target only through [`CharFn::eval_batch`]. Built-in
//! targets are the Gaussian mixture and the α-stable law with a discrete
//! spectral measure; the empirical characteristic function of a sample and
//! dynamically loaded plugins implement the same trait.

mod empirical;
pub(crate) mod gaussian_mixture;
mod plugin;
pub(crate) mod stable;

pub use empirical::{eval_empirical_cf, EmpiricalCf};
pub use gaussian_mixture::{eval_gaussian_mixture_cf, GaussianMixtureSpec};
pub use plugin::{PluginCf, PLUGIN_ABI_VERSION};
pub use stable::{eval_stable_cf, SpectralSource, StableSpec};

use crate::error::{Error, Result};
use crate::numkit::{ComplexValue, Matrix};

/// A characteristic function `z ↦ E[exp(i zᵀX)]` on `R^d`.
pub trait CharFn: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, z: &[f64]) -> Result<ComplexValue>;

    /// Evaluates every row of `z`.
    fn eval_batch(&self, z: &Matrix) -> Result<Vec<ComplexValue>> {
        check_dim(self.dim(), z.cols())?;
        z.iter_rows().map(|row| self.eval(row)).collect()
    }
}

impl<T: CharFn + ?Sized> CharFn for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, z: &[f64]) -> Result<ComplexValue> {
        (**self).eval(z)
    }

    fn eval_batch(&self, z: &Matrix) -> Result<Vec<ComplexValue>> {
        (**self).eval_batch(z)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
