//! Characteristic functions loaded from a shared library.
//!
//! A plugin exports three C symbols:
//!
//! ```c
//! uint32_t cfgen_cf_abi_version(void);          // must return 1
//! size_t   cfgen_cf_dim(void);
//! int32_t  cfgen_cf_eval_batch(const double *z, size_t rows, size_t cols,
//!                              double *out_re, double *out_im);
//! ```
//!
//! `z` is row-major `rows × cols`; the plugin writes one value per row and
//! returns 0 on success. `crates/plugin-example` is a complete plugin.

use std::path::{Path, PathBuf};

use libloading::Library;

use super::{check_dim, CharFn};
use crate::error::{Error, Result};
use crate::numkit::{ComplexValue, Matrix};

pub const PLUGIN_ABI_VERSION: u32 = 1;

type AbiVersionFn = unsafe extern "C" fn() -> u32;
type DimFn = unsafe extern "C" fn() -> usize;
type EvalBatchFn = unsafe extern "C" fn(*const f64, usize, usize, *mut f64, *mut f64) -> i32;

pub struct PluginCf {
    path: PathBuf,
    dim: usize,
    eval_batch: EvalBatchFn,
    // Keeps the function pointer above valid.
    _lib: Library,
}

impl std::fmt::Debug for PluginCf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginCf")
            .field("path", &self.path)
            .field("dim", &self.dim)
            .finish()
    }
}

impl PluginCf {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let err = |what: &str, e: libloading::Error| Error::Plugin(format!("{}: {what}: {e}", path.display()));
        // SAFETY: loading a library runs its initializers; plugins are
        // trusted user code by contract.
        let lib = unsafe { Library::new(&path) }.map_err(|e| err("load", e))?;
        // SAFETY: symbol types follow the documented plugin ABI.
        let (version, dim, eval_batch) = unsafe {
            let version: AbiVersionFn = *lib
                .get::<AbiVersionFn>(b"cfgen_cf_abi_version\0")
                .map_err(|e| err("cfgen_cf_abi_version", e))?;
            let dim: DimFn = *lib.get::<DimFn>(b"cfgen_cf_dim\0").map_err(|e| err("cfgen_cf_dim", e))?;
            let eval: EvalBatchFn = *lib
                .get::<EvalBatchFn>(b"cfgen_cf_eval_batch\0")
                .map_err(|e| err("cfgen_cf_eval_batch", e))?;
            (version(), dim(), eval)
        };
        if version != PLUGIN_ABI_VERSION {
            return Err(Error::Plugin(format!(
                "{}: ABI version {version}, expected {PLUGIN_ABI_VERSION}",
                path.display()
            )));
        }
        if dim == 0 {
            return Err(Error::Plugin(format!("{}: reports dimension 0", path.display())));
        }
        Ok(Self {
            path,
            dim,
            eval_batch,
            _lib: lib,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl CharFn for PluginCf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: &[f64]) -> Result<ComplexValue> {
        let m = Matrix::new(1, z.len(), z.to_vec())?;
        Ok(self.eval_batch(&m)?[0])
    }

    fn eval_batch(&self, z: &Matrix) -> Result<Vec<ComplexValue>> {
        check_dim(self.dim, z.cols())?;
        let n = z.rows();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        // SAFETY: buffers have the lengths the ABI promises to the plugin.
        let status =
            unsafe { (self.eval_batch)(z.data().as_ptr(), n, z.cols(), re.as_mut_ptr(), im.as_mut_ptr()) };
        if status != 0 {
            return Err(Error::Plugin(format!(
                "{}: eval_batch returned status {status}",
                self.path.display()
            )));
        }
        let out: Vec<ComplexValue> = re.into_iter().zip(im).map(|(r, i)| ComplexValue::new(r, i)).collect();
        if out.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite(format!("plugin {}", self.path.display())));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_library_is_a_plugin_error() {
        let e = PluginCf::load("/nonexistent/libnothing.so").unwrap_err();
        assert!(matches!(e, Error::Plugin(_)));
    }
}
