//! Diagnostics for trained generators: projection quantiles, two-sample
//! MMD reports and kernel density grids.

mod kde;
mod mmd;
mod quantiles;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::KernelSpec;

pub use kde::{kde_density, scott_bandwidths, DensityGrid, GridSpec};
pub use mmd::{two_sample_report, NullBand, PermutationOptions, TwoSampleReport};
pub use quantiles::{empirical_quantiles, projection_quantiles, QuantileRow, QuantileTable};

pub const DEFAULT_QUANTILES: [f64; 7] = [0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95];
pub const DEFAULT_CONTOUR_LEVELS: [f64; 7] = [0.0005, 0.001, 0.0025, 0.005, 0.01, 0.05, 0.1];

/// `u1 = (1,1,…)`, `u2 = (1,−1,1,…)`, `u3 = (−1,2,−1,2,…)` in `d` coordinates.
pub fn default_projections(d: usize) -> Vec<Vec<f64>> {
    vec![
        vec![1.0; d],
        (0..d).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        (0..d).map(|k| if k % 2 == 0 { -1.0 } else { 2.0 }).collect(),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub quantiles: Vec<f64>,
    /// `None` means [`default_projections`].
    pub projections: Option<Vec<Vec<f64>>>,
    pub contour_levels: Vec<f64>,
    pub grid_resolution: usize,
    /// Draws from the generator and from the reference sampler.
    pub sample_size: usize,
    /// Rows per side for the full-sample `MMD²`.
    pub mmd_rows: usize,
    /// Kernel for the two-sample report; `None` uses the training kernel.
    pub mmd_kernel: Option<KernelSpec>,
    pub permutation: PermutationOptions,
    /// Coordinates of the bivariate density grid; `None` means the last two.
    pub bivariate_dims: Option<[usize; 2]>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            quantiles: DEFAULT_QUANTILES.to_vec(),
            projections: None,
            contour_levels: DEFAULT_CONTOUR_LEVELS.to_vec(),
            grid_resolution: 200,
            sample_size: 1_000_000,
            mmd_rows: 10_000,
            mmd_kernel: None,
            permutation: PermutationOptions::default(),
            bivariate_dims: None,
        }
    }
}

impl EvalConfig {
    /// Copy with `None` defaults filled in for dimension `d`.
    pub fn resolve(&self, d: usize) -> EvalConfig {
        let mut c = self.clone();
        c.projections.get_or_insert_with(|| default_projections(d));
        if d >= 2 {
            c.bivariate_dims.get_or_insert([d - 2, d - 1]);
        }
        c
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        quantiles::check_levels(&self.quantiles)?;
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("quantiles", "must be strictly increasing"));
        }
        if let Some(p) = &self.projections {
            for (i, u) in p.iter().enumerate() {
                if u.len() != d {
                    return Err(invalid(format!("projections[{i}]"), format!("expected length {d}")));
                }
                if u.iter().all(|&x| x == 0.0) {
                    return Err(invalid(format!("projections[{i}]"), "zero vector"));
                }
            }
        }
        if let Some(i) = self.contour_levels.iter().position(|&c| !(c > 0.0)) {
            return Err(invalid(format!("contour_levels[{i}]"), "must be positive"));
        }
        if self.grid_resolution < 2 {
            return Err(invalid("grid_resolution", "must be at least 2"));
        }
        if self.sample_size < 2 {
            return Err(invalid("sample_size", "must be at least 2"));
        }
        if self.mmd_rows < 2 {
            return Err(invalid("mmd_rows", "must be at least 2"));
        }
        if let Some([a, b]) = self.bivariate_dims {
            if a >= d || b >= d || a == b {
                return Err(invalid("bivariate_dims", format!("need two distinct coordinates below {d}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections_truncate() {
        let p = default_projections(3);
        assert_eq!(p[0], vec![1.0, 1.0, 1.0]);
        assert_eq!(p[1], vec![1.0, -1.0, 1.0]);
        assert_eq!(p[2], vec![-1.0, 2.0, -1.0]);
    }

    #[test]
    fn config_defaults_validate() {
        let c = EvalConfig::default().resolve(2);
        c.validate(2).unwrap();
        assert_eq!(c.bivariate_dims, Some([0, 1]));
        let mut bad = c.clone();
        bad.quantiles = vec![0.5, 0.1];
        assert!(bad.validate(2).is_err());
    }
}
