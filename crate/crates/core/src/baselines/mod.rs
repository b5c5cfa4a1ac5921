//! Exact reference samplers and the projection law of stable targets.

mod export;
mod gaussian_mixture;
mod stable;

pub use export::{read_sample_blob, read_sample_csv, sidecar_path, write_sample_blob, write_sample_csv, SampleSidecar};
pub use gaussian_mixture::sample_gaussian_mixture;
pub use stable::{project_stable_params, sample_stable_discrete_spectral, sample_stable_univ, UnivStableParams};
