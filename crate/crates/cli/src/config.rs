//! Experiment configuration files.
//!
//! One JSON document describes a whole experiment. Loading materializes every
//! default, draws random targets once and fixes all seeds from the master
//! seed, so the resolved document reproduces the run on its own.

use std::fs;
use std::path::{Path, PathBuf};

use cfgen::charfn::{CharFn, GaussianMixtureSpec, PluginCf, SpectralSource, StableSpec};
use cfgen::eval::EvalConfig;
use cfgen::net::CheckpointFormat;
use cfgen::trainer::TrainConfig;
use cfgen::{Matrix, RngStream};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    GaussianMixture(GaussianMixtureSpec),
    /// `N(0, I_dim)`; resolves to `gaussian_mixture`.
    StandardNormal { dim: usize },
    /// Resolves to `gaussian_mixture` drawn from the master seed.
    RandomGaussianMixture {
        dim: usize,
        components: usize,
        #[serde(default = "default_mean_scale")]
        mean_scale: f64,
    },
    Stable(StableSpec),
    /// Atoms `Z/‖Z‖` with `Z ~ N(spectral_mean, spectral_cov)`; resolves to
    /// `stable` with the atoms drawn from the master seed.
    StableGaussianSpectral {
        alpha: f64,
        tau: Vec<f64>,
        spectral_mean: Vec<f64>,
        spectral_cov: Matrix,
        num_atoms: usize,
    },
    /// Shared library implementing the plugin ABI. No reference sampler.
    External { path: PathBuf },
}

fn default_mean_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub git: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    /// Not part of the config hash.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Master seed. Resolution copies it into `train.seed` and
    /// `eval.permutation.seed`.
    #[serde(default)]
    pub seed: u64,
    /// Epochs between checkpoint writes during `train`; 0 writes only at the end.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_checkpoint_format")]
    pub checkpoint_format: CheckpointFormat,
    /// Written into resolved configs; ignored by the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("cfgen-out")
}

fn default_checkpoint_format() -> CheckpointFormat {
    CheckpointFormat::Binary
}

pub fn git_describe() -> &'static str {
    env!("CFGEN_GIT_DESCRIBE")
}

/// Parses a config, reporting the JSON path and position of the first error.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Config(format!(
            "{origin}: field `{path}`: {inner} (line {}, column {})",
            inner.line(),
            inner.column()
        ))
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

impl ExperimentConfig {
    /// Fills defaults, draws random targets and propagates the master seed.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = self.clone();
        let mut stream = RngStream::new(c.seed).split("target");
        c.target = match &self.target {
            TargetConfig::StandardNormal { dim } => {
                TargetConfig::GaussianMixture(GaussianMixtureSpec::standard_normal(*dim).map_err(field("target"))?)
            }
            TargetConfig::RandomGaussianMixture {
                dim,
                components,
                mean_scale,
            } => TargetConfig::GaussianMixture(
                GaussianMixtureSpec::random(*dim, *components, *mean_scale, &mut stream).map_err(field("target"))?,
            ),
            TargetConfig::StableGaussianSpectral {
                alpha,
                tau,
                spectral_mean,
                spectral_cov,
                num_atoms,
            } => {
                let source = SpectralSource {
                    mean: spectral_mean.clone(),
                    cov: spectral_cov.clone(),
                };
                TargetConfig::Stable(
                    StableSpec::from_gaussian_spectral(*alpha, tau.clone(), source, *num_atoms, &mut stream)
                        .map_err(field("target"))?,
                )
            }
            other => other.clone(),
        };
        c.train.seed = c.seed;
        c.eval.permutation.seed = c.seed;
        let d = match &c.target {
            TargetConfig::External { .. } => None,
            t => Some(target_dim(t)),
        };
        if let Some(d) = d {
            c.train = c.train.resolve(d);
            c.eval = c.eval.resolve(d);
        }
        c.provenance = None;
        Ok(c)
    }

    /// Resolves against the dimension reported by a loaded target.
    pub fn resolve_for_dim(&mut self, d: usize) {
        self.train = self.train.resolve(d);
        self.eval = self.eval.resolve(d);
    }

    pub fn validate(&self, d: usize) -> Result<(), CliError> {
        self.train.validate().map_err(field("train"))?;
        self.train.arch(d).map_err(field("train"))?;
        self.eval.validate(d).map_err(field("eval"))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON without the provenance block and the
    /// output directory, so relocated reruns share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.provenance = None;
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash(),
            git: git_describe().to_string(),
        }
    }
}

fn target_dim(t: &TargetConfig) -> usize {
    match t {
        TargetConfig::GaussianMixture(s) => s.dim(),
        TargetConfig::Stable(s) => s.dim(),
        TargetConfig::StandardNormal { dim } | TargetConfig::RandomGaussianMixture { dim, .. } => *dim,
        TargetConfig::StableGaussianSpectral { tau, .. } => tau.len(),
        TargetConfig::External { .. } => 0,
    }
}

fn field(prefix: &'static str) -> impl Fn(cfgen::Error) -> CliError {
    move |e| match e {
        cfgen::Error::InvalidParameter { name, reason } => {
            CliError::Config(format!("field `{prefix}.{name}`: {reason}"))
        }
        e => CliError::Config(format!("{prefix}: {e}")),
    }
}

/// A loaded target and the reference sampler available for it.
pub enum Target {
    GaussianMixture(GaussianMixtureSpec),
    Stable(StableSpec),
    External(PluginCf),
}

impl Target {
    pub fn load(cfg: &TargetConfig) -> Result<Self, CliError> {
        match cfg {
            TargetConfig::GaussianMixture(s) => Ok(Self::GaussianMixture(s.clone())),
            TargetConfig::Stable(s) => Ok(Self::Stable(s.clone())),
            TargetConfig::External { path } => PluginCf::load(path)
                .map(Self::External)
                .map_err(|e| CliError::Config(format!("target.path: {e}"))),
            _ => Err(CliError::Config("target: resolve the config before loading".into())),
        }
    }

    pub fn charfn(&self) -> &dyn CharFn {
        match self {
            Self::GaussianMixture(s) => s,
            Self::Stable(s) => s,
            Self::External(p) => p,
        }
    }

    pub fn dim(&self) -> usize {
        self.charfn().dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_all_defaults() {
        let c = parse_config(r#"{"target": {"kind": "standard_normal", "dim": 2}, "seed": 5}"#, "t").unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.train.seed, 5);
        assert_eq!(r.train.latent_dim, Some(4));
        assert_eq!(r.train.lr_decay_epochs, Some(vec![2000, 4000]));
        assert_eq!(r.eval.bivariate_dims, Some([0, 1]));
        assert!(matches!(r.target, TargetConfig::GaussianMixture(_)));
        // Resolving twice changes nothing.
        assert_eq!(r.resolve().unwrap(), r);
    }

    #[test]
    fn random_targets_are_materialized_from_the_seed() {
        let text = r#"{"target": {"kind": "stable_gaussian_spectral", "alpha": 0.5, "tau": [1, 1],
            "spectral_mean": [0, 0], "spectral_cov": [[1, 0], [0, 1]], "num_atoms": 8}, "seed": 3}"#;
        let a = parse_config(text, "t").unwrap().resolve().unwrap();
        let b = parse_config(text, "t").unwrap().resolve().unwrap();
        assert_eq!(a, b);
        let round = parse_config(&serde_json::to_string(&a).unwrap(), "t").unwrap();
        assert_eq!(round, a);
        assert_eq!(round.hash(), a.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let text = r#"{"target": {"kind": "standard_normal", "dim": 2},
            "train": {"kernel": {"family": "gaussian", "bandwidths": [1.0, -2.0]}}}"#;
        let err = parse_config(text, "t").unwrap_err().to_string();
        assert!(err.contains("train.kernel"), "{err}");
        assert!(err.contains("bandwidths"), "{err}");

        let err = parse_config(r#"{"target": {"kind": "standard_normal", "dim": 2}, "trian": {}}"#, "t")
            .unwrap_err()
            .to_string();
        assert!(err.contains("trian"), "{err}");
    }

    #[test]
    fn hash_ignores_provenance() {
        let c = parse_config(r#"{"target": {"kind": "standard_normal", "dim": 1}}"#, "t").unwrap();
        let mut p = c.clone();
        p.provenance = Some(c.provenance());
        assert_eq!(c.hash(), p.hash());
    }
}
