//! Generator training loop.
//!
//! Random streams are derived by label from the master seed: `"init"` for
//! the network, `"W"/b` for the frequencies of refresh block `b` and
//! `"Z"/k` for the latents of epoch `k`. Nothing depends on how many draws
//! an earlier epoch consumed, so a resumed run is bit-identical to an
//! uninterrupted one.

use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::charfn::{check_dim, CharFn};
use crate::error::{invalid, Error, Result};
use crate::kernel::{sample_frequencies, FrequencyBatch, KernelSpec};
use crate::loss::{loss_and_grad_with, TargetValues};
use crate::net::{adam_step, backward, forward, init_mlp, AdamConfig, AdamState, Checkpoint, MlpParams, NetArch};
use crate::numkit::{par_blocks, sample_matrix, BaseDistribution, Matrix, RngStream};

/// Output variance below which the generator counts as collapsed.
const COLLAPSE_VARIANCE: f64 = 1e-6;
/// Collapse is only reported while `L + Ĉ_P` is above this.
const COLLAPSE_LOSS: f64 = 0.1;
/// Rows per latent block in [`generate`].
const GENERATE_BLOCK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Generator batch size.
    pub n: usize,
    /// Frequency batch size.
    pub m: usize,
    pub epochs: usize,
    /// Frequencies are redrawn at epochs 0, k, 2k, ….
    pub w_refresh_every: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    /// Epochs at which the rate is multiplied by `lr_decay_factor`.
    /// `None` means `[epochs/3, 2·epochs/3]`.
    pub lr_decay_epochs: Option<Vec<usize>>,
    pub kernel: KernelSpec,
    /// `None` means twice the target dimension.
    pub latent_dim: Option<usize>,
    pub hidden_widths: Vec<usize>,
    pub theory_guard: bool,
    pub seed: u64,
    /// Rescales the parameter gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    pub log_every: usize,
    /// Stops once `L + Ĉ_P` falls below this value.
    pub early_stop: Option<f64>,
    pub adam: AdamConfig,
    /// Fills the `seconds` log column. Off keeps logs reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n: 6000,
            m: 6000,
            epochs: 6000,
            w_refresh_every: 20,
            lr: 0.01,
            lr_decay_factor: 0.1,
            lr_decay_epochs: None,
            kernel: KernelSpec::default(),
            latent_dim: None,
            hidden_widths: vec![300, 50],
            theory_guard: false,
            seed: 0,
            clip_norm: None,
            log_every: 1,
            early_stop: None,
            adam: AdamConfig::default(),
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    /// Copy with every `None` default filled in for target dimension `d`.
    pub fn resolve(&self, d: usize) -> TrainConfig {
        let mut c = self.clone();
        c.latent_dim.get_or_insert(2 * d);
        c.lr_decay_epochs
            .get_or_insert_with(|| vec![self.epochs / 3, 2 * self.epochs / 3]);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", "must be at least 2"));
        }
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if self.w_refresh_every == 0 {
            return Err(invalid("w_refresh_every", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every", "must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", "must be finite and non-negative"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor.is_finite()) {
            return Err(invalid("lr_decay_factor", "must be positive"));
        }
        if let Some(epochs) = &self.lr_decay_epochs {
            if let Some(i) = epochs.iter().position(|&e| e >= self.epochs) {
                return Err(invalid(format!("lr_decay_epochs[{i}]"), "must be below epochs"));
            }
        }
        if self.latent_dim == Some(0) {
            return Err(invalid("latent_dim", "must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid("clip_norm", "must be positive"));
            }
        }
        if let Some(t) = self.early_stop {
            if !t.is_finite() {
                return Err(invalid("early_stop", "must be finite"));
            }
        }
        self.adam.validate()
    }

    /// Learning rate in effect at `epoch`; call on a resolved config.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self
            .lr_decay_epochs
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .filter(|&&e| e <= epoch)
            .count();
        self.lr * self.lr_decay_factor.powi(passed as i32)
    }

    pub fn arch(&self, d: usize) -> Result<NetArch> {
        NetArch::new(self.latent_dim.unwrap_or(2 * d), self.hidden_widths.clone(), d)?
            .with_theory_guard(self.theory_guard)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub loss: f64,
    pub cp_hat: f64,
    pub interpretable: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str = "epoch,loss,cp_hat,interpretable,grad_norm,lr,seconds";

    /// Writes the log as CSV; `comment` lines are emitted first with a `# `
    /// prefix.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &[String]) -> io::Result<()> {
        for c in comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let secs = r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.epoch, r.loss, r.cp_hat, r.interpretable, r.grad_norm, r.lr, secs
            )?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&TrainRecord> {
        self.records.last()
    }
}

/// Training stopped on a non-finite value.
#[derive(Debug)]
pub struct Aborted {
    pub epoch: usize,
    pub error: Error,
    /// State before the failing epoch.
    pub last_good: Box<Checkpoint>,
    pub log: TrainLog,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("training aborted at epoch {}: {}", .0.epoch, .0.error)]
    Aborted(Box<Aborted>),
}

struct FrequencyCache {
    block: usize,
    freqs: FrequencyBatch,
    target: TargetValues,
    cp_hat: f64,
}

/// Stateful training run. [`train`] and [`resume`] cover the common cases;
/// use this directly to stop and checkpoint part way.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    phi: &'a dyn CharFn,
    stream: RngStream,
    params: MlpParams,
    adam: AdamState,
    epoch: usize,
    log: TrainLog,
    cache: Option<FrequencyCache>,
    started: Instant,
    collapse_warned: bool,
    stopped_early: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &TrainConfig, phi: &'a dyn CharFn) -> Result<Self> {
        let cfg = cfg.resolve(phi.dim());
        cfg.validate()?;
        let stream = RngStream::new(cfg.seed);
        let params = init_mlp(&cfg.arch(phi.dim())?, &mut stream.split("init"))?;
        let adam = AdamState::new(params.len(), cfg.adam)?;
        Ok(Self::assemble(cfg, phi, stream, params, adam, 0, TrainLog::default()))
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn from_checkpoint(cfg: &TrainConfig, phi: &'a dyn CharFn, ck: &Checkpoint) -> Result<Self> {
        let cfg = cfg.resolve(phi.dim());
        cfg.validate()?;
        if ck.seed != cfg.seed {
            return Err(Error::Checkpoint(format!(
                "checkpoint seed {} differs from config seed {}",
                ck.seed, cfg.seed
            )));
        }
        if *ck.params.arch() != cfg.arch(phi.dim())? {
            return Err(Error::Checkpoint("architecture differs from config".into()));
        }
        let adam = ck
            .adam
            .clone()
            .ok_or_else(|| Error::Checkpoint("no optimizer state to resume from".into()))?;
        let log = match ck.meta.get("train_log") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => TrainLog::default(),
        };
        let epoch = usize::try_from(ck.step).map_err(|_| Error::Checkpoint("step out of range".into()))?;
        let stream = RngStream::new(cfg.seed);
        Ok(Self::assemble(cfg, phi, stream, ck.params.clone(), adam, epoch, log))
    }

    fn assemble(
        cfg: TrainConfig,
        phi: &'a dyn CharFn,
        stream: RngStream,
        params: MlpParams,
        adam: AdamState,
        epoch: usize,
        log: TrainLog,
    ) -> Self {
        Self {
            cfg,
            phi,
            stream,
            params,
            adam,
            epoch,
            log,
            cache: None,
            started: Instant::now(),
            collapse_warned: false,
            stopped_early: false,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Next epoch to run.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn finished(&self) -> bool {
        self.stopped_early || self.epoch >= self.cfg.epochs
    }

    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    /// Current state, with the log stored under `meta.train_log`.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            seed: self.cfg.seed,
            step: self.epoch as u64,
            adam: Some(self.adam.clone()),
            meta: serde_json::json!({ "train_log": self.log }),
        }
    }

    pub fn into_parts(self) -> (MlpParams, TrainLog) {
        (self.params, self.log)
    }

    fn refresh(&mut self) -> Result<()> {
        let block = self.epoch / self.cfg.w_refresh_every;
        if self.cache.as_ref().is_some_and(|c| c.block == block) {
            return Ok(());
        }
        let mut s = self.stream.split("W").split_index(block as u64);
        let freqs = sample_frequencies(&self.cfg.kernel, &mut s, self.cfg.m, self.phi.dim())?;
        let target = TargetValues::evaluate(self.phi, &freqs)?;
        let cp_hat = target.cp_hat();
        self.cache = Some(FrequencyCache {
            block,
            freqs,
            target,
            cp_hat,
        });
        Ok(())
    }

    fn abort(&self, error: Error) -> TrainError {
        TrainError::Aborted(Box::new(Aborted {
            epoch: self.epoch,
            error,
            last_good: Box::new(self.checkpoint()),
            log: self.log.clone(),
        }))
    }

    /// Runs one epoch.
    pub fn step(&mut self) -> Result<(), TrainError> {
        if self.finished() {
            return Ok(());
        }
        self.refresh()?;
        let cfg = &self.cfg;
        let epoch = self.epoch;
        let latent = cfg.latent_dim.expect("resolved");
        let z = sample_matrix(
            &mut self.stream.split("Z").split_index(epoch as u64),
            BaseDistribution::StdNormal,
            cfg.n,
            latent,
        )?;
        let cache = self.cache.as_ref().expect("refreshed");
        let (y, fwd) = forward(&self.params, &z)?;
        let (loss, dy) = match loss_and_grad_with(&y, &cache.freqs.w, &cache.target) {
            Ok(v) => v,
            Err(Error::NonFinite(s)) => return Err(self.abort(Error::NonFinite(s))),
            Err(e) => return Err(e.into()),
        };
        if !loss.is_finite() {
            return Err(self.abort(Error::NonFinite(format!("loss at epoch {epoch}"))));
        }
        let interpretable = loss + cache.cp_hat;
        let mut grad = backward(&self.params, &fwd, &dy)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !grad_norm.is_finite() {
            return Err(self.abort(Error::NonFinite(format!("gradient at epoch {epoch}"))));
        }
        let lr = cfg.lr_at(epoch);

        if !self.collapse_warned && interpretable > COLLAPSE_LOSS {
            let max_var = y.column_variances().into_iter().fold(0.0, f64::max);
            if max_var < COLLAPSE_VARIANCE {
                log::warn!(
                    "epoch {epoch}: generator output variance {max_var:.3e} has collapsed while L + Ĉ_P = {interpretable:.4}"
                );
                self.collapse_warned = true;
            }
        }

        let stop = cfg.early_stop.is_some_and(|t| interpretable < t);
        let last = epoch + 1 == cfg.epochs;
        if epoch.is_multiple_of(cfg.log_every) || last || stop {
            self.log.records.push(TrainRecord {
                epoch,
                loss,
                cp_hat: cache.cp_hat,
                interpretable,
                grad_norm,
                lr,
                seconds: cfg.record_wall_time.then(|| self.started.elapsed().as_secs_f64()),
            });
        }
        if stop {
            self.stopped_early = true;
            return Ok(());
        }

        if let Some(c) = cfg.clip_norm {
            if grad_norm > c {
                let s = c / grad_norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        if let Err(e) = adam_step(&mut self.params, &mut self.adam, &grad, lr) {
            return Err(self.abort(e));
        }
        self.epoch += 1;
        Ok(())
    }

    /// Runs up to `count` epochs, stopping early when finished.
    pub fn run_epochs(&mut self, count: usize) -> Result<(), TrainError> {
        for _ in 0..count {
            if self.finished() {
                break;
            }
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<(), TrainError> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }
}

/// Trains a generator from scratch.
pub fn train(cfg: &TrainConfig, phi: &dyn CharFn) -> Result<(MlpParams, TrainLog), TrainError> {
    let mut t = Trainer::new(cfg, phi)?;
    t.run()?;
    Ok(t.into_parts())
}

/// Finishes a run from a checkpoint.
pub fn resume(cfg: &TrainConfig, phi: &dyn CharFn, ck: &Checkpoint) -> Result<(MlpParams, TrainLog), TrainError> {
    let mut t = Trainer::from_checkpoint(cfg, phi, ck)?;
    t.run()?;
    Ok(t.into_parts())
}

/// `n` generator draws. Latents come in blocks of 4096 rows, block `b`
/// drawn from `stream.split_index(b)`.
pub fn generate(params: &MlpParams, stream: &RngStream, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let arch = params.arch();
    let blocks = par_blocks(n, GENERATE_BLOCK, |r| -> Result<Matrix> {
        let b = (r.start / GENERATE_BLOCK) as u64;
        let z = sample_matrix(
            &mut stream.split_index(b),
            BaseDistribution::StdNormal,
            r.end - r.start,
            arch.input_dim,
        )?;
        Ok(forward(params, &z)?.0)
    });
    let mut data = Vec::with_capacity(n * arch.output_dim);
    for b in blocks {
        data.extend_from_slice(b?.data());
    }
    Matrix::new(n, arch.output_dim, data)
}

/// Checks that a generator's output dimension matches a target.
pub fn check_generator_dim(params: &MlpParams, phi: &dyn CharFn) -> Result<()> {
    check_dim(phi.dim(), params.arch().output_dim)
}
