use std::path::{Path, PathBuf};

use cfgen::baselines::{
    project_stable_params, sample_gaussian_mixture, sample_stable_discrete_spectral, sample_stable_univ,
    write_sample_csv,
};
use cfgen::eval::{empirical_quantiles, kde_density, projection_quantiles, two_sample_report, GridSpec, QuantileTable};
use cfgen::kernel::{estimate_cp, sample_frequencies};
use cfgen::loss::loss_value;
use cfgen::net::{load_checkpoint, save_checkpoint, Checkpoint};
use cfgen::trainer::{check_generator_dim, generate, TrainError, Trainer};
use cfgen::{Matrix, RngStream};
use serde_json::json;

use crate::config::{load_config, ExperimentConfig, Provenance, Target};
use crate::output::{create_dir, header, write_file, write_json};
use crate::{CliError, EvalArgs, SampleArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CHECKPOINT_JSON_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// Loads, overrides, resolves and validates; returns the config and target.
fn prepare(path: &Path, seed: Option<u64>, out: Option<&PathBuf>) -> Result<(ExperimentConfig, Target), CliError> {
    let mut raw = load_config(path)?;
    if let Some(s) = seed {
        raw.seed = s;
    }
    if let Some(o) = out {
        raw.output_dir = o.clone();
    }
    let mut cfg = raw.resolve()?;
    let target = Target::load(&cfg.target)?;
    cfg.resolve_for_dim(target.dim());
    cfg.validate(target.dim())?;
    Ok((cfg, target))
}

fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    let name = match cfg.checkpoint_format {
        cfgen::net::CheckpointFormat::Binary => CHECKPOINT_FILE,
        cfgen::net::CheckpointFormat::Json => CHECKPOINT_JSON_FILE,
    };
    cfg.output_dir.join(name)
}

fn with_provenance(mut ck: Checkpoint, p: &Provenance) -> Checkpoint {
    if let Some(obj) = ck.meta.as_object_mut() {
        obj.insert("provenance".into(), json!(p));
    }
    ck
}

fn write_progress(cfg: &ExperimentConfig, trainer_ck: Checkpoint, log: &cfgen::trainer::TrainLog, p: &Provenance) -> Result<(), CliError> {
    let path = checkpoint_path(cfg);
    save_checkpoint(&path, &with_provenance(trainer_ck, p), cfg.checkpoint_format)?;
    let comment = [header(p, "train"), format!("seed={}", cfg.seed)];
    write_file(&cfg.output_dir.join(TRAIN_LOG_FILE), |w| log.write_csv(w, &comment))
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (cfg, target) = prepare(&args.config, args.seed, args.out.as_ref())?;
    let prov = cfg.provenance();
    create_dir(&cfg.output_dir)?;
    let mut resolved = cfg.clone();
    resolved.provenance = Some(prov.clone());
    write_json(&cfg.output_dir.join(RESOLVED_CONFIG_FILE), &resolved)?;

    let phi = target.charfn();
    let mut trainer = match &args.checkpoint {
        Some(path) => Trainer::from_checkpoint(&cfg.train, phi, &load_checkpoint(path)?)?,
        None => Trainer::new(&cfg.train, phi)?,
    };
    log::info!(
        "training {} epochs from epoch {} (config_hash={})",
        cfg.train.epochs,
        trainer.epoch(),
        prov.config_hash
    );
    let chunk = if cfg.checkpoint_every == 0 { usize::MAX } else { cfg.checkpoint_every };
    while !trainer.finished() {
        match trainer.run_epochs(chunk) {
            Ok(()) => {
                write_progress(&cfg, trainer.checkpoint(), trainer.log(), &prov)?;
                if let Some(r) = trainer.log().last() {
                    log::info!("epoch {}: L + Ĉ_P = {:.6}", r.epoch, r.interpretable);
                }
            }
            Err(TrainError::Aborted(a)) => {
                write_progress(&cfg, *a.last_good.clone(), &a.log, &prov)?;
                return Err(CliError::Numerical(format!(
                    "epoch {}: {}; last good state saved to {}",
                    a.epoch,
                    a.error,
                    checkpoint_path(&cfg).display()
                )));
            }
            Err(TrainError::Setup(e)) => return Err(e.into()),
        }
    }
    if trainer.stopped_early() {
        log::info!("stopped early at epoch {}", trainer.epoch());
    }
    Ok(())
}

fn checkpoint_provenance(ck: &Checkpoint) -> Provenance {
    ck.meta
        .get("provenance")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_else(|| Provenance {
            config_hash: "unknown".into(),
            git: crate::config::git_describe().into(),
        })
}

pub fn cmd_sample(args: &SampleArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let ck = load_checkpoint(&args.checkpoint)?;
    if let Some(path) = &args.config {
        let (_, target) = prepare(path, None, None)?;
        check_generator_dim(&ck.params, target.charfn())?;
    }
    let seed = args.seed.unwrap_or(ck.seed);
    let sample = generate(&ck.params, &RngStream::new(seed).split("sample"), args.n)?;
    let comment = [
        header(&checkpoint_provenance(&ck), "sample"),
        format!("seed={seed} n={} step={}", args.n, ck.step),
    ];
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(&args.out, |w| write_sample_csv(w, &sample, &comment))
}

/// Reference rows for the quantile table and a full sample for the
/// two-sample report and density grids.
enum Oracle {
    Exact(Matrix),
    Projection(Matrix),
    None,
}

impl Oracle {
    fn label(&self) -> &'static str {
        match self {
            Self::Exact(_) => "exact",
            Self::Projection(_) => "projection",
            Self::None => "none",
        }
    }

    fn sample(&self) -> Option<&Matrix> {
        match self {
            Self::Exact(m) | Self::Projection(m) => Some(m),
            Self::None => None,
        }
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (cfg, target) = prepare(&args.config, args.seed, None)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("eval"));
    let prov = cfg.provenance();
    let ck = load_checkpoint(&args.checkpoint)?;
    check_generator_dim(&ck.params, target.charfn())?;
    let trained_with = checkpoint_provenance(&ck).config_hash;
    if trained_with != prov.config_hash {
        log::warn!("checkpoint was trained with config_hash={trained_with}, evaluating with {}", prov.config_hash);
    }
    let ev = &cfg.eval;
    let n = args.n.unwrap_or(ev.sample_size);
    if n < 2 {
        return Err(CliError::Config("--n must be at least 2".into()));
    }
    let root = RngStream::new(cfg.seed).split("eval");
    let gen = generate(&ck.params, &root.split("generator"), n)?;
    let oracle = match &target {
        Target::GaussianMixture(s) => Oracle::Exact(sample_gaussian_mixture(s, &root.split("oracle"), n)?),
        Target::Stable(s) => Oracle::Projection(sample_stable_discrete_spectral(s, &root.split("oracle"), n)?),
        Target::External(_) => {
            log::warn!("external target has no reference sampler; oracle rows skipped");
            Oracle::None
        }
    };
    create_dir(&out)?;
    let mut comment = vec![header(&prov, "eval"), format!("oracle: {}", oracle.label())];
    comment.push(format!("checkpoint_step={} n={n}", ck.step));

    // Quantiles of projections ⟨u, X⟩.
    let projections = ev.projections.clone().expect("resolved");
    let mut table = QuantileTable::new(ev.quantiles.clone());
    for (i, u) in projections.iter().enumerate() {
        let name = format!("u{}", i + 1);
        table.push(&name, u, "generator", projection_quantiles(&gen, u, &ev.quantiles)?);
        match (&target, &oracle) {
            (_, Oracle::Exact(x)) => table.push(&name, u, "exact", projection_quantiles(x, u, &ev.quantiles)?),
            (Target::Stable(s), Oracle::Projection(_)) => {
                let p = project_stable_params(s, u)?;
                let mut draws = sample_stable_univ(&p, &root.split("projection").split_index(i as u64), n)?;
                table.push(&name, u, "oracle", empirical_quantiles(&mut draws, &ev.quantiles)?);
            }
            _ => {}
        }
    }
    write_file(&out.join("quantiles.csv"), |w| table.write_csv(w, &comment))?;

    // Two-sample report on leading rows; without an oracle the generator is
    // compared with an independent draw of itself.
    let kernel = ev.mmd_kernel.clone().unwrap_or_else(|| cfg.train.kernel.clone());
    let rows = ev.mmd_rows.min(n);
    let lead = gen.slice_rows(0, rows);
    let (comparison, report) = match oracle.sample() {
        Some(x) => ("generator_vs_oracle", two_sample_report(&lead, &x.slice_rows(0, rows), &kernel, &ev.permutation)?),
        None => {
            let other = generate(&ck.params, &root.split("self"), rows)?;
            ("generator_vs_self", two_sample_report(&lead, &other, &kernel, &ev.permutation)?)
        }
    };

    // L + Ĉ_P on a fresh batch at training sizes; needs only the CF.
    let phi = target.charfn();
    let fit_n = cfg.train.n.min(n);
    let freqs = sample_frequencies(&cfg.train.kernel, &mut root.split("W"), cfg.train.m, phi.dim())?;
    let loss = loss_value(&gen.slice_rows(0, fit_n), &freqs, phi)?;
    let cp_hat = estimate_cp(phi, &freqs)?;

    // Density grids share bounds taken from the reference sample when there is one.
    let dims = match ev.bivariate_dims {
        Some([a, b]) => vec![a, b],
        None => vec![0],
    };
    let grid = GridSpec::auto(oracle.sample().unwrap_or(&gen), dims, ev.grid_resolution)?;
    let mut grids = vec![("generator", &gen)];
    if let Some(x) = oracle.sample() {
        grids.push(("oracle", x));
    }
    let mut grid_files = Vec::new();
    for (label, sample) in grids {
        let density = kde_density(sample, &grid, &ev.contour_levels)?;
        let file = format!("density_{label}.csv");
        write_file(&out.join(&file), |w| density.write_csv(w, &comment))?;
        grid_files.push(file);
    }

    let report = json!({
        "provenance": prov,
        "oracle": oracle.label(),
        "checkpoint_step": ck.step,
        "sample_size": n,
        "comparison": comparison,
        "kernel": kernel,
        "two_sample": report,
        "target_fit": {
            "n": fit_n,
            "m": cfg.train.m,
            "loss": loss,
            "cp_hat": cp_hat,
            "interpretable": loss + cp_hat,
        },
        "quantile_table": "quantiles.csv",
        "density_grids": grid_files,
    });
    write_json(&out.join("report.json"), &report)?;
    log::info!(
        "{comparison}: MMD² = {:.3e} (99% null band {:.3e}); L + Ĉ_P = {:.4}",
        report["two_sample"]["mmd2"].as_f64().unwrap_or(f64::NAN),
        report["two_sample"]["null"]["q99"].as_f64().unwrap_or(f64::NAN),
        loss + cp_hat
    );
    Ok(())
}
