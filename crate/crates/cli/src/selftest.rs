//! Quick consistency checks runnable from an installed binary.

use cfgen::charfn::{CharFn, GaussianMixtureSpec, SpectralSource, StableSpec};
use cfgen::kernel::{
    closed_form_kernel, estimate_cp, mmd2_u_cf, sample_frequencies, KernelFamily, KernelSpec, DEFAULT_BANDWIDTHS,
};
use cfgen::loss::{loss_grad_outputs, loss_value};
use cfgen::net::{backward, forward, init_mlp, MlpParams, NetArch};
use cfgen::numkit::{sample_matrix, BaseDistribution};
use cfgen::{Matrix, RngStream};

use crate::{CliError, SelftestArgs};

type Check = Result<String, String>;
type CheckFn = fn(u64) -> cfgen::Result<Check>;

fn random_target(s: &mut RngStream, d: usize, k: u64) -> cfgen::Result<Box<dyn CharFn>> {
    if k.is_multiple_of(2) {
        Ok(Box::new(GaussianMixtureSpec::random(d, 2, 1.0, s)?))
    } else {
        let source = SpectralSource {
            mean: vec![0.0; d],
            cov: Matrix::identity(d),
        };
        Ok(Box::new(StableSpec::from_gaussian_spectral(0.5 + s.uniform01(), vec![0.2; d], source, 16, s)?))
    }
}

/// `loss + Ĉ_P` against the O(n²m) estimator.
fn loss_identity(seed: u64) -> cfgen::Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let mut s = RngStream::new(seed).split("identity").split_index(k);
        let d = 1 + s.below(4);
        let phi = random_target(&mut s, d, k)?;
        let (n, m) = (2 + s.below(30), 1 + s.below(30));
        let y = sample_matrix(&mut s, BaseDistribution::StdNormal, n, d)?;
        let freqs = sample_frequencies(&KernelSpec::default(), &mut s, m, d)?;
        let a = loss_value(&y, &freqs, phi.as_ref())? + estimate_cp(phi.as_ref(), &freqs)?;
        let b = mmd2_u_cf(&y, phi.as_ref(), &freqs)?;
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    let msg = format!("max relative gap {worst:.2e} (< 1e-10)");
    Ok(if worst < 1e-10 { Ok(msg) } else { Err(msg) })
}

/// Backward pass against central differences with random biases.
fn gradient(seed: u64) -> cfgen::Result<Check> {
    let mut s = RngStream::new(seed).split("gradient");
    let arch = NetArch::new(4, vec![9, 9], 2)?;
    let phi = GaussianMixtureSpec::standard_normal(2)?;
    let freqs = sample_frequencies(&KernelSpec::default(), &mut s, 16, 2)?;
    let init = init_mlp(&arch, &mut s)?;
    let mut theta = init.theta().to_vec();
    theta.iter_mut().for_each(|v| *v += 0.1 * s.std_normal());
    let params = MlpParams::from_theta(arch.clone(), theta)?;
    let z = sample_matrix(&mut s, BaseDistribution::StdNormal, 16, 4)?;
    let (y, cache) = forward(&params, &z)?;
    let g = backward(&params, &cache, &loss_grad_outputs(&y, &freqs, &phi)?)?;
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let i = k * params.len() / 20;
        let mut f = [0.0; 2];
        for (slot, sign) in f.iter_mut().zip([1.0, -1.0]) {
            let mut t = params.theta().to_vec();
            t[i] += sign * h;
            let p = MlpParams::from_theta(arch.clone(), t)?;
            *slot = loss_value(&forward(&p, &z)?.0, &freqs, &phi)?;
        }
        let fd = (f[0] - f[1]) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3 * scale));
    }
    let msg = format!("max relative error {worst:.2e} (< 1e-6)");
    Ok(if worst < 1e-6 { Ok(msg) } else { Err(msg) })
}

/// Random-feature kernel against the closed form.
fn bochner(seed: u64) -> cfgen::Result<Check> {
    let m = 100_000;
    let tol = 4.0 / (m as f64).sqrt();
    let mut s = RngStream::new(seed).split("bochner");
    let mut worst: f64 = 0.0;
    for family in [KernelFamily::Gaussian, KernelFamily::Laplace] {
        for &bw in &DEFAULT_BANDWIDTHS {
            let spec = KernelSpec::new(family, vec![bw])?;
            let freqs = sample_frequencies(&spec, &mut s, m, 2)?;
            for _ in 0..5 {
                let delta = [s.std_normal(), s.std_normal()];
                let rf = freqs
                    .w
                    .iter_rows()
                    .map(|w| (w[0] * delta[0] + w[1] * delta[1]).cos())
                    .sum::<f64>()
                    / m as f64;
                worst = worst.max((rf - closed_form_kernel(&spec, &delta, &[0.0, 0.0])?).abs());
            }
        }
    }
    let msg = format!("max deviation {worst:.2e} (< 4/√m = {tol:.1e})");
    Ok(if worst < tol { Ok(msg) } else { Err(msg) })
}

pub fn cmd_selftest(args: &SelftestArgs) -> Result<(), CliError> {
    let checks: [(&str, CheckFn); 3] =
        [("loss identity", loss_identity), ("gradient", gradient), ("kernel consistency", bochner)];
    let mut failed = Vec::new();
    for (name, check) in checks {
        match check(args.seed)? {
            Ok(msg) => println!("selftest {name}: PASS {msg}"),
            Err(msg) => {
                println!("selftest {name}: FAIL {msg}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}
