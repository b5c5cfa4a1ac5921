use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::charfn::stable::is_cauchy_index;
use crate::charfn::{check_dim, StableSpec};
use crate::error::{invalid, Error, Result};
use crate::numkit::{dot, par_blocks, ComplexValue, Matrix, RngStream};

/// Rows per parallel block; block `b` draws from `stream.split_index(b)`.
const SAMPLE_BLOCK: usize = 16_384;

/// CMS uses the α ≠ 1 transform only when `|α − 1|` exceeds this.
const CMS_ALPHA_ONE_BAND: f64 = 1e-9;

/// Univariate stable law `S(α, β, σ, μ)` with characteristic function
/// `exp(iμt − σ^α|t|^α (1 − iβ tan(πα/2) sign t))` for α ≠ 1 and
/// `exp(iμt − σ|t| (1 + iβ (2/π) sign t · log|t|))` for α = 1.
///
/// `scale = 0` is accepted and denotes the point mass at `shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnivStableParams {
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
    pub shift: f64,
}

impl UnivStableParams {
    pub fn new(alpha: f64, beta: f64, scale: f64, shift: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            scale,
            shift,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        crate::charfn::stable::check_alpha(self.alpha, true)?;
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("{} outside [-1, 1]", self.beta)));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(invalid("scale", "must be finite and non-negative"));
        }
        if !self.shift.is_finite() {
            return Err(invalid("shift", "must be finite"));
        }
        Ok(())
    }

    pub fn cf(&self, t: f64) -> ComplexValue {
        let a = t.abs();
        let sign = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        let (decay, angle) = if is_cauchy_index(self.alpha) {
            let log_term = if a > 0.0 { a.ln() } else { 0.0 };
            (
                self.scale * a,
                self.shift * t - self.scale * a * self.beta * FRAC_2_PI * sign * log_term,
            )
        } else {
            let p = (self.scale * a).powf(self.alpha);
            (
                p,
                self.shift * t + p * self.beta * (PI * self.alpha / 2.0).tan() * sign,
            )
        };
        ComplexValue::from_polar((-decay).exp(), angle)
    }

    /// One draw by the Chambers–Mallows–Stuck transform.
    pub fn draw(&self, stream: &mut RngStream) -> f64 {
        let (alpha, beta) = (self.alpha, self.beta);
        let v = loop {
            let u = stream.uniform01();
            if u > 0.0 {
                break PI * (u - 0.5);
            }
        };
        let w = stream.exp1();
        if (alpha - 1.0).abs() > CMS_ALPHA_ONE_BAND {
            let zeta = beta * (PI * alpha / 2.0).tan();
            let b = zeta.atan() / alpha;
            let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
            let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
                * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
            self.scale * x + self.shift
        } else {
            let h = FRAC_PI_2 + beta * v;
            let x = FRAC_2_PI * (h * v.tan() - beta * (FRAC_PI_2 * w * v.cos() / h).ln());
            let shift = if self.scale > 0.0 {
                FRAC_2_PI * beta * self.scale * self.scale.ln()
            } else {
                0.0
            };
            self.scale * x + shift + self.shift
        }
    }
}

/// `n` i.i.d. draws of a univariate stable law.
pub fn sample_stable_univ(params: &UnivStableParams, stream: &RngStream, n: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let blocks = par_blocks(n, SAMPLE_BLOCK, |r| {
        let mut s = stream.split_index((r.start / SAMPLE_BLOCK) as u64);
        r.map(|_| params.draw(&mut s)).collect::<Vec<f64>>()
    });
    Ok(blocks.concat())
}

/// `n` draws of `X = τ + Σ_j c_j S_j u_j` with `S_j` i.i.d. `S(α, 1, 1, 0)`,
/// `c_j = w_j^{1/α}`. For α = 1, `c_j = w_j` and each atom is shifted by
/// `(2/π) w_j log w_j` so that the law matches the spec's characteristic
/// function exactly.
pub fn sample_stable_discrete_spectral(spec: &StableSpec, stream: &RngStream, n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let alpha = spec.alpha();
    let unit = UnivStableParams::new(alpha, 1.0, 1.0, 0.0)?;
    let d = spec.dim();
    let cauchy = (alpha - 1.0).abs() <= CMS_ALPHA_ONE_BAND;
    let mut base = spec.tau().to_vec();
    let coef: Vec<f64> = spec
        .weights()
        .iter()
        .map(|&w| if cauchy { w } else { w.powf(1.0 / alpha) })
        .collect();
    if cauchy {
        for (u, &w) in spec.atoms().iter_rows().zip(spec.weights()) {
            if w > 0.0 {
                let c = FRAC_2_PI * w * w.ln();
                base.iter_mut().zip(u).for_each(|(b, x)| *b += c * x);
            }
        }
    }
    let atoms = spec.atoms();
    let blocks = par_blocks(n, SAMPLE_BLOCK, |r| {
        let mut s = stream.split_index((r.start / SAMPLE_BLOCK) as u64);
        let mut out = Vec::with_capacity((r.end - r.start) * d);
        for _ in r {
            let start = out.len();
            out.extend_from_slice(&base);
            let row = &mut out[start..];
            for (u, &c) in atoms.iter_rows().zip(&coef) {
                let x = c * unit.draw(&mut s);
                row.iter_mut().zip(u).for_each(|(y, a)| *y += x * a);
            }
        }
        out
    });
    Matrix::new(n, d, blocks.concat())
}

/// Law of `⟨u, X⟩` for `X` following `spec`.
///
/// With `a_j = ⟨u, u_j⟩`: `σ^α = Σ w_j |a_j|^α`,
/// `β = Σ w_j sign(a_j)|a_j|^α / σ^α`, `μ = ⟨u, τ⟩`; for α = 1 the shift
/// gains `−(2/π) Σ w_j a_j log|a_j|`. A direction orthogonal to every atom
/// gives `σ = 0`, `β = 0`.
pub fn project_stable_params(spec: &StableSpec, u: &[f64]) -> Result<UnivStableParams> {
    check_dim(spec.dim(), u.len())?;
    if u.iter().all(|&x| x == 0.0) {
        return Err(invalid("u", "projection direction is zero"));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection direction".into()));
    }
    let alpha = spec.alpha();
    let mut mu = dot(u, spec.tau());
    let mut mass = 0.0;
    let mut signed = 0.0;
    let mut log_term = 0.0;
    for (atom, &w) in spec.atoms().iter_rows().zip(spec.weights()) {
        let a = dot(u, atom);
        let p = w * a.abs().powf(alpha);
        mass += p;
        signed += p * sign(a);
        if a != 0.0 {
            log_term += w * a * a.abs().ln();
        }
    }
    let cauchy = is_cauchy_index(alpha);
    if cauchy {
        mu -= FRAC_2_PI * log_term;
    }
    let scale = mass.powf(1.0 / alpha);
    let beta = if mass > 0.0 { (signed / mass).clamp(-1.0, 1.0) } else { 0.0 };
    UnivStableParams::new(alpha, beta, scale, mu)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
