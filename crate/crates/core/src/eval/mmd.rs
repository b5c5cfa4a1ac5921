use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{closed_form_kernel, mmd2_u_twosample, KernelSpec};
use crate::numkit::{par_blocks, Matrix, RngStream, BLOCK_ROWS};

use super::quantiles::empirical_quantiles;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationOptions {
    /// Rows per side used for the permutation null.
    pub max_rows: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        Self {
            max_rows: 1000,
            permutations: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullBand {
    pub q50: f64,
    pub q95: f64,
    pub q99: f64,
}

/// Two-sample comparison. Inputs are put in a canonical order first, so
/// swapping them gives an identical report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleReport {
    /// Unbiased `MMD²` on the full samples.
    pub mmd2: f64,
    /// Row counts in canonical order.
    pub sizes: [usize; 2],
    /// `MMD²` on the subsamples the null band is built from.
    pub subsample_mmd2: f64,
    pub subsample_sizes: [usize; 2],
    pub permutations: usize,
    pub null: NullBand,
    /// `(1 + #{null ≥ observed}) / (1 + permutations)`.
    pub p_value: f64,
    pub exceeds_99: bool,
}

fn canonical_cmp(a: &Matrix, b: &Matrix) -> Ordering {
    a.rows()
        .cmp(&b.rows())
        .then(a.cols().cmp(&b.cols()))
        .then_with(|| {
            a.data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn subsample(x: &Matrix, max_rows: usize, stream: &mut RngStream) -> Matrix {
    if x.rows() <= max_rows {
        return x.clone();
    }
    let mut idx = stream.permutation(x.rows());
    idx.truncate(max_rows);
    idx.sort_unstable();
    x.select_rows(&idx)
}

/// Unbiased `MMD²` of the split `labels[i] = true` vs `false` of a pooled
/// Gram matrix.
fn mmd2_from_gram(gram: &[f64], n: usize, first: &[bool]) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = &gram[i * n..(i + 1) * n];
        for j in i + 1..n {
            match (first[i], first[j]) {
                (true, true) => sxx += row[j],
                (false, false) => syy += row[j],
                _ => sxy += row[j],
            }
        }
    }
    let nx = first.iter().filter(|&&f| f).count() as f64;
    let ny = n as f64 - nx;
    2.0 * sxx / (nx * (nx - 1.0)) + 2.0 * syy / (ny * (ny - 1.0)) - 2.0 * sxy / (nx * ny)
}

/// Full-sample `MMD²` and a permutation null band.
///
/// The null is computed on subsamples of at most `max_rows` rows per side.
pub fn two_sample_report(a: &Matrix, b: &Matrix, spec: &KernelSpec, opts: &PermutationOptions) -> Result<TwoSampleReport> {
    let (x, y) = if canonical_cmp(a, b) == Ordering::Greater { (b, a) } else { (a, b) };
    let mmd2 = mmd2_u_twosample(x, y, spec)?;
    if opts.max_rows < 2 {
        return Err(crate::error::invalid("max_rows", "must be at least 2"));
    }
    if opts.permutations == 0 {
        return Err(crate::error::invalid("permutations", "must be positive"));
    }
    let root = RngStream::new(opts.seed).split("two_sample");
    let xs = subsample(x, opts.max_rows, &mut root.split("first"));
    let ys = subsample(y, opts.max_rows, &mut root.split("second"));
    let pooled = xs.vstack(&ys)?;
    let n = pooled.rows();
    let rows = par_blocks(n, BLOCK_ROWS, |r| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity((r.end - r.start) * n);
        for i in r {
            for j in 0..n {
                out.push(closed_form_kernel(spec, pooled.row(i), pooled.row(j))?);
            }
        }
        Ok(out)
    });
    let mut gram = Vec::with_capacity(n * n);
    for r in rows {
        gram.extend(r?);
    }
    let mut labels: Vec<bool> = (0..n).map(|i| i < xs.rows()).collect();
    let observed = mmd2_from_gram(&gram, n, &labels);

    let mut perm_stream = root.split("permutations");
    let mut null = Vec::with_capacity(opts.permutations);
    for _ in 0..opts.permutations {
        let p = perm_stream.permutation(n);
        for (slot, &k) in labels.iter_mut().zip(&p) {
            *slot = k < xs.rows();
        }
        null.push(mmd2_from_gram(&gram, n, &labels));
    }
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    let q = empirical_quantiles(&mut null, &[0.5, 0.95, 0.99])?;
    if !mmd2.is_finite() || !observed.is_finite() {
        return Err(Error::NonFinite("two-sample statistic".into()));
    }
    Ok(TwoSampleReport {
        mmd2,
        sizes: [x.rows(), y.rows()],
        subsample_mmd2: observed,
        subsample_sizes: [xs.rows(), ys.rows()],
        permutations: opts.permutations,
        null: NullBand {
            q50: q[0],
            q95: q[1],
            q99: q[2],
        },
        p_value: (1 + exceed) as f64 / (1 + opts.permutations) as f64,
        exceeds_99: observed > q[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{sample_matrix, seed_stream, BaseDistribution};

    #[test]
    fn shifted_normal_exceeds_band() {
        let mut s = seed_stream(1);
        let a = sample_matrix(&mut s, BaseDistribution::StdNormal, 300, 1).unwrap();
        let b = Matrix::new(300, 1, a.data().iter().map(|v| v + 3.0).collect()).unwrap();
        let b = b.select_rows(&(0..300).rev().collect::<Vec<_>>());
        let r = two_sample_report(&a, &b, &KernelSpec::default(), &PermutationOptions::default()).unwrap();
        assert!(r.exceeds_99);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn identical_samples_near_zero() {
        let mut s = seed_stream(2);
        let a = sample_matrix(&mut s, BaseDistribution::StdNormal, 200, 2).unwrap();
        let r = two_sample_report(&a, &a, &KernelSpec::default(), &PermutationOptions::default()).unwrap();
        // Unbiased estimator on identical samples: within-sums and cross-sum
        // differ only by the diagonal, bounded by 2/(n−1).
        assert!(r.mmd2.abs() <= 2.0 / 199.0);
        assert!(!r.exceeds_99);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut s = seed_stream(3);
        let a = sample_matrix(&mut s, BaseDistribution::StdNormal, 150, 2).unwrap();
        let b = sample_matrix(&mut s, BaseDistribution::StdCauchy, 120, 2).unwrap();
        let opts = PermutationOptions {
            max_rows: 100,
            permutations: 50,
            seed: 9,
        };
        let ab = two_sample_report(&a, &b, &KernelSpec::default(), &opts).unwrap();
        let ba = two_sample_report(&b, &a, &KernelSpec::default(), &opts).unwrap();
        assert_eq!(ab, ba);
    }
}
