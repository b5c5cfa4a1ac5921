use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{par_blocks, Matrix};

use super::quantiles::empirical_quantiles;

/// Kernel contributions beyond this many bandwidths are dropped.
const CUTOFF_BANDWIDTHS: f64 = 8.0;
const KDE_BLOCK: usize = 8192;

/// Axis-aligned evaluation grid over one or two coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Points per axis, endpoints included.
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Result<Self> {
        let g = Self {
            dims,
            lower,
            upper,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    /// Bounds from the 0.001 and 0.999 sample quantiles of each coordinate,
    /// widened by a quarter of that range.
    pub fn auto(sample: &Matrix, dims: Vec<usize>, resolution: usize) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &k in &dims {
            if k >= sample.cols() {
                return Err(invalid("dims", format!("coordinate {k} out of range")));
            }
            let mut col: Vec<f64> = sample.iter_rows().map(|r| r[k]).collect();
            let q = empirical_quantiles(&mut col, &[0.001, 0.999])?;
            let pad = 0.25 * (q[1] - q[0]).max(1e-12);
            lower.push(q[0] - pad);
            upper.push(q[1] + pad);
        }
        Self::new(dims, lower, upper, resolution)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dims.len()) {
            return Err(invalid("dims", "select one or two coordinates"));
        }
        if self.lower.len() != self.dims.len() || self.upper.len() != self.dims.len() {
            return Err(invalid("lower/upper", "one bound per selected coordinate"));
        }
        for a in 0..self.dims.len() {
            if !(self.lower[a] < self.upper[a]) || !self.lower[a].is_finite() || !self.upper[a].is_finite() {
                return Err(invalid(format!("upper[{a}]"), "must exceed lower and be finite"));
            }
        }
        if self.resolution < 2 {
            return Err(invalid("resolution", "must be at least 2"));
        }
        Ok(())
    }

    fn axis(&self, a: usize) -> Vec<f64> {
        let step = (self.upper[a] - self.lower[a]) / (self.resolution - 1) as f64;
        (0..self.resolution).map(|i| self.lower[a] + i as f64 * step).collect()
    }
}

/// Density values on a grid. For two coordinates the layout is row-major
/// with the first coordinate varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub dims: Vec<usize>,
    pub axes: Vec<Vec<f64>>,
    pub bandwidths: Vec<f64>,
    pub density: Vec<f64>,
    pub contour_levels: Vec<f64>,
}

impl DensityGrid {
    /// CSV `x,density` or `x,y,density`, preceded by `# ` comment lines and
    /// the contour levels.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &[String]) -> io::Result<()> {
        for c in comment {
            writeln!(w, "# {c}")?;
        }
        let levels: Vec<String> = self.contour_levels.iter().map(|v| v.to_string()).collect();
        writeln!(w, "# contour_levels={}", levels.join(";"))?;
        let bw: Vec<String> = self.bandwidths.iter().map(|v| v.to_string()).collect();
        writeln!(w, "# bandwidths={}", bw.join(";"))?;
        if self.axes.len() == 1 {
            writeln!(w, "x,density")?;
            for (x, d) in self.axes[0].iter().zip(&self.density) {
                writeln!(w, "{x},{d}")?;
            }
        } else {
            writeln!(w, "x,y,density")?;
            let ny = self.axes[1].len();
            for (i, x) in self.axes[0].iter().enumerate() {
                for (j, y) in self.axes[1].iter().enumerate() {
                    writeln!(w, "{x},{y},{}", self.density[i * ny + j])?;
                }
            }
        }
        Ok(())
    }

    /// Interior strict local maxima of a 1-d grid whose height is at least
    /// `min_rel` times the global maximum, as `(x, density)`.
    pub fn local_maxima(&self, min_rel: f64) -> Vec<(f64, f64)> {
        if self.axes.len() != 1 {
            return Vec::new();
        }
        let d = &self.density;
        let top = d.iter().copied().fold(0.0, f64::max);
        (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] >= min_rel * top)
            .map(|i| (self.axes[0][i], d[i]))
            .collect()
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        let trap = |axis: &[f64], f: &dyn Fn(usize) -> f64| -> f64 {
            (1..axis.len())
                .map(|i| 0.5 * (axis[i] - axis[i - 1]) * (f(i - 1) + f(i)))
                .sum()
        };
        if self.axes.len() == 1 {
            trap(&self.axes[0], &|i| self.density[i])
        } else {
            let ny = self.axes[1].len();
            let row = |i: usize| trap(&self.axes[1], &|j| self.density[i * ny + j]);
            trap(&self.axes[0], &row)
        }
    }
}

/// Scott's-rule bandwidth `std · n^{−1/(k+4)}` for `k` selected coordinates.
pub fn scott_bandwidths(sample: &Matrix, dims: &[usize]) -> Result<Vec<f64>> {
    let n = sample.rows();
    if n < 2 {
        return Err(Error::TooFewRows {
            what: "kde_density",
            needed: 2,
            got: n,
        });
    }
    let var = sample.column_variances();
    let factor = (n as f64).powf(-1.0 / (dims.len() as f64 + 4.0));
    dims.iter()
        .map(|&k| {
            let sd = var[k].sqrt();
            if sd > 0.0 && sd.is_finite() {
                Ok(sd * factor)
            } else {
                Err(Error::DegenerateCoordinate(k))
            }
        })
        .collect()
}

/// Gaussian product-kernel density estimate on `grid`.
pub fn kde_density(sample: &Matrix, grid: &GridSpec, contour_levels: &[f64]) -> Result<DensityGrid> {
    grid.validate()?;
    if let Some(&k) = grid.dims.iter().find(|&&k| k >= sample.cols()) {
        return Err(invalid("dims", format!("coordinate {k} out of range")));
    }
    let h = scott_bandwidths(sample, &grid.dims)?;
    let axes: Vec<Vec<f64>> = (0..grid.dims.len()).map(|a| grid.axis(a)).collect();
    let res = grid.resolution;
    let steps: Vec<f64> = axes.iter().map(|ax| ax[1] - ax[0]).collect();
    let cells = if axes.len() == 1 { res } else { res * res };

    // For a value v, the contributing grid indices and kernel weights on one axis.
    let axis_weights = |a: usize, v: f64| -> (usize, Vec<f64>) {
        let r = CUTOFF_BANDWIDTHS * h[a];
        let lo = ((v - r - axes[a][0]) / steps[a]).ceil().max(0.0);
        let hi = ((v + r - axes[a][0]) / steps[a]).floor().min((res - 1) as f64);
        if !(lo <= hi) {
            return (0, Vec::new());
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let w = (lo..=hi)
            .map(|i| {
                let t = (axes[a][i] - v) / h[a];
                (-0.5 * t * t).exp()
            })
            .collect();
        (lo, w)
    };

    let partials = par_blocks(sample.rows(), KDE_BLOCK, |r| {
        let mut acc = vec![0.0; cells];
        for i in r {
            let row = sample.row(i);
            let (lx, wx) = axis_weights(0, row[grid.dims[0]]);
            if axes.len() == 1 {
                for (k, w) in wx.iter().enumerate() {
                    acc[lx + k] += w;
                }
            } else {
                let (ly, wy) = axis_weights(1, row[grid.dims[1]]);
                for (k, a) in wx.iter().enumerate() {
                    let base = (lx + k) * res + ly;
                    for (l, b) in wy.iter().enumerate() {
                        acc[base + l] += a * b;
                    }
                }
            }
        }
        acc
    });
    let mut density = vec![0.0; cells];
    for p in partials {
        density.iter_mut().zip(&p).for_each(|(d, v)| *d += v);
    }
    let norm = sample.rows() as f64 * h.iter().map(|b| b * (2.0 * PI).sqrt()).product::<f64>();
    density.iter_mut().for_each(|d| *d /= norm);
    Ok(DensityGrid {
        dims: grid.dims.clone(),
        axes,
        bandwidths: h,
        density,
        contour_levels: contour_levels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{sample_matrix, seed_stream, BaseDistribution};

    #[test]
    fn one_d_normal_peak_and_mass() {
        let x = sample_matrix(&mut seed_stream(1), BaseDistribution::StdNormal, 200_000, 1).unwrap();
        let g = GridSpec::new(vec![0], vec![-6.0], vec![6.0], 241).unwrap();
        let k = kde_density(&x, &g, &[]).unwrap();
        let peak = k.density[120];
        assert!((peak / (2.0 * PI).sqrt().recip() - 1.0).abs() < 0.03, "{peak}");
        assert!((k.integral() - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_d_normal_origin() {
        let x = sample_matrix(&mut seed_stream(2), BaseDistribution::StdNormal, 200_000, 2).unwrap();
        let g = GridSpec::new(vec![0, 1], vec![-6.0, -6.0], vec![6.0, 6.0], 121).unwrap();
        let k = kde_density(&x, &g, &[0.01]).unwrap();
        let origin = k.density[60 * 121 + 60];
        assert!((origin * 2.0 * PI - 1.0).abs() < 0.05, "{origin}");
        assert!((k.integral() - 1.0).abs() < 0.01);
    }

    #[test]
    fn degenerate_coordinate_named() {
        let x = Matrix::new(3, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        let g = GridSpec::new(vec![0], vec![0.0], vec![2.0], 5).unwrap();
        assert!(matches!(kde_density(&x, &g, &[]), Err(Error::DegenerateCoordinate(0))));
    }

    #[test]
    fn bimodal_maxima() {
        let mut s = seed_stream(3);
        let a = sample_matrix(&mut s, BaseDistribution::StdNormal, 50_000, 1).unwrap();
        let data: Vec<f64> = a.data().iter().enumerate().map(|(i, v)| if i % 2 == 0 { v - 3.0 } else { v + 3.0 }).collect();
        let x = Matrix::new(50_000, 1, data).unwrap();
        let g = GridSpec::new(vec![0], vec![-8.0], vec![8.0], 321).unwrap();
        let m = kde_density(&x, &g, &[]).unwrap().local_maxima(0.1);
        assert_eq!(m.len(), 2, "{m:?}");
        assert!((m[0].0 + 3.0).abs() < 0.3 && (m[1].0 - 3.0).abs() < 0.3);
    }
}
