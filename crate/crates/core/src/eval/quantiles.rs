use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{dot, Matrix};

pub(crate) fn check_levels(q: &[f64]) -> Result<()> {
    for (i, &p) in q.iter().enumerate() {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantiles[{i}]"), format!("{p} outside (0, 1)")));
        }
    }
    Ok(())
}

/// Type-7 quantiles (linear interpolation at `h = (n−1)p`) of `values`,
/// which are sorted in place.
pub fn empirical_quantiles(values: &mut [f64], q: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("sample"));
    }
    check_levels(q)?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("sample".into()));
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Ok(q.iter()
        .map(|&p| {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = h - lo as f64;
            if frac == 0.0 {
                values[lo]
            } else {
                values[lo] + frac * (values[hi] - values[lo])
            }
        })
        .collect())
}

/// Empirical quantiles of `⟨u, Y_i⟩`.
pub fn projection_quantiles(sample: &Matrix, u: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    if sample.rows() == 0 {
        return Err(Error::Empty("sample"));
    }
    crate::charfn::check_dim(sample.cols(), u.len())?;
    let mut proj: Vec<f64> = sample.iter_rows().map(|y| dot(y, u)).collect();
    empirical_quantiles(&mut proj, q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    /// Projection label such as `u1`.
    pub projection: String,
    pub u: Vec<f64>,
    /// `generator` or `oracle`.
    pub source: String,
    pub values: Vec<f64>,
}

/// Quantiles per projection and source, one CSV row each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub quantiles: Vec<f64>,
    pub rows: Vec<QuantileRow>,
}

impl QuantileTable {
    pub fn new(quantiles: Vec<f64>) -> Self {
        Self {
            quantiles,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, projection: &str, u: &[f64], source: &str, values: Vec<f64>) {
        self.rows.push(QuantileRow {
            projection: projection.to_string(),
            u: u.to_vec(),
            source: source.to_string(),
            values,
        });
    }

    /// Header `projection,u,source,q…`; `u` entries are `;`-separated.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &[String]) -> io::Result<()> {
        for c in comment {
            writeln!(w, "# {c}")?;
        }
        write!(w, "projection,u,source")?;
        for q in &self.quantiles {
            write!(w, ",q{q}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            let u: Vec<String> = r.u.iter().map(|v| v.to_string()).collect();
            write!(w, "{},{},{}", r.projection, u.join(";"), r.source)?;
            for v in &r.values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
