use super::{check_dim, CharFn};
use crate::error::{Error, Result};
use crate::numkit::{dot, ComplexValue, Matrix};

/// `(1/n) Σ_i exp(i zᵀY_i)`.
pub fn eval_empirical_cf(sample: &Matrix, z: &[f64]) -> Result<ComplexValue> {
    if sample.rows() == 0 {
        return Err(Error::Empty("sample"));
    }
    check_dim(sample.cols(), z.len())?;
    let (mut c, mut s) = (0.0, 0.0);
    for y in sample.iter_rows() {
        let (sn, cs) = dot(y, z).sin_cos();
        c += cs;
        s += sn;
    }
    let n = sample.rows() as f64;
    Ok(ComplexValue::new(c / n, s / n))
}

/// Empirical characteristic function of a fixed sample.
#[derive(Clone, Debug)]
pub struct EmpiricalCf {
    sample: Matrix,
}

impl EmpiricalCf {
    pub fn new(sample: Matrix) -> Result<Self> {
        if sample.rows() == 0 || sample.cols() == 0 {
            return Err(Error::Empty("sample"));
        }
        Ok(Self { sample })
    }

    pub fn sample(&self) -> &Matrix {
        &self.sample
    }
}

impl CharFn for EmpiricalCf {
    fn dim(&self) -> usize {
        self.sample.cols()
    }

    fn eval(&self, z: &[f64]) -> Result<ComplexValue> {
        eval_empirical_cf(&self.sample, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_and_point_mass() {
        let s = Matrix::new(3, 2, vec![0.3, 1.0, -2.0, 0.5, 4.0, 4.0]).unwrap();
        assert_eq!(eval_empirical_cf(&s, &[0.0, 0.0]).unwrap(), ComplexValue::new(1.0, 0.0));
        let zeros = Matrix::zeros(2, 1);
        assert_eq!(eval_empirical_cf(&zeros, &[3.7]).unwrap(), ComplexValue::new(1.0, 0.0));
    }

    #[test]
    fn symmetric_two_point() {
        let a = 1.3;
        let s = Matrix::new(2, 1, vec![-a, a]).unwrap();
        for z in [0.2, 1.0, 5.5] {
            let v = eval_empirical_cf(&s, &[z]).unwrap();
            assert!((v.re - (a * z).cos()).abs() < 1e-15);
            assert!(v.im.abs() < 1e-15);
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(eval_empirical_cf(&Matrix::zeros(0, 1), &[1.0]).is_err());
        assert!(EmpiricalCf::new(Matrix::zeros(0, 1)).is_err());
    }
}
