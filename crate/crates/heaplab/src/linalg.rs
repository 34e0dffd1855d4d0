//! Dense helpers for the small SPD matrices in the model layer (random-effect
//! covariances are c x c with c rarely above 2 or 3).

use crate::error::{HeapError, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmallMat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        SmallMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = SmallMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_outer(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] += v[i] * v[j];
            }
        }
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        debug_assert_eq!(self.n, other.n);
        SmallMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Lower-triangular Cholesky factor; fails on non-SPD input.
    pub fn cholesky(&self) -> Result<SmallMat> {
        let n = self.n;
        let mut l = SmallMat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(HeapError::Numerical(format!(
                            "matrix not positive definite (pivot {s} at {i})"
                        )));
                    }
                    l.set(i, j, s.sqrt());
                } else {
                    l.set(i, j, s / l.at(j, j));
                }
            }
        }
        Ok(l)
    }
}

/// Cholesky-based operations on an SPD matrix.
pub struct Spd {
    chol: SmallMat,
}

impl Spd {
    pub fn new(m: &SmallMat) -> Result<Self> {
        Ok(Spd { chol: m.cholesky()? })
    }

    pub fn dim(&self) -> usize {
        self.chol.n
    }

    pub fn log_det(&self) -> f64 {
        (0..self.chol.n)
            .map(|i| self.chol.at(i, i).ln())
            .sum::<f64>()
            * 2.0
    }

    /// x^T M^{-1} x via two triangular solves.
    pub fn inv_quadform(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        let n = self.chol.n;
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.chol.at(i, k) * y[k];
            }
            y[i] = s / self.chol.at(i, i);
        }
        y.iter().map(|v| v * v).sum()
    }

    /// tr(M^{-1} B).
    pub fn inv_trace_product(&self, b: &SmallMat) -> f64 {
        let n = self.chol.n;
        let mut total = 0.0;
        // Solve M x = b_col for each column and take the diagonal sum.
        for col in 0..n {
            let mut y: Vec<f64> = (0..n).map(|i| b.at(i, col)).collect();
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= self.chol.at(i, k) * y[k];
                }
                y[i] = s / self.chol.at(i, i);
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= self.chol.at(k, i) * y[k];
                }
                y[i] = s / self.chol.at(i, i);
            }
            total += y[col];
        }
        total
    }

    /// Inverse as a dense matrix.
    pub fn inverse(&self) -> SmallMat {
        let n = self.chol.n;
        let mut inv = SmallMat::zeros(n);
        for col in 0..n {
            let mut y = vec![0.0; n];
            y[col] = 1.0;
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= self.chol.at(i, k) * y[k];
                }
                y[i] = s / self.chol.at(i, i);
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= self.chol.at(k, i) * y[k];
                }
                y[i] = s / self.chol.at(i, i);
            }
            for i in 0..n {
                inv.set(i, col, y[i]);
            }
        }
        inv
    }
}

/// log density of a mean-zero multivariate normal with covariance `cov`.
pub fn mvn_log_pdf_zero(x: &[f64], cov: &Spd) -> f64 {
    let n = x.len() as f64;
    -0.5 * (cov.inv_quadform(x) + cov.log_det() + n * core::f64::consts::TAU.ln())
}

/// Multivariate log gamma.
pub fn ln_gamma_multivariate(p: usize, a: f64) -> f64 {
    let mut s = 0.25 * (p * (p - 1)) as f64 * core::f64::consts::PI.ln();
    for j in 0..p {
        s += crate::util::ln_gamma(a - 0.5 * j as f64);
    }
    s
}

/// log density of an inverse-Wishart(scale `psi`, dof `nu`) at `sigma`.
pub fn inv_wishart_log_pdf(sigma: &SmallMat, psi: &SmallMat, nu: f64) -> Result<f64> {
    let p = sigma.n;
    let sig = Spd::new(sigma)?;
    let psi_spd = Spd::new(psi)?;
    Ok(0.5 * nu * psi_spd.log_det()
        - 0.5 * nu * p as f64 * 2.0f64.ln()
        - ln_gamma_multivariate(p, 0.5 * nu)
        - 0.5 * (nu + p as f64 + 1.0) * sig.log_det()
        - 0.5 * sig.inv_trace_product(psi))
}
