//! Ridge classifier on standardized features with generalized
//! cross-validation over the penalty.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::features::FeatureMatrix;
use crate::error::{Error, Result};
use crate::series::Label;

/// Ten log-spaced penalties from 1e-3 to 1e3.
pub fn default_lambdas() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 9.0)).collect()
}

/// Column means and inverse standard deviations from training rows;
/// constant columns are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let mut kept = Vec::new();
        let mut mean = Vec::new();
        let mut inv_std = Vec::new();
        for c in 0..p {
            let first = x.get(0, c);
            if (0..n).all(|r| x.get(r, c) == first) {
                continue;
            }
            let m = (0..n).map(|r| x.get(r, c)).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (x.get(r, c) - m).powi(2)).sum::<f64>() / n as f64;
            if var <= 0.0 {
                continue;
            }
            kept.push(c);
            mean.push(m);
            inv_std.push(1.0 / var.sqrt());
        }
        Self { kept, mean, inv_std }
    }

    /// Standardized kept columns of one raw feature row.
    pub fn apply_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.kept.iter().zip(self.mean.iter().zip(&self.inv_std)).map(|(&c, (m, s))| (row[c] - m) * s));
    }

    /// Row-major standardized matrix of the kept columns.
    pub fn apply(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.rows() * self.kept.len());
        let mut row = Vec::new();
        for r in 0..x.rows() {
            self.apply_row(x.row(r), &mut row);
            out.extend_from_slice(&row);
        }
        out
    }
}

/// Eigen-decomposed ridge problem on a standardized, centred design.
///
/// Uses `XᵀX` when there are at most as many features as rows and the dual
/// `XXᵀ` otherwise.
pub struct RidgeSolver {
    x: Vec<f64>,
    n: usize,
    p: usize,
    y: Vec<f64>,
    eigvals: Vec<f64>,
    /// `Vᵀ Xᵀ y` (primal) or `Uᵀ y` (dual).
    proj: Vec<f64>,
    eigvecs: DMatrix<f64>,
    dual: bool,
}

fn gram(a: &[f64], rows: usize, inner: usize, transpose_first: bool) -> Vec<f64> {
    // rows x rows product A Aᵀ (or Aᵀ A when `transpose_first`), A row-major rows x inner.
    let mut out = vec![0.0; rows * rows];
    // SAFETY: every slice is sized for its declared shape and strides.
    unsafe {
        if transpose_first {
            // A is inner x rows here.
            matrixmultiply::dgemm(
                rows, inner, rows, 1.0,
                a.as_ptr(), 1, rows as isize,
                a.as_ptr(), rows as isize, 1,
                0.0, out.as_mut_ptr(), rows as isize, 1,
            );
        } else {
            matrixmultiply::dgemm(
                rows, inner, rows, 1.0,
                a.as_ptr(), inner as isize, 1,
                a.as_ptr(), 1, inner as isize,
                0.0, out.as_mut_ptr(), rows as isize, 1,
            );
        }
    }
    // Exact symmetry for the eigen solver.
    for i in 0..rows {
        for j in 0..i {
            let v = 0.5 * (out[i * rows + j] + out[j * rows + i]);
            out[i * rows + j] = v;
            out[j * rows + i] = v;
        }
    }
    out
}

impl RidgeSolver {
    /// `x` is row-major `n x p`, already standardized; `y` is centred.
    pub fn new(x: Vec<f64>, n: usize, p: usize, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), n * p);
        let dual = p > n;
        let (k, m) = if dual { (gram(&x, n, p, false), n) } else { (gram(&x, p, n, true), p) };
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, &k));
        let eigvals: Vec<f64> = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
        let rhs = if dual {
            DVector::from_vec(y.clone())
        } else {
            let mut xty = vec![0.0; p];
            for r in 0..n {
                let row = &x[r * p..(r + 1) * p];
                for (acc, v) in xty.iter_mut().zip(row) {
                    *acc += v * y[r];
                }
            }
            DVector::from_vec(xty)
        };
        let proj = (eig.eigenvectors.transpose() * rhs).as_slice().to_vec();
        Self { x, n, p, y, eigvals, proj, eigvecs: eig.eigenvectors, dual }
    }

    /// Weights solving `(XᵀX + λI) w = Xᵀ y`.
    pub fn weights(&self, lambda: f64) -> Vec<f64> {
        let scaled: Vec<f64> = self.proj.iter().zip(&self.eigvals).map(|(z, s)| z / (s + lambda)).collect();
        let coef = &self.eigvecs * DVector::from_vec(scaled);
        if !self.dual {
            return coef.as_slice().to_vec();
        }
        let mut w = vec![0.0; self.p];
        for r in 0..self.n {
            let a = coef[r];
            for (wi, v) in w.iter_mut().zip(&self.x[r * self.p..(r + 1) * self.p]) {
                *wi += a * v;
            }
        }
        w
    }

    fn fitted(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.x[r * self.p..(r + 1) * self.p].iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }

    /// Generalized cross-validation score; the intercept counts as one
    /// degree of freedom.
    pub fn gcv(&self, lambda: f64) -> f64 {
        let w = self.weights(lambda);
        let fitted = self.fitted(&w);
        let rss: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
        let df: f64 = self.eigvals.iter().map(|s| s / (s + lambda)).sum();
        let n = self.n as f64;
        let denom = (1.0 - (df + 1.0) / n).powi(2);
        let g = (rss / n) / denom;
        if g.is_finite() {
            g
        } else {
            f64::INFINITY
        }
    }
}

/// Fitted linear head: `margin = w · standardize(x) + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ridge {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl Ridge {
    pub fn margin(&self, raw: &[f64]) -> f64 {
        let s = &self.standardizer;
        let mut m = self.intercept;
        for (i, &c) in s.kept.iter().enumerate() {
            m += self.weights[i] * (raw[c] - s.mean[i]) * s.inv_std[i];
        }
        m
    }

    /// Logistic squashing of the margin; `0.5` exactly at margin 0.
    pub fn score(&self, raw: &[f64]) -> f64 {
        logistic(self.margin(raw))
    }
}

pub fn logistic(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Ridge regression on ±1 labels with the penalty chosen by GCV.
pub fn fit_ridge(x: &FeatureMatrix, labels: &[Label], lambdas: &[f64]) -> Result<Ridge> {
    let n = x.rows();
    if n != labels.len() {
        return Err(Error::dimension(n, labels.len()));
    }
    if n < 2 {
        return Err(Error::validation("ridge needs at least two instances"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::validation("ridge needs both classes in the training labels"));
    }
    if !x.data().iter().all(|v| v.is_finite()) {
        return Err(Error::validation("non-finite feature values"));
    }
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::validation("ridge penalties must be positive"));
    }
    let standardizer = Standardizer::fit(x);
    let p = standardizer.kept.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let intercept = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(Ridge { standardizer, weights: Vec::new(), intercept, lambda: lambdas[0] });
    }
    let yc: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let solver = RidgeSolver::new(standardizer.apply(x), n, p, yc);
    let mut best = (f64::INFINITY, lambdas[lambdas.len() - 1]);
    for &l in lambdas {
        let g = solver.gcv(l);
        if g < best.0 {
            best = (g, l);
        }
    }
    Ok(Ridge { weights: solver.weights(best.1), standardizer, intercept, lambda: best.1 })
}
