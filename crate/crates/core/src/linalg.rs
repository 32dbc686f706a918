//! Least-squares building blocks over accumulated normal equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{LcfError, Result};

/// Designs whose column-equilibrated condition number exceeds this are
/// rejected as singular.
pub const MAX_CONDITION: f64 = 1e10;

/// Running sufficient statistics `XᵀX`, `Xᵀy`, `yᵀy` of a least-squares
/// problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    rows: usize,
}

/// Solution of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub coef: Vec<f64>,
    /// Condition number of the column-equilibrated design.
    pub condition: f64,
    /// Mean squared residual.
    pub loss: f64,
}

impl Gram {
    pub fn new(cols: usize) -> Self {
        Self {
            xtx: DMatrix::zeros(cols, cols),
            xty: DVector::zeros(cols),
            yty: 0.0,
            rows: 0,
        }
    }

    pub fn cols(&self) -> usize {
        self.xty.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn add_row(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.cols());
        let p = self.cols();
        for i in 0..p {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            self.xty[i] += xi * y;
            for j in i..p {
                self.xtx[(i, j)] += xi * x[j];
            }
        }
        self.yty += y * y;
        self.rows += 1;
    }

    /// Combine with statistics accumulated elsewhere.
    pub fn merge(&mut self, other: &Gram) {
        self.xtx += &other.xtx;
        self.xty += &other.xty;
        self.yty += other.yty;
        self.rows += other.rows;
    }

    fn full_xtx(&self) -> DMatrix<f64> {
        let mut m = self.xtx.clone();
        for i in 0..m.nrows() {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }

    /// Mean squared residual of `coef`.
    pub fn loss(&self, coef: &[f64]) -> f64 {
        if self.rows == 0 {
            return f64::NAN;
        }
        let b = DVector::from_column_slice(coef);
        let g = self.full_xtx();
        let quad = (b.transpose() * &g * &b)[(0, 0)];
        let lin = self.xty.dot(&b);
        ((quad - 2.0 * lin + self.yty) / self.rows as f64).max(0.0)
    }

    /// Gradient of [`loss`](Self::loss).
    pub fn loss_gradient(&self, coef: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(coef);
        let g = (self.full_xtx() * b - &self.xty) * (2.0 / self.rows.max(1) as f64);
        g.iter().copied().collect()
    }

    /// Column scales `1/sqrt(diag)` used to equilibrate the design.
    fn scales(&self) -> Vec<f64> {
        (0..self.cols())
            .map(|i| {
                let d = self.xtx[(i, i)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Exact solution of the normal equations.
    pub fn solve(&self) -> Result<LsSolution> {
        let p = self.cols();
        let singular = |condition: f64| LcfError::SingularDesign {
            rows: self.rows,
            cols: p,
            condition,
        };
        if self.rows < p {
            return Err(singular(f64::INFINITY));
        }
        let s = self.scales();
        let g = self.full_xtx();
        let scaled = DMatrix::from_fn(p, p, |i, j| g[(i, j)] * s[i] * s[j]);
        let eig = scaled.clone().symmetric_eigen();
        let lmax = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let condition = if lmin > 0.0 {
            (lmax / lmin).sqrt()
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_CONDITION) {
            return Err(singular(condition));
        }
        let rhs = DVector::from_fn(p, |i, _| self.xty[i] * s[i]);
        let chol = scaled.cholesky().ok_or_else(|| singular(condition))?;
        let z = chol.solve(&rhs);
        let coef: Vec<f64> = (0..p).map(|i| z[i] * s[i]).collect();
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(singular(condition));
        }
        let loss = self.loss(&coef);
        Ok(LsSolution {
            coef,
            condition,
            loss,
        })
    }

    /// Statistics of the sub-problem over the `free` columns with the
    /// remaining coefficients held at `coef`.
    fn restrict(&self, free: &[usize], coef: &[f64]) -> Gram {
        let g = self.full_xtx();
        let fixed: Vec<usize> = (0..self.cols()).filter(|i| !free.contains(i)).collect();
        let mut out = Gram::new(free.len());
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate().skip(a) {
                out.xtx[(a, b)] = g[(i, j)];
            }
            out.xty[a] = self.xty[i] - fixed.iter().map(|&k| g[(i, k)] * coef[k]).sum::<f64>();
        }
        let mut yty = self.yty;
        for &k in &fixed {
            yty -= 2.0 * self.xty[k] * coef[k];
            for &l in &fixed {
                yty += coef[k] * g[(k, l)] * coef[l];
            }
        }
        out.yty = yty;
        out.rows = self.rows;
        out
    }

    /// Full-batch Adam on the mean squared loss. Iterates live in
    /// coordinates whitened by the Cholesky factor of the equilibrated
    /// design, where the loss is isotropic; a singular design falls back
    /// to plain equilibration. Coordinates listed in `fixed` keep their
    /// `init` value.
    pub fn adam(&self, init: &[f64], fixed: &[bool], lr: f64, epochs: usize) -> LsSolution {
        let free: Vec<usize> = (0..self.cols()).filter(|&i| !fixed[i]).collect();
        let sub = self.restrict(&free, init);
        let start: Vec<f64> = free.iter().map(|&i| init[i]).collect();
        let solved = sub.adam_free(&start, lr, epochs);
        let mut coef = init.to_vec();
        for (k, &i) in free.iter().enumerate() {
            coef[i] = solved[k];
        }
        LsSolution {
            loss: self.loss(&coef),
            coef,
            condition: f64::NAN,
        }
    }

    fn adam_free(&self, init: &[f64], lr: f64, epochs: usize) -> Vec<f64> {
        let p = self.cols();
        if p == 0 {
            return Vec::new();
        }
        let s = self.scales();
        let g = self.full_xtx();
        let n = self.rows.max(1) as f64;
        let scaled = DMatrix::from_fn(p, p, |i, j| g[(i, j)] * s[i] * s[j] / n);
        // coef = S L⁻ᵀ v makes the loss |v|² − 2 cᵀv + const
        let lower = scaled.cholesky().map(|c| c.l());
        let to_coef = |v: &[f64]| -> Vec<f64> {
            let z = match &lower {
                Some(l) => l
                    .transpose()
                    .solve_upper_triangular(&DVector::from_column_slice(v))
                    .map(|z| z.iter().copied().collect())
                    .unwrap_or_else(|| v.to_vec()),
                None => v.to_vec(),
            };
            z.iter().zip(&s).map(|(zi, si)| zi * si).collect()
        };
        let mut v: Vec<f64> = {
            let z: Vec<f64> = init.iter().zip(&s).map(|(c, si)| c / si).collect();
            match &lower {
                Some(l) => (l.transpose() * DVector::from_column_slice(&z))
                    .iter()
                    .copied()
                    .collect(),
                None => z,
            }
        };
        let mut state = AdamState::new(p);
        for _ in 0..epochs {
            let grad_c = self.loss_gradient(&to_coef(&v));
            let gz: Vec<f64> = grad_c.iter().zip(&s).map(|(g, si)| g * si).collect();
            let gv: Vec<f64> = match &lower {
                Some(l) => l
                    .solve_lower_triangular(&DVector::from_column_slice(&gz))
                    .map(|x| x.iter().copied().collect())
                    .unwrap_or(gz),
                None => gz,
            };
            state.step(&mut v, &gv, lr);
        }
        to_coef(&v)
    }
}

/// Adam optimizer state with the usual defaults (β₁ = 0.9, β₂ = 0.999).
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-12;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let mut g = Gram::new(3);
        for i in 0..20 {
            let x = [1.0, i as f64, (i * i) as f64 / 10.0];
            g.add_row(&x, 2.0 - 0.5 * x[1] + 0.25 * x[2]);
        }
        let sol = g.solve().unwrap();
        for (c, t) in sol.coef.iter().zip([2.0, -0.5, 0.25]) {
            assert!((c - t).abs() < 1e-10);
        }
        assert!(sol.loss < 1e-18);
    }

    #[test]
    fn duplicated_rows_are_singular() {
        let mut g = Gram::new(3);
        for _ in 0..3 {
            g.add_row(&[1.0, 0.3, 0.7], 1.0);
        }
        assert!(matches!(g.solve(), Err(LcfError::SingularDesign { .. })));
        assert!(matches!(
            Gram::new(2).solve(),
            Err(LcfError::SingularDesign { .. })
        ));
    }

    #[test]
    fn adam_approaches_exact_loss() {
        let mut g = Gram::new(2);
        for i in 0..50 {
            let t = i as f64 / 49.0;
            g.add_row(&[1.0, t], 0.3 + 1.7 * t + 0.05 * (i as f64).sin());
        }
        let exact = g.solve().unwrap();
        let gd = g.adam(&[0.0, 0.0], &[false, false], 0.05, 5000);
        assert!((gd.loss - exact.loss).abs() < 1e-8);
        let pinned = g.adam(&[1.0, 0.0], &[true, false], 0.05, 100);
        assert_eq!(pinned.coef[0], 1.0);
    }

    #[test]
    fn merge_equals_sequential_accumulation() {
        let rows: Vec<([f64; 2], f64)> =
            (0..10).map(|i| ([1.0, i as f64], i as f64 * 0.5)).collect();
        let mut all = Gram::new(2);
        let mut left = Gram::new(2);
        let mut right = Gram::new(2);
        for (i, (x, y)) in rows.iter().enumerate() {
            all.add_row(x, *y);
            if i < 5 {
                left.add_row(x, *y)
            } else {
                right.add_row(x, *y)
            }
        }
        left.merge(&right);
        assert_eq!(left, all);
    }
}
