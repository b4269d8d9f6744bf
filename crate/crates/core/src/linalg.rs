//! Small dense symmetric positive-definite solves for the regression engine.

/// Row-major square matrix view over a packed `n × n` buffer.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a = L Lᵀ`. Returns `None` when a pivot falls below
    /// `rel_tol` times the corresponding diagonal entry of `a`.
    pub(crate) fn factor(a: &[f64], n: usize, rel_tol: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > rel_tol * a[j * n + j].abs()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Cholesky { n, l })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Columns `cols` of the inverse, restricted to rows `cols`.
    pub(crate) fn inverse_block(&self, cols: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; cols.len() * cols.len()];
        let mut e = vec![0.0; self.n];
        for (c, &j) in cols.iter().enumerate() {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let x = self.solve(&e);
            for (r, &i) in cols.iter().enumerate() {
                out[r * cols.len() + c] = x[i];
            }
        }
        out
    }
}

/// Principal submatrix of a packed `n × n` matrix.
pub(crate) fn submatrix(a: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * idx.len());
    for &i in idx {
        for &j in idx {
            out.push(a[i * n + j]);
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let c = Cholesky::factor(&a, 3, 1e-12).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((row - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = c.inverse_block(&[0, 1, 2]);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(Cholesky::factor(&a, 2, 1e-10).is_none());
    }

    #[test]
    fn submatrix_picks_rows_and_columns() {
        let a: Vec<f64> = (0..9).map(f64::from).collect();
        assert_eq!(submatrix(&a, 3, &[0, 2]), vec![0.0, 2.0, 6.0, 8.0]);
    }
}
