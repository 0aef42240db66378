//! Small dense-vector and matrix helpers. Everything is `f64` slices; no BLAS.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// a + s*b
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| dot(&self.data[i * self.cols..(i + 1) * self.cols], x))
            .collect()
    }

    /// self^T x
    pub fn tmatvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, r) in out.iter_mut().zip(row) {
                *o += xi * r;
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest eigenvalue of self^T self (squared spectral norm) by power iteration.
    /// Deterministic start; the iteration count is generous for the small matrices
    /// used here.
    pub fn spectral_norm_sq(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v: Vec<f64> = (0..self.cols)
            .map(|i| 1.0 + (i as f64) / (self.cols as f64 + 1.0))
            .collect();
        normalize(&mut v);
        let mut lam = 0.0;
        for _ in 0..500 {
            let mut w = self.tmatvec(&self.matvec(&v));
            let new_lam = dot(&v, &w);
            let delta = (new_lam - lam).abs();
            lam = new_lam;
            if normalize(&mut w) == 0.0 {
                return 0.0;
            }
            v = w;
            if delta <= 1e-14 * (1.0 + lam.abs()) {
                break;
            }
        }
        lam
    }

    /// Solve (self) y = b for symmetric positive definite self, by Cholesky.
    pub fn solve_spd(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        Some(y)
    }
}

/// Largest real eigenvalue of a 2x2 matrix, if the eigenvalues are real.
pub fn eig2_max_real(m: &Mat) -> Option<f64> {
    assert!(m.rows == 2 && m.cols == 2);
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let tr = a + d;
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    if disc < 0.0 {
        return None;
    }
    Some(0.5 * (tr + disc.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_norm_basics() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(dist(&[1.0, 0.0], &[-1.0, 0.0]), 2.0);
    }

    #[test]
    fn matvec_and_transpose() {
        let m = Mat::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.tmatvec(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn spectral_norm_of_diag() {
        let m = Mat::new(2, 2, vec![3.0, 0.0, 0.0, -5.0]);
        assert!((m.spectral_norm_sq() - 25.0).abs() < 1e-10);
    }

    #[test]
    fn spd_solve_roundtrip() {
        let m = Mat::new(2, 2, vec![4.0, 1.0, 1.0, 3.0]);
        let y = m.solve_spd(&[1.0, 2.0]).unwrap();
        let r = m.matvec(&y);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eig2_diag_and_rotation() {
        let d = Mat::new(2, 2, vec![2.0, 0.0, 0.0, 0.5]);
        assert_eq!(eig2_max_real(&d), Some(2.0));
        // pure rotation has complex spectrum
        let r = Mat::new(2, 2, vec![0.0, -1.0, 1.0, 0.0]);
        assert_eq!(eig2_max_real(&r), None);
    }
}
