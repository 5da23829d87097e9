//! Complex banded LU factorization with partial pivoting.
//!
//! The 5-point FDFD stencil on an nx-by-ny grid yields a banded system with
//! lower and upper bandwidth nx; a band factorization costs O(n * bw^2) and a
//! solve O(n * bw), which is what makes reusing one factorization across many
//! sources per frequency cheap.

use num_complex::Complex64;

use crate::{Result, UnmixError};

/// Band storage: column j holds rows j - (ku + kl) .. j + kl, so fill from
/// row pivoting stays representable.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, width, data: vec![Complex64::new(0.0, 0.0); n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let lo = j.saturating_sub(self.ku + self.kl);
        let hi = (j + self.kl).min(self.n - 1);
        if i < lo || i > hi {
            return None;
        }
        Some(j * self.width + (i + self.ku + self.kl - j))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.offset(i, j).map(|o| self.data[o]).unwrap_or_default()
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        let o = self.offset(i, j).expect("entry outside band");
        self.data[o] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: Complex64) {
        let o = self.offset(i, j).expect("entry outside band");
        self.data[o] += value;
    }

    /// y = A x using only the assembled band (call before factorization).
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.get(i, j) * xj;
            }
        }
        y
    }

    /// LU factorization with partial pivoting; consumes the matrix.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let row_hi = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=row_hi {
                let mag = self.get(i, k).norm();
                if mag > best {
                    best = mag;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(UnmixError::NumericalFailure(format!(
                    "singular banded system at column {k}"
                )));
            }
            pivots[k] = p;
            let col_hi = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=col_hi {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=row_hi {
                let m = self.get(i, k) / pivot;
                self.set(i, k, m);
                if m.norm_sqr() != 0.0 {
                    for j in k + 1..=col_hi {
                        let akj = self.get(k, j);
                        if akj.norm_sqr() != 0.0 {
                            let v = self.get(i, j) - m * akj;
                            self.set(i, j, v);
                        }
                    }
                }
            }
        }
        Ok(BandedLu { matrix: self, pivots })
    }
}

/// Factorized banded system; immutable and shareable across solves.
#[derive(Debug, Clone)]
pub struct BandedLu {
    matrix: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.matrix.n;
        let kl = self.matrix.kl;
        let ku = self.matrix.ku;
        let mut x = rhs.to_vec();
        // Forward elimination with recorded pivots and multipliers.
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk.norm_sqr() != 0.0 {
                let row_hi = (k + kl).min(n - 1);
                for i in k + 1..=row_hi {
                    x[i] -= self.matrix.get(i, k) * xk;
                }
            }
        }
        // Back substitution on U.
        for k in (0..n).rev() {
            let col_hi = (k + ku + kl).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=col_hi {
                acc -= self.matrix.get(k, j) * x[j];
            }
            x[k] = acc / self.matrix.get(k, k);
        }
        x
    }
}
