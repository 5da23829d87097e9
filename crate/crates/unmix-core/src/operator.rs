//! Complex sensing operators with matrix-free apply/adjoint.

use num_complex::Complex64;

use crate::{Result, UnmixError};

/// A complex M x K linear operator mapping real stacked mixture vectors to
/// complex measurement space. Implementations must be deterministic for a
/// fixed input and safe to share read-only across threads.
pub trait SensingOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// y = A x for a real-valued x.
    fn apply(&self, x: &[f64]) -> Vec<Complex64>;

    /// A^H y (conjugate transpose applied to a complex vector).
    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;

    /// Column j as a dense vector; default extracts it via `apply`.
    fn column(&self, j: usize) -> Vec<Complex64> {
        let mut e = vec![0.0; self.cols()];
        e[j] = 1.0;
        self.apply(&e)
    }
}

/// Dense row-major storage of the stacked Jacobian.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(UnmixError::InvalidArgument(format!(
                "dense operator: {} entries for {}x{}",
                entries.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Scale every entry by a real factor (used for internal normalization).
    pub fn scaled(&self, factor: f64) -> DenseOperator {
        DenseOperator {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&e| e * factor).collect(),
        }
    }
}

impl SensingOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, &xv) in row.iter().zip(x) {
                acc += a * xv;
            }
            out.push(acc);
        }
        out
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            let yc = y[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yc;
            }
        }
        out
    }

    fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.entry(i, j)).collect()
    }
}

/// A borrowed operator scaled by a real constant, without copying entries.
pub struct ScaledOperator<'a> {
    pub inner: &'a dyn SensingOperator,
    pub factor: f64,
}

impl SensingOperator for ScaledOperator<'_> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn apply(&self, x: &[f64]) -> Vec<Complex64> {
        let mut y = self.inner.apply(x);
        for v in &mut y {
            *v *= self.factor;
        }
        y
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.inner.adjoint(y);
        for v in &mut x {
            *v *= self.factor;
        }
        x
    }
}
