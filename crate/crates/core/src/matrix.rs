//! Small dense complex matrices for beam-array transfer matrices.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square `M x M` complex matrix, row-major. Column `m` holds the
/// beam-basis coefficients of the output produced by input beam `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl TransferMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        Self { dim: N, entries: rows.iter().flatten().copied().collect() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.entries[row * self.dim + col] = v;
    }

    pub fn adjoint(&self) -> TransferMatrix {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.entries[c * n + r] = self.get(r, c).conj();
            }
        }
        out
    }

    pub fn mul(&self, rhs: &TransferMatrix) -> Result<TransferMatrix> {
        if rhs.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rhs.dim });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.entries[r * n + c] = (0..n).map(|k| self.get(r, k) * rhs.get(k, c)).sum();
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> TransferMatrix {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * factor).collect() }
    }

    /// Largest entrywise deviation of `self · self†` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.mul(&self.adjoint()).expect("same dimension");
        let id = Self::identity(self.dim);
        prod.entries.iter().zip(&id.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &TransferMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Text dump: one `re im` line per entry, row-major, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.entries {
            let _ = writeln!(out, "{:.16e} {:.16e}", v.re, v.im);
        }
        out
    }

    pub fn from_text(dim: usize, text: &str) -> Result<TransferMatrix> {
        let mut entries = Vec::with_capacity(dim * dim);
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(re)), Some(Ok(im)), None) => entries.push(Complex64::new(re, im)),
                _ => return Err(Error::Format(format!("line {}: expected `re im`", lineno + 1))),
            }
        }
        Self::new(dim, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn adjoint_and_product() {
        let a = TransferMatrix::from_rows([[c(1.0, 2.0), c(0.0, -1.0)], [c(3.0, 0.0), c(0.5, 0.5)]]);
        let b = a.adjoint();
        assert_eq!(b.get(0, 1), c(3.0, 0.0));
        assert_eq!(b.get(1, 0), c(0.0, 1.0));
        let id = TransferMatrix::identity(2);
        assert_eq!(a.mul(&id).unwrap(), a);
        assert!(a.mul(&TransferMatrix::identity(3)).is_err());
    }

    #[test]
    fn text_dump_is_lossless() {
        let a = TransferMatrix::from_rows([
            [c(0.1, -1.0 / 3.0), c(std::f64::consts::PI, 1e-300)],
            [c(-0.0, 2.5e17), c(1.0 / 7.0, -2.0)],
        ]);
        let text = a.to_text();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(TransferMatrix::from_text(2, &text).unwrap(), a);
        assert!(TransferMatrix::from_text(2, "1 2\n3\n").is_err());
    }
}
