//! Banded LU factorization without pivoting.
//!
//! Intended for the row-diagonally-dominant Helmholtz matrices of the
//! implicit diffusion step, for which elimination without pivoting is stable.

use crate::error::{Error, Result};

/// Square matrix with `lower` sub- and `upper` super-diagonals, stored row by
/// row as `data[r * width + (c + lower - r)]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.lower >= r && c <= r + self.upper, "({r}, {c}) outside band");
        r * self.width() + (c + self.lower - r)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.lower < r || c > r + self.upper {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.lower);
                let hi = (r + self.upper).min(self.n - 1);
                (lo..=hi).map(|c| self.data[self.slot(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// In-place Doolittle factorization; the band does not grow without
    /// pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, lower, upper) = (self.n, self.lower, self.upper);
        let w = self.width();
        for p in 0..n {
            let piv = self.data[p * w + lower];
            if piv.abs() < 1e-300 || !piv.is_finite() {
                return Err(Error::Solve(format!("zero pivot at row {p}")));
            }
            let last_row = (p + lower).min(n - 1);
            let last_col = (p + upper).min(n - 1);
            for r in p + 1..=last_row {
                let rp = r * w + (p + lower - r);
                let m = self.data[rp] / piv;
                self.data[rp] = m;
                if m == 0.0 {
                    continue;
                }
                let len = last_col - p;
                let (head, tail) = self.data.split_at_mut(r * w);
                let src = &head[p * w + lower + 1..p * w + lower + 1 + len];
                let off = p + 1 + lower - r;
                for (d, s) in tail[off..off + len].iter_mut().zip(src) {
                    *d -= m * s;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

/// Four-way unrolled dot product; fixed summation order keeps results
/// reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for j in 0..chunks {
        let (x, y) = (&a[4 * j..4 * j + 4], &b[4 * j..4 * j + 4]);
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..n {
        s += a[j] * b[j];
    }
    s
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let (n, lower, upper, w) = (m.n, m.lower, m.upper, m.width());
        assert_eq!(b.len(), n, "right-hand side length");
        for r in 0..n {
            let lo = r.saturating_sub(lower);
            let row = &m.data[r * w + (lo + lower - r)..r * w + lower];
            b[r] -= dot(row, &b[lo..r]);
        }
        for r in (0..n).rev() {
            let hi = (r + upper).min(n - 1);
            let row = &m.data[r * w + lower + 1..r * w + lower + 1 + (hi - r)];
            let s = b[r] - dot(row, &b[r + 1..=hi]);
            b[r] = s / m.data[r * w + lower];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dominant(n: usize, lower: usize, upper: usize, vals: &[f64]) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, lower, upper);
        let mut it = vals.iter().cycle();
        for r in 0..n {
            let mut off = 0.0;
            for c in r.saturating_sub(lower)..=(r + upper).min(n - 1) {
                if c != r {
                    let v = *it.next().unwrap();
                    a.set(r, c, v);
                    off += v.abs();
                }
            }
            a.set(r, r, off + 1.0);
        }
        a
    }

    #[test]
    fn tridiagonal_known_solution() {
        // -1 2 -1 with unit diagonal shift
        let n = 6;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for r in 0..n {
            a.set(r, r, 3.0);
            if r > 0 {
                a.set(r, r - 1, -1.0);
            }
            if r + 1 < n {
                a.set(r, r + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut b = a.matvec(&x);
        a.factor().unwrap().solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(a.factor().is_err());
    }

    proptest! {
        #[test]
        fn solves_dominant_band_systems(
            n in 3usize..40,
            lower in 0usize..5,
            upper in 0usize..5,
            vals in proptest::collection::vec(-1.0f64..1.0, 8),
            xs in proptest::collection::vec(-10.0f64..10.0, 40),
        ) {
            let a = dominant(n, lower, upper, &vals);
            let x = &xs[..n];
            let mut b = a.matvec(x);
            a.factor().unwrap().solve_in_place(&mut b);
            for (u, v) in b.iter().zip(x) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
