//! Axis-aligned boxes and uniform cell-centred tensor grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_0, hi_0] × … × [lo_{n−1}, hi_{n−1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid("box must have positive volume".into()));
        }
        Ok(Bounds { lo, hi })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.hi[k] - self.lo[k]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, v)| *v >= self.lo[k] && *v <= self.hi[k])
    }

    /// The box scaled about its centre by `factor`.
    pub fn inflate(&self, factor: f64) -> Bounds {
        let (lo, hi) = (0..self.dim())
            .map(|k| {
                let c = 0.5 * (self.lo[k] + self.hi[k]);
                let h = 0.5 * self.width(k) * factor;
                (c - h, c + h)
            })
            .unzip();
        Bounds { lo, hi }
    }

    /// Distance from `x` to the box boundary in the max-norm, measured inward.
    pub fn inner_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.lo[k]).min(self.hi[k] - v))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform cell-centred grid with `n` cells per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bounds: Bounds,
    pub n: usize,
    pub h: Vec<f64>,
}

impl Grid {
    pub fn new(bounds: Bounds, n: usize) -> Self {
        assert!(n > 0);
        let h = (0..bounds.dim()).map(|k| bounds.width(k) / n as f64).collect();
        Grid { bounds, n, h }
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        self.bounds.lo[k] + (i as f64 + 0.5) * self.h[k]
    }

    /// Multi-index of flat index `idx`; axis 0 varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|_| {
                let i = idx % self.n;
                idx /= self.n;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().rev().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }

    /// Flat indices of the up to 3^d − 1 neighbours (including diagonals).
    pub fn neighbours(&self, idx: usize) -> Vec<usize> {
        let base = self.multi_index(idx);
        let d = self.dim();
        let mut out = Vec::with_capacity(3usize.pow(d as u32) - 1);
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let mut m = Vec::with_capacity(d);
            let mut ok = true;
            let mut zero = true;
            for &b in &base {
                let off = (c % 3) as isize - 1;
                c /= 3;
                zero &= off == 0;
                let v = b as isize + off;
                if v < 0 || v >= self.n as isize {
                    ok = false;
                }
                m.push(v as usize);
            }
            if ok && !zero {
                out.push(self.flat_index(&m));
            }
        }
        out
    }

    /// Flat indices of the 2d axis neighbours.
    pub fn axis_neighbours(&self, idx: usize) -> Vec<usize> {
        let base = self.multi_index(idx);
        let mut out = Vec::with_capacity(2 * self.dim());
        let mut stride = 1;
        for &b in &base {
            if b > 0 {
                out.push(idx - stride);
            }
            if b + 1 < self.n {
                out.push(idx + stride);
            }
            stride *= self.n;
        }
        out
    }
}
