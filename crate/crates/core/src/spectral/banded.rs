use crate::error::{Error, Result};
use crate::model::C64;

/// Square complex band matrix with `kl` sub- and `ku` super-diagonals, stored
/// row by row: entry `(i, j)` lives at `data[i * (kl + ku + 1) + j + kl - i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![C64::new(0.0, 0.0); n * (kl + ku + 1)] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(C64::new(0.0, 0.0), |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += v;
    }

    /// Column range of row `i` inside the band.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut t = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.add(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|i| self.row_range(i).map(|j| self.get(i, j).norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `A - s I`.
    pub fn shifted(&self, s: C64) -> BandMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.add(i, i, -s);
        }
        m
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in self.row_range(i) {
                let v = self.get(i, j);
                if v != C64::new(0.0, 0.0) {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// Banded LU with row interchanges; `U` has bandwidth `kl + ku`.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row storage with offsets `j - i` in `[-kl, kl + ku]`.
    data: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.kl - i
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = BandLu { n, kl, ku, data: vec![C64::new(0.0, 0.0); n * (2 * kl + ku + 1)], piv: vec![0; n] };
        for i in 0..n {
            for j in a.row_range(i) {
                let s = lu.at(i, j);
                lu.data[s] = a.get(i, j);
            }
        }
        let uw = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.at(k, k)].norm();
            for i in k + 1..=last {
                let v = lu.data[lu.at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::FactorizationBreakdown { pivot: k });
            }
            lu.piv[k] = p;
            let jmax = (k + uw).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (sk, sp) = (lu.at(k, j), lu.at(p, j));
                    lu.data.swap(sk, sp);
                }
            }
            let pivot = lu.data[lu.at(k, k)];
            for i in k + 1..=last {
                let si = lu.at(i, k);
                let l = lu.data[si] / pivot;
                lu.data[si] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=jmax {
                    let ukj = lu.data[lu.at(k, j)];
                    let s = lu.at(i, j);
                    lu.data[s] -= l * ukj;
                }
            }
        }
        Ok(lu)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let (n, kl) = (self.n, self.kl);
        let uw = self.kl + self.ku;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[self.at(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + uw).min(n - 1) {
                s -= self.data[self.at(i, j)] * x[j];
            }
            x[i] = s / self.data[self.at(i, i)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[C64]) -> Vec<C64> {
        let (n, kl) = (self.n, self.kl);
        let uw = self.kl + self.ku;
        let mut x = b.to_vec();
        // U^T y = b
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(uw)..i {
                s -= self.data[self.at(j, i)] * x[j];
            }
            x[i] = s / self.data[self.at(i, i)];
        }
        // L^T with the interchanges undone in reverse
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.data[self.at(i, k)] * x[i];
            }
            x[k] = s;
            x.swap(k, self.piv[k]);
        }
        x
    }
}
