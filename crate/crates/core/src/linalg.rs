//! Small direct linear-algebra toolkit: triplet matrices, dense LU with
//! partial pivoting, banded LU with partial pivoting, and a bordered banded
//! factorization for cyclic block systems (closed curves couple the last
//! vertex back to the first, which is carried as a dense border).

use crate::error::{Error, Result};

/// Sparse matrix in coordinate (triplet) form. Duplicate entries add up.
#[derive(Debug, Clone)]
pub struct CooMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMatrix { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Sorts entries and merges duplicates in place.
    pub fn compress(&mut self) {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        self.entries = out;
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &CooMatrix, s: f64) {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        for &(i, j, v) in &other.entries {
            self.push(i, j, s * v);
        }
    }

    pub fn transposed(&self) -> CooMatrix {
        CooMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> CooMatrix {
        CooMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            entries: self.entries.iter().map(|&(i, j, v)| (i, j, s * v)).collect(),
        }
    }

    /// `y += self * x`.
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
    }

    /// `y += self^T * x`.
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for &(i, j, v) in &self.entries {
            y[j] += v * x[i];
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            *d.at_mut(i, j) += v;
        }
        d
    }

    /// Exact symmetrization of a mathematically symmetric matrix whose
    /// halves may differ by rounding: compresses, then mirrors the upper
    /// triangle over the lower one.
    pub fn into_mirrored(mut self) -> CooMatrix {
        assert_eq!(self.nrows, self.ncols);
        self.compress();
        let mut out = CooMatrix::new(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    out.push(i, j, v);
                    out.push(j, i, v);
                }
                std::cmp::Ordering::Equal => out.push(i, j, v),
                std::cmp::Ordering::Greater => {}
            }
        }
        out.compress();
        out
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let row = &self.data[i * self.ncols..(i + 1) * self.ncols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = 0.0_f64;
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }
}

/// Dense LU factorization with partial pivoting.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    ipiv: Vec<usize>,
    pub min_pivot: f64,
}

impl DenseLu {
    pub fn factor(a: &DenseMatrix) -> Result<DenseLu> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut lu = a.data.clone();
        let mut ipiv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let mut p = j;
            let mut best = lu[j * n + j].abs();
            for i in (j + 1)..n {
                let v = lu[i * n + j].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if p != j {
                for k in 0..n {
                    lu.swap(j * n + k, p * n + k);
                }
            }
            let piv = lu[j * n + j];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::NearSingular(format!(
                    "dense LU pivot {piv:e} at column {j}"
                )));
            }
            min_pivot = min_pivot.min(piv.abs());
            for i in (j + 1)..n {
                let l = lu[i * n + j] / piv;
                lu[i * n + j] = l;
                if l != 0.0 {
                    for k in (j + 1)..n {
                        lu[i * n + k] -= l * lu[j * n + k];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, ipiv, min_pivot })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        // full rows were swapped during factorization: permute first, then
        // apply the unit lower factor
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
        }
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in (j + 1)..n {
                    x[i] -= self.lu[i * n + j] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[j * n + j];
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..j {
                    x[i] -= self.lu[i * n + j] * xj;
                }
            }
        }
        x
    }
}

/// Banded LU with partial pivoting, LAPACK-style storage: the factored band
/// holds `kl` subdiagonals and `kl + ku` superdiagonals (fill from pivoting).
pub struct BandLu {
    n: usize,
    kl: usize,
    kw: usize, // kl + ku: upper bandwidth after fill
    ld: usize,
    ab: Vec<f64>, // column-major, entry (i, j) at ab[j * ld + (i - j) + kw]
    ipiv: Vec<usize>,
    pub min_pivot: f64,
}

impl BandLu {
    /// Factors a band matrix given as triplets with `|i - j| <= min(kl, ku)`.
    pub fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, f64)]) -> Result<BandLu> {
        let kw = kl + ku;
        let ld = kl + kw + 1;
        let mut ab = vec![0.0; n * ld];
        for &(i, j, v) in entries {
            debug_assert!(i < n && j < n);
            debug_assert!(i as isize - j as isize <= kl as isize);
            debug_assert!(j as isize - i as isize <= ku as isize);
            let r = (i as isize - j as isize) + kw as isize;
            ab[j * ld + r as usize] += v;
        }
        let mut ipiv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let idx = |i: usize, j: usize| -> usize {
            let r = (i as isize - j as isize) + kw as isize;
            debug_assert!(r >= 0 && (r as usize) < ld);
            j * ld + r as usize
        };
        for j in 0..n {
            let rmax = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in (j + 1)..=rmax {
                let v = ab[idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            let cmax = (j + kw).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let piv = ab[idx(j, j)];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::NearSingular(format!(
                    "band LU pivot {piv:e} at column {j}"
                )));
            }
            min_pivot = min_pivot.min(piv.abs());
            for i in (j + 1)..=rmax {
                let l = ab[idx(i, j)] / piv;
                ab[idx(i, j)] = l;
                if l != 0.0 {
                    for c in (j + 1)..=cmax {
                        let u = ab[idx(j, c)];
                        if u != 0.0 {
                            ab[idx(i, c)] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kw, ld, ab, ipiv, min_pivot })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let idx = |i: usize, j: usize| -> usize {
            j * self.ld + ((i as isize - j as isize) + self.kw as isize) as usize
        };
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                for i in (j + 1)..=(j + self.kl).min(n - 1) {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[idx(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                let lo = j.saturating_sub(self.kw);
                for i in lo..j {
                    x[i] -= self.ab[idx(i, j)] * xj;
                }
            }
        }
        x
    }
}

/// Direct factorization of a matrix that is banded except for a trailing
/// dense border of `w` rows/columns: the leading `nb x nb` block is banded,
/// the border is eliminated through a dense Schur complement.
pub struct BorderedBandLu {
    nb: usize,
    w: usize,
    band: BandLu,
    binv_c: Vec<Vec<f64>>, // w columns of B^{-1} C, each of length nb
    d_rows: Vec<Vec<(usize, f64)>>, // sparse rows of D (w x nb)
    schur: DenseLu,
    pub min_pivot: f64,
}

impl BorderedBandLu {
    pub fn factor(
        n: usize,
        nb: usize,
        kl: usize,
        ku: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<BorderedBandLu> {
        let w = n - nb;
        let mut b_entries: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        let mut c_cols = vec![vec![0.0; nb]; w];
        let mut d_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w];
        let mut e = DenseMatrix::zeros(w, w);
        for &(i, j, v) in entries {
            match (i < nb, j < nb) {
                (true, true) => b_entries.push((i, j, v)),
                (true, false) => c_cols[j - nb][i] += v,
                (false, true) => d_rows[i - nb].push((j, v)),
                (false, false) => *e.at_mut(i - nb, j - nb) += v,
            }
        }
        let band = BandLu::factor(nb, kl, ku, &b_entries)?;
        let binv_c: Vec<Vec<f64>> = c_cols.iter().map(|c| band.solve(c)).collect();
        // Schur complement S = E - D B^{-1} C
        let mut s = e;
        for (r, drow) in d_rows.iter().enumerate() {
            for (c, bc) in binv_c.iter().enumerate() {
                let mut acc = 0.0;
                for &(k, dv) in drow {
                    acc += dv * bc[k];
                }
                *s.at_mut(r, c) -= acc;
            }
        }
        let schur = DenseLu::factor(&s)?;
        let min_pivot = band.min_pivot.min(schur.min_pivot);
        Ok(BorderedBandLu { nb, w, band, binv_c, d_rows, schur, min_pivot })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.nb + self.w);
        let bf = self.band.solve(&rhs[..self.nb]);
        let mut g = rhs[self.nb..].to_vec();
        for (r, drow) in self.d_rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(k, dv) in drow {
                acc += dv * bf[k];
            }
            g[r] -= acc;
        }
        let v = self.schur.solve(&g);
        let mut u = bf;
        for (c, bc) in self.binv_c.iter().enumerate() {
            let vc = v[c];
            if vc != 0.0 {
                for (ui, bi) in u.iter_mut().zip(bc) {
                    *ui -= bi * vc;
                }
            }
        }
        u.extend_from_slice(&v);
        u
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_band_system(rng: &mut ChaCha8Rng, n: usize, hw: usize) -> (Vec<(usize, usize, f64)>, DenseMatrix) {
        let mut entries = Vec::new();
        let mut dense = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let d = i.abs_diff(j);
                if d <= hw {
                    let v: f64 = rng.gen_range(-1.0..1.0) + if i == j { 3.0 } else { 0.0 };
                    entries.push((i, j, v));
                    *dense.at_mut(i, j) += v;
                }
            }
        }
        (entries, dense)
    }

    #[test]
    fn band_lu_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, hw) in &[(5usize, 1usize), (12, 3), (40, 5)] {
            let (entries, dense) = random_band_system(&mut rng, n, hw);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_band = BandLu::factor(n, hw, hw, &entries).unwrap().solve(&b);
            let x_dense = DenseLu::factor(&dense).unwrap().solve(&b);
            for (a, c) in x_band.iter().zip(&x_dense) {
                assert!((a - c).abs() < 1e-10, "band vs dense mismatch");
            }
        }
    }

    #[test]
    fn bordered_band_solves_cyclic_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let nb = 24;
        let hw = 4;
        let (mut entries, _) = random_band_system(&mut rng, nb, hw);
        // border couples everywhere, including the wrap-around corner
        for r in nb..n {
            for j in 0..n {
                let v: f64 = rng.gen_range(-1.0..1.0) + if r == j { 4.0 } else { 0.0 };
                entries.push((r, j, v));
                if j < nb {
                    entries.push((j, r, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let mut dense = DenseMatrix::zeros(n, n);
        for &(i, j, v) in &entries {
            *dense.at_mut(i, j) += v;
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = BorderedBandLu::factor(n, nb, hw, hw, &entries).unwrap().solve(&b);
        let x2 = DenseLu::factor(&dense).unwrap().solve(&b);
        for (a, c) in x1.iter().zip(&x2) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_lu_handles_pivoting() {
        let vals = [
            [0.0, 2.0, 1.0, -1.0],
            [3.0, 0.5, -2.0, 1.0],
            [1.0, -1.0, 0.0, 2.0],
            [2.0, 1.0, 1.0, 0.0],
        ];
        let mut a = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                *a.at_mut(i, j) = vals[i][j];
            }
        }
        let xs = [1.0, -2.0, 0.5, 3.0];
        let b = a.matvec(&xs);
        let x = DenseLu::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn band_lu_handles_pivoting() {
        use rand::Rng;
        use rand::SeedableRng;
        // weak diagonal forces row interchanges inside the band
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &(n, hw) in &[(9usize, 2usize), (25, 4)] {
            let mut entries = Vec::new();
            let mut dense = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i.abs_diff(j) <= hw {
                        let v: f64 =
                            rng.gen_range(-1.0..1.0) + if i == j { 0.05 } else { 0.0 };
                        entries.push((i, j, v));
                        *dense.at_mut(i, j) += v;
                    }
                }
            }
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = dense.matvec(&xs);
            let x = BandLu::factor(n, hw, hw, &entries).unwrap().solve(&b);
            for (u, v) in x.iter().zip(&xs) {
                assert!((u - v).abs() < 1e-8, "band pivoting solve off: {} vs {}", u, v);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let entries = vec![(0usize, 0usize, 1.0), (1, 1, 0.0)];
        assert!(BandLu::factor(2, 1, 1, &entries).is_err());
        let mut d = DenseMatrix::zeros(2, 2);
        *d.at_mut(0, 0) = 1.0;
        assert!(DenseLu::factor(&d).is_err());
    }
}
