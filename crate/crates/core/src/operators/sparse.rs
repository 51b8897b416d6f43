//! Compressed sparse row storage for complex Hermitian matrices.

use std::io::{BufRead, Write};

use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl CsrMatrix {
    /// Sum duplicate entries in insertion order; columns sorted per row.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.vals[self.row_ptr[i] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
        y
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij − conj(A_ji)|`.
    pub fn hermitian_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                r = r.max((v - self.get(j, i).conj()).norm());
            }
        }
        r
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// Returns `A + diag(d)`, keeping the sparsity pattern when possible.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut t: Vec<(usize, usize, C64)> = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
            if d[i] != 0.0 {
                t.push((i, i, C64::new(d[i], 0.0)));
            }
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    pub fn shifted(&self, s: f64) -> CsrMatrix {
        self.add_diagonal(&vec![s; self.n])
    }

    /// Lower bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut d = 0.0;
                let mut off = 0.0;
                for (j, v) in self.row(i) {
                    if j == i {
                        d = v.re;
                    } else {
                        off += v.norm();
                    }
                }
                d - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> faer::Mat<C64> {
        let mut m = faer::Mat::<C64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn to_faer(&self) -> faer::sparse::SparseColMat<usize, C64> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push(faer::sparse::Triplet::new(i, j, v));
            }
        }
        faer::sparse::SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("valid triplets")
    }

    /// Matrix Market `coordinate complex hermitian`, lower triangle, 1-based.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let lower: Vec<(usize, usize, C64)> =
            (0..self.n).flat_map(|i| self.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v))).collect();
        writeln!(w, "%%MatrixMarket matrix coordinate complex hermitian")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(r: R) -> std::io::Result<CsrMatrix> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        let hermitian = header.contains("hermitian");
        if !header.starts_with("%%MatrixMarket matrix coordinate complex") {
            return Err(bad("unsupported Matrix Market header"));
        }
        let mut size: Option<(usize, usize)> = None;
        let mut t = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if size.is_none() {
                let n: usize = f[0].parse().map_err(|_| bad("bad size line"))?;
                let nnz: usize = f[2].parse().map_err(|_| bad("bad size line"))?;
                size = Some((n, nnz));
                continue;
            }
            if f.len() != 4 {
                return Err(bad("bad entry line"));
            }
            let i: usize = f[0].parse().map_err(|_| bad("bad index"))?;
            let j: usize = f[1].parse().map_err(|_| bad("bad index"))?;
            let re: f64 = f[2].parse().map_err(|_| bad("bad value"))?;
            let im: f64 = f[3].parse().map_err(|_| bad("bad value"))?;
            let v = C64::new(re, im);
            t.push((i - 1, j - 1, v));
            if hermitian && i != j {
                t.push((j - 1, i - 1, v.conj()));
            }
        }
        let (n, _) = size.ok_or_else(|| bad("missing size line"))?;
        Ok(CsrMatrix::from_triplets(n, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, c(1.0, 0.0)), (1, 0, c(0.0, 1.0)), (0, 0, c(2.0, 0.0))]);
        assert_eq!(m.get(0, 0), c(3.0, 0.0));
        assert_eq!(m.get(1, 0), c(0.0, 1.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 0, c(2.0, 0.0)),
                (0, 1, c(0.5, -0.25)),
                (1, 0, c(0.5, 0.25)),
                (1, 1, c(1.0 / 3.0, 0.0)),
                (2, 2, c(-1.0, 0.0)),
            ],
        );
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let back = CsrMatrix::read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn hermitian_assembly_gives_hermitian_matvec(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10)) {
            let n = 5;
            let mut t = Vec::new();
            let mut k = 0;
            for i in 0..n {
                t.push((i, i, c(vals[i].0, 0.0)));
                if i + 1 < n {
                    let v = c(vals[n + k % 5].0, vals[n + k % 5].1);
                    t.push((i, i + 1, v));
                    t.push((i + 1, i, v.conj()));
                    k += 1;
                }
            }
            let m = CsrMatrix::from_triplets(n, t);
            prop_assert_eq!(m.hermitian_residual(), 0.0);
            let x: Vec<C64> = (0..n).map(|i| c(i as f64, 1.0 - i as f64)).collect();
            let y: Vec<C64> = (0..n).map(|i| c(0.5, i as f64 * 0.1)).collect();
            let ax = m.matvec(&x);
            let ay = m.matvec(&y);
            let lhs: C64 = y.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum();
            let rhs: C64 = ay.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
