//! Linear algebra over the chain ring `W_n(F_q)`.
//!
//! Every finitely generated module is kept in canonical form
//! `W_{e_1} + ... + W_{e_r}` with `e_1 >= ... >= e_r >= 1`. A map between two
//! such modules is a matrix whose row `i` is read modulo `p^{f_i}`; it is well
//! defined when `val(A_ij) >= f_i - e_j`.

use crate::error::{Error, Result};
use crate::witt::WittRing;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl Mat {
    pub fn zero(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Mat::zero(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn diagonal(entries: &[u32]) -> Mat {
        let n = entries.len();
        let mut m = Mat::zero(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    /// `c * I_n`.
    pub fn scalar(n: usize, c: u32) -> Mat {
        Mat::diagonal(&vec![c; n])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<u32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn from_cols(rows: usize, cols: &[Vec<u32>]) -> Mat {
        let mut m = Mat::zero(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m.set(i, j, c[i]);
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, r: &WittRing, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = Mat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b != 0 {
                        let idx = i * other.cols + j;
                        out.data[idx] = r.add(out.data[idx], r.mul(a, b));
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, r: &WittRing, x: &[u32]) -> Vec<u32> {
        assert_eq!(self.cols, x.len(), "matrix-vector shape");
        (0..self.rows)
            .map(|i| {
                let mut acc = 0;
                for (j, &xj) in x.iter().enumerate() {
                    let a = self.get(i, j);
                    if a != 0 && xj != 0 {
                        acc = r.add(acc, r.mul(a, xj));
                    }
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, r: &WittRing, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| r.add(a, b)).collect() }
    }

    pub fn sub(&self, r: &WittRing, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| r.sub(a, b)).collect() }
    }

    pub fn neg(&self, r: &WittRing) -> Mat {
        self.map(|x| r.neg(x))
    }

    pub fn scale(&self, r: &WittRing, c: u32) -> Mat {
        self.map(|x| r.mul(c, x))
    }

    pub fn scale_p_pow(&self, r: &WittRing, k: u32) -> Mat {
        self.map(|x| r.mul_p_pow(x, k))
    }

    pub fn map(&self, f: impl Fn(u32) -> u32) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// Entrywise `sigma^s`.
    pub fn frob_pow(&self, r: &WittRing, s: i64) -> Mat {
        self.map(|x| r.frob_pow(x, s))
    }

    /// Reduces row `i` modulo `p^{divs[i]}`.
    pub fn reduce_rows(&self, r: &WittRing, divs: &[u32]) -> Mat {
        assert_eq!(divs.len(), self.rows);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = out.get(i, j);
                out.set(i, j, r.truncate(v, divs[i] as usize));
            }
        }
        out
    }

    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hstack shape");
        let mut out = Mat::zero(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j));
            }
        }
        out
    }

    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "vstack shape");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Mat { rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn block_diag(&self, other: &Mat) -> Mat {
        let mut out = Mat::zero(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out.set(self.rows + i, self.cols + j, other.get(i, j));
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let rows: Vec<Vec<u32>> = idx.iter().map(|&i| self.row(i).to_vec()).collect();
        let mut m = Mat::from_rows(&rows);
        m.cols = self.cols;
        if idx.is_empty() {
            m.data.clear();
        }
        m
    }

    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut m = Mat::zero(self.rows, idx.len());
        for i in 0..self.rows {
            for (t, &j) in idx.iter().enumerate() {
                m.set(i, t, self.get(i, j));
            }
        }
        m
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        let mut m = Mat::zero(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                m.set(i - r0, j - c0, self.get(i, j));
            }
        }
        m
    }

    pub fn kron(&self, r: &WittRing, other: &Mat) -> Mat {
        let mut out = Mat::zero(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, r.mul(a, other.get(k, l)));
                    }
                }
            }
        }
        out
    }

    /// Minimum valuation over all entries (`n` for the zero matrix).
    pub fn min_val(&self, r: &WittRing) -> u32 {
        self.data.iter().map(|&x| r.val(x)).min().unwrap_or(r.n() as u32)
    }

    /// Reinterprets entries in a ring of another length by coordinate
    /// truncation or zero padding.
    pub fn change_level(&self, from: &WittRing, to: &WittRing) -> Mat {
        let q = from.residue_order();
        if to.n() < from.n() {
            self.map(|x| from.truncate(x, to.n()))
        } else {
            debug_assert_eq!(q, to.residue_order());
            self.clone()
        }
    }

    pub fn random(r: &WittRing, rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        let size = r.size();
        Mat { rows, cols, data: (0..rows * cols).map(|_| rng.gen_range(0..size) as u32).collect() }
    }

    /// Random invertible matrix: a product of random elementary operations
    /// applied to a random unit diagonal.
    pub fn random_unimodular(r: &WittRing, n: usize, rng: &mut impl Rng) -> Mat {
        let mut m = Mat::identity(n);
        for i in 0..n {
            loop {
                let u = rng.gen_range(0..r.size()) as u32;
                if r.is_unit(u) {
                    m.set(i, i, u);
                    break;
                }
            }
        }
        if n < 2 {
            return m;
        }
        for _ in 0..3 * n {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j {
                continue;
            }
            let c = rng.gen_range(0..r.size()) as u32;
            for k in 0..n {
                let v = r.add(m.get(i, k), r.mul(c, m.get(j, k)));
                m.set(i, k, v);
            }
        }
        let perm_a = rng.gen_range(0..n);
        let perm_b = rng.gen_range(0..n);
        if perm_a != perm_b {
            for k in 0..n {
                let t = m.get(perm_a, k);
                m.set(perm_a, k, m.get(perm_b, k));
                m.set(perm_b, k, t);
            }
        }
        m
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.cols {
            self.data.swap(a * self.cols + k, b * self.cols + k);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.rows {
            self.data.swap(k * self.cols + a, k * self.cols + b);
        }
    }

    /// `row_i += c * row_t`.
    fn row_axpy(&mut self, r: &WittRing, i: usize, t: usize, c: u32) {
        if c == 0 {
            return;
        }
        for k in 0..self.cols {
            let v = self.get(t, k);
            if v != 0 {
                let w = r.add(self.get(i, k), r.mul(c, v));
                self.set(i, k, w);
            }
        }
    }

    /// `col_j += c * col_t`.
    fn col_axpy(&mut self, r: &WittRing, j: usize, t: usize, c: u32) {
        if c == 0 {
            return;
        }
        for k in 0..self.rows {
            let v = self.get(k, t);
            if v != 0 {
                let w = r.add(self.get(k, j), r.mul(c, v));
                self.set(k, j, w);
            }
        }
    }

    fn scale_row(&mut self, r: &WittRing, i: usize, c: u32) {
        for k in 0..self.cols {
            let v = r.mul(c, self.get(i, k));
            self.set(i, k, v);
        }
    }

    fn scale_col(&mut self, r: &WittRing, j: usize, c: u32) {
        for k in 0..self.rows {
            let v = r.mul(c, self.get(k, j));
            self.set(k, j, v);
        }
    }
}

/// A module `W_{e_1} + ... + W_{e_r}` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WnModule {
    pub divisors: Vec<u32>,
}

impl WnModule {
    pub fn new(mut divisors: Vec<u32>, n: usize) -> Result<WnModule> {
        if divisors.iter().any(|&e| e == 0 || e as usize > n) {
            return Err(Error::Shape(format!("divisors must lie in 1..={n}")));
        }
        divisors.sort_unstable_by(|a, b| b.cmp(a));
        Ok(WnModule { divisors })
    }

    pub fn free(rank: usize, n: usize) -> WnModule {
        WnModule { divisors: vec![n as u32; rank] }
    }

    pub fn zero() -> WnModule {
        WnModule { divisors: vec![] }
    }

    pub fn rank(&self) -> usize {
        self.divisors.len()
    }

    /// Length as a `W`-module.
    pub fn length(&self) -> u32 {
        self.divisors.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.divisors.is_empty()
    }

    pub fn is_free(&self, n: usize) -> bool {
        self.divisors.iter().all(|&e| e as usize == n)
    }

    pub fn direct_sum(&self, other: &WnModule) -> WnModule {
        let mut d = self.divisors.clone();
        d.extend_from_slice(&other.divisors);
        d.sort_unstable_by(|a, b| b.cmp(a));
        WnModule { divisors: d }
    }

    /// Number of elements, `q^{length}`.
    pub fn cardinality(&self, r: &WittRing) -> u64 {
        (r.residue_order() as u64).pow(self.length())
    }

    pub fn reduce(&self, r: &WittRing, x: &[u32]) -> Vec<u32> {
        x.iter().zip(&self.divisors).map(|(&v, &e)| r.truncate(v, e as usize)).collect()
    }

    pub fn is_reduced(&self, r: &WittRing, x: &[u32]) -> bool {
        x.len() == self.rank() && x.iter().zip(&self.divisors).all(|(&v, &e)| r.truncate(v, e as usize) == v)
    }

    /// Enumerates all elements in lexicographic code order.
    pub fn elements(&self, r: &WittRing) -> Vec<Vec<u32>> {
        let q = r.residue_order() as u64;
        let bounds: Vec<u64> = self.divisors.iter().map(|&e| q.pow(e)).collect();
        let total: u64 = bounds.iter().product();
        let mut out = Vec::with_capacity(total as usize);
        for mut c in 0..total {
            let mut v = Vec::with_capacity(bounds.len());
            for &b in &bounds {
                v.push((c % b) as u32);
                c /= b;
            }
            out.push(v);
        }
        out
    }

    pub fn random_element(&self, r: &WittRing, rng: &mut impl Rng) -> Vec<u32> {
        let q = r.residue_order() as u64;
        self.divisors.iter().map(|&e| rng.gen_range(0..q.pow(e)) as u32).collect()
    }

    /// `diag(p^{e_i})`, the relation matrix of the module inside `W_n^r`.
    pub fn relation_matrix(&self, r: &WittRing) -> Mat {
        let d: Vec<u32> = self.divisors.iter().map(|&e| r.p_pow(e)).collect();
        Mat::diagonal(&d)
    }
}

/// Checks that `a` defines a homomorphism `dom -> cod`.
pub fn is_valid_map(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> bool {
    if a.rows != cod.rank() || a.cols != dom.rank() {
        return false;
    }
    for i in 0..a.rows {
        for j in 0..a.cols {
            let need = cod.divisors[i].saturating_sub(dom.divisors[j]);
            if r.val(a.get(i, j)) < need {
                return false;
            }
        }
    }
    true
}

/// Composite of module maps, reduced into the codomain.
pub fn compose(r: &WittRing, a: &Mat, b: &Mat, cod: &WnModule) -> Mat {
    a.mul(r, b).reduce_rows(r, &cod.divisors)
}

/// Smith form `U A V = D` with `D` diagonal, entries exactly `p^{k_i}`.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub u: Mat,
    pub u_inv: Mat,
    pub v: Mat,
    pub v_inv: Mat,
    /// Valuations of the diagonal entries, `n` standing for zero.
    pub diag: Vec<u32>,
}

impl SmithForm {
    pub fn rank(&self, r: &WittRing) -> usize {
        self.diag.iter().filter(|&&k| (k as usize) < r.n()).count()
    }
}

/// Smith decomposition with the pivot rule: lowest valuation, then lowest
/// column, then lowest row.
pub fn smith(r: &WittRing, a: &Mat) -> SmithForm {
    let (m, k) = (a.rows, a.cols);
    let mut w = a.clone();
    let mut u = Mat::identity(m);
    let mut u_inv = Mat::identity(m);
    let mut v = Mat::identity(k);
    let mut v_inv = Mat::identity(k);
    let mut diag = Vec::with_capacity(m.min(k));
    let n = r.n() as u32;
    for t in 0..m.min(k) {
        let mut best: Option<(u32, usize, usize)> = None;
        for j in t..k {
            for i in t..m {
                let val = r.val(w.get(i, j));
                if val < n && best.map_or(true, |(bv, _, _)| val < bv) {
                    best = Some((val, j, i));
                    if val == 0 {
                        break;
                    }
                }
            }
            if best.map_or(false, |(bv, _, _)| bv == 0) {
                break;
            }
        }
        let Some((val, pj, pi)) = best else {
            diag.extend(std::iter::repeat(n).take(m.min(k) - t));
            break;
        };
        w.swap_rows(t, pi);
        u.swap_rows(t, pi);
        u_inv.swap_cols(t, pi);
        w.swap_cols(t, pj);
        v.swap_cols(t, pj);
        v_inv.swap_rows(t, pj);
        // Make the pivot exactly p^val.
        let unit = r.div_p_pow(w.get(t, t), val);
        let ui = r.inv(unit).unwrap();
        w.scale_row(r, t, ui);
        u.scale_row(r, t, ui);
        u_inv.scale_col(r, t, unit);
        for i in t + 1..m {
            let x = w.get(i, t);
            if x == 0 {
                continue;
            }
            let c = r.neg(r.div_p_pow(x, val));
            w.row_axpy(r, i, t, c);
            u.row_axpy(r, i, t, c);
            u_inv.col_axpy(r, t, i, r.neg(c));
        }
        for j in t + 1..k {
            let x = w.get(t, j);
            if x == 0 {
                continue;
            }
            let c = r.neg(r.div_p_pow(x, val));
            w.col_axpy(r, j, t, c);
            v.col_axpy(r, j, t, c);
            v_inv.row_axpy(r, t, j, r.neg(c));
        }
        diag.push(val);
    }
    SmithForm { u, u_inv, v, v_inv, diag }
}

/// Diagonal valuations of the Smith form, in increasing order, `n` for zero.
pub fn smith_decompose(r: &WittRing, a: &Mat) -> Vec<u32> {
    let mut d = smith(r, a).diag;
    d.sort_unstable();
    d
}

/// Generators (columns) of the kernel of `B` acting on the free module
/// `W_n^{cols}`.
pub fn free_kernel(r: &WittRing, b: &Mat) -> Mat {
    let sf = smith(r, b);
    let n = r.n() as u32;
    let mut gens: Vec<Vec<u32>> = Vec::new();
    for i in 0..b.cols {
        let k = if i < sf.diag.len() { sf.diag[i] } else { n };
        if k == 0 {
            continue;
        }
        let col = sf.v.col(i);
        let scaled: Vec<u32> = col.iter().map(|&x| r.mul_p_pow(x, n - k)).collect();
        gens.push(scaled);
    }
    Mat::from_cols(b.cols, &gens)
}

/// The submodule of `amb` generated by the columns of `g`, returned in
/// canonical form with its embedding matrix.
pub fn submodule_canonical(r: &WittRing, g: &Mat, amb: &WnModule) -> (WnModule, Mat) {
    let k = amb.rank();
    assert_eq!(g.rows, k, "generators live in the ambient module");
    let ng = g.cols;
    if ng == 0 {
        return (WnModule::zero(), Mat::zero(k, 0));
    }
    // Relations c with G c in the span of diag(p^{e_j}).
    let stacked = g.hstack(&amb.relation_matrix(r));
    let kers = free_kernel(r, &stacked);
    let rel = kers.submatrix(0, ng, 0, kers.cols);
    let sf = smith(r, &rel);
    let n = r.n() as u32;
    let mut parts: Vec<(u32, usize)> = Vec::new();
    for i in 0..ng {
        let kk = if i < sf.diag.len() { sf.diag[i] } else { n };
        if kk > 0 {
            parts.push((kk, i));
        }
    }
    parts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let gu = g.mul(r, &sf.u_inv);
    let cols: Vec<Vec<u32>> = parts.iter().map(|&(_, i)| gu.col(i)).collect();
    let emb = Mat::from_cols(k, &cols).reduce_rows(r, &amb.divisors);
    (WnModule { divisors: parts.iter().map(|p| p.0).collect() }, emb)
}

/// Kernel of `a: dom -> cod` with its embedding into `dom`.
pub fn kernel(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> (WnModule, Mat) {
    let k = dom.rank();
    if k == 0 {
        return (WnModule::zero(), Mat::zero(0, 0));
    }
    let mut gens = if cod.rank() == 0 {
        Mat::identity(k)
    } else {
        let stacked = a.hstack(&cod.relation_matrix(r));
        let kers = free_kernel(r, &stacked);
        kers.submatrix(0, k, 0, kers.cols)
    };
    if gens.cols == 0 {
        gens = Mat::zero(k, 0);
    }
    submodule_canonical(r, &gens, dom)
}

/// Image of `a: dom -> cod` with its embedding into `cod`.
pub fn image(r: &WittRing, a: &Mat, cod: &WnModule) -> (WnModule, Mat) {
    if cod.rank() == 0 {
        return (WnModule::zero(), Mat::zero(0, 0));
    }
    submodule_canonical(r, a, cod)
}

/// Cokernel of `a: dom -> cod`.
#[derive(Clone, Debug)]
pub struct Cokernel {
    pub module: WnModule,
    /// `cod -> module`.
    pub projection: Mat,
    /// Set-theoretic section `module -> cod` (linear on the generators).
    pub section: Mat,
}

pub fn cokernel(r: &WittRing, a: &Mat, cod: &WnModule) -> Cokernel {
    let m = cod.rank();
    if m == 0 {
        return Cokernel { module: WnModule::zero(), projection: Mat::zero(0, 0), section: Mat::zero(0, 0) };
    }
    let b = a.hstack(&cod.relation_matrix(r));
    let sf = smith(r, &b);
    let n = r.n() as u32;
    let mut parts: Vec<(u32, usize)> = Vec::new();
    for i in 0..m {
        let kk = if i < sf.diag.len() { sf.diag[i] } else { n };
        if kk > 0 {
            parts.push((kk, i));
        }
    }
    parts.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let module = WnModule { divisors: parts.iter().map(|p| p.0).collect() };
    let idx: Vec<usize> = parts.iter().map(|p| p.1).collect();
    let projection = sf.u.select_rows(&idx).reduce_rows(r, &module.divisors);
    let section = sf.u_inv.select_cols(&idx).reduce_rows(r, &cod.divisors);
    Cokernel { module, projection, section }
}

/// Solves `a x = y` for `a: dom -> cod`, returning a reduced solution.
pub fn solve(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule, y: &[u32]) -> Option<Vec<u32>> {
    let k = dom.rank();
    let m = cod.rank();
    if m == 0 {
        return Some(vec![0; k]);
    }
    let b = a.hstack(&cod.relation_matrix(r));
    let sf = smith(r, &b);
    let uy = sf.u.apply(r, y);
    let n = r.n() as u32;
    let mut w = vec![0u32; b.cols];
    for i in 0..m {
        let kk = if i < sf.diag.len() { sf.diag[i] } else { n };
        if kk >= n {
            if uy[i] != 0 {
                return None;
            }
        } else {
            if r.val(uy[i]) < kk {
                return None;
            }
            w[i] = r.div_p_pow(uy[i], kk);
        }
    }
    let z = sf.v.apply(r, &w);
    Some(dom.reduce(r, &z[..k]))
}

/// Solves `X a = b` for square invertible `a` over the free module.
pub fn inverse(r: &WittRing, a: &Mat) -> Option<Mat> {
    if a.rows != a.cols {
        return None;
    }
    let sf = smith(r, a);
    if sf.diag.iter().any(|&k| k != 0) {
        return None;
    }
    Some(sf.v.mul(r, &sf.u))
}

/// Inverse of an isomorphism `a: dom -> cod` of canonical modules.
pub fn module_inverse(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> Option<Mat> {
    if !is_iso(r, a, dom, cod) {
        return None;
    }
    let mut cols = Vec::with_capacity(cod.rank());
    for j in 0..cod.rank() {
        let mut e = vec![0u32; cod.rank()];
        e[j] = 1;
        cols.push(solve(r, a, dom, cod, &e)?);
    }
    Some(if cols.is_empty() { Mat::zero(dom.rank(), 0) } else { Mat::from_cols(dom.rank(), &cols) })
}

pub fn is_invertible(r: &WittRing, a: &Mat) -> bool {
    a.rows == a.cols && smith(r, a).diag.iter().all(|&k| k == 0)
}

/// Whether `a: dom -> cod` is a bijection.
pub fn is_iso(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> bool {
    if dom != cod {
        return false;
    }
    kernel(r, a, dom, cod).0.is_zero() && cokernel(r, a, cod).module.is_zero()
}

/// Row-span canonical form: pivots `p^k`, entries above a pivot reduced below
/// it, closed under the annihilator rows that make the form unique.
pub fn howell_form(r: &WittRing, a: &Mat) -> Mat {
    let cols = a.cols;
    let n = r.n() as u32;
    let mut pool: Vec<Vec<u32>> = a.to_rows().into_iter().filter(|x| x.iter().any(|&v| v != 0)).collect();
    let mut done: Vec<(usize, u32, Vec<u32>)> = Vec::new();
    for c in 0..cols {
        let mut best: Option<(u32, usize)> = None;
        for (idx, row) in pool.iter().enumerate() {
            let v = r.val(row[c]);
            if v < n && best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, idx));
            }
        }
        let Some((v, idx)) = best else { continue };
        let mut piv = pool.remove(idx);
        let unit = r.truncate(r.div_p_pow(piv[c], v), r.n() - v as usize);
        let ui = r.inv(unit).expect("unit part");
        for x in piv.iter_mut() {
            *x = r.mul(ui, *x);
        }
        for row in pool.iter_mut() {
            let x = row[c];
            if x != 0 {
                let t = r.neg(r.div_p_pow(x, v));
                for (e, &pv) in row.iter_mut().zip(&piv) {
                    *e = r.add(*e, r.mul(t, pv));
                }
            }
        }
        if v > 0 {
            let ann: Vec<u32> = piv.iter().map(|&x| r.mul_p_pow(x, n - v)).collect();
            if ann.iter().any(|&x| x != 0) {
                pool.push(ann);
            }
        }
        pool.retain(|x| x.iter().any(|&v| v != 0));
        done.push((c, v, piv));
    }
    // Reduce entries above each pivot.
    for t in 0..done.len() {
        let (c, v, piv) = (done[t].0, done[t].1, done[t].2.clone());
        for row in done.iter_mut().take(t) {
            let x = row.2[c];
            let keep = r.truncate(x, v as usize);
            let diff = r.sub(x, keep);
            if diff != 0 {
                let s = r.neg(r.div_p_pow(diff, v));
                for (e, &pv) in row.2.iter_mut().zip(&piv) {
                    *e = r.add(*e, r.mul(s, pv));
                }
            }
        }
    }
    let rows: Vec<Vec<u32>> = done.into_iter().map(|x| x.2).collect();
    if rows.is_empty() {
        return Mat::zero(0, cols);
    }
    Mat::from_rows(&rows)
}

/// A `sigma^twist`-semilinear map `x -> A sigma^twist(x)` between canonical
/// modules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemilinearMap {
    pub matrix: Mat,
    pub twist: i64,
    pub domain: WnModule,
    pub codomain: WnModule,
}

impl SemilinearMap {
    pub fn new(r: &WittRing, matrix: Mat, twist: i64, domain: WnModule, codomain: WnModule) -> Result<SemilinearMap> {
        if !is_valid_map(r, &matrix, &domain, &codomain) {
            return Err(Error::Shape("matrix does not respect the module annihilators".into()));
        }
        let matrix = matrix.reduce_rows(r, &codomain.divisors);
        Ok(SemilinearMap { matrix, twist, domain, codomain })
    }

    pub fn linear(r: &WittRing, matrix: Mat, domain: WnModule, codomain: WnModule) -> Result<SemilinearMap> {
        SemilinearMap::new(r, matrix, 0, domain, codomain)
    }

    pub fn apply(&self, r: &WittRing, x: &[u32]) -> Vec<u32> {
        let sx: Vec<u32> = x.iter().map(|&c| r.frob_pow(c, self.twist)).collect();
        self.codomain.reduce(r, &self.matrix.apply(r, &sx))
    }

    /// `self o other`: matrix `A sigma^s(B)`, twist `s + t`.
    pub fn compose(&self, r: &WittRing, other: &SemilinearMap) -> Result<SemilinearMap> {
        if self.domain != other.codomain {
            return Err(Error::Shape("composable maps need matching modules".into()));
        }
        let m = self.matrix.mul(r, &other.matrix.frob_pow(r, self.twist)).reduce_rows(r, &self.codomain.divisors);
        Ok(SemilinearMap { matrix: m, twist: self.twist + other.twist, domain: other.domain.clone(), codomain: self.codomain.clone() })
    }

    /// Kernel, computed after untwisting by the bijection `sigma^twist`.
    pub fn kernel(&self, r: &WittRing) -> (WnModule, Mat) {
        let (m, e) = kernel(r, &self.matrix, &self.domain, &self.codomain);
        (m, e.frob_pow(r, -self.twist))
    }

    pub fn image(&self, r: &WittRing) -> (WnModule, Mat) {
        image(r, &self.matrix, &self.codomain)
    }

    pub fn cokernel(&self, r: &WittRing) -> Cokernel {
        cokernel(r, &self.matrix, &self.codomain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn enumerate_kernel_size(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> usize {
        dom.elements(r).iter().filter(|x| cod.reduce(r, &a.apply(r, x)).iter().all(|&v| v == 0)).count()
    }

    fn enumerate_image_size(r: &WittRing, a: &Mat, dom: &WnModule, cod: &WnModule) -> usize {
        let mut set = std::collections::HashSet::new();
        for x in dom.elements(r) {
            set.insert(cod.reduce(r, &a.apply(r, &x)));
        }
        set.len()
    }

    #[test]
    fn multiplication_by_p_on_w2() {
        let r = WittRing::new(2, 1, 2).unwrap();
        let a = Mat::from_rows(&[vec![r.p_pow(1)]]);
        let m = WnModule::free(1, 2);
        assert_eq!(kernel(&r, &a, &m, &m).0.divisors, vec![1]);
        assert_eq!(image(&r, &a, &m).0.divisors, vec![1]);
        assert_eq!(cokernel(&r, &a, &m).module.divisors, vec![1]);
        assert_eq!(enumerate_kernel_size(&r, &a, &m, &m), 2);
    }

    #[test]
    fn diag_one_p() {
        let r = WittRing::new(2, 1, 2).unwrap();
        let a = Mat::from_rows(&[vec![1, 0], vec![0, r.p_pow(1)]]);
        let m = WnModule::free(2, 2);
        assert_eq!(cokernel(&r, &a, &m).module.divisors, vec![1]);
        assert_eq!(smith_decompose(&r, &a), vec![0, 1]);
        let id = Mat::identity(2);
        assert!(kernel(&r, &id, &m, &m).0.is_zero());
        assert!(cokernel(&r, &id, &m).module.is_zero());
    }

    #[test]
    fn random_maps_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, d, n) in [(2, 1, 3), (3, 1, 2), (2, 2, 2)] {
            let r = WittRing::new(p, d, n).unwrap();
            for _ in 0..60 {
                let dom = WnModule::new((0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..=n as u32)).collect(), n).unwrap();
                let cod = WnModule::new((0..rng.gen_range(0..3)).map(|_| rng.gen_range(1..=n as u32)).collect(), n).unwrap();
                if dom.cardinality(&r) > 5000 {
                    continue;
                }
                let mut a = Mat::random(&r, cod.rank(), dom.rank(), &mut rng);
                for i in 0..a.rows {
                    for j in 0..a.cols {
                        let need = cod.divisors[i].saturating_sub(dom.divisors[j]);
                        let v = r.mul_p_pow(a.get(i, j), need);
                        a.set(i, j, v);
                    }
                }
                let a = a.reduce_rows(&r, &cod.divisors);
                assert!(is_valid_map(&r, &a, &dom, &cod));
                let (km, ke) = kernel(&r, &a, &dom, &cod);
                let (im, _) = image(&r, &a, &cod);
                let ck = cokernel(&r, &a, &cod);
                let q = r.residue_order() as usize;
                assert_eq!(q.pow(km.length()), enumerate_kernel_size(&r, &a, &dom, &cod));
                assert_eq!(q.pow(im.length()), enumerate_image_size(&r, &a, &dom, &cod));
                assert_eq!(km.length() + im.length(), dom.length());
                assert_eq!(im.length() + ck.module.length(), cod.length());
                assert!(is_valid_map(&r, &ke, &km, &dom));
                assert!(compose(&r, &a, &ke, &cod).is_zero());
                assert!(compose(&r, &ck.projection, &a, &ck.module).is_zero());
            }
        }
    }

    #[test]
    fn smith_transforms_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = WittRing::new(3, 1, 3).unwrap();
        for _ in 0..50 {
            let a = Mat::random(&r, 3, 4, &mut rng).scale_p_pow(&r, rng.gen_range(0..2));
            let sf = smith(&r, &a);
            let d = sf.u.mul(&r, &a).mul(&r, &sf.v);
            for i in 0..3 {
                for j in 0..4 {
                    let want = if i == j && sf.diag[i] < 3 { r.p_pow(sf.diag[i]) } else { 0 };
                    assert_eq!(d.get(i, j), want);
                }
            }
            assert_eq!(sf.u.mul(&r, &sf.u_inv), Mat::identity(3));
            assert_eq!(sf.v.mul(&r, &sf.v_inv), Mat::identity(4));
            let u = Mat::random_unimodular(&r, 3, &mut rng);
            let v = Mat::random_unimodular(&r, 4, &mut rng);
            let b = u.mul(&r, &a).mul(&r, &v);
            assert_eq!(smith_decompose(&r, &a), smith_decompose(&r, &b));
        }
    }

    #[test]
    fn howell_is_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = WittRing::new(2, 1, 3).unwrap();
        for _ in 0..50 {
            let a = Mat::random(&r, 3, 3, &mut rng).scale_p_pow(&r, rng.gen_range(0..2));
            let u = Mat::random_unimodular(&r, 3, &mut rng);
            assert_eq!(howell_form(&r, &a), howell_form(&r, &u.mul(&r, &a)));
        }
        let a = Mat::from_rows(&[vec![r.p_pow(1), 1]]);
        let h = howell_form(&r, &a);
        assert_eq!(h.rows, 2);
    }

    #[test]
    fn solve_finds_preimages() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = WittRing::new(2, 2, 2).unwrap();
        let dom = WnModule::new(vec![2, 1], 2).unwrap();
        let cod = WnModule::new(vec![2, 2], 2).unwrap();
        let a = Mat::from_rows(&[vec![1, r.p_pow(1)], vec![r.p_pow(1), 0]]);
        for _ in 0..20 {
            let x = dom.random_element(&r, &mut rng);
            let y = cod.reduce(&r, &a.apply(&r, &x));
            let z = solve(&r, &a, &dom, &cod, &y).unwrap();
            assert_eq!(cod.reduce(&r, &a.apply(&r, &z)), y);
        }
        assert!(solve(&r, &a, &dom, &cod, &[0, 1]).is_none());
    }
}
