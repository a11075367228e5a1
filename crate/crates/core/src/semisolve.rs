//! Systems of `Z_p`-linear equations in matrix unknowns over `W_n(F_q)`.
//!
//! Each equation is a sum of terms `L * sigma^s(U_k) * R`. Writing every
//! entry of `W_n(F_q)` in the Galois ring basis over `Z/p^n` turns the system
//! into an honest linear system over `W_n(F_p)`, whose solution module is
//! computed exactly. Searching that module for solutions with invertible
//! blocks is how semilinear conjugacy and isomorphism are decided.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, WnModule};
use crate::witt::WittRing;
use rand::Rng;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Term {
    pub block: usize,
    pub left: Mat,
    pub right: Mat,
    pub twist: i64,
    pub negate: bool,
}

impl Term {
    pub fn new(block: usize, left: Mat, right: Mat, twist: i64, negate: bool) -> Term {
        Term { block, left, right, twist, negate }
    }
}

/// Outcome of a search for a solution whose blocks are all invertible.
#[derive(Clone, Debug)]
pub enum Search {
    Found(Vec<Mat>),
    /// The whole solution space mod `p` was scanned.
    NotFound,
    /// Only a sample was scanned.
    Undecided,
}

pub struct SemilinearSystem {
    ring: Arc<WittRing>,
    base: Arc<WittRing>,
    blocks: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    rows: Vec<Vec<u32>>,
    basis: Vec<u32>,
}

impl SemilinearSystem {
    pub fn new(ring: Arc<WittRing>, blocks: Vec<(usize, usize)>) -> Result<SemilinearSystem> {
        let base = WittRing::new(ring.p(), 1, ring.n())?;
        let d = ring.d() as usize;
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for &(r, c) in &blocks {
            offsets.push(total);
            total += r * c * d;
        }
        offsets.push(total);
        let basis = (0..d)
            .map(|t| {
                let mut e = vec![0u64; d];
                e[t] = 1;
                ring.from_galois(&e)
            })
            .collect();
        Ok(SemilinearSystem { ring, base, blocks, offsets, rows: Vec::new(), basis })
    }

    fn unknowns(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn d(&self) -> usize {
        self.ring.d() as usize
    }

    /// Matrix over `Z/p^n` of `x -> c * sigma^s(x)` in the Galois basis.
    fn scalar_matrix(&self, c: u32, s: i64) -> Vec<Vec<u64>> {
        let r = &self.ring;
        let d = self.d();
        let mut m = vec![vec![0u64; d]; d];
        for t in 0..d {
            let img = r.mul(c, r.frob_pow(self.basis[t], s));
            let g = r.to_galois(img);
            for (i, row) in m.iter_mut().enumerate() {
                row[t] = g[i];
            }
        }
        m
    }

    /// Adds the equation `sum of terms = 0`, an `rows x cols` matrix identity.
    pub fn add_equation(&mut self, rows: usize, cols: usize, terms: &[Term]) -> Result<()> {
        let r = self.ring.clone();
        let d = self.d();
        let pn = r.modulus();
        let nu = self.unknowns();
        for t in terms {
            let (br, bc) = self.blocks[t.block];
            if t.left.rows != rows || t.left.cols != br || t.right.rows != bc || t.right.cols != cols {
                return Err(Error::Shape("term shape does not match its block".into()));
            }
        }
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = vec![vec![0u64; nu]; d];
                for t in terms {
                    let (br, bc) = self.blocks[t.block];
                    for k in 0..br {
                        let lk = t.left.get(i, k);
                        if lk == 0 {
                            continue;
                        }
                        for l in 0..bc {
                            let c = r.mul(lk, t.right.get(l, j));
                            if c == 0 {
                                continue;
                            }
                            let m = self.scalar_matrix(c, t.twist);
                            let off = self.offsets[t.block] + (k * bc + l) * d;
                            for (a, row) in acc.iter_mut().enumerate() {
                                for (b, &x) in m[a].iter().enumerate() {
                                    let x = if t.negate { (pn - x) % pn } else { x };
                                    row[off + b] = (row[off + b] + x) % pn;
                                }
                            }
                        }
                    }
                }
                for row in acc {
                    self.rows.push(row.iter().map(|&x| self.base.from_integer(x as i64)).collect());
                }
            }
        }
        Ok(())
    }

    /// Solution module: its canonical form and generators as columns.
    pub fn solutions(&self) -> (WnModule, Mat) {
        let n = self.ring.n();
        let nu = self.unknowns();
        let dom = WnModule::free(nu, n);
        if self.rows.is_empty() {
            return (dom, Mat::identity(nu));
        }
        let a = Mat::from_rows(&self.rows);
        let cod = WnModule::free(a.rows, n);
        linalg::kernel(&self.base, &a, &dom, &cod)
    }

    /// Turns a solution vector (codes in `W_n(F_p)`) into block matrices.
    pub fn to_blocks(&self, x: &[u32]) -> Vec<Mat> {
        let d = self.d();
        self.blocks
            .iter()
            .enumerate()
            .map(|(k, &(br, bc))| {
                let mut m = Mat::zero(br, bc);
                for i in 0..br {
                    for j in 0..bc {
                        let off = self.offsets[k] + (i * bc + j) * d;
                        let g: Vec<u64> = (0..d).map(|t| self.base.to_galois(x[off + t])[0]).collect();
                        m.set(i, j, self.ring.from_galois(&g));
                    }
                }
                m
            })
            .collect()
    }

    /// Looks for a solution accepted by `accept`. Acceptance must depend only
    /// on the solution mod `p` (as invertibility does), since only the
    /// reduction of the solution module is scanned.
    pub fn search(&self, accept: impl Fn(&[Mat]) -> bool, exhaustive_limit: u64, samples: usize, rng: &mut impl Rng) -> Search {
        let (module, gens) = self.solutions();
        let p = self.ring.p() as u64;
        let base = &self.base;
        // Reductions mod p of the generators, and an independent subset.
        let reduced: Vec<Vec<u64>> =
            (0..module.rank()).map(|j| gens.col(j).iter().map(|&c| (base.coord(c, 0)) as u64 % p).collect()).collect();
        let chosen = independent_subset(&reduced, p);
        let dim = chosen.len() as u32;
        let nu = self.unknowns();
        let combine = |coefs: &[u64]| -> Vec<u32> {
            let mut x = vec![0u32; nu];
            for (&j, &c) in chosen.iter().zip(coefs) {
                if c == 0 {
                    continue;
                }
                let cc = base.from_integer(c as i64);
                let col = gens.col(j);
                for (xi, &g) in x.iter_mut().zip(&col) {
                    *xi = base.add(*xi, base.mul(cc, g));
                }
            }
            x
        };
        let total = p.checked_pow(dim);
        match total {
            Some(t) if t <= exhaustive_limit => {
                let mut coefs = vec![0u64; dim as usize];
                for _ in 0..t {
                    let blocks = self.to_blocks(&combine(&coefs));
                    if accept(&blocks) {
                        return Search::Found(blocks);
                    }
                    for c in coefs.iter_mut() {
                        *c += 1;
                        if *c < p {
                            break;
                        }
                        *c = 0;
                    }
                }
                Search::NotFound
            }
            _ => {
                for _ in 0..samples {
                    let coefs: Vec<u64> = (0..dim).map(|_| rng.gen_range(0..p)).collect();
                    let blocks = self.to_blocks(&combine(&coefs));
                    if accept(&blocks) {
                        return Search::Found(blocks);
                    }
                }
                Search::Undecided
            }
        }
    }
}

/// Indices of a maximal `F_p`-independent subset of the given vectors.
fn independent_subset(vecs: &[Vec<u64>], p: u64) -> Vec<usize> {
    let mut echelon: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, v) in vecs.iter().enumerate() {
        let mut w = v.clone();
        for (piv, e) in &echelon {
            let c = w[*piv];
            if c != 0 {
                for (wi, &ei) in w.iter_mut().zip(e) {
                    *wi = (*wi + p * p - c * ei % p) % p;
                }
            }
        }
        if let Some(piv) = w.iter().position(|&x| x != 0) {
            let inv = mod_inv(w[piv], p);
            for x in w.iter_mut() {
                *x = *x * inv % p;
            }
            echelon.push((piv, w));
            chosen.push(idx);
        }
    }
    chosen
}

fn mod_inv(a: u64, p: u64) -> u64 {
    let mut r = 1;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Searches for `g` invertible with `g * a = b * sigma(g)`, i.e. an
/// isomorphism from the crystal with matrix `a` to the one with matrix `b`.
pub fn conjugacy(ring: &Arc<WittRing>, a: &Mat, b: &Mat, exhaustive_limit: u64, samples: usize, rng: &mut impl Rng) -> Result<Search> {
    let m = a.rows;
    if a.cols != m || b.rows != m || b.cols != m {
        return Err(Error::Shape("conjugacy needs square matrices of one size".into()));
    }
    let mut sys = SemilinearSystem::new(ring.clone(), vec![(m, m)])?;
    sys.add_equation(m, m, &[Term::new(0, Mat::identity(m), a.clone(), 0, false), Term::new(0, b.clone(), Mat::identity(m), 1, true)])?;
    let r = ring.clone();
    Ok(sys.search(|blocks| linalg::is_invertible(&r, &blocks[0]), exhaustive_limit, samples, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conjugate_by_known_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, d) in [(2, 1), (3, 1), (2, 2)] {
            let r = WittRing::new(p, d, 2).unwrap();
            for _ in 0..5 {
                let a = Mat::random(&r, 2, 2, &mut rng);
                let g = Mat::random_unimodular(&r, 2, &mut rng);
                let ginv = linalg::inverse(&r, &g).unwrap();
                // b = g a sigma(g)^{-1}
                let b = g.mul(&r, &a).mul(&r, &ginv.frob_pow(&r, 1));
                match conjugacy(&r, &a, &b, 1 << 16, 100, &mut rng).unwrap() {
                    Search::Found(bl) => {
                        let lhs = bl[0].mul(&r, &a);
                        let rhs = b.mul(&r, &bl[0].frob_pow(&r, 1));
                        assert_eq!(lhs, rhs);
                    }
                    other => panic!("no conjugator found: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn non_conjugate_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = WittRing::new(2, 1, 2).unwrap();
        let a = Mat::identity(1);
        let b = Mat::from_rows(&[vec![r.p_pow(1)]]);
        assert!(matches!(conjugacy(&r, &a, &b, 1 << 16, 10, &mut rng).unwrap(), Search::NotFound));
    }
}
