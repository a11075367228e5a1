//! F-zips over a finite field, extraction of an F-zip from a rigid φ-gauge,
//! predisplay and display checkers, and perfection of finite `F_p`-algebras.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, WnModule};
use crate::phi_crystal::{self, PhiGauge};
use crate::witt::WittRing;
use std::sync::Arc;

fn rank(r: &WittRing, a: &Mat) -> usize {
    if a.rows == 0 || a.cols == 0 {
        return 0;
    }
    linalg::smith(r, a).rank(r)
}

fn contains(r: &WittRing, big: &Mat, small: &Mat) -> bool {
    rank(r, &big.hstack(small)) == rank(r, big)
}

/// Column basis of the span of `a` in `k^m`.
fn span_basis(r: &WittRing, a: &Mat) -> Mat {
    let m = a.rows;
    if a.cols == 0 {
        return Mat::zero(m, 0);
    }
    let (sub, emb) = linalg::image(r, a, &WnModule::free(m, 1));
    if sub.is_zero() {
        Mat::zero(m, 0)
    } else {
        emb
    }
}

/// `x -> Phi sigma(x)` applied to the columns of `basis`.
fn apply_semilinear(r: &WittRing, phi: &Mat, basis: &Mat) -> Mat {
    phi.mul(r, &basis.frob_pow(r, 1))
}

/// An F-zip on `k^m`, `k = F_q`. Both filtrations live on `k^m`; the twist
/// of `C` by Frobenius is absorbed into the semilinearity of the `phi_i`.
///
/// `c[j] = C^{lo + j}` for `j = 0..=hi-lo+1`, `d[j] = D_{lo - 1 + j}` for the
/// same `j`, and `phis[j]` is the matrix of a map `x -> Phi sigma(x)` whose
/// restriction to `C^{lo+j}` induces `gr^{lo+j} C -> gr_{lo+j} D`.
#[derive(Clone, Debug, PartialEq)]
pub struct FZip {
    pub ring: Arc<WittRing>,
    pub dim: usize,
    pub lo: i64,
    pub c: Vec<Mat>,
    pub d: Vec<Mat>,
    pub phis: Vec<Mat>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FZipReport {
    pub violations: Vec<(i64, String)>,
    /// `(i, dim gr^i C, dim gr_i D)`.
    pub graded_dims: Vec<(i64, usize, usize)>,
}

impl FZipReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl FZip {
    pub fn hi(&self) -> i64 {
        self.lo + self.phis.len() as i64 - 1
    }

    /// The Tate F-zip of weight `w` on `k^m`.
    pub fn tate(ring: Arc<WittRing>, m: usize, w: i64) -> FZip {
        FZip {
            ring,
            dim: m,
            lo: w,
            c: vec![Mat::identity(m), Mat::zero(m, 0)],
            d: vec![Mat::zero(m, 0), Mat::identity(m)],
            phis: vec![Mat::identity(m)],
        }
    }

    /// Nonzero graded dimensions `(i, dim gr^i C)`.
    pub fn graded_dims(&self) -> Vec<(i64, usize)> {
        let r = &self.ring;
        (0..self.phis.len())
            .filter_map(|j| {
                let g = rank(r, &self.c[j]) - rank(r, &self.c[j + 1]);
                (g > 0).then_some((self.lo + j as i64, g))
            })
            .collect()
    }
}

pub fn validate_fzip(z: &FZip) -> FZipReport {
    let r = &z.ring;
    let mut rep = FZipReport::default();
    let len = z.phis.len();
    if r.n() != 1 {
        rep.violations.push((z.lo, "F-zips live over the residue field (n = 1)".into()));
        return rep;
    }
    if z.c.len() != len + 1 || z.d.len() != len + 1 {
        rep.violations.push((z.lo, "filtration lengths disagree with the number of graded maps".into()));
        return rep;
    }
    if z.c.iter().chain(&z.d).chain(&z.phis).any(|m| m.rows != z.dim) || z.phis.iter().any(|m| m.cols != z.dim) {
        rep.violations.push((z.lo, "matrix shapes disagree with the carrier dimension".into()));
        return rep;
    }
    let m = z.dim;
    if rank(r, &z.c[0]) != m {
        rep.violations.push((z.lo, "C is not exhaustive at the bottom".into()));
    }
    if rank(r, &z.c[len]) != 0 {
        rep.violations.push((z.hi() + 1, "C does not reach 0".into()));
    }
    if rank(r, &z.d[0]) != 0 {
        rep.violations.push((z.lo - 1, "D does not start at 0".into()));
    }
    if rank(r, &z.d[len]) != m {
        rep.violations.push((z.hi(), "D is not exhaustive at the top".into()));
    }
    for j in 0..len {
        let i = z.lo + j as i64;
        if !contains(r, &z.c[j], &z.c[j + 1]) {
            rep.violations.push((i + 1, "C is not descending".into()));
        }
        if !contains(r, &z.d[j + 1], &z.d[j]) {
            rep.violations.push((i, "D is not ascending".into()));
        }
        let gc = rank(r, &z.c[j]) as i64 - rank(r, &z.c[j + 1]) as i64;
        let gd = rank(r, &z.d[j + 1]) as i64 - rank(r, &z.d[j]) as i64;
        rep.graded_dims.push((i, gc.max(0) as usize, gd.max(0) as usize));
        if gc != gd {
            rep.violations.push((i, format!("dim gr^{i} C = {gc} but dim gr_{i} D = {gd}")));
            continue;
        }
        let phi = &z.phis[j];
        let img = apply_semilinear(r, phi, &z.c[j]);
        let img_next = apply_semilinear(r, phi, &z.c[j + 1]);
        if !contains(r, &z.d[j + 1], &img) {
            rep.violations.push((i, "phi does not map C^i into D_i".into()));
        }
        if !contains(r, &z.d[j], &img_next) {
            rep.violations.push((i, "phi does not map C^{i+1} into D_{i-1}".into()));
        }
        let induced = rank(r, &z.d[j].hstack(&img)) as i64 - rank(r, &z.d[j]) as i64;
        if induced != gc {
            rep.violations.push((i, "induced graded map is not bijective".into()));
        }
        // Semilinearity on a sample: phi(lambda x) = sigma(lambda) phi(x).
        if m > 0 && r.size() > 1 {
            let lambda = r.teichmuller(r.field().generator());
            let x: Vec<u32> = (0..m).map(|t| if t == 0 { 1 } else { 0 }).collect();
            let lx: Vec<u32> = x.iter().map(|&c| r.mul(lambda, c)).collect();
            let lhs = phi.apply(r, &lx.iter().map(|&c| r.frob(c)).collect::<Vec<_>>());
            let base = phi.apply(r, &x.iter().map(|&c| r.frob(c)).collect::<Vec<_>>());
            let rhs: Vec<u32> = base.iter().map(|&c| r.mul(r.frob(lambda), c)).collect();
            if lhs != rhs {
                rep.violations.push((i, "phi is not sigma-semilinear".into()));
            }
        }
    }
    rep
}

/// The F-zip of a rigid φ-gauge over `k`: `C^r = v^{r-a} M^r` and
/// `D_r = φ f^{b-r} M^r` inside `M^a`, with `[v^{r-a} x] -> [φ f^{b-r} x]` on
/// graded pieces.
pub fn gauge_to_fzip(g: &PhiGauge) -> Result<FZip> {
    let gg = &g.gauge;
    if gg.n() != 1 {
        return Err(Error::Precondition("F-zip extraction needs n = 1".into()));
    }
    if !phi_crystal::is_rigid(gg)? {
        return Err(Error::Precondition("F-zip extraction needs a rigid gauge".into()));
    }
    if !g.is_phi_bijective() {
        return Err(Error::Precondition("phi is not bijective".into()));
    }
    let r = gg.ring.clone();
    let (a, b) = gg.window();
    let m = gg.comp(a).rank();
    let mut c = Vec::new();
    let mut d = Vec::new();
    let mut phis = Vec::new();
    for s in a..=b + 1 {
        c.push(span_basis(&r, &gg.v_power(a, s - a)));
    }
    d.push(Mat::zero(m, 0));
    for s in a..=b {
        let fs = gg.f_power(s, b - s);
        d.push(span_basis(&r, &g.phi.mul(&r, &fs.frob_pow(&r, 1))));
    }
    for s in a..=b {
        let vs = gg.v_power(a, s - a);
        let fs = gg.f_power(s, b - s);
        // Lift a basis of C^s through v^{s-a}, complete it to a basis of k^m
        // with vectors sent to 0, and solve for the matrix.
        let basis = &c[(s - a) as usize];
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for j in 0..basis.cols {
            let y = basis.col(j);
            let x = linalg::solve(&r, &vs, gg.comp(s), gg.comp(a), &y).expect("basis vector lies in the image");
            src.push(y);
            let fx = fs.apply(&r, &x);
            let sfx: Vec<u32> = fx.iter().map(|&t| r.frob(t)).collect();
            dst.push(g.phi.apply(&r, &sfx));
        }
        for t in 0..m {
            if src.len() == m {
                break;
            }
            let mut e = vec![0u32; m];
            e[t] = 1;
            let mut trial = src.clone();
            trial.push(e.clone());
            if rank(&r, &Mat::from_cols(m, &trial)) == trial.len() {
                src = trial;
                dst.push(vec![0; m]);
            }
        }
        let phi_s = if m == 0 {
            Mat::zero(0, 0)
        } else {
            let y = Mat::from_cols(m, &src).frob_pow(&r, 1);
            let yinv = linalg::inverse(&r, &y).expect("completed basis");
            Mat::from_cols(m, &dst).mul(&r, &yinv)
        };
        phis.push(phi_s);
    }
    Ok(FZip { ring: r, dim: m, lo: a, c, d, phis })
}

/// A predisplay in the desk model `W_n(F_q)`. `I = V W_n` is identified with
/// `W_{n-1}` through its generator `V(1) = p`, and `alpha[i]` is the matrix
/// of `x -> alpha_i(V(1) (x) x)`, so `alpha_i(V(eta) (x) x)` is
/// `alpha[i] sigma^{-1}(eta) x`.
#[derive(Clone, Debug)]
pub struct Predisplay {
    pub ring: Arc<WittRing>,
    pub modules: Vec<WnModule>,
    /// `iota[i]: P_{i+1} -> P_i`.
    pub iota: Vec<Mat>,
    /// `alpha[i]: P_i -> P_{i+1}`, see above.
    pub alpha: Vec<Mat>,
    /// `F_i: P_i -> P_0`, matrix of `x -> A sigma(x)`.
    pub frob: Vec<Mat>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DisplayReport {
    /// `(relation, i, generator index, message)`.
    pub violations: Vec<(u32, usize, usize, String)>,
}

impl DisplayReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Predisplay {
    pub fn degree(&self) -> usize {
        self.modules.len().saturating_sub(1)
    }
}

pub fn validate_predisplay(pd: &Predisplay) -> Result<DisplayReport> {
    let r = &pd.ring;
    let d = pd.degree();
    if pd.modules.is_empty() || pd.iota.len() != d || pd.alpha.len() != d || pd.frob.len() != d + 1 {
        return Err(Error::Shape("a degree-d predisplay has d+1 modules, d maps iota and alpha, d+1 maps F".into()));
    }
    let p0 = &pd.modules[0];
    for i in 0..d {
        let (pi, pn) = (&pd.modules[i], &pd.modules[i + 1]);
        if !linalg::is_valid_map(r, &pd.iota[i], pn, pi) || !linalg::is_valid_map(r, &pd.alpha[i], pi, pn) {
            return Err(Error::Shape(format!("iota or alpha at {i} has the wrong shape")));
        }
    }
    for i in 0..=d {
        if !linalg::is_valid_map(r, &pd.frob[i], &pd.modules[i], p0) {
            return Err(Error::Shape(format!("F_{i} has the wrong shape")));
        }
    }
    let mut rep = DisplayReport::default();
    // Spanning set of W: 1 and the Teichmuller lifts of an F_p-basis of k.
    let etas: Vec<u32> = {
        let f = r.field();
        let mut v: Vec<u32> = (0..f.degree()).map(|t| r.teichmuller(f.p().pow(t))).collect();
        if v.is_empty() {
            v.push(1);
        }
        v
    };
    for i in 0..d {
        let (pi, pn) = (&pd.modules[i], &pd.modules[i + 1]);
        for j in 0..pi.rank() {
            let mut x = vec![0u32; pi.rank()];
            x[j] = 1;
            // iota_i alpha_i (V(1) (x) x) = V(1) x = p x.
            let lhs = pi.reduce(r, &pd.iota[i].apply(r, &pn.reduce(r, &pd.alpha[i].apply(r, &x))));
            let rhs = pi.reduce(r, &x.iter().map(|&c| r.mul_p(c)).collect::<Vec<_>>());
            if lhs != rhs {
                rep.violations.push((1, i, j, "iota o alpha differs from multiplication".into()));
            }
            for &eta in &etas {
                let sx: Vec<u32> = x.iter().map(|&c| r.mul(r.frob_pow(eta, -1), c)).collect();
                let ax = pn.reduce(r, &pd.alpha[i].apply(r, &sx));
                let lhs = p0.reduce(r, &pd.frob[i + 1].apply(r, &ax.iter().map(|&c| r.frob(c)).collect::<Vec<_>>()));
                let fx = pd.frob[i].apply(r, &x.iter().map(|&c| r.frob(c)).collect::<Vec<_>>());
                let rhs = p0.reduce(r, &fx.iter().map(|&c| r.mul(eta, c)).collect::<Vec<_>>());
                if lhs != rhs {
                    rep.violations.push((2, i, j, format!("F_{}(alpha_{i}(V(eta) (x) x)) != eta F_{i} x", i + 1)));
                }
            }
        }
    }
    Ok(rep)
}

/// Normal decomposition data: free modules `L_j = W_n^{ranks[j]}` and
/// `Phi_j: L_j -> L_0 + ... + L_d`, matrices of `x -> A sigma(x)`.
#[derive(Clone, Debug)]
pub struct DisplayWitness {
    pub ranks: Vec<usize>,
    pub phis: Vec<Mat>,
}

pub fn validate_display(pd: &Predisplay, w: &DisplayWitness) -> Result<DisplayReport> {
    let mut rep = validate_predisplay(pd)?;
    let r = &pd.ring;
    let n = r.n() as u32;
    let d = pd.degree();
    if w.ranks.len() != d + 1 || w.phis.len() != d + 1 {
        return Err(Error::Shape("display witness must have d+1 summands".into()));
    }
    let total: usize = w.ranks.iter().sum();
    for i in 0..=d {
        let mut divs = Vec::new();
        for (j, &l) in w.ranks.iter().enumerate() {
            let e = if j < i { n - 1 } else { n };
            if e > 0 {
                divs.extend(std::iter::repeat(e).take(l));
            }
        }
        divs.sort_unstable_by(|x, y| y.cmp(x));
        if divs != pd.modules[i].divisors {
            rep.violations.push((3, i, 0, "P_i does not decompose as I(x)L_0 + ... + L_i + ... + L_d".into()));
        }
    }
    for (j, m) in w.phis.iter().enumerate() {
        if m.rows != total || m.cols != w.ranks[j] {
            return Err(Error::Shape(format!("Phi_{j} has the wrong shape")));
        }
    }
    let mut sum = Mat::zero(total, 0);
    for m in &w.phis {
        sum = sum.hstack(m);
    }
    if !linalg::is_invertible(r, &sum) {
        rep.violations.push((4, 0, 0, "the sum of the Phi_i is not an automorphism".into()));
    }
    Ok(rep)
}

/// A finite commutative `F_p`-algebra given by structure constants:
/// `e_i e_j = sum_k mult[i][j][k] e_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteAlgebra {
    pub p: u32,
    pub mult: Vec<Vec<Vec<u32>>>,
    pub one: Vec<u32>,
}

impl FiniteAlgebra {
    pub fn new(p: u32, mult: Vec<Vec<Vec<u32>>>, one: Vec<u32>) -> Result<FiniteAlgebra> {
        let n = one.len();
        if mult.len() != n || mult.iter().any(|row| row.len() != n || row.iter().any(|v| v.len() != n)) {
            return Err(Error::Shape("structure constants must form a dim x dim x dim tensor".into()));
        }
        if !crate::field::is_prime(p) {
            return Err(Error::Context(format!("{p} is not prime")));
        }
        let alg = FiniteAlgebra { p, mult, one };
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            if alg.mul(&alg.one, &e) != e {
                return Err(Error::Schema("the given unit is not a unit".into()));
            }
        }
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.one.len()
    }

    pub fn mul(&self, x: &[u32], y: &[u32]) -> Vec<u32> {
        let n = self.dim();
        let p = self.p;
        let mut out = vec![0u32; n];
        for i in 0..n {
            if x[i] == 0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0 {
                    continue;
                }
                let c = x[i] * y[j] % p;
                for k in 0..n {
                    out[k] = (out[k] + c * self.mult[i][j][k]) % p;
                }
            }
        }
        out
    }

    pub fn pow_p(&self, x: &[u32]) -> Vec<u32> {
        let mut acc = self.one.clone();
        for _ in 0..self.p {
            acc = self.mul(&acc, x);
        }
        acc
    }

    /// Matrix of the (`F_p`-linear) Frobenius, columns `e_i^p`.
    pub fn frobenius_matrix(&self) -> Mat {
        let n = self.dim();
        let cols: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let mut e = vec![0; n];
                e[i] = 1;
                self.pow_p(&e)
            })
            .collect();
        if n == 0 {
            Mat::zero(0, 0)
        } else {
            Mat::from_cols(n, &cols)
        }
    }

    /// `F_p[x_1..x_k]` modulo the monomials outside a finite down-set, on the
    /// basis of monomials in the down-set (which must contain `1`).
    pub fn monomial_quotient(p: u32, staircase: &[Vec<u32>]) -> Result<FiniteAlgebra> {
        let n = staircase.len();
        let k = staircase.first().map(|m| m.len()).unwrap_or(0);
        let index: std::collections::HashMap<&Vec<u32>, usize> = staircase.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let unit = vec![0u32; k];
        let one_idx = *index.get(&unit).ok_or_else(|| Error::Schema("staircase must contain 1".into()))?;
        let mut mult = vec![vec![vec![0u32; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                let prod: Vec<u32> = staircase[i].iter().zip(&staircase[j]).map(|(a, b)| a + b).collect();
                if let Some(&t) = index.get(&prod) {
                    mult[i][j][t] = 1;
                }
            }
        }
        let mut one = vec![0; n];
        one[one_idx] = 1;
        FiniteAlgebra::new(p, mult, one)
    }

    pub fn product(&self, other: &FiniteAlgebra) -> Result<FiniteAlgebra> {
        if self.p != other.p {
            return Err(Error::ContextMismatch("product of algebras over different primes".into()));
        }
        let (n1, n2) = (self.dim(), other.dim());
        let n = n1 + n2;
        let mut mult = vec![vec![vec![0u32; n]; n]; n];
        for i in 0..n1 {
            for j in 0..n1 {
                mult[i][j][..n1].copy_from_slice(&self.mult[i][j]);
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                mult[n1 + i][n1 + j][n1..].copy_from_slice(&other.mult[i][j]);
            }
        }
        let mut one = self.one.clone();
        one.extend_from_slice(&other.one);
        FiniteAlgebra::new(self.p, mult, one)
    }

    /// `F_{p^d}` on the power basis of its defining polynomial.
    pub fn finite_field(p: u32, d: u32) -> Result<FiniteAlgebra> {
        let f = crate::field::Field::new(p, d)?;
        let n = d as usize;
        let basis: Vec<u32> = (0..d).map(|i| p.pow(i)).collect();
        let mut mult = vec![vec![vec![0u32; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                mult[i][j] = f.digits(f.mul(basis[i], basis[j]));
            }
        }
        let mut one = vec![0; n];
        one[0] = 1;
        FiniteAlgebra::new(p, mult, one)
    }
}

#[derive(Clone, Debug)]
pub struct PerfectCore {
    /// Columns span `A_per` inside `A`.
    pub basis: Mat,
    pub algebra: FiniteAlgebra,
    /// Smallest `t` with `phi^t(A) = phi^{t+1}(A)`.
    pub iterations: usize,
}

/// `A_per = ∩ phi^t(A)`, found by iterating the Frobenius image until it
/// stabilizes.
pub fn perfect_core(a: &FiniteAlgebra) -> Result<PerfectCore> {
    let r = WittRing::new(a.p, 1, 1)?;
    let n = a.dim();
    let phi = a.frobenius_matrix();
    let mut cur = Mat::identity(n);
    let mut iterations = 0;
    loop {
        let next = span_basis(&r, &phi.mul(&r, &cur));
        if next.cols == cur.cols {
            break;
        }
        cur = next;
        iterations += 1;
    }
    let k = cur.cols;
    let amb = WnModule::free(n, 1);
    let sub = WnModule::free(k, 1);
    let coords = |v: &[u32]| linalg::solve(&r, &cur, &sub, &amb, v).expect("subalgebra is closed");
    let mut mult = vec![vec![vec![0u32; k]; k]; k];
    for i in 0..k {
        for j in 0..k {
            mult[i][j] = coords(&a.mul(&cur.col(i), &cur.col(j)));
        }
    }
    let one = coords(&a.one);
    Ok(PerfectCore { basis: cur, algebra: FiniteAlgebra::new(a.p, mult, one)?, iterations })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerfectionReport {
    pub surjective: bool,
    /// Decided by enumerating `a` with `a^p = 0` when the algebra is small,
    /// otherwise by the kernel of the Frobenius matrix.
    pub injective: bool,
}

impl PerfectionReport {
    pub fn is_perfect(&self) -> bool {
        self.surjective && self.injective
    }
}

pub fn perfection_report(a: &FiniteAlgebra) -> Result<PerfectionReport> {
    let r = WittRing::new(a.p, 1, 1)?;
    let n = a.dim();
    let phi = a.frobenius_matrix();
    let surjective = rank(&r, &phi) == n;
    let small = (a.p as u64).checked_pow(n as u32).map(|c| c <= 1 << 16).unwrap_or(false);
    let injective = if small {
        WnModule::free(n, 1).elements(&r).iter().all(|x| x.iter().all(|&c| c == 0) || a.pow_p(x).iter().any(|&c| c != 0))
    } else {
        linalg::kernel(&r, &phi, &WnModule::free(n, 1), &WnModule::free(n, 1)).0.is_zero()
    };
    Ok(PerfectionReport { surjective, injective })
}

pub fn is_perfect(a: &FiniteAlgebra) -> Result<bool> {
    Ok(perfection_report(a)?.is_perfect())
}

/// All finite down-sets of `N^k` with at most `max_size` elements.
pub fn staircases(k: usize, max_size: usize) -> Vec<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let start = vec![vec![0u32; k]];
    let mut stack = vec![start];
    while let Some(s) = stack.pop() {
        let mut key = s.clone();
        key.sort();
        if !seen.insert(key.clone()) {
            continue;
        }
        out.push(key.clone());
        if s.len() == max_size {
            continue;
        }
        // Add any monomial whose predecessors are all present.
        let set: std::collections::HashSet<Vec<u32>> = key.iter().cloned().collect();
        for m in &key {
            for i in 0..k {
                let mut c = m.clone();
                c[i] += 1;
                if set.contains(&c) {
                    continue;
                }
                let ok = (0..k).all(|j| {
                    if c[j] == 0 {
                        return true;
                    }
                    let mut pr = c.clone();
                    pr[j] -= 1;
                    set.contains(&pr)
                });
                if ok {
                    let mut next = key.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::Gauge;

    fn k(p: u32, d: u32) -> Arc<WittRing> {
        WittRing::new(p, d, 1).unwrap()
    }

    #[test]
    fn tate_fzip_valid() {
        assert!(validate_fzip(&FZip::tate(k(2, 2), 2, 3)).is_valid());
        let mut bad = FZip::tate(k(2, 1), 2, 0);
        bad.d[1] = Mat::from_cols(2, &[vec![1, 0]]);
        assert!(!validate_fzip(&bad).is_valid());
    }

    #[test]
    fn fzip_of_free_gauges() {
        let r = k(2, 1);
        let g0 = PhiGauge::new(Gauge::free(r.clone(), 0, 1), Mat::identity(1)).unwrap();
        let z = gauge_to_fzip(&g0).unwrap();
        assert!(validate_fzip(&z).is_valid());
        assert_eq!(z.graded_dims(), vec![(0, 1)]);
        let g1 = PhiGauge::new(Gauge::free(r.clone(), 1, 1), Mat::identity(1)).unwrap();
        let s = g0.direct_sum(&g1).unwrap();
        let z = gauge_to_fzip(&s).unwrap();
        assert!(validate_fzip(&z).is_valid());
        assert_eq!(z.graded_dims(), vec![(-1, 1), (0, 1)]);
    }

    #[test]
    fn fzip_of_swap_crystal() {
        let r = WittRing::new(2, 1, 4).unwrap();
        let p = r.p_pow(1);
        let c = phi_crystal::VirtualCrystal::new(r.clone(), Mat::from_rows(&[vec![0, p], vec![1, 0]]), 0).unwrap();
        let g = phi_crystal::standard_construction(&c, 1).unwrap();
        let z = gauge_to_fzip(&g).unwrap();
        assert!(validate_fzip(&z).is_valid());
        assert_eq!(z.graded_dims(), vec![(0, 1), (1, 1)]);
        let bad = phi_crystal::non_free_fixture(&k(2, 1), 0, 1);
        let bad = PhiGauge::new(bad, Mat::identity(1)).unwrap();
        assert!(matches!(gauge_to_fzip(&bad), Err(Error::Precondition(_))));
    }

    #[test]
    fn display_examples() {
        let r = WittRing::new(2, 2, 3).unwrap();
        let w = WnModule::free(1, 3);
        let p = r.p_pow(1);
        let deg0 = Predisplay { ring: r.clone(), modules: vec![w.clone()], iota: vec![], alpha: vec![], frob: vec![Mat::identity(1)] };
        let wit0 = DisplayWitness { ranks: vec![1], phis: vec![Mat::identity(1)] };
        assert!(validate_display(&deg0, &wit0).unwrap().is_valid());
        let deg1 = Predisplay {
            ring: r.clone(),
            modules: vec![w.clone(), w.clone()],
            iota: vec![Mat::identity(1)],
            alpha: vec![Mat::scalar(1, p)],
            frob: vec![Mat::scalar(1, p), Mat::identity(1)],
        };
        let wit1 = DisplayWitness { ranks: vec![0, 1], phis: vec![Mat::zero(1, 0), Mat::identity(1)] };
        assert!(validate_display(&deg1, &wit1).unwrap().is_valid());
        let mut broken = deg1.clone();
        broken.frob = vec![Mat::zero(1, 1), Mat::zero(1, 1)];
        broken.iota = vec![Mat::zero(1, 1)];
        let rep = validate_predisplay(&broken).unwrap();
        assert!(rep.violations.iter().any(|v| v.0 == 1));
        assert!(rep.violations.iter().all(|v| v.0 != 2));
    }

    #[test]
    fn perfection_examples() {
        let a = FiniteAlgebra::monomial_quotient(3, &[vec![0], vec![1], vec![2]]).unwrap();
        let c = perfect_core(&a).unwrap();
        assert_eq!((c.basis.cols, c.iterations), (1, 1));
        let f4 = FiniteAlgebra::finite_field(2, 2).unwrap();
        assert!(is_perfect(&f4).unwrap());
        assert_eq!(perfect_core(&f4).unwrap().basis.cols, 2);
        let a = FiniteAlgebra::monomial_quotient(2, &[vec![0], vec![1], vec![2], vec![3]]).unwrap();
        let c = perfect_core(&a).unwrap();
        assert_eq!((c.basis.cols, c.iterations), (1, 2));
        assert!(is_perfect(&c.algebra).unwrap());
    }

    #[test]
    fn staircase_counts() {
        // Partitions of 1..=4 in two variables: 1 + 2 + 3 + 5.
        assert_eq!(staircases(2, 4).len(), 1 + 2 + 3 + 5);
        assert_eq!(staircases(1, 8).len(), 8);
    }
}
