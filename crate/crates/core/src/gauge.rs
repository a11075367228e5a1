//! Gauges: finite diagrams `M^a <-> ... <-> M^b` of `W_n`-modules with maps
//! `f: M^r -> M^{r+1}`, `v: M^{r+1} -> M^r` and `fv = vf = p`.
//!
//! Only the window `[a, b]` is stored. To the left of `a` the map `v` is the
//! identity and `f` is `p`; to the right of `b` the map `f` is the identity
//! and `v` is `p`.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, WnModule};
use crate::witt::WittRing;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Gauge {
    pub ring: Arc<WittRing>,
    pub a: i64,
    pub b: i64,
    pub comps: Vec<WnModule>,
    /// `f[r - a]: M^r -> M^{r+1}` for `a <= r < b`.
    pub f: Vec<Mat>,
    /// `v[r - a]: M^{r+1} -> M^r` for `a <= r < b`.
    pub v: Vec<Mat>,
}

impl PartialEq for Gauge {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring
            && self.a == other.a
            && self.b == other.b
            && self.comps == other.comps
            && self.f == other.f
            && self.v == other.v
    }
}

/// Indices where `fv = p` or `vf = p` fails.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GaugeReport {
    pub fv_violations: Vec<i64>,
    pub vf_violations: Vec<i64>,
}

impl GaugeReport {
    pub fn is_valid(&self) -> bool {
        self.fv_violations.is_empty() && self.vf_violations.is_empty()
    }
}

impl Gauge {
    pub fn new(ring: Arc<WittRing>, a: i64, comps: Vec<WnModule>, f: Vec<Mat>, v: Vec<Mat>) -> Result<Gauge> {
        if comps.is_empty() {
            return Err(Error::Shape("a gauge needs at least one component".into()));
        }
        let b = a + comps.len() as i64 - 1;
        let g = Gauge { ring, a, b, comps, f, v };
        g.check_shapes()?;
        Ok(g)
    }

    pub fn zero(ring: Arc<WittRing>) -> Gauge {
        Gauge { ring, a: 0, b: 0, comps: vec![WnModule::zero()], f: vec![], v: vec![] }
    }

    /// `W_n(i)^m`, concentrated in degree `-i`.
    pub fn free(ring: Arc<WittRing>, i: i64, m: usize) -> Gauge {
        let n = ring.n();
        Gauge { ring, a: -i, b: -i, comps: vec![WnModule::free(m, n)], f: vec![], v: vec![] }
    }

    pub fn n(&self) -> usize {
        self.ring.n()
    }

    pub fn window(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    fn check_shapes(&self) -> Result<()> {
        let len = (self.b - self.a) as usize;
        if self.comps.len() != len + 1 || self.f.len() != len || self.v.len() != len {
            return Err(Error::Shape("component and map counts disagree with the window".into()));
        }
        let n = self.n() as u32;
        for (k, c) in self.comps.iter().enumerate() {
            if c.divisors.iter().any(|&e| e == 0 || e > n) || c.divisors.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::Shape(format!("component {} not in canonical form", self.a + k as i64)));
            }
        }
        for k in 0..len {
            let r = self.a + k as i64;
            if !linalg::is_valid_map(&self.ring, &self.f[k], &self.comps[k], &self.comps[k + 1]) {
                return Err(Error::Shape(format!("f at index {r} is not a module map of the right shape")));
            }
            if !linalg::is_valid_map(&self.ring, &self.v[k], &self.comps[k + 1], &self.comps[k]) {
                return Err(Error::Shape(format!("v at index {r} is not a module map of the right shape")));
            }
        }
        Ok(())
    }

    /// `M^r` for any `r`, using the boundary identifications.
    pub fn comp(&self, r: i64) -> &WnModule {
        let k = (r.clamp(self.a, self.b) - self.a) as usize;
        &self.comps[k]
    }

    /// `f: M^r -> M^{r+1}` for any `r`.
    pub fn f_at(&self, r: i64) -> Mat {
        if r < self.a {
            let m = self.comp(r);
            Mat::scalar(m.rank(), self.ring.p_pow(1)).reduce_rows(&self.ring, &m.divisors)
        } else if r >= self.b {
            Mat::identity(self.comp(r).rank())
        } else {
            self.f[(r - self.a) as usize].clone()
        }
    }

    /// `v: M^{r+1} -> M^r` for any `r`.
    pub fn v_at(&self, r: i64) -> Mat {
        if r < self.a {
            Mat::identity(self.comp(r).rank())
        } else if r >= self.b {
            let m = self.comp(r);
            Mat::scalar(m.rank(), self.ring.p_pow(1)).reduce_rows(&self.ring, &m.divisors)
        } else {
            self.v[(r - self.a) as usize].clone()
        }
    }

    /// `f^k: M^r -> M^{r+k}`.
    pub fn f_power(&self, r: i64, k: i64) -> Mat {
        let mut acc = Mat::identity(self.comp(r).rank());
        for s in r..r + k {
            acc = linalg::compose(&self.ring, &self.f_at(s), &acc, self.comp(s + 1));
        }
        acc
    }

    /// `v^k: M^{r+k} -> M^r`.
    pub fn v_power(&self, r: i64, k: i64) -> Mat {
        let mut acc = Mat::identity(self.comp(r + k).rank());
        for s in (r..r + k).rev() {
            acc = linalg::compose(&self.ring, &self.v_at(s), &acc, self.comp(s));
        }
        acc
    }

    pub fn validate(&self) -> Result<GaugeReport> {
        self.check_shapes()?;
        let r = &self.ring;
        let mut rep = GaugeReport::default();
        for s in self.a - 1..=self.b {
            let lo = self.comp(s);
            let hi = self.comp(s + 1);
            let f = self.f_at(s);
            let v = self.v_at(s);
            let pid_hi = Mat::scalar(hi.rank(), r.p_pow(1)).reduce_rows(r, &hi.divisors);
            let pid_lo = Mat::scalar(lo.rank(), r.p_pow(1)).reduce_rows(r, &lo.divisors);
            if linalg::compose(r, &f, &v, hi) != pid_hi {
                rep.fv_violations.push(s);
            }
            if linalg::compose(r, &v, &f, lo) != pid_lo {
                rep.vf_violations.push(s);
            }
        }
        Ok(rep)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().map(|r| r.is_valid()).unwrap_or(false)
    }

    /// Enlarges the stored window without changing the gauge.
    pub fn extend(&self, a: i64, b: i64) -> Gauge {
        let a = a.min(self.a);
        let b = b.max(self.b);
        let comps: Vec<WnModule> = (a..=b).map(|r| self.comp(r).clone()).collect();
        let f: Vec<Mat> = (a..b).map(|r| self.f_at(r)).collect();
        let v: Vec<Mat> = (a..b).map(|r| self.v_at(r)).collect();
        Gauge { ring: self.ring.clone(), a, b, comps, f, v }
    }

    /// `M(i)^r = M^{r+i}`.
    pub fn tate_twist(&self, i: i64) -> Gauge {
        let mut g = self.clone();
        g.a -= i;
        g.b -= i;
        g
    }

    /// Shrinks the window to the minimal concentration interval, absorbing
    /// boundary maps that are isomorphisms.
    pub fn tighten(&self) -> Gauge {
        let r = &self.ring;
        let mut g = self.clone();
        while g.a < g.b && linalg::is_iso(r, &g.v[0], &g.comps[1], &g.comps[0]) {
            g.comps.remove(0);
            g.f.remove(0);
            g.v.remove(0);
            g.a += 1;
        }
        while g.a < g.b {
            let k = g.f.len() - 1;
            if !linalg::is_iso(r, &g.f[k], &g.comps[k], &g.comps[k + 1]) {
                break;
            }
            g.comps.pop();
            g.f.pop();
            g.v.pop();
            g.b -= 1;
        }
        g
    }

    pub fn concentration_interval(&self) -> (i64, i64) {
        let t = self.tighten();
        (t.a, t.b)
    }

    pub fn direct_sum(&self, other: &Gauge) -> Result<Gauge> {
        if *self.ring != *other.ring {
            return Err(Error::ContextMismatch("direct sum of gauges over different rings".into()));
        }
        let a = self.a.min(other.a);
        let b = self.b.max(other.b);
        let x = self.extend(a, b);
        let y = other.extend(a, b);
        let mut comps = Vec::new();
        let mut perms = Vec::new();
        for k in 0..x.comps.len() {
            let (m, perm) = sorted_sum(&x.comps[k], &y.comps[k]);
            comps.push(m);
            perms.push(perm);
        }
        let f: Vec<Mat> = (0..x.f.len()).map(|k| permute(&x.f[k].block_diag(&y.f[k]), &perms[k + 1], &perms[k])).collect();
        let v: Vec<Mat> = (0..x.v.len()).map(|k| permute(&x.v[k].block_diag(&y.v[k]), &perms[k], &perms[k + 1])).collect();
        Ok(Gauge { ring: self.ring.clone(), a, b, comps, f, v })
    }

    /// `M_{<=0}`: `M^r` for `r < 0` and `M^0` in all degrees `r >= 0`.
    pub fn truncate_leq0(&self) -> Gauge {
        let a = self.a.min(0);
        let comps: Vec<WnModule> = (a..=0).map(|r| self.comp(r).clone()).collect();
        let f: Vec<Mat> = (a..0).map(|r| self.f_at(r)).collect();
        let v: Vec<Mat> = (a..0).map(|r| self.v_at(r)).collect();
        Gauge { ring: self.ring.clone(), a, b: 0, comps, f, v }
    }

    /// `v: M^r -> M^{r-1}` is an isomorphism for all `r <= 0`.
    pub fn is_effective(&self) -> bool {
        (self.a..0).all(|s| linalg::is_iso(&self.ring, &self.v_at(s), self.comp(s + 1), self.comp(s)))
    }

    /// `f: M^r -> M^{r+1}` is an isomorphism for all `r >= 0`.
    pub fn is_coeffective(&self) -> bool {
        (0..self.b).all(|s| linalg::is_iso(&self.ring, &self.f_at(s), self.comp(s), self.comp(s + 1)))
    }

    /// Total `W`-length of the stored components.
    pub fn total_length(&self) -> u32 {
        self.comps.iter().map(|c| c.length()).sum()
    }

    pub fn lengths(&self) -> Vec<u32> {
        self.comps.iter().map(|c| c.length()).collect()
    }

    /// Homogeneous elements whose classes form a basis of `M/(p, f, v)M`.
    pub fn minimal_generators(&self) -> Vec<(i64, Vec<u32>)> {
        let r = &self.ring;
        let mut out = Vec::new();
        for s in self.a..=self.b {
            let m = self.comp(s);
            if m.is_zero() {
                continue;
            }
            let pm = Mat::scalar(m.rank(), r.p_pow(1));
            let rel = pm.hstack(&self.f_at(s - 1)).hstack(&self.v_at(s));
            let ck = linalg::cokernel(r, &rel, m);
            for j in 0..ck.module.rank() {
                let col = ck.section.col(j);
                out.push((s, m.reduce(r, &col)));
            }
        }
        out
    }

    /// Lengths of the `D_n`-submodule generated by the given homogeneous
    /// elements, degree by degree over the window.
    pub fn generated_lengths(&self, gens: &[(i64, Vec<u32>)]) -> Vec<u32> {
        let r = &self.ring;
        (self.a..=self.b)
            .map(|s| {
                let m = self.comp(s);
                let mut cols: Vec<Vec<u32>> = Vec::new();
                for (deg, x) in gens {
                    let img = if *deg <= s {
                        self.f_power(*deg, s - deg).apply(r, x)
                    } else {
                        self.v_power(s, deg - s).apply(r, x)
                    };
                    cols.push(m.reduce(r, &img));
                }
                if cols.is_empty() || m.is_zero() {
                    return 0;
                }
                linalg::submodule_canonical(r, &Mat::from_cols(m.rank(), &cols), m).0.length()
            })
            .collect()
    }

    /// `M / p^e M` as a gauge over `W_e`.
    pub fn change_level(&self, e: usize) -> Result<Gauge> {
        if e == 0 || e > self.n() {
            return Err(Error::Precondition(format!("level {e} outside 1..={}", self.n())));
        }
        let r2 = self.ring.at_level(e)?;
        let comps: Vec<WnModule> =
            self.comps.iter().map(|c| WnModule { divisors: c.divisors.iter().map(|&x| x.min(e as u32)).collect() }).collect();
        let tr = |m: &Mat| m.change_level(&self.ring, &r2);
        Ok(Gauge { ring: r2.clone(), a: self.a, b: self.b, comps, f: self.f.iter().map(tr).collect(), v: self.v.iter().map(tr).collect() })
    }

    pub fn reduce_mod_p(&self) -> Gauge {
        self.change_level(1).expect("level 1 always exists")
    }

    /// Invariants preserved by isomorphism: the tightened window, the
    /// components, and the kernel and cokernel types of every `f` and `v`.
    pub fn fingerprint(&self) -> GaugeFingerprint {
        let t = self.tighten();
        let r = &t.ring;
        let mut maps = Vec::new();
        for s in t.a..t.b {
            let f = t.f_at(s);
            let v = t.v_at(s);
            maps.push([
                linalg::kernel(r, &f, t.comp(s), t.comp(s + 1)).0.divisors,
                linalg::cokernel(r, &f, t.comp(s + 1)).module.divisors,
                linalg::kernel(r, &v, t.comp(s + 1), t.comp(s)).0.divisors,
                linalg::cokernel(r, &v, t.comp(s)).module.divisors,
            ]);
        }
        GaugeFingerprint { window: (t.a, t.b), comps: t.comps.iter().map(|c| c.divisors.clone()).collect(), maps }
    }

    pub fn tensor(&self, other: &Gauge) -> Result<Gauge> {
        crate::gauge::tensor(self, other)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GaugeFingerprint {
    pub window: (i64, i64),
    pub comps: Vec<Vec<u32>>,
    pub maps: Vec<[Vec<u32>; 4]>,
}

pub(crate) fn sorted_sum(x: &WnModule, y: &WnModule) -> (WnModule, Vec<usize>) {
    // perm[new] = old index in the concatenation x ++ y
    let all: Vec<u32> = x.divisors.iter().chain(&y.divisors).copied().collect();
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.sort_by(|&i, &j| all[j].cmp(&all[i]).then(i.cmp(&j)));
    (WnModule { divisors: idx.iter().map(|&i| all[i]).collect() }, idx)
}

pub(crate) fn permute(m: &Mat, row_perm: &[usize], col_perm: &[usize]) -> Mat {
    let mut out = Mat::zero(row_perm.len(), col_perm.len());
    for (i, &oi) in row_perm.iter().enumerate() {
        for (j, &oj) in col_perm.iter().enumerate() {
            out.set(i, j, m.get(oi, oj));
        }
    }
    out
}

/// The tensor product, presented in each degree `r` as the sum of the
/// summands `M^i (x) N^{r-i}` over the finite range of `i` that survives the
/// collapse of both tails, modulo the relations `fx (x) y = x (x) fy` and
/// `vx (x) y = x (x) vy` between adjacent summands.
pub fn tensor(m: &Gauge, n: &Gauge) -> Result<Gauge> {
    if *m.ring != *n.ring {
        return Err(Error::ContextMismatch("tensor of gauges over different rings".into()));
    }
    let ring = &m.ring;
    let (lo, hi) = (m.a + n.a, m.b + n.b);
    let range = |r: i64| (m.a.min(r - n.b), m.b.max(r - n.a));
    struct Degree {
        imin: i64,
        offsets: Vec<usize>,
        total: WnModule,
        quotient: linalg::Cokernel,
    }
    let summand = |i: i64, r: i64| tensor_modules(m.comp(i), n.comp(r - i));
    let mut degrees: Vec<Degree> = Vec::new();
    for r in lo..=hi {
        let (imin, imax) = range(r);
        let mut offsets = Vec::new();
        let mut divs = Vec::new();
        for i in imin..=imax {
            offsets.push(divs.len());
            divs.extend(summand(i, r).divisors);
        }
        let total = WnModule { divisors: divs };
        let mut rel_cols: Vec<Vec<u32>> = Vec::new();
        for i in imin..imax {
            let (o0, o1) = (offsets[(i - imin) as usize], offsets[(i + 1 - imin) as usize]);
            // f-relation: x in M^i, y in N^{r-i-1}.
            let fm = m.f_at(i);
            let fn_ = n.f_at(r - i - 1);
            let xm = m.comp(i).rank();
            let yn = n.comp(r - i - 1).rank();
            for x in 0..xm {
                for y in 0..yn {
                    let mut col = vec![0u32; total.rank()];
                    // (f x) (x) y in summand i+1
                    let ny1 = n.comp(r - i - 1).rank();
                    for s in 0..m.comp(i + 1).rank() {
                        add_to(ring, &mut col, o1 + s * ny1 + y, fm.get(s, x));
                    }
                    // - x (x) (f y) in summand i
                    let ny0 = n.comp(r - i).rank();
                    for t in 0..ny0 {
                        add_to(ring, &mut col, o0 + x * ny0 + t, ring.neg(fn_.get(t, y)));
                    }
                    rel_cols.push(col);
                }
            }
            // v-relation: x in M^{i+1}, y in N^{r-i}.
            let vm = m.v_at(i);
            let vn = n.v_at(r - i - 1);
            let xm = m.comp(i + 1).rank();
            let yn = n.comp(r - i).rank();
            for x in 0..xm {
                for y in 0..yn {
                    let mut col = vec![0u32; total.rank()];
                    // (v x) (x) y in summand i
                    for s in 0..m.comp(i).rank() {
                        add_to(ring, &mut col, o0 + s * yn + y, vm.get(s, x));
                    }
                    // - x (x) (v y) in summand i+1
                    let ny1 = n.comp(r - i - 1).rank();
                    for t in 0..ny1 {
                        add_to(ring, &mut col, o1 + x * ny1 + t, ring.neg(vn.get(t, y)));
                    }
                    rel_cols.push(col);
                }
            }
        }
        let rel = if rel_cols.is_empty() { Mat::zero(total.rank(), 0) } else { Mat::from_cols(total.rank(), &rel_cols) };
        let quotient = linalg::cokernel(ring, &rel, &total);
        degrees.push(Degree { imin, offsets, total, quotient });
    }
    // Summand-level maps between consecutive degrees.
    let mut fs = Vec::new();
    let mut vs = Vec::new();
    for r in lo..hi {
        let d0 = &degrees[(r - lo) as usize];
        let d1 = &degrees[(r + 1 - lo) as usize];
        let (i0min, i0max) = range(r);
        let (i1min, i1max) = range(r + 1);
        // f: degree r -> degree r+1
        let mut ft = Mat::zero(d1.total.rank(), d0.total.rank());
        for i in i0min..=i0max {
            let src = d0.offsets[(i - d0.imin) as usize];
            let (mi, nj) = (m.comp(i).rank(), n.comp(r - i).rank());
            if i + 1 <= i1max {
                let dst = d1.offsets[(i + 1 - d1.imin) as usize];
                let block = m.f_at(i).kron(ring, &Mat::identity(nj));
                place(&mut ft, &block, dst, src);
            } else {
                debug_assert!(i >= i1min);
                let dst = d1.offsets[(i - d1.imin) as usize];
                let block = Mat::identity(mi).kron(ring, &n.f_at(r - i));
                place(&mut ft, &block, dst, src);
            }
        }
        // v: degree r+1 -> degree r
        let mut vt = Mat::zero(d0.total.rank(), d1.total.rank());
        for i in i1min..=i1max {
            let src = d1.offsets[(i - d1.imin) as usize];
            let (mi, nj) = (m.comp(i).rank(), n.comp(r + 1 - i).rank());
            if i - 1 >= i0min {
                let dst = d0.offsets[(i - 1 - d0.imin) as usize];
                let block = m.v_at(i - 1).kron(ring, &Mat::identity(nj));
                place(&mut vt, &block, dst, src);
            } else {
                let dst = d0.offsets[(i - d0.imin) as usize];
                let block = Mat::identity(mi).kron(ring, &n.v_at(r - i));
                place(&mut vt, &block, dst, src);
            }
        }
        let induce = |t: &Mat, from: &Degree, to: &Degree| {
            let lifted = t.mul(ring, &from.quotient.section);
            to.quotient.projection.mul(ring, &lifted).reduce_rows(ring, &to.quotient.module.divisors)
        };
        fs.push(induce(&ft, d0, d1));
        vs.push(induce(&vt, d1, d0));
    }
    let comps: Vec<WnModule> = degrees.iter().map(|d| d.quotient.module.clone()).collect();
    let g = Gauge { ring: ring.clone(), a: lo, b: hi, comps, f: fs, v: vs };
    Ok(g.tighten())
}

fn add_to(r: &WittRing, col: &mut [u32], idx: usize, val: u32) {
    col[idx] = r.add(col[idx], val);
}

fn place(dst: &mut Mat, block: &Mat, r0: usize, c0: usize) {
    for i in 0..block.rows {
        for j in 0..block.cols {
            dst.set(r0 + i, c0 + j, block.get(i, j));
        }
    }
}

/// `(sum W_{e_s}) (x) (sum W_{e'_t}) = sum W_{min(e_s, e'_t)}` in Kronecker
/// order (not sorted).
pub fn tensor_modules(x: &WnModule, y: &WnModule) -> WnModule {
    let mut d = Vec::with_capacity(x.rank() * y.rank());
    for &e in &x.divisors {
        for &e2 in &y.divisors {
            d.push(e.min(e2));
        }
    }
    WnModule { divisors: d }
}

/// A family of maps `M^r -> N^r` over a common window.
#[derive(Clone, Debug)]
pub struct GaugeMorphism {
    pub source: Gauge,
    pub target: Gauge,
    pub lo: i64,
    pub maps: Vec<Mat>,
}

impl GaugeMorphism {
    pub fn new(source: Gauge, target: Gauge, lo: i64, maps: Vec<Mat>) -> Result<GaugeMorphism> {
        let hi = lo + maps.len() as i64 - 1;
        if maps.is_empty() || lo > source.a.min(target.a) || hi < source.b.max(target.b) {
            return Err(Error::Shape("morphism window must contain both gauge windows".into()));
        }
        let r = &source.ring;
        for (k, m) in maps.iter().enumerate() {
            let s = lo + k as i64;
            if !linalg::is_valid_map(r, m, source.comp(s), target.comp(s)) {
                return Err(Error::Shape(format!("component map at {s} has the wrong shape")));
            }
        }
        Ok(GaugeMorphism { source, target, lo, maps })
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.maps.len() as i64 - 1
    }

    pub fn at(&self, s: i64) -> &Mat {
        let k = (s.clamp(self.lo, self.hi()) - self.lo) as usize;
        &self.maps[k]
    }

    /// Indices where a square with `f` or `v` fails to commute.
    pub fn non_commuting(&self) -> Vec<i64> {
        let r = &self.source.ring;
        let (g, h) = (&self.source, &self.target);
        let mut bad = Vec::new();
        for s in self.lo - 1..=self.hi() {
            let lhs = linalg::compose(r, self.at(s + 1), &g.f_at(s), h.comp(s + 1));
            let rhs = linalg::compose(r, &h.f_at(s), self.at(s), h.comp(s + 1));
            let lhs2 = linalg::compose(r, self.at(s), &g.v_at(s), h.comp(s));
            let rhs2 = linalg::compose(r, &h.v_at(s), self.at(s + 1), h.comp(s));
            if lhs != rhs || lhs2 != rhs2 {
                bad.push(s);
            }
        }
        bad
    }

    pub fn is_iso(&self) -> bool {
        let r = &self.source.ring;
        (self.lo..=self.hi()).all(|s| linalg::is_iso(r, self.at(s), self.source.comp(s), self.target.comp(s)))
    }

    pub fn kernel(&self) -> Result<(Gauge, Vec<Mat>)> {
        let r = &self.source.ring;
        let g = &self.source;
        let mut comps = Vec::new();
        let mut embs = Vec::new();
        for s in self.lo..=self.hi() {
            let (k, e) = linalg::kernel(r, self.at(s), g.comp(s), self.target.comp(s));
            comps.push(k);
            embs.push(e);
        }
        let mut fs = Vec::new();
        let mut vs = Vec::new();
        for k in 0..comps.len() - 1 {
            let s = self.lo + k as i64;
            let fimg = linalg::compose(r, &g.f_at(s), &embs[k], g.comp(s + 1));
            fs.push(solve_columns(r, &embs[k + 1], &comps[k + 1], g.comp(s + 1), &fimg)?);
            let vimg = linalg::compose(r, &g.v_at(s), &embs[k + 1], g.comp(s));
            vs.push(solve_columns(r, &embs[k], &comps[k], g.comp(s), &vimg)?);
        }
        let kg = Gauge::new(r.clone(), self.lo, comps, fs, vs)?;
        Ok((kg, embs))
    }

    pub fn cokernel(&self) -> Result<(Gauge, Vec<Mat>)> {
        let r = &self.source.ring;
        let h = &self.target;
        let cks: Vec<linalg::Cokernel> = (self.lo..=self.hi()).map(|s| linalg::cokernel(r, self.at(s), h.comp(s))).collect();
        let mut fs = Vec::new();
        let mut vs = Vec::new();
        for k in 0..cks.len() - 1 {
            let s = self.lo + k as i64;
            let f = cks[k + 1].projection.mul(r, &h.f_at(s).mul(r, &cks[k].section));
            fs.push(f.reduce_rows(r, &cks[k + 1].module.divisors));
            let v = cks[k].projection.mul(r, &h.v_at(s).mul(r, &cks[k + 1].section));
            vs.push(v.reduce_rows(r, &cks[k].module.divisors));
        }
        let comps = cks.iter().map(|c| c.module.clone()).collect();
        let projs = cks.iter().map(|c| c.projection.clone()).collect();
        Ok((Gauge::new(r.clone(), self.lo, comps, fs, vs)?, projs))
    }
}

/// Solves `emb X = y` column by column.
fn solve_columns(r: &WittRing, emb: &Mat, dom: &WnModule, cod: &WnModule, y: &Mat) -> Result<Mat> {
    let mut cols = Vec::new();
    for j in 0..y.cols {
        let x = linalg::solve(r, emb, dom, cod, &y.col(j))
            .ok_or_else(|| Error::Precondition("map does not preserve the subobject".into()))?;
        cols.push(x);
    }
    Ok(if cols.is_empty() { Mat::zero(dom.rank(), 0) } else { Mat::from_cols(dom.rank(), &cols) })
}

/// The module `Hom(G, H)` of gauge morphisms, as the kernel of the
/// commutation equations on the entries of `(alpha_r)`.
pub struct HomModule {
    pub lo: i64,
    pub hi: i64,
    pub module: WnModule,
    /// Columns are generators, expressed in the parameter coordinates.
    pub generators: Mat,
    params: Vec<(usize, usize, usize, u32)>,
    source: Gauge,
    target: Gauge,
}

impl HomModule {
    pub fn length(&self) -> u32 {
        self.module.length()
    }

    /// Number of morphisms.
    pub fn count(&self) -> u64 {
        self.module.cardinality(&self.source.ring)
    }

    fn to_morphism(&self, z: &[u32]) -> GaugeMorphism {
        let r = &self.source.ring;
        let mut maps: Vec<Mat> =
            (self.lo..=self.hi).map(|s| Mat::zero(self.target.comp(s).rank(), self.source.comp(s).rank())).collect();
        for (k, &(s, i, j, shift)) in self.params.iter().enumerate() {
            maps[s].set(i, j, r.mul_p_pow(z[k], shift));
        }
        GaugeMorphism { source: self.source.clone(), target: self.target.clone(), lo: self.lo, maps }
    }

    /// Enumerates all morphisms; only sensible for tiny Hom modules.
    pub fn morphisms(&self) -> Vec<GaugeMorphism> {
        let r = &self.source.ring;
        let mut out = Vec::new();
        for c in self.module.elements(r) {
            let z = self.module.reduce(r, &c);
            let param = self.generators.apply(r, &z);
            out.push(self.to_morphism(&param));
        }
        out
    }
}

pub fn hom_module(g: &Gauge, h: &Gauge) -> Result<HomModule> {
    if *g.ring != *h.ring {
        return Err(Error::ContextMismatch("morphisms between gauges over different rings".into()));
    }
    let r = &g.ring;
    let lo = g.a.min(h.a);
    let hi = g.b.max(h.b);
    let mut params = Vec::new();
    let mut pdivs = Vec::new();
    let mut index = std::collections::HashMap::new();
    for s in lo..=hi {
        let (gs, hs) = (g.comp(s), h.comp(s));
        for i in 0..hs.rank() {
            for j in 0..gs.rank() {
                let (e, fdiv) = (gs.divisors[j], hs.divisors[i]);
                index.insert(((s - lo) as usize, i, j), params.len());
                params.push(((s - lo) as usize, i, j, fdiv.saturating_sub(e)));
                pdivs.push(e.min(fdiv));
            }
        }
    }
    let pmod = WnModule { divisors: pdivs };
    // Equations: for each edge s and each entry of the two squares.
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut rdivs = Vec::new();
    for s in lo..hi {
        let (gf, hf, gv, hv) = (g.f_at(s), h.f_at(s), g.v_at(s), h.v_at(s));
        let (g0, g1, h0, h1) = (g.comp(s), g.comp(s + 1), h.comp(s), h.comp(s + 1));
        let k0 = (s - lo) as usize;
        // alpha_{s+1} f_G - f_H alpha_s : G^s -> H^{s+1}
        for i in 0..h1.rank() {
            for j in 0..g0.rank() {
                let mut row = vec![0u32; params.len()];
                for t in 0..g1.rank() {
                    let k = index[&(k0 + 1, i, t)];
                    let c = r.mul_p_pow(gf.get(t, j), params[k].3);
                    row[k] = r.add(row[k], c);
                }
                for t in 0..h0.rank() {
                    let k = index[&(k0, t, j)];
                    let c = r.mul_p_pow(hf.get(i, t), params[k].3);
                    row[k] = r.sub(row[k], c);
                }
                rows.push(row);
                rdivs.push(h1.divisors[i]);
            }
        }
        // alpha_s v_G - v_H alpha_{s+1} : G^{s+1} -> H^s
        for i in 0..h0.rank() {
            for j in 0..g1.rank() {
                let mut row = vec![0u32; params.len()];
                for t in 0..g0.rank() {
                    let k = index[&(k0, i, t)];
                    let c = r.mul_p_pow(gv.get(t, j), params[k].3);
                    row[k] = r.add(row[k], c);
                }
                for t in 0..h1.rank() {
                    let k = index[&(k0 + 1, t, j)];
                    let c = r.mul_p_pow(hv.get(i, t), params[k].3);
                    row[k] = r.sub(row[k], c);
                }
                rows.push(row);
                rdivs.push(h0.divisors[i]);
            }
        }
    }
    let (module, generators) = if rows.is_empty() {
        let id = Mat::identity(pmod.rank());
        linalg::submodule_canonical(r, &id, &pmod)
    } else {
        let eq = Mat::from_rows(&rows);
        let emod = WnModule { divisors: rdivs };
        if pmod.rank() == 0 {
            (WnModule::zero(), Mat::zero(0, 0))
        } else {
            linalg::kernel(r, &eq.reduce_rows(r, &emod.divisors), &pmod, &emod)
        }
    };
    Ok(HomModule { lo, hi, module, generators, params, source: g.clone(), target: h.clone() })
}

/// Brute-force isomorphism search through `Hom(G, H)`.
pub fn find_isomorphism(g: &Gauge, h: &Gauge, limit: u64) -> Result<Option<GaugeMorphism>> {
    if g.fingerprint() != h.fingerprint() {
        return Ok(None);
    }
    let hom = hom_module(g, h)?;
    if hom.count() > limit {
        return Err(Error::Precondition(format!("Hom module has {} elements, above the search limit", hom.count())));
    }
    Ok(hom.morphisms().into_iter().find(|m| m.is_iso()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k0(n: usize) -> Gauge {
        Gauge::free(WittRing::new(2, 1, n).unwrap(), 0, 1)
    }

    #[test]
    fn free_gauge_is_valid() {
        let g = k0(1);
        assert!(g.validate().unwrap().is_valid());
        assert!(Gauge::zero(g.ring.clone()).is_valid());
        let r = WittRing::new(2, 1, 2).unwrap();
        let m = WnModule::free(1, 2);
        let bad = Gauge::new(r, 0, vec![m.clone(), m], vec![Mat::identity(1)], vec![Mat::identity(1)]).unwrap();
        let rep = bad.validate().unwrap();
        assert_eq!(rep.fv_violations, vec![0]);
        assert_eq!(rep.vf_violations, vec![0]);
    }

    #[test]
    fn hom_from_free_counts_component() {
        let r = WittRing::new(2, 1, 2).unwrap();
        let m = WnModule::free(1, 2);
        let p = r.p_pow(1);
        let g = Gauge::new(r.clone(), 0, vec![m.clone(), m], vec![Mat::from_rows(&[vec![p]])], vec![Mat::identity(1)]).unwrap();
        assert!(g.is_valid());
        for i in -2..=1 {
            let free = Gauge::free(r.clone(), i, 1);
            let hom = hom_module(&free, &g).unwrap();
            assert_eq!(hom.length(), g.comp(-i).length());
        }
    }

    #[test]
    fn tensor_of_twists() {
        let r = WittRing::new(2, 1, 1).unwrap();
        let a = Gauge::free(r.clone(), 1, 1);
        let b = Gauge::free(r.clone(), 2, 1);
        let t = tensor(&a, &b).unwrap();
        assert_eq!(t.window(), (-3, -3));
        assert_eq!(t.comps[0].divisors, vec![1]);
    }

    #[test]
    fn nakayama_free() {
        let r = WittRing::new(3, 1, 2).unwrap();
        let g = Gauge::free(r, -1, 2);
        let gens = g.minimal_generators();
        assert_eq!(gens.len(), 2);
        assert!(gens.iter().all(|(d, _)| *d == 1));
    }
}
