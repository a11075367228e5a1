//! Truncated Witt vectors `W_n(F_q)`.
//!
//! An element is stored as a `u32` code `sum_i c_i q^i`, where `c_i` is the
//! field code of the `i`-th Witt coordinate. The universal structure
//! polynomials are computed from the ghost recursion and cached per `(p, n)`.
//! Arithmetic runs through the Teichmuller expansion
//! `(a_0, a_1, ...) = sum_i p^i [a_i^{1/p^i}]` into the Galois ring
//! `(Z/p^n)[X]/(f)`, with full operation tables for small rings; the
//! polynomial evaluator is kept as an independent path for cross-checks.

use crate::error::{Error, Result};
use crate::field::Field;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

const TABLE_LIMIT: u64 = 1024;
const UNARY_LIMIT: u64 = 1 << 16;
const SIZE_LIMIT: u64 = 1 << 31;

/// Integer polynomial in the variables `x_0..x_{n-1}, y_0..y_{n-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, BigInt>,
}

impl IntPoly {
    fn zero(nvars: usize) -> IntPoly {
        IntPoly { nvars, terms: BTreeMap::new() }
    }

    fn monomial(nvars: usize, var: usize, exp: u32, coef: BigInt) -> IntPoly {
        let mut e = vec![0u32; nvars];
        e[var] = exp;
        let mut terms = BTreeMap::new();
        if !coef.is_zero() {
            terms.insert(e, coef);
        }
        IntPoly { nvars, terms }
    }

    fn add_assign(&mut self, other: &IntPoly, scale: &BigInt) {
        for (e, c) in &other.terms {
            let entry = self.terms.entry(e.clone()).or_insert_with(BigInt::zero);
            *entry += c * scale;
        }
        self.terms.retain(|_, c| !c.is_zero());
    }

    fn reduce(&mut self, modulus: Option<&BigInt>) {
        if let Some(m) = modulus {
            for c in self.terms.values_mut() {
                *c = c.mod_floor(m);
            }
        }
        self.terms.retain(|_, c| !c.is_zero());
    }

    fn mul(&self, other: &IntPoly, modulus: Option<&BigInt>) -> IntPoly {
        let mut acc: HashMap<Vec<u32>, BigInt> = HashMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert_with(BigInt::zero) += c1 * c2;
            }
        }
        let mut out = IntPoly { nvars: self.nvars, terms: acc.into_iter().collect() };
        out.reduce(modulus);
        out
    }

    fn pow(&self, mut e: u64, modulus: Option<&BigInt>) -> IntPoly {
        let mut one = IntPoly::zero(self.nvars);
        one.terms.insert(vec![0; self.nvars], BigInt::one());
        let mut result = one;
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base, modulus);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base, modulus);
            }
        }
        result
    }

    pub fn eval(&self, values: &[BigInt]) -> BigInt {
        let mut total = BigInt::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (v, &k) in values.iter().zip(e) {
                if k > 0 {
                    t *= num_traits::pow(v.clone(), k as usize);
                }
            }
            total += t;
        }
        total
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the monomial with the given exponent vector.
    pub fn coefficient(&self, exps: &[u32]) -> BigInt {
        self.terms.get(exps).cloned().unwrap_or_default()
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let half = self.nvars / 2;
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    let name = if i < half { format!("x{i}") } else { format!("y{}", i - half) };
                    if k == 1 {
                        name
                    } else {
                        format!("{name}^{k}")
                    }
                })
                .collect();
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{mag}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Addition polynomials `S_i` and multiplication polynomials `P_i`.
#[derive(Clone, Debug)]
pub struct StructurePolynomials {
    pub p: u32,
    pub n: usize,
    pub sum: Vec<IntPoly>,
    pub prod: Vec<IntPoly>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GhostOp {
    Add,
    Mul,
}

fn ghost(p: u32, n: usize, i: usize, offset: usize, modulus: Option<&BigInt>) -> IntPoly {
    let nvars = 2 * n;
    let mut w = IntPoly::zero(nvars);
    for k in 0..=i {
        let exp = (p as u64).pow((i - k) as u32) as u32;
        let coef = BigInt::from(p).pow(k as u32);
        w.add_assign(&IntPoly::monomial(nvars, offset + k, exp, BigInt::one()), &coef);
    }
    w.reduce(modulus);
    w
}

fn ghost_recursion(p: u32, n: usize, op: GhostOp, exact: bool) -> Vec<IntPoly> {
    let bp = BigInt::from(p);
    let mut out: Vec<IntPoly> = Vec::with_capacity(n);
    for i in 0..n {
        let modulus = if exact { None } else { Some(bp.pow(i as u32 + 1)) };
        let wx = ghost(p, n, i, 0, modulus.as_ref());
        let wy = ghost(p, n, i, n, modulus.as_ref());
        let mut rhs = match op {
            GhostOp::Add => {
                let mut t = wx.clone();
                t.add_assign(&wy, &BigInt::one());
                t
            }
            GhostOp::Mul => wx.mul(&wy, modulus.as_ref()),
        };
        for (k, sk) in out.iter().enumerate() {
            let m = if exact { None } else { Some(bp.pow((i + 1 - k) as u32)) };
            let e = (p as u64).pow((i - k) as u32);
            let power = sk.pow(e, m.as_ref());
            rhs.add_assign(&power, &(-bp.pow(k as u32)));
        }
        rhs.reduce(modulus.as_ref());
        let div = bp.pow(i as u32);
        let mut si = IntPoly::zero(2 * n);
        for (e, c) in rhs.terms {
            let (q, r) = c.div_mod_floor(&div);
            assert!(r.is_zero(), "ghost recursion must divide exactly");
            si.terms.insert(e, q);
        }
        if !exact {
            si.reduce(Some(&bp));
        }
        out.push(si);
    }
    out
}

type PolyCache = RwLock<HashMap<(u32, usize, bool), Arc<StructurePolynomials>>>;

fn poly_cache() -> &'static PolyCache {
    static CACHE: OnceLock<PolyCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cached_polynomials(p: u32, n: usize, exact: bool) -> Arc<StructurePolynomials> {
    if let Some(hit) = poly_cache().read().unwrap().get(&(p, n, exact)) {
        return hit.clone();
    }
    let sp = Arc::new(StructurePolynomials {
        p,
        n,
        sum: ghost_recursion(p, n, GhostOp::Add, exact),
        prod: ghost_recursion(p, n, GhostOp::Mul, exact),
    });
    poly_cache().write().unwrap().entry((p, n, exact)).or_insert(sp).clone()
}

/// Exact integer structure polynomials. Cost grows quickly with `n`; the
/// coefficient-mod-`p` versions used by rings are cheaper.
pub fn witt_structure_polynomials(p: u32, n: usize) -> Result<Arc<StructurePolynomials>> {
    if !crate::field::is_prime(p) {
        return Err(Error::Context(format!("{p} is not prime")));
    }
    if n == 0 {
        return Err(Error::Context("Witt length must be at least 1".into()));
    }
    Ok(cached_polynomials(p, n, true))
}

/// Structure polynomials with coefficients reduced mod `p`, which is all that
/// evaluation over a field of characteristic `p` needs.
pub fn witt_structure_polynomials_mod_p(p: u32, n: usize) -> Result<Arc<StructurePolynomials>> {
    if !crate::field::is_prime(p) {
        return Err(Error::Context(format!("{p} is not prime")));
    }
    if n == 0 {
        return Err(Error::Context("Witt length must be at least 1".into()));
    }
    Ok(cached_polynomials(p, n, false))
}

/// Context for `W_n(F_{p^d})`.
pub struct WittRing {
    field: Arc<Field>,
    n: usize,
    q: u32,
    size: u64,
    pn: u64,
    teich: Vec<Vec<u64>>,
    add_t: Option<Vec<u16>>,
    mul_t: Option<Vec<u16>>,
    neg_t: Option<Vec<u32>>,
    inv_t: Option<Vec<u32>>,
}

impl fmt::Debug for WittRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W_{}({:?})", self.n, self.field)
    }
}

impl PartialEq for WittRing {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && *self.field == *other.field
    }
}
impl Eq for WittRing {}

type RingCache = RwLock<HashMap<(u32, Vec<u32>, usize), Arc<WittRing>>>;

fn ring_cache() -> &'static RingCache {
    static CACHE: OnceLock<RingCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

type FieldCache = RwLock<HashMap<(u32, Vec<u32>), Arc<Field>>>;

fn field_cache() -> &'static FieldCache {
    static CACHE: OnceLock<FieldCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Shared field context for `(p, minpoly)`.
pub fn shared_field(p: u32, minpoly: &[u32]) -> Result<Arc<Field>> {
    let key = (p, minpoly.to_vec());
    if let Some(f) = field_cache().read().unwrap().get(&key) {
        return Ok(f.clone());
    }
    let f = Arc::new(Field::with_minpoly(p, minpoly.to_vec())?);
    Ok(field_cache().write().unwrap().entry(key).or_insert(f).clone())
}

impl WittRing {
    pub fn new(p: u32, d: u32, n: usize) -> Result<Arc<WittRing>> {
        if !crate::field::is_prime(p) {
            return Err(Error::Context(format!("{p} is not prime")));
        }
        if d == 0 {
            return Err(Error::Context("extension degree must be positive".into()));
        }
        let minpoly = crate::field::default_minpoly(p, d);
        WittRing::with_minpoly(p, &minpoly, n)
    }

    pub fn with_minpoly(p: u32, minpoly: &[u32], n: usize) -> Result<Arc<WittRing>> {
        if n == 0 {
            return Err(Error::Context("Witt length must be at least 1".into()));
        }
        let key = (p, minpoly.to_vec(), n);
        if let Some(r) = ring_cache().read().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let field = shared_field(p, minpoly)?;
        let ring = Arc::new(WittRing::build(field, n)?);
        Ok(ring_cache().write().unwrap().entry(key).or_insert(ring).clone())
    }

    /// The same coefficient field at another truncation length.
    pub fn at_level(&self, n: usize) -> Result<Arc<WittRing>> {
        WittRing::with_minpoly(self.field.p(), self.field.minpoly(), n)
    }

    fn build(field: Arc<Field>, n: usize) -> Result<WittRing> {
        let q = field.order();
        let size = (q as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
        if size > SIZE_LIMIT {
            return Err(Error::Context(format!("W_{n}(F_{q}) has too many elements for 32-bit codes")));
        }
        let pn = (field.p() as u64).pow(n as u32);
        let mut ring = WittRing { field, n, q, size, pn, teich: vec![], add_t: None, mul_t: None, neg_t: None, inv_t: None };
        ring.teich = (0..q).map(|c| ring.teichmuller_gr(c)).collect();
        if size <= UNARY_LIMIT {
            let neg: Vec<u32> = (0..size as u32).map(|a| ring.neg_slow(a)).collect();
            ring.neg_t = Some(neg);
        }
        if size <= TABLE_LIMIT {
            let s = size as usize;
            let gr: Vec<Vec<u64>> = (0..s as u32).map(|a| ring.to_gr(a)).collect();
            let mut add = vec![0u16; s * s];
            let mut mul = vec![0u16; s * s];
            for a in 0..s {
                for b in 0..s {
                    add[a * s + b] = ring.from_gr(&ring.gr_add(&gr[a], &gr[b])) as u16;
                    mul[a * s + b] = ring.from_gr(&ring.gr_mul(&gr[a], &gr[b])) as u16;
                }
            }
            ring.add_t = Some(add);
            ring.mul_t = Some(mul);
        }
        if size <= UNARY_LIMIT {
            let inv: Vec<u32> = (0..size as u32).map(|a| ring.inv_slow(a).unwrap_or(0)).collect();
            ring.inv_t = Some(inv);
        }
        Ok(ring)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn p(&self) -> u32 {
        self.field.p()
    }
    pub fn d(&self) -> u32 {
        self.field.degree()
    }
    pub fn n(&self) -> usize {
        self.n
    }
    /// Number of elements `q^n`.
    pub fn size(&self) -> u64 {
        self.size
    }
    pub fn residue_order(&self) -> u32 {
        self.q
    }
    pub fn has_tables(&self) -> bool {
        self.add_t.is_some()
    }

    // Galois ring model: vectors of d coefficients mod p^n.

    fn gr_add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.pn).collect()
    }

    fn gr_sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + self.pn - y) % self.pn).collect()
    }

    fn gr_mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let d = self.d() as usize;
        let m = self.pn as u128;
        let mut prod = vec![0u128; 2 * d - 1];
        for i in 0..d {
            if a[i] == 0 {
                continue;
            }
            for j in 0..d {
                prod[i + j] = (prod[i + j] + a[i] as u128 * b[j] as u128) % m;
            }
        }
        let f = self.field.minpoly();
        for k in (d..2 * d - 1).rev() {
            let c = prod[k];
            if c != 0 {
                for i in 0..d {
                    let t = c * f[i] as u128 % m;
                    prod[k - d + i] = (prod[k - d + i] + m - t) % m;
                }
            }
        }
        prod[..d].iter().map(|&c| c as u64).collect()
    }

    fn gr_pow(&self, a: &[u64], mut e: u64) -> Vec<u64> {
        let d = self.d() as usize;
        let mut r = vec![0u64; d];
        r[0] = 1 % self.pn;
        let mut b = a.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                r = self.gr_mul(&r, &b);
            }
            e >>= 1;
            if e > 0 {
                b = self.gr_mul(&b, &b);
            }
        }
        r
    }

    fn teichmuller_gr(&self, c: u32) -> Vec<u64> {
        let lift: Vec<u64> = self.field.digits(c).into_iter().map(|x| x as u64).collect();
        let e = (self.q as u64).pow(self.n as u32 - 1);
        self.gr_pow(&lift, e)
    }

    fn to_gr(&self, code: u32) -> Vec<u64> {
        let d = self.d() as usize;
        let mut acc = vec![0u64; d];
        let mut pk = 1u64;
        let mut c = code;
        for i in 0..self.n {
            let a = c % self.q;
            c /= self.q;
            if a != 0 {
                let root = self.field.frob_pow(a, -(i as i64));
                for (slot, t) in acc.iter_mut().zip(&self.teich[root as usize]) {
                    *slot = (*slot + pk * t) % self.pn;
                }
            }
            pk *= self.p() as u64;
        }
        acc
    }

    fn from_gr(&self, x: &[u64]) -> u32 {
        let p = self.p() as u64;
        let mut cur = x.to_vec();
        let mut code = 0u32;
        let mut place = 1u32;
        for i in 0..self.n {
            let digits: Vec<u32> = cur.iter().map(|&c| (c % p) as u32).collect();
            let r = self.field.from_digits(&digits);
            code += self.field.frob_pow(r, i as i64) * place;
            if i + 1 < self.n {
                place *= self.q;
                cur = self.gr_sub(&cur, &self.teich[r as usize]);
                for c in cur.iter_mut() {
                    debug_assert_eq!(*c % p, 0);
                    *c /= p;
                }
            }
        }
        code
    }

    /// Coordinates of `a` over `Z/p^n` in the Galois ring basis
    /// `1, X, ..., X^{d-1}`.
    pub fn to_galois(&self, a: u32) -> Vec<u64> {
        self.to_gr(a)
    }

    pub fn from_galois(&self, x: &[u64]) -> u32 {
        let reduced: Vec<u64> = x.iter().map(|&c| c % self.pn).collect();
        self.from_gr(&reduced)
    }

    /// `p^n`.
    pub fn modulus(&self) -> u64 {
        self.pn
    }

    // Coordinates.

    pub fn coords(&self, code: u32) -> Vec<u32> {
        let mut c = code;
        (0..self.n)
            .map(|_| {
                let a = c % self.q;
                c /= self.q;
                a
            })
            .collect()
    }

    pub fn from_coords(&self, coords: &[u32]) -> Result<u32> {
        if coords.len() != self.n {
            return Err(Error::Shape(format!("expected {} Witt coordinates, got {}", self.n, coords.len())));
        }
        if coords.iter().any(|&c| c >= self.q) {
            return Err(Error::Schema("Witt coordinate outside the residue field".into()));
        }
        Ok(coords.iter().rev().fold(0u32, |acc, &c| acc * self.q + c))
    }

    #[inline]
    pub fn coord(&self, code: u32, i: usize) -> u32 {
        (code / self.q.pow(i as u32)) % self.q
    }

    // Ring operations.

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        match &self.add_t {
            Some(t) => t[a as usize * self.size as usize + b as usize] as u32,
            None => self.from_gr(&self.gr_add(&self.to_gr(a), &self.to_gr(b))),
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        if a == 1 {
            return b;
        }
        if b == 1 {
            return a;
        }
        match &self.mul_t {
            Some(t) => t[a as usize * self.size as usize + b as usize] as u32,
            None => self.from_gr(&self.gr_mul(&self.to_gr(a), &self.to_gr(b))),
        }
    }

    fn neg_slow(&self, a: u32) -> u32 {
        let g = self.to_gr(a);
        let z = vec![0u64; g.len()];
        self.from_gr(&self.gr_sub(&z, &g))
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        match &self.neg_t {
            Some(t) => t[a as usize],
            None => self.neg_slow(a),
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn from_integer(&self, m: i64) -> u32 {
        let d = self.d() as usize;
        let mut g = vec![0u64; d];
        g[0] = m.rem_euclid(self.pn as i64) as u64;
        self.from_gr(&g)
    }

    pub fn teichmuller(&self, c: u32) -> u32 {
        c
    }

    /// Componentwise `c -> c^p`.
    pub fn frob(&self, a: u32) -> u32 {
        self.frob_pow(a, 1)
    }

    /// `sigma^s` for any integer `s`.
    pub fn frob_pow(&self, a: u32, s: i64) -> u32 {
        if a == 0 || self.d() == 1 || s.rem_euclid(self.d() as i64) == 0 {
            return a;
        }
        let coords: Vec<u32> = self.coords(a).into_iter().map(|c| self.field.frob_pow(c, s)).collect();
        coords.iter().rev().fold(0u32, |acc, &c| acc * self.q + c)
    }

    /// Verschiebung: shifts coordinates one step right.
    pub fn verschiebung(&self, a: u32) -> u32 {
        (a % self.q.pow(self.n as u32 - 1)) * self.q
    }

    /// `p * a = V(sigma(a))`.
    pub fn mul_p(&self, a: u32) -> u32 {
        self.verschiebung(self.frob(a))
    }

    pub fn mul_p_pow(&self, a: u32, k: u32) -> u32 {
        if k as usize >= self.n {
            return 0;
        }
        let shifted = (a % self.q.pow(self.n as u32 - k)) * self.q.pow(k);
        self.frob_pow(shifted, k as i64)
    }

    /// Number of leading zero Witt coordinates; `n` for zero.
    pub fn val(&self, a: u32) -> u32 {
        if a == 0 {
            return self.n as u32;
        }
        let mut c = a;
        let mut v = 0;
        while c % self.q == 0 {
            c /= self.q;
            v += 1;
        }
        v
    }

    /// Exact division by `p^k`; requires `val(a) >= k`. The top `k`
    /// coordinates of the result are zero.
    pub fn div_p_pow(&self, a: u32, k: u32) -> u32 {
        debug_assert!(self.val(a) >= k);
        if k == 0 {
            return a;
        }
        let shifted = a / self.q.pow(k);
        self.frob_pow(shifted, -(k as i64))
    }

    /// `p^k` as an element.
    pub fn p_pow(&self, k: u32) -> u32 {
        self.mul_p_pow(1, k)
    }

    pub fn is_unit(&self, a: u32) -> bool {
        a % self.q != 0
    }

    fn inv_slow(&self, a: u32) -> Option<u32> {
        if !self.is_unit(a) {
            return None;
        }
        let order = (self.q as u64 - 1) * (self.q as u64).pow(self.n as u32 - 1);
        Some(self.from_gr(&self.gr_pow(&self.to_gr(a), order - 1)))
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if !self.is_unit(a) {
            return None;
        }
        match &self.inv_t {
            Some(t) => Some(t[a as usize]),
            None => self.inv_slow(a),
        }
    }

    pub fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut r = 1u32;
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            e >>= 1;
            if e > 0 {
                b = self.mul(b, b);
            }
        }
        r
    }

    /// Reduction `W_n -> W_e`, which keeps the first `e` coordinates.
    pub fn truncate(&self, a: u32, e: usize) -> u32 {
        if e >= self.n {
            a
        } else {
            a % self.q.pow(e as u32)
        }
    }

    /// All elements with `val >= k`.
    pub fn ideal_elements(&self, k: u32) -> impl Iterator<Item = u32> + '_ {
        let step = self.q.pow(k.min(self.n as u32));
        let count = (self.size / step as u64) as u32;
        (0..count).map(move |c| c * step)
    }

    /// Addition through the structure polynomials, independent of the
    /// Galois ring model.
    pub fn add_by_polynomials(&self, a: u32, b: u32) -> u32 {
        let sp = cached_polynomials(self.p(), self.n, false);
        self.eval_structure(&sp.sum, a, b)
    }

    pub fn mul_by_polynomials(&self, a: u32, b: u32) -> u32 {
        let sp = cached_polynomials(self.p(), self.n, false);
        self.eval_structure(&sp.prod, a, b)
    }

    fn eval_structure(&self, polys: &[IntPoly], a: u32, b: u32) -> u32 {
        let mut vals = self.coords(a);
        vals.extend(self.coords(b));
        let k = &self.field;
        let out: Vec<u32> = polys
            .iter()
            .map(|poly| {
                let mut acc = 0u32;
                for (e, c) in &poly.terms {
                    let mut t = k.from_int(c.to_i64().expect("coefficient reduced mod p"));
                    for (v, &ex) in vals.iter().zip(e) {
                        if ex > 0 {
                            t = k.mul(t, k.pow(*v, ex as u64));
                        }
                    }
                    acc = k.add(acc, t);
                }
                acc
            })
            .collect();
        out.iter().rev().fold(0u32, |acc, &c| acc * self.q + c)
    }
}

/// An element of `W_n(F_q)` bundled with its ring.
#[derive(Clone)]
pub struct WittElem {
    ring: Arc<WittRing>,
    code: u32,
}

impl fmt::Debug for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comps: Vec<Vec<u32>> = self.components();
        write!(f, "{comps:?}")
    }
}

impl PartialEq for WittElem {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code && *self.ring == *other.ring
    }
}
impl Eq for WittElem {}

impl WittElem {
    pub fn from_code(ring: Arc<WittRing>, code: u32) -> WittElem {
        assert!((code as u64) < ring.size());
        WittElem { ring, code }
    }

    pub fn zero(ring: Arc<WittRing>) -> WittElem {
        WittElem { ring, code: 0 }
    }

    pub fn one(ring: Arc<WittRing>) -> WittElem {
        WittElem { ring, code: 1 }
    }

    /// From Witt coordinates given as field codes.
    pub fn from_coords(ring: Arc<WittRing>, coords: &[u32]) -> Result<WittElem> {
        let code = ring.from_coords(coords)?;
        Ok(WittElem { ring, code })
    }

    /// From Witt coordinates given as `F_p`-coordinate vectors.
    pub fn from_components(ring: Arc<WittRing>, comps: &[Vec<u32>]) -> Result<WittElem> {
        let d = ring.d() as usize;
        let mut codes = Vec::with_capacity(comps.len());
        for c in comps {
            if c.len() != d || c.iter().any(|&x| x >= ring.p()) {
                return Err(Error::Schema("malformed field coordinates".into()));
            }
            codes.push(ring.field().from_digits(c));
        }
        WittElem::from_coords(ring, &codes)
    }

    pub fn from_integer(ring: Arc<WittRing>, m: i64) -> WittElem {
        let code = ring.from_integer(m);
        WittElem { ring, code }
    }

    pub fn teichmuller(ring: Arc<WittRing>, c: &crate::field::FqElem) -> Result<WittElem> {
        if **c.field() != **ring.field() {
            return Err(Error::ContextMismatch("field of the Teichmuller argument".into()));
        }
        Ok(WittElem { code: ring.teichmuller(c.code()), ring })
    }

    pub fn ring(&self) -> &Arc<WittRing> {
        &self.ring
    }
    pub fn code(&self) -> u32 {
        self.code
    }
    pub fn coords(&self) -> Vec<u32> {
        self.ring.coords(self.code)
    }
    pub fn components(&self) -> Vec<Vec<u32>> {
        self.coords().into_iter().map(|c| self.ring.field().digits(c)).collect()
    }

    fn check(&self, other: &WittElem) -> Result<()> {
        if *self.ring != *other.ring {
            return Err(Error::ContextMismatch(format!("{:?} vs {:?}", self.ring, other.ring)));
        }
        Ok(())
    }

    fn wrap(&self, code: u32) -> WittElem {
        WittElem { ring: self.ring.clone(), code }
    }

    pub fn add(&self, other: &WittElem) -> Result<WittElem> {
        self.check(other)?;
        Ok(self.wrap(self.ring.add(self.code, other.code)))
    }
    pub fn sub(&self, other: &WittElem) -> Result<WittElem> {
        self.check(other)?;
        Ok(self.wrap(self.ring.sub(self.code, other.code)))
    }
    pub fn mul(&self, other: &WittElem) -> Result<WittElem> {
        self.check(other)?;
        Ok(self.wrap(self.ring.mul(self.code, other.code)))
    }
    pub fn neg(&self) -> WittElem {
        self.wrap(self.ring.neg(self.code))
    }
    pub fn inv(&self) -> Option<WittElem> {
        self.ring.inv(self.code).map(|c| self.wrap(c))
    }
    pub fn frobenius(&self) -> WittElem {
        self.wrap(self.ring.frob(self.code))
    }
    pub fn verschiebung(&self) -> WittElem {
        self.wrap(self.ring.verschiebung(self.code))
    }
    pub fn valuation(&self) -> u32 {
        self.ring.val(self.code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_structure_polynomials() {
        let sp = witt_structure_polynomials(2, 2).unwrap();
        assert_eq!(sp.sum[0].to_string(), "x0 + y0");
        assert_eq!(sp.prod[0].to_string(), "x0*y0");
        // S_1 = x_1 + y_1 - x_0 y_0
        assert_eq!(sp.sum[1].num_terms(), 3);
        assert_eq!(sp.sum[1].coefficient(&[1, 0, 1, 0]), BigInt::from(-1));
        assert_eq!(sp.sum[1].coefficient(&[0, 1, 0, 0]), BigInt::from(1));
        let sp3 = witt_structure_polynomials(3, 2).unwrap();
        assert_eq!(sp3.sum[1].coefficient(&[2, 0, 1, 0]), BigInt::from(-1));
        assert_eq!(sp3.sum[1].coefficient(&[1, 0, 2, 0]), BigInt::from(-1));
        assert_eq!(sp3.sum[1].num_terms(), 4);
    }

    #[test]
    fn exact_term_counts() {
        let sp = witt_structure_polynomials(2, 4).unwrap();
        let s: Vec<usize> = sp.sum.iter().map(|x| x.num_terms()).collect();
        let m: Vec<usize> = sp.prod.iter().map(|x| x.num_terms()).collect();
        assert_eq!(s, vec![2, 3, 8, 40]);
        assert_eq!(m, vec![1, 3, 9, 51]);
        let sp = witt_structure_polynomials_mod_p(2, 4).unwrap();
        let s: Vec<usize> = sp.sum.iter().map(|x| x.num_terms()).collect();
        assert_eq!(s, vec![2, 3, 7, 29]);
    }

    #[test]
    fn frozen_examples() {
        let w = WittRing::new(2, 1, 2).unwrap();
        let a = w.from_coords(&[1, 0]).unwrap();
        assert_eq!(w.coords(w.add(a, a)), vec![0, 1]);
        let b = w.from_coords(&[1, 1]).unwrap();
        assert_eq!(w.coords(w.mul(a, b)), vec![1, 1]);
        let w4 = WittRing::new(2, 2, 2).unwrap();
        let g = w4.field().generator();
        let x = w4.from_coords(&[g, 0]).unwrap();
        assert_eq!(w4.coords(w4.frob(x)), vec![w4.field().mul(g, g), 0]);
    }

    #[test]
    fn tables_agree_with_polynomials() {
        for (p, d, n) in [(2, 1, 3), (2, 2, 2), (3, 1, 2), (2, 2, 3), (3, 2, 2)] {
            let w = WittRing::new(p, d, n).unwrap();
            for a in 0..w.size() as u32 {
                for b in 0..w.size() as u32 {
                    assert_eq!(w.add(a, b), w.add_by_polynomials(a, b));
                    assert_eq!(w.mul(a, b), w.mul_by_polynomials(a, b));
                }
            }
        }
    }

    #[test]
    fn large_ring_without_tables() {
        let w = WittRing::new(3, 2, 4).unwrap();
        assert!(!w.has_tables());
        let mut x = 12345u32;
        for _ in 0..200 {
            x = (x.wrapping_mul(2654435761) >> 3) % w.size() as u32;
            let y = (x.wrapping_mul(40503) + 7) % w.size() as u32;
            assert_eq!(w.add(x, y), w.add_by_polynomials(x, y));
            assert_eq!(w.mul(x, y), w.mul_by_polynomials(x, y));
            assert_eq!(w.add(x, w.neg(x)), 0);
            if let Some(i) = w.inv(x) {
                assert_eq!(w.mul(x, i), 1);
            }
        }
    }

    #[test]
    fn p_multiplication_and_division() {
        let w = WittRing::new(3, 2, 3).unwrap();
        let p = w.from_integer(3);
        for a in 0..w.size() as u32 {
            assert_eq!(w.mul(p, a), w.mul_p(a));
            assert_eq!(w.mul(w.p_pow(2), a), w.mul_p_pow(a, 2));
            if w.val(a) >= 1 {
                assert_eq!(w.mul_p(w.div_p_pow(a, 1)), a);
            }
        }
    }
}
