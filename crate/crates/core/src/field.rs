//! Finite fields `F_{p^d}` in a polynomial basis.
//!
//! Elements are packed into a `u32` code whose base-`p` digits are the
//! coordinates in the basis `1, X, ..., X^{d-1}` modulo the defining
//! polynomial. Multiplication goes through discrete log tables.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

const MAX_ORDER: u64 = 1 << 20;

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2u32;
    while (i as u64) * (i as u64) <= p as u64 {
        if p % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

fn poly_trim(a: &mut Vec<u32>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let db = b.len() - 1;
    let lead_inv = inv_mod(b[db], p);
    while r.len() > db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let c = (r[dr] as u64 * lead_inv as u64 % p as u64) as u32;
        if c != 0 {
            for i in 0..=db {
                let t = (c as u64 * b[i] as u64 % p as u64) as u32;
                r[dr - db + i] = (r[dr - db + i] + p - t) % p;
            }
        }
        r.pop();
        poly_trim(&mut r);
    }
    r
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let mut r = 1u64;
    let mut b = a as u64 % p as u64;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

/// Irreducibility over `F_p` by trial division with all monic polynomials of
/// degree at most half the degree.
pub fn is_irreducible(f: &[u32], p: u32) -> bool {
    let d = f.len() - 1;
    if d == 0 || f[d] == 0 {
        return false;
    }
    if d == 1 {
        return true;
    }
    for e in 1..=d / 2 {
        let count = (p as u64).pow(e as u32);
        for code in 0..count {
            let mut g = vec![0u32; e + 1];
            let mut c = code;
            for coef in g.iter_mut().take(e) {
                *coef = (c % p as u64) as u32;
                c /= p as u64;
            }
            g[e] = 1;
            let r = poly_rem(f, &g, p);
            if r.len() == 1 && r[0] == 0 {
                return false;
            }
        }
    }
    true
}

/// Smallest monic irreducible polynomial of degree `d`, ordered by the code of
/// its lower coefficients.
pub fn default_minpoly(p: u32, d: u32) -> Vec<u32> {
    if d == 1 {
        return vec![0, 1];
    }
    let count = (p as u64).pow(d);
    for code in 0..count {
        let mut f = vec![0u32; d as usize + 1];
        let mut c = code;
        for coef in f.iter_mut().take(d as usize) {
            *coef = (c % p as u64) as u32;
            c /= p as u64;
        }
        f[d as usize] = 1;
        if is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

pub struct Field {
    p: u32,
    d: u32,
    q: u32,
    minpoly: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
    frob_table: Vec<u32>,
    frob_inv_table: Vec<u32>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{} mod {:?}", self.p, self.d, self.minpoly)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.minpoly == other.minpoly
    }
}
impl Eq for Field {}

impl Field {
    pub fn new(p: u32, d: u32) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::Context(format!("{p} is not prime")));
        }
        if d == 0 {
            return Err(Error::Context("extension degree must be positive".into()));
        }
        Field::with_minpoly(p, default_minpoly(p, d))
    }

    pub fn with_minpoly(p: u32, minpoly: Vec<u32>) -> Result<Field> {
        if !is_prime(p) {
            return Err(Error::Context(format!("{p} is not prime")));
        }
        if minpoly.len() < 2 || *minpoly.last().unwrap() != 1 {
            return Err(Error::Context("defining polynomial must be monic of degree >= 1".into()));
        }
        if minpoly.iter().any(|&c| c >= p) {
            return Err(Error::Context("defining polynomial coefficients must be reduced mod p".into()));
        }
        let d = (minpoly.len() - 1) as u32;
        let q64 = (p as u64).pow(d);
        if q64 > MAX_ORDER {
            return Err(Error::Context(format!("field of order {q64} is too large")));
        }
        if !is_irreducible(&minpoly, p) {
            return Err(Error::Context(format!("{minpoly:?} is reducible mod {p}")));
        }
        let q = q64 as u32;
        let mut field = Field { p, d, q, minpoly, exp: vec![], log: vec![], frob_table: vec![], frob_inv_table: vec![] };
        field.build_tables();
        Ok(field)
    }

    fn slow_mul(&self, a: u32, b: u32) -> u32 {
        let d = self.d as usize;
        let p = self.p as u64;
        let x = self.digits(a);
        let y = self.digits(b);
        let mut prod = vec![0u64; 2 * d - 1];
        for i in 0..d {
            for j in 0..d {
                prod[i + j] = (prod[i + j] + x[i] as u64 * y[j] as u64) % p;
            }
        }
        for k in (d..2 * d - 1).rev() {
            let c = prod[k];
            if c != 0 {
                for i in 0..d {
                    let t = c * self.minpoly[i] as u64 % p;
                    prod[k - d + i] = (prod[k - d + i] + p - t) % p;
                }
                prod[k] = 0;
            }
        }
        let digits: Vec<u32> = prod[..d].iter().map(|&c| c as u32).collect();
        self.from_digits(&digits)
    }

    fn build_tables(&mut self) {
        let q = self.q;
        let order = q - 1;
        let factors = prime_factors(order);
        let mut gen = 1;
        if q > 2 {
            gen = (2..q)
                .find(|&g| factors.iter().all(|&f| self.slow_pow(g, (order / f) as u64) != 1))
                .expect("multiplicative group is cyclic");
        }
        let mut exp = vec![0u32; order as usize];
        let mut log = vec![0u32; q as usize];
        let mut x = 1u32;
        for (e, slot) in exp.iter_mut().enumerate() {
            *slot = x;
            log[x as usize] = e as u32;
            x = self.slow_mul(x, gen);
        }
        self.exp = exp;
        self.log = log;
        let mut frob = vec![0u32; q as usize];
        let mut frob_inv = vec![0u32; q as usize];
        for a in 0..q {
            let b = self.pow(a, self.p as u64);
            frob[a as usize] = b;
            frob_inv[b as usize] = a;
        }
        self.frob_table = frob;
        self.frob_inv_table = frob_inv;
    }

    fn slow_pow(&self, a: u32, mut e: u64) -> u32 {
        let mut r = 1u32;
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.slow_mul(r, b);
            }
            b = self.slow_mul(b, b);
            e >>= 1;
        }
        r
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn degree(&self) -> u32 {
        self.d
    }
    pub fn order(&self) -> u32 {
        self.q
    }
    pub fn minpoly(&self) -> &[u32] {
        &self.minpoly
    }

    pub fn digits(&self, a: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.d as usize);
        let mut c = a;
        for _ in 0..self.d {
            out.push(c % self.p);
            c /= self.p;
        }
        out
    }

    pub fn from_digits(&self, digits: &[u32]) -> u32 {
        let mut c = 0u32;
        for &x in digits.iter().rev() {
            c = c * self.p + (x % self.p);
        }
        c
    }

    pub fn from_int(&self, m: i64) -> u32 {
        m.rem_euclid(self.p as i64) as u32
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        if self.d == 1 {
            let s = a + b;
            return if s >= self.p { s - self.p } else { s };
        }
        let (mut x, mut y, mut out, mut place) = (a, b, 0u32, 1u32);
        for _ in 0..self.d {
            let s = (x % self.p + y % self.p) % self.p;
            out += s * place;
            place *= self.p;
            x /= self.p;
            y /= self.p;
        }
        out
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if self.p == 2 {
            return a;
        }
        if self.d == 1 {
            return if a == 0 { 0 } else { self.p - a };
        }
        let (mut x, mut out, mut place) = (a, 0u32, 1u32);
        for _ in 0..self.d {
            let s = (self.p - x % self.p) % self.p;
            out += s * place;
            place *= self.p;
            x /= self.p;
        }
        out
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let order = self.q - 1;
        let e = self.log[a as usize] + self.log[b as usize];
        self.exp[(if e >= order { e - order } else { e }) as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let order = self.q - 1;
        let l = self.log[a as usize];
        Some(self.exp[((order - l) % order) as usize])
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let order = (self.q - 1) as u64;
        let l = self.log[a as usize] as u64;
        self.exp[((l * (e % order)) % order) as usize]
    }

    /// Absolute Frobenius `x -> x^p`.
    #[inline]
    pub fn frob(&self, a: u32) -> u32 {
        self.frob_table[a as usize]
    }

    #[inline]
    pub fn frob_inv(&self, a: u32) -> u32 {
        self.frob_inv_table[a as usize]
    }

    /// `sigma^s` for any integer `s`.
    pub fn frob_pow(&self, a: u32, s: i64) -> u32 {
        let s = s.rem_euclid(self.d as i64);
        let mut x = a;
        for _ in 0..s {
            x = self.frob(x);
        }
        x
    }

    /// Generator of the multiplicative group used for the log tables.
    pub fn generator(&self) -> u32 {
        if self.q == 2 {
            1
        } else {
            self.exp[1]
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.q
    }
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = vec![];
    let mut f = 2;
    while f * f <= n {
        if n % f == 0 {
            out.push(f);
            while n % f == 0 {
                n /= f;
            }
        }
        f += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// An element of `F_{p^d}` bundled with its field.
#[derive(Clone)]
pub struct FqElem {
    field: Arc<Field>,
    code: u32,
}

impl fmt::Debug for FqElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.field.digits(self.code))
    }
}

impl PartialEq for FqElem {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code && *self.field == *other.field
    }
}
impl Eq for FqElem {}

impl FqElem {
    pub fn new(field: Arc<Field>, code: u32) -> FqElem {
        assert!(code < field.order());
        FqElem { field, code }
    }
    pub fn from_coordinates(field: Arc<Field>, coords: &[u32]) -> Result<FqElem> {
        if coords.len() != field.degree() as usize {
            return Err(Error::Shape(format!("expected {} coordinates, got {}", field.degree(), coords.len())));
        }
        if coords.iter().any(|&c| c >= field.p()) {
            return Err(Error::Schema("field coordinate not reduced mod p".into()));
        }
        let code = field.from_digits(coords);
        Ok(FqElem { field, code })
    }
    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn code(&self) -> u32 {
        self.code
    }
    pub fn coordinates(&self) -> Vec<u32> {
        self.field.digits(self.code)
    }
    fn check(&self, other: &FqElem) -> Result<()> {
        if *self.field != *other.field {
            return Err(Error::ContextMismatch("different fields".into()));
        }
        Ok(())
    }
    pub fn add(&self, other: &FqElem) -> Result<FqElem> {
        self.check(other)?;
        Ok(FqElem { field: self.field.clone(), code: self.field.add(self.code, other.code) })
    }
    pub fn mul(&self, other: &FqElem) -> Result<FqElem> {
        self.check(other)?;
        Ok(FqElem { field: self.field.clone(), code: self.field.mul(self.code, other.code) })
    }
    pub fn neg(&self) -> FqElem {
        FqElem { field: self.field.clone(), code: self.field.neg(self.code) }
    }
    pub fn inv(&self) -> Option<FqElem> {
        self.field.inv(self.code).map(|c| FqElem { field: self.field.clone(), code: c })
    }
    pub fn frobenius(&self) -> FqElem {
        FqElem { field: self.field.clone(), code: self.field.frob(self.code) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_polynomials() {
        assert_eq!(default_minpoly(2, 2), vec![1, 1, 1]);
        assert_eq!(default_minpoly(2, 3), vec![1, 1, 0, 1]);
        assert_eq!(default_minpoly(3, 2), vec![1, 0, 1]);
        assert!(!is_irreducible(&[1, 0, 1], 2));
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for (p, d) in [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1)] {
            let k = Field::new(p, d).unwrap();
            let q = k.order();
            for a in 0..q {
                assert_eq!(k.pow(a, q as u64), a, "x^q = x");
                assert_eq!(k.add(a, k.neg(a)), 0);
                if a != 0 {
                    assert_eq!(k.mul(a, k.inv(a).unwrap()), 1);
                }
                assert_eq!(k.frob_inv(k.frob(a)), a);
                for b in 0..q {
                    assert_eq!(k.mul(a, b), k.slow_mul(a, b));
                    assert_eq!(k.frob(k.mul(a, b)), k.mul(k.frob(a), k.frob(b)));
                    assert_eq!(k.frob(k.add(a, b)), k.add(k.frob(a), k.frob(b)));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_contexts() {
        assert!(Field::new(4, 1).is_err());
        assert!(Field::with_minpoly(2, vec![1, 0, 1]).is_err());
        assert!(Field::with_minpoly(3, vec![1, 2]).is_err());
    }
}
