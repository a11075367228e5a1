//! Incremental row echelon form over `F_q` for sparse vectors.

use crate::field::Field;
use std::collections::{BTreeMap, HashMap};

pub type Sparse = BTreeMap<usize, u32>;

pub fn to_sparse(x: &[u32]) -> Sparse {
    x.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i, c)).collect()
}

pub fn to_dense(x: &Sparse, len: usize) -> Vec<u32> {
    let mut v = vec![0; len];
    for (&i, &c) in x {
        v[i] = c;
    }
    v
}

/// `x += c * y`.
pub fn axpy(f: &Field, x: &mut Sparse, c: u32, y: &Sparse) {
    if c == 0 {
        return;
    }
    for (&i, &b) in y {
        let e = x.entry(i).or_insert(0);
        *e = f.add(*e, f.mul(c, b));
        if *e == 0 {
            x.remove(&i);
        }
    }
}

/// Rows keyed by their pivot (first nonzero index), each normalized to 1 there.
#[derive(Clone, Debug)]
pub struct Span {
    field: std::sync::Arc<Field>,
    rows: HashMap<usize, Sparse>,
}

impl Span {
    pub fn new(field: std::sync::Arc<Field>) -> Span {
        Span { field, rows: HashMap::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Remainder of `x` after elimination against the current rows.
    pub fn reduce(&self, x: &Sparse) -> Sparse {
        let f = &self.field;
        let mut w = x.clone();
        let mut floor = 0;
        loop {
            let next = w.range(floor..).find(|(i, _)| self.rows.contains_key(i)).map(|(&i, &c)| (i, c));
            match next {
                Some((i, c)) => {
                    axpy(f, &mut w, f.neg(c), &self.rows[&i]);
                    floor = i + 1;
                }
                None => return w,
            }
        }
    }

    pub fn contains(&self, x: &Sparse) -> bool {
        self.reduce(x).is_empty()
    }

    /// Inserts `x`; returns whether the rank grew.
    pub fn insert(&mut self, x: &Sparse) -> bool {
        let w = self.reduce(x);
        let Some((&piv, &c)) = w.iter().next() else {
            return false;
        };
        let inv = self.field.inv(c).expect("nonzero pivot");
        let w: Sparse = w.into_iter().map(|(i, b)| (i, self.field.mul(inv, b))).collect();
        self.rows.insert(piv, w);
        true
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        other.rows.values().all(|r| self.contains(r))
    }

    pub fn pivots(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn span_of<'a>(field: &std::sync::Arc<Field>, vecs: impl IntoIterator<Item = &'a Sparse>) -> Span {
    let mut s = Span::new(field.clone());
    for v in vecs {
        s.insert(v);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn rank_over_f3() {
        let f = Arc::new(Field::new(3, 1).unwrap());
        let a = to_sparse(&[1, 2, 0]);
        let b = to_sparse(&[2, 1, 0]);
        let c = to_sparse(&[0, 1, 1]);
        let s = span_of(&f, [&a, &b, &c]);
        assert_eq!(s.rank(), 2);
        assert!(s.contains(&to_sparse(&[1, 0, 1])));
        assert!(!s.contains(&to_sparse(&[0, 0, 1])));
    }
}
