//! The de Rham gauge `G_1(X)` of a smooth affine variety over `F_q`, the
//! Cartier operator, and gauge cohomology from global sections.
//!
//! Forms are graded by weight: `x^a dx_I` has weight `sum a_i w_i + sum_{i in
//! I} w_i`, which `d` preserves and `c^{-1}` multiplies by `p`. A term of a
//! complex carrying the `sigma`-twisted structure is kept at its own weight
//! `t`, a plain term at weight `t/p`; this "level" `t` is preserved by `d`,
//! the splice `dc`, `f` and `v`, so every level is a finite sub-gauge.
//! Twisted terms use twisted coordinates: `sum mu_j . e_j = sum mu_j^p e_j`.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::gauge::Gauge;
use crate::linalg::{self, Mat, WnModule};
use crate::span::{self, Sparse, Span};
use crate::witt::WittRing;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

pub type Poly = BTreeMap<Vec<u32>, u32>;

fn poly_mul(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, &ca) in a {
        for (eb, &cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let v = out.entry(e.clone()).or_insert(0);
            *v = f.add(*v, f.mul(ca, cb));
            if *v == 0 {
                out.remove(&e);
            }
        }
    }
    out
}

fn poly_add(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let mut out = a.clone();
    for (e, &c) in b {
        let v = out.entry(e.clone()).or_insert(0);
        *v = f.add(*v, c);
        if *v == 0 {
            out.remove(e);
        }
    }
    out
}

fn poly_partial(f: &Field, a: &Poly, i: usize) -> Poly {
    let mut out = Poly::new();
    for (e, &c) in a {
        if e[i] == 0 {
            continue;
        }
        let coef = f.mul(c, f.from_int(e[i] as i64));
        if coef == 0 {
            continue;
        }
        let mut e2 = e.clone();
        e2[i] -= 1;
        out.insert(e2, coef);
    }
    out
}

#[derive(Clone, Debug)]
pub struct AffineVariety {
    pub field: Arc<Field>,
    pub nvars: usize,
    pub weights: Vec<u32>,
    /// `g` for a hypersurface `k[x]/(g)`.
    pub relation: Option<Poly>,
    /// `h_0, .., h_m` with `h_0 g + sum h_i dg/dx_i = 1`.
    pub witness: Vec<Poly>,
    relation_weight: u32,
}

impl AffineVariety {
    pub fn affine_space(p: u32, k_degree: u32, m: usize) -> Result<AffineVariety> {
        let field = Arc::new(Field::new(p, k_degree)?);
        Ok(AffineVariety { field, nvars: m, weights: vec![1; m], relation: None, witness: Vec::new(), relation_weight: 0 })
    }

    /// `k[x]/(g)` for `g` homogeneous for the positive `weights`, with a
    /// Jacobian witness certifying smoothness.
    pub fn hypersurface(p: u32, k_degree: u32, weights: Vec<u32>, g: Poly, witness: Vec<Poly>) -> Result<AffineVariety> {
        let field = Arc::new(Field::new(p, k_degree)?);
        let m = weights.len();
        if m == 0 || weights.contains(&0) {
            return Err(Error::Context("hypersurfaces need positive weights".into()));
        }
        if g.is_empty() || g.keys().any(|e| e.len() != m) || g.values().any(|&c| c == 0 || c >= field.order()) {
            return Err(Error::Schema("malformed relation".into()));
        }
        let wt = |e: &Vec<u32>| e.iter().zip(&weights).map(|(a, w)| a * w).sum::<u32>();
        let wg = wt(g.keys().next().unwrap());
        if g.keys().any(|e| wt(e) != wg) {
            return Err(Error::Precondition("relation is not weighted homogeneous".into()));
        }
        if witness.len() != m + 1 || witness.iter().any(|h| h.keys().any(|e| e.len() != m)) {
            return Err(Error::Schema("the Jacobian witness has m+1 polynomials".into()));
        }
        let mut total = poly_mul(&field, &witness[0], &g);
        for i in 0..m {
            total = poly_add(&field, &total, &poly_mul(&field, &witness[i + 1], &poly_partial(&field, &g, i)));
        }
        let one: Poly = BTreeMap::from([(vec![0; m], 1)]);
        if total != one {
            return Err(Error::Precondition("the Jacobian witness does not combine to 1".into()));
        }
        Ok(AffineVariety { field, nvars: m, weights, relation: Some(g), witness, relation_weight: wg })
    }

    pub fn dim(&self) -> usize {
        if self.relation.is_some() {
            self.nvars - 1
        } else {
            self.nvars
        }
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }
}

/// A differential form on the polynomial ring: `(exponent, sorted I) -> coefficient`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DifferentialForm {
    pub q: usize,
    pub terms: BTreeMap<(Vec<u32>, Vec<usize>), u32>,
}

impl DifferentialForm {
    pub fn zero(q: usize) -> DifferentialForm {
        DifferentialForm { q, terms: BTreeMap::new() }
    }

    pub fn monomial(exp: Vec<u32>, idx: Vec<usize>, coef: u32, f: &Field) -> DifferentialForm {
        let mut w = DifferentialForm::zero(idx.len());
        w.add_term(f, exp, idx, coef);
        w
    }

    /// Adds `c x^exp dx_{idx}` with `idx` in any order.
    pub fn add_term(&mut self, f: &Field, exp: Vec<u32>, mut idx: Vec<usize>, c: u32) {
        let mut sign = false;
        for i in 0..idx.len() {
            for j in 0..idx.len() - 1 - i {
                if idx[j] > idx[j + 1] {
                    idx.swap(j, j + 1);
                    sign = !sign;
                } else if idx[j] == idx[j + 1] {
                    return;
                }
            }
        }
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        let c = if sign { f.neg(c) } else { c };
        let key = (exp, idx);
        let v = self.terms.entry(key.clone()).or_insert(0);
        *v = f.add(*v, c);
        if *v == 0 {
            self.terms.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `d` on polynomial forms.
pub fn kaehler_d(f: &Field, w: &DifferentialForm) -> DifferentialForm {
    let mut out = DifferentialForm::zero(w.q + 1);
    for ((exp, idx), &c) in &w.terms {
        for j in 0..exp.len() {
            if exp[j] == 0 {
                continue;
            }
            let coef = f.mul(c, f.from_int(exp[j] as i64));
            if coef == 0 {
                continue;
            }
            let mut e = exp.clone();
            e[j] -= 1;
            let mut ix = vec![j];
            ix.extend_from_slice(idx);
            out.add_term(f, e, ix, coef);
        }
    }
    out
}

/// `c^{-1}(x^a dx_I) = x^{pa} prod_{i in I} x_i^{p-1} dx_I`, a closed form.
pub fn cartier_inverse_monomial(p: u32, exp: &[u32], idx: &[usize]) -> (Vec<u32>, Vec<usize>) {
    let mut e: Vec<u32> = exp.iter().map(|a| a * p).collect();
    for &i in idx {
        e[i] += p - 1;
    }
    (e, idx.to_vec())
}

type FormKey = (Vec<u32>, Vec<usize>);

/// Forms of one degree and weight on `X`, as a quotient of polynomial forms.
#[derive(Clone, Debug)]
struct Piece {
    monos: Vec<FormKey>,
    index: HashMap<FormKey, usize>,
    rel: Span,
    /// Monomials outside the pivots of `rel`, a basis of the quotient.
    basis: Vec<usize>,
    coord: HashMap<usize, usize>,
}

impl Piece {
    fn dim(&self) -> usize {
        self.basis.len()
    }
}

fn exps_of_weight(weights: &[u32], w: u32) -> Vec<Vec<u32>> {
    fn go(weights: &[u32], w: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == weights.len() {
            if w == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let wi = weights[cur.len()];
        for a in 0..=w / wi {
            cur.push(a);
            go(weights, w - a * wi, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(weights, w, &mut Vec::new(), &mut out);
    out
}

fn subsets(m: usize, q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![vec![]];
    }
    if q > m {
        return vec![];
    }
    let mut out = Vec::new();
    for mut s in subsets(m - 1, q - 1) {
        s.push(m - 1);
        out.push(s);
    }
    out.extend(subsets(m - 1, q));
    out.sort();
    out
}

/// The truncated de Rham complex of `X`: forms of every degree and of weight
/// at most `max_weight`.
#[derive(Clone, Debug)]
pub struct DeRhamModel {
    pub variety: AffineVariety,
    pub max_weight: u32,
    pieces: HashMap<(usize, u32), Piece>,
    ring: Arc<WittRing>,
}

impl DeRhamModel {
    pub fn new(variety: AffineVariety, max_weight: u32) -> Result<DeRhamModel> {
        let f = variety.field.clone();
        let ring = WittRing::with_minpoly(f.p(), f.minpoly(), 1)?;
        let mut pieces = HashMap::new();
        for q in 0..=variety.nvars {
            for w in 0..=max_weight {
                let mut monos = Vec::new();
                for idx in subsets(variety.nvars, q) {
                    let iw: u32 = idx.iter().map(|&i| variety.weights[i]).sum();
                    if iw > w {
                        continue;
                    }
                    for e in exps_of_weight(&variety.weights, w - iw) {
                        monos.push((e, idx.clone()));
                    }
                }
                monos.sort();
                let index: HashMap<FormKey, usize> = monos.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
                let mut rel = Span::new(f.clone());
                if let Some(g) = &variety.relation {
                    let wg = variety.relation_weight;
                    if w >= wg {
                        let to_sparse = |form: &DifferentialForm| -> Sparse {
                            form.terms.iter().map(|(k, &c)| (index[k], c)).collect()
                        };
                        // g * (q-forms of weight w - wg) and dg ^ ((q-1)-forms of weight w - wg).
                        let dg = {
                            let mut out = DifferentialForm::zero(1);
                            for i in 0..variety.nvars {
                                for (e, &c) in &poly_partial(&f, g, i) {
                                    out.add_term(&f, e.clone(), vec![i], c);
                                }
                            }
                            out
                        };
                        for qq in [q, q.wrapping_sub(1)] {
                            if qq > variety.nvars {
                                continue;
                            }
                            for idx in subsets(variety.nvars, qq) {
                                let iw: u32 = idx.iter().map(|&i| variety.weights[i]).sum();
                                if iw > w - wg {
                                    continue;
                                }
                                for e in exps_of_weight(&variety.weights, w - wg - iw) {
                                    let mut form = DifferentialForm::zero(q);
                                    if qq == q {
                                        for (ge, &gc) in g {
                                            let ex: Vec<u32> = ge.iter().zip(&e).map(|(a, b)| a + b).collect();
                                            form.add_term(&f, ex, idx.clone(), gc);
                                        }
                                    } else {
                                        for ((de, di), &dc) in &dg.terms {
                                            let ex: Vec<u32> = de.iter().zip(&e).map(|(a, b)| a + b).collect();
                                            let mut ix = di.clone();
                                            ix.extend_from_slice(&idx);
                                            form.add_term(&f, ex, ix, dc);
                                        }
                                    }
                                    rel.insert(&to_sparse(&form));
                                }
                            }
                        }
                    }
                }
                let piv: std::collections::HashSet<usize> = rel.pivots().into_iter().collect();
                let basis: Vec<usize> = (0..monos.len()).filter(|i| !piv.contains(i)).collect();
                let coord = basis.iter().enumerate().map(|(c, &i)| (i, c)).collect();
                pieces.insert((q, w), Piece { monos, index, rel, basis, coord });
            }
        }
        Ok(DeRhamModel { variety, max_weight, pieces, ring })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.variety.field
    }

    pub fn ring(&self) -> &Arc<WittRing> {
        &self.ring
    }

    fn piece(&self, q: usize, w: u32) -> Result<&Piece> {
        if w > self.max_weight {
            return Err(Error::Overflow(format!("weight {w} exceeds the truncation {}", self.max_weight)));
        }
        Ok(self.pieces.get(&(q, w)).expect("every degree and weight is built"))
    }

    /// Dimension of `Omega^q` in weight `w` (0 for degrees beyond the variables).
    pub fn dim(&self, q: usize, w: u32) -> Result<usize> {
        if q > self.variety.nvars {
            return Ok(0);
        }
        Ok(self.piece(q, w)?.dim())
    }

    /// Coordinates of a polynomial form of weight `w` in `Omega^q_w(X)`.
    pub fn coords(&self, form: &DifferentialForm, w: u32) -> Result<Vec<u32>> {
        let pc = self.piece(form.q, w)?;
        let mut s = Sparse::new();
        for (k, &c) in &form.terms {
            let &i = pc.index.get(k).ok_or_else(|| Error::Shape("form is not of the given weight".into()))?;
            s.insert(i, c);
        }
        let red = pc.rel.reduce(&s);
        let mut out = vec![0; pc.dim()];
        for (i, c) in red {
            out[pc.coord[&i]] = c;
        }
        Ok(out)
    }

    /// The basis monomial behind a coordinate.
    pub fn basis_form(&self, q: usize, w: u32, j: usize) -> Result<DifferentialForm> {
        let pc = self.piece(q, w)?;
        let (e, i) = pc.monos[pc.basis[j]].clone();
        Ok(DifferentialForm::monomial(e, i, 1, self.field()))
    }

    /// `d: Omega^q_w -> Omega^{q+1}_w`.
    pub fn d_matrix(&self, q: usize, w: u32) -> Result<Mat> {
        let src = self.dim(q, w)?;
        let tgt = self.dim(q + 1, w)?;
        let mut cols = Vec::with_capacity(src);
        for j in 0..src {
            if tgt == 0 {
                cols.push(vec![]);
                continue;
            }
            let dw = kaehler_d(self.field(), &self.basis_form(q, w, j)?);
            cols.push(self.coords(&dw, w)?);
        }
        Ok(mat_from_cols(tgt, cols))
    }

    /// `c^{-1}: Omega^q_w -> Z Omega^q_{pw}` on representatives.
    pub fn cartier_inverse_matrix(&self, q: usize, w: u32) -> Result<Mat> {
        let p = self.variety.p();
        let tw = p * w;
        if tw > self.max_weight {
            return Err(Error::Overflow(format!("c^-1 in weight {w} needs capacity {tw}, have {}", self.max_weight)));
        }
        let src = self.dim(q, w)?;
        let mut cols = Vec::with_capacity(src);
        for j in 0..src {
            let form = self.basis_form(q, w, j)?;
            let ((e, i), _) = form.terms.iter().next().map(|(k, c)| (k.clone(), *c)).unwrap();
            let (e2, i2) = cartier_inverse_monomial(p, &e, &i);
            cols.push(self.coords(&DifferentialForm::monomial(e2, i2, 1, self.field()), tw)?);
        }
        Ok(mat_from_cols(self.dim(q, tw)?, cols))
    }

    /// Basis of `Z Omega^q_w` (columns).
    pub fn closed_forms(&self, q: usize, w: u32) -> Result<Mat> {
        let n = self.dim(q, w)?;
        let dm = self.d_matrix(q, w)?;
        Ok(kernel_basis(&self.ring, &dm, n))
    }

    /// Basis of `d Omega^{q-1}_w` (columns).
    pub fn exact_forms(&self, q: usize, w: u32) -> Result<Mat> {
        let n = self.dim(q, w)?;
        if q == 0 {
            return Ok(Mat::zero(n, 0));
        }
        let dm = self.d_matrix(q - 1, w)?;
        Ok(image_basis(&self.ring, &dm, n))
    }

    /// `c` on a closed form `z` of weight `w`: write `z = c^{-1}(b) + exact`
    /// and return `b` (in weight `w/p`); `c(lambda^p z) = lambda c(z)`.
    pub fn cartier(&self, q: usize, w: u32, z: &[u32]) -> Result<Vec<u32>> {
        let p = self.variety.p();
        let exact = self.exact_forms(q, w)?;
        if w % p != 0 {
            let solvable = solve_in_span(&self.ring, &exact, z).is_some();
            if !solvable {
                return Err(Error::Precondition("closed form of weight prime to p is not exact".into()));
            }
            return Ok(Vec::new());
        }
        let ci = self.cartier_inverse_matrix(q, w / p)?;
        let both = ci.hstack(&exact);
        let sol = solve_in_span(&self.ring, &both, z).ok_or_else(|| Error::Precondition("form is not closed".into()))?;
        let f = self.field();
        Ok(sol[..ci.cols].iter().map(|&l| f.frob_pow(l, -1)).collect())
    }
}

fn mat_from_cols(rows: usize, cols: Vec<Vec<u32>>) -> Mat {
    if cols.is_empty() {
        Mat::zero(rows, 0)
    } else if rows == 0 {
        Mat::zero(0, cols.len())
    } else {
        Mat::from_cols(rows, &cols)
    }
}

fn kernel_basis(r: &WittRing, a: &Mat, n: usize) -> Mat {
    if n == 0 {
        return Mat::zero(0, 0);
    }
    if a.rows == 0 {
        return Mat::identity(n);
    }
    let (m, g) = linalg::kernel(r, a, &WnModule::free(n, 1), &WnModule::free(a.rows, 1));
    if m.is_zero() {
        Mat::zero(n, 0)
    } else {
        g
    }
}

fn image_basis(r: &WittRing, a: &Mat, n: usize) -> Mat {
    if n == 0 || a.cols == 0 {
        return Mat::zero(n, 0);
    }
    let (m, g) = linalg::image(r, a, &WnModule::free(n, 1));
    if m.is_zero() {
        Mat::zero(n, 0)
    } else {
        g
    }
}

fn solve_in_span(r: &WittRing, a: &Mat, y: &[u32]) -> Option<Vec<u32>> {
    if y.iter().all(|&c| c == 0) {
        return Some(vec![0; a.cols]);
    }
    if a.cols == 0 {
        return None;
    }
    linalg::solve(r, a, &WnModule::free(a.cols, 1), &WnModule::free(a.rows, 1), y)
}

fn rank(r: &WittRing, a: &Mat) -> usize {
    if a.rows == 0 || a.cols == 0 {
        0
    } else {
        linalg::smith(r, a).rank(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Plain,
    Twisted,
    /// `sigma Z Omega^r` at the splice.
    TwistedClosed,
}

/// One level `t` of the complex `G_1^r(X)`.
#[derive(Clone, Debug)]
pub struct LevelComplex {
    pub r: i64,
    pub level: u32,
    pub kinds: Vec<TermKind>,
    pub dims: Vec<usize>,
    /// `diffs[j]: term j -> term j+1`.
    pub diffs: Vec<Mat>,
    /// For the closed term, its basis inside `Omega^r_t`.
    closed_basis: Option<Mat>,
}

/// The complexes `G_1^r(X)` at every level `t <= p * D`, for plain weight `D`.
#[derive(Clone, Debug)]
pub struct DeRhamGauge {
    pub model: DeRhamModel,
    pub plain_weight: u32,
}

pub fn de_rham_gauge(variety: AffineVariety, plain_weight: u32) -> Result<DeRhamGauge> {
    let p = variety.p();
    let model = DeRhamModel::new(variety, p * plain_weight)?;
    Ok(DeRhamGauge { model, plain_weight })
}

impl DeRhamGauge {
    pub fn max_level(&self) -> u32 {
        self.model.max_weight
    }

    fn p(&self) -> u32 {
        self.model.variety.p()
    }

    fn kind(&self, r: i64, j: usize) -> TermKind {
        if r < 0 || j as i64 > r {
            TermKind::Plain
        } else if (j as i64) < r {
            TermKind::Twisted
        } else {
            TermKind::TwistedClosed
        }
    }

    fn top(&self) -> usize {
        self.model.variety.nvars
    }

    pub fn build_g1(&self, r: i64, t: u32) -> Result<LevelComplex> {
        let m = &self.model;
        let ring = m.ring.clone();
        let p = self.p();
        let top = self.top();
        let kinds: Vec<TermKind> = (0..=top).map(|j| self.kind(r, j)).collect();
        let plain_w = |t: u32| if t % p == 0 { Some(t / p) } else { None };
        let mut closed_basis = None;
        let mut dims = Vec::new();
        for (j, k) in kinds.iter().enumerate() {
            dims.push(match k {
                TermKind::Plain => match plain_w(t) {
                    Some(w) => m.dim(j, w)?,
                    None => 0,
                },
                TermKind::Twisted => m.dim(j, t)?,
                TermKind::TwistedClosed => {
                    let z = m.closed_forms(j, t)?;
                    let n = z.cols;
                    closed_basis = Some(z);
                    n
                }
            });
        }
        let mut diffs = Vec::new();
        for j in 0..top {
            let (src, tgt) = (dims[j], dims[j + 1]);
            let mat = if src == 0 || tgt == 0 {
                Mat::zero(tgt, src)
            } else {
                match (kinds[j], kinds[j + 1]) {
                    (TermKind::Plain, TermKind::Plain) => m.d_matrix(j, plain_w(t).unwrap())?,
                    (TermKind::Twisted, TermKind::Twisted) => m.d_matrix(j, t)?.frob_pow(&ring, -1),
                    (TermKind::Twisted, TermKind::TwistedClosed) => {
                        let z = closed_basis.as_ref().unwrap();
                        let dm = m.d_matrix(j, t)?;
                        let cols: Vec<Vec<u32>> =
                            (0..src).map(|c| solve_in_span(&ring, z, &dm.col(c)).expect("d lands in closed forms")).collect();
                        mat_from_cols(tgt, cols).frob_pow(&ring, -1)
                    }
                    (TermKind::TwistedClosed, TermKind::Plain) => {
                        let z = closed_basis.as_ref().unwrap();
                        let w = plain_w(t).unwrap();
                        let dm = m.d_matrix(j, w)?;
                        let cols: Vec<Vec<u32>> = (0..src)
                            .map(|c| {
                                let cz = m.cartier(j, t, &z.col(c))?;
                                Ok(dm.apply(&ring, &cz))
                            })
                            .collect::<Result<_>>()?;
                        mat_from_cols(tgt, cols)
                    }
                    _ => unreachable!("terms are ordered twisted, closed, plain"),
                }
            };
            diffs.push(mat);
        }
        Ok(LevelComplex { r, level: t, kinds, dims, diffs, closed_basis })
    }

    /// `f: G^r -> G^{r+1}` at level `t`, termwise.
    pub fn gauge_map_f(&self, r: i64, t: u32) -> Result<Vec<Mat>> {
        let src = self.build_g1(r, t)?;
        let tgt = self.build_g1(r + 1, t)?;
        let ring = &self.model.ring;
        (0..=self.top())
            .map(|j| {
                let (a, b) = (src.dims[j], tgt.dims[j]);
                if r < 0 || a == 0 || b == 0 {
                    return Ok(Mat::zero(b, a));
                }
                Ok(match (src.kinds[j], tgt.kinds[j]) {
                    (TermKind::Twisted, TermKind::Twisted) => Mat::identity(a),
                    (TermKind::TwistedClosed, TermKind::Twisted) => src.closed_basis.as_ref().unwrap().frob_pow(ring, -1),
                    _ => Mat::zero(b, a),
                })
            })
            .collect()
    }

    /// `v: G^{r+1} -> G^r` at level `t`, termwise.
    pub fn gauge_map_v(&self, r: i64, t: u32) -> Result<Vec<Mat>> {
        let src = self.build_g1(r + 1, t)?;
        let tgt = self.build_g1(r, t)?;
        let m = &self.model;
        (0..=self.top())
            .map(|j| {
                let (a, b) = (src.dims[j], tgt.dims[j]);
                if a == 0 || b == 0 {
                    return Ok(Mat::zero(b, a));
                }
                Ok(match (src.kinds[j], tgt.kinds[j]) {
                    (TermKind::Plain, TermKind::Plain) => Mat::identity(a),
                    (TermKind::TwistedClosed, TermKind::Plain) => {
                        let z = src.closed_basis.as_ref().unwrap();
                        let cols: Vec<Vec<u32>> = (0..a).map(|c| m.cartier(j, t, &z.col(c))).collect::<Result<_>>()?;
                        mat_from_cols(b, cols)
                    }
                    _ => Mat::zero(b, a),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct G1Report {
    /// `(r, t, j)` failures of each axiom.
    pub not_complex: Vec<(i64, u32, usize)>,
    pub not_chain_map: Vec<(i64, u32, usize)>,
    pub vf_fv_nonzero: Vec<(i64, u32, usize)>,
    pub fv_not_injective: Vec<(i64, u32, usize)>,
    pub v_not_iso_below: Vec<(i64, u32, usize)>,
    pub not_stable_above: Vec<(i64, u32, usize)>,
}

impl G1Report {
    pub fn is_valid(&self) -> bool {
        self.not_complex.is_empty()
            && self.not_chain_map.is_empty()
            && self.vf_fv_nonzero.is_empty()
            && self.fv_not_injective.is_empty()
            && self.v_not_iso_below.is_empty()
            && self.not_stable_above.is_empty()
    }
}

fn pick(ms: &[Mat], i: usize) -> Mat {
    ms.get(i).cloned().unwrap_or_else(|| Mat::zero(0, 0))
}

fn is_zero_mat(a: &Mat) -> bool {
    a.data.iter().all(|&c| c == 0)
}

/// Checks the gauge axioms of `G_1(X)` termwise for `r` in `[rmin, rmax]`
/// at every level.
pub fn check_g1(g: &DeRhamGauge, rmin: i64, rmax: i64) -> Result<G1Report> {
    let ring = g.model.ring.clone();
    let r = &*ring;
    let dim = g.model.variety.dim() as i64;
    let top = g.top();
    let mut rep = G1Report::default();
    for t in 0..=g.max_level() {
        let cx: HashMap<i64, LevelComplex> = (rmin - 1..=rmax + 2).map(|s| Ok((s, g.build_g1(s, t)?))).collect::<Result<_>>()?;
        for s in rmin..=rmax + 1 {
            let c = &cx[&s];
            for j in 0..top.saturating_sub(1) {
                if !is_zero_mat(&c.diffs[j + 1].mul(r, &c.diffs[j])) {
                    rep.not_complex.push((s, t, j));
                }
            }
            let f = g.gauge_map_f(s, t)?;
            let v = g.gauge_map_v(s, t)?;
            let (src, up) = (c, &cx[&(s + 1)]);
            for j in 0..top {
                // f and v commute with the differentials.
                if up.diffs[j].mul(r, &f[j]) != f[j + 1].mul(r, &src.diffs[j]) {
                    rep.not_chain_map.push((s, t, j));
                }
                if src.diffs[j].mul(r, &v[j]) != v[j + 1].mul(r, &up.diffs[j]) {
                    rep.not_chain_map.push((s, t, j));
                }
            }
            let vprev = g.gauge_map_v(s - 1, t)?;
            for j in 0..=top {
                // v_s f_s on G^s and f_s v_s on G^{s+1}.
                if !is_zero_mat(&v[j].mul(r, &f[j])) || !is_zero_mat(&f[j].mul(r, &v[j])) {
                    rep.vf_fv_nonzero.push((s, t, j));
                }
                // (f, v): G^s -> G^{s+1} + G^{s-1}.
                let stacked = f[j].vstack(&vprev[j]);
                if src.dims[j] > 0 && rank(r, &stacked) != src.dims[j] {
                    rep.fv_not_injective.push((s, t, j));
                }
                if s < 0 {
                    let vv = &vprev[j];
                    let (a, b) = (cx[&s].dims[j], cx[&(s - 1)].dims[j]);
                    if a != b || (a > 0 && !linalg::is_invertible(r, vv)) {
                        rep.v_not_iso_below.push((s - 1, t, j));
                    }
                }
                if s >= dim {
                    let (a, b) = (src.dims[j], up.dims[j]);
                    if a != b || (a > 0 && !linalg::is_invertible(r, &f[j])) || (a > 0 && src.kinds[j] == TermKind::Plain) {
                        rep.not_stable_above.push((s, t, j));
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Cohomology of a complex of vector spaces: representatives of a basis of
/// `H^i` and a way to read classes.
#[derive(Clone, Debug)]
struct CohomologyAt {
    reps: Mat,
    image: Mat,
}

fn cohomology_at(r: &WittRing, c: &LevelComplex, i: usize) -> CohomologyAt {
    let n = c.dims.get(i).copied().unwrap_or(0);
    let dout = if i < c.diffs.len() { c.diffs[i].clone() } else { Mat::zero(0, n) };
    let ker = kernel_basis(r, &dout, n);
    let image = if i == 0 || n == 0 { Mat::zero(n, 0) } else { image_basis(r, &c.diffs[i - 1], n) };
    let f = r.field().clone();
    let mut sp = span::span_of(&f, (0..image.cols).map(|j| span::to_sparse(&image.col(j))).collect::<Vec<_>>().iter());
    let mut reps = Vec::new();
    for j in 0..ker.cols {
        let col = ker.col(j);
        if sp.insert(&span::to_sparse(&col)) {
            reps.push(col);
        }
    }
    CohomologyAt { reps: mat_from_cols(n, reps), image }
}

impl CohomologyAt {
    fn dim(&self) -> usize {
        self.reps.cols
    }

    /// Class of a cycle in the representative basis.
    fn class(&self, r: &WittRing, z: &[u32]) -> Vec<u32> {
        let both = self.reps.hstack(&self.image);
        let sol = solve_in_span(r, &both, z).expect("argument is a cycle");
        sol[..self.reps.cols].to_vec()
    }

    fn induced(&self, r: &WittRing, map: &Mat, target: &CohomologyAt) -> Mat {
        let cols: Vec<Vec<u32>> = (0..self.dim()).map(|j| target.class(r, &map.apply(r, &self.reps.col(j)))).collect();
        mat_from_cols(target.dim(), cols)
    }
}

/// `dim H^i(G_1^r(X))` at each level.
pub fn gauge_cohomology(g: &DeRhamGauge, i: usize, r: i64) -> Result<Vec<(u32, usize)>> {
    let ring = g.model.ring.clone();
    (0..=g.max_level()).map(|t| Ok((t, cohomology_at(&ring, &g.build_g1(r, t)?, i).dim()))).collect()
}

/// `H_g^i(X, W_1)` on the window `[0, dim]`, with `phi` on the levels where
/// both ends are inside the truncation.
#[derive(Clone, Debug)]
pub struct HgGauge {
    pub i: usize,
    pub gauge: Gauge,
    /// Level of each basis vector, per component.
    pub levels: Vec<Vec<u32>>,
    /// `(t, matrix)`: `phi` from level `t` of `M^dim` to level `p t` of
    /// `M^0`, as `x -> A sigma(x)`.
    pub phi: Vec<(u32, Mat)>,
    /// `v: M^0 -> H^i(G^{-1})` and the `v` below are isomorphisms.
    pub effective: bool,
    /// `f: M^r -> M^{r+1}` is an isomorphism for `r >= dim`.
    pub stable_above: bool,
    /// Smallest `b >= 0` with `f` an isomorphism from `M^b` on (within the window).
    pub upper_bound: i64,
    /// `dim H^i(Omega)` at each plain weight `<= D`, and the same for `M^0`.
    pub de_rham_dims: Vec<usize>,
    pub zero_component_dims: Vec<usize>,
}

impl HgGauge {
    pub fn phi_bijective(&self, ring: &WittRing) -> bool {
        self.phi.iter().all(|(_, m)| m.rows == m.cols && (m.rows == 0 || linalg::is_invertible(ring, m)))
    }
}

pub fn hg_gauge(g: &DeRhamGauge, i: usize) -> Result<HgGauge> {
    let ring = g.model.ring.clone();
    let r = &*ring;
    let p = g.p();
    let dim = g.model.variety.dim() as i64;
    let maxl = g.max_level();
    let (a, b) = (0i64, dim);
    let mut levels = vec![Vec::new(); (b - a + 1) as usize];
    let mut f_blocks: Vec<Vec<Mat>> = vec![Vec::new(); (b - a) as usize];
    let mut v_blocks: Vec<Vec<Mat>> = vec![Vec::new(); (b - a) as usize];
    let mut effective = true;
    let mut stable_above = true;
    let mut f_iso_from = vec![true; (b - a + 1) as usize];
    let mut zero_dims = vec![0usize; g.plain_weight as usize + 1];
    let mut h_cache: HashMap<(i64, u32), CohomologyAt> = HashMap::new();
    let mut coh = |s: i64, t: u32| -> Result<CohomologyAt> {
        if let Some(c) = h_cache.get(&(s, t)) {
            return Ok(c.clone());
        }
        let c = cohomology_at(r, &g.build_g1(s, t)?, i);
        h_cache.insert((s, t), c.clone());
        Ok(c)
    };
    let mut phi = Vec::new();
    for t in 0..=maxl {
        let hs: Vec<CohomologyAt> = (a - 2..=b + 1).map(|s| coh(s, t)).collect::<Result<_>>()?;
        let at = |s: i64| &hs[(s - (a - 2)) as usize];
        for s in a..=b {
            levels[(s - a) as usize].extend(std::iter::repeat(t).take(at(s).dim()));
        }
        for s in a..b {
            let fm = g.gauge_map_f(s, t)?;
            let vm = g.gauge_map_v(s, t)?;
            f_blocks[(s - a) as usize].push(at(s).induced(r, &pick(&fm, i), at(s + 1)));
            v_blocks[(s - a) as usize].push(at(s + 1).induced(r, &pick(&vm, i), at(s)));
        }
        for s in [a - 2, a - 1] {
            let vm = g.gauge_map_v(s, t)?;
            let ind = at(s + 1).induced(r, &pick(&vm, i), at(s));
            if ind.rows != ind.cols || (ind.rows > 0 && !linalg::is_invertible(r, &ind)) {
                effective = false;
            }
        }
        for s in a..=b {
            let fm = g.gauge_map_f(s, t)?;
            let ind = at(s).induced(r, &pick(&fm, i), at(s + 1));
            let iso = ind.rows == ind.cols && (ind.rows == 0 || linalg::is_invertible(r, &ind));
            if !iso {
                f_iso_from[(s - a) as usize] = false;
                if s >= dim {
                    stable_above = false;
                }
            }
        }
        if t % p == 0 {
            zero_dims[(t / p) as usize] = at(0).dim();
        }
        // phi at level t: identity sigma Omega -> Omega (plain weight t,
        // level p t), then back to M^0 through v_{-1}.
        if p * t <= maxl {
            let src = at(b).clone();
            let plain = coh(-1, p * t)?;
            let m0 = coh(0, p * t)?;
            let top_cx = g.build_g1(b, t)?;
            let low_cx = g.build_g1(-1, p * t)?;
            let size = top_cx.dims.get(i).copied().unwrap_or(0);
            if size != low_cx.dims.get(i).copied().unwrap_or(0) {
                return Err(Error::Precondition("G^dim and the de Rham complex disagree in size".into()));
            }
            let ident = src.induced(r, &Mat::identity(size), &plain);
            let vm = g.gauge_map_v(-1, p * t)?;
            let v_ind = m0.induced(r, &pick(&vm, i), &plain);
            let m = match linalg::inverse(r, &v_ind) {
                Some(vinv) => vinv.mul(r, &ident),
                None if v_ind.rows == 0 && v_ind.cols == 0 => Mat::zero(0, ident.cols),
                None => return Err(Error::Precondition("v_{-1} is not invertible on cohomology".into())),
            };
            phi.push((t, m));
        }
    }
    let upper_bound = (a..=b).find(|&s| f_iso_from[(s - a) as usize..].iter().all(|&x| x)).unwrap_or(b + 1);
    let de_rham_dims: Vec<usize> = (0..=g.plain_weight)
        .map(|w| {
            let cx = g.build_g1(-1, p * w)?;
            Ok(cohomology_at(r, &cx, i).dim())
        })
        .collect::<Result<_>>()?;
    let comps: Vec<WnModule> = levels.iter().map(|l| WnModule::free(l.len(), 1)).collect();
    let block = |blocks: &[Mat]| blocks.iter().fold(Mat::zero(0, 0), |acc, m| acc.block_diag(m));
    let f: Vec<Mat> = f_blocks.iter().map(|bl| block(bl)).collect();
    let v: Vec<Mat> = v_blocks.iter().map(|bl| block(bl)).collect();
    let gauge = Gauge::new(ring.clone(), a, comps, f, v)?;
    Ok(HgGauge { i, gauge, levels, phi, effective, stable_above, upper_bound, de_rham_dims, zero_component_dims: zero_dims })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CartierReport {
    /// `(q, w)` where `c(c^{-1}(b)) != b`.
    pub left_failures: Vec<(usize, u32)>,
    /// `(q, w)` where `c^{-1}(c(z)) - z` is not exact.
    pub right_failures: Vec<(usize, u32)>,
    /// `(q, w)` where `Z = B + c^{-1}(Omega)` fails to be a direct sum.
    pub decomposition_failures: Vec<(usize, u32)>,
    /// `(q, w)` where `c(x_i^p z) != x_i c(z)`.
    pub semilinearity_failures: Vec<(usize, u32)>,
}

impl CartierReport {
    pub fn is_valid(&self) -> bool {
        self.left_failures.is_empty() && self.right_failures.is_empty() && self.decomposition_failures.is_empty() && self.semilinearity_failures.is_empty()
    }
}

/// Round trips of the Cartier isomorphism in degrees `q <= qmax` and plain
/// weights `w` with `p w` inside the truncation.
pub fn cartier_check(m: &DeRhamModel, qmax: usize) -> Result<CartierReport> {
    let ring = m.ring.clone();
    let r = &*ring;
    let p = m.variety.p();
    let f = m.field().clone();
    let mut rep = CartierReport::default();
    for q in 0..=qmax.min(m.variety.nvars) {
        for w in 0..=m.max_weight / p {
            let tw = p * w;
            let z = m.closed_forms(q, tw)?;
            let b = m.exact_forms(q, tw)?;
            let ci = m.cartier_inverse_matrix(q, w)?;
            if rank(r, &ci.hstack(&b)) != ci.cols + b.cols || rank(r, &z) != ci.cols + b.cols {
                rep.decomposition_failures.push((q, w));
                continue;
            }
            for j in 0..ci.cols {
                let back = m.cartier(q, tw, &ci.col(j))?;
                let mut e = vec![0; ci.cols];
                e[j] = 1;
                if back != e {
                    rep.left_failures.push((q, w));
                }
            }
            for j in 0..z.cols {
                let cz = m.cartier(q, tw, &z.col(j))?;
                let diff: Vec<u32> = ci.apply(r, &cz).iter().zip(z.col(j)).map(|(&x, y)| f.sub(x, y)).collect();
                if solve_in_span(r, &b, &diff).is_none() {
                    rep.right_failures.push((q, w));
                }
                // c(x_i^p z) = x_i c(z), when both fit.
                for i in 0..m.variety.nvars {
                    let wi = m.variety.weights[i];
                    if tw + p * wi > m.max_weight {
                        continue;
                    }
                    let mult = |form: DifferentialForm, by: u32| -> DifferentialForm {
                        let mut out = DifferentialForm::zero(form.q);
                        for ((e, ix), &c) in &form.terms {
                            let mut e2 = e.clone();
                            e2[i] += by;
                            out.add_term(&f, e2, ix.clone(), c);
                        }
                        out
                    };
                    let zform = coords_to_form(m, q, tw, &z.col(j))?;
                    let lhs = m.cartier(q, tw + p * wi, &m.coords(&mult(zform, p), tw + p * wi)?)?;
                    let czf = coords_to_form(m, q, w, &cz)?;
                    let rhs = m.coords(&mult(czf, 1), w + wi)?;
                    if lhs != rhs {
                        rep.semilinearity_failures.push((q, w));
                    }
                }
            }
        }
    }
    Ok(rep)
}

fn coords_to_form(m: &DeRhamModel, q: usize, w: u32, x: &[u32]) -> Result<DifferentialForm> {
    let mut out = DifferentialForm::zero(q);
    let f = m.field();
    for (j, &c) in x.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let b = m.basis_form(q, w, j)?;
        for ((e, ix), &bc) in &b.terms {
            out.add_term(f, e.clone(), ix.clone(), f.mul(c, bc));
        }
    }
    Ok(out)
}

/// Per-weight ranks of `H^i(Omega)` and of `H^i(G^r)` agree between plain
/// truncations `D` and `D + p` in weights `< D - p`.
pub fn truncation_stable(variety: &AffineVariety, plain_weight: u32, rmin: i64, rmax: i64) -> Result<bool> {
    let p = variety.p();
    let g1 = de_rham_gauge(variety.clone(), plain_weight)?;
    let g2 = de_rham_gauge(variety.clone(), plain_weight + p)?;
    let bound = plain_weight.saturating_sub(p) * p;
    for i in 0..=variety.nvars {
        for s in rmin..=rmax {
            let a = gauge_cohomology(&g1, i, s)?;
            let b = gauge_cohomology(&g2, i, s)?;
            if a.iter().filter(|(t, _)| *t < bound).ne(b.iter().filter(|(t, _)| *t < bound)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: u32, m: usize) -> AffineVariety {
        AffineVariety::affine_space(p, 1, m).unwrap()
    }

    #[test]
    fn d_squared_and_characteristic() {
        let v = a(2, 2);
        let f = v.field.clone();
        let x2 = DifferentialForm::monomial(vec![2, 0], vec![], 1, &f);
        assert!(kaehler_d(&f, &x2).is_zero());
        let m = DeRhamModel::new(v, 6).unwrap();
        for w in 0..=6 {
            let d0 = m.d_matrix(0, w).unwrap();
            let d1 = m.d_matrix(1, w).unwrap();
            assert!(is_zero_mat(&d1.mul(m.ring(), &d0)));
        }
    }

    #[test]
    fn closed_forms_rank_nullity() {
        // A^2, p = 2, weights <= 3: kernel of d on 1-forms against a dense
        // elimination over F_2.
        let m = DeRhamModel::new(a(2, 2), 3).unwrap();
        for w in 0..=3 {
            let d1 = m.d_matrix(1, w).unwrap();
            let n = m.dim(1, w).unwrap();
            let mut rows: Vec<Vec<u32>> = d1.to_rows();
            let mut rk = 0;
            for c in 0..n {
                if let Some(pv) = (rk..rows.len()).find(|&i| rows[i][c] == 1) {
                    rows.swap(rk, pv);
                    for i in 0..rows.len() {
                        if i != rk && rows[i][c] == 1 {
                            let piv = rows[rk].clone();
                            for (x, y) in rows[i].iter_mut().zip(&piv) {
                                *x ^= y;
                            }
                        }
                    }
                    rk += 1;
                }
            }
            assert_eq!(m.closed_forms(1, w).unwrap().cols, n - rk);
        }
        let m1 = DeRhamModel::new(a(2, 1), 4).unwrap();
        for w in 0..=4 {
            assert_eq!(m1.closed_forms(1, w).unwrap().cols, m1.dim(1, w).unwrap());
        }
    }

    #[test]
    fn cartier_examples() {
        let m = DeRhamModel::new(a(2, 1), 8).unwrap();
        // c^{-1}(dx) = x dx.
        let ci = m.cartier_inverse_matrix(1, 1).unwrap();
        let xdx = m.coords(&DifferentialForm::monomial(vec![1], vec![0], 1, m.field()), 2).unwrap();
        assert_eq!(ci.col(0), xdx);
        // c(x^{2j-1} dx) = x^{j-1} dx.
        for j in 1..=4u32 {
            let z = m.coords(&DifferentialForm::monomial(vec![2 * j - 1], vec![0], 1, m.field()), 2 * j).unwrap();
            let cz = m.cartier(1, 2 * j, &z).unwrap();
            let expected = m.coords(&DifferentialForm::monomial(vec![j - 1], vec![0], 1, m.field()), j).unwrap();
            assert_eq!(cz, expected);
        }
        // Exact classes go to 0.
        let dx3 = m.coords(&DifferentialForm::monomial(vec![2], vec![0], 1, m.field()), 3).unwrap();
        assert!(m.cartier(1, 3, &dx3).unwrap().is_empty());
        for p in [2, 3] {
            for n in 1..=2 {
                let m = DeRhamModel::new(a(p, n), 3 * p).unwrap();
                assert!(cartier_check(&m, 2).unwrap().is_valid());
            }
        }
    }

    #[test]
    fn g1_axioms_affine_space() {
        for p in [2, 3] {
            for n in 1..=2 {
                let g = de_rham_gauge(a(p, n), 4).unwrap();
                let rep = check_g1(&g, -2, n as i64 + 1).unwrap();
                assert!(rep.is_valid(), "p={p} n={n}: {rep:?}");
            }
        }
    }

    #[test]
    fn hg_of_affine_line() {
        let g = de_rham_gauge(a(2, 1), 8).unwrap();
        let h1 = hg_gauge(&g, 1).unwrap();
        assert!(h1.effective && h1.stable_above);
        assert!(h1.gauge.validate().unwrap().is_valid());
        assert_eq!(h1.de_rham_dims, h1.zero_component_dims);
        // H^1 basis x^{2j-1} dx, of weight 2j.
        let expected: Vec<usize> = (0..=8).map(|w| if w > 0 && w % 2 == 0 { 1 } else { 0 }).collect();
        assert_eq!(h1.de_rham_dims, expected);
        assert!(h1.phi_bijective(g.model.ring()));
        let h0 = hg_gauge(&g, 0).unwrap();
        assert!(h0.effective);
        // Truncated H^0 is k[x^p].
        let expected: Vec<usize> = (0..=8).map(|w| if w % 2 == 0 { 1 } else { 0 }).collect();
        assert_eq!(h0.de_rham_dims, expected);
        let h2 = hg_gauge(&g, 2).unwrap();
        assert!(h2.levels.iter().all(|l| l.is_empty()));
    }

    #[test]
    fn plane_curve_patch() {
        // y = x^2 with weights (1, 2); dg/dy = 1 certifies smoothness.
        let g: Poly = BTreeMap::from([(vec![0, 1], 1), (vec![2, 0], 1)]);
        let witness = vec![Poly::new(), Poly::new(), BTreeMap::from([(vec![0, 0], 1)])];
        let v = AffineVariety::hypersurface(3, 1, vec![1, 2], g, witness).unwrap();
        assert_eq!(v.dim(), 1);
        let m = DeRhamModel::new(v.clone(), 9).unwrap();
        assert!(cartier_check(&m, 1).unwrap().is_valid());
        let line = DeRhamModel::new(a(3, 1), 9).unwrap();
        for w in 0..=9 {
            assert_eq!(m.dim(1, w).unwrap(), line.dim(1, w).unwrap());
        }
        let gg = de_rham_gauge(v, 3).unwrap();
        let rep = check_g1(&gg, -2, 2).unwrap();
        assert!(rep.is_valid(), "{rep:?}");
        let bad: Poly = BTreeMap::from([(vec![0, 2], 1), (vec![3, 0], 1)]);
        assert!(AffineVariety::hypersurface(3, 1, vec![2, 3], bad, vec![Poly::new(); 3]).is_err());
    }

    #[test]
    fn stability_in_truncation() {
        assert!(truncation_stable(&a(2, 1), 4, -1, 2).unwrap());
    }
}
