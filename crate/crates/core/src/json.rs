//! JSON interchange for rings, gauges, crystals, predisplays, algebras and
//! varieties. Every parse failure is an [`Error::Schema`].
//!
//! Matrix entries are element codes `sum c_i q^i` of Witt coordinates, or
//! `{"int": m}` for the image of an integer, or `{"witt": [c_0, ..]}`.

use crate::derham::{AffineVariety, Poly};
use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::linalg::{Mat, WnModule};
use crate::phi_crystal::{PhiGauge, VirtualCrystal};
use crate::witt::WittRing;
use crate::zip_display::{DisplayWitness, FiniteAlgebra, Predisplay};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::sync::Arc;

fn schema<E: std::fmt::Display>(e: E) -> Error {
    Error::Schema(e.to_string())
}

pub fn from_value<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(schema)
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(schema)
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub p: u32,
    #[serde(default = "one")]
    pub d: u32,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minpoly: Option<Vec<u32>>,
}

impl RingSpec {
    pub fn build(&self) -> Result<Arc<WittRing>> {
        match &self.minpoly {
            Some(m) => WittRing::with_minpoly(self.p, m, self.n),
            None => WittRing::new(self.p, self.d, self.n),
        }
    }

    pub fn of(r: &WittRing) -> RingSpec {
        RingSpec { p: r.p(), d: r.d(), n: r.n(), minpoly: (r.d() > 1).then(|| r.field().minpoly().to_vec()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Code(u32),
    Int { int: i64 },
    Witt { witt: Vec<u32> },
}

impl Entry {
    fn code(&self, r: &WittRing) -> Result<u32> {
        match self {
            Entry::Code(c) if (*c as u64) < r.size() => Ok(*c),
            Entry::Code(c) => Err(Error::Schema(format!("code {c} is outside W_{}(F_{})", r.n(), r.residue_order()))),
            Entry::Int { int } => Ok(r.from_integer(*int)),
            Entry::Witt { witt } => r.from_coords(witt).map_err(schema),
        }
    }
}

pub type MatJson = Vec<Vec<Entry>>;

pub fn mat_from_json(r: &WittRing, m: &MatJson, rows: usize, cols: usize) -> Result<Mat> {
    if m.len() != rows || m.iter().any(|row| row.len() != cols) {
        return Err(Error::Schema(format!("expected a {rows} x {cols} matrix")));
    }
    let mut out = Mat::zero(rows, cols);
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            out.set(i, j, e.code(r)?);
        }
    }
    Ok(out)
}

pub fn mat_to_json(m: &Mat) -> MatJson {
    m.to_rows().into_iter().map(|row| row.into_iter().map(Entry::Code).collect()).collect()
}

fn module_from_json(divisors: &[u32], n: usize) -> Result<WnModule> {
    WnModule::new(divisors.to_vec(), n).map_err(schema)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeJson {
    pub ring: RingSpec,
    pub a: i64,
    /// Elementary divisor exponents of each component `M^a, .., M^b`.
    pub components: Vec<Vec<u32>>,
    pub f: Vec<MatJson>,
    pub v: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<MatJson>,
}

impl GaugeJson {
    pub fn gauge(&self) -> Result<Gauge> {
        let r = self.ring.build()?;
        let n = r.n();
        let comps: Vec<WnModule> = self.components.iter().map(|d| module_from_json(d, n)).collect::<Result<_>>()?;
        if comps.is_empty() {
            return Err(Error::Schema("a gauge needs at least one component".into()));
        }
        let k = comps.len() - 1;
        if self.f.len() != k || self.v.len() != k {
            return Err(Error::Schema(format!("expected {k} maps f and v")));
        }
        let f: Vec<Mat> = (0..k).map(|i| mat_from_json(&r, &self.f[i], comps[i + 1].rank(), comps[i].rank())).collect::<Result<_>>()?;
        let v: Vec<Mat> = (0..k).map(|i| mat_from_json(&r, &self.v[i], comps[i].rank(), comps[i + 1].rank())).collect::<Result<_>>()?;
        Gauge::new(r, self.a, comps, f, v).map_err(schema)
    }

    pub fn phi_gauge(&self) -> Result<PhiGauge> {
        let g = self.gauge()?;
        let phi = self.phi.as_ref().ok_or_else(|| Error::Schema("missing phi".into()))?;
        let m = mat_from_json(&g.ring, phi, g.comp(g.a).rank(), g.comp(g.b).rank())?;
        PhiGauge::new(g, m)
    }

    pub fn of(g: &Gauge, phi: Option<&Mat>) -> GaugeJson {
        GaugeJson {
            ring: RingSpec::of(&g.ring),
            a: g.a,
            components: g.comps.iter().map(|c| c.divisors.clone()).collect(),
            f: g.f.iter().map(mat_to_json).collect(),
            v: g.v.iter().map(mat_to_json).collect(),
            phi: phi.map(mat_to_json),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalJson {
    /// The ring `W_N`, whose length is the precision of the crystal.
    pub ring: RingSpec,
    pub phi: MatJson,
    #[serde(default)]
    pub shift: i64,
}

impl CrystalJson {
    pub fn crystal(&self) -> Result<VirtualCrystal> {
        let r = self.ring.build()?;
        let m = self.phi.len();
        VirtualCrystal::new(r.clone(), mat_from_json(&r, &self.phi, m, m)?, self.shift)
    }

    pub fn of(c: &VirtualCrystal) -> CrystalJson {
        CrystalJson { ring: RingSpec::of(&c.ring), phi: mat_to_json(&c.phi), shift: c.shift }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessJson {
    pub ranks: Vec<usize>,
    pub phis: Vec<MatJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredisplayJson {
    pub ring: RingSpec,
    pub modules: Vec<Vec<u32>>,
    pub iota: Vec<MatJson>,
    pub alpha: Vec<MatJson>,
    pub frob: Vec<MatJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
}

impl PredisplayJson {
    pub fn predisplay(&self) -> Result<Predisplay> {
        let r = self.ring.build()?;
        let n = r.n();
        let modules: Vec<WnModule> = self.modules.iter().map(|d| module_from_json(d, n)).collect::<Result<_>>()?;
        let d = modules.len().checked_sub(1).ok_or_else(|| Error::Schema("a predisplay needs P_0".into()))?;
        if self.iota.len() != d || self.alpha.len() != d || self.frob.len() != d + 1 {
            return Err(Error::Schema(format!("degree {d} needs {d} iota, {d} alpha and {} frob matrices", d + 1)));
        }
        let rk: Vec<usize> = modules.iter().map(|m| m.rank()).collect();
        let iota = (0..d).map(|i| mat_from_json(&r, &self.iota[i], rk[i], rk[i + 1])).collect::<Result<_>>()?;
        let alpha = (0..d).map(|i| mat_from_json(&r, &self.alpha[i], rk[i + 1], rk[i])).collect::<Result<_>>()?;
        let frob = (0..=d).map(|i| mat_from_json(&r, &self.frob[i], rk[0], rk[i])).collect::<Result<_>>()?;
        Ok(Predisplay { ring: r, modules, iota, alpha, frob })
    }

    pub fn display_witness(&self, ring: &WittRing) -> Result<Option<DisplayWitness>> {
        let Some(w) = &self.witness else { return Ok(None) };
        let total: usize = w.ranks.iter().sum();
        if w.phis.len() != w.ranks.len() {
            return Err(Error::Schema("one Phi_j per L_j".into()));
        }
        let phis = w.phis.iter().zip(&w.ranks).map(|(m, &c)| mat_from_json(ring, m, total, c)).collect::<Result<_>>()?;
        Ok(Some(DisplayWitness { ranks: w.ranks.clone(), phis }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraJson {
    pub p: u32,
    /// A down-set of exponent vectors: `F_p[x]/(monomials outside)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staircase: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mult: Option<Vec<Vec<Vec<u32>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one: Option<Vec<u32>>,
    /// `F_{p^field}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<u32>,
}

impl AlgebraJson {
    pub fn algebra(&self) -> Result<FiniteAlgebra> {
        match (&self.staircase, &self.mult, &self.one, self.field) {
            (Some(s), None, None, None) => FiniteAlgebra::monomial_quotient(self.p, s).map_err(schema),
            (None, Some(m), Some(o), None) => FiniteAlgebra::new(self.p, m.clone(), o.clone()).map_err(schema),
            (None, None, None, Some(d)) => FiniteAlgebra::finite_field(self.p, d).map_err(schema),
            _ => Err(Error::Schema("give exactly one of staircase, mult + one, field".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarietyJson {
    pub p: u32,
    #[serde(default = "one")]
    pub d: u32,
    /// `A^m`, or the ambient space of the hypersurface.
    pub nvars: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<u32>>,
    /// Terms `[exponents, coefficient]` of `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Vec<(Vec<u32>, u32)>>,
    /// `h_0, .., h_m` with `h_0 g + sum h_i dg/dx_i = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<(Vec<u32>, u32)>>>,
}

impl VarietyJson {
    pub fn variety(&self) -> Result<AffineVariety> {
        let poly = |t: &[(Vec<u32>, u32)]| -> Poly { t.iter().filter(|(_, c)| *c != 0).cloned().collect() };
        match (&self.relation, &self.witness) {
            (None, None) => {
                if self.weights.as_ref().is_some_and(|w| w.iter().any(|&x| x != 1)) {
                    return Err(Error::Schema("affine space uses unit weights".into()));
                }
                AffineVariety::affine_space(self.p, self.d, self.nvars)
            }
            (Some(g), Some(h)) => {
                let weights = self.weights.clone().unwrap_or_else(|| vec![1; self.nvars]);
                if weights.len() != self.nvars {
                    return Err(Error::Schema("one weight per variable".into()));
                }
                AffineVariety::hypersurface(self.p, self.d, weights, poly(g), h.iter().map(|x| poly(x)).collect())
            }
            _ => Err(Error::Schema("a hypersurface needs both relation and witness".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_round_trip() {
        let r = WittRing::new(2, 2, 2).unwrap();
        let g = crate::phi_crystal::non_free_fixture(&r, -1, 2);
        let j = GaugeJson::of(&g, None);
        let text = serde_json::to_string(&j).unwrap();
        let back: GaugeJson = parse(&text).unwrap();
        assert_eq!(back.gauge().unwrap(), g);
    }

    #[test]
    fn entries_and_errors() {
        let r = WittRing::new(3, 1, 2).unwrap();
        let m: MatJson = parse(r#"[[{"int": -1}, {"witt": [0, 1]}, 4]]"#).unwrap();
        let a = mat_from_json(&r, &m, 1, 3).unwrap();
        assert_eq!(a.row(0), &[r.from_integer(-1), r.p_pow(1), 4]);
        assert!(matches!(mat_from_json(&r, &m, 1, 2), Err(Error::Schema(_))));
        let bad: MatJson = parse("[[9]]").unwrap();
        assert!(matches!(mat_from_json(&r, &bad, 1, 1), Err(Error::Schema(_))));
        assert!(matches!(parse::<GaugeJson>(r#"{"ring": {"p": 2, "n": 1}, "a": 0}"#), Err(Error::Schema(_))));
    }
}
