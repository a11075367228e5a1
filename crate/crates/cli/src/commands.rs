//! Job dispatch. A job names a command, an action and its parameters; every
//! handler returns a [`Report`].

use gaugeforge::bundles::{self, check, rng_for, Options};
use gaugeforge::derham::{self, AffineVariety};
use gaugeforge::json::{self, AlgebraJson, CrystalJson, GaugeJson, MatJson, PredisplayJson, RingSpec, VarietyJson};
use gaugeforge::phi_crystal as pc;
use gaugeforge::report::{Report, Status};
use gaugeforge::semisolve::Search;
use gaugeforge::witt::{self, WittRing};
use gaugeforge::zip_display::{self as zd, FZip};
use gaugeforge::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub command: String,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default = "empty_params")]
    pub params: Value,
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
}

fn empty_params() -> Value {
    json!({})
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deg: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<i64>,
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub inject_fault: bool,
}

impl Params {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// The input object, or `summary[key]` when the input is a report
    /// produced by an earlier command.
    fn input<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>, Error> {
        let Some(v) = &self.input else { return Ok(None) };
        let obj = match (v.get("status"), v.get("summary")) {
            (Some(_), Some(s)) => s.get(key).ok_or_else(|| Error::Schema(format!("report has no summary.{key}")))?,
            _ => v,
        };
        json::from_value(obj).map(Some)
    }

    fn require_input<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T, Error> {
        self.input(key)?.ok_or_else(|| Error::Schema(format!("this action needs --input with a {key}")))
    }
}

pub fn run(job: &Job) -> Result<Report, Error> {
    let params: Params = json::from_value(&job.params)?;
    let action = job.action.as_deref();
    let unknown = || Error::Schema(format!("unknown action {:?} for {}", action.unwrap_or(""), job.command));
    let mut rep = match (job.command.as_str(), action) {
        ("witt", Some("check")) => witt_check(&params)?,
        ("witt", Some("structure")) => witt_structure(&params)?,
        ("gauge", Some("validate")) => gauge_validate(&params)?,
        ("gauge", Some("fixture")) => gauge_fixture(&params)?,
        ("crystal", Some("construct")) => crystal_construct(&params)?,
        ("crystal", Some("roundtrip")) => crystal_roundtrip(&params)?,
        ("dieudonne", Some("to")) => dieudonne_to(&params)?,
        ("dieudonne", Some("roundtrip")) => dieudonne_roundtrip(&params)?,
        ("fzip", Some("extract")) => fzip_extract(&params)?,
        ("fzip", Some("tate")) => fzip_tate(&params)?,
        ("display", Some("validate")) => display_validate(&params)?,
        ("perfection", Some("core")) => perfection_core(&params)?,
        ("perfection", Some("family")) => bundles::perfection(params.seed()),
        ("cris", Some("table")) => cris_model(&params, false)?,
        ("cris", Some("check")) => cris_model(&params, true)?,
        ("cris", Some("point")) => cris_point(&params)?,
        ("derham", Some("cohomology")) => derham_cohomology(&params)?,
        ("derham", Some("check")) => bundles::de_rham_variety(variety(&params)?, params.deg.unwrap_or(8)),
        ("suite", Some(name)) => bundles::suite(name, params.seed(), Options { inject_fault: params.inject_fault, timings: params.timings })?,
        ("witt" | "gauge" | "crystal" | "dieudonne" | "fzip" | "display" | "perfection" | "cris" | "derham" | "suite", _) => return Err(unknown()),
        (other, _) => return Err(Error::Schema(format!("unknown command {other:?}"))),
    };
    if !params.timings {
        rep.strip_timings();
    }
    Ok(rep)
}

fn ring(p: &Params, n: usize) -> Result<std::sync::Arc<WittRing>, Error> {
    WittRing::new(p.p.unwrap_or(2), p.d.unwrap_or(1), p.n.unwrap_or(n))
}

fn witt_check(p: &Params) -> Result<Report, Error> {
    let (pp, n) = (p.p.unwrap_or(2), p.n.unwrap_or(2));
    let mut rep = Report::new(format!("Witt ring W_{n}(F_{pp}) against the integers mod {pp}^{n}")).with_seed(p.seed());
    let mut rng = rng_for(p.seed(), 1);
    let res = bundles::witt_ghost_ring(&mut rep, pp, n, 400, &mut rng);
    if let Some(pairs) = check(&mut rep, res) {
        rep.note("pairs", pairs);
    }
    Ok(rep)
}

fn witt_structure(p: &Params) -> Result<Report, Error> {
    let (pp, n) = (p.p.unwrap_or(2), p.n.unwrap_or(3));
    let s = witt::witt_structure_polynomials(pp, n)?;
    let mut rep = Report::new(format!("Witt structure polynomials, p = {pp}, n = {n}"));
    rep.note("sum", s.sum.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    rep.note("prod", s.prod.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    Ok(rep)
}

fn gauge_validate(p: &Params) -> Result<Report, Error> {
    let gj: GaugeJson = p.require_input("gauge")?;
    let g = gj.gauge()?;
    let mut rep = Report::new("gauge");
    let v = g.validate()?;
    rep.require(v.fv_violations.is_empty(), || json!({ "fv_not_p": v.fv_violations }));
    rep.require(v.vf_violations.is_empty(), || json!({ "vf_not_p": v.vf_violations }));
    rep.note("window", g.window());
    rep.note("lengths", g.lengths());
    rep.note("effective", g.is_effective());
    if gj.phi.is_some() {
        let pg = gj.phi_gauge()?;
        rep.require(pg.is_phi_bijective(), || json!({ "reason": "phi is not bijective" }));
    }
    if g.n() == 1 && v.is_valid() {
        rep.note("quasi_rigid", pc::is_quasi_rigid(&g)?);
        rep.note("rigid", pc::is_rigid(&g)?);
    }
    // Freeness is a property, not an axiom: reported without affecting the status.
    let fr = pc::is_free_w_gauge(&g);
    let mut free = Report::new("freeness");
    free.require(fr.components_free, || json!({ "reason": "components are not free" }));
    free.require(fr.c_failures.is_empty(), || json!({ "criterion": "c", "failures": fr.c_failures }));
    free.require(fr.d_failures.is_empty(), || json!({ "criterion": "d", "failures": fr.d_failures }));
    if fr.free {
        free.note("multiplicities", fr.multiplicities());
    }
    rep.attach(free);
    Ok(rep)
}

fn gauge_fixture(p: &Params) -> Result<Report, Error> {
    let r = ring(p, 2)?;
    let g = pc::non_free_fixture(&r, p.i.unwrap_or(-1), p.rank.unwrap_or(1));
    let mut rep = Report::new("non-free gauge with free components");
    rep.note("gauge", GaugeJson::of(&g, None));
    Ok(rep)
}

fn crystal(p: &Params) -> Result<pc::VirtualCrystal, Error> {
    match p.input::<CrystalJson>("crystal")? {
        Some(c) => c.crystal(),
        None => Ok(pc::VirtualCrystal::identity(ring(p, 2).and_then(|r| r.at_level(r.n() + 1))?, p.rank.unwrap_or(1))),
    }
}

fn crystal_construct(p: &Params) -> Result<Report, Error> {
    let c = crystal(p)?;
    let n = p.n.unwrap_or(2).min(c.precision());
    let g = pc::standard_construction(&c, n)?;
    let mut rep = Report::new(format!("standard construction at level {n}"));
    rep.note("hodge_interval", c.hodge_interval()?);
    rep.note("gauge", GaugeJson::of(&g.gauge, Some(&g.phi)));
    Ok(rep)
}

fn crystal_roundtrip(p: &Params) -> Result<Report, Error> {
    let c = crystal(p)?;
    let (a, b) = c.hodge_interval()?;
    let n = p.n.unwrap_or(2).min(c.precision());
    let prec = n + (b - a) as usize + 1;
    let mut rep = Report::new(format!("round trip at level {n}")).with_seed(p.seed());
    let mut rng = rng_for(p.seed(), 3);
    let g = pc::standard_construction(&c, n)?;
    let rec = pc::reconstruct_crystal(&g, prec)?;
    let mut res = pc::crystals_isomorphic(&c, &rec.crystal, n, 1 << 18, 4000, &mut rng)?;
    if matches!(res, Search::Undecided) {
        let g2 = pc::standard_construction(&rec.crystal, n)?;
        res = pc::phi_gauge_isomorphism(&g, &g2, 1 << 18, 4000, &mut rng)?;
    }
    rep.note("precision", prec);
    rep.note("crystal", CrystalJson::of(&rec.crystal));
    match res {
        Search::Found(_) => rep.note("isomorphic", true),
        Search::NotFound => rep.violate(json!({ "result": "not isomorphic mod p^n" })),
        Search::Undecided => rep.mark(Status::Undecided),
    }
    Ok(rep)
}

fn dieudonne_to(p: &Params) -> Result<Report, Error> {
    let g = p.require_input::<GaugeJson>("gauge")?.phi_gauge()?;
    let d = pc::to_dieudonne(&g)?;
    let v = d.validate();
    let mut rep = Report::new(format!("Dieudonne module of weight {}", d.weight));
    rep.require(v.is_valid(), || json!({ "report": format!("{v:?}") }));
    rep.note("ring", RingSpec::of(&d.ring));
    rep.note("module", &d.module.divisors);
    rep.note("f", json::mat_to_json(&d.f));
    rep.note("v", json::mat_to_json(&d.v));
    Ok(rep)
}

fn dieudonne_roundtrip(p: &Params) -> Result<Report, Error> {
    let g = p.require_input::<GaugeJson>("gauge")?.phi_gauge()?;
    let mut rep = Report::new("from_dieudonne o to_dieudonne");
    let u = pc::dieudonne_unit(&g)?;
    let back = pc::from_dieudonne(&pc::to_dieudonne(&g)?)?;
    rep.require(u.non_commuting().is_empty(), || json!({ "non_commuting": u.non_commuting() }));
    rep.require(u.is_iso(), || json!({ "reason": "unit is not an isomorphism" }));
    rep.require(pc::respects_phi(&u, &g, &back), || json!({ "reason": "unit does not respect phi" }));
    Ok(rep)
}

fn fzip_report(z: &FZip, name: &str) -> Report {
    let v = zd::validate_fzip(z);
    let mut rep = Report::new(name);
    for (i, msg) in &v.violations {
        rep.violate(json!({ "i": i, "violation": msg }));
    }
    rep.note("graded_dims", &v.graded_dims);
    rep
}

fn fzip_extract(p: &Params) -> Result<Report, Error> {
    let g = p.require_input::<GaugeJson>("gauge")?.phi_gauge()?;
    Ok(fzip_report(&zd::gauge_to_fzip(&g)?, "F-zip of a k-gauge"))
}

fn fzip_tate(p: &Params) -> Result<Report, Error> {
    let r = ring(p, 1)?;
    let (m, w) = (p.rank.unwrap_or(1), p.i.unwrap_or(0));
    Ok(fzip_report(&FZip::tate(r, m, w), &format!("Tate F-zip of dimension {m} and weight {w}")))
}

fn display_validate(p: &Params) -> Result<Report, Error> {
    let pj: PredisplayJson = p.require_input("predisplay")?;
    let pd = pj.predisplay()?;
    let mut rep = Report::new(format!("predisplay of degree {}", pd.degree()));
    let add = |rep: &mut Report, v: &zd::DisplayReport| {
        for (rel, i, gen, msg) in &v.violations {
            rep.violate(json!({ "relation": rel, "i": i, "generator": gen, "violation": msg }));
        }
    };
    add(&mut rep, &zd::validate_predisplay(&pd)?);
    if let Some(w) = pj.display_witness(&pd.ring)? {
        let mut sub = Report::new("display witness");
        add(&mut sub, &zd::validate_display(&pd, &w)?);
        rep.push(sub);
    }
    Ok(rep)
}

fn perfection_core(p: &Params) -> Result<Report, Error> {
    let a = p.require_input::<AlgebraJson>("algebra")?.algebra()?;
    let core = zd::perfect_core(&a)?;
    let pr = zd::perfection_report(&a)?;
    let mut rep = Report::new("perfect core");
    rep.require(zd::is_perfect(&core.algebra)?, || json!({ "reason": "core is not perfect" }));
    rep.require(!pr.surjective || pr.injective, || json!({ "reason": "surjective but not injective Frobenius" }));
    rep.note("dim", a.dim());
    rep.note("core_dim", core.algebra.dim());
    rep.note("iterations", core.iterations);
    rep.note("perfect", pr.is_perfect());
    let basis: MatJson = json::mat_to_json(&core.basis);
    rep.note("basis", basis);
    Ok(rep)
}

fn cris_model(p: &Params, stability: bool) -> Result<Report, Error> {
    let (pp, d, trunc) = (p.p.unwrap_or(2), p.d.unwrap_or(1) as usize, p.deg.unwrap_or(6));
    let mut rng = rng_for(p.seed(), 7);
    Ok(bundles::crystalline_model(pp, d, trunc, stability.then_some(trunc + 2), &mut rng).with_seed(p.seed()))
}

fn cris_point(p: &Params) -> Result<Report, Error> {
    Ok(bundles::point_field(p.p.unwrap_or(2), p.d.unwrap_or(1), p.n.unwrap_or(3)))
}

fn variety(p: &Params) -> Result<AffineVariety, Error> {
    match p.input::<VarietyJson>("variety")? {
        Some(v) => v.variety(),
        None => AffineVariety::affine_space(p.p.unwrap_or(2), p.d.unwrap_or(1), p.n.unwrap_or(1)),
    }
}

fn derham_cohomology(p: &Params) -> Result<Report, Error> {
    let v = variety(p)?;
    let nvars = v.nvars;
    let plain = p.deg.unwrap_or(8);
    let g = derham::de_rham_gauge(v, plain)?;
    let degrees: Vec<usize> = match p.i {
        Some(i) if i < 0 => return Err(Error::Schema("cohomological degree must be >= 0".into())),
        Some(i) => vec![i as usize],
        None => (0..=nvars).collect(),
    };
    let mut rep = Report::new(format!("H_g^i, D = {plain}"));
    for i in degrees {
        let h = derham::hg_gauge(&g, i)?;
        let mut sub = Report::new(format!("i = {i}"));
        sub.require(h.gauge.is_valid(), || json!({ "reason": "fv = vf = 0 fails" }));
        sub.require(h.phi_bijective(g.model.ring()), || json!({ "reason": "phi is not bijective" }));
        sub.note("de_rham_dims", &h.de_rham_dims);
        sub.note("levels", &h.levels);
        sub.note("effective", h.effective);
        sub.note("upper_bound", h.upper_bound);
        sub.note("gauge", GaugeJson::of(&h.gauge, None));
        rep.push(sub);
    }
    Ok(rep)
}
