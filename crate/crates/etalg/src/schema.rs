//! JSON interchange for the toolkit's aggregate objects.
//!
//! Rationals travel as strings `"num/den"` in lowest terms with a positive
//! denominator.  Integers are JSON numbers while they fit the float-safe
//! window `|x| < 2^53` and decimal strings beyond it.  Every emitter here has
//! a matching parser and the pair round-trips to an equal value; tagged
//! objects carry a `schema` field naming their version.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::pattern::{PatternHom, ProfileElement};
use crate::pl::PlFunc;
use crate::presentation::{KTheory, Presentation};
use crate::rational::{q_from_str, q_to_string, Q};
use crate::rewrite::{ChainSpec, RewriteCertificate, StageReport, StepReport};
use crate::spectrum::SpectrumPoint;
use crate::testfn::{make_type1, make_type2, LiftTag, TestFunction};

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

const FLOAT_SAFE: i64 = 1 << 53;

/// Integers below `2^53` in magnitude as numbers, larger ones as strings.
pub fn bigint_to_json(x: &BigInt) -> Value {
    match i64::try_from(x.clone()) {
        Ok(n) if n.abs() < FLOAT_SAFE => json!(n),
        _ => json!(x.to_string()),
    }
}

pub fn bigint_from_json(v: &Value) -> Result<BigInt> {
    if let Some(n) = v.as_i64() {
        return Ok(BigInt::from(n));
    }
    if let Some(s) = v.as_str() {
        return s
            .parse::<BigInt>()
            .map_err(|_| Error::schema(format!("bad integer literal {s:?}")));
    }
    Err(Error::schema(format!("expected an integer, found {v}")))
}

fn q_field(v: &Value, what: &str) -> Result<Q> {
    let s = v
        .as_str()
        .ok_or_else(|| Error::schema(format!("{what} must be a rational string \"num/den\"")))?;
    q_from_str(s)
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::schema(format!("{what} must be an array")))
}

fn object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::schema(format!("{what} must be an object")))
}

fn field<'a>(v: &'a Value, name: &str, what: &str) -> Result<&'a Value> {
    object(v, what)?
        .get(name)
        .ok_or_else(|| Error::schema(format!("{what} is missing the {name:?} field")))
}

fn u64_field(v: &Value, what: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::schema(format!("{what} must be a nonnegative integer")))
}

fn usize_field(v: &Value, what: &str) -> Result<usize> {
    Ok(u64_field(v, what)? as usize)
}

fn check_tag(v: &Value, tag: &str, what: &str) -> Result<()> {
    match object(v, what)?.get("schema") {
        None => Ok(()),
        Some(s) if s == tag => Ok(()),
        Some(s) => Err(Error::schema(format!("{what}: unsupported schema {s}, expected {tag:?}"))),
    }
}

fn u64_row(v: &Value, what: &str) -> Result<Vec<u64>> {
    array(v, what)?
        .iter()
        .map(|x| u64_field(x, what))
        .collect()
}

// ---------------------------------------------------------------------------
// presentation/v1
// ---------------------------------------------------------------------------

pub fn presentation_to_json(p: &Presentation) -> Value {
    json!({
        "schema": "presentation/v1",
        "k": p.k(),
        "dims": p.dims(),
        "alpha": p.alpha(),
        "beta": p.beta(),
        "unital": p.unital(),
    })
}

pub fn presentation_from_json(v: &Value) -> Result<Presentation> {
    check_tag(v, "presentation/v1", "presentation")?;
    let k = u64_row(field(v, "k", "presentation")?, "presentation.k")?;
    let dims = u64_row(field(v, "dims", "presentation")?, "presentation.dims")?;
    let read_matrix = |name: &str| -> Result<Vec<Vec<u64>>> {
        array(field(v, name, "presentation")?, &format!("presentation.{name}"))?
            .iter()
            .enumerate()
            .map(|(i, row)| u64_row(row, &format!("presentation.{name}[{i}]")))
            .collect()
    };
    let alpha = read_matrix("alpha")?;
    let beta = read_matrix("beta")?;
    let unital = field(v, "unital", "presentation")?
        .as_bool()
        .ok_or_else(|| Error::schema("presentation.unital must be a boolean"))?;
    Presentation::new(k, dims, alpha, beta, unital)
        .map_err(|e| Error::schema(format!("presentation shape: {e}")))
}

// ---------------------------------------------------------------------------
// Points, piecewise-linear functions, profiles
// ---------------------------------------------------------------------------

pub fn spectrum_point_to_json(x: &SpectrumPoint) -> Value {
    match x {
        SpectrumPoint::Theta(j) => json!({ "theta": j }),
        SpectrumPoint::Interior { block, t } => {
            json!({ "block": block, "t": q_to_string(t) })
        }
    }
}

pub fn spectrum_point_from_json(v: &Value) -> Result<SpectrumPoint> {
    let obj = object(v, "spectrum point")?;
    if let Some(j) = obj.get("theta") {
        return Ok(SpectrumPoint::Theta(usize_field(j, "point.theta")?));
    }
    let block = usize_field(field(v, "block", "spectrum point")?, "point.block")?;
    let t = q_field(field(v, "t", "spectrum point")?, "point.t")?;
    Ok(SpectrumPoint::Interior { block, t })
}

/// Breakpoint list `[[x, f(x)], ...]` with rational strings.
pub fn plfunc_to_json(f: &PlFunc) -> Value {
    Value::Array(
        f.breakpoints()
            .iter()
            .map(|(x, y)| json!([q_to_string(x), q_to_string(y)]))
            .collect(),
    )
}

pub fn plfunc_from_json(v: &Value) -> Result<PlFunc> {
    let pts = array(v, "piecewise-linear function")?
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            let pair = array(pt, &format!("breakpoint[{i}]"))?;
            if pair.len() != 2 {
                return Err(Error::schema(format!("breakpoint[{i}] must be an [x, y] pair")));
            }
            Ok((q_field(&pair[0], "breakpoint x")?, q_field(&pair[1], "breakpoint y")?))
        })
        .collect::<Result<Vec<_>>>()?;
    PlFunc::new(pts).map_err(|e| Error::schema(format!("breakpoints: {e}")))
}

pub fn profile_to_json(e: &ProfileElement) -> Value {
    json!({
        "theta_eigs": e
            .theta_eigs
            .iter()
            .map(|list| list.iter().map(q_to_string).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "branches": e
            .branches
            .iter()
            .map(|list| list.iter().map(plfunc_to_json).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

pub fn profile_from_json(v: &Value) -> Result<ProfileElement> {
    let theta_eigs = array(field(v, "theta_eigs", "profile")?, "profile.theta_eigs")?
        .iter()
        .map(|list| {
            array(list, "profile.theta_eigs entry")?
                .iter()
                .map(|x| q_field(x, "eigenvalue"))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let branches = array(field(v, "branches", "profile")?, "profile.branches")?
        .iter()
        .map(|list| {
            array(list, "profile.branches entry")?
                .iter()
                .map(plfunc_from_json)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileElement { theta_eigs, branches })
}

// ---------------------------------------------------------------------------
// testfn/v1
// ---------------------------------------------------------------------------

/// Parse the `testfn/v1` shape emitted by [`TestFunction::to_json`].
pub fn testfn_from_json(p: &Presentation, v: &Value) -> Result<TestFunction> {
    check_tag(v, "testfn/v1", "test function")?;
    let kind = field(v, "kind", "test function")?
        .as_str()
        .ok_or_else(|| Error::schema("test function kind must be a string"))?;
    let m = u64_field(field(v, "m", "test function")?, "testfn.m")?;
    let mut h = match kind {
        "type1" => {
            let j = usize_field(field(v, "j", "test function")?, "testfn.j")?;
            let a = u64_row(field(v, "a", "test function")?, "testfn.a")?;
            let b = u64_row(field(v, "b", "test function")?, "testfn.b")?;
            make_type1(p, m, j, a, b)?
        }
        "type2" => {
            let i = usize_field(field(v, "i", "test function")?, "testfn.i")?;
            let runs = array(field(v, "runs", "test function")?, "testfn.runs")?
                .iter()
                .map(|run| {
                    let pair = array(run, "testfn run")?;
                    if pair.len() != 2 {
                        return Err(Error::schema("testfn run must be an [s, e] pair"));
                    }
                    Ok((u64_field(&pair[0], "run start")?, u64_field(&pair[1], "run end")?))
                })
                .collect::<Result<Vec<_>>>()?;
            make_type2(p, m, i, runs)?
        }
        other => return Err(Error::schema(format!("unknown test function kind {other:?}"))),
    };
    let lift_field = field(v, "lift", "test function")?;
    if !lift_field.is_null() {
        let pair = array(lift_field, "testfn.lift")?;
        if pair.len() != 2 {
            return Err(Error::schema("testfn.lift must be a [row, col] pair"));
        }
        let tag = LiftTag {
            row: usize_field(&pair[0], "lift row")?,
            col: usize_field(&pair[1], "lift col")?,
        };
        let n = h.tag_block_size(p);
        if tag.row >= n || tag.col >= n {
            return Err(Error::schema(format!("lift tag ({}, {}) outside a {n}x{n} block", tag.row, tag.col)));
        }
        match &mut h {
            TestFunction::Type1 { lift, .. } | TestFunction::Type2 { lift, .. } => {
                *lift = Some(tag)
            }
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// pattern/v1
// ---------------------------------------------------------------------------

/// Self-contained pattern: source and target presentations plus the map data.
pub fn pattern_to_json(phi: &PatternHom) -> Value {
    json!({
        "schema": "pattern/v1",
        "source": presentation_to_json(phi.source()),
        "target": presentation_to_json(phi.target()),
        "map": phi.to_json(),
    })
}

pub fn pattern_from_json(v: &Value) -> Result<PatternHom> {
    check_tag(v, "pattern/v1", "pattern")?;
    let source = presentation_from_json(field(v, "source", "pattern")?)?;
    let target = presentation_from_json(field(v, "target", "pattern")?)?;
    PatternHom::from_json(&source, &target, field(v, "map", "pattern")?)
}

// ---------------------------------------------------------------------------
// chain/v1
// ---------------------------------------------------------------------------

/// Chain of stages with maps, per-stage element lists, and tolerances.  The
/// maps omit their endpoint presentations; entry `k` connects stage `k` to
/// stage `k+1`.
pub fn chain_to_json(spec: &ChainSpec) -> Value {
    json!({
        "schema": "chain/v1",
        "stages": spec.stages.iter().map(presentation_to_json).collect::<Vec<_>>(),
        "maps": spec.maps.iter().map(|m| m.to_json()).collect::<Vec<_>>(),
        "dense_sets": spec
            .dense_sets
            .iter()
            .map(|list| list.iter().map(profile_to_json).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "eps_schedule": spec.eps_schedule.iter().map(q_to_string).collect::<Vec<_>>(),
    })
}

pub fn chain_from_json(v: &Value) -> Result<ChainSpec> {
    check_tag(v, "chain/v1", "chain")?;
    let stages = array(field(v, "stages", "chain")?, "chain.stages")?
        .iter()
        .map(presentation_from_json)
        .collect::<Result<Vec<_>>>()?;
    let map_values = array(field(v, "maps", "chain")?, "chain.maps")?;
    if stages.len() < 2 || map_values.len() + 1 != stages.len() {
        return Err(Error::schema(format!(
            "chain needs n >= 2 stages and n-1 maps, found {} and {}",
            stages.len(),
            map_values.len()
        )));
    }
    let maps = map_values
        .iter()
        .enumerate()
        .map(|(k, mv)| PatternHom::from_json(&stages[k], &stages[k + 1], mv))
        .collect::<Result<Vec<_>>>()?;
    let dense_sets = array(field(v, "dense_sets", "chain")?, "chain.dense_sets")?
        .iter()
        .map(|list| {
            array(list, "chain.dense_sets entry")?
                .iter()
                .map(profile_from_json)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let eps_schedule = array(field(v, "eps_schedule", "chain")?, "chain.eps_schedule")?
        .iter()
        .map(|x| q_field(x, "chain.eps_schedule entry"))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainSpec { stages, maps, dense_sets, eps_schedule })
}

// ---------------------------------------------------------------------------
// cert/v1
// ---------------------------------------------------------------------------

fn step_report_to_json(r: &StepReport) -> Value {
    json!({
        "delta": q_to_string(&r.delta),
        "halvings": r.halvings,
        "injective": r.injectivity.injective,
        "missed": r.injectivity.missed.as_ref().map(spectrum_point_to_json),
        "commutation": r.commutation.iter().map(q_to_string).collect::<Vec<_>>(),
        "approximation": r.approximation.iter().map(q_to_string).collect::<Vec<_>>(),
    })
}

fn step_report_from_json(v: &Value) -> Result<StepReport> {
    let q_table = |name: &str| -> Result<Vec<Q>> {
        array(field(v, name, "step report")?, &format!("step.{name}"))?
            .iter()
            .map(|x| q_field(x, &format!("step.{name} entry")))
            .collect()
    };
    let missed_field = field(v, "missed", "step report")?;
    Ok(StepReport {
        delta: q_field(field(v, "delta", "step report")?, "step.delta")?,
        halvings: u64_field(field(v, "halvings", "step report")?, "step.halvings")? as u32,
        injectivity: crate::pattern::InjectivityReport {
            injective: field(v, "injective", "step report")?
                .as_bool()
                .ok_or_else(|| Error::schema("step.injective must be a boolean"))?,
            missed: if missed_field.is_null() {
                None
            } else {
                Some(spectrum_point_from_json(missed_field)?)
            },
        },
        commutation: q_table("commutation")?,
        approximation: q_table("approximation")?,
    })
}

/// Full evidence of a chain rewrite: every presentation and map is embedded,
/// so the certificate re-parses without outside context.
pub fn certificate_to_json(cert: &RewriteCertificate) -> Value {
    json!({
        "schema": "cert/v1",
        "reduced_stages": cert.reduced_stages.iter().map(presentation_to_json).collect::<Vec<_>>(),
        "new_stages": cert.new_stages.iter().map(presentation_to_json).collect::<Vec<_>>(),
        "injective_maps": cert.injective_maps.iter().map(pattern_to_json).collect::<Vec<_>>(),
        "embeddings": cert.embeddings.iter().map(pattern_to_json).collect::<Vec<_>>(),
        "reports": cert
            .reports
            .iter()
            .map(|r| {
                json!({
                    "stage": r.stage,
                    "commutation_bound": q_to_string(&r.commutation_bound),
                    "approximation_bound": q_to_string(&r.approximation_bound),
                    "step": step_report_to_json(&r.step),
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn certificate_from_json(v: &Value) -> Result<RewriteCertificate> {
    check_tag(v, "cert/v1", "certificate")?;
    let stage_list = |name: &str| -> Result<Vec<Presentation>> {
        array(field(v, name, "certificate")?, &format!("cert.{name}"))?
            .iter()
            .map(presentation_from_json)
            .collect()
    };
    let map_list = |name: &str| -> Result<Vec<PatternHom>> {
        array(field(v, name, "certificate")?, &format!("cert.{name}"))?
            .iter()
            .map(pattern_from_json)
            .collect()
    };
    let reports = array(field(v, "reports", "certificate")?, "cert.reports")?
        .iter()
        .map(|r| {
            Ok(StageReport {
                stage: usize_field(field(r, "stage", "stage report")?, "report.stage")?,
                commutation_bound: q_field(
                    field(r, "commutation_bound", "stage report")?,
                    "report.commutation_bound",
                )?,
                approximation_bound: q_field(
                    field(r, "approximation_bound", "stage report")?,
                    "report.approximation_bound",
                )?,
                step: step_report_from_json(field(r, "step", "stage report")?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RewriteCertificate {
        reduced_stages: stage_list("reduced_stages")?,
        new_stages: stage_list("new_stages")?,
        injective_maps: map_list("injective_maps")?,
        embeddings: map_list("embeddings")?,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// K-group report: rank and saturated basis of the kernel lattice, invariant
/// factors of the cokernel (empty when the odd group vanishes).
pub fn ktheory_to_json(kt: &KTheory) -> Value {
    json!({
        "k0_rank": kt.k0_rank,
        "k0_basis": kt
            .k0_basis
            .iter()
            .map(|row| row.iter().map(bigint_to_json).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "k1": kt.k1_invariant_factors.iter().map(bigint_to_json).collect::<Vec<_>>(),
    })
}

/// Vertex-spectrum table keyed by vertex index, for pattern reports.
pub fn vertex_table_to_json(table: &BTreeMap<usize, crate::pattern::FiniteSpectrum>) -> Value {
    Value::Object(
        table
            .iter()
            .map(|(j, s)| (j.to_string(), s.to_json()))
            .collect(),
    )
}
