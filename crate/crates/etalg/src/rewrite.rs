//! Rewriting a chain of connecting maps into an injective chain.
//!
//! Given stages `A_1 -> A_2 -> ... -> A_N`, the rewriter first cuts every
//! stage down to the part that survives into the last one (the reduced
//! stages), then walks the chain replacing each reduced stage by a collapsed
//! model `B_k` together with an injective connecting map `B_k -> B_{k+1}`.
//! Each model is a restriction of a reduced stage to a discretized subset,
//! each new connecting map transports the old one strand by strand, and the
//! certificate records exact distance tables showing that the new chain
//! tracks the old one on the prescribed element families.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::discretize::discretize;
use crate::error::{Error, Result};
use crate::pattern::{
    canonical_profile, compose, spec_distance, ElementRef, FiniteSpectrum, InjectivityReport,
    PatternHom, PieceMap, ProfileElement, Track,
};
use crate::perturb::choose_constants;
use crate::pl::PlFunc;
use crate::presentation::Presentation;
use crate::rational::{q, qi, Q};
use crate::restrict::{collapse_pattern, restrict_algebra, RestrictionResult};
use crate::spectrum::{ClosedSubset, RawSubset, SpectrumPoint};

// ---------------------------------------------------------------------------
// Chain description
// ---------------------------------------------------------------------------

/// A finite chain of presented algebras and connecting maps, together with
/// the element families the rewritten chain must track and the tolerance
/// schedule for each step.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    /// Presentations `A_1, ..., A_N` in order.
    pub stages: Vec<Presentation>,
    /// Connecting maps; `maps[k]` sends stage `k` into stage `k + 1` and
    /// must be defined on the whole spectrum of its target.
    pub maps: Vec<PatternHom>,
    /// Per stage, a finite list of elements standing in for a dense subset;
    /// prefixes of these lists drive the approximation tables.
    pub dense_sets: Vec<Vec<ProfileElement>>,
    /// Positive, strictly decreasing tolerances, one per stage.
    pub eps_schedule: Vec<Q>,
}

impl ChainSpec {
    /// The default tolerance schedule `1/2, 1/4, ..., 2^-n`.
    pub fn default_schedule(n: usize) -> Vec<Q> {
        (1..=n)
            .map(|k| {
                let mut d = BigInt::one();
                d <<= k;
                Q::new(BigInt::one(), d)
            })
            .collect()
    }

    /// Check shapes, map compatibility, and the tolerance schedule.
    pub fn validate(&self) -> Result<()> {
        let n = self.stages.len();
        if n < 2 {
            return Err(Error::invalid("a chain needs at least two stages"));
        }
        if self.maps.len() + 1 != n {
            return Err(Error::invalid(format!(
                "{} stages need {} connecting maps, got {}",
                n,
                n - 1,
                self.maps.len()
            )));
        }
        if self.dense_sets.len() != n {
            return Err(Error::invalid("one element list per stage is required"));
        }
        if self.eps_schedule.len() != n {
            return Err(Error::invalid("one tolerance per stage is required"));
        }
        for (k, p) in self.stages.iter().enumerate() {
            let rep = p.validate();
            if !rep.ok {
                return Err(Error::invalid(format!("stage {k} is not a valid presentation")));
            }
        }
        for (k, phi) in self.maps.iter().enumerate() {
            if phi.source() != &self.stages[k] || phi.target() != &self.stages[k + 1] {
                return Err(Error::invalid(format!(
                    "map {k} does not connect stage {k} to stage {}",
                    k + 1
                )));
            }
            if phi.domain() != &ClosedSubset::full(&self.stages[k + 1]) {
                return Err(Error::invalid(format!(
                    "map {k} must be defined on the whole spectrum of stage {}",
                    k + 1
                )));
            }
            let rep = phi.validate();
            if !rep.ok {
                return Err(Error::invalid(format!(
                    "map {k} is not a valid pattern: {}",
                    rep.violations.join("; ")
                )));
            }
        }
        for (k, list) in self.dense_sets.iter().enumerate() {
            for (j, e) in list.iter().enumerate() {
                e.validate(&self.stages[k]).map_err(|err| {
                    Error::invalid(format!("element {j} of stage {k} list: {err}"))
                })?;
            }
        }
        for (k, e) in self.eps_schedule.iter().enumerate() {
            if *e <= Q::zero() {
                return Err(Error::invalid(format!("tolerance {k} must be positive")));
            }
            if k > 0 && self.eps_schedule[k - 1] <= *e {
                return Err(Error::invalid("tolerances must be strictly decreasing"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Distance tables and search data from one collapse step.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// The collapse fineness that passed every audit.
    pub delta: Q,
    /// How many times the fineness was halved before the audits passed.
    pub halvings: u32,
    /// Injectivity witness for the new connecting map.
    pub injectivity: InjectivityReport,
    /// Exact distance, per tracked element, between the old map and the
    /// new map read back through the collapse.
    pub commutation: Vec<Q>,
    /// Exact distance, per approximated element, between the element and
    /// its collapse pullback.
    pub approximation: Vec<Q>,
}

/// The outcome of one collapse step: the discretized subset, the collapsed
/// model presented over it, the new injective connecting map into the model,
/// the embedding of the model back into the ambient stage, and the report.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// The discretized subset of the ambient spectrum.
    pub set: ClosedSubset,
    /// The collapsed model `B|_Z`.
    pub algebra: Presentation,
    /// The injective rewritten map `psi` into the model, defined on the
    /// model's whole spectrum.
    pub map: PatternHom,
    /// The model's points read back as ambient points (defined on the
    /// support the step was given).
    pub embedding: PatternHom,
    pub report: StepReport,
}

/// One entry of the rewrite certificate, pairing a step report with the
/// tolerances it was audited against.
#[derive(Debug, Clone)]
pub struct StageReport {
    /// Index of the model this step produced (0-based).
    pub stage: usize,
    /// Bound the commutation table must stay below.
    pub commutation_bound: Q,
    /// Bound the approximation table must stay below.
    pub approximation_bound: Q,
    pub step: StepReport,
}

/// The rewritten chain: reduced ambient stages, collapsed models, injective
/// connecting maps, embeddings of each model into its reduced stage, and the
/// per-step audit reports.
#[derive(Debug, Clone)]
pub struct RewriteCertificate {
    /// Each original stage cut down to the part surviving into the last one.
    pub reduced_stages: Vec<Presentation>,
    /// The collapsed models `B_1, ..., B_N`.
    pub new_stages: Vec<Presentation>,
    /// Injective maps `B_k -> B_{k+1}`, defined on the whole spectrum of
    /// their target.
    pub injective_maps: Vec<PatternHom>,
    /// Patterns reading each model's points as reduced-stage points.
    pub embeddings: Vec<PatternHom>,
    pub reports: Vec<StageReport>,
}

// ---------------------------------------------------------------------------
// Domain surgery
// ---------------------------------------------------------------------------

/// Restrict a pattern to a closed subset of its domain.
fn cut_domain(pat: &PatternHom, sub: &ClosedSubset) -> Result<PatternHom> {
    let mut vertex_spec = BTreeMap::new();
    for j in sub.thetas() {
        let vs = pat
            .vertex_spec()
            .get(j)
            .ok_or_else(|| Error::invalid(format!("vertex theta_{j} is outside the domain")))?;
        vertex_spec.insert(*j, vs.clone());
    }
    let mut piece_maps = Vec::with_capacity(sub.pieces().len());
    for (i, pieces) in sub.pieces().iter().enumerate() {
        let mut list = Vec::with_capacity(pieces.len());
        for pc in pieces {
            let host = pat.domain().pieces()[i]
                .iter()
                .position(|d| d.lo <= pc.lo && pc.hi <= d.hi)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "piece [{}, {}] of block {i} is outside the domain",
                        pc.lo, pc.hi
                    ))
                })?;
            let pm = &pat.piece_maps()[i][host];
            let mut tracks = Vec::with_capacity(pm.tracks.len());
            for tr in &pm.tracks {
                match tr {
                    Track::Theta(j) => tracks.push(Track::Theta(*j)),
                    Track::Pl { block, f } => tracks.push(Track::Pl {
                        block: *block,
                        f: f.restrict(&pc.lo, &pc.hi)?,
                    }),
                }
            }
            list.push(PieceMap {
                tracks,
                pad: pm.pad,
            });
        }
        piece_maps.push(list);
    }
    PatternHom::new(
        pat.source().clone(),
        pat.target().clone(),
        sub.clone(),
        vertex_spec,
        piece_maps,
    )
    .map(PatternHom::canonicalize)
}

/// Does the evaluation carry no material at all?
fn pure_pad(s: &FiniteSpectrum) -> bool {
    s.interior.is_empty() && s.theta_mult.iter().all(|&m| m == 0)
}

/// The support of a pattern inside its domain, together with the pattern cut
/// down to that support.  Fails when the pattern vanishes identically.
pub fn image_restrict(phi: &PatternHom) -> Result<(ClosedSubset, PatternHom)> {
    let mut raw = RawSubset {
        thetas: std::collections::BTreeSet::new(),
        pieces: vec![Vec::new(); phi.target().l()],
    };
    for (j, vs) in phi.vertex_spec() {
        if !pure_pad(vs) {
            raw.thetas.insert(*j);
        }
    }
    let mut any = !raw.thetas.is_empty();
    for (i, pieces) in phi.domain().pieces().iter().enumerate() {
        for (pc, pm) in pieces.iter().zip(&phi.piece_maps()[i]) {
            if !pm.tracks.is_empty() {
                raw.pieces[i].push(pc.clone());
                any = true;
            }
        }
    }
    if !any {
        return Err(Error::invalid("the pattern is identically zero"));
    }
    let support = ClosedSubset::closure(phi.target(), raw)?;
    let cut = cut_domain(phi, &support)?;
    Ok((support, cut))
}

/// Transport an evaluation over `r`'s original presentation into an
/// evaluation over `r.algebra`.
fn transport_spectrum(s: &FiniteSpectrum, r: &RestrictionResult) -> Result<FiniteSpectrum> {
    let mut theta_mult = vec![0u64; r.algebra.p()];
    let mut interior = Vec::new();
    for (j, &mult) in s.theta_mult.iter().enumerate() {
        if mult == 0 {
            continue;
        }
        let v = r.vertex_over(&SpectrumPoint::Theta(j)).ok_or_else(|| {
            Error::invalid(format!("theta_{j} lies outside the restriction"))
        })?;
        theta_mult[v] += mult;
    }
    for (i, t) in &s.interior {
        if let Some((pos, a, b)) = r.interval_over(*i, t, t) {
            interior.push((pos, (t - &a) / (&b - &a)));
        } else if let Some(v) = r.vertex_over(&SpectrumPoint::Interior {
            block: *i,
            t: t.clone(),
        }) {
            theta_mult[v] += 1;
        } else {
            return Err(Error::invalid(format!(
                "point ({i}, {t}) lies outside the restriction"
            )));
        }
    }
    FiniteSpectrum::canonical(&r.algebra, theta_mult, interior, s.zero_pad)
}

/// Rewrite a pattern whose evaluations stay inside the subset `r` was built
/// from, so that its source becomes the restricted presentation `r.algebra`.
fn retarget_source(pat: &PatternHom, r: &RestrictionResult) -> Result<PatternHom> {
    let mut vertex_spec = BTreeMap::new();
    for (j, vs) in pat.vertex_spec() {
        vertex_spec.insert(*j, transport_spectrum(vs, r)?);
    }
    let mut piece_maps = Vec::with_capacity(pat.piece_maps().len());
    for list in pat.piece_maps() {
        let mut new_list = Vec::with_capacity(list.len());
        for pm in list {
            let mut tracks = Vec::with_capacity(pm.tracks.len());
            for tr in &pm.tracks {
                match tr {
                    Track::Theta(j) => {
                        let v = r.vertex_over(&SpectrumPoint::Theta(*j)).ok_or_else(|| {
                            Error::invalid(format!("theta_{j} lies outside the restriction"))
                        })?;
                        tracks.push(Track::Theta(v));
                    }
                    Track::Pl { block, f } => {
                        let (rlo, rhi) = f.range();
                        if let Some((pos, a, b)) = r.interval_over(*block, &rlo, &rhi) {
                            let inv = PlFunc::affine(a.clone(), Q::zero(), b.clone(), Q::one());
                            tracks.push(Track::Pl {
                                block: pos,
                                f: inv.compose(f)?,
                            });
                        } else if rlo == rhi {
                            if let Some(v) = r.vertex_over(&SpectrumPoint::Interior {
                                block: *block,
                                t: rlo.clone(),
                            }) {
                                tracks.push(Track::Theta(v));
                            } else {
                                return Err(Error::invalid(format!(
                                    "point ({block}, {rlo}) lies outside the restriction"
                                )));
                            }
                        } else {
                            return Err(Error::invalid(format!(
                                "range [{rlo}, {rhi}] of block {block} is not covered by the restriction"
                            )));
                        }
                    }
                }
            }
            new_list.push(PieceMap {
                tracks,
                pad: pm.pad,
            });
        }
        piece_maps.push(new_list);
    }
    PatternHom::new(
        r.algebra.clone(),
        pat.target().clone(),
        pat.domain().clone(),
        vertex_spec,
        piece_maps,
    )
    .map(PatternHom::canonicalize)
}

// ---------------------------------------------------------------------------
// Junction bookkeeping for the strand transport
// ---------------------------------------------------------------------------

/// The raw material a piece map shows at one parameter value: the track
/// values per source block (no end rewriting), the constant vertex tracks,
/// and the zero pad.
struct JunctionData {
    values: Vec<(usize, Q)>,
    thetas: Vec<u64>,
    pad: u64,
}

fn junction_data(src_p: usize, pm: &PieceMap, t: &Q) -> Result<JunctionData> {
    let mut values = Vec::new();
    let mut thetas = vec![0u64; src_p];
    for tr in &pm.tracks {
        match tr {
            Track::Theta(j) => thetas[*j] += 1,
            Track::Pl { block, f } => values.push((*block, f.eval(t)?)),
        }
    }
    values.sort();
    Ok(JunctionData {
        values,
        thetas,
        pad: pm.pad,
    })
}

/// Can the two junctions be joined by strands: equal constant material and
/// per-block track values that pair up within the tolerance?
fn junctions_match(a: &JunctionData, b: &JunctionData, tol: &Q) -> bool {
    if a.thetas != b.thetas || a.pad != b.pad || a.values.len() != b.values.len() {
        return false;
    }
    a.values
        .iter()
        .zip(&b.values)
        .all(|((ba, va), (bb, vb))| ba == bb && (va - vb).abs() <= *tol)
}

/// The slope bound of a profile element over the interval blocks.
fn profile_slope(e: &ProfileElement) -> Q {
    let mut best = Q::zero();
    for row in &e.branches {
        for f in row {
            let s = f.max_abs_slope();
            if s > best {
                best = s;
            }
        }
    }
    best
}

/// The slope bound of a pattern's tracks.
fn pattern_slope(phi: &PatternHom) -> Q {
    let mut best = Q::zero();
    for list in phi.piece_maps() {
        for pm in list {
            for tr in &pm.tracks {
                if let Track::Pl { f, .. } = tr {
                    let s = f.max_abs_slope();
                    if s > best {
                        best = s;
                    }
                }
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// The collapse step
// ---------------------------------------------------------------------------

/// One strand being threaded through the parts of a collapsed piece.
struct Strand {
    block: usize,
    f: PlFunc,
}

/// Tracks of one support part restricted to a window, in piece-map order.
struct PartTracks {
    lo: Q,
    hi: Q,
    tracks: Vec<(usize, PlFunc)>,
    thetas: Vec<u64>,
    pad: u64,
}

fn part_tracks(
    src_p: usize,
    pm: &PieceMap,
    lo: &Q,
    hi: &Q,
) -> Result<PartTracks> {
    let mut tracks = Vec::new();
    let mut thetas = vec![0u64; src_p];
    for tr in &pm.tracks {
        match tr {
            Track::Theta(j) => thetas[*j] += 1,
            Track::Pl { block, f } => tracks.push((*block, f.restrict(lo, hi)?)),
        }
    }
    Ok(PartTracks {
        lo: lo.clone(),
        hi: hi.clone(),
        tracks,
        thetas,
        pad: pm.pad,
    })
}

/// Join the strands ending at `hi_prev` to the tracks of the next part,
/// matching per source block by sorted value within `tol`.
fn thread_gap(
    strands: &mut [Strand],
    next: &PartTracks,
    gap_lo: &Q,
    tol: &Q,
) -> Result<Vec<usize>> {
    // Pair strand indices with next-track indices, per source block, in
    // value order.  Returns, for each next-track index, the strand index
    // that continues into it.
    if strands.len() != next.tracks.len() {
        return Err(Error::invalid(format!(
            "support parts carry {} and {} strands across the gap at {gap_lo}",
            strands.len(),
            next.tracks.len()
        )));
    }
    let mut assignment = vec![usize::MAX; next.tracks.len()];
    let blocks: std::collections::BTreeSet<usize> =
        strands.iter().map(|s| s.block).collect();
    let next_blocks: std::collections::BTreeSet<usize> =
        next.tracks.iter().map(|(b, _)| *b).collect();
    if blocks != next_blocks {
        return Err(Error::invalid(format!(
            "support parts draw on different source blocks across the gap at {gap_lo}"
        )));
    }
    for b in blocks {
        let mut left: Vec<usize> = (0..strands.len())
            .filter(|&k| strands[k].block == b)
            .collect();
        left.sort_by(|&x, &y| strands[x].f.end_value().cmp(&strands[y].f.end_value()));
        let mut right: Vec<usize> = (0..next.tracks.len())
            .filter(|&k| next.tracks[k].0 == b)
            .collect();
        right.sort_by(|&x, &y| {
            next.tracks[x]
                .1
                .start_value()
                .cmp(&next.tracks[y].1.start_value())
        });
        if left.len() != right.len() {
            return Err(Error::invalid(format!(
                "source block {b} changes multiplicity across the gap at {gap_lo}"
            )));
        }
        for (l, r) in left.iter().zip(&right) {
            let va = strands[*l].f.end_value();
            let vb = next.tracks[*r].1.start_value();
            if (&va - &vb).abs() > *tol {
                return Err(Error::invalid(format!(
                    "track values {va} and {vb} on source block {b} do not pair within \
                     the tolerance across the gap at {gap_lo}"
                )));
            }
            assignment[*r] = *l;
        }
    }
    Ok(assignment)
}

/// Build the rewritten map into the restricted model by carrying the given
/// pattern's strands across each collapsed piece, bridging support gaps by
/// matched linear interpolation.
fn transported_pattern(
    phi: &PatternHom,
    r: &RestrictionResult,
    tol: &Q,
) -> Result<PatternHom> {
    let src = phi.source();
    let y = phi.domain();
    let full = ClosedSubset::full(&r.algebra);
    let mut vertex_spec = BTreeMap::new();
    for (v, point) in r.vertex_points.iter().enumerate() {
        let vs = match point {
            SpectrumPoint::Theta(j) => phi
                .vertex_spec()
                .get(j)
                .cloned()
                .ok_or_else(|| Error::internal(format!("no evaluation at theta_{j}")))?,
            SpectrumPoint::Interior { .. } => phi.eval_spectrum(point)?,
        };
        vertex_spec.insert(v, vs);
    }
    let mut piece_maps = Vec::with_capacity(r.algebra.l());
    for (_i2, (i, cmap)) in r.interval_maps.iter().enumerate() {
        let (zlo, zhi) = cmap.range();
        // The support parts covered by this collapsed piece, in order.
        let mut parts: Vec<PartTracks> = Vec::new();
        for (pc, pm) in y.pieces()[*i].iter().zip(&phi.piece_maps()[*i]) {
            let lo = if pc.lo < zlo { zlo.clone() } else { pc.lo.clone() };
            let hi = if pc.hi > zhi { zhi.clone() } else { pc.hi.clone() };
            if lo > hi {
                continue;
            }
            parts.push(part_tracks(src.p(), pm, &lo, &hi)?);
        }
        if parts.is_empty() || parts[0].lo != zlo || parts.last().unwrap().hi != zhi {
            return Err(Error::internal(format!(
                "collapsed piece [{zlo}, {zhi}] of block {i} is not anchored in the support"
            )));
        }
        let thetas = parts[0].thetas.clone();
        let pad = parts[0].pad;
        for part in &parts[1..] {
            if part.thetas != thetas || part.pad != pad {
                return Err(Error::invalid(format!(
                    "support parts of block {i} carry different constant material \
                     under the collapsed piece [{zlo}, {zhi}]"
                )));
            }
        }
        let mut strands: Vec<Strand> = parts[0]
            .tracks
            .iter()
            .map(|(b, f)| Strand {
                block: *b,
                f: f.clone(),
            })
            .collect();
        for part in &parts[1..] {
            let gap_lo = strands
                .first()
                .map(|s| s.f.domain().1)
                .unwrap_or_else(|| part.lo.clone());
            let assignment = thread_gap(&mut strands, part, &gap_lo, tol)?;
            for (k, &s_idx) in assignment.iter().enumerate() {
                let strand = &mut strands[s_idx];
                let (_, cur_hi) = strand.f.domain();
                let va = strand.f.end_value();
                let vb = part.tracks[k].1.start_value();
                let bridge = if va == vb {
                    PlFunc::new(vec![(cur_hi.clone(), va.clone()), (part.lo.clone(), vb)])?
                } else {
                    PlFunc::affine(cur_hi.clone(), va, part.lo.clone(), vb)
                };
                strand.f = strand.f.concat(&bridge)?;
                strand.f = strand.f.concat(&part.tracks[k].1)?;
            }
        }
        let mut tracks = Vec::new();
        for (j, &count) in thetas.iter().enumerate() {
            for _ in 0..count {
                tracks.push(Track::Theta(j));
            }
        }
        for strand in strands {
            tracks.push(Track::Pl {
                block: strand.block,
                f: strand.f.compose(cmap)?,
            });
        }
        piece_maps.push(vec![PieceMap { tracks, pad }]);
    }
    PatternHom::new(
        src.clone(),
        r.algebra.clone(),
        full,
        vertex_spec,
        piece_maps,
    )
    .map(PatternHom::canonicalize)
}

/// Collapse the support of an injective map onto a discretized model and
/// rewrite the map into it, halving the collapse fineness until the exact
/// audits (validity, injectivity, and both distance tables against `eps`)
/// all pass.
pub fn injective_step(
    phi: &PatternHom,
    f_set: &[ProfileElement],
    g_set: &[ProfileElement],
    eps: &Q,
) -> Result<StepResult> {
    let rep = phi.validate();
    if !rep.ok {
        return Err(Error::invalid(format!(
            "the map to rewrite is not a valid pattern: {}",
            rep.violations.join("; ")
        )));
    }
    let inj = phi.is_injective()?;
    if !inj.injective {
        let missed = inj
            .missed
            .map(|z| z.to_string())
            .unwrap_or_else(|| "unknown".into());
        return Err(Error::invalid(format!(
            "the map to rewrite is not injective on its support (missing {missed})"
        )));
    }
    if *eps <= Q::zero() || *eps >= Q::one() {
        return Err(Error::invalid("tolerance must lie strictly between 0 and 1"));
    }
    let target = phi.target();
    let y = phi.domain();
    let n_cap = target
        .k()
        .iter()
        .chain(target.dims().iter())
        .copied()
        .max()
        .unwrap_or(1)
        .max(1);
    let working: Vec<ProfileElement> = if f_set.is_empty() {
        vec![canonical_profile(phi.source(), 1)]
    } else {
        f_set.to_vec()
    };
    let bundle = choose_constants(phi.source(), n_cap, eps, &working)?;
    let tol = qi(2) * &bundle.eta1;

    // Largest fineness honoring the moduli: the cap, isolation of every
    // support gap whose sides do not pair up, and the slope moduli of the
    // tracked and approximated families.
    let mut delta = q(1, 4);
    let lip_phi = pattern_slope(phi);
    for i in 0..target.l() {
        let pieces = y.pieces()[i].as_slice();
        for w in 0..pieces.len().saturating_sub(1) {
            let left = junction_data(phi.source().p(), &phi.piece_maps()[i][w], &pieces[w].hi)?;
            let right =
                junction_data(phi.source().p(), &phi.piece_maps()[i][w + 1], &pieces[w + 1].lo)?;
            if !junctions_match(&left, &right, &tol) {
                let isolate = (&pieces[w + 1].lo - &pieces[w].hi) / qi(2);
                if isolate < delta {
                    delta = isolate;
                }
            }
        }
    }
    let lip_f = working.iter().map(profile_slope).fold(Q::zero(), Q::max);
    if lip_f > Q::zero() && lip_phi > Q::zero() {
        let cand = eps / (qi(4) * &lip_f * &lip_phi);
        if cand < delta {
            delta = cand;
        }
    }
    let lip_g = g_set.iter().map(profile_slope).fold(Q::zero(), Q::max);
    if lip_g > Q::zero() {
        let cand = eps / (qi(4) * &lip_g);
        if cand < delta {
            delta = cand;
        }
    }

    let mut last_reason = String::from("no fineness candidate");
    for halvings in 0..=20u32 {
        match attempt_step(phi, f_set, g_set, eps, &tol, &delta, halvings) {
            Ok(step) => return Ok(step),
            Err(Error::Invalid(reason)) => {
                last_reason = reason;
                delta = &delta / qi(2);
            }
            Err(other) => return Err(other),
        }
    }
    Err(Error::invalid(format!(
        "no collapse fineness passed the audits after 21 attempts \
         (binding constraint: {last_reason}; final fineness {delta})"
    )))
}

fn attempt_step(
    phi: &PatternHom,
    f_set: &[ProfileElement],
    g_set: &[ProfileElement],
    eps: &Q,
    tol: &Q,
    delta: &Q,
    halvings: u32,
) -> Result<StepResult> {
    let target = phi.target();
    let y = phi.domain();
    let (z, rho) = discretize(target, y, delta)?;
    let r = restrict_algebra(target, &z)?;
    let psi = transported_pattern(phi, &r, tol)?;
    let rep = psi.validate();
    if !rep.ok {
        return Err(Error::invalid(format!(
            "the rewritten map is not a valid pattern: {}",
            rep.violations.join("; ")
        )));
    }
    let inj = psi.is_injective()?;
    if !inj.injective {
        let missed = inj
            .missed
            .as_ref()
            .map(|p| p.to_string())
            .unwrap_or_else(|| "unknown".into());
        return Err(Error::invalid(format!(
            "the rewritten map misses {missed}"
        )));
    }
    let q_pat = collapse_pattern(target, y, &rho, &r)?;
    let psi_back = compose(&psi, &q_pat)?;
    let mut commutation = Vec::with_capacity(f_set.len());
    for (idx, f) in f_set.iter().enumerate() {
        let d = spec_distance(phi, &psi_back, ElementRef::Profile(f))?;
        if d > *eps {
            return Err(Error::invalid(format!(
                "commutation entry {idx} measures {d}, above the tolerance {eps}"
            )));
        }
        commutation.push(d);
    }
    let id_cut = cut_domain(&PatternHom::identity(target), y)?;
    let rho_pat = compose(&r.inclusion, &q_pat)?;
    let mut approximation = Vec::with_capacity(g_set.len());
    for (idx, g) in g_set.iter().enumerate() {
        let d = spec_distance(&id_cut, &rho_pat, ElementRef::Profile(g))?;
        if d > *eps {
            return Err(Error::invalid(format!(
                "approximation entry {idx} measures {d}, above the tolerance {eps}"
            )));
        }
        approximation.push(d);
    }
    Ok(StepResult {
        set: z,
        algebra: r.algebra.clone(),
        map: psi,
        embedding: q_pat,
        report: StepReport {
            delta: delta.clone(),
            halvings,
            injectivity: inj,
            commutation,
            approximation,
        },
    })
}

// ---------------------------------------------------------------------------
// The chain driver
// ---------------------------------------------------------------------------

/// Rewrite a whole chain: reduce every stage to the part surviving into the
/// last one, seed the first collapsed model, then iterate the collapse step
/// along the induced maps, tracking element prefixes per the schedule.
pub fn rewrite_chain(spec: &ChainSpec) -> Result<RewriteCertificate> {
    spec.validate()?;
    let n = spec.stages.len();
    let eps = &spec.eps_schedule;

    // Composites into the last stage.
    let mut comp: Vec<PatternHom> = Vec::with_capacity(n);
    comp.push(PatternHom::identity(&spec.stages[n - 1]));
    for k in (0..n - 1).rev() {
        let next = comp.last().unwrap();
        comp.push(compose(&spec.maps[k], next)?);
    }
    comp.reverse();

    // Reduced stages: each original stage cut to the support of its
    // composite into the last one.
    let mut reductions: Vec<RestrictionResult> = Vec::with_capacity(n);
    for (k, c) in comp.iter().enumerate() {
        let v = c.sp_image()?;
        if v.is_empty() {
            return Err(Error::invalid(format!(
                "stage {k} dies completely along the chain"
            )));
        }
        reductions.push(restrict_algebra(&spec.stages[k], &v)?);
    }
    let reduced: Vec<Presentation> = reductions.iter().map(|r| r.algebra.clone()).collect();

    // Induced maps between reduced stages.
    let mut induced: Vec<PatternHom> = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let v_next = comp[k + 1].sp_image()?;
        let cut = cut_domain(&spec.maps[k], &v_next)?;
        let lifted = compose(&cut, &reductions[k + 1].inclusion)?;
        let ind = retarget_source(&lifted, &reductions[k])?;
        let rep = ind.validate();
        if !rep.ok {
            return Err(Error::internal(format!(
                "stage {k}: the induced map between reduced stages is malformed: {}",
                rep.violations.join("; ")
            )));
        }
        let inj = ind.is_injective()?;
        if !inj.injective {
            return Err(Error::invalid(format!(
                "stage {k}: the induced map between reduced stages is not injective; \
                 the chain cannot be rewritten"
            )));
        }
        induced.push(ind);
    }

    // Stage element lists carried into the reduced stages.
    let mut pushed: Vec<Vec<ProfileElement>> = Vec::with_capacity(n);
    for (k, list) in spec.dense_sets.iter().enumerate() {
        let mut out = Vec::with_capacity(list.len());
        for e in list {
            out.push(reductions[k].inclusion.push_element(e)?);
        }
        pushed.push(out);
    }

    // Seed the first model by collapsing the first reduced stage alone.
    let seed_f = vec![canonical_profile(&reduced[0], 1)];
    let seed_g: Vec<ProfileElement> = pushed[0].iter().take(1).cloned().collect();
    let seed_eps = &eps[0] / qi(2);
    let seed = injective_step(
        &PatternHom::identity(&reduced[0]),
        &seed_f,
        &seed_g,
        &seed_eps,
    )?;

    let mut new_stages: Vec<Presentation> = Vec::with_capacity(n);
    let mut embeddings: Vec<PatternHom> = Vec::with_capacity(n);
    let mut injective_maps: Vec<PatternHom> = Vec::with_capacity(n - 1);
    let mut reports: Vec<StageReport> = Vec::with_capacity(n);
    new_stages.push(seed.algebra.clone());
    embeddings.push(seed.embedding.clone());
    reports.push(StageReport {
        stage: 0,
        commutation_bound: seed_eps.clone(),
        approximation_bound: seed_eps.clone(),
        step: seed.report.clone(),
    });

    // Iterate the collapse step along the chain.
    for s in 0..n - 1 {
        let step_full = compose(&embeddings[s], &induced[s])?;
        let (_support, phi_hat) = image_restrict(&step_full)?;
        // Tracked family: prefixes of each earlier model's canonical list,
        // carried forward through the new maps.
        let mut f_set: Vec<ProfileElement> = Vec::new();
        for i in 0..=s {
            for j in 1..=(s as u64 + 1) {
                let mut e = canonical_profile(&new_stages[i], j);
                for psi in injective_maps.iter().take(s).skip(i) {
                    e = psi.push_element(&e)?;
                }
                f_set.push(e);
            }
        }
        let g_set: Vec<ProfileElement> = pushed[s + 1].iter().take(s + 2).cloned().collect();
        let approx_bound = &eps[s + 1] / qi(2);
        let eps_step = if eps[s] <= approx_bound {
            eps[s].clone()
        } else {
            approx_bound.clone()
        };
        let step = injective_step(&phi_hat, &f_set, &g_set, &eps_step)?;
        new_stages.push(step.algebra.clone());
        embeddings.push(step.embedding.clone());
        injective_maps.push(step.map.clone());
        reports.push(StageReport {
            stage: s + 1,
            commutation_bound: eps[s].clone(),
            approximation_bound: approx_bound,
            step: step.report.clone(),
        });
    }

    Ok(RewriteCertificate {
        reduced_stages: reduced,
        new_stages,
        injective_maps,
        embeddings,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::TinyRng;
    use crate::spectrum::Piece;

    fn line() -> Presentation {
        Presentation::new(
            vec![1, 1],
            vec![1],
            vec![vec![1, 0]],
            vec![vec![0, 1]],
            true,
        )
        .unwrap()
    }

    /// The map C[0,1] -> C[0,1], f |-> f(z/2), as a pattern.
    fn half_map(p: &Presentation) -> PatternHom {
        let mut vs = BTreeMap::new();
        vs.insert(
            0,
            FiniteSpectrum::canonical(p, vec![1, 0], vec![], 0).unwrap(),
        );
        vs.insert(
            1,
            FiniteSpectrum::canonical(p, vec![0, 0], vec![(0, q(1, 2))], 0).unwrap(),
        );
        let pm = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::affine(Q::zero(), Q::zero(), Q::one(), q(1, 2)),
            }],
            pad: 0,
        };
        PatternHom::new(
            p.clone(),
            p.clone(),
            ClosedSubset::full(p),
            vs,
            vec![vec![pm]],
        )
        .unwrap()
    }

    fn identity_profile(p: &Presentation) -> ProfileElement {
        canonical_profile(p, 1)
    }

    /// A constant self-adjoint element; its zero slope keeps the collapse
    /// fineness at the cap.
    fn constant_profile(p: &Presentation, c: Q) -> ProfileElement {
        let theta_eigs = p.k().iter().map(|&kj| vec![c.clone(); kj as usize]).collect();
        let branches = p
            .dims()
            .iter()
            .map(|&d| {
                (0..d)
                    .map(|_| PlFunc::new(vec![(Q::zero(), c.clone()), (Q::one(), c.clone())]).unwrap())
                    .collect()
            })
            .collect();
        ProfileElement {
            theta_eigs,
            branches,
        }
    }

    #[test]
    fn image_restrict_keeps_full_supports() {
        let p = line();
        let id = PatternHom::identity(&p);
        let (y, cut) = image_restrict(&id).unwrap();
        assert_eq!(y, ClosedSubset::full(&p));
        assert_eq!(cut.domain(), &ClosedSubset::full(&p));
    }

    #[test]
    fn image_restrict_rejects_the_zero_pattern() {
        let p = line();
        let mut vs = BTreeMap::new();
        vs.insert(0, FiniteSpectrum::canonical(&p, vec![0, 0], vec![], 1).unwrap());
        vs.insert(1, FiniteSpectrum::canonical(&p, vec![0, 0], vec![], 1).unwrap());
        let pm = PieceMap {
            tracks: vec![],
            pad: 1,
        };
        let zero = PatternHom::new(
            p.clone(),
            p.clone(),
            ClosedSubset::full(&p),
            vs,
            vec![vec![pm]],
        )
        .unwrap();
        let err = image_restrict(&zero).unwrap_err();
        assert!(err.to_string().contains("identically zero"));
    }

    #[test]
    fn identity_step_collapses_nothing_and_measures_zero() {
        let p = line();
        let id = PatternHom::identity(&p);
        let f = vec![identity_profile(&p)];
        let g = vec![identity_profile(&p)];
        let step = injective_step(&id, &f, &g, &q(1, 10)).unwrap();
        assert_eq!(step.set, ClosedSubset::full(&p));
        assert_eq!(step.algebra.l(), 1);
        assert!(step.report.injectivity.injective);
        assert!(step.report.commutation.iter().all(|d| d.is_zero()));
        assert!(step.report.approximation.iter().all(|d| d.is_zero()));
        assert_eq!(step.report.halvings, 0);
    }

    #[test]
    fn non_injective_maps_are_rejected_upfront() {
        let p = line();
        let phi = half_map(&p);
        let err = injective_step(&phi, &[identity_profile(&p)], &[], &q(1, 10)).unwrap_err();
        assert!(err.to_string().contains("not injective"));
    }

    /// A support with two pieces whose evaluations agree across the gap: a
    /// coarse collapse bridges the gap with one stretched piece and the
    /// rewritten map stays injective.
    #[test]
    fn matched_gaps_are_bridged_by_a_coarse_collapse() {
        let p = line();
        // Tracks: 10z on [0, 1/20] and 5z on [1/10, 1/5]; the values at the
        // gap ends both equal 1/2, and together the tracks cover [0, 1].
        // The gap (1/20, 1/10) sits inside one cell of the coarse grid.
        let y = ClosedSubset::closure(
            &p,
            RawSubset {
                thetas: [0usize].into_iter().collect(),
                pieces: vec![vec![
                    Piece::new(Q::zero(), q(1, 20)).unwrap(),
                    Piece::new(q(1, 10), q(1, 5)).unwrap(),
                ]],
            },
        )
        .unwrap();
        let mut vs = BTreeMap::new();
        vs.insert(0, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).unwrap());
        let pm1 = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::affine(Q::zero(), Q::zero(), q(1, 20), q(1, 2)),
            }],
            pad: 0,
        };
        let pm2 = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::affine(q(1, 10), q(1, 2), q(1, 5), Q::one()),
            }],
            pad: 0,
        };
        let phi = PatternHom::new(p.clone(), p.clone(), y, vs, vec![vec![pm1, pm2]]).unwrap();
        assert!(phi.validate().ok);
        assert!(phi.is_injective().unwrap().injective);
        // Constant element families keep the slope moduli out of the way, so
        // the fineness stays at the cap and the collapse must bridge the gap.
        let flat = vec![constant_profile(&p, q(1, 3))];
        let step = injective_step(&phi, &flat, &[], &q(1, 2)).unwrap();
        assert_eq!(step.report.delta, q(1, 4));
        // One collapsed piece spanning [0, 1/5]: the model has one block.
        assert_eq!(step.algebra.l(), 1);
        assert!(step.report.injectivity.injective);
        let rep = step.map.validate();
        assert!(rep.ok, "{:?}", rep.violations);
    }

    /// When the evaluations jump across the gap, the fineness must shrink
    /// until the gap is isolated, and the two pieces stay separate.
    #[test]
    fn unmatched_gaps_are_isolated() {
        let p = line();
        let y = ClosedSubset::closure(
            &p,
            RawSubset {
                thetas: [0usize].into_iter().collect(),
                pieces: vec![vec![
                    Piece::new(Q::zero(), q(3, 10)).unwrap(),
                    Piece::new(q(2, 5), Q::one()).unwrap(),
                ]],
            },
        )
        .unwrap();
        let mut vs = BTreeMap::new();
        vs.insert(0, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).unwrap());
        vs.insert(1, FiniteSpectrum::canonical(&p, vec![0, 1], vec![], 0).unwrap());
        // 2z on the first piece (ends at 3/5); from 0 to 1 on the second
        // piece: the values jump from 3/5 to 0 across the gap.
        let pm1 = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::affine(Q::zero(), Q::zero(), q(3, 10), q(3, 5)),
            }],
            pad: 0,
        };
        let pm2 = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::affine(q(2, 5), Q::zero(), Q::one(), Q::one()),
            }],
            pad: 0,
        };
        let phi = PatternHom::new(p.clone(), p.clone(), y, vs, vec![vec![pm1, pm2]]).unwrap();
        assert!(phi.validate().ok);
        assert!(phi.is_injective().unwrap().injective);
        let step = injective_step(&phi, &[], &[], &q(1, 2)).unwrap();
        // The gap has width 1/10, so the chosen fineness isolates it.
        assert!(step.report.delta <= q(1, 20));
        assert_eq!(step.algebra.l(), 2);
        assert!(step.report.injectivity.injective);
    }

    #[test]
    fn half_interval_chain_rewrites_exactly() {
        let p = line();
        let spec = ChainSpec {
            stages: vec![p.clone(), p.clone()],
            maps: vec![half_map(&p)],
            dense_sets: vec![vec![identity_profile(&p)], vec![identity_profile(&p)]],
            eps_schedule: vec![q(1, 2), q(1, 4)],
        };
        let cert = rewrite_chain(&spec).unwrap();
        assert_eq!(cert.new_stages.len(), 2);
        assert_eq!(cert.injective_maps.len(), 1);
        // The first reduced stage is the half interval: same shape as the
        // full interval, one block, two vertices.
        let b1 = &cert.new_stages[0];
        assert_eq!(b1.k(), &[1, 1]);
        assert_eq!(b1.dims(), &[1]);
        assert_eq!(b1.alpha(), &[vec![1, 0]]);
        assert_eq!(b1.beta(), &[vec![0, 1]]);
        let report = &cert.reports[1];
        assert!(report.step.injectivity.injective);
        assert!(
            report.step.commutation.iter().all(|d| d.is_zero()),
            "commutation table {:?}",
            report.step.commutation
        );
        for (rep, bound) in cert.reports.iter().zip([q(1, 4), q(1, 2)]) {
            for d in &rep.step.commutation {
                assert!(*d <= bound);
            }
        }
    }

    #[test]
    fn identity_chains_are_fixed_points() {
        let p = line();
        let spec = ChainSpec {
            stages: vec![p.clone(), p.clone(), p.clone()],
            maps: vec![PatternHom::identity(&p), PatternHom::identity(&p)],
            dense_sets: vec![
                vec![identity_profile(&p)],
                vec![identity_profile(&p)],
                vec![identity_profile(&p)],
            ],
            eps_schedule: ChainSpec::default_schedule(3),
        };
        let cert = rewrite_chain(&spec).unwrap();
        for b in &cert.new_stages {
            assert_eq!(b.k(), p.k());
            assert_eq!(b.dims(), p.dims());
        }
        for rep in &cert.reports {
            assert!(rep.step.injectivity.injective);
            assert!(rep.step.commutation.iter().all(|d| d.is_zero()));
            assert!(rep.step.approximation.iter().all(|d| d.is_zero()));
        }
        for psi in &cert.injective_maps {
            assert!(psi.is_injective().unwrap().injective);
        }
    }

    #[test]
    fn point_collapse_seeds_a_matrix_summand() {
        let p = line();
        // First map evaluates everything at 1/2; the rest of the chain is
        // the identity.
        let mut vs = BTreeMap::new();
        let at_half = FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(1, 2))], 0).unwrap();
        vs.insert(0, at_half.clone());
        vs.insert(1, at_half.clone());
        let pm = PieceMap {
            tracks: vec![Track::Pl {
                block: 0,
                f: PlFunc::new(vec![(Q::zero(), q(1, 2)), (Q::one(), q(1, 2))]).unwrap(),
            }],
            pad: 0,
        };
        let point_eval = PatternHom::new(
            p.clone(),
            p.clone(),
            ClosedSubset::full(&p),
            vs,
            vec![vec![pm]],
        )
        .unwrap();
        let spec = ChainSpec {
            stages: vec![p.clone(), p.clone(), p.clone()],
            maps: vec![point_eval, PatternHom::identity(&p)],
            dense_sets: vec![
                vec![identity_profile(&p)],
                vec![identity_profile(&p)],
                vec![identity_profile(&p)],
            ],
            eps_schedule: ChainSpec::default_schedule(3),
        };
        let cert = rewrite_chain(&spec).unwrap();
        // The first stage survives only at the evaluation point, so its
        // model is a single matrix summand: no interval blocks.
        assert_eq!(cert.new_stages[0].l(), 0);
        assert_eq!(cert.new_stages[0].p(), 1);
        for rep in &cert.reports {
            assert!(rep.step.injectivity.injective);
        }
        for psi in &cert.injective_maps {
            assert!(psi.is_injective().unwrap().injective);
        }
    }

    #[test]
    fn schedules_must_decrease() {
        let p = line();
        let spec = ChainSpec {
            stages: vec![p.clone(), p.clone()],
            maps: vec![PatternHom::identity(&p)],
            dense_sets: vec![vec![], vec![]],
            eps_schedule: vec![q(1, 4), q(1, 2)],
        };
        let err = rewrite_chain(&spec).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"));
    }

    #[test]
    fn random_three_stage_chains_rewrite_injectively() {
        let p = line();
        let mut rng = TinyRng(7);
        for _ in 0..5 {
            // Random surjective-onto-[0,1] zigzag map: a tent with a random
            // peak keeps the composite injective.
            let peak_num = 1 + rng.below(6) as i64;
            let peak = q(peak_num, 8);
            let tent = PlFunc::new(vec![
                (Q::zero(), Q::zero()),
                (peak.clone(), Q::one()),
                (Q::one(), Q::zero()),
            ])
            .unwrap();
            let mut vs = BTreeMap::new();
            vs.insert(0, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).unwrap());
            vs.insert(1, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).unwrap());
            let tent_map = PatternHom::new(
                p.clone(),
                p.clone(),
                ClosedSubset::full(&p),
                vs,
                vec![vec![PieceMap {
                    tracks: vec![Track::Pl { block: 0, f: tent }],
                    pad: 0,
                }]],
            )
            .unwrap();
            let spec = ChainSpec {
                stages: vec![p.clone(), p.clone(), p.clone()],
                maps: vec![tent_map, PatternHom::identity(&p)],
                dense_sets: vec![
                    vec![identity_profile(&p)],
                    vec![identity_profile(&p)],
                    vec![identity_profile(&p)],
                ],
                eps_schedule: ChainSpec::default_schedule(3),
            };
            let cert = rewrite_chain(&spec).unwrap();
            for psi in &cert.injective_maps {
                assert!(psi.is_injective().unwrap().injective);
            }
            for (rep, bound) in cert.reports.iter().zip(&spec.eps_schedule) {
                for d in &rep.step.commutation {
                    assert!(d <= bound, "commutation {d} above {bound}");
                }
            }
        }
    }
}
