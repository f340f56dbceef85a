//! Homomorphisms between presented algebras, modeled spectrally.
//!
//! A homomorphism into a matrix fiber is recorded (up to unitary
//! equivalence) by its spectrum: a multiset of spectrum points of the
//! source plus a zero summand — a [`FiniteSpectrum`].  A homomorphism into
//! a whole presented algebra (or its restriction to a closed subset of the
//! target spectrum) is recorded by a [`PatternHom`]: one finite spectrum
//! per target vertex, and along every interval piece of the target a finite
//! family of *tracks* — piecewise-linear motions of source points — plus a
//! constant zero pad.
//!
//! Everything here is exact: evaluation, composition, images, injectivity,
//! and the sorted-eigenvalue sup distance between two patterns on a common
//! element.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pl::{crossing_partition, PlFunc};
use crate::presentation::Presentation;
use crate::rational::{q_from_str, q_to_string, Q};
use crate::spectrum::{ClosedSubset, Piece, RawSubset, SpectrumPoint};
use crate::testfn::{EigList, TestFunction};
use num_traits::{One, Signed, Zero};

/// Dimension of the fiber over a canonical spectrum point.
pub fn dimension_at(p: &Presentation, z: &SpectrumPoint) -> u64 {
    match z {
        SpectrumPoint::Theta(j) => p.k()[*j],
        SpectrumPoint::Interior { block, .. } => p.dims()[*block],
    }
}

// ---------------------------------------------------------------------------
// Finite spectra
// ---------------------------------------------------------------------------

/// The spectrum of a homomorphism into a single matrix fiber: vertex
/// multiplicities, interior points with multiplicity, and the rank of the
/// zero summand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpectrum {
    pub theta_mult: Vec<u64>,
    /// Sorted `(block, coordinate)` pairs, coordinates strictly inside
    /// `(0, 1)` once canonical.
    pub interior: Vec<(usize, Q)>,
    pub zero_pad: u64,
}

impl FiniteSpectrum {
    pub fn zero(p: &Presentation) -> Self {
        FiniteSpectrum {
            theta_mult: vec![0; p.p()],
            interior: Vec::new(),
            zero_pad: 0,
        }
    }

    /// Canonicalize raw data: sort the interior multiset and rewrite
    /// boundary coordinates into vertex multiplicities (a point at
    /// coordinate 0 of block `i` is the alpha-expansion of the vertices, at
    /// 1 the beta-expansion, plus a zero pad for any unital deficit).
    /// Total size is preserved.
    pub fn canonical(p: &Presentation, theta_mult: Vec<u64>, interior: Vec<(usize, Q)>, zero_pad: u64) -> Result<Self> {
        if theta_mult.len() != p.p() {
            return Err(Error::invalid("vertex multiplicity vector has wrong length"));
        }
        let mut out = FiniteSpectrum {
            theta_mult,
            interior: Vec::with_capacity(interior.len()),
            zero_pad,
        };
        for (i, t) in interior {
            if i >= p.l() {
                return Err(Error::invalid(format!("block index {i} out of range")));
            }
            if t < Q::zero() || t > Q::one() {
                return Err(Error::invalid(format!(
                    "interior coordinate {} out of range",
                    q_to_string(&t)
                )));
            }
            if t.is_zero() {
                for (j, a) in p.alpha()[i].iter().enumerate() {
                    out.theta_mult[j] += a;
                }
                out.zero_pad += p.dims()[i] - p.alpha_fill(i);
            } else if t.is_one() {
                for (j, b) in p.beta()[i].iter().enumerate() {
                    out.theta_mult[j] += b;
                }
                out.zero_pad += p.dims()[i] - p.beta_fill(i);
            } else {
                out.interior.push((i, t));
            }
        }
        out.interior.sort();
        Ok(out)
    }

    /// Re-canonicalize an existing spectrum (idempotent).
    pub fn boundary_rewrite(&self, p: &Presentation) -> Result<Self> {
        FiniteSpectrum::canonical(p, self.theta_mult.clone(), self.interior.clone(), self.zero_pad)
    }

    /// Total represented matrix size.
    pub fn size(&self, p: &Presentation) -> u64 {
        let mut n = self.zero_pad;
        for (j, &m) in self.theta_mult.iter().enumerate() {
            n += m * p.k()[j];
        }
        for (i, _) in &self.interior {
            n += p.dims()[*i];
        }
        n
    }

    /// Add `mult` copies of `other` into `self`.
    pub fn scaled_add(&mut self, other: &FiniteSpectrum, mult: u64) {
        if mult == 0 {
            return;
        }
        for (j, m) in other.theta_mult.iter().enumerate() {
            self.theta_mult[j] += m * mult;
        }
        for _ in 0..mult {
            self.interior.extend(other.interior.iter().cloned());
        }
        self.interior.sort();
        self.zero_pad += other.zero_pad * mult;
    }

    /// Eigenvalue list of an element at all points of this spectrum.
    pub fn eig_of(&self, p: &Presentation, elem: ElementRef<'_>) -> Result<EigList> {
        let mut values: Vec<Q> = Vec::new();
        for (j, &m) in self.theta_mult.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let e = elem.eig_at(p, &SpectrumPoint::Theta(j))?;
            for _ in 0..m {
                values.extend(e.values().iter().cloned());
            }
        }
        for (i, t) in &self.interior {
            let e = elem.eig_at(
                p,
                &SpectrumPoint::Interior { block: *i, t: t.clone() },
            )?;
            values.extend(e.values().iter().cloned());
        }
        values.extend(std::iter::repeat(Q::zero()).take(self.zero_pad as usize));
        Ok(EigList::from_unsorted(values))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "theta_mult": self.theta_mult,
            "interior": self
                .interior
                .iter()
                .map(|(i, t)| serde_json::json!([i, q_to_string(t)]))
                .collect::<Vec<_>>(),
            "zero_pad": self.zero_pad,
        })
    }

    pub fn from_json(p: &Presentation, v: &serde_json::Value) -> Result<Self> {
        let theta_mult: Vec<u64> = v
            .get("theta_mult")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::schema("finite spectrum needs theta_mult"))?
            .iter()
            .map(|x| x.as_u64().ok_or_else(|| Error::schema("theta_mult entries must be nonnegative integers")))
            .collect::<Result<_>>()?;
        let mut interior = Vec::new();
        if let Some(arr) = v.get("interior").and_then(|x| x.as_array()) {
            for e in arr {
                let pair = e
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::schema("interior entries must be [block, coord] pairs"))?;
                let i = pair[0]
                    .as_u64()
                    .ok_or_else(|| Error::schema("interior block index must be an integer"))?
                    as usize;
                let t = q_from_str(
                    pair[1]
                        .as_str()
                        .ok_or_else(|| Error::schema("interior coordinate must be a rational string"))?,
                )?;
                interior.push((i, t));
            }
        }
        let zero_pad = v.get("zero_pad").and_then(|x| x.as_u64()).unwrap_or(0);
        FiniteSpectrum::canonical(p, theta_mult, interior, zero_pad)
    }
}

// ---------------------------------------------------------------------------
// Elements: profiles and test functions under one roof
// ---------------------------------------------------------------------------

/// A self-adjoint element presented by its eigenvalue field: one sorted
/// list per vertex and one branch family per interval block, tied together
/// at the glued ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileElement {
    /// `theta_eigs[j]`: the `k_j` eigenvalues at vertex `j`, sorted.
    pub theta_eigs: Vec<Vec<Q>>,
    /// `branches[i]`: `dims[i]` piecewise-linear functions on `[0, 1]`.
    pub branches: Vec<Vec<PlFunc>>,
}

impl ProfileElement {
    /// Check the shape and the glued-end multiset conditions: at
    /// coordinate 0 of block `i` the branch values must form the
    /// alpha-expansion of the vertex lists (zero-padded), at 1 the
    /// beta-expansion.
    pub fn validate(&self, p: &Presentation) -> Result<()> {
        if self.theta_eigs.len() != p.p() || self.branches.len() != p.l() {
            return Err(Error::invalid("profile has wrong number of blocks"));
        }
        for (j, list) in self.theta_eigs.iter().enumerate() {
            if list.len() != p.k()[j] as usize {
                return Err(Error::invalid(format!(
                    "vertex {j}: expected {} eigenvalues, got {}",
                    p.k()[j],
                    list.len()
                )));
            }
        }
        for (i, fam) in self.branches.iter().enumerate() {
            if fam.len() != p.dims()[i] as usize {
                return Err(Error::invalid(format!(
                    "block {i}: expected {} branches, got {}",
                    p.dims()[i],
                    fam.len()
                )));
            }
            for f in fam {
                if f.domain() != (Q::zero(), Q::one()) {
                    return Err(Error::invalid(format!("block {i}: branch domain is not [0, 1]")));
                }
            }
            for (end, row) in [(Q::zero(), &p.alpha()[i]), (Q::one(), &p.beta()[i])] {
                let mut got: Vec<Q> = fam.iter().map(|f| f.eval(&end)).collect::<Result<_>>()?;
                got.sort();
                let mut want: Vec<Q> = Vec::new();
                for (j, &mult) in row.iter().enumerate() {
                    for _ in 0..mult {
                        want.extend(self.theta_eigs[j].iter().cloned());
                    }
                }
                while want.len() < p.dims()[i] as usize {
                    want.push(Q::zero());
                }
                want.sort();
                if got != want {
                    return Err(Error::invalid(format!(
                        "block {i}: branch values at {} do not match the glued expansion",
                        q_to_string(&end)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Eigenvalue list at a (possibly raw-boundary) spectrum point.
    pub fn eig_at(&self, p: &Presentation, x: &SpectrumPoint) -> Result<EigList> {
        match x {
            SpectrumPoint::Theta(j) => {
                if *j >= p.p() {
                    return Err(Error::invalid(format!("vertex index {j} out of range")));
                }
                Ok(EigList::from_unsorted(self.theta_eigs[*j].clone()))
            }
            SpectrumPoint::Interior { block, t } => {
                if *block >= p.l() {
                    return Err(Error::invalid(format!("block index {block} out of range")));
                }
                let vals = self.branches[*block]
                    .iter()
                    .map(|f| f.eval(t))
                    .collect::<Result<Vec<_>>>()?;
                Ok(EigList::from_unsorted(vals))
            }
        }
    }
}

/// A deterministic supply of valid profile elements: vertex eigenvalues
/// from a fixed low-discrepancy pattern, and on each interval block the
/// straight-line interpolation from the sorted left expansion to the sorted
/// right expansion.  Different indices give elements separating enough
/// spectra for dense-set bookkeeping.
pub fn canonical_profile(p: &Presentation, idx: u64) -> ProfileElement {
    let denom: i64 = 23;
    let mut theta_eigs: Vec<Vec<Q>> = Vec::with_capacity(p.p());
    for j in 0..p.p() {
        let mut list: Vec<Q> = (0..p.k()[j])
            .map(|s| {
                let h = (idx as i64) * 31 + (j as i64) * 17 + (s as i64) * 7;
                Q::new((h.rem_euclid(denom)).into(), denom.into())
            })
            .collect();
        list.sort();
        theta_eigs.push(list);
    }
    let mut branches = Vec::with_capacity(p.l());
    for i in 0..p.l() {
        let expand = |row: &[u64]| -> Vec<Q> {
            let mut v: Vec<Q> = Vec::new();
            for (j, &mult) in row.iter().enumerate() {
                for _ in 0..mult {
                    v.extend(theta_eigs[j].iter().cloned());
                }
            }
            while v.len() < p.dims()[i] as usize {
                v.push(Q::zero());
            }
            v.sort();
            v
        };
        let left = expand(&p.alpha()[i]);
        let right = expand(&p.beta()[i]);
        let fam = left
            .into_iter()
            .zip(right)
            .map(|(a, b)| {
                if a == b {
                    PlFunc::constant(Q::zero(), Q::one(), a)
                } else {
                    PlFunc::affine(Q::zero(), a, Q::one(), b)
                }
            })
            .collect();
        branches.push(fam);
    }
    ProfileElement { theta_eigs, branches }
}

/// A borrowed element of the source algebra, in either representation.
#[derive(Clone, Copy)]
pub enum ElementRef<'a> {
    Profile(&'a ProfileElement),
    Test(&'a TestFunction),
}

impl<'a> ElementRef<'a> {
    pub fn eig_at(&self, p: &Presentation, x: &SpectrumPoint) -> Result<EigList> {
        match self {
            ElementRef::Profile(f) => f.eig_at(p, x),
            ElementRef::Test(h) => h.eig_at(p, x),
        }
    }

    /// The scalar eigenvalue branches of the element along one interval
    /// block, as functions on `[0, 1]` (piecewise-linear, exact).
    fn branches_on_block(&self, p: &Presentation, block: usize) -> Result<Vec<PlFunc>> {
        let dim = p.dims()[block] as usize;
        match self {
            ElementRef::Profile(f) => Ok(f.branches[block].clone()),
            ElementRef::Test(h) => match h {
                TestFunction::Type1 { j, .. } => {
                    let rank_l = (p.alpha()[block][*j] * p.k()[*j]) as usize;
                    let rank_r = (p.beta()[block][*j] * p.k()[*j]) as usize;
                    let left = h.left_profile(block);
                    let right = h.right_profile(block);
                    let zero = PlFunc::constant(Q::zero(), Q::one(), Q::zero());
                    (0..dim)
                        .map(|s| {
                            // The two ramps have disjoint supports, so a
                            // slot in both expansions carries their sum.
                            match (s < rank_l, s < rank_r) {
                                (true, true) => left.add(&right),
                                (true, false) => Ok(left.clone()),
                                (false, true) => Ok(right.clone()),
                                (false, false) => Ok(zero.clone()),
                            }
                        })
                        .collect()
                }
                TestFunction::Type2 { i, .. } => {
                    if *i == block {
                        Ok(vec![h.scalar_profile(block); dim])
                    } else {
                        Ok(vec![PlFunc::constant(Q::zero(), Q::one(), Q::zero()); dim])
                    }
                }
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern homomorphisms
// ---------------------------------------------------------------------------

/// One strand of a pattern along a target piece: either a constant source
/// vertex, or a piecewise-linear motion within one source interval block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Track {
    Theta(usize),
    Pl { block: usize, f: PlFunc },
}

/// The track family and zero pad along one piece of the target spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceMap {
    pub tracks: Vec<Track>,
    pub pad: u64,
}

/// A homomorphism `source -> target` (or into the restriction of the
/// target to `domain`), recorded by its spectral pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternHom {
    source: Presentation,
    target: Presentation,
    domain: ClosedSubset,
    vertex_spec: BTreeMap<usize, FiniteSpectrum>,
    /// `piece_maps[i][k]` belongs to `domain.pieces()[i][k]`.
    piece_maps: Vec<Vec<PieceMap>>,
}

/// Validation outcome for a pattern; `ok` iff no violations.
#[derive(Debug, Clone)]
pub struct PatternReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Injectivity outcome: a witness point outside the image when not
/// injective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectivityReport {
    pub injective: bool,
    pub missed: Option<SpectrumPoint>,
}

impl PatternHom {
    /// Structural constructor: shapes and track domains must line up with
    /// the domain subset; semantic conditions (sizes, glued-end
    /// compatibility, track ranges) are checked by [`PatternHom::validate`].
    pub fn new(
        source: Presentation,
        target: Presentation,
        domain: ClosedSubset,
        vertex_spec: BTreeMap<usize, FiniteSpectrum>,
        piece_maps: Vec<Vec<PieceMap>>,
    ) -> Result<Self> {
        if domain.pieces().len() != target.l() {
            return Err(Error::invalid("domain does not match the target block count"));
        }
        let keys: Vec<usize> = vertex_spec.keys().copied().collect();
        let thetas: Vec<usize> = domain.thetas().iter().copied().collect();
        if keys != thetas {
            return Err(Error::invalid(
                "vertex spectra must be given exactly at the domain vertices",
            ));
        }
        if piece_maps.len() != target.l() {
            return Err(Error::invalid("piece maps must cover every target block"));
        }
        for (i, list) in piece_maps.iter().enumerate() {
            if list.len() != domain.pieces()[i].len() {
                return Err(Error::invalid(format!(
                    "block {i}: {} piece maps for {} pieces",
                    list.len(),
                    domain.pieces()[i].len()
                )));
            }
            for (pm, pc) in list.iter().zip(&domain.pieces()[i]) {
                for tr in &pm.tracks {
                    match tr {
                        Track::Theta(j) => {
                            if *j >= source.p() {
                                return Err(Error::invalid(format!(
                                    "track vertex index {j} out of range"
                                )));
                            }
                        }
                        Track::Pl { block, f } => {
                            if *block >= source.l() {
                                return Err(Error::invalid(format!(
                                    "track block index {block} out of range"
                                )));
                            }
                            if f.domain() != (pc.lo.clone(), pc.hi.clone()) {
                                return Err(Error::invalid(format!(
                                    "block {i}: track domain does not match its piece [{}, {}]",
                                    q_to_string(&pc.lo),
                                    q_to_string(&pc.hi)
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(PatternHom {
            source,
            target,
            domain,
            vertex_spec,
            piece_maps,
        })
    }

    /// The identity homomorphism of `p`, globally defined.
    pub fn identity(p: &Presentation) -> Self {
        let domain = ClosedSubset::full(p);
        let mut vertex_spec = BTreeMap::new();
        for j in 0..p.p() {
            let mut s = FiniteSpectrum::zero(p);
            s.theta_mult[j] = 1;
            vertex_spec.insert(j, s);
        }
        let piece_maps = (0..p.l())
            .map(|i| {
                vec![PieceMap {
                    tracks: vec![Track::Pl {
                        block: i,
                        f: PlFunc::identity(Q::zero(), Q::one()),
                    }],
                    pad: 0,
                }]
            })
            .collect();
        PatternHom {
            source: p.clone(),
            target: p.clone(),
            domain,
            vertex_spec,
            piece_maps,
        }
    }

    pub fn source(&self) -> &Presentation {
        &self.source
    }

    pub fn target(&self) -> &Presentation {
        &self.target
    }

    pub fn domain(&self) -> &ClosedSubset {
        &self.domain
    }

    pub fn vertex_spec(&self) -> &BTreeMap<usize, FiniteSpectrum> {
        &self.vertex_spec
    }

    pub fn piece_maps(&self) -> &[Vec<PieceMap>] {
        &self.piece_maps
    }

    /// Sort tracks within each piece by a canonical key, so that equal
    /// patterns compare equal after construction-order differences.
    pub fn canonicalize(mut self) -> Self {
        for list in &mut self.piece_maps {
            for pm in list {
                pm.tracks.sort_by(|a, b| track_key(a).cmp(&track_key(b)));
            }
        }
        self
    }

    fn piece_index(&self, block: usize, lo: &Q, hi: &Q) -> Result<usize> {
        self.domain.pieces()[block]
            .iter()
            .position(|pc| pc.lo <= *lo && *hi <= pc.hi)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "range [{}, {}] of block {block} is not covered by the domain",
                    q_to_string(lo),
                    q_to_string(hi)
                ))
            })
    }

    /// Spectrum of the fiber map at an interior target coordinate
    /// (boundary coordinates allowed when the domain reaches them).
    fn eval_interior(&self, block: usize, t: &Q) -> Result<FiniteSpectrum> {
        let idx = self.piece_index(block, t, t)?;
        let pm = &self.piece_maps[block][idx];
        let mut theta_mult = vec![0u64; self.source.p()];
        let mut interior: Vec<(usize, Q)> = Vec::new();
        for tr in &pm.tracks {
            match tr {
                Track::Theta(j) => theta_mult[*j] += 1,
                Track::Pl { block: b, f } => interior.push((*b, f.eval(t)?)),
            }
        }
        FiniteSpectrum::canonical(&self.source, theta_mult, interior, pm.pad)
    }

    /// The finite spectrum of the evaluation at a point of the domain.
    pub fn eval_spectrum(&self, z: &SpectrumPoint) -> Result<FiniteSpectrum> {
        match z {
            SpectrumPoint::Theta(j) => self
                .vertex_spec
                .get(j)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("vertex {j} is outside the domain"))),
            SpectrumPoint::Interior { block, t } => {
                if *block >= self.target.l() {
                    return Err(Error::invalid(format!("block index {block} out of range")));
                }
                self.eval_interior(*block, t)
            }
        }
    }

    /// Eigenvalue list of the image of an element at a point of the domain.
    pub fn eval_element(&self, elem: ElementRef<'_>, z: &SpectrumPoint) -> Result<EigList> {
        let s = self.eval_spectrum(z)?;
        s.eig_of(&self.source, elem)
    }

    /// Push a finite spectrum over the target through this pattern,
    /// yielding a finite spectrum over the source.
    pub fn push_spectrum(&self, s: &FiniteSpectrum) -> Result<FiniteSpectrum> {
        let mut out = FiniteSpectrum::zero(&self.source);
        for (j, &m) in s.theta_mult.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let vs = self
                .vertex_spec
                .get(&j)
                .ok_or_else(|| Error::invalid(format!("vertex {j} is outside the domain")))?;
            out.scaled_add(vs, m);
        }
        for (i, t) in &s.interior {
            let e = self.eval_interior(*i, t)?;
            out.scaled_add(&e, 1);
        }
        out.zero_pad += s.zero_pad;
        Ok(out)
    }

    /// Full semantic validation: sizes along every piece, track ranges,
    /// vertex-spectrum sizes, and the glued-end compatibility between piece
    /// tracks and vertex spectra.
    pub fn validate(&self) -> PatternReport {
        let mut violations = Vec::new();
        for (j, s) in &self.vertex_spec {
            match s.boundary_rewrite(&self.source) {
                Ok(c) if c == *s => {
                    let size = s.size(&self.source);
                    if size != self.target.k()[*j] {
                        violations.push(format!(
                            "vertex {j}: spectrum size {size} but the fiber has dimension {}",
                            self.target.k()[*j]
                        ));
                    }
                }
                Ok(_) => violations.push(format!("vertex {j}: spectrum is not canonical")),
                Err(e) => violations.push(format!("vertex {j}: {e}")),
            }
        }
        for (i, (list, pieces)) in self.piece_maps.iter().zip(self.domain.pieces()).enumerate() {
            for (k, (pm, pc)) in list.iter().zip(pieces).enumerate() {
                let mut size = pm.pad;
                for tr in &pm.tracks {
                    match tr {
                        Track::Theta(j) => size += self.source.k()[*j],
                        Track::Pl { block, f } => {
                            size += self.source.dims()[*block];
                            let (lo, hi) = f.range();
                            if lo < Q::zero() || hi > Q::one() {
                                violations.push(format!(
                                    "block {i} piece {k}: track leaves the unit interval"
                                ));
                            }
                        }
                    }
                }
                if size != self.target.dims()[i] {
                    violations.push(format!(
                        "block {i} piece {k}: fiber size {size}, expected {}",
                        self.target.dims()[i]
                    ));
                }
                // Glued-end compatibility at raw coordinates 0 and 1.
                for (end, row) in [
                    (Q::zero(), &self.target.alpha()[i]),
                    (Q::one(), &self.target.beta()[i]),
                ] {
                    let touches = if end.is_zero() {
                        pc.lo.is_zero()
                    } else {
                        pc.hi.is_one()
                    };
                    if !touches {
                        continue;
                    }
                    let got = match self.eval_interior(i, &end) {
                        Ok(s) => s,
                        Err(e) => {
                            violations.push(format!("block {i} piece {k}: {e}"));
                            continue;
                        }
                    };
                    let mut want = FiniteSpectrum::zero(&self.source);
                    let mut fill = 0u64;
                    let mut missing_vertex = false;
                    for (j, &mult) in row.iter().enumerate() {
                        if mult == 0 {
                            continue;
                        }
                        fill += mult * self.target.k()[j];
                        match self.vertex_spec.get(&j) {
                            Some(vs) => want.scaled_add(vs, mult),
                            None => {
                                violations.push(format!(
                                    "block {i}: glued vertex {j} is outside the domain"
                                ));
                                missing_vertex = true;
                            }
                        }
                    }
                    if missing_vertex {
                        continue;
                    }
                    want.zero_pad += self.target.dims()[i].saturating_sub(fill);
                    if got != want {
                        violations.push(format!(
                            "block {i} piece {k}: track values at {} do not match the glued expansion of the vertex spectra",
                            q_to_string(&end)
                        ));
                    }
                }
            }
        }
        PatternReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Image of the pattern as a closed subset of the source spectrum.
    pub fn sp_image(&self) -> Result<ClosedSubset> {
        let mut thetas = std::collections::BTreeSet::new();
        let mut pieces: Vec<Vec<Piece>> = vec![Vec::new(); self.source.l()];
        for s in self.vertex_spec.values() {
            for (j, &m) in s.theta_mult.iter().enumerate() {
                if m > 0 {
                    thetas.insert(j);
                }
            }
            for (i, t) in &s.interior {
                pieces[*i].push(Piece::new(t.clone(), t.clone())?);
            }
        }
        for list in &self.piece_maps {
            for pm in list {
                for tr in &pm.tracks {
                    match tr {
                        Track::Theta(j) => {
                            thetas.insert(*j);
                        }
                        Track::Pl { block, f } => {
                            let (lo, hi) = f.range();
                            pieces[*block].push(Piece::new(lo, hi)?);
                        }
                    }
                }
            }
        }
        ClosedSubset::closure(&self.source, RawSubset { thetas, pieces })
    }

    /// Injectivity = the image is the whole source spectrum.
    pub fn is_injective(&self) -> Result<InjectivityReport> {
        let image = self.sp_image()?;
        let missed = image.witness_missing(&self.source);
        Ok(InjectivityReport {
            injective: missed.is_none(),
            missed,
        })
    }

    /// Push a profile element of the source forward to a profile element
    /// of the target.  The pattern must be globally defined.
    pub fn push_element(&self, f: &ProfileElement) -> Result<ProfileElement> {
        if self.domain != ClosedSubset::full(&self.target) {
            return Err(Error::invalid(
                "pushing elements requires a globally defined pattern",
            ));
        }
        let mut theta_eigs = Vec::with_capacity(self.target.p());
        for j in 0..self.target.p() {
            let e = self.eval_element(ElementRef::Profile(f), &SpectrumPoint::Theta(j))?;
            theta_eigs.push(e.values().to_vec());
        }
        let mut branches = Vec::with_capacity(self.target.l());
        for i in 0..self.target.l() {
            let pm = &self.piece_maps[i][0];
            let mut fam: Vec<PlFunc> = Vec::with_capacity(self.target.dims()[i] as usize);
            for tr in &pm.tracks {
                match tr {
                    Track::Theta(j) => {
                        for v in &f.theta_eigs[*j] {
                            fam.push(PlFunc::constant(Q::zero(), Q::one(), v.clone()));
                        }
                    }
                    Track::Pl { block, f: g } => {
                        for br in &f.branches[*block] {
                            fam.push(br.compose(g)?);
                        }
                    }
                }
            }
            for _ in 0..pm.pad {
                fam.push(PlFunc::constant(Q::zero(), Q::one(), Q::zero()));
            }
            branches.push(fam);
        }
        Ok(ProfileElement { theta_eigs, branches })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "domain": self.domain.to_json(),
            "vertex_spec": self
                .vertex_spec
                .iter()
                .map(|(j, s)| (j.to_string(), s.to_json()))
                .collect::<serde_json::Map<String, serde_json::Value>>(),
            "pieces": self
                .piece_maps
                .iter()
                .map(|list| {
                    list.iter()
                        .map(|pm| {
                            serde_json::json!({
                                "tracks": pm.tracks.iter().map(track_to_json).collect::<Vec<_>>(),
                                "pad": pm.pad,
                            })
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(
        source: &Presentation,
        target: &Presentation,
        v: &serde_json::Value,
    ) -> Result<Self> {
        if let Some(s) = v.get("schema") {
            if s != "pattern/v1" {
                return Err(Error::schema(format!("unsupported pattern schema {s}")));
            }
        }
        let domain = ClosedSubset::from_json(
            target,
            v.get("domain")
                .ok_or_else(|| Error::schema("pattern needs a domain"))?,
        )?;
        let mut vertex_spec = BTreeMap::new();
        if let Some(map) = v.get("vertex_spec").and_then(|x| x.as_object()) {
            for (key, sv) in map {
                let j: usize = key
                    .parse()
                    .map_err(|_| Error::schema(format!("bad vertex key {key}")))?;
                vertex_spec.insert(j, FiniteSpectrum::from_json(source, sv)?);
            }
        }
        let mut piece_maps = Vec::new();
        let lists = v
            .get("pieces")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::schema("pattern needs pieces"))?;
        for list in lists {
            let list = list
                .as_array()
                .ok_or_else(|| Error::schema("pieces entries must be arrays"))?;
            let mut out = Vec::new();
            for pmv in list {
                let tracks = pmv
                    .get("tracks")
                    .and_then(|x| x.as_array())
                    .ok_or_else(|| Error::schema("piece map needs tracks"))?
                    .iter()
                    .map(track_from_json)
                    .collect::<Result<Vec<_>>>()?;
                let pad = pmv.get("pad").and_then(|x| x.as_u64()).unwrap_or(0);
                out.push(PieceMap { tracks, pad });
            }
            piece_maps.push(out);
        }
        PatternHom::new(source.clone(), target.clone(), domain, vertex_spec, piece_maps)
    }
}

fn track_key(t: &Track) -> (u8, usize, Vec<(Q, Q)>) {
    match t {
        Track::Theta(j) => (0, *j, Vec::new()),
        Track::Pl { block, f } => (1, *block, f.breakpoints().to_vec()),
    }
}

fn track_to_json(t: &Track) -> serde_json::Value {
    match t {
        Track::Theta(j) => serde_json::json!({ "theta": j }),
        Track::Pl { block, f } => serde_json::json!({
            "block": block,
            "f": f
                .breakpoints()
                .iter()
                .map(|(x, y)| serde_json::json!([q_to_string(x), q_to_string(y)]))
                .collect::<Vec<_>>(),
        }),
    }
}

fn track_from_json(v: &serde_json::Value) -> Result<Track> {
    if let Some(j) = v.get("theta").and_then(|x| x.as_u64()) {
        return Ok(Track::Theta(j as usize));
    }
    let block = v
        .get("block")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| Error::schema("track needs theta or block"))? as usize;
    let pts = v
        .get("f")
        .and_then(|x| x.as_array())
        .ok_or_else(|| Error::schema("interval track needs breakpoints"))?
        .iter()
        .map(|pt| {
            let pair = pt
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::schema("breakpoints must be [x, y] pairs"))?;
            let x = q_from_str(pair[0].as_str().ok_or_else(|| Error::schema("x must be a rational string"))?)?;
            let y = q_from_str(pair[1].as_str().ok_or_else(|| Error::schema("y must be a rational string"))?)?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Track::Pl {
        block,
        f: PlFunc::new(pts)?,
    })
}

/// Composite homomorphism: apply `phi` first, then `psi`
/// (`phi: A -> B`, `psi: B -> C`, result `A -> C` on `psi`'s domain).
/// Every spectral value of `psi` must lie in `phi`'s domain.
pub fn compose(phi: &PatternHom, psi: &PatternHom) -> Result<PatternHom> {
    if phi.target != psi.source {
        return Err(Error::invalid("composition blocks do not match"));
    }
    let mut vertex_spec = BTreeMap::new();
    for (j, s) in &psi.vertex_spec {
        vertex_spec.insert(*j, phi.push_spectrum(s)?);
    }
    let mut piece_maps = Vec::with_capacity(psi.target.l());
    for (list, pieces) in psi.piece_maps.iter().zip(psi.domain.pieces()) {
        let mut out = Vec::with_capacity(list.len());
        for (pm, pc) in list.iter().zip(pieces) {
            let mut tracks: Vec<Track> = Vec::new();
            let mut pad = pm.pad;
            for tr in &pm.tracks {
                match tr {
                    Track::Theta(jb) => {
                        let vs = phi.vertex_spec.get(jb).ok_or_else(|| {
                            Error::invalid(format!("vertex {jb} is outside the first pattern's domain"))
                        })?;
                        spread_constant_spectrum(vs, pc, &mut tracks);
                        pad += vs.zero_pad;
                    }
                    Track::Pl { block, f } => {
                        let (rlo, rhi) = f.range();
                        let idx = phi.piece_index(*block, &rlo, &rhi)?;
                        let inner_pm = &phi.piece_maps[*block][idx];
                        for itr in &inner_pm.tracks {
                            match itr {
                                Track::Theta(ja) => tracks.push(Track::Theta(*ja)),
                                Track::Pl { block: ba, f: g } => tracks.push(Track::Pl {
                                    block: *ba,
                                    f: g.compose(f)?,
                                }),
                            }
                        }
                        pad += inner_pm.pad;
                    }
                }
            }
            out.push(PieceMap { tracks, pad });
        }
        piece_maps.push(out);
    }
    Ok(PatternHom {
        source: phi.source.clone(),
        target: psi.target.clone(),
        domain: psi.domain.clone(),
        vertex_spec,
        piece_maps,
    }
    .canonicalize())
}

/// Turn a finite spectrum into constant tracks along a piece.
fn spread_constant_spectrum(s: &FiniteSpectrum, pc: &Piece, tracks: &mut Vec<Track>) {
    for (j, &m) in s.theta_mult.iter().enumerate() {
        for _ in 0..m {
            tracks.push(Track::Theta(j));
        }
    }
    for (i, t) in &s.interior {
        let f = PlFunc::constant(pc.lo.clone(), pc.hi.clone(), t.clone());
        tracks.push(Track::Pl { block: *i, f });
    }
}

// ---------------------------------------------------------------------------
// Spectral distance between two patterns on a common element
// ---------------------------------------------------------------------------

/// Exact sup over the common domain of the sorted-eigenvalue distance
/// between `phi(f)` and `psi(f)`.  For self-adjoint values this equals the
/// pointwise unitary-orbit distance.
pub fn spec_distance(phi: &PatternHom, psi: &PatternHom, elem: ElementRef<'_>) -> Result<Q> {
    if phi.source != psi.source || phi.target != psi.target {
        return Err(Error::invalid("patterns must share source and target"));
    }
    if phi.domain != psi.domain {
        return Err(Error::invalid("patterns must share a domain"));
    }
    let mut best = Q::zero();
    for j in phi.domain.thetas() {
        let a = phi.eval_element(elem, &SpectrumPoint::Theta(*j))?;
        let b = psi.eval_element(elem, &SpectrumPoint::Theta(*j))?;
        update_sorted_gap(&mut best, a.values(), b.values())?;
    }
    for i in 0..phi.target.l() {
        for (k, _pc) in phi.domain.pieces()[i].iter().enumerate() {
            let fam_a = pattern_piece_branches(phi, elem, i, k)?;
            let fam_b = pattern_piece_branches(psi, elem, i, k)?;
            if fam_a.len() != fam_b.len() {
                return Err(Error::invalid("fiber sizes differ along a piece"));
            }
            let refs: Vec<&PlFunc> = fam_a.iter().chain(fam_b.iter()).collect();
            let grid = crossing_partition(&refs)?;
            for x in &grid {
                let mut va: Vec<Q> = fam_a.iter().map(|f| f.eval(x)).collect::<Result<_>>()?;
                let mut vb: Vec<Q> = fam_b.iter().map(|f| f.eval(x)).collect::<Result<_>>()?;
                va.sort();
                vb.sort();
                update_sorted_gap(&mut best, &va, &vb)?;
            }
        }
    }
    Ok(best)
}

fn update_sorted_gap(best: &mut Q, a: &[Q], b: &[Q]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid("eigenvalue lists have different sizes"));
    }
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d > *best {
            *best = d;
        }
    }
    Ok(())
}

/// The scalar eigenvalue branches of `pat(elem)` along one domain piece,
/// as exact piecewise-linear functions on the piece.
fn pattern_piece_branches(
    pat: &PatternHom,
    elem: ElementRef<'_>,
    block: usize,
    piece_idx: usize,
) -> Result<Vec<PlFunc>> {
    let pc = &pat.domain.pieces()[block][piece_idx];
    let pm = &pat.piece_maps[block][piece_idx];
    let mut fam: Vec<PlFunc> = Vec::new();
    for tr in &pm.tracks {
        match tr {
            Track::Theta(j) => {
                let e = elem.eig_at(&pat.source, &SpectrumPoint::Theta(*j))?;
                for v in e.values() {
                    fam.push(PlFunc::constant(pc.lo.clone(), pc.hi.clone(), v.clone()));
                }
            }
            Track::Pl { block: b, f } => {
                for br in elem.branches_on_block(&pat.source, *b)? {
                    fam.push(br.compose(f)?);
                }
            }
        }
    }
    for _ in 0..pm.pad {
        fam.push(PlFunc::constant(pc.lo.clone(), pc.hi.clone(), Q::zero()));
    }
    Ok(fam)
}

// ---------------------------------------------------------------------------
// Spectrum pairing
// ---------------------------------------------------------------------------

/// Pairing of two finite spectra block by block: interior points in the
/// core `[eta, 1-eta]` must be matched; collar points may be matched or
/// left over.  `max_gap` is the exact sup of the matched distances.
#[derive(Debug, Clone)]
pub struct PairingResult {
    pub per_block: Vec<BlockPairing>,
    pub max_gap: Q,
    /// True when every matched pair is within `2 eta`.
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct BlockPairing {
    pub matched: Vec<(Q, Q)>,
    pub left_over_first: Vec<Q>,
    pub right_over_first: Vec<Q>,
    pub left_over_second: Vec<Q>,
    pub right_over_second: Vec<Q>,
    pub max_gap: Q,
}

/// Pair the interior points of two finite spectra at mesh `1/m`.  Points in
/// the core `[eta, 1-eta]` of each block must all be matched; points in the
/// collars may be dropped (they are later absorbed by the glued ends).  The
/// matching minimizes, in order: the largest matched gap, the per-side
/// leftover imbalance, the number of pairs, and the collar selection.
pub fn pair_spectra(
    p: &Presentation,
    first: &FiniteSpectrum,
    second: &FiniteSpectrum,
    m: u64,
) -> Result<PairingResult> {
    if m == 0 {
        return Err(Error::invalid("mesh parameter must be positive"));
    }
    let eta = Q::new(1.into(), (m as i64).into());
    let two_eta = &eta + &eta;
    let mut per_block = Vec::with_capacity(p.l());
    let mut overall = Q::zero();
    for i in 0..p.l() {
        let xs: Vec<Q> = first
            .interior
            .iter()
            .filter(|(b, _)| *b == i)
            .map(|(_, t)| t.clone())
            .collect();
        let ys: Vec<Q> = second
            .interior
            .iter()
            .filter(|(b, _)| *b == i)
            .map(|(_, t)| t.clone())
            .collect();
        let bp = pair_block(&xs, &ys, &eta)?;
        if bp.max_gap > overall {
            overall = bp.max_gap.clone();
        }
        per_block.push(bp);
    }
    let success = overall <= two_eta;
    Ok(PairingResult {
        per_block,
        max_gap: overall,
        success,
    })
}

fn pair_block(xs: &[Q], ys: &[Q], eta: &Q) -> Result<BlockPairing> {
    let hi = Q::one() - eta;
    let split = |v: &[Q]| -> (Vec<Q>, Vec<Q>, Vec<Q>) {
        let mut left = Vec::new();
        let mut core = Vec::new();
        let mut right = Vec::new();
        for t in v {
            if *t < *eta {
                left.push(t.clone());
            } else if *t > hi {
                right.push(t.clone());
            } else {
                core.push(t.clone());
            }
        }
        (left, core, right)
    };
    let (lx, cx, rx) = split(xs);
    let (ly, cy, ry) = split(ys);

    // Candidate selections: take the `a` collar points nearest the core on
    // each side (they are sorted, so a suffix on the left, a prefix on the
    // right).  Lengths must agree.
    let mut best: Option<(Q, usize, usize, usize, usize, usize)> = None;
    for ax in 0..=lx.len() {
        for bx in 0..=rx.len() {
            let n = cx.len() + ax + bx;
            for ay in 0..=ly.len() {
                if cy.len() + ay > n {
                    break;
                }
                let need = n - cy.len() - ay;
                if need > ry.len() {
                    continue;
                }
                let by = need;
                let mut gap = Q::zero();
                {
                    let sel_x = lx[lx.len() - ax..]
                        .iter()
                        .chain(cx.iter())
                        .chain(rx[..bx].iter());
                    let sel_y = ly[ly.len() - ay..]
                        .iter()
                        .chain(cy.iter())
                        .chain(ry[..by].iter());
                    for (x, y) in sel_x.zip(sel_y) {
                        let d = (x - y).abs();
                        if d > gap {
                            gap = d;
                        }
                    }
                }
                let imbalance = (lx.len() - ax).abs_diff(ly.len() - ay)
                    + (rx.len() - bx).abs_diff(ry.len() - by);
                let cand = (gap, imbalance, n, ax, bx, ay);
                if best.as_ref().map_or(true, |b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
    }
    let (gap, _imb, _n, ax, bx, ay) = best.ok_or_else(|| {
        Error::invalid("no admissible pairing: core points cannot be balanced")
    })?;
    let by = cx.len() + ax + bx - cy.len() - ay;
    let sel_x: Vec<Q> = lx[lx.len() - ax..]
        .iter()
        .chain(cx.iter())
        .chain(rx[..bx].iter())
        .cloned()
        .collect();
    let sel_y: Vec<Q> = ly[ly.len() - ay..]
        .iter()
        .chain(cy.iter())
        .chain(ry[..by].iter())
        .cloned()
        .collect();
    Ok(BlockPairing {
        matched: sel_x.into_iter().zip(sel_y).collect(),
        left_over_first: lx[..lx.len() - ax].to_vec(),
        right_over_first: rx[bx..].to_vec(),
        left_over_second: ly[..ly.len() - ay].to_vec(),
        right_over_second: ry[by..].to_vec(),
        max_gap: gap,
    })
}

// ---------------------------------------------------------------------------
// Deterministic instance generator (used by self-tests and test suites)
// ---------------------------------------------------------------------------

/// Deterministic pseudo-random generator state (xorshift), kept tiny so
/// instance generation is reproducible across platforms.
#[derive(Debug, Clone)]
pub struct TinyRng(pub u64);

impl TinyRng {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }
}

/// A random single-track pattern on the continuous-functions presentation:
/// one piecewise-linear reparametrization of `[0, 1]`, with the vertex
/// spectra forced by the track's endpoint values.  Always valid.
pub fn sample_line_pattern(p: &Presentation, rng: &mut TinyRng) -> Result<PatternHom> {
    if p.l() != 1 || p.dims() != [1] || p.p() != 2 {
        return Err(Error::invalid("sample pattern needs the line presentation"));
    }
    let denom = 64i64;
    let n_breaks = (rng.below(3) + 2) as usize;
    let mut xs: Vec<i64> = vec![0, denom];
    while xs.len() < n_breaks + 2 {
        let c = (rng.below((denom - 1) as u64) + 1) as i64;
        if !xs.contains(&c) {
            xs.push(c);
        }
    }
    xs.sort();
    let pts: Vec<(Q, Q)> = xs
        .into_iter()
        .map(|x| {
            let y = rng.below((denom + 1) as u64) as i64;
            (Q::new(x.into(), denom.into()), Q::new(y.into(), denom.into()))
        })
        .collect();
    let f = PlFunc::new(pts)?;
    let mut vertex_spec = BTreeMap::new();
    for (j, end) in [(0usize, Q::zero()), (1usize, Q::one())] {
        let v = f.eval(&end)?;
        vertex_spec.insert(
            j,
            FiniteSpectrum::canonical(p, vec![0; p.p()], vec![(0, v)], 0)?,
        );
    }
    PatternHom::new(
        p.clone(),
        p.clone(),
        ClosedSubset::full(p),
        vertex_spec,
        vec![vec![PieceMap {
            tracks: vec![Track::Pl { block: 0, f }],
            pad: 0,
        }]],
    )
}
