//! The glued spectrum of a presented algebra: points, closed subsets in
//! piecewise-canonical form, and the index-set taxonomy used by the
//! restriction construction.
//!
//! The spectrum of a presentation with `p` point blocks and `l` interval
//! blocks is the disjoint union of `p` vertex points and `l` open unit
//! intervals, glued non-Hausdorffly: the left end of interval block `i`
//! adheres to every vertex `j` with `alpha[i][j] > 0`, the right end to
//! every vertex with `beta[i][j] > 0`.  Closed subsets are finite unions of
//! closed rational intervals and points per block, plus a vertex set, with
//! the adherence condition enforced at the ends.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::Presentation;
use crate::rational::{midpoint, q_from_str, q_to_string, Q};
use num_traits::{One, Signed, Zero};

/// A canonical point of the glued spectrum.  `Interior` coordinates are
/// strictly between 0 and 1; the raw boundary coordinates 0 and 1 have no
/// single canonical point (they adhere to a set of vertices).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpectrumPoint {
    Theta(usize),
    Interior { block: usize, t: Q },
}

impl std::fmt::Display for SpectrumPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectrumPoint::Theta(j) => write!(f, "theta_{j}"),
            SpectrumPoint::Interior { block, t } => {
                write!(f, "({}, {})", block, q_to_string(t))
            }
        }
    }
}

/// Distance between spectrum points: the interval metric within one block,
/// zero on equal vertices, and `None` (infinite) across blocks — the gluing
/// is topological, not metric.
pub fn dist(x: &SpectrumPoint, y: &SpectrumPoint) -> Option<Q> {
    match (x, y) {
        (SpectrumPoint::Theta(a), SpectrumPoint::Theta(b)) if a == b => Some(Q::zero()),
        (
            SpectrumPoint::Interior { block: i, t },
            SpectrumPoint::Interior { block: i2, t: t2 },
        ) if i == i2 => Some((t - t2).abs()),
        _ => None,
    }
}

/// A closed interval `[lo, hi]` in block coordinates; `lo == hi` is an
/// isolated point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Piece {
    #[serde(with = "crate::rational::serde_q")]
    pub lo: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub hi: Q,
}

impl Piece {
    pub fn new(lo: Q, hi: Q) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid(format!(
                "piece bounds out of order: [{}, {}]",
                q_to_string(&lo),
                q_to_string(&hi)
            )));
        }
        if lo < Q::zero() || hi > Q::one() {
            return Err(Error::invalid(format!(
                "piece [{}, {}] escapes the unit interval",
                q_to_string(&lo),
                q_to_string(&hi)
            )));
        }
        Ok(Piece { lo, hi })
    }

    pub fn point(t: Q) -> Result<Self> {
        Piece::new(t.clone(), t)
    }

    pub fn len(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, t: &Q) -> bool {
        *t >= self.lo && *t <= self.hi
    }

    pub fn intersect(&self, other: &Piece) -> Option<Piece> {
        let lo = if self.lo >= other.lo { self.lo.clone() } else { other.lo.clone() };
        let hi = if self.hi <= other.hi { self.hi.clone() } else { other.hi.clone() };
        if lo <= hi {
            Some(Piece { lo, hi })
        } else {
            None
        }
    }
}

/// A closed subset of the glued spectrum in piecewise-canonical form:
/// per-block sorted, pairwise non-touching pieces, degenerate boundary
/// pieces rewritten into vertices, and the adherence condition satisfied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedSubset {
    thetas: BTreeSet<usize>,
    pieces: Vec<Vec<Piece>>,
}

/// Raw per-block data before canonicalization; used for deserialization
/// and ad-hoc construction.
#[derive(Debug, Clone)]
pub struct RawSubset {
    pub thetas: BTreeSet<usize>,
    pub pieces: Vec<Vec<Piece>>,
}

/// Index-set taxonomy of a closed subset relative to a presentation:
/// `j_set` the vertices, and for interval blocks the classes by boundary
/// behaviour of the trace.  `s` maps each block with a left-adherent piece
/// `[0, s_i]` (with `s_i < 1`) to `s_i`; `t` maps each block with a
/// right-adherent piece `[t_i, 1]` (with `t_i > 0`) to `t_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSets {
    pub j_set: BTreeSet<usize>,
    /// Blocks whose trace is empty.
    pub l0: BTreeSet<usize>,
    /// Blocks whose trace is all of `[0, 1]`.
    pub l1: BTreeSet<usize>,
    /// Blocks with a piece `[0, s]`, `s < 1`.
    pub ll: BTreeSet<usize>,
    /// Blocks whose trace is the degenerate left end only (empty in
    /// canonical form; kept for the structural invariant check).
    pub lll: BTreeSet<usize>,
    /// Blocks with a piece `[t, 1]`, `t > 0`.
    pub lr: BTreeSet<usize>,
    /// Degenerate right-end analogue of `lll` (always empty here).
    pub lrr: BTreeSet<usize>,
    /// Blocks with a nonempty, proper trace.
    pub la: BTreeSet<usize>,
    pub s: std::collections::BTreeMap<usize, Q>,
    pub t: std::collections::BTreeMap<usize, Q>,
}

impl ClosedSubset {
    /// The whole spectrum.
    pub fn full(p: &Presentation) -> Self {
        let pieces = (0..p.l())
            .map(|_| vec![Piece { lo: Q::zero(), hi: Q::one() }])
            .collect();
        ClosedSubset {
            thetas: (0..p.p()).collect(),
            pieces,
        }
    }

    /// The empty subset.
    pub fn empty(p: &Presentation) -> Self {
        ClosedSubset {
            thetas: BTreeSet::new(),
            pieces: vec![Vec::new(); p.l()],
        }
    }

    /// Canonicalize raw data into a closed subset: sort and merge pieces,
    /// rewrite degenerate boundary pieces into their vertex images, and add
    /// the vertices adherent to any piece touching an end.
    pub fn closure(p: &Presentation, raw: RawSubset) -> Result<Self> {
        if raw.pieces.len() != p.l() {
            return Err(Error::schema(format!(
                "expected {} per-block piece lists, got {}",
                p.l(),
                raw.pieces.len()
            )));
        }
        let mut thetas = raw.thetas;
        for &j in &thetas {
            if j >= p.p() {
                return Err(Error::schema(format!("vertex index {j} out of range")));
            }
        }
        let mut pieces: Vec<Vec<Piece>> = Vec::with_capacity(p.l());
        for (i, list) in raw.pieces.into_iter().enumerate() {
            let mut list: Vec<Piece> = list
                .into_iter()
                .filter(|pc| {
                    // Degenerate pieces at an end are vertex sets in
                    // disguise; rewrite and drop.
                    if pc.is_point() && pc.lo.is_zero() {
                        thetas.extend(p.alpha_support(i));
                        false
                    } else if pc.is_point() && pc.hi.is_one() {
                        thetas.extend(p.beta_support(i));
                        false
                    } else {
                        true
                    }
                })
                .collect();
            list.sort();
            // Merge overlapping or touching pieces.
            let mut merged: Vec<Piece> = Vec::with_capacity(list.len());
            for pc in list {
                match merged.last_mut() {
                    Some(prev) if pc.lo <= prev.hi => {
                        if pc.hi > prev.hi {
                            prev.hi = pc.hi;
                        }
                    }
                    _ => merged.push(pc),
                }
            }
            if let Some(first) = merged.first() {
                if first.lo.is_zero() {
                    thetas.extend(p.alpha_support(i));
                }
            }
            if let Some(last) = merged.last() {
                if last.hi.is_one() {
                    thetas.extend(p.beta_support(i));
                }
            }
            pieces.push(merged);
        }
        Ok(ClosedSubset { thetas, pieces })
    }

    /// Build directly from data already in canonical form, verifying it.
    pub fn new(p: &Presentation, thetas: BTreeSet<usize>, pieces: Vec<Vec<Piece>>) -> Result<Self> {
        let candidate = ClosedSubset::closure(
            p,
            RawSubset {
                thetas: thetas.clone(),
                pieces: pieces.clone(),
            },
        )?;
        if candidate.thetas != thetas || candidate.pieces != pieces {
            return Err(Error::invalid(
                "subset data is not closed / not in canonical form",
            ));
        }
        Ok(candidate)
    }

    pub fn thetas(&self) -> &BTreeSet<usize> {
        &self.thetas
    }

    pub fn pieces(&self) -> &[Vec<Piece>] {
        &self.pieces
    }

    pub fn block_trace(&self, i: usize) -> &[Piece] {
        &self.pieces[i]
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty() && self.pieces.iter().all(|l| l.is_empty())
    }

    /// Canonical membership test; boundary coordinates are rejected since
    /// they are not canonical points.
    pub fn contains(&self, x: &SpectrumPoint) -> Result<bool> {
        match x {
            SpectrumPoint::Theta(j) => Ok(self.thetas.contains(j)),
            SpectrumPoint::Interior { block, t } => {
                if *block >= self.pieces.len() {
                    return Err(Error::invalid(format!("block index {block} out of range")));
                }
                if t.is_zero() || t.is_one() || *t < Q::zero() || *t > Q::one() {
                    return Err(Error::invalid(format!(
                        "non-canonical interior coordinate {}",
                        q_to_string(t)
                    )));
                }
                Ok(self.pieces[*block].iter().any(|pc| pc.contains(t)))
            }
        }
    }

    /// Membership for raw block coordinates in `[0, 1]`, used internally
    /// where boundary coordinates stand for their adherent vertex sets.
    pub fn trace_contains(&self, block: usize, t: &Q) -> bool {
        self.pieces[block].iter().any(|pc| pc.contains(t))
    }

    pub fn union(&self, p: &Presentation, other: &ClosedSubset) -> Result<ClosedSubset> {
        let mut thetas = self.thetas.clone();
        thetas.extend(other.thetas.iter().copied());
        let pieces = self
            .pieces
            .iter()
            .zip(&other.pieces)
            .map(|(a, b)| {
                let mut v = a.clone();
                v.extend(b.iter().cloned());
                v
            })
            .collect();
        ClosedSubset::closure(p, RawSubset { thetas, pieces })
    }

    pub fn intersection(&self, p: &Presentation, other: &ClosedSubset) -> Result<ClosedSubset> {
        let thetas = self.thetas.intersection(&other.thetas).copied().collect();
        let pieces = self
            .pieces
            .iter()
            .zip(&other.pieces)
            .map(|(a, b)| {
                let mut v = Vec::new();
                for pa in a {
                    for pb in b {
                        if let Some(pc) = pa.intersect(pb) {
                            v.push(pc);
                        }
                    }
                }
                v
            })
            .collect();
        ClosedSubset::closure(p, RawSubset { thetas, pieces })
    }

    pub fn is_subset_of(&self, other: &ClosedSubset) -> bool {
        if !self.thetas.is_subset(&other.thetas) {
            return false;
        }
        self.pieces.iter().zip(&other.pieces).all(|(a, b)| {
            a.iter()
                .all(|pa| b.iter().any(|pb| pb.lo <= pa.lo && pa.hi <= pb.hi))
        })
    }

    /// A canonical point of the full spectrum missing from `self`, if any:
    /// first a missing vertex, then the midpoint of the first per-block gap.
    pub fn witness_missing(&self, p: &Presentation) -> Option<SpectrumPoint> {
        for j in 0..p.p() {
            if !self.thetas.contains(&j) {
                return Some(SpectrumPoint::Theta(j));
            }
        }
        for (i, list) in self.pieces.iter().enumerate() {
            let mut cursor = Q::zero();
            for pc in list {
                if pc.lo > cursor {
                    return Some(SpectrumPoint::Interior {
                        block: i,
                        t: midpoint(&cursor, &pc.lo),
                    });
                }
                cursor = pc.hi.clone();
            }
            if cursor < Q::one() {
                return Some(SpectrumPoint::Interior {
                    block: i,
                    t: midpoint(&cursor, &Q::one()),
                });
            }
        }
        None
    }

    /// The boundary-behaviour taxonomy of the trace on each interval block.
    pub fn index_sets(&self, p: &Presentation) -> Result<IndexSets> {
        // Guard: the data must already be closed (closure is idempotent on
        // closed sets, so rebuild and compare).
        let rebuilt = ClosedSubset::closure(
            p,
            RawSubset {
                thetas: self.thetas.clone(),
                pieces: self.pieces.clone(),
            },
        )?;
        if &rebuilt != self {
            return Err(Error::invalid("index sets need a closed subset"));
        }
        let mut ix = IndexSets {
            j_set: self.thetas.clone(),
            l0: BTreeSet::new(),
            l1: BTreeSet::new(),
            ll: BTreeSet::new(),
            lll: BTreeSet::new(),
            lr: BTreeSet::new(),
            lrr: BTreeSet::new(),
            la: BTreeSet::new(),
            s: std::collections::BTreeMap::new(),
            t: std::collections::BTreeMap::new(),
        };
        for (i, list) in self.pieces.iter().enumerate() {
            if list.is_empty() {
                ix.l0.insert(i);
                continue;
            }
            let full = list.len() == 1 && list[0].lo.is_zero() && list[0].hi.is_one();
            if full {
                ix.l1.insert(i);
                continue;
            }
            ix.la.insert(i);
            let first = list.first().unwrap();
            if first.lo.is_zero() {
                ix.ll.insert(i);
                ix.s.insert(i, first.hi.clone());
            }
            let last = list.last().unwrap();
            if last.hi.is_one() {
                ix.lr.insert(i);
                ix.t.insert(i, last.lo.clone());
            }
        }
        // Structural sanity baked into the construction.
        debug_assert!(ix.ll.union(&ix.lr).all(|i| ix.la.contains(i)));
        for i in ix.ll.intersection(&ix.lr) {
            if ix.s[i] >= ix.t[i] {
                return Err(Error::internal(format!(
                    "block {i}: left piece reaches past the right piece"
                )));
            }
        }
        Ok(ix)
    }

    /// Serialize to the `closedset/v1` JSON shape.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "closedset/v1",
            "thetas": self.thetas.iter().copied().collect::<Vec<_>>(),
            "pieces": self
                .pieces
                .iter()
                .map(|list| {
                    list.iter()
                        .map(|pc| {
                            serde_json::json!({
                                "lo": q_to_string(&pc.lo),
                                "hi": q_to_string(&pc.hi),
                            })
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        })
    }

    /// Parse the `closedset/v1` JSON shape and canonicalize against `p`.
    pub fn from_json(p: &Presentation, v: &serde_json::Value) -> Result<ClosedSubset> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::schema("closed subset must be a JSON object"))?;
        if let Some(s) = obj.get("schema") {
            if s != "closedset/v1" {
                return Err(Error::schema(format!("unsupported subset schema {s}")));
            }
        }
        let thetas: BTreeSet<usize> = obj
            .get("thetas")
            .and_then(|t| t.as_array())
            .ok_or_else(|| Error::schema("missing thetas array"))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|u| u as usize)
                    .ok_or_else(|| Error::schema("vertex index must be a nonnegative integer"))
            })
            .collect::<Result<_>>()?;
        let pieces_v = obj
            .get("pieces")
            .and_then(|t| t.as_array())
            .ok_or_else(|| Error::schema("missing pieces array"))?;
        let mut pieces = Vec::with_capacity(pieces_v.len());
        for list in pieces_v {
            let list = list
                .as_array()
                .ok_or_else(|| Error::schema("pieces entries must be arrays"))?;
            let mut out = Vec::with_capacity(list.len());
            for pc in list {
                let lo = pc
                    .get("lo")
                    .and_then(|x| x.as_str())
                    .ok_or_else(|| Error::schema("piece needs lo"))?;
                let hi = pc
                    .get("hi")
                    .and_then(|x| x.as_str())
                    .ok_or_else(|| Error::schema("piece needs hi"))?;
                out.push(Piece::new(q_from_str(lo)?, q_from_str(hi)?)?);
            }
            pieces.push(out);
        }
        ClosedSubset::closure(p, RawSubset { thetas, pieces })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::samples::{dimension_drop, unit_interval};
    use crate::rational::{q, qi};

    fn raw(p: &Presentation, thetas: &[usize], pieces: Vec<Vec<(Q, Q)>>) -> RawSubset {
        let mut lists = vec![Vec::new(); p.l()];
        for (i, list) in pieces.into_iter().enumerate() {
            lists[i] = list
                .into_iter()
                .map(|(lo, hi)| Piece::new(lo, hi).unwrap())
                .collect();
        }
        RawSubset {
            thetas: thetas.iter().copied().collect(),
            pieces: lists,
        }
    }

    #[test]
    fn point_distances() {
        let a = SpectrumPoint::Interior { block: 0, t: q(1, 4) };
        let b = SpectrumPoint::Interior { block: 0, t: q(3, 4) };
        assert_eq!(dist(&a, &b), Some(q(1, 2)));
        assert_eq!(
            dist(&SpectrumPoint::Theta(0), &SpectrumPoint::Theta(0)),
            Some(qi(0))
        );
        let c = SpectrumPoint::Interior { block: 1, t: q(1, 2) };
        assert_eq!(dist(&a, &c), None);
        assert_eq!(dist(&a, &SpectrumPoint::Theta(0)), None);
    }

    #[test]
    fn closure_adds_adherent_vertices() {
        let p = dimension_drop();
        // Piece touching the left end pulls in the whole alpha support.
        let s = ClosedSubset::closure(&p, raw(&p, &[], vec![vec![(qi(0), q(1, 3))]])).unwrap();
        assert_eq!(s.thetas().iter().copied().collect::<Vec<_>>(), vec![0, 1]);
        // Right end: beta row is (2,0), so only vertex 0 adheres.
        let s = ClosedSubset::closure(&p, raw(&p, &[], vec![vec![(q(1, 3), qi(1))]])).unwrap();
        assert_eq!(s.thetas().iter().copied().collect::<Vec<_>>(), vec![0]);
        // Idempotence.
        let again = ClosedSubset::closure(
            &p,
            RawSubset {
                thetas: s.thetas().clone(),
                pieces: s.pieces().to_vec(),
            },
        )
        .unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn closure_merges_touching_pieces() {
        let p = dimension_drop();
        let s = ClosedSubset::closure(
            &p,
            raw(
                &p,
                &[],
                vec![vec![(q(1, 3), q(1, 2)), (q(1, 2), q(2, 3)), (q(1, 5), q(1, 4))]],
            ),
        )
        .unwrap();
        assert_eq!(
            s.block_trace(0),
            &[
                Piece::new(q(1, 5), q(1, 4)).unwrap(),
                Piece::new(q(1, 3), q(2, 3)).unwrap()
            ]
        );
        assert!(s.thetas().is_empty());
        // A degenerate piece at the left end turns into vertices.
        let s = ClosedSubset::closure(&p, raw(&p, &[], vec![vec![(qi(0), qi(0))]])).unwrap();
        assert!(s.block_trace(0).is_empty());
        assert_eq!(s.thetas().iter().copied().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn membership_and_set_ops() {
        let p = dimension_drop();
        let a = ClosedSubset::closure(&p, raw(&p, &[], vec![vec![(qi(0), q(1, 2))]])).unwrap();
        let b = ClosedSubset::closure(&p, raw(&p, &[], vec![vec![(q(1, 3), qi(1))]])).unwrap();
        let cap = a.intersection(&p, &b).unwrap();
        assert_eq!(cap.block_trace(0), &[Piece::new(q(1, 3), q(1, 2)).unwrap()]);
        // Vertex sets intersect: {0,1} ∩ {0} = {0}.
        assert_eq!(cap.thetas().iter().copied().collect::<Vec<_>>(), vec![0]);
        let cup = a.union(&p, &b).unwrap();
        assert_eq!(cup, ClosedSubset::full(&p));
        let x = SpectrumPoint::Interior { block: 0, t: q(5, 12) };
        assert!(cap.contains(&x).unwrap());
        assert!(!cap
            .contains(&SpectrumPoint::Interior { block: 0, t: q(1, 5) })
            .unwrap());
        assert!(cap
            .contains(&SpectrumPoint::Interior { block: 0, t: qi(0) })
            .is_err());
        assert!(cap.is_subset_of(&a) && cap.is_subset_of(&b));
        assert!(!a.is_subset_of(&b));
    }

    #[test]
    fn index_sets_worked_cases() {
        let p = dimension_drop();
        let y = ClosedSubset::closure(&p, raw(&p, &[0], vec![vec![(q(1, 3), qi(1))]])).unwrap();
        let ix = y.index_sets(&p).unwrap();
        assert_eq!(ix.j_set.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert!(ix.lr.contains(&0) && ix.la.contains(&0));
        assert!(ix.ll.is_empty() && ix.l0.is_empty() && ix.l1.is_empty());
        assert_eq!(ix.t[&0], q(1, 3));

        let full = ClosedSubset::full(&p);
        let ix = full.index_sets(&p).unwrap();
        assert_eq!(ix.l1.iter().copied().collect::<Vec<_>>(), vec![0]);
        assert!(ix.la.is_empty());

        let verts = ClosedSubset::closure(&p, raw(&p, &[0, 1], vec![vec![]])).unwrap();
        let ix = verts.index_sets(&p).unwrap();
        assert_eq!(ix.l0.iter().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn index_sets_partition_property() {
        // Random raw sets: closure is extensive and idempotent, and the
        // classes partition the blocks.
        let p = unit_interval();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..200 {
            let n = (rnd() % 4) as usize;
            let mut list = Vec::new();
            for _ in 0..n {
                let a = (rnd() % 13) as i64;
                let b = (rnd() % 13) as i64;
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                list.push((q(a, 12), q(b, 12)));
            }
            let raw_set = raw(&p, &[], vec![list.clone()]);
            let s = ClosedSubset::closure(&p, raw_set).unwrap();
            // Extensive: every raw coordinate stays covered (unless it was a
            // degenerate end piece, which moved into the vertex set).
            for (a, b) in &list {
                let probe = midpoint(a, b);
                if !(a == b && (a.is_zero() || a.is_one())) {
                    assert!(s.trace_contains(0, &probe));
                }
            }
            let ix = s.index_sets(&p).unwrap();
            let mut all = ix.l0.clone();
            all.extend(ix.l1.iter());
            all.extend(ix.la.iter());
            assert_eq!(all.len(), ix.l0.len() + ix.l1.len() + ix.la.len());
            assert_eq!(all, (0..p.l()).collect());
            assert!(ix.lll.is_empty() && ix.lrr.is_empty());
        }
    }

    #[test]
    fn witness_finds_gaps() {
        let p = dimension_drop();
        let full = ClosedSubset::full(&p);
        assert_eq!(full.witness_missing(&p), None);
        let y = ClosedSubset::closure(&p, raw(&p, &[0, 1], vec![vec![(qi(0), q(1, 2))]])).unwrap();
        assert_eq!(
            y.witness_missing(&p),
            Some(SpectrumPoint::Interior { block: 0, t: q(3, 4) })
        );
        let no_theta = ClosedSubset::closure(&p, raw(&p, &[0], vec![vec![]])).unwrap();
        assert_eq!(no_theta.witness_missing(&p), Some(SpectrumPoint::Theta(1)));
    }

    #[test]
    fn json_round_trip() {
        let p = dimension_drop();
        let y = ClosedSubset::closure(&p, raw(&p, &[0], vec![vec![(q(1, 3), qi(1))]])).unwrap();
        let v = y.to_json();
        let back = ClosedSubset::from_json(&p, &v).unwrap();
        assert_eq!(back, y);
    }
}
