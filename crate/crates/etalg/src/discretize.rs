//! Spectral discretization: replace a closed subset of the spectrum by a
//! nearby set with finitely many interval pieces, together with the
//! collapse map onto it.
//!
//! The construction lays a uniform grid of mesh `1/m` (with `1/m` below
//! half the requested tolerance) over each interval block.  Every grid
//! cell meeting the set contributes the smallest and largest point of the
//! intersection as *vertices*; consecutive vertices whose gap still carries
//! positive length of the set are joined by an edge and the set is
//! collapsed onto the full edge interval by a monotone surjection, while
//! vertices separated by a length-zero remainder stay apart and the
//! countably many points between them are pushed to the nearer side of the
//! widest gap.  Vertex coordinates reuse the source coordinates, so the
//! result lives in the same spectrum and the collapse map moves no point
//! farther than the tolerance.
//!
//! Everything is exact; the work per block is proportional to the number
//! of pieces of the input, not to the grid size, so very fine tolerances
//! are cheap as long as the input stays simple.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::pl::PlFunc;
use crate::presentation::Presentation;
use crate::rational::{q_to_string, strictly_above, Q};
use crate::spectrum::{ClosedSubset, Piece, RawSubset, SpectrumPoint};

/// Smallest grid size `m` with `1/m` strictly below `delta/2`.
pub fn grid_size(delta: &Q) -> Result<u64> {
    if *delta <= Q::zero() {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let m = strictly_above(&(Q::new(2.into(), 1.into()) / delta));
    let m = if m < BigInt::from(1) { BigInt::from(1) } else { m };
    m.to_u64()
        .ok_or_else(|| Error::invalid("tolerance is too small for a 64-bit grid"))
}

/// Non-decreasing continuous surjection from a union of intervals onto a
/// target interval: affine with a common slope on the components
/// (proportionally to arc length), constant across the gaps, endpoints to
/// endpoints.  Degenerate components ride on the plateaus.
pub fn monotone_surjection(components: &[(Q, Q)], z_lo: &Q, z_hi: &Q) -> Result<PlFunc> {
    if components.is_empty() {
        return Err(Error::invalid("cannot map an empty union of intervals"));
    }
    let mut total = Q::zero();
    for (a, b) in components {
        if b < a {
            return Err(Error::invalid("interval component with reversed endpoints"));
        }
        total += b - a;
    }
    if total.is_zero() {
        return Err(Error::invalid(
            "the union has zero total length and cannot surject onto an interval",
        ));
    }
    let width = z_hi - z_lo;
    let mut pts: Vec<(Q, Q)> = Vec::new();
    let mut covered = Q::zero();
    for (a, b) in components {
        let ya = z_lo + &width * &covered / &total;
        covered += b - a;
        let yb = z_lo + &width * &covered / &total;
        if pts.last().map_or(true, |(x, _)| x != a) {
            pts.push((a.clone(), ya));
        }
        if b > a {
            pts.push((b.clone(), yb));
        }
    }
    Ok(PlFunc::new(pts)?.simplified())
}

/// The vertex skeleton of a closed subset at grid size `m`: per interval
/// block the sorted vertices (cell-wise minima and maxima of the set) and
/// one edge flag per consecutive pair (set when the pair still carries
/// positive length of the set between them).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub m: u64,
    pub vertices: Vec<Vec<Q>>,
    pub edges: Vec<Vec<bool>>,
}

/// Cap on materialized grids; the skeleton lists every grid vertex, so it
/// is only built for coarse tolerances (the collapse construction itself
/// never materializes the grid).
const MAX_MATERIALIZED_GRID: u64 = 1 << 20;

/// Build the skeleton cell by cell.  Faithful to the defining rule, at the
/// cost of walking all `m` cells per block.
pub fn build_skeleton(p: &Presentation, y: &ClosedSubset, delta: &Q) -> Result<Skeleton> {
    let m = grid_size(delta)?;
    if m > MAX_MATERIALIZED_GRID {
        return Err(Error::invalid(format!(
            "grid size {m} is too fine to materialize; use the collapse construction"
        )));
    }
    let mut vertices = Vec::with_capacity(p.l());
    let mut edges = Vec::with_capacity(p.l());
    for i in 0..p.l() {
        let pieces = y.block_trace(i);
        let mut verts: Vec<Q> = Vec::new();
        for r in 1..=m {
            let lo = Q::new((r as i64 - 1).into(), (m as i64).into());
            let hi = Q::new((r as i64).into(), (m as i64).into());
            if let Some((mn, mx)) = cell_min_max(pieces, &lo, &hi) {
                for v in [mn, mx] {
                    if verts.last() != Some(&v) {
                        verts.push(v);
                    }
                }
            }
        }
        let flags = verts
            .windows(2)
            .map(|w| covered_length(pieces, &w[0], &w[1]) > Q::zero())
            .collect();
        vertices.push(verts);
        edges.push(flags);
    }
    Ok(Skeleton { m, vertices, edges })
}

fn cell_min_max(pieces: &[Piece], lo: &Q, hi: &Q) -> Option<(Q, Q)> {
    let mut mn: Option<Q> = None;
    let mut mx: Option<Q> = None;
    for pc in pieces {
        if pc.lo > *hi || pc.hi < *lo {
            continue;
        }
        let a = if pc.lo > *lo { pc.lo.clone() } else { lo.clone() };
        let b = if pc.hi < *hi { pc.hi.clone() } else { hi.clone() };
        if mn.as_ref().map_or(true, |v| a < *v) {
            mn = Some(a);
        }
        if mx.as_ref().map_or(true, |v| b > *v) {
            mx = Some(b);
        }
    }
    mn.zip(mx)
}

fn covered_length(pieces: &[Piece], lo: &Q, hi: &Q) -> Q {
    let mut total = Q::zero();
    for pc in pieces {
        if pc.lo > *hi || pc.hi < *lo {
            continue;
        }
        let a = if pc.lo > *lo { &pc.lo } else { lo };
        let b = if pc.hi < *hi { &pc.hi } else { hi };
        total += b - a;
    }
    total
}

/// One countable stretch between two retained vertices: points of the set
/// up to the gap collapse to `lo`, points past the gap to `hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMap {
    pub lo: Q,
    pub hi: Q,
    pub gap: (Q, Q),
}

/// The collapse map.  Vertex-fixing points, edge surjections, and split
/// assignments per interval block; points over the vertex part of the
/// spectrum map identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapseMap {
    pub edges: Vec<Vec<PlFunc>>,
    pub splits: Vec<Vec<SplitMap>>,
    pub fixed: Vec<Vec<Q>>,
}

impl CollapseMap {
    /// Image of a point of the source set.
    pub fn apply(&self, point: &SpectrumPoint) -> Result<SpectrumPoint> {
        match point {
            SpectrumPoint::Theta(j) => Ok(SpectrumPoint::Theta(*j)),
            SpectrumPoint::Interior { block, t } => {
                if *block >= self.edges.len() {
                    return Err(Error::invalid(format!("block index {block} out of range")));
                }
                for f in &self.edges[*block] {
                    let (a, b) = f.domain();
                    if a <= *t && *t <= b {
                        return Ok(SpectrumPoint::Interior {
                            block: *block,
                            t: f.eval(t)?,
                        });
                    }
                }
                for s in &self.splits[*block] {
                    if s.lo <= *t && *t <= s.hi {
                        if *t <= s.gap.0 {
                            return Ok(SpectrumPoint::Interior {
                                block: *block,
                                t: s.lo.clone(),
                            });
                        }
                        if *t >= s.gap.1 {
                            return Ok(SpectrumPoint::Interior {
                                block: *block,
                                t: s.hi.clone(),
                            });
                        }
                        break;
                    }
                }
                if self.fixed[*block].contains(t) {
                    return Ok(point.clone());
                }
                Err(Error::invalid(format!(
                    "point {} of block {block} is not in the collapsed set",
                    q_to_string(t)
                )))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let blocks: Vec<_> = (0..self.edges.len())
            .map(|i| {
                serde_json::json!({
                    "edges": self.edges[i]
                        .iter()
                        .map(|f| {
                            f.breakpoints()
                                .iter()
                                .map(|(x, y)| serde_json::json!([q_to_string(x), q_to_string(y)]))
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>(),
                    "splits": self.splits[i]
                        .iter()
                        .map(|s| {
                            serde_json::json!({
                                "lo": q_to_string(&s.lo),
                                "hi": q_to_string(&s.hi),
                                "gap": [q_to_string(&s.gap.0), q_to_string(&s.gap.1)],
                            })
                        })
                        .collect::<Vec<_>>(),
                    "fixed": self.fixed[i].iter().map(|v| q_to_string(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "schema": "collapse/v1",
            "gap_rule": "largest-sub-gap, leftmost on ties",
            "blocks": blocks,
        })
    }
}

/// A stretch between consecutive vertices, classified.
enum Segment {
    /// Positive length of the set in between: collapse onto the full
    /// interval.
    Edge { lo: Q, hi: Q, comps: Vec<(Q, Q)> },
    /// Zero length: keep the vertices, push interior points aside.
    Gap { lo: Q, hi: Q, interior: Vec<Q> },
}

/// Vertices and classified stretches of one block, computed from the piece
/// list alone.  Long grid-aligned runs inside a piece are kept as single
/// identity edges instead of being cut at every grid point, which changes
/// neither the collapsed set nor the map.
fn block_segments(pieces: &[Piece], m: u64) -> Result<(Vec<Q>, Vec<Segment>)> {
    if pieces.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mq = Q::new((m as i64).into(), 1.into());
    let grid = |j: &BigInt| Q::new(j.clone(), (m as i64).into());
    let mut cells: std::collections::BTreeSet<BigInt> = std::collections::BTreeSet::new();
    let mut add_point_cells = |x: &Q| {
        let xm = x * &mq;
        if xm.is_integer() {
            let j = xm.to_integer();
            if j > BigInt::zero() {
                cells.insert(j.clone());
            }
            if j < BigInt::from(m) {
                cells.insert(j + 1);
            }
        } else {
            cells.insert(xm.ceil().to_integer());
        }
    };
    for pc in pieces {
        add_point_cells(&pc.lo);
        add_point_cells(&pc.hi);
    }
    let mut verts: std::collections::BTreeSet<Q> = std::collections::BTreeSet::new();
    for r in &cells {
        let lo = grid(&(r - 1));
        let hi = grid(r);
        if let Some((mn, mx)) = cell_min_max(pieces, &lo, &hi) {
            verts.insert(mn);
            verts.insert(mx);
        }
    }
    for pc in pieces {
        if pc.lo < pc.hi {
            let j_lo = (&pc.lo * &mq).ceil().to_integer();
            let j_hi = (&pc.hi * &mq).floor().to_integer();
            if j_lo <= j_hi {
                verts.insert(grid(&j_lo));
                verts.insert(grid(&j_hi));
            }
        }
    }
    let verts: Vec<Q> = verts.into_iter().collect();
    let mut segments = Vec::new();
    for w in verts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let mut comps: Vec<(Q, Q)> = Vec::new();
        for pc in pieces {
            if pc.lo > *b || pc.hi < *a {
                continue;
            }
            let lo = if pc.lo > *a { pc.lo.clone() } else { a.clone() };
            let hi = if pc.hi < *b { pc.hi.clone() } else { b.clone() };
            comps.push((lo, hi));
        }
        let total: Q = comps.iter().map(|(lo, hi)| hi - lo).sum();
        if total > Q::zero() {
            segments.push(Segment::Edge {
                lo: a.clone(),
                hi: b.clone(),
                comps,
            });
        } else {
            let interior = comps
                .into_iter()
                .map(|(lo, _)| lo)
                .filter(|t| t > a && t < b)
                .collect();
            segments.push(Segment::Gap {
                lo: a.clone(),
                hi: b.clone(),
                interior,
            });
        }
    }
    Ok((verts, segments))
}

/// Collapse a closed subset onto a nearby set whose interval traces are
/// finite unions of honest intervals, all within `delta`.
pub fn discretize(
    p: &Presentation,
    y: &ClosedSubset,
    delta: &Q,
) -> Result<(ClosedSubset, CollapseMap)> {
    let m = grid_size(delta)?;
    let mut raw = RawSubset {
        thetas: y.thetas().clone(),
        pieces: vec![Vec::new(); p.l()],
    };
    let mut edges: Vec<Vec<PlFunc>> = vec![Vec::new(); p.l()];
    let mut splits: Vec<Vec<SplitMap>> = vec![Vec::new(); p.l()];
    let mut fixed: Vec<Vec<Q>> = vec![Vec::new(); p.l()];
    for i in 0..p.l() {
        let (verts, segments) = block_segments(y.block_trace(i), m)?;
        let mut covered: std::collections::BTreeSet<Q> = std::collections::BTreeSet::new();
        for seg in &segments {
            match seg {
                Segment::Edge { lo, hi, comps } => {
                    let f = if comps.len() == 1 && comps[0] == (lo.clone(), hi.clone()) {
                        PlFunc::identity(lo.clone(), hi.clone())
                    } else {
                        monotone_surjection(comps, lo, hi)?
                    };
                    edges[i].push(f);
                    raw.pieces[i].push(Piece::new(lo.clone(), hi.clone())?);
                    covered.insert(lo.clone());
                    covered.insert(hi.clone());
                }
                Segment::Gap { lo, hi, interior } => {
                    if !interior.is_empty() {
                        let mut cuts = vec![lo.clone()];
                        cuts.extend(interior.iter().cloned());
                        cuts.push(hi.clone());
                        let mut gap = (cuts[0].clone(), cuts[1].clone());
                        for w in cuts.windows(2) {
                            if &w[1] - &w[0] > &gap.1 - &gap.0 {
                                gap = (w[0].clone(), w[1].clone());
                            }
                        }
                        splits[i].push(SplitMap {
                            lo: lo.clone(),
                            hi: hi.clone(),
                            gap,
                        });
                    }
                }
            }
        }
        for v in verts {
            if !covered.contains(&v) {
                raw.pieces[i].push(Piece::point(v.clone())?);
                fixed[i].push(v);
            }
        }
    }
    let z = ClosedSubset::closure(p, raw)?;
    Ok((z, CollapseMap { edges, splits, fixed }))
}
