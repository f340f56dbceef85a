//! Restriction of a presented algebra to a closed subset of its spectrum.
//!
//! The restriction is again a presented algebra.  Its vertex part keeps the
//! vertices of the subset and adds one free matrix vertex for every cut
//! interval end (a *stub*); its interval part keeps the blocks with full
//! trace, the left and right collar pieces (reparametrized to `[0, 1]` and
//! glued to the original vertices on the surviving side, to their stub on
//! the cut side), and one matrix-over-interval summand per interior piece,
//! while isolated interior points become plain matrix summands.  The result
//! comes with the correspondence back to the original spectrum and with the
//! evaluation pattern realizing the quotient onto the restriction.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::discretize::CollapseMap;
use crate::error::{Error, Result};
use crate::pattern::{dimension_at, FiniteSpectrum, PatternHom, PieceMap, Track};
use crate::pl::PlFunc;
use crate::presentation::Presentation;
use crate::rational::{q_to_string, Q};
use crate::spectrum::{ClosedSubset, SpectrumPoint};

/// The restricted algebra together with its correspondence back to the
/// original spectrum.
#[derive(Debug, Clone)]
pub struct RestrictionResult {
    /// The presentation of the restriction.
    pub algebra: Presentation,
    /// For every vertex of the restriction, the point of the original
    /// spectrum it sits over.
    pub vertex_points: Vec<SpectrumPoint>,
    /// For every interval block of the restriction, the original block and
    /// the affine coordinate map `[0, 1] -> [a, b]` onto its piece.
    pub interval_maps: Vec<(usize, PlFunc)>,
    /// The quotient onto the restriction as a pattern: it sends each point
    /// of the restricted spectrum to the original point it sits over.
    pub inclusion: PatternHom,
}

/// How a row of the new gluing matrices is filled.
enum RowSpec {
    /// Original row restricted to the surviving vertex columns.
    Glue(usize),
    /// Multiplicity one into a single new vertex.
    Stub(usize),
}

pub fn restrict_algebra(p: &Presentation, z: &ClosedSubset) -> Result<RestrictionResult> {
    let idx = z.index_sets(p)?;
    if z.thetas().is_empty() && (0..p.l()).all(|i| z.block_trace(i).is_empty()) {
        return Err(Error::invalid("cannot restrict to the empty set"));
    }

    let j_list: Vec<usize> = idx.j_set.iter().copied().collect();
    let mut vertex_sizes: Vec<u64> = Vec::new();
    let mut vertex_points: Vec<SpectrumPoint> = Vec::new();
    let mut push_vertex = |size: u64, point: SpectrumPoint| -> usize {
        vertex_sizes.push(size);
        vertex_points.push(point);
        vertex_sizes.len() - 1
    };
    for &j in &j_list {
        push_vertex(p.k()[j], SpectrumPoint::Theta(j));
    }
    let mut left_stub: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &idx.ll {
        let s = idx.s[&i].clone();
        left_stub.insert(i, push_vertex(p.dims()[i], SpectrumPoint::Interior { block: i, t: s }));
    }
    let mut right_stub: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &idx.lr {
        let t = idx.t[&i].clone();
        right_stub.insert(i, push_vertex(p.dims()[i], SpectrumPoint::Interior { block: i, t }));
    }

    struct IntervalInfo {
        dim: u64,
        source: usize,
        map: PlFunc,
        alpha: RowSpec,
        beta: RowSpec,
    }
    let mut intervals: Vec<IntervalInfo> = Vec::new();
    for &i in &idx.l1 {
        intervals.push(IntervalInfo {
            dim: p.dims()[i],
            source: i,
            map: PlFunc::identity(Q::zero(), Q::one()),
            alpha: RowSpec::Glue(i),
            beta: RowSpec::Glue(i),
        });
    }
    for &i in &idx.ll {
        intervals.push(IntervalInfo {
            dim: p.dims()[i],
            source: i,
            map: PlFunc::affine(Q::zero(), Q::zero(), Q::one(), idx.s[&i].clone()),
            alpha: RowSpec::Glue(i),
            beta: RowSpec::Stub(left_stub[&i]),
        });
    }
    for &i in &idx.lr {
        intervals.push(IntervalInfo {
            dim: p.dims()[i],
            source: i,
            map: PlFunc::affine(Q::zero(), idx.t[&i].clone(), Q::one(), Q::one()),
            alpha: RowSpec::Stub(right_stub[&i]),
            beta: RowSpec::Glue(i),
        });
    }

    // Interior pieces and isolated points become their own summands.
    for i in 0..p.l() {
        if idx.l1.contains(&i) {
            continue;
        }
        for pc in z.block_trace(i) {
            if idx.ll.contains(&i) && pc.lo.is_zero() {
                continue;
            }
            if idx.lr.contains(&i) && pc.hi.is_one() {
                continue;
            }
            if pc.is_point() {
                push_vertex(p.dims()[i], SpectrumPoint::Interior { block: i, t: pc.lo.clone() });
            } else {
                let a = push_vertex(p.dims()[i], SpectrumPoint::Interior { block: i, t: pc.lo.clone() });
                let b = push_vertex(p.dims()[i], SpectrumPoint::Interior { block: i, t: pc.hi.clone() });
                intervals.push(IntervalInfo {
                    dim: p.dims()[i],
                    source: i,
                    map: PlFunc::affine(Q::zero(), pc.lo.clone(), Q::one(), pc.hi.clone()),
                    alpha: RowSpec::Stub(a),
                    beta: RowSpec::Stub(b),
                });
            }
        }
    }

    let fill_row = |spec: &RowSpec, original: &[Vec<u64>]| -> Vec<u64> {
        let mut row = vec![0u64; vertex_sizes.len()];
        match spec {
            RowSpec::Glue(i) => {
                for (pos, &j) in j_list.iter().enumerate() {
                    row[pos] = original[*i][j];
                }
            }
            RowSpec::Stub(v) => row[*v] = 1,
        }
        row
    };
    let alpha: Vec<Vec<u64>> = intervals.iter().map(|iv| fill_row(&iv.alpha, p.alpha())).collect();
    let beta: Vec<Vec<u64>> = intervals.iter().map(|iv| fill_row(&iv.beta, p.beta())).collect();
    let dims: Vec<u64> = intervals.iter().map(|iv| iv.dim).collect();
    let algebra = Presentation::new(vertex_sizes.clone(), dims, alpha, beta, p.unital())?;

    let mut vertex_spec = BTreeMap::new();
    for (pos, point) in vertex_points.iter().enumerate() {
        let spec = match point {
            SpectrumPoint::Theta(j) => {
                let mut s = FiniteSpectrum::zero(p);
                s.theta_mult[*j] = 1;
                s
            }
            SpectrumPoint::Interior { block, t } => {
                FiniteSpectrum::canonical(p, vec![0; p.p()], vec![(*block, t.clone())], 0)?
            }
        };
        vertex_spec.insert(pos, spec);
    }
    let piece_maps = intervals
        .iter()
        .map(|iv| {
            vec![PieceMap {
                tracks: vec![Track::Pl {
                    block: iv.source,
                    f: iv.map.clone(),
                }],
                pad: 0,
            }]
        })
        .collect();
    let inclusion = PatternHom::new(
        p.clone(),
        algebra.clone(),
        ClosedSubset::full(&algebra),
        vertex_spec,
        piece_maps,
    )?;
    let interval_maps = intervals.into_iter().map(|iv| (iv.source, iv.map)).collect();

    Ok(RestrictionResult {
        algebra,
        vertex_points,
        interval_maps,
        inclusion,
    })
}

impl RestrictionResult {
    /// The vertex of the restriction sitting over a point, if any.
    pub fn vertex_over(&self, point: &SpectrumPoint) -> Option<usize> {
        self.vertex_points.iter().position(|q| q == point)
    }

    /// The interval block of the restriction whose piece covers the given
    /// coordinate range of an original block, with the range endpoints of
    /// its coordinate map.
    pub fn interval_over(&self, block: usize, lo: &Q, hi: &Q) -> Option<(usize, Q, Q)> {
        for (pos, (src, map)) in self.interval_maps.iter().enumerate() {
            if *src != block {
                continue;
            }
            let a = map.start_value();
            let b = map.end_value();
            if a <= *lo && *hi <= b {
                return Some((pos, a, b));
            }
        }
        None
    }

    /// Fiber dimensions over a point of the restricted set: in the
    /// original algebra and in the restriction.  They agree when the
    /// construction is correct.
    pub fn fiber_dims(&self, p: &Presentation, z: &SpectrumPoint) -> Result<(u64, u64)> {
        let original = dimension_at(p, z);
        if let SpectrumPoint::Interior { block, t } = z {
            if let Some((pos, _, _)) = self.interval_over(*block, t, t) {
                return Ok((original, self.algebra.dims()[pos]));
            }
        }
        if let Some(pos) = self.vertex_over(z) {
            return Ok((original, self.algebra.k()[pos]));
        }
        Err(Error::invalid(format!("{z} is not in the restricted set")))
    }
}

/// The homomorphism pulling functions on the collapsed set back to the
/// source set: each point is sent to the point of the restriction its
/// collapse image sits over.  Composed with the quotient pattern of the
/// restriction, the image is exactly the collapsed set.
pub fn collapse_pattern(
    p: &Presentation,
    y: &ClosedSubset,
    rho: &CollapseMap,
    restriction: &RestrictionResult,
) -> Result<PatternHom> {
    let b = &restriction.algebra;
    let mut vertex_spec = BTreeMap::new();
    for j in y.thetas() {
        let pos = restriction
            .vertex_over(&SpectrumPoint::Theta(*j))
            .ok_or_else(|| Error::invalid(format!("vertex {j} is missing from the restriction")))?;
        let mut s = FiniteSpectrum::zero(b);
        s.theta_mult[pos] = 1;
        vertex_spec.insert(*j, s);
    }
    let mut piece_maps = Vec::with_capacity(p.l());
    for i in 0..p.l() {
        let mut list = Vec::new();
        for pc in y.block_trace(i) {
            let track = if pc.is_point() {
                let image = rho.apply(&SpectrumPoint::Interior { block: i, t: pc.lo.clone() })?;
                let t_im = match &image {
                    SpectrumPoint::Interior { t, .. } => t.clone(),
                    SpectrumPoint::Theta(_) => {
                        return Err(Error::internal("collapse moved an interior point to a vertex"))
                    }
                };
                if let Some((pos, a, bb)) = restriction.interval_over(i, &t_im, &t_im) {
                    let coord = (&t_im - &a) / (&bb - &a);
                    Track::Pl {
                        block: pos,
                        f: PlFunc::point(pc.lo.clone(), coord),
                    }
                } else if let Some(pos) = restriction.vertex_over(&image) {
                    Track::Theta(pos)
                } else {
                    return Err(Error::invalid(format!(
                        "collapsed point {} of block {i} is outside the restriction",
                        q_to_string(&t_im)
                    )));
                }
            } else {
                let mut parts: Vec<PlFunc> = Vec::new();
                for f in &rho.edges[i] {
                    let (a, bb) = f.domain();
                    let lo = if pc.lo > a { pc.lo.clone() } else { a };
                    let hi = if pc.hi < bb { pc.hi.clone() } else { bb };
                    if lo < hi {
                        parts.push(f.restrict(&lo, &hi)?);
                    }
                }
                if parts.is_empty() {
                    return Err(Error::internal("a set piece escaped the collapse edges"));
                }
                parts.sort_by(|f, g| f.domain().0.cmp(&g.domain().0));
                let mut joined = parts[0].clone();
                for part in &parts[1..] {
                    joined = joined.concat(part)?;
                }
                if joined.domain() != (pc.lo.clone(), pc.hi.clone()) {
                    return Err(Error::internal("collapse edges do not cover a set piece"));
                }
                let (rlo, rhi) = joined.range();
                let (pos, a, bb) = restriction.interval_over(i, &rlo, &rhi).ok_or_else(|| {
                    Error::invalid(format!(
                        "collapsed range [{}, {}] of block {i} is outside the restriction",
                        q_to_string(&rlo),
                        q_to_string(&rhi)
                    ))
                })?;
                let inverse = PlFunc::affine(a, Q::zero(), bb, Q::one());
                Track::Pl {
                    block: pos,
                    f: inverse.compose(&joined)?,
                }
            };
            list.push(PieceMap {
                tracks: vec![track],
                pad: 0,
            });
        }
        piece_maps.push(list);
    }
    PatternHom::new(b.clone(), p.clone(), y.clone(), vertex_spec, piece_maps)
}
