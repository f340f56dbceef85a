//! Exact piecewise-linear functions on closed rational intervals.
//!
//! A `PlFunc` is a list of breakpoints `(x, y)` with strictly increasing `x`,
//! interpreted as the continuous interpolation on `[x_first, x_last]`.  A
//! single breakpoint is allowed and denotes a function on a degenerate
//! (point) interval.  These carry the eigenvalue tracks of pattern
//! homomorphisms, element profiles, collapse maps and spectral paths, so the
//! operations here (evaluation, composition, crossings, sup distance) are
//! all exact.

use crate::error::{Error, Result};
use crate::rational::{midpoint, Q};
use num_traits::{Signed, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlFunc {
    pts: Vec<(Q, Q)>,
}

impl PlFunc {
    pub fn new(pts: Vec<(Q, Q)>) -> Result<Self> {
        if pts.is_empty() {
            return Err(Error::invalid("piecewise-linear function needs a breakpoint"));
        }
        for w in pts.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid(
                    "piecewise-linear breakpoints must be strictly increasing",
                ));
            }
        }
        Ok(PlFunc { pts })
    }

    /// Constant `v` on `[a, b]` (degenerate when `a == b`).
    pub fn constant(a: Q, b: Q, v: Q) -> Self {
        if a == b {
            PlFunc { pts: vec![(a, v)] }
        } else {
            PlFunc {
                pts: vec![(a, v.clone()), (b, v)],
            }
        }
    }

    /// The affine map sending `a -> va` and `b -> vb` (requires `a < b`).
    pub fn affine(a: Q, va: Q, b: Q, vb: Q) -> Self {
        debug_assert!(a < b);
        PlFunc {
            pts: vec![(a, va), (b, vb)],
        }
    }

    /// Identity on `[a, b]`.
    pub fn identity(a: Q, b: Q) -> Self {
        if a == b {
            PlFunc {
                pts: vec![(a.clone(), a)],
            }
        } else {
            PlFunc {
                pts: vec![(a.clone(), a), (b.clone(), b)],
            }
        }
    }

    /// Single-point function.
    pub fn point(x: Q, v: Q) -> Self {
        PlFunc { pts: vec![(x, v)] }
    }

    pub fn breakpoints(&self) -> &[(Q, Q)] {
        &self.pts
    }

    pub fn domain(&self) -> (Q, Q) {
        (
            self.pts.first().unwrap().0.clone(),
            self.pts.last().unwrap().0.clone(),
        )
    }

    pub fn is_degenerate(&self) -> bool {
        self.pts.len() == 1
    }

    pub fn start_value(&self) -> Q {
        self.pts.first().unwrap().1.clone()
    }

    pub fn end_value(&self) -> Q {
        self.pts.last().unwrap().1.clone()
    }

    pub fn eval(&self, x: &Q) -> Result<Q> {
        let (lo, hi) = self.domain();
        if *x < lo || *x > hi {
            return Err(Error::invalid(format!(
                "evaluation point {x} outside domain [{lo}, {hi}]"
            )));
        }
        if self.pts.len() == 1 {
            return Ok(self.pts[0].1.clone());
        }
        // Find the segment containing x.
        let idx = match self.pts.binary_search_by(|(px, _)| px.cmp(x)) {
            Ok(i) => return Ok(self.pts[i].1.clone()),
            Err(i) => i, // first breakpoint strictly above x; x in segment i-1..i
        };
        let (x0, y0) = &self.pts[idx - 1];
        let (x1, y1) = &self.pts[idx];
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Minimum and maximum over the whole domain (attained at breakpoints).
    pub fn range(&self) -> (Q, Q) {
        let mut lo = self.pts[0].1.clone();
        let mut hi = lo.clone();
        for (_, y) in &self.pts[1..] {
            if *y < lo {
                lo = y.clone();
            }
            if *y > hi {
                hi = y.clone();
            }
        }
        (lo, hi)
    }

    /// Largest absolute slope over all segments; zero for degenerate domains.
    pub fn max_abs_slope(&self) -> Q {
        let mut best = Q::zero();
        for w in self.pts.windows(2) {
            let s = ((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).abs();
            if s > best {
                best = s;
            }
        }
        best
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.pts.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    /// Restriction to `[a, b]` (must lie inside the domain, `a <= b`).
    pub fn restrict(&self, a: &Q, b: &Q) -> Result<PlFunc> {
        let (lo, hi) = self.domain();
        if a > b || *a < lo || *b > hi {
            return Err(Error::invalid(format!(
                "restriction [{a}, {b}] escapes domain [{lo}, {hi}]"
            )));
        }
        if a == b {
            return Ok(PlFunc::point(a.clone(), self.eval(a)?));
        }
        let mut pts = vec![(a.clone(), self.eval(a)?)];
        for (x, y) in &self.pts {
            if x > a && x < b {
                pts.push((x.clone(), y.clone()));
            }
        }
        pts.push((b.clone(), self.eval(b)?));
        PlFunc::new(pts)
    }

    /// Composition `self(inner(.))`; the range of `inner` must lie inside
    /// the domain of `self`.
    pub fn compose(&self, inner: &PlFunc) -> Result<PlFunc> {
        let (rlo, rhi) = inner.range();
        let (dlo, dhi) = self.domain();
        if rlo < dlo || rhi > dhi {
            return Err(Error::invalid(format!(
                "composition range [{rlo}, {rhi}] escapes domain [{dlo}, {dhi}]"
            )));
        }
        if inner.pts.len() == 1 {
            let (x, y) = &inner.pts[0];
            return Ok(PlFunc::point(x.clone(), self.eval(y)?));
        }
        // Breakpoints of the composite: inner's own, plus preimages of
        // self's breakpoints under each affine piece of inner.
        let mut xs: Vec<Q> = inner.pts.iter().map(|(x, _)| x.clone()).collect();
        for w in inner.pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if y0 == y1 {
                continue;
            }
            for (bx, _) in &self.pts {
                // Solve y0 + (y1-y0)(x-x0)/(x1-x0) = bx for x.
                let t = (bx - y0) / (y1 - y0);
                if t > Q::zero() && t < Q::from_integer(1.into()) {
                    xs.push(x0 + (x1 - x0) * t);
                }
            }
        }
        xs.sort();
        xs.dedup();
        let mut pts = Vec::with_capacity(xs.len());
        for x in xs {
            let v = self.eval(&inner.eval(&x)?)?;
            pts.push((x, v));
        }
        PlFunc::new(pts).map(PlFunc::simplified)
    }

    /// Drop breakpoints that lie exactly on the segment through their
    /// neighbours.  Keeps representations canonical after compositions.
    pub fn simplified(self) -> PlFunc {
        if self.pts.len() <= 2 {
            return self;
        }
        let mut pts: Vec<(Q, Q)> = Vec::with_capacity(self.pts.len());
        for pt in self.pts.into_iter() {
            pts.push(pt);
            while pts.len() >= 3 {
                let n = pts.len();
                let (x0, y0) = &pts[n - 3];
                let (x1, y1) = &pts[n - 2];
                let (x2, y2) = &pts[n - 1];
                // Collinear iff (y1-y0)(x2-x1) == (y2-y1)(x1-x0).
                if (y1 - y0) * (x2 - x1) == (y2 - y1) * (x1 - x0) {
                    pts.remove(n - 2);
                } else {
                    break;
                }
            }
        }
        PlFunc { pts }
    }

    /// Glue with a function on an adjacent interval; values must agree at
    /// the shared endpoint.
    pub fn concat(&self, next: &PlFunc) -> Result<PlFunc> {
        let (_, hi) = self.domain();
        let (nlo, _) = next.domain();
        if hi != nlo {
            return Err(Error::invalid("concatenation domains do not touch"));
        }
        if self.end_value() != next.start_value() {
            return Err(Error::invalid(format!(
                "concatenation mismatch at {hi}: {} vs {}",
                self.end_value(),
                next.start_value()
            )));
        }
        let mut pts = self.pts.clone();
        pts.extend(next.pts.iter().skip(1).cloned());
        Ok(PlFunc { pts }.simplified())
    }

    /// Points where `self == other` on the shared domain, plus nothing else.
    /// Both functions must have identical domains.
    pub fn crossings(&self, other: &PlFunc) -> Result<Vec<Q>> {
        if self.domain() != other.domain() {
            return Err(Error::invalid("crossing search needs equal domains"));
        }
        let grid = refine_partition(&[self, other]);
        let mut out = Vec::new();
        for w in grid.windows(2) {
            let (x0, x1) = (&w[0], &w[1]);
            let a0 = self.eval(x0)? - other.eval(x0)?;
            let a1 = self.eval(x1)? - other.eval(x1)?;
            if a0.is_zero() {
                out.push(x0.clone());
            }
            if (a0 < Q::zero() && a1 > Q::zero()) || (a0 > Q::zero() && a1 < Q::zero()) {
                // Linear sign change inside the cell.
                let t = -&a0 / (&a1 - &a0);
                out.push(x0 + (x1 - x0) * t);
            }
        }
        if let Some(x) = grid.last() {
            if (self.eval(x)? - other.eval(x)?).is_zero() {
                out.push(x.clone());
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Pointwise sum on the shared domain.
    pub fn add(&self, other: &PlFunc) -> Result<PlFunc> {
        if self.domain() != other.domain() {
            return Err(Error::invalid("pointwise sum needs equal domains"));
        }
        let grid = refine_partition(&[self, other]);
        let mut pts = Vec::with_capacity(grid.len());
        for x in grid {
            let v = self.eval(&x)? + other.eval(&x)?;
            pts.push((x, v));
        }
        Ok(PlFunc::new(pts)?.simplified())
    }

    /// Exact sup of `|self - other|` over the shared domain.
    pub fn sup_dist(&self, other: &PlFunc) -> Result<Q> {
        if self.domain() != other.domain() {
            return Err(Error::invalid("sup distance needs equal domains"));
        }
        let grid = refine_partition(&[self, other]);
        let mut best = Q::zero();
        for x in &grid {
            let d = (self.eval(x)? - other.eval(x)?).abs();
            if d > best {
                best = d;
            }
        }
        Ok(best)
    }

    /// Closed solution set of `self(x) == y`, as maximal intervals (points
    /// appear with equal endpoints).
    pub fn preimages(&self, y: &Q) -> Vec<(Q, Q)> {
        let mut raw: Vec<(Q, Q)> = Vec::new();
        if self.pts.len() == 1 {
            if &self.pts[0].1 == y {
                raw.push((self.pts[0].0.clone(), self.pts[0].0.clone()));
            }
            return raw;
        }
        for w in self.pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if y0 == y1 {
                if y0 == y {
                    raw.push((x0.clone(), x1.clone()));
                }
            } else {
                let t = (y - y0) / (y1 - y0);
                if t >= Q::zero() && t <= Q::from_integer(1.into()) {
                    let x = x0 + (x1 - x0) * t;
                    raw.push((x.clone(), x));
                }
            }
        }
        raw.sort();
        // Merge touching intervals.
        let mut out: Vec<(Q, Q)> = Vec::new();
        for (a, b) in raw {
            match out.last_mut() {
                Some((_, pb)) if *pb >= a => {
                    if b > *pb {
                        *pb = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        out
    }
}

/// Union of all breakpoint abscissas of `fs` (which must share a domain),
/// sorted and deduplicated.
pub fn refine_partition(fs: &[&PlFunc]) -> Vec<Q> {
    let mut xs: Vec<Q> = fs
        .iter()
        .flat_map(|f| f.pts.iter().map(|(x, _)| x.clone()))
        .collect();
    xs.sort();
    xs.dedup();
    xs
}

/// Breakpoint grid refined by all pairwise crossings among `fs`, plus
/// midpoints of consecutive grid cells.  On the returned grid, sorting the
/// values of `fs` pointwise is stable within each cell, which makes sorted
/// sup-distances and sorted branch extraction exact.
pub fn crossing_partition(fs: &[&PlFunc]) -> Result<Vec<Q>> {
    let mut xs = refine_partition(fs);
    for (a, fa) in fs.iter().enumerate() {
        for fb in fs.iter().skip(a + 1) {
            if fa.domain() == fb.domain() {
                xs.extend(fa.crossings(fb)?);
            }
        }
    }
    xs.sort();
    xs.dedup();
    let mids: Vec<Q> = xs.windows(2).map(|w| midpoint(&w[0], &w[1])).collect();
    xs.extend(mids);
    xs.sort();
    xs.dedup();
    Ok(xs)
}
