//! Symbolic test functions with exact eigenvalue evaluation.
//!
//! Two families, both parametrized by a grid size `m` (mesh `eta = 1/m`):
//!
//! * **Type 1** attaches to a point block `j`: the value at a vertex is the
//!   identity of that block (or zero elsewhere), and on each interval block
//!   it is a trapezoid — a plateau at 1 near each glued end, ramping to 0
//!   one mesh step later, with ranks given by the gluing multiplicities.
//! * **Type 2** attaches to an interval block `i`: a unit tent/plateau
//!   around a grid-aligned set `X` inside `[eta, 1-eta]`, scalar on the
//!   block, zero elsewhere.
//!
//! Functions are symbolic — never realized as matrices.  Eigenvalue lists
//! at spectrum points are computed exactly from the defining formulas.
//! A lift tag turns a function into the matrix-unit refinement used by the
//! finite-dimensional bridge; tagged functions carry no eigenvalue-list
//! semantics.

use crate::error::{Error, Result};
use crate::pl::PlFunc;
use crate::presentation::Presentation;
use crate::rational::{q, qi, Q};
use crate::spectrum::SpectrumPoint;
use num_traits::{One, Zero};

/// Matrix-unit tag `(row, col)` within the block a function attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LiftTag {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestFunction {
    Type1 {
        j: usize,
        a: Vec<u64>,
        b: Vec<u64>,
        m: u64,
        lift: Option<LiftTag>,
    },
    Type2 {
        i: usize,
        /// Disjoint grid runs `[s, e]` (indices into multiples of `eta`),
        /// sorted, each within `1..=m-1`.
        runs: Vec<(u64, u64)>,
        m: u64,
        lift: Option<LiftTag>,
    },
}

/// Sorted eigenvalue list (ascending, with multiplicity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EigList {
    values: Vec<Q>,
}

impl EigList {
    pub fn from_unsorted(mut values: Vec<Q>) -> Self {
        values.sort();
        EigList { values }
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn total(&self) -> usize {
        self.values.len()
    }
}

fn clamp01(x: Q) -> Q {
    if x < Q::zero() {
        Q::zero()
    } else if x > Q::one() {
        Q::one()
    } else {
        x
    }
}

pub fn make_type1(p: &Presentation, m: u64, j: usize, a: Vec<u64>, b: Vec<u64>) -> Result<TestFunction> {
    if m == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    if j >= p.p() {
        return Err(Error::invalid(format!("point-block index {j} out of range")));
    }
    if a.len() != p.l() || b.len() != p.l() {
        return Err(Error::invalid("ramp parameter vectors must have one entry per interval block"));
    }
    for i in 0..p.l() {
        if !(a[i] + 2 <= b[i] && b[i] <= m) {
            return Err(Error::invalid(format!(
                "block {i}: ramp parameters need a+2 <= b <= m, got a={}, b={}, m={m}",
                a[i], b[i]
            )));
        }
    }
    Ok(TestFunction::Type1 { j, a, b, m, lift: None })
}

pub fn make_type2(p: &Presentation, m: u64, i: usize, runs: Vec<(u64, u64)>) -> Result<TestFunction> {
    if m < 2 {
        return Err(Error::invalid("grid size must be at least 2 for a tent function"));
    }
    if i >= p.l() {
        return Err(Error::invalid(format!("interval-block index {i} out of range")));
    }
    if runs.is_empty() {
        return Err(Error::invalid("tent support must be nonempty"));
    }
    let mut prev_end: Option<u64> = None;
    for &(s, e) in &runs {
        if !(1 <= s && s <= e && e <= m - 1) {
            return Err(Error::invalid(format!(
                "run [{s}, {e}] escapes the admissible grid range 1..={}",
                m - 1
            )));
        }
        if let Some(pe) = prev_end {
            if s <= pe {
                return Err(Error::invalid("runs must be sorted and disjoint"));
            }
        }
        prev_end = Some(e);
    }
    Ok(TestFunction::Type2 { i, runs, m, lift: None })
}

impl TestFunction {
    pub fn lift_tag(&self) -> Option<LiftTag> {
        match self {
            TestFunction::Type1 { lift, .. } | TestFunction::Type2 { lift, .. } => *lift,
        }
    }

    /// Forget the matrix-unit tag (the canonical surjection back onto the
    /// untagged family).
    pub fn strip_lift(&self) -> TestFunction {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Type1 { lift, .. } | TestFunction::Type2 { lift, .. } => *lift = None,
        }
        out
    }

    /// Size of the matrix block the lift tags range over.
    pub fn tag_block_size(&self, p: &Presentation) -> usize {
        match self {
            TestFunction::Type1 { j, .. } => p.k()[*j] as usize,
            TestFunction::Type2 { i, .. } => p.dims()[*i] as usize,
        }
    }

    /// Left-ramp scalar value at coordinate `t` of interval block `i`:
    /// 1 on the plateau `[0, a_i/m]`, linearly down to 0 at `(a_i+1)/m`.
    fn left_value(&self, i: usize, t: &Q) -> Q {
        match self {
            TestFunction::Type1 { a, m, .. } => {
                clamp01(qi(a[i] as i64 + 1) - t * qi(*m as i64))
            }
            TestFunction::Type2 { .. } => Q::zero(),
        }
    }

    /// Right-ramp scalar value: 0 before `(b_i-1)/m`, linearly up to 1 at
    /// `b_i/m`, then 1.
    fn right_value(&self, i: usize, t: &Q) -> Q {
        match self {
            TestFunction::Type1 { b, m, .. } => {
                clamp01(t * qi(*m as i64) - qi(b[i] as i64 - 1))
            }
            TestFunction::Type2 { .. } => Q::zero(),
        }
    }

    /// Tent value for a type-2 function at coordinate `t` of its own block.
    fn tent_value(&self, t: &Q) -> Q {
        match self {
            TestFunction::Type2 { runs, m, .. } => {
                let mut dist: Option<Q> = None;
                for &(s, e) in runs {
                    let lo = q(s as i64, *m as i64);
                    let hi = q(e as i64, *m as i64);
                    let d = if *t < lo {
                        &lo - t
                    } else if *t > hi {
                        t - &hi
                    } else {
                        Q::zero()
                    };
                    if dist.as_ref().map_or(true, |cur| d < *cur) {
                        dist = Some(d);
                    }
                }
                clamp01(Q::one() - dist.unwrap() * qi(*m as i64))
            }
            TestFunction::Type1 { .. } => Q::zero(),
        }
    }

    /// The left trapezoid ramp of a type-1 function on interval block `i`
    /// as a function on `[0, 1]` (identically zero for type 2).
    pub fn left_profile(&self, block: usize) -> PlFunc {
        match self {
            TestFunction::Type1 { a, m, .. } => {
                let eta = q(1, *m as i64);
                let mut xs = vec![
                    Q::zero(),
                    qi(a[block] as i64) * &eta,
                    qi(a[block] as i64 + 1) * &eta,
                    Q::one(),
                ];
                xs.sort();
                xs.dedup();
                let pts = xs
                    .into_iter()
                    .map(|x| {
                        let v = self.left_value(block, &x);
                        (x, v)
                    })
                    .collect();
                PlFunc::new(pts).unwrap().simplified()
            }
            TestFunction::Type2 { .. } => PlFunc::constant(Q::zero(), Q::one(), Q::zero()),
        }
    }

    /// The right trapezoid ramp (identically zero for type 2).
    pub fn right_profile(&self, block: usize) -> PlFunc {
        match self {
            TestFunction::Type1 { b, m, .. } => {
                let eta = q(1, *m as i64);
                let mut xs = vec![
                    Q::zero(),
                    qi(b[block] as i64 - 1) * &eta,
                    qi(b[block] as i64) * &eta,
                    Q::one(),
                ];
                xs.sort();
                xs.dedup();
                let pts = xs
                    .into_iter()
                    .map(|x| {
                        let v = self.right_value(block, &x);
                        (x, v)
                    })
                    .collect();
                PlFunc::new(pts).unwrap().simplified()
            }
            TestFunction::Type2 { .. } => PlFunc::constant(Q::zero(), Q::one(), Q::zero()),
        }
    }

    /// The scalar profile on interval block `i` as an exact
    /// piecewise-linear function on `[0, 1]` (pointwise largest eigenvalue).
    pub fn scalar_profile(&self, block: usize) -> PlFunc {
        match self {
            TestFunction::Type1 { a, b, m, .. } => {
                let eta = q(1, *m as i64);
                let mut xs = vec![
                    Q::zero(),
                    qi(a[block] as i64) * &eta,
                    qi(a[block] as i64 + 1) * &eta,
                    qi(b[block] as i64 - 1) * &eta,
                    qi(b[block] as i64) * &eta,
                    Q::one(),
                ];
                xs.sort();
                xs.dedup();
                let pts = xs
                    .into_iter()
                    .map(|x| {
                        let v = {
                            let l = self.left_value(block, &x);
                            let r = self.right_value(block, &x);
                            if l >= r {
                                l
                            } else {
                                r
                            }
                        };
                        (x, v)
                    })
                    .collect();
                PlFunc::new(pts).unwrap().simplified()
            }
            TestFunction::Type2 { i, m, .. } => {
                if block != *i {
                    return PlFunc::constant(Q::zero(), Q::one(), Q::zero());
                }
                // Kinks can only sit at half-mesh multiples.
                let pts = (0..=2 * m)
                    .map(|k| {
                        let x = q(k as i64, 2 * *m as i64);
                        let v = self.tent_value(&x);
                        (x, v)
                    })
                    .collect();
                PlFunc::new(pts).unwrap().simplified()
            }
        }
    }

    /// Exact eigenvalue list at a spectrum point.  Interval coordinates may
    /// be 0 or 1 here: the value is then the glued-limit matrix, whose
    /// eigenvalues are the boundary expansion of the vertex values.  Tagged
    /// functions are rejected — matrix units have no eigenvalue-list
    /// semantics.
    pub fn eig_at(&self, p: &Presentation, x: &SpectrumPoint) -> Result<EigList> {
        if self.lift_tag().is_some() {
            return Err(Error::invalid("eigenvalue lists are defined for untagged functions only"));
        }
        match x {
            SpectrumPoint::Theta(jq) => {
                if *jq >= p.p() {
                    return Err(Error::invalid(format!("vertex index {jq} out of range")));
                }
                let k = p.k()[*jq] as usize;
                let one_here = matches!(self, TestFunction::Type1 { j, .. } if j == jq);
                let v = if one_here { Q::one() } else { Q::zero() };
                Ok(EigList::from_unsorted(vec![v; k]))
            }
            SpectrumPoint::Interior { block, t } => {
                if *block >= p.l() {
                    return Err(Error::invalid(format!("block index {block} out of range")));
                }
                if *t < Q::zero() || *t > Q::one() {
                    return Err(Error::invalid("interval coordinate out of range"));
                }
                let dim = p.dims()[*block] as usize;
                let mut values = Vec::with_capacity(dim);
                match self {
                    TestFunction::Type1 { j, .. } => {
                        let vl = self.left_value(*block, t);
                        let vr = self.right_value(*block, t);
                        let rank_l = (p.alpha()[*block][*j] * p.k()[*j]) as usize;
                        let rank_r = (p.beta()[*block][*j] * p.k()[*j]) as usize;
                        if !vl.is_zero() {
                            values.extend(std::iter::repeat(vl).take(rank_l));
                        } else if !vr.is_zero() {
                            values.extend(std::iter::repeat(vr).take(rank_r));
                        }
                    }
                    TestFunction::Type2 { i, .. } => {
                        if i == block {
                            let v = self.tent_value(t);
                            values.extend(std::iter::repeat(v).take(dim));
                        }
                    }
                }
                while values.len() < dim {
                    values.push(Q::zero());
                }
                Ok(EigList::from_unsorted(values))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let lift = self
            .lift_tag()
            .map(|t| serde_json::json!([t.row, t.col]))
            .unwrap_or(serde_json::Value::Null);
        match self {
            TestFunction::Type1 { j, a, b, m, .. } => serde_json::json!({
                "schema": "testfn/v1",
                "kind": "type1",
                "j": j,
                "a": a,
                "b": b,
                "m": m,
                "lift": lift,
            }),
            TestFunction::Type2 { i, runs, m, .. } => serde_json::json!({
                "schema": "testfn/v1",
                "kind": "type2",
                "i": i,
                "runs": runs.iter().map(|(s, e)| serde_json::json!([s, e])).collect::<Vec<_>>(),
                "m": m,
                "lift": lift,
            }),
        }
    }
}

/// All matrix-unit refinements of an untagged function: one per entry of
/// the block it attaches to.  Stripping the tags recovers the input.
pub fn lift_to_matrix_units(p: &Presentation, h: &TestFunction) -> Result<Vec<TestFunction>> {
    if h.lift_tag().is_some() {
        return Err(Error::invalid("function is already tagged"));
    }
    let n = h.tag_block_size(p);
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let mut v = h.clone();
            match &mut v {
                TestFunction::Type1 { lift, .. } | TestFunction::Type2 { lift, .. } => {
                    *lift = Some(LiftTag { row, col });
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Enumeration caps: the generator stops (and reports truncation) rather
/// than exceed them.  Type-2 supports grow exponentially in the grid size,
/// so an explicit budget is mandatory.
#[derive(Debug, Clone, Copy)]
pub struct EnumBudget {
    /// Maximum number of functions yielded in total.
    pub max_total: usize,
    /// Maximum number of runs in a single type-2 support.
    pub max_type2_runs: usize,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget {
            max_total: 100_000,
            max_type2_runs: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub functions: Vec<TestFunction>,
    pub truncated: bool,
}

/// Deterministic enumeration of the full family at mesh `1/m`: type-1
/// functions lexicographically in `(j, a, b)`, then type-2 functions per
/// block in prefix (DFS) order over disjoint run sequences.
pub fn enumerate_family(p: &Presentation, m: u64, budget: EnumBudget) -> Result<Enumeration> {
    if m == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let mut out = Vec::new();
    let mut truncated = false;

    // Admissible per-block ramp pairs, lexicographic.
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for a in 0..m {
        for b in (a + 2)..=m {
            pairs.push((a, b));
        }
    }
    'type1: for j in 0..p.p() {
        if p.l() == 0 {
            if out.len() >= budget.max_total {
                truncated = true;
                break 'type1;
            }
            out.push(make_type1(p, m, j, vec![], vec![])?);
            continue;
        }
        // Cartesian product over blocks, odometer in lexicographic order.
        if pairs.is_empty() {
            continue;
        }
        let mut idx = vec![0usize; p.l()];
        loop {
            if out.len() >= budget.max_total {
                truncated = true;
                break 'type1;
            }
            let a: Vec<u64> = idx.iter().map(|&c| pairs[c].0).collect();
            let b: Vec<u64> = idx.iter().map(|&c| pairs[c].1).collect();
            out.push(make_type1(p, m, j, a, b)?);
            // Advance odometer (last block fastest).
            let mut pos = p.l();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < pairs.len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    idx.clear();
                    break;
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }

    // Type-2: DFS over disjoint run sequences per block.
    if m >= 2 {
        'type2: for i in 0..p.l() {
            let mut stack: Vec<(u64, u64)> = Vec::new();
            if !dfs_runs(p, m, i, 1, &mut stack, &mut out, &budget)? {
                truncated = true;
                break 'type2;
            }
        }
    }
    Ok(Enumeration { functions: out, truncated })
}

/// Emit every extension of `stack` by runs starting at `from` or later.
/// Returns false when the total budget ran out.
fn dfs_runs(
    p: &Presentation,
    m: u64,
    i: usize,
    from: u64,
    stack: &mut Vec<(u64, u64)>,
    out: &mut Vec<TestFunction>,
    budget: &EnumBudget,
) -> Result<bool> {
    for s in from..=(m - 1) {
        for e in s..=(m - 1) {
            stack.push((s, e));
            if out.len() >= budget.max_total {
                stack.pop();
                return Ok(false);
            }
            out.push(make_type2(p, m, i, stack.clone())?);
            if stack.len() < budget.max_type2_runs && e + 1 <= m - 1 {
                if !dfs_runs(p, m, i, e + 1, stack, out, budget)? {
                    stack.pop();
                    return Ok(false);
                }
            }
            stack.pop();
        }
    }
    Ok(true)
}
