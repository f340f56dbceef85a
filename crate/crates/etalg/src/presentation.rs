//! Presentations of one-dimensional glued interval algebras.
//!
//! A presentation records two finite-dimensional parts and the pair of
//! nonnegative integer gluing matrices identifying the interval boundary
//! fibers with the point part:
//!
//! * `k[j]`   - matrix sizes of the point blocks (`j = 0..p`),
//! * `dims[i]` - matrix sizes of the interval blocks (`i = 0..l`),
//! * `alpha`, `beta` - `l x p` multiplicity matrices gluing the left and
//!   right interval endpoints,
//! * `unital` - whether each gluing row fills its fiber exactly.
//!
//! `l == 0` encodes a plain finite-dimensional algebra.  All indices in this
//! crate are 0-based.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snf::smith_normal_form;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presentation {
    k: Vec<u64>,
    dims: Vec<u64>,
    alpha: Vec<Vec<u64>>,
    beta: Vec<Vec<u64>>,
    unital: bool,
}

/// One failed invariant, with enough context to print a useful report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// `k[j] == 0` or `dims[i] == 0`.
    ZeroBlockSize { part: char, index: usize },
    /// A gluing row over- or under-fills its fiber.
    RowSum {
        matrix: char,
        row: usize,
        expected: u64,
        got: u64,
        strict: bool,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ZeroBlockSize { part, index } => {
                write!(f, "block size {part}[{index}] must be positive")
            }
            Violation::RowSum {
                matrix,
                row,
                expected,
                got,
                strict,
            } => {
                let rel = if *strict { "=" } else { "<=" };
                write!(
                    f,
                    "row {row} of {matrix} weights sum to {got}, need {rel} {expected}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// K-groups of a presentation: a saturated basis for the kernel lattice of
/// `alpha - beta` and the invariant factors of its cokernel (trivial factors
/// dropped, one `0` per free summand, divisibility order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KTheory {
    pub k0_rank: usize,
    pub k0_basis: Vec<Vec<BigInt>>,
    pub k1_invariant_factors: Vec<BigInt>,
}

/// One direct summand found by `decompose_minimal`, with the original block
/// indices it was carved from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub presentation: Presentation,
    pub point_blocks: Vec<usize>,
    pub interval_blocks: Vec<usize>,
}

impl Presentation {
    /// Build from raw parts, checking shapes only (`alpha`, `beta` must both
    /// be `dims.len() x k.len()`).  Invariants beyond shape are reported by
    /// [`Presentation::validate`], not enforced here, so that invalid inputs
    /// can still be inspected.
    pub fn new(
        k: Vec<u64>,
        dims: Vec<u64>,
        alpha: Vec<Vec<u64>>,
        beta: Vec<Vec<u64>>,
        unital: bool,
    ) -> Result<Self> {
        let l = dims.len();
        let p = k.len();
        for (name, m) in [("alpha", &alpha), ("beta", &beta)] {
            if m.len() != l {
                return Err(Error::schema(format!(
                    "{name} has {} rows, expected l = {l}",
                    m.len()
                )));
            }
            if let Some(row) = m.iter().find(|r| r.len() != p) {
                return Err(Error::schema(format!(
                    "{name} row has {} entries, expected p = {p}",
                    row.len()
                )));
            }
        }
        Ok(Presentation {
            k,
            dims,
            alpha,
            beta,
            unital,
        })
    }

    /// Number of point blocks.
    pub fn p(&self) -> usize {
        self.k.len()
    }
    /// Number of interval blocks.
    pub fn l(&self) -> usize {
        self.dims.len()
    }
    pub fn k(&self) -> &[u64] {
        &self.k
    }
    pub fn dims(&self) -> &[u64] {
        &self.dims
    }
    pub fn alpha(&self) -> &[Vec<u64>] {
        &self.alpha
    }
    pub fn beta(&self) -> &[Vec<u64>] {
        &self.beta
    }
    pub fn unital(&self) -> bool {
        self.unital
    }

    /// Total interval fiber size `L = dims[0] + ... + dims[l-1]`.
    pub fn l_total(&self) -> u64 {
        self.dims.iter().sum()
    }

    /// Column support of row `i` of `alpha` (blocks glued at the left end).
    pub fn alpha_support(&self, i: usize) -> BTreeSet<usize> {
        (0..self.p()).filter(|&j| self.alpha[i][j] > 0).collect()
    }
    /// Column support of row `i` of `beta`.
    pub fn beta_support(&self, i: usize) -> BTreeSet<usize> {
        (0..self.p()).filter(|&j| self.beta[i][j] > 0).collect()
    }

    /// Weighted row sum `sum_j m[i][j] * k[j]`.
    fn row_fill(&self, m: &[Vec<u64>], i: usize) -> u64 {
        (0..self.p()).map(|j| m[i][j] * self.k[j]).sum()
    }
    pub fn alpha_fill(&self, i: usize) -> u64 {
        self.row_fill(&self.alpha, i)
    }
    pub fn beta_fill(&self, i: usize) -> u64 {
        self.row_fill(&self.beta, i)
    }

    /// Check positivity of block sizes and the gluing row sums: equality per
    /// row when unital, `<=` otherwise.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (j, &kj) in self.k.iter().enumerate() {
            if kj == 0 {
                violations.push(Violation::ZeroBlockSize { part: 'k', index: j });
            }
        }
        for (i, &di) in self.dims.iter().enumerate() {
            if di == 0 {
                violations.push(Violation::ZeroBlockSize { part: 'd', index: i });
            }
        }
        for i in 0..self.l() {
            for (name, fill) in [('a', self.alpha_fill(i)), ('b', self.beta_fill(i))] {
                let bad = if self.unital {
                    fill != self.dims[i]
                } else {
                    fill > self.dims[i]
                };
                if bad {
                    violations.push(Violation::RowSum {
                        matrix: name,
                        row: i,
                        expected: self.dims[i],
                        got: fill,
                        strict: self.unital,
                    });
                }
            }
        }
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "presentation fails validation: {}",
                report
                    .violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            )))
        }
    }

    /// `alpha - beta` as an exact integer matrix (`l x p`).
    pub fn alpha_minus_beta(&self) -> Vec<Vec<BigInt>> {
        (0..self.l())
            .map(|i| {
                (0..self.p())
                    .map(|j| BigInt::from(self.alpha[i][j] as i128 - self.beta[i][j] as i128))
                    .collect()
            })
            .collect()
    }

    /// K-groups via the Smith normal form of `alpha - beta`.
    pub fn k_theory(&self) -> Result<KTheory> {
        self.ensure_valid()?;
        let d = self.alpha_minus_beta();
        let snf = smith_normal_form(&d, self.l(), self.p());
        Ok(KTheory {
            k0_rank: self.p() - snf.rank,
            k0_basis: snf.kernel_basis(),
            k1_invariant_factors: snf.cokernel_factors(),
        })
    }

    /// Split into minimal direct summands: connected components of the
    /// bipartite graph with an edge between point block `j` and interval
    /// block `i` whenever `alpha[i][j] + beta[i][j] > 0`.  Block order within
    /// each component follows the original order, and components are sorted
    /// by their smallest original block (point blocks first as tie-break).
    pub fn decompose_minimal(&self) -> Result<Vec<Component>> {
        self.ensure_valid()?;
        let p = self.p();
        let l = self.l();
        // Union-find over p point nodes then l interval nodes.
        let mut parent: Vec<usize> = (0..p + l).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..l {
            for j in 0..p {
                if self.alpha[i][j] + self.beta[i][j] > 0 {
                    let a = find(&mut parent, j);
                    let b = find(&mut parent, p + i);
                    parent[a] = b;
                }
            }
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut comp_of = vec![0usize; p + l];
        for x in 0..p + l {
            let r = find(&mut parent, x);
            let idx = match roots.iter().position(|&q| q == r) {
                Some(i) => i,
                None => {
                    roots.push(r);
                    roots.len() - 1
                }
            };
            comp_of[x] = idx;
        }
        let mut out = Vec::new();
        for c in 0..roots.len() {
            let point_blocks: Vec<usize> = (0..p).filter(|&j| comp_of[j] == c).collect();
            let interval_blocks: Vec<usize> =
                (0..l).filter(|&i| comp_of[p + i] == c).collect();
            let sub = Presentation::new(
                point_blocks.iter().map(|&j| self.k[j]).collect(),
                interval_blocks.iter().map(|&i| self.dims[i]).collect(),
                interval_blocks
                    .iter()
                    .map(|&i| point_blocks.iter().map(|&j| self.alpha[i][j]).collect())
                    .collect(),
                interval_blocks
                    .iter()
                    .map(|&i| point_blocks.iter().map(|&j| self.beta[i][j]).collect())
                    .collect(),
                self.unital,
            )?;
            out.push(Component {
                presentation: sub,
                point_blocks,
                interval_blocks,
            });
        }
        // Deterministic order: smallest original block index, points first.
        out.sort_by_key(|c| {
            let pmin = c.point_blocks.first().copied().unwrap_or(usize::MAX);
            let imin = c.interval_blocks.first().copied().unwrap_or(usize::MAX);
            (pmin.min(imin), imin == pmin.min(imin))
        });
        Ok(out)
    }

    /// Block-diagonal direct sum.  Both sides must agree on unitality.
    pub fn direct_sum(&self, other: &Presentation) -> Result<Presentation> {
        if self.unital != other.unital {
            return Err(Error::invalid(
                "direct sum of unital and non-unital presentations",
            ));
        }
        let p1 = self.p();
        let mut k = self.k.clone();
        k.extend_from_slice(&other.k);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut alpha: Vec<Vec<u64>> = self
            .alpha
            .iter()
            .map(|r| {
                let mut row = r.clone();
                row.extend(std::iter::repeat(0).take(other.p()));
                row
            })
            .collect();
        let mut beta: Vec<Vec<u64>> = self
            .beta
            .iter()
            .map(|r| {
                let mut row = r.clone();
                row.extend(std::iter::repeat(0).take(other.p()));
                row
            })
            .collect();
        for i in 0..other.l() {
            let mut arow = vec![0u64; p1];
            arow.extend_from_slice(&other.alpha[i]);
            alpha.push(arow);
            let mut brow = vec![0u64; p1];
            brow.extend_from_slice(&other.beta[i]);
            beta.push(brow);
        }
        Presentation::new(k, dims, alpha, beta, self.unital)
    }

    /// Equality after some simultaneous renumbering of point blocks and of
    /// interval blocks.  Exponential in block counts; fine at desk scale.
    pub fn equivalent_up_to_permutation(&self, other: &Presentation) -> bool {
        if self.p() != other.p()
            || self.l() != other.l()
            || self.unital != other.unital
        {
            return false;
        }
        let p = self.p();
        let l = self.l();
        let perms = |n: usize| -> Vec<Vec<usize>> {
            let mut out = vec![vec![]];
            for _ in 0..n {
                let mut next = Vec::new();
                for partial in &out {
                    for x in 0..n {
                        if !partial.contains(&x) {
                            let mut q = partial.clone();
                            q.push(x);
                            next.push(q);
                        }
                    }
                }
                out = next;
            }
            out
        };
        for sig in perms(p) {
            if (0..p).any(|j| self.k[j] != other.k[sig[j]]) {
                continue;
            }
            'tau: for tau in perms(l) {
                for i in 0..l {
                    if self.dims[i] != other.dims[tau[i]] {
                        continue 'tau;
                    }
                    for j in 0..p {
                        if self.alpha[i][j] != other.alpha[tau[i]][sig[j]]
                            || self.beta[i][j] != other.beta[tau[i]][sig[j]]
                        {
                            continue 'tau;
                        }
                    }
                }
                return true;
            }
        }
        false
    }

    /// Graphviz rendering of the gluing graph: point blocks as boxes,
    /// interval blocks as ellipses, solid edges weighted by `alpha`, dashed
    /// by `beta`.
    pub fn gluing_graph_dot(&self) -> String {
        let mut s = String::from("graph gluing {\n");
        for (j, &kj) in self.k.iter().enumerate() {
            let _ = writeln!(s, "  p{j} [shape=box, label=\"M{kj} (p{j})\"];");
        }
        for (i, &di) in self.dims.iter().enumerate() {
            let _ = writeln!(s, "  i{i} [shape=ellipse, label=\"C([0,1],M{di}) (i{i})\"];");
        }
        for i in 0..self.l() {
            for j in 0..self.p() {
                if self.alpha[i][j] > 0 {
                    let _ = writeln!(s, "  p{j} -- i{i} [label=\"{}\"];", self.alpha[i][j]);
                }
                if self.beta[i][j] > 0 {
                    let _ = writeln!(
                        s,
                        "  p{j} -- i{i} [style=dashed, label=\"{}\"];",
                        self.beta[i][j]
                    );
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Small ready-made presentations used by the self-test command, the test
/// suites, and the documentation examples.
pub mod samples {
    use super::*;

    /// Two points glued into one interval: left end sees both blocks once,
    /// right end sees the first block twice.
    pub fn dimension_drop() -> Presentation {
        Presentation::new(
            vec![1, 1],
            vec![2],
            vec![vec![1, 1]],
            vec![vec![2, 0]],
            true,
        )
        .unwrap()
    }

    /// Continuous functions on the interval.
    pub fn unit_interval() -> Presentation {
        Presentation::new(
            vec![1, 1],
            vec![1],
            vec![vec![1, 0]],
            vec![vec![0, 1]],
            true,
        )
        .unwrap()
    }

    /// `M_n` of continuous functions on the interval.
    pub fn matrix_interval(n: u64) -> Presentation {
        Presentation::new(
            vec![n, n],
            vec![n],
            vec![vec![1, 0]],
            vec![vec![0, 1]],
            true,
        )
        .unwrap()
    }
}
