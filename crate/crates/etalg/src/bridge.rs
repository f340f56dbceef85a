//! Floating-point verification of the constant-spectrum deformation stage.
//!
//! Two unit-preserving evaluations into the same matrix algebra that share
//! a spectrum and act alike on a detector family differ by a unitary that
//! is nearly block-diagonal with respect to a coarse regrouping of the
//! evaluation frame: spectrum points are snapped onto a grid whose cells
//! the detectors resolve, slots snapped together are grouped, and the
//! mixing unitary is compared against its block-diagonal, chunk-scalar
//! shadow.  This module materializes that construction for small sizes
//! (`n <= 8`): it builds the regrouped frame, extracts block-diagonal and
//! scalarized parts by polar decomposition, interpolates the resulting
//! unitaries along three stages, and checks the intermediate bound chain
//! (with a factor-2 slack) together with the deviation of the whole path
//! from its left endpoint.
//!
//! Everything here is numerical by design; the exact-arithmetic side of
//! the same deformation lives in [`crate::perturb`].

use crate::error::{Error, Result};
use crate::pattern::{FiniteSpectrum, ProfileElement, TinyRng};
use crate::perturb::ConstantBundle;
use crate::presentation::Presentation;
use crate::rational::{q, Q};
use crate::testfn::TestFunction;
use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{ToPrimitive, Zero};

type C64 = Complex<f64>;
type CMat = DMatrix<C64>;

/// A concrete evaluation into `M_n`: a finite spectrum listing the diagonal
/// data and the unitary conjugating the diagonal model onto the map itself.
#[derive(Debug, Clone)]
pub struct MatrixHom {
    pub spectrum: FiniteSpectrum,
    pub unitary: CMat,
}

/// One measured inequality of the bound chain.
#[derive(Debug, Clone)]
pub struct ChainEntry {
    pub label: String,
    pub measured: f64,
    /// Twice the nominal bound — the slack absorbs rounding.
    pub allowed: f64,
}

/// The full evidence of one bridge run: the frames, the derived unitaries,
/// the measured bound chain, and the sampled path.
#[derive(Debug, Clone)]
pub struct BridgeTrace {
    pub n: usize,
    /// Number of groups in the regrouped frame.
    pub n_groups: usize,
    /// Max deviation over the detector family (must be below `eps_prime`).
    pub hypothesis_max: f64,
    pub chain: Vec<ChainEntry>,
    /// Max reconstruction error of the two endpoints.
    pub endpoint_error: f64,
    /// Max mismatch of the three stages at the joining times.
    pub seam_error: f64,
    /// Max over sampled times and the working family of the distance from
    /// the left endpoint (must stay below `eps`).
    pub path_defect: f64,
    pub u: CMat,
    pub v: CMat,
    /// The regrouping permutation.
    pub w: CMat,
    /// Block-diagonal polar part of the mixing unitary.
    pub s: CMat,
    /// Chunk-scalarized shadow of `s`.
    pub d: CMat,
    /// Polar part of `d` inside the group commutant.
    pub o: CMat,
    /// Sample times in `[0, 1]`.
    pub times: Vec<f64>,
    /// The path unitary at each sample time (`u_t`, with
    /// `phi_t(f) = u_t^* . diag(f) . u_t`).
    pub u_path: Vec<CMat>,
}

fn qf(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

fn copy_block(dst: &mut CMat, src: &CMat, dr: usize, dc: usize, sr: usize, sc: usize, nr: usize, nc: usize) {
    for r in 0..nr {
        for c in 0..nc {
            dst[(dr + r, dc + c)] = src[(sr + r, sc + c)];
        }
    }
}

// ---------------------------------------------------------------------------
// The evaluation frame and its grid regrouping.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum SlotKind {
    Theta(usize),
    Interior { block: usize, x: Q },
}

#[derive(Debug, Clone)]
struct Slot {
    kind: SlotKind,
    off: usize,
    size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Theta(usize),
    Cell { block: usize, cell: u64 },
}

#[derive(Debug, Clone)]
struct Chunk {
    slot: usize,
    /// Offset of the chunk inside its slot's fiber.
    intra: usize,
    len: usize,
    new_off: usize,
}

#[derive(Debug, Clone)]
struct Group {
    chunk_len: usize,
    new_off: usize,
    count: usize,
}

struct Frame {
    slots: Vec<Slot>,
    groups: Vec<Group>,
    w: CMat,
    n: usize,
}

/// For each grid cell of width `1/m`, the left edge of the least
/// spectrum-free window of width `2 eta` (as a multiple of `eta`).
fn free_windows(points: &[Q], m: u64, n: u64, eta: &Q) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(m as usize);
    for k in 0..m {
        let lo = 2 * n * k;
        let hi = 2 * n * (k + 1) - 2;
        let mut found = None;
        for a in lo..=hi {
            let wl = Q::from(num_bigint::BigInt::from(a)) * eta;
            let wr = &wl + eta + eta;
            if points.iter().all(|x| *x <= wl || *x >= wr) {
                found = Some(a);
                break;
            }
        }
        match found {
            Some(a) => out.push(a),
            None => {
                return Err(Error::internal(format!(
                    "no spectrum-free window of width 2/(2mn) in grid cell {k}"
                )))
            }
        }
    }
    Ok(out)
}

fn build_frame(p: &Presentation, spectrum: &FiniteSpectrum, bundle: &ConstantBundle) -> Result<Frame> {
    let n = spectrum.size(p) as usize;
    let mut slots = Vec::new();
    let mut off = 0usize;
    for (j, &mult) in spectrum.theta_mult.iter().enumerate() {
        let k = p.k()[j] as usize;
        for _ in 0..mult {
            slots.push(Slot { kind: SlotKind::Theta(j), off, size: k });
            off += k;
        }
    }
    for (i, x) in &spectrum.interior {
        let d = p.dims()[*i] as usize;
        slots.push(Slot {
            kind: SlotKind::Interior { block: *i, x: x.clone() },
            off,
            size: d,
        });
        off += d;
    }
    if off != n {
        return Err(Error::internal("slot sizes do not add up to the matrix size"));
    }

    let eta = &bundle.eta;
    let mut windows: Vec<Vec<u64>> = Vec::with_capacity(p.l());
    for i in 0..p.l() {
        let pts: Vec<Q> = spectrum
            .interior
            .iter()
            .filter(|(b, _)| *b == i)
            .map(|(_, x)| x.clone())
            .collect();
        windows.push(free_windows(&pts, bundle.m, bundle.n, eta)?);
    }

    let big = |a: u64| Q::from(num_bigint::BigInt::from(a));
    let mut chunks: Vec<Chunk> = Vec::new();
    for (si, slot) in slots.iter().enumerate() {
        match &slot.kind {
            SlotKind::Theta(_) => chunks.push(Chunk { slot: si, intra: 0, len: slot.size, new_off: 0 }),
            SlotKind::Interior { block, x } => {
                let win = &windows[*block];
                let left_edge = big(win[0]) * eta;
                let right_edge = big(win[bundle.m as usize - 1]) * eta + eta + eta;
                if *x <= left_edge {
                    let row = &p.alpha()[*block];
                    let mut intra = 0usize;
                    for (s, &mult) in row.iter().enumerate() {
                        let ks = p.k()[s] as usize;
                        for _ in 0..mult {
                            chunks.push(Chunk { slot: si, intra, len: ks, new_off: 0 });
                            intra += ks;
                        }
                    }
                } else if *x >= right_edge {
                    let row = &p.beta()[*block];
                    let mut intra = 0usize;
                    for (s, &mult) in row.iter().enumerate() {
                        let ks = p.k()[s] as usize;
                        for _ in 0..mult {
                            chunks.push(Chunk { slot: si, intra, len: ks, new_off: 0 });
                            intra += ks;
                        }
                    }
                } else {
                    let mut cell = None;
                    for kdx in 0..(bundle.m as usize).saturating_sub(1) {
                        let seg_lo = big(win[kdx]) * eta + eta + eta;
                        let seg_hi = big(win[kdx + 1]) * eta;
                        if *x >= seg_lo && *x <= seg_hi {
                            cell = Some(kdx as u64 + 1);
                            break;
                        }
                    }
                    let cell = cell.ok_or_else(|| {
                        Error::internal("spectrum point escapes the window decomposition")
                    })?;
                    let _ = cell;
                    chunks.push(Chunk { slot: si, intra: 0, len: slot.size, new_off: 0 });
                }
            }
        }
    }

    // Assign groups in lexicographic key order: vertices first, then cells.
    let key_of = |ch: &Chunk| -> Result<GroupKey> {
        let slot = &slots[ch.slot];
        match &slot.kind {
            SlotKind::Theta(j) => Ok(GroupKey::Theta(*j)),
            SlotKind::Interior { block, x } => {
                let win = &windows[*block];
                let left_edge = big(win[0]) * eta;
                let right_edge = big(win[bundle.m as usize - 1]) * eta + eta + eta;
                if *x <= left_edge {
                    // Which vertex this sub-chunk belongs to is read off the
                    // gluing row at its intra offset.
                    let row = &p.alpha()[*block];
                    let mut run = 0usize;
                    for (s, &mult) in row.iter().enumerate() {
                        let span = (mult * p.k()[s]) as usize;
                        if ch.intra < run + span {
                            return Ok(GroupKey::Theta(s));
                        }
                        run += span;
                    }
                    Err(Error::internal("chunk offset escapes the left gluing row"))
                } else if *x >= right_edge {
                    let row = &p.beta()[*block];
                    let mut run = 0usize;
                    for (s, &mult) in row.iter().enumerate() {
                        let span = (mult * p.k()[s]) as usize;
                        if ch.intra < run + span {
                            return Ok(GroupKey::Theta(s));
                        }
                        run += span;
                    }
                    Err(Error::internal("chunk offset escapes the right gluing row"))
                } else {
                    for kdx in 0..(bundle.m as usize).saturating_sub(1) {
                        let seg_lo = big(win[kdx]) * eta + eta + eta;
                        let seg_hi = big(win[kdx + 1]) * eta;
                        if *x >= seg_lo && *x <= seg_hi {
                            return Ok(GroupKey::Cell { block: *block, cell: kdx as u64 + 1 });
                        }
                    }
                    Err(Error::internal("spectrum point escapes the window decomposition"))
                }
            }
        }
    };

    let mut by_key: std::collections::BTreeMap<GroupKey, Vec<usize>> = std::collections::BTreeMap::new();
    for (ci, ch) in chunks.iter().enumerate() {
        by_key.entry(key_of(ch)?).or_default().push(ci);
    }

    let mut groups = Vec::with_capacity(by_key.len());
    let mut new_off = 0usize;
    for (_key, members) in by_key {
        let chunk_len = chunks[members[0]].len;
        let group_off = new_off;
        let count = members.len();
        for ci in members {
            if chunks[ci].len != chunk_len {
                return Err(Error::internal("grouped chunks have unequal sizes"));
            }
            chunks[ci].new_off = new_off;
            new_off += chunk_len;
        }
        groups.push(Group { chunk_len, new_off: group_off, count });
    }
    if new_off != n {
        return Err(Error::internal("group sizes do not add up to the matrix size"));
    }

    let mut w = CMat::zeros(n, n);
    for ch in &chunks {
        let old = slots[ch.slot].off + ch.intra;
        for r in 0..ch.len {
            w[(ch.new_off + r, old + r)] = C64::new(1.0, 0.0);
        }
    }

    Ok(Frame { slots, groups, w, n })
}

// ---------------------------------------------------------------------------
// Matrix evaluation of elements in the diagonal frame.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Elem<'a> {
    Test(&'a TestFunction),
    Profile(&'a ProfileElement),
}

fn vertex_matrix(p: &Presentation, e: Elem<'_>, j: usize) -> Result<CMat> {
    let k = p.k()[j] as usize;
    let mut m0 = CMat::zeros(k, k);
    match e {
        Elem::Test(h) => match h {
            TestFunction::Type1 { j: j0, lift, .. } if *j0 == j => match lift {
                None => {
                    for r in 0..k {
                        m0[(r, r)] = C64::new(1.0, 0.0);
                    }
                }
                Some(t) => m0[(t.row, t.col)] = C64::new(1.0, 0.0),
            },
            _ => {}
        },
        Elem::Profile(f) => {
            for r in 0..k {
                m0[(r, r)] = C64::new(qf(&f.theta_eigs[j][r]), 0.0);
            }
        }
    }
    Ok(m0)
}

fn place_scaled(m0: &mut CMat, off: usize, k: usize, lift: &Option<crate::testfn::LiftTag>, v: f64) {
    match lift {
        None => {
            for r in 0..k {
                m0[(off + r, off + r)] = C64::new(v, 0.0);
            }
        }
        Some(t) => m0[(off + t.row, off + t.col)] = C64::new(v, 0.0),
    }
}

fn interior_matrix(p: &Presentation, e: Elem<'_>, i: usize, x: &Q) -> Result<CMat> {
    let dims = p.dims()[i] as usize;
    let mut m0 = CMat::zeros(dims, dims);
    match e {
        Elem::Test(h) => match h {
            TestFunction::Type1 { j, lift, .. } => {
                let kj = p.k()[*j] as usize;
                let vl = qf(&h.left_profile(i).eval(x)?);
                if vl != 0.0 {
                    let off: usize = (0..*j).map(|s| (p.alpha()[i][s] * p.k()[s]) as usize).sum();
                    for c in 0..p.alpha()[i][*j] as usize {
                        place_scaled(&mut m0, off + c * kj, kj, lift, vl);
                    }
                }
                let vr = qf(&h.right_profile(i).eval(x)?);
                if vr != 0.0 {
                    let off: usize = (0..*j).map(|s| (p.beta()[i][s] * p.k()[s]) as usize).sum();
                    for c in 0..p.beta()[i][*j] as usize {
                        place_scaled(&mut m0, off + c * kj, kj, lift, vr);
                    }
                }
            }
            TestFunction::Type2 { i: i0, lift, .. } => {
                if *i0 == i {
                    let v = qf(&h.scalar_profile(i).eval(x)?);
                    match lift {
                        None => {
                            for r in 0..dims {
                                m0[(r, r)] = C64::new(v, 0.0);
                            }
                        }
                        Some(t) => m0[(t.row, t.col)] = C64::new(v, 0.0),
                    }
                }
            }
        },
        Elem::Profile(f) => {
            for (b, branch) in f.branches[i].iter().enumerate() {
                m0[(b, b)] = C64::new(qf(&branch.eval(x)?), 0.0);
            }
        }
    }
    Ok(m0)
}

/// The diagonal model of an element over the frame's spectrum, in the
/// original (ungrouped) coordinates.
fn eval_diag(p: &Presentation, e: Elem<'_>, frame: &Frame) -> Result<CMat> {
    let mut m0 = CMat::zeros(frame.n, frame.n);
    for slot in &frame.slots {
        let val = match &slot.kind {
            SlotKind::Theta(j) => vertex_matrix(p, e, *j)?,
            SlotKind::Interior { block, x } => interior_matrix(p, e, *block, x)?,
        };
        copy_block(&mut m0, &val, slot.off, slot.off, 0, 0, slot.size, slot.size);
    }
    Ok(m0)
}

// ---------------------------------------------------------------------------
// Unitary interpolation.
// ---------------------------------------------------------------------------

fn off_diagonal_mass(d: &CMat) -> f64 {
    let n = d.nrows();
    let mut off = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                off = off.max(d[(r, c)].norm());
            }
        }
    }
    off
}

/// Diagonalize a unitary matrix: returns `(q, angles)` with
/// `u = q . diag(exp(i angle)) . q^*`.  A unitary is normal, so a Hermitian
/// combination `Re(gamma u)` shares its eigenvectors whenever its
/// eigenvalues separate; a short list of phases `gamma` is tried and the
/// best candidate basis kept.  A shared phase can still leave one
/// eigenvalue pair merged (equal real parts after rotation), so remaining
/// off-diagonal blocks are cleaned up by two-by-two rotations, each with a
/// phase centered on the pair itself.
fn diagonalize_unitary(u: &CMat) -> Result<(CMat, Vec<f64>)> {
    let n = u.nrows();
    let gammas = [0.0f64, 0.739_085_1, 1.234_567, 2.094_395, 0.314_159, 1.772_453];
    let mut best: Option<(f64, CMat)> = None;
    for g in gammas {
        let gamma = C64::from_polar(1.0, g);
        let scaled = u.map(|z| z * gamma);
        let herm = (&scaled + scaled.adjoint()).map(|z| z * C64::new(0.5, 0.0));
        let eig = nalgebra::SymmetricEigen::new(herm);
        let q_basis = eig.eigenvectors;
        let off = off_diagonal_mass(&(q_basis.adjoint() * u * &q_basis));
        if best.as_ref().is_none_or(|(b, _)| off < *b) {
            best = Some((off, q_basis));
        }
    }
    let (mut off, mut q_basis) = best.expect("the phase list is nonempty");
    for _sweep in 0..3 {
        if off < 1e-12 {
            break;
        }
        let d = q_basis.adjoint() * u * &q_basis;
        for p0 in 0..n {
            for q0 in (p0 + 1)..n {
                if d[(p0, q0)].norm().max(d[(q0, p0)].norm()) <= 1e-12 {
                    continue;
                }
                // Rotate the pair's eigenvalue estimates symmetric around
                // the imaginary axis, where their real parts separate best.
                let g = std::f64::consts::FRAC_PI_2
                    - 0.5 * (d[(p0, p0)].arg() + d[(q0, q0)].arg());
                let gamma = C64::from_polar(1.0, g);
                let block = CMat::from_fn(2, 2, |r, c| {
                    d[([p0, q0][r], [p0, q0][c])] * gamma
                });
                let herm = (&block + block.adjoint()).map(|z| z * C64::new(0.5, 0.0));
                let v = nalgebra::SymmetricEigen::new(herm).eigenvectors;
                for r in 0..n {
                    let (a, b) = (q_basis[(r, p0)], q_basis[(r, q0)]);
                    q_basis[(r, p0)] = a * v[(0, 0)] + b * v[(1, 0)];
                    q_basis[(r, q0)] = a * v[(0, 1)] + b * v[(1, 1)];
                }
            }
        }
        off = off_diagonal_mass(&(q_basis.adjoint() * u * &q_basis));
    }
    if off >= 1e-8 {
        return Err(Error::internal(format!(
            "no separating phase found while diagonalizing a unitary (residue {off:.3e})"
        )));
    }
    let d = q_basis.adjoint() * u * &q_basis;
    let angles = (0..n).map(|r| d[(r, r)].arg()).collect();
    Ok((q_basis, angles))
}

/// The geodesic from the identity to the diagonalized unitary, at fraction
/// `s` of the way.
fn geodesic(q_basis: &CMat, angles: &[f64], s: f64) -> CMat {
    let n = q_basis.nrows();
    let mut d = CMat::zeros(n, n);
    for (r, a) in angles.iter().enumerate() {
        d[(r, r)] = C64::from_polar(1.0, s * a);
    }
    q_basis * d * q_basis.adjoint()
}

struct GroupPath {
    q_basis: CMat,
    angles: Vec<f64>,
    chunk_len: usize,
    new_off: usize,
}

// ---------------------------------------------------------------------------
// The bridge itself.
// ---------------------------------------------------------------------------

fn check_unitary(m0: &CMat, n: usize, what: &str) -> Result<()> {
    if m0.nrows() != n || m0.ncols() != n {
        return Err(Error::invalid(format!("{what} has the wrong dimensions")));
    }
    let defect = op_norm(&(m0.adjoint() * m0 - identity(n)));
    if defect > 1e-9 {
        return Err(Error::invalid(format!("{what} is not unitary (defect {defect:.2e})")));
    }
    Ok(())
}

/// Polar decomposition `m = |m^*| . unit`; fails when `m` is numerically
/// singular.
fn polar_unitary(m0: &CMat, context: &str) -> Result<CMat> {
    let svd = m0.clone().svd(true, true);
    let min_sv = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(min_sv > 1e-6) {
        return Err(Error::invalid(format!(
            "{context}: polar decomposition did not converge (singular value {min_sv:.2e})"
        )));
    }
    let u_svd = svd.u.ok_or_else(|| Error::internal("svd lost its left factor"))?;
    let v_t = svd.v_t.ok_or_else(|| Error::internal("svd lost its right factor"))?;
    Ok(u_svd * v_t)
}

/// Verify that two same-spectrum evaluations are joined by a unitary path
/// that stays `eps`-close to the left endpoint on the working family.
///
/// Preconditions: both evaluations are unit-preserving with equal canonical
/// spectra of total size `bundle.n <= 8`; the detector family satisfies the
/// near-equality hypothesis at `eps_prime`; the working family is bounded
/// by 1.  The returned trace records every measured quantity; any violated
/// bound aborts with an error naming the failed step.
pub fn unitary_bridge(
    p: &Presentation,
    phi: &MatrixHom,
    psi: &MatrixHom,
    detectors: &[TestFunction],
    working: &[ProfileElement],
    bundle: &ConstantBundle,
) -> Result<BridgeTrace> {
    let n = bundle.n as usize;
    if n > 8 {
        return Err(Error::invalid("matrix sizes above 8 are outside the verifier's range"));
    }
    if working.is_empty() {
        return Err(Error::invalid("the working family must be nonempty"));
    }
    let s_phi = FiniteSpectrum::canonical(p, phi.spectrum.theta_mult.clone(), phi.spectrum.interior.clone(), phi.spectrum.zero_pad)?;
    let s_psi = FiniteSpectrum::canonical(p, psi.spectrum.theta_mult.clone(), psi.spectrum.interior.clone(), psi.spectrum.zero_pad)?;
    if s_phi.zero_pad != 0 || s_psi.zero_pad != 0 {
        return Err(Error::invalid("the bridge runs on unit-preserving evaluations only"));
    }
    if s_phi.size(p) != bundle.n || s_psi.size(p) != bundle.n {
        return Err(Error::invalid("spectrum size does not match the target matrix size"));
    }
    if s_phi != s_psi {
        return Err(Error::invalid("the two spectra must agree exactly"));
    }
    check_unitary(&phi.unitary, n, "left unitary")?;
    check_unitary(&psi.unitary, n, "right unitary")?;

    let epsf = qf(&bundle.eps);
    let epf = qf(&bundle.eps_prime);
    let nf = n as f64;
    if nf * nf * epf >= 1.0 {
        return Err(Error::invalid(
            "T possibly singular: n^2 eps' >= 1 leaves no room for the polar step",
        ));
    }

    let frame = build_frame(p, &s_phi, bundle)?;
    let u = phi.unitary.clone();
    let v = psi.unitary.clone();
    let w = frame.w.clone();

    // Hypothesis: the two evaluations nearly agree on every detector.
    let mut hypothesis_max = 0.0f64;
    for (idx, h) in detectors.iter().enumerate() {
        let m0 = eval_diag(p, Elem::Test(h), &frame)?;
        let gap = op_norm(&(u.adjoint() * &m0 * &u - v.adjoint() * &m0 * &v));
        hypothesis_max = hypothesis_max.max(gap);
        if gap >= epf {
            return Err(Error::invalid(format!(
                "hypothesis fails on detector {idx}: deviation {gap:.3e} >= eps' {epf:.3e}"
            )));
        }
    }

    let wtilde = &w * &v * u.adjoint() * w.adjoint();

    // Block-diagonal extraction and its polar part.
    let mut t_full = CMat::zeros(n, n);
    for g in &frame.groups {
        let size = g.chunk_len * g.count;
        copy_block(&mut t_full, &wtilde, g.new_off, g.new_off, g.new_off, g.new_off, size, size);
    }
    let mut s_full = CMat::zeros(n, n);
    for g in &frame.groups {
        let size = g.chunk_len * g.count;
        let mut block = CMat::zeros(size, size);
        copy_block(&mut block, &t_full, 0, 0, g.new_off, g.new_off, size, size);
        let pol = polar_unitary(&block, "T possibly singular")?;
        copy_block(&mut s_full, &pol, g.new_off, g.new_off, 0, 0, size, size);
    }

    let mut chain = Vec::new();
    let mut push_chain = |label: &str, measured: f64, nominal: f64| -> Result<()> {
        let allowed = 2.0 * nominal;
        chain.push(ChainEntry { label: label.to_string(), measured, allowed });
        if measured >= allowed {
            return Err(Error::internal(format!(
                "bound chain violated at '{label}': {measured:.3e} >= {allowed:.3e}"
            )));
        }
        Ok(())
    };

    let n2 = nf * nf;
    let n4 = n2 * n2;
    let n6 = n4 * n2;

    push_chain(
        "mixing unitary against its block polar part",
        op_norm(&(&wtilde * s_full.adjoint() - identity(n))),
        2.0 * n2 * epf,
    )?;

    let mut comm_detectors = 0.0f64;
    for h in detectors {
        let m0 = eval_diag(p, Elem::Test(h), &frame)?;
        let mw = &w * &m0 * w.adjoint();
        comm_detectors = comm_detectors.max(op_norm(&(&s_full * &mw - &mw * &s_full)));
    }
    push_chain("block polar part commutes with detectors", comm_detectors, 5.0 * n2 * epf)?;

    // Chunk scalarization.
    let mut d_full = CMat::zeros(n, n);
    let mut o_full = CMat::zeros(n, n);
    let mut group_paths = Vec::with_capacity(frame.groups.len());
    let mut scalar_defect = 0.0f64;
    for g in &frame.groups {
        let c = g.count;
        let d = g.chunk_len;
        let mut dmat = CMat::zeros(c, c);
        for bs in 0..c {
            for bt in 0..c {
                let mut tr = C64::zero();
                for r in 0..d {
                    tr += s_full[(g.new_off + bs * d + r, g.new_off + bt * d + r)];
                }
                let scalar = tr / C64::new(d as f64, 0.0);
                dmat[(bs, bt)] = scalar;
                let mut dev = 0.0f64;
                for r in 0..d {
                    for cc in 0..d {
                        let have = s_full[(g.new_off + bs * d + r, g.new_off + bt * d + cc)];
                        let want = if r == cc { scalar } else { C64::zero() };
                        dev = dev.max((have - want).norm());
                    }
                }
                scalar_defect = scalar_defect.max(dev);
            }
        }
        let eye = identity(d);
        let dk = dmat.kronecker(&eye);
        copy_block(&mut d_full, &dk, g.new_off, g.new_off, 0, 0, c * d, c * d);
        // dmat = |dmat^*| . pol; the commutant unitary O is pol^*, so that
        // S^* O^* = S^* . pol tracks S^* D and stays near the identity.
        let pol = polar_unitary(&dmat, "scalarized block")?;
        let o_small = pol.adjoint();
        let ok = o_small.kronecker(&eye);
        copy_block(&mut o_full, &ok, g.new_off, g.new_off, 0, 0, c * d, c * d);
        let (q_basis, angles) = diagonalize_unitary(&pol)?;
        group_paths.push(GroupPath { q_basis, angles, chunk_len: d, new_off: g.new_off });
    }
    push_chain("chunks are scalar", scalar_defect, 5.0 * n4 * epf)?;
    push_chain("scalarization | S - D |", op_norm(&(&s_full - &d_full)), 5.0 * n6 * epf)?;
    push_chain(
        "scalarized part against its commutant polar | S*O* - I |",
        op_norm(&(s_full.adjoint() * o_full.adjoint() - identity(n))),
        10.0 * n6 * epf,
    )?;

    let working_diag: Vec<CMat> = working
        .iter()
        .map(|f| eval_diag(p, Elem::Profile(f), &frame))
        .collect::<Result<_>>()?;
    let mut comm_working = 0.0f64;
    for m0 in &working_diag {
        let mw = &w * m0 * w.adjoint();
        comm_working = comm_working.max(op_norm(&(&d_full * &mw - &mw * &d_full)));
    }
    push_chain("scalarized part commutes with the working family", comm_working, 12.0 * n6 * epf)?;

    // The three stages of the path.
    let so_target = s_full.adjoint() * o_full.adjoint();
    let (q_in, a_in) = diagonalize_unitary(&so_target)?;
    let wts_target = &wtilde * s_full.adjoint();
    let (q_out, a_out) = diagonalize_unitary(&wts_target)?;

    let middle_at = |s_loc: f64| -> CMat {
        // From O* (s_loc = 0) to the identity (s_loc = 1), inside the
        // group commutant.
        let mut r = CMat::zeros(n, n);
        for gp in &group_paths {
            let small = geodesic(&gp.q_basis, &gp.angles, 1.0 - s_loc);
            let big = small.kronecker(&identity(gp.chunk_len));
            copy_block(&mut r, &big, gp.new_off, gp.new_off, 0, 0, big.nrows(), big.ncols());
        }
        r
    };
    let u_star_at = |t: f64| -> CMat {
        if t <= 1.0 / 3.0 {
            let r = geodesic(&q_in, &a_in, 3.0 * t);
            u.adjoint() * w.adjoint() * r * &w
        } else if t <= 2.0 / 3.0 {
            let r = middle_at(3.0 * t - 1.0);
            u.adjoint() * w.adjoint() * s_full.adjoint() * r * &w
        } else {
            let r = geodesic(&q_out, &a_out, 3.0 * (1.0 - t));
            v.adjoint() * w.adjoint() * r * &w
        }
    };

    // Seams: the three formulas must agree at the joining times.
    let seam_in = {
        let a = u.adjoint() * w.adjoint() * geodesic(&q_in, &a_in, 1.0) * &w;
        let b = u.adjoint() * w.adjoint() * s_full.adjoint() * middle_at(0.0) * &w;
        op_norm(&(a - b))
    };
    let seam_out = {
        let a = u.adjoint() * w.adjoint() * s_full.adjoint() * middle_at(1.0) * &w;
        let b = v.adjoint() * w.adjoint() * geodesic(&q_out, &a_out, 1.0) * &w;
        op_norm(&(a - b))
    };
    let seam_error = seam_in.max(seam_out);
    if seam_error >= 1e-8 {
        return Err(Error::internal(format!(
            "path stages do not join continuously (seam error {seam_error:.3e})"
        )));
    }

    // Endpoints reproduce the two evaluations.
    let mut endpoint_error = 0.0f64;
    let us0 = u_star_at(0.0);
    let us1 = u_star_at(1.0);
    for m0 in &working_diag {
        let ref_phi = u.adjoint() * m0 * &u;
        let ref_psi = v.adjoint() * m0 * &v;
        endpoint_error = endpoint_error.max(op_norm(&(&us0 * m0 * us0.adjoint() - ref_phi)));
        endpoint_error = endpoint_error.max(op_norm(&(&us1 * m0 * us1.adjoint() - ref_psi)));
    }
    if endpoint_error >= 1e-8 {
        return Err(Error::internal(format!(
            "path endpoints fail to reproduce the evaluations (error {endpoint_error:.3e})"
        )));
    }

    // The sampled path stays eps-close to the left endpoint.
    let samples = 32usize;
    let mut times = Vec::with_capacity(samples);
    let mut u_path = Vec::with_capacity(samples);
    let mut path_defect = 0.0f64;
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let us = u_star_at(t);
        for m0 in &working_diag {
            let ref_phi = u.adjoint() * m0 * &u;
            path_defect = path_defect.max(op_norm(&(&us * m0 * us.adjoint() - ref_phi)));
        }
        times.push(t);
        u_path.push(us.adjoint());
    }
    if path_defect >= epsf + 1e-8 {
        return Err(Error::internal(format!(
            "path strays from its left endpoint: defect {path_defect:.3e} >= eps {epsf:.3e}"
        )));
    }

    Ok(BridgeTrace {
        n,
        n_groups: frame.groups.len(),
        hypothesis_max,
        chain,
        endpoint_error,
        seam_error,
        path_defect,
        u,
        v,
        w,
        s: s_full,
        d: d_full,
        o: o_full,
        times,
        u_path,
    })
}

// ---------------------------------------------------------------------------
// Seeded instance generation (used by the CLI and the test suites).
// ---------------------------------------------------------------------------

fn rand_f64(rng: &mut TinyRng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn rand_cmat(n: usize, rng: &mut TinyRng) -> CMat {
    CMat::from_fn(n, n, |_, _| C64::new(rand_f64(rng) * 2.0 - 1.0, rand_f64(rng) * 2.0 - 1.0))
}

fn rand_unitary(n: usize, rng: &mut TinyRng) -> CMat {
    rand_cmat(n, rng).qr().q()
}

fn exp_i_hermitian(h: &CMat, scale: f64) -> CMat {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut d = CMat::zeros(n, n);
    for r in 0..n {
        d[(r, r)] = C64::from_polar(1.0, scale * eig.eigenvalues[r]);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// A seeded pair of same-spectrum evaluations satisfying the detector
/// hypothesis by construction: the two unitaries differ by an element of
/// the exact commutant of the diagonal model composed with an
/// `eps_prime/5`-small rotation.  Interior points land on the `eta`-grid so
/// that a spectrum-free window always exists in every cell.
pub fn sample_instance(
    p: &Presentation,
    bundle: &ConstantBundle,
    rng: &mut TinyRng,
) -> Result<(MatrixHom, MatrixHom)> {
    let n = bundle.n;
    let grid = 2 * bundle.m * n;
    let mut theta_mult = vec![0u64; p.p()];
    let mut interior: Vec<(usize, Q)> = Vec::new();
    let mut remaining = n;
    let mut guard = 0;
    while remaining > 0 {
        guard += 1;
        if guard > 10_000 {
            return Err(Error::internal("could not fill the spectrum to the target size"));
        }
        if p.l() > 0 && rng.below(3) > 0 {
            let i = rng.below(p.l() as u64) as usize;
            if p.dims()[i] <= remaining {
                let g = 1 + rng.below(grid - 1);
                // Repeat an existing point now and then: repeated points
                // enlarge the exact commutant and exercise the mixing.
                let x = if !interior.is_empty() && rng.below(2) == 0 {
                    interior[rng.below(interior.len() as u64) as usize].1.clone()
                } else {
                    q(g as i64, grid as i64)
                };
                interior.push((i, x));
                remaining -= p.dims()[i];
                continue;
            }
        }
        let j = rng.below(p.p() as u64) as usize;
        if p.k()[j] <= remaining {
            theta_mult[j] += 1;
            remaining -= p.k()[j];
        }
    }
    let spectrum = FiniteSpectrum::canonical(p, theta_mult, interior, 0)?;

    let nn = n as usize;
    let u = rand_unitary(nn, rng);

    // The exact commutant of the diagonal model: equal slots (vertex copies,
    // repeated interior points) may be mixed, but only fiberwise — a scalar
    // unitary tensored with the identity of the common fiber size.
    let mut slot_runs: Vec<(usize, usize, usize)> = Vec::new(); // (off, size, copies)
    let mut off = 0usize;
    for (j, &mult) in spectrum.theta_mult.iter().enumerate() {
        let size = p.k()[j] as usize;
        if mult > 0 {
            slot_runs.push((off, size, mult as usize));
            off += size * mult as usize;
        }
    }
    let mut idx = 0usize;
    while idx < spectrum.interior.len() {
        let (i, x) = &spectrum.interior[idx];
        let size = p.dims()[*i] as usize;
        let mut end = idx + 1;
        while end < spectrum.interior.len() && spectrum.interior[end] == (*i, x.clone()) {
            end += 1;
        }
        slot_runs.push((off, size, end - idx));
        off += size * (end - idx);
        idx = end;
    }
    let mut c_mat = CMat::zeros(nn, nn);
    for (run_off, size, copies) in slot_runs {
        let mix = if copies == 1 {
            let phase = C64::from_polar(1.0, rand_f64(rng) * std::f64::consts::TAU);
            CMat::from_element(1, 1, phase)
        } else {
            rand_unitary(copies, rng)
        };
        let block = mix.kronecker(&identity(size));
        copy_block(&mut c_mat, &block, run_off, run_off, 0, 0, copies * size, copies * size);
    }

    let raw = rand_cmat(nn, rng);
    let herm = (&raw + raw.adjoint()).map(|z| z * C64::new(0.5, 0.0));
    let norm = op_norm(&herm).max(1e-9);
    let delta = qf(&bundle.eps_prime) / 5.0;
    let rot = exp_i_hermitian(&herm, delta / norm);

    let v = &c_mat * rot * &u;
    Ok((
        MatrixHom { spectrum: spectrum.clone(), unitary: u },
        MatrixHom { spectrum, unitary: v },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::canonical_profile;
    use crate::perturb::choose_constants;
    use crate::pl::PlFunc;
    use crate::testfn::{enumerate_family, lift_to_matrix_units, EnumBudget};
    use num_traits::One;

    fn line() -> Presentation {
        Presentation::new(vec![1, 1], vec![1], vec![vec![1, 0]], vec![vec![0, 1]], true).unwrap()
    }

    fn identity_profile() -> ProfileElement {
        ProfileElement {
            theta_eigs: vec![vec![Q::zero()], vec![Q::one()]],
            branches: vec![vec![PlFunc::identity(Q::zero(), Q::one())]],
        }
    }

    fn detector_set(p: &Presentation, bundle: &ConstantBundle, tagged: bool) -> Vec<TestFunction> {
        let mesh = 2 * bundle.m * bundle.n;
        let budget = EnumBudget { max_total: 24, max_type2_runs: 1 };
        let mut hs = enumerate_family(p, mesh, budget).unwrap().functions;
        if tagged {
            let extra: Vec<TestFunction> = hs
                .iter()
                .take(2)
                .flat_map(|h| lift_to_matrix_units(p, h).unwrap())
                .collect();
            hs.extend(extra);
        }
        hs
    }

    #[test]
    fn equal_evaluations_produce_a_flat_path() {
        let p = line();
        let f = identity_profile();
        let bundle = choose_constants(&p, 2, &q(1, 2), &[f.clone()]).unwrap();
        assert_eq!(bundle.m, 8);
        let mut rng = TinyRng(7);
        let u = rand_unitary(2, &mut rng);
        let spectrum = FiniteSpectrum::canonical(
            &p,
            vec![1, 0],
            vec![(0, q(5, 32))],
            0,
        )
        .unwrap();
        let phi = MatrixHom { spectrum: spectrum.clone(), unitary: u.clone() };
        let psi = MatrixHom { spectrum, unitary: u };
        let hs = detector_set(&p, &bundle, false);
        let trace = unitary_bridge(&p, &phi, &psi, &hs, &[f], &bundle).unwrap();
        assert_eq!(trace.n, 2);
        assert!(trace.hypothesis_max < 1e-12);
        assert!(trace.path_defect < 1e-8, "defect {}", trace.path_defect);
        assert!(trace.endpoint_error < 1e-10);
        assert_eq!(trace.chain.len(), 6);
        assert_eq!(trace.times.len(), 32);
        assert_eq!(trace.u_path.len(), 32);
    }

    #[test]
    fn sampled_conjugate_pairs_pass() {
        let p = line();
        let f = identity_profile();
        let bundle = choose_constants(&p, 4, &q(1, 2), &[f.clone()]).unwrap();
        let hs = detector_set(&p, &bundle, true);
        for seed in [3u64, 11, 42] {
            let mut rng = TinyRng(seed);
            let (phi, psi) = sample_instance(&p, &bundle, &mut rng).unwrap();
            let trace = unitary_bridge(&p, &phi, &psi, &hs, &[f.clone()], &bundle).unwrap();
            assert!(
                trace.hypothesis_max < qf(&bundle.eps_prime),
                "seed {seed}: hypothesis margin"
            );
            assert!(trace.path_defect < qf(&bundle.eps), "seed {seed}: path defect");
            assert!(trace.endpoint_error < 1e-8, "seed {seed}: endpoints");
            for entry in &trace.chain {
                assert!(entry.measured < entry.allowed, "seed {seed}: {}", entry.label);
            }
        }
    }

    #[test]
    fn collar_points_group_with_their_vertex() {
        let p = line();
        let f = identity_profile();
        let bundle = choose_constants(&p, 4, &q(1, 2), &[f.clone()]).unwrap();
        let eta = &bundle.eta;
        // theta_0 twice, one point in the left collar (first eta-step), one
        // interior point snapped to a middle cell: two groups in total.
        let spectrum = FiniteSpectrum::canonical(
            &p,
            vec![2, 0],
            vec![(0, eta.clone()), (0, q(1, 2))],
            0,
        )
        .unwrap();
        let mut rng = TinyRng(5);
        let u = rand_unitary(4, &mut rng);
        // Mix the two equal vertex copies (coordinates 0 and 1) and spin
        // the interior slots by phases: an exact-commutant unitary.
        let mut c_mat = CMat::zeros(4, 4);
        let mix = rand_unitary(2, &mut rng);
        copy_block(&mut c_mat, &mix, 0, 0, 0, 0, 2, 2);
        c_mat[(2, 2)] = C64::from_polar(1.0, 0.9);
        c_mat[(3, 3)] = C64::from_polar(1.0, 2.1);
        let v = &c_mat * &u;
        let phi = MatrixHom { spectrum: spectrum.clone(), unitary: u };
        let psi = MatrixHom { spectrum, unitary: v };
        let hs = detector_set(&p, &bundle, false);
        let trace = unitary_bridge(&p, &phi, &psi, &hs, &[f], &bundle).unwrap();
        assert_eq!(trace.n_groups, 2);
        assert!(trace.path_defect < qf(&bundle.eps));
    }

    #[test]
    fn guard_rejects_oversized_tolerance() {
        let p = line();
        let f = identity_profile();
        let mut bundle = choose_constants(&p, 2, &q(1, 2), &[f.clone()]).unwrap();
        bundle.eps_prime = Q::one();
        let mut rng = TinyRng(1);
        let u = rand_unitary(2, &mut rng);
        let spectrum =
            FiniteSpectrum::canonical(&p, vec![1, 0], vec![(0, q(5, 32))], 0).unwrap();
        let phi = MatrixHom { spectrum: spectrum.clone(), unitary: u.clone() };
        let psi = MatrixHom { spectrum, unitary: u };
        let err = unitary_bridge(&p, &phi, &psi, &[], &[f], &bundle).unwrap_err();
        assert!(err.to_string().contains("singular"));
    }

    #[test]
    fn hypothesis_violations_name_the_detector() {
        let p = line();
        let f = identity_profile();
        let bundle = choose_constants(&p, 2, &q(1, 2), &[f.clone()]).unwrap();
        // Two distinct interior points; swap them with an off-diagonal
        // unitary.  A tent detector over only one of them sees the swap.
        let spectrum = FiniteSpectrum::canonical(
            &p,
            vec![0, 0],
            vec![(0, q(8, 32)), (0, q(16, 32))],
            0,
        )
        .unwrap();
        let u = identity(2);
        let mut swap = CMat::zeros(2, 2);
        swap[(0, 1)] = C64::new(1.0, 0.0);
        swap[(1, 0)] = C64::new(1.0, 0.0);
        let phi = MatrixHom { spectrum: spectrum.clone(), unitary: u };
        let psi = MatrixHom { spectrum, unitary: swap };
        let tent = crate::testfn::make_type2(&p, 32, 0, vec![(8, 8)]).unwrap();
        let err = unitary_bridge(&p, &phi, &psi, &[tent], &[f], &bundle).unwrap_err();
        assert!(err.to_string().contains("hypothesis fails on detector 0"));
    }

    #[test]
    fn bridge_requires_matching_spectra() {
        let p = line();
        let f = identity_profile();
        let bundle = choose_constants(&p, 2, &q(1, 2), &[f.clone()]).unwrap();
        let s1 = FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(8, 32)), (0, q(16, 32))], 0).unwrap();
        let s2 = FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(8, 32)), (0, q(24, 32))], 0).unwrap();
        let u = identity(2);
        let phi = MatrixHom { spectrum: s1, unitary: u.clone() };
        let psi = MatrixHom { spectrum: s2, unitary: u };
        let err = unitary_bridge(&p, &phi, &psi, &[], &[f], &bundle).unwrap_err();
        assert!(err.to_string().contains("agree"));
    }

    #[test]
    fn richer_presentations_bridge_too() {
        // Two vertices of size 1 and 2 glued to a 3-dimensional fiber:
        // exercises multi-chunk boundary splitting at n = 6.
        let p = Presentation::new(
            vec![1, 2],
            vec![3],
            vec![vec![1, 1]],
            vec![vec![3, 0]],
            true,
        )
        .unwrap();
        let f = canonical_profile(&p, 1);
        let bundle = choose_constants(&p, 6, &q(1, 2), &[f.clone()]).unwrap();
        let hs = detector_set(&p, &bundle, true);
        let mut rng = TinyRng(23);
        let (phi, psi) = sample_instance(&p, &bundle, &mut rng).unwrap();
        let trace = unitary_bridge(&p, &phi, &psi, &hs, &[f], &bundle).unwrap();
        assert!(trace.path_defect < qf(&bundle.eps));
        assert!(trace.endpoint_error < 1e-8);
    }
}
