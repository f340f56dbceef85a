//! Command-line dispatch: route arguments to library operations, print a
//! JSON report on stdout and a one-line summary on stderr.
//!
//! Exit codes: 0 success, 1 invalid input, 2 malformed data or usage,
//! 3 internal assertion failure.  Randomized commands take an explicit
//! `--seed` and embed it in their reports, so every run is reproducible.
//! The `ETALG_MAX_BUDGET` environment variable caps the size of enumerated
//! detector families.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::bridge::{sample_instance, unitary_bridge};
use crate::discretize::{discretize, grid_size};
use crate::error::{Error, Result};
use crate::pattern::{
    canonical_profile, pair_spectra, FiniteSpectrum, PatternHom, ProfileElement, TinyRng,
};
use crate::perturb::choose_constants;
use crate::pl::PlFunc;
use crate::presentation::{samples, Presentation};
use crate::rational::{q, q_from_str, q_to_f64, q_to_string, Q};
use crate::restrict::restrict_algebra;
use crate::rewrite::rewrite_chain;
use crate::schema::{
    certificate_to_json, chain_from_json, ktheory_to_json, pattern_from_json, pattern_to_json,
    plfunc_to_json, presentation_from_json, presentation_to_json, spectrum_point_to_json,
    testfn_from_json,
};
use crate::spectrum::{ClosedSubset, Piece, RawSubset};
use crate::testfn::{enumerate_family, lift_to_matrix_units, EnumBudget};

#[derive(Parser)]
#[command(
    name = "etalg",
    version,
    about = "Exact toolkit for glued interval algebras",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a presentation and summarize its structure.
    Inspect {
        /// Presentation file (presentation/v1).
        file: PathBuf,
        /// Print the gluing graph in DOT format instead of a JSON report.
        #[arg(long)]
        dot: bool,
    },
    /// Compute the K-groups of a presentation.
    Ktheory {
        /// Presentation file (presentation/v1).
        file: PathBuf,
    },
    /// Split a presentation into its minimal direct summands.
    Decompose {
        /// Presentation file (presentation/v1).
        file: PathBuf,
    },
    /// Present the restriction of an algebra to a closed spectral subset.
    Restrict {
        /// Presentation file (presentation/v1).
        presentation: PathBuf,
        /// Closed subset file (closedset/v1).
        set: PathBuf,
    },
    /// Collapse a closed subset onto one with finitely many pieces.
    Discretize {
        /// Presentation file (presentation/v1).
        presentation: PathBuf,
        /// Closed subset file (closedset/v1).
        set: PathBuf,
        /// Collapse fineness, a positive rational like 1/10.
        #[arg(long)]
        delta: String,
    },
    /// Match the interior points of two finite spectra at mesh 1/m.
    Pair {
        /// Presentation file (presentation/v1).
        presentation: PathBuf,
        /// First finite spectrum file.
        first: PathBuf,
        /// Second finite spectrum file.
        second: PathBuf,
        /// Mesh denominator m; points must pair within 2/m.
        #[arg(long)]
        mesh: u64,
    },
    /// Check whether a pattern's image covers its whole source spectrum.
    CheckInjective {
        /// Pattern file (pattern/v1).
        pattern: PathBuf,
    },
    /// Sample a conjugate pair of matrix evaluations and connect them by a
    /// short unitary path, reporting the measured bound chain.
    Bridge {
        /// Matrix size (at most 8).
        #[arg(long)]
        n: u64,
        /// Seed for the sampled instance.
        #[arg(long)]
        seed: u64,
        /// Target tolerance, a positive rational like 1/10.
        #[arg(long)]
        eps: String,
    },
    /// Rewrite a chain of maps into an injective one and emit the
    /// certificate.
    RewriteChain {
        /// Chain file (chain/v1).
        #[arg(long)]
        chain: PathBuf,
        /// Also write the certificate to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the deterministic property suites.
    Selftest {
        /// Seed for the randomized suites.
        #[arg(long)]
        seed: u64,
    },
}

/// Parse the process arguments, dispatch, and return the exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::schema(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::schema(format!("{}: {e}", path.display())))
}

fn read_presentation(path: &Path) -> Result<Presentation> {
    presentation_from_json(&read_json(path)?)
}

fn emit(report: &Value, summary: &str) {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    eprintln!("{summary}");
}

/// Enumeration cap: the default, lowered by `ETALG_MAX_BUDGET` when set.
fn enum_cap(default_total: usize) -> usize {
    match std::env::var("ETALG_MAX_BUDGET").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(cap) => default_total.min(cap.max(1)),
        None => default_total,
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Inspect { file, dot } => cmd_inspect(&file, dot),
        Cmd::Ktheory { file } => cmd_ktheory(&file),
        Cmd::Decompose { file } => cmd_decompose(&file),
        Cmd::Restrict { presentation, set } => cmd_restrict(&presentation, &set),
        Cmd::Discretize { presentation, set, delta } => {
            cmd_discretize(&presentation, &set, &delta)
        }
        Cmd::Pair { presentation, first, second, mesh } => {
            cmd_pair(&presentation, &first, &second, mesh)
        }
        Cmd::CheckInjective { pattern } => cmd_check_injective(&pattern),
        Cmd::Bridge { n, seed, eps } => cmd_bridge(n, seed, &eps),
        Cmd::RewriteChain { chain, out } => cmd_rewrite_chain(&chain, out.as_deref()),
        Cmd::Selftest { seed } => cmd_selftest(seed),
    }
}

// ---------------------------------------------------------------------------
// Structure commands
// ---------------------------------------------------------------------------

fn cmd_inspect(file: &Path, dot: bool) -> Result<()> {
    let p = read_presentation(file)?;
    if dot {
        print!("{}", p.gluing_graph_dot());
        eprintln!("gluing graph with {} vertex and {} interval nodes", p.p(), p.l());
        return Ok(());
    }
    let report = p.validate();
    let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    let summands = if report.ok { p.decompose_minimal()?.len() } else { 0 };
    let value = json!({
        "ok": report.ok,
        "violations": violations,
        "vertex_blocks": p.k(),
        "interval_blocks": p.dims(),
        "unital": p.unital(),
        "minimal_summands": if report.ok { json!(summands) } else { Value::Null },
    });
    if report.ok {
        emit(
            &value,
            &format!(
                "valid presentation: {} vertex blocks, {} interval blocks, {} minimal summands",
                p.p(),
                p.l(),
                summands
            ),
        );
        Ok(())
    } else {
        emit(&value, "presentation is not valid");
        let n = violations.len();
        Err(Error::invalid(if n == 1 {
            "1 structural violation".to_string()
        } else {
            format!("{n} structural violations")
        }))
    }
}

fn cmd_ktheory(file: &Path) -> Result<()> {
    let p = read_presentation(file)?;
    let kt = p.k_theory()?;
    let torsion = kt.k1_invariant_factors.iter().filter(|f| !f.is_zero()).count();
    let free = kt.k1_invariant_factors.len() - torsion;
    emit(
        &ktheory_to_json(&kt),
        &format!(
            "K0 has rank {}; K1 has {} torsion and {} free generators",
            kt.k0_rank, torsion, free
        ),
    );
    Ok(())
}

fn cmd_decompose(file: &Path) -> Result<()> {
    let p = read_presentation(file)?;
    let parts = p.decompose_minimal()?;
    let value = json!({
        "components": parts
            .iter()
            .map(|c| {
                json!({
                    "presentation": presentation_to_json(&c.presentation),
                    "point_blocks": c.point_blocks,
                    "interval_blocks": c.interval_blocks,
                })
            })
            .collect::<Vec<_>>(),
    });
    emit(&value, &format!("{} minimal direct summands", parts.len()));
    Ok(())
}

fn cmd_restrict(presentation: &Path, set: &Path) -> Result<()> {
    let p = read_presentation(presentation)?;
    let z = ClosedSubset::from_json(&p, &read_json(set)?)?;
    let r = restrict_algebra(&p, &z)?;
    let value = json!({
        "algebra": presentation_to_json(&r.algebra),
        "vertex_points": r.vertex_points.iter().map(spectrum_point_to_json).collect::<Vec<_>>(),
        "interval_maps": r
            .interval_maps
            .iter()
            .map(|(block, f)| json!({ "block": block, "map": plfunc_to_json(f) }))
            .collect::<Vec<_>>(),
        "inclusion": pattern_to_json(&r.inclusion),
    });
    emit(
        &value,
        &format!(
            "restriction has {} vertex and {} interval blocks",
            r.algebra.p(),
            r.algebra.l()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Spectral commands
// ---------------------------------------------------------------------------

fn cmd_discretize(presentation: &Path, set: &Path, delta: &str) -> Result<()> {
    let p = read_presentation(presentation)?;
    let y = ClosedSubset::from_json(&p, &read_json(set)?)?;
    let delta = q_from_str(delta)?;
    let (z, rho) = discretize(&p, &y, &delta)?;
    let pieces: usize = (0..p.l()).map(|i| z.block_trace(i).len()).sum();
    let value = json!({
        "delta": q_to_string(&delta),
        "grid": grid_size(&delta)?,
        "set": z.to_json(),
        "collapse": rho.to_json(),
    });
    emit(&value, &format!("collapsed onto {pieces} interval pieces"));
    Ok(())
}

fn cmd_pair(presentation: &Path, first: &Path, second: &Path, mesh: u64) -> Result<()> {
    let p = read_presentation(presentation)?;
    let a = FiniteSpectrum::from_json(&p, &read_json(first)?)?;
    let b = FiniteSpectrum::from_json(&p, &read_json(second)?)?;
    let r = pair_spectra(&p, &a, &b, mesh)?;
    let q_list = |xs: &[Q]| xs.iter().map(q_to_string).collect::<Vec<_>>();
    let value = json!({
        "mesh": mesh,
        "success": r.success,
        "max_gap": q_to_string(&r.max_gap),
        "blocks": r
            .per_block
            .iter()
            .map(|bp| {
                json!({
                    "matched": bp
                        .matched
                        .iter()
                        .map(|(x, y)| json!([q_to_string(x), q_to_string(y)]))
                        .collect::<Vec<_>>(),
                    "left_over_first": q_list(&bp.left_over_first),
                    "right_over_first": q_list(&bp.right_over_first),
                    "left_over_second": q_list(&bp.left_over_second),
                    "right_over_second": q_list(&bp.right_over_second),
                    "max_gap": q_to_string(&bp.max_gap),
                })
            })
            .collect::<Vec<_>>(),
    });
    let summary = if r.success {
        format!("paired within 2/{mesh}; largest gap {}", q_to_string(&r.max_gap))
    } else {
        format!("pairing exceeds 2/{mesh}; largest gap {}", q_to_string(&r.max_gap))
    };
    emit(&value, &summary);
    Ok(())
}

fn cmd_check_injective(pattern: &Path) -> Result<()> {
    let phi = pattern_from_json(&read_json(pattern)?)?;
    let report = phi.validate();
    if !report.ok {
        let value = json!({
            "valid": false,
            "violations": report.violations,
            "injective": Value::Null,
        });
        emit(&value, "pattern is not a homomorphism model");
        let n = report.violations.len();
        return Err(Error::invalid(if n == 1 {
            "1 pattern violation".to_string()
        } else {
            format!("{n} pattern violations")
        }));
    }
    let inj = phi.is_injective()?;
    let value = json!({
        "valid": true,
        "violations": [],
        "injective": inj.injective,
        "missed": inj.missed.as_ref().map(spectrum_point_to_json),
    });
    let summary = match &inj.missed {
        None => "pattern is injective: the image covers the source spectrum".to_string(),
        Some(x) => format!(
            "pattern is not injective: {} is missed",
            serde_json::to_string(&spectrum_point_to_json(x)).expect("point serializes")
        ),
    };
    emit(&value, &summary);
    Ok(())
}

// ---------------------------------------------------------------------------
// Numerical bridge
// ---------------------------------------------------------------------------

fn line_identity_profile() -> ProfileElement {
    ProfileElement {
        theta_eigs: vec![vec![Q::zero()], vec![q(1, 1)]],
        branches: vec![vec![PlFunc::identity(Q::zero(), q(1, 1))]],
    }
}

fn cmd_bridge(n: u64, seed: u64, eps: &str) -> Result<()> {
    let eps = q_from_str(eps)?;
    let p = samples::unit_interval();
    let f = line_identity_profile();
    let bundle = choose_constants(&p, n, &eps, &[f.clone()])?;
    let mesh = 2 * bundle.m * bundle.n;
    let budget = EnumBudget { max_total: enum_cap(24), max_type2_runs: 1 };
    let mut detectors = enumerate_family(&p, mesh, budget)?.functions;
    let tagged: Vec<_> = detectors
        .iter()
        .take(2)
        .flat_map(|h| lift_to_matrix_units(&p, h).expect("untagged function lifts"))
        .collect();
    detectors.extend(tagged);
    let mut rng = TinyRng(seed);
    let (phi, psi) = sample_instance(&p, &bundle, &mut rng)?;
    let trace = unitary_bridge(&p, &phi, &psi, &detectors, &[f], &bundle)?;
    let chain_ok = trace.chain.iter().all(|e| e.measured < e.allowed);
    let ok = chain_ok
        && trace.endpoint_error < 1e-8
        && trace.path_defect < q_to_f64(&bundle.eps);
    let value = json!({
        "seed": seed,
        "n": n,
        "eps": q_to_string(&eps),
        "detectors": detectors.len(),
        "groups": trace.n_groups,
        "hypothesis_max": trace.hypothesis_max,
        "endpoint_error": trace.endpoint_error,
        "seam_error": trace.seam_error,
        "path_defect": trace.path_defect,
        "chain": trace
            .chain
            .iter()
            .map(|e| json!({ "label": e.label, "measured": e.measured, "allowed": e.allowed }))
            .collect::<Vec<_>>(),
        "ok": ok,
    });
    emit(
        &value,
        &format!(
            "bridged a sampled conjugate pair at n = {n}: path defect {:.3e} against {}",
            trace.path_defect,
            q_to_string(&bundle.eps)
        ),
    );
    if ok {
        Ok(())
    } else {
        Err(Error::internal("a measured bridge bound exceeded its allowance"))
    }
}

// ---------------------------------------------------------------------------
// Chain rewriting
// ---------------------------------------------------------------------------

fn cmd_rewrite_chain(chain: &Path, out: Option<&Path>) -> Result<()> {
    let spec = chain_from_json(&read_json(chain)?)?;
    let cert = rewrite_chain(&spec)?;
    let value = certificate_to_json(&cert);
    if let Some(path) = out {
        let pretty = serde_json::to_string_pretty(&value).expect("certificate serializes");
        fs::write(path, pretty + "\n")
            .map_err(|e| Error::schema(format!("cannot write {}: {e}", path.display())))?;
    }
    let worst = cert
        .reports
        .iter()
        .flat_map(|r| r.step.commutation.iter())
        .max()
        .cloned()
        .unwrap_or_else(Q::zero);
    emit(
        &value,
        &format!(
            "rewrote {} stages; every connecting map is injective; largest commutation defect {}",
            cert.new_stages.len(),
            q_to_string(&worst)
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Self-test
// ---------------------------------------------------------------------------

struct Suite {
    name: &'static str,
    cases: usize,
    ok: bool,
}

fn cmd_selftest(seed: u64) -> Result<()> {
    let suites = vec![
        suite_kernel_basis(seed),
        suite_subset_lattice(seed),
        suite_collapse_audit(seed),
        suite_pairing(seed),
        suite_restriction(seed),
        suite_detectors(),
        suite_chain_rewrite(),
    ];
    let all_ok = suites.iter().all(|s| s.ok);
    let value = json!({
        "seed": seed,
        "suites": suites
            .iter()
            .map(|s| json!({ "name": s.name, "cases": s.cases, "ok": s.ok }))
            .collect::<Vec<_>>(),
        "ok": all_ok,
    });
    let failed: Vec<&str> = suites.iter().filter(|s| !s.ok).map(|s| s.name).collect();
    if all_ok {
        emit(&value, &format!("all {} suites passed", suites.len()));
        Ok(())
    } else {
        emit(&value, "self-test failed");
        Err(Error::internal(format!("failing suites: {}", failed.join(", "))))
    }
}

/// Random small unital presentation; the first vertex block has size one so
/// gluing rows can always be topped up exactly.
fn random_presentation(rng: &mut TinyRng) -> Presentation {
    let p = 1 + rng.below(3) as usize;
    let l = rng.below(3) as usize;
    let mut k: Vec<u64> = (0..p).map(|_| 1 + rng.below(3)).collect();
    k[0] = 1;
    let mut dims = Vec::new();
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for _ in 0..l {
        let mut row_a = vec![0u64; p];
        for _ in 0..(1 + rng.below(3)) {
            row_a[rng.below(p as u64) as usize] += 1;
        }
        let d: u64 = row_a.iter().zip(&k).map(|(m, kj)| m * kj).sum();
        let mut row_b = vec![0u64; p];
        let mut left = d;
        while left > 0 {
            let j = rng.below(p as u64) as usize;
            if k[j] <= left && rng.below(3) > 0 {
                row_b[j] += 1;
                left -= k[j];
            } else if left >= k[0] {
                row_b[0] += 1;
                left -= k[0];
            }
        }
        dims.push(d);
        alpha.push(row_a);
        beta.push(row_b);
    }
    Presentation::new(k, dims, alpha, beta, true).expect("sampled shapes line up")
}

fn random_subset(p: &Presentation, rng: &mut TinyRng) -> ClosedSubset {
    loop {
        let mut thetas = std::collections::BTreeSet::new();
        for j in 0..p.p() {
            if rng.below(2) == 0 {
                thetas.insert(j);
            }
        }
        let denom = 24i64;
        let mut pieces = Vec::new();
        for _ in 0..p.l() {
            let mut cuts: Vec<i64> =
                (0..rng.below(5)).map(|_| rng.below(denom as u64 + 1) as i64).collect();
            cuts.sort();
            cuts.dedup();
            let mut list = Vec::new();
            for w in cuts.chunks(2) {
                match w {
                    [a, b] => list.push(Piece::new(q(*a, denom), q(*b, denom)).expect("sorted cuts")),
                    [a] => list.push(Piece::new(q(*a, denom), q(*a, denom)).expect("point piece")),
                    _ => {}
                }
            }
            pieces.push(list);
        }
        let z = ClosedSubset::closure(p, RawSubset { thetas, pieces }).expect("closure exists");
        if !z.is_empty() {
            return z;
        }
    }
}

/// Rank of a rational matrix by Gaussian elimination.
fn rank_q(rows: &[Vec<BigInt>]) -> usize {
    let mut m: Vec<Vec<Q>> = rows
        .iter()
        .map(|r| r.iter().map(|x| Q::from(x.clone())).collect())
        .collect();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let lead = m[rank][col].clone();
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let factor = &m[r][col] / &lead;
                for c in col..cols {
                    let sub = &factor * &m[rank][c];
                    m[r][c] = &m[r][c] - sub;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Every reported kernel-basis vector annihilates the gluing-difference
/// matrix exactly, and the rank matches an independent elimination.
fn suite_kernel_basis(seed: u64) -> Suite {
    let mut rng = TinyRng(seed ^ 0x6b65726e);
    let cases = 40;
    let mut ok = true;
    for _ in 0..cases {
        let p = random_presentation(&mut rng);
        let Ok(kt) = p.k_theory() else {
            ok = false;
            break;
        };
        let a = p.alpha_minus_beta();
        ok &= kt.k0_rank == p.p() - rank_q(&a);
        ok &= kt.k0_basis.len() == kt.k0_rank;
        for v in &kt.k0_basis {
            for row in &a {
                let dot: BigInt = row.iter().zip(v).map(|(r, x)| r * x).sum();
                ok &= dot.is_zero();
            }
        }
    }
    Suite { name: "kernel-basis", cases, ok }
}

/// Closure is idempotent and the subset lattice orders correctly.
fn suite_subset_lattice(seed: u64) -> Suite {
    let mut rng = TinyRng(seed ^ 0x6c617474);
    let cases = 40;
    let mut ok = true;
    for _ in 0..cases {
        let p = random_presentation(&mut rng);
        let x = random_subset(&p, &mut rng);
        let y = random_subset(&p, &mut rng);
        let again = ClosedSubset::closure(
            &p,
            RawSubset { thetas: x.thetas().clone(), pieces: x.pieces().to_vec() },
        );
        ok &= again.map(|z| z == x).unwrap_or(false);
        let (Ok(u), Ok(i)) = (x.union(&p, &y), x.intersection(&p, &y)) else {
            ok = false;
            continue;
        };
        ok &= x.is_subset_of(&u) && y.is_subset_of(&u);
        ok &= i.is_subset_of(&x) && i.is_subset_of(&y);
    }
    Suite { name: "subset-lattice", cases, ok }
}

/// Discretization stays within its fineness, keeps edges monotone, and
/// leaves no degenerate end classes.
fn suite_collapse_audit(seed: u64) -> Suite {
    let mut rng = TinyRng(seed ^ 0x636f6c6c);
    let deltas = [q(1, 1), q(1, 3), q(1, 10)];
    let cases = 25 * deltas.len();
    let mut ok = true;
    for _ in 0..25 {
        let p = random_presentation(&mut rng);
        let y = random_subset(&p, &mut rng);
        for delta in &deltas {
            let Ok((z, rho)) = discretize(&p, &y, delta) else {
                ok = false;
                continue;
            };
            let Ok(idx) = z.index_sets(&p) else {
                ok = false;
                continue;
            };
            ok &= idx.lll.is_empty() && idx.lrr.is_empty();
            for block in &rho.edges {
                for f in block {
                    ok &= f.is_nondecreasing();
                    for (x, fx) in f.breakpoints() {
                        ok &= (fx - x).abs() < *delta;
                    }
                }
            }
        }
    }
    Suite { name: "collapse-audit", cases, ok }
}

/// Jittered point clouds pair up within twice the mesh.
fn suite_pairing(seed: u64) -> Suite {
    let mut rng = TinyRng(seed ^ 0x70616972);
    let p = samples::unit_interval();
    let cases = 30;
    let m = 8;
    let two_eta = q(2, m);
    let mut ok = true;
    for _ in 0..cases {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in 0..3 {
            let c = 1 + rng.below(m as u64 - 1) as i64;
            let jitter = rng.below(5) as i64 - 2;
            first.push((0usize, q(c, m)));
            second.push((0usize, q(c * 4 + jitter, 4 * m)));
        }
        let a = FiniteSpectrum::canonical(&p, vec![0, 0], first, 0).expect("interior points");
        let b = FiniteSpectrum::canonical(&p, vec![0, 0], second, 0).expect("interior points");
        match pair_spectra(&p, &a, &b, m as u64) {
            Ok(r) => ok &= r.success && r.max_gap <= two_eta,
            Err(_) => ok = false,
        }
    }
    Suite { name: "pairing", cases, ok }
}

/// Restriction always yields a valid model and a valid inclusion pattern.
fn suite_restriction(seed: u64) -> Suite {
    let mut rng = TinyRng(seed ^ 0x72657374);
    let cases = 25;
    let mut ok = true;
    for _ in 0..cases {
        let p = random_presentation(&mut rng);
        let z = random_subset(&p, &mut rng);
        match restrict_algebra(&p, &z) {
            Ok(r) => {
                ok &= r.algebra.validate().ok;
                ok &= r.inclusion.validate().ok;
            }
            Err(_) => ok = false,
        }
    }
    Suite { name: "restriction", cases, ok }
}

/// The enumerated detector family round-trips through its JSON form.
fn suite_detectors() -> Suite {
    let p = samples::dimension_drop();
    let budget = EnumBudget { max_total: enum_cap(24), max_type2_runs: 2 };
    let Ok(family) = enumerate_family(&p, 8, budget) else {
        return Suite { name: "detectors", cases: 0, ok: false };
    };
    let cases = family.functions.len();
    let ok = !family.functions.is_empty()
        && family.functions.iter().all(|h| {
            testfn_from_json(&p, &h.to_json()).map(|back| back == *h).unwrap_or(false)
        });
    Suite { name: "detectors", cases, ok }
}

/// The half-interval chain rewrites with zero defect and injective maps.
fn suite_chain_rewrite() -> Suite {
    let p = samples::unit_interval();
    let mut vs = std::collections::BTreeMap::new();
    vs.insert(0, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).expect("vertex spectrum"));
    vs.insert(
        1,
        FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(1, 2))], 0).expect("vertex spectrum"),
    );
    let pm = crate::pattern::PieceMap {
        tracks: vec![crate::pattern::Track::Pl {
            block: 0,
            f: PlFunc::affine(Q::zero(), Q::zero(), q(1, 1), q(1, 2)),
        }],
        pad: 0,
    };
    let Ok(half) = PatternHom::new(p.clone(), p.clone(), ClosedSubset::full(&p), vs, vec![vec![pm]])
    else {
        return Suite { name: "chain-rewrite", cases: 1, ok: false };
    };
    let spec = crate::rewrite::ChainSpec {
        stages: vec![p.clone(), p.clone()],
        maps: vec![half],
        dense_sets: vec![vec![canonical_profile(&p, 1)], vec![canonical_profile(&p, 1)]],
        eps_schedule: vec![q(1, 2), q(1, 4)],
    };
    let ok = match rewrite_chain(&spec) {
        Ok(cert) => {
            cert.reports.iter().all(|r| r.step.injectivity.injective)
                && cert
                    .reports
                    .iter()
                    .flat_map(|r| r.step.commutation.iter())
                    .all(|d| d.is_zero())
        }
        Err(_) => false,
    };
    Suite { name: "chain-rewrite", cases: 1, ok }
}
