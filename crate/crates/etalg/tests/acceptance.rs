//! Acceptance battery: eight end-to-end criteria, each printing one
//! pass/fail line.  Every tolerance and time budget is pinned here; exact
//! checks compare rationals and integers for equality, the numerical
//! criterion uses the float bounds stated inline.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use etalg::bridge::{sample_instance, unitary_bridge};
use etalg::discretize::{discretize, monotone_surjection};
use etalg::pattern::{
    pair_spectra, FiniteSpectrum, PatternHom, PieceMap, ProfileElement, TinyRng, Track,
};
use etalg::perturb::{choose_constants, coverage_check, spectral_paths, ConstantBundle};
use etalg::pl::PlFunc;
use etalg::presentation::{samples, Presentation};
use etalg::rational::{q, q_to_f64, Q};
use etalg::restrict::restrict_algebra;
use etalg::rewrite::{rewrite_chain, ChainSpec};
use etalg::spectrum::{ClosedSubset, Piece, RawSubset, SpectrumPoint};
use etalg::testfn::{enumerate_family, lift_to_matrix_units, EnumBudget};

/// Run one criterion, print its pass/fail line, and fail the test on error
/// or on a blown time budget.
fn criterion<F>(number: usize, name: &str, limit: Duration, run: F)
where
    F: FnOnce() -> Result<(), String>,
{
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let verdict = match &outcome {
        Ok(()) if elapsed <= limit => "pass".to_string(),
        Ok(()) => format!("fail [time {elapsed:.2?} over budget {limit:.2?}]"),
        Err(msg) => format!("fail [{msg}]"),
    };
    println!("criterion {number} ({name}): {verdict}");
    if let Err(msg) = outcome {
        panic!("criterion {number} ({name}): {msg}");
    }
    assert!(
        elapsed <= limit,
        "criterion {number} ({name}) took {elapsed:.2?}, budget {limit:.2?}"
    );
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Shared generators
// ---------------------------------------------------------------------------

/// Valid unital presentation with at most four blocks of each kind and all
/// gluing entries at most three.  Both gluing rows are sampled from the
/// full entry box; the right row is drawn among those with the matching
/// weighted sum (the left row itself always qualifies).
fn random_presentation(rng: &mut TinyRng) -> Presentation {
    loop {
        let p = 1 + rng.below(4) as usize;
        let l = rng.below(5) as usize;
        let k: Vec<u64> = (0..p).map(|_| 1 + rng.below(3)).collect();
        let mut rows: Vec<Vec<u64>> = vec![Vec::new()];
        for _ in 0..p {
            rows = rows
                .into_iter()
                .flat_map(|row| {
                    (0..=3u64).map(move |e| {
                        let mut r = row.clone();
                        r.push(e);
                        r
                    })
                })
                .collect();
        }
        let weight = |row: &[u64]| -> u64 { row.iter().zip(&k).map(|(e, kj)| e * kj).sum() };
        let mut dims = Vec::new();
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for _ in 0..l {
            let row_a = loop {
                let r = rows[rng.below(rows.len() as u64) as usize].clone();
                if r.iter().any(|&e| e > 0) {
                    break r;
                }
            };
            let d = weight(&row_a);
            let candidates: Vec<&Vec<u64>> = rows.iter().filter(|r| weight(r) == d).collect();
            let row_b = candidates[rng.below(candidates.len() as u64) as usize].clone();
            dims.push(d);
            alpha.push(row_a);
            beta.push(row_b);
        }
        let p = Presentation::new(k, dims, alpha, beta, true).expect("shapes line up");
        if p.validate().ok {
            return p;
        }
    }
}

fn random_subset(p: &Presentation, rng: &mut TinyRng) -> ClosedSubset {
    loop {
        let mut thetas = BTreeSet::new();
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
                    [a, b] => list.push(Piece::new(q(*a, denom), q(*b, denom)).expect("a < b")),
                    [a] => list.push(Piece::new(q(*a, denom), q(*a, denom)).expect("point")),
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

// ---------------------------------------------------------------------------
// Criterion 1: K-groups against a brute-force oracle
// ---------------------------------------------------------------------------

/// Insert `v` into an integer row-echelon basis, returning true when it
/// enlarges the span.  Fraction-free reduction; entries stay small.
fn echelon_insert(basis: &mut Vec<Vec<i128>>, mut v: Vec<i128>) -> bool {
    for row in basis.iter() {
        let lead = row.iter().position(|&x| x != 0).expect("rows are nonzero");
        if v[lead] != 0 {
            let (a, b) = (row[lead], v[lead]);
            for (x, y) in v.iter_mut().zip(row) {
                *x = *x * a - y * b;
            }
        }
    }
    if v.iter().all(|&x| x == 0) {
        return false;
    }
    let g = v.iter().fold(0i128, |acc, &x| num_integer::gcd(acc, x.abs()));
    for x in v.iter_mut() {
        *x /= g;
    }
    basis.push(v);
    basis.sort_by_key(|row| row.iter().position(|&x| x != 0));
    true
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        n => {
            let mut det = 0;
            for col in 0..n {
                if m[0][col] == 0 {
                    continue;
                }
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != col)
                            .map(|(_, &x)| x)
                            .collect()
                    })
                    .collect();
                let sign = if col % 2 == 0 { 1 } else { -1 };
                det += sign * m[0][col] * det_i128(&minor);
            }
            det
        }
    }
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    if r == 0 {
        return vec![Vec::new()];
    }
    if n < r {
        return Vec::new();
    }
    let mut out = Vec::new();
    for rest in combinations(n - 1, r - 1) {
        let mut c = rest.clone();
        c.push(n - 1);
        out.push(c);
    }
    out.extend(combinations(n - 1, r));
    out
}

/// Subgroup of `(Z/T)^l` generated by the columns, as an explicit element
/// set; `None` when it exceeds the cap.
fn column_subgroup(a: &[Vec<i64>], t: i64, cap: usize) -> Option<BTreeSet<Vec<i64>>> {
    let l = a.len();
    let p = a[0].len();
    let mut set = BTreeSet::new();
    set.insert(vec![0i64; l]);
    let mut frontier: Vec<Vec<i64>> = vec![vec![0i64; l]];
    let gens: Vec<Vec<i64>> = (0..p)
        .map(|j| (0..l).map(|i| a[i][j].rem_euclid(t)).collect())
        .collect();
    while let Some(x) = frontier.pop() {
        for g in &gens {
            let y: Vec<i64> =
                x.iter().zip(g).map(|(xi, gi)| (xi + gi).rem_euclid(t)).collect();
            if set.insert(y.clone()) {
                if set.len() > cap {
                    return None;
                }
                frontier.push(y);
            }
        }
    }
    Some(set)
}

fn check_ktheory_oracle(p: &Presentation) -> Result<(), String> {
    let kt = p.k_theory().map_err(|e| e.to_string())?;
    let a_big = p.alpha_minus_beta();
    let a: Vec<Vec<i64>> = a_big
        .iter()
        .map(|row| row.iter().map(|x| i64::try_from(x.clone()).expect("small entries")).collect())
        .collect();
    let cols = p.p();

    // Brute-force kernel rank over the coordinate box [-5, 5].
    let mut basis: Vec<Vec<i128>> = Vec::new();
    let mut v = vec![-5i64; cols];
    loop {
        if v.iter().any(|&x| x != 0)
            && a.iter().all(|row| row.iter().zip(&v).map(|(r, x)| r * x).sum::<i64>() == 0)
        {
            echelon_insert(&mut basis, v.iter().map(|&x| x as i128).collect());
        }
        let mut pos = 0;
        loop {
            if pos == cols {
                break;
            }
            v[pos] += 1;
            if v[pos] <= 5 {
                break;
            }
            v[pos] = -5;
            pos += 1;
        }
        if pos == cols {
            break;
        }
    }
    ensure(
        basis.len() == kt.k0_rank,
        format!("box kernel rank {} against reported rank {}", basis.len(), kt.k0_rank),
    )?;
    ensure(kt.k0_basis.len() == kt.k0_rank, "basis size differs from the rank")?;

    // Reported basis vectors annihilate the matrix exactly.
    for vb in &kt.k0_basis {
        for row in &a_big {
            let dot: BigInt = row.iter().zip(vb).map(|(r, x)| r * x).sum();
            ensure(dot.is_zero(), "a reported kernel vector misses the kernel")?;
        }
    }

    // Saturation: the top minors of the basis matrix are coprime.
    let r = kt.k0_rank;
    if r > 0 {
        let rows: Vec<Vec<i128>> = kt
            .k0_basis
            .iter()
            .map(|row| {
                row.iter().map(|x| i128::try_from(x.clone()).expect("small basis")).collect()
            })
            .collect();
        let mut g: i128 = 0;
        for cols_pick in combinations(cols, r) {
            let sq: Vec<Vec<i128>> =
                rows.iter().map(|row| cols_pick.iter().map(|&c| row[c]).collect()).collect();
            g = num_integer::gcd(g, det_i128(&sq).abs());
        }
        ensure(g == 1, format!("basis minors have gcd {g}, not saturated"))?;
    }

    // Cokernel shape: divisibility chain, free rank, and (when small) the
    // exact element orders modulo the torsion exponent.
    let rank = cols - kt.k0_rank;
    let zero_count = kt.k1_invariant_factors.iter().filter(|d| d.is_zero()).count();
    ensure(zero_count == p.l() - rank, "free cokernel rank differs from the rank defect")?;
    let torsion: Vec<i64> = kt
        .k1_invariant_factors
        .iter()
        .filter(|d| !d.is_zero())
        .map(|d| i64::try_from(d.clone()).expect("small factors"))
        .collect();
    ensure(torsion.iter().all(|&d| d > 1), "torsion factors must exceed one")?;
    for w in torsion.windows(2) {
        ensure(w[1] % w[0] == 0, "invariant factors out of divisibility order")?;
    }
    let t: i64 = torsion.iter().product();
    if t > 1 && t <= 1000 && p.l() > 0 {
        if let Some(h) = column_subgroup(&a, t, 4096) {
            let mut expected: i128 = 1;
            for _ in 0..rank {
                expected *= t as i128;
            }
            for &d in &torsion {
                expected /= d as i128;
            }
            ensure(
                h.len() as i128 == expected,
                format!("image subgroup mod {t} has size {}, expected {expected}", h.len()),
            )?;
            if zero_count == 0 {
                // Exponent check: the largest invariant factor is the least
                // common multiple of the generator orders in the quotient.
                let mut divisors: Vec<i64> = (1..=t).filter(|d| t % d == 0).collect();
                divisors.sort_unstable();
                let mut exponent = 1i64;
                for i in 0..p.l() {
                    let order = divisors
                        .iter()
                        .copied()
                        .find(|&d| {
                            let mut e = vec![0i64; p.l()];
                            e[i] = (d % t).rem_euclid(t);
                            h.contains(&e)
                        })
                        .expect("t * e_i always lands in the image");
                    exponent = num_integer::lcm(exponent, order);
                }
                let top = *torsion.last().expect("nonempty torsion");
                ensure(
                    exponent == top,
                    format!("quotient exponent {exponent} against largest factor {top}"),
                )?;
            }
        }
    }
    Ok(())
}

#[test]
fn acceptance_1_ktheory() {
    criterion(1, "K-groups against brute force", Duration::from_secs(10), || {
        let kt = samples::dimension_drop().k_theory().map_err(|e| e.to_string())?;
        ensure(kt.k0_rank == 1, "glued pair must have rank-one even part")?;
        ensure(
            kt.k0_basis == vec![vec![BigInt::one(), BigInt::one()]],
            "glued pair basis must be (1, 1)",
        )?;
        ensure(kt.k1_invariant_factors.is_empty(), "glued pair must have trivial odd part")?;

        let mut rng = TinyRng(0x6b30);
        for case in 0..500 {
            let p = random_presentation(&mut rng);
            check_ktheory_oracle(&p).map_err(|msg| format!("case {case}: {msg}"))?;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 2: restriction fiber-dimension audit
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_restriction() {
    criterion(2, "restriction fiber audit", Duration::from_secs(5), || {
        // Worked example: the glued pair restricted to a vertex plus a
        // right collar keeps the vertex and grows one stub of full size.
        let p = samples::dimension_drop();
        let z = ClosedSubset::closure(
            &p,
            RawSubset {
                thetas: [0usize].into_iter().collect(),
                pieces: vec![vec![Piece::new(q(1, 3), Q::one()).expect("collar piece")]],
            },
        )
        .expect("closure exists");
        let r = restrict_algebra(&p, &z).map_err(|e| e.to_string())?;
        ensure(r.algebra.alpha() == [vec![0, 1]], "collar example left gluing")?;
        ensure(r.algebra.beta() == [vec![2, 0]], "collar example right gluing")?;

        let mut rng = TinyRng(0x1e57);
        for case in 0..100 {
            let p = random_presentation(&mut rng);
            let z = random_subset(&p, &mut rng);
            let r = restrict_algebra(&p, &z)
                .map_err(|e| format!("case {case}: restriction failed: {e}"))?;
            for point in &r.vertex_points {
                let (da, db) = r.fiber_dims(&p, point).map_err(|e| e.to_string())?;
                ensure(da == db, format!("case {case}: vertex fiber {da} against {db}"))?;
            }
            for (pos, (src, map)) in r.interval_maps.iter().enumerate() {
                let (a, b) = map.range();
                for (endpoint, label) in [(&a, "left"), (&b, "right")] {
                    let point = SpectrumPoint::Interior { block: *src, t: (*endpoint).clone() };
                    let (da, db) = r.fiber_dims(&p, &point).map_err(|e| e.to_string())?;
                    ensure(da == db, format!("case {case}: {label} endpoint fiber"))?;
                }
                for _ in 0..10 {
                    let u = q(1 + rng.below(99) as i64, 100);
                    let t = &a + (&b - &a) * u;
                    let point = SpectrumPoint::Interior { block: *src, t };
                    let (da, db) = r.fiber_dims(&p, &point).map_err(|e| e.to_string())?;
                    ensure(da == db, format!("case {case}: interior fiber {da} against {db}"))?;
                    ensure(db == r.algebra.dims()[pos], format!("case {case}: fiber size"))?;
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 3: discretization audit
// ---------------------------------------------------------------------------

/// Normalize a batch of closed intervals into the canonical merged form.
fn merged_union(mut parts: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    parts.sort();
    let mut out: Vec<(Q, Q)> = Vec::new();
    for (lo, hi) in parts {
        match out.last_mut() {
            Some((_, last_hi)) if lo <= *last_hi => {
                if hi > *last_hi {
                    *last_hi = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

#[test]
fn acceptance_3_discretize() {
    criterion(3, "discretization audit", Duration::from_secs(5), || {
        let deltas = [q(1, 1), q(1, 3), q(1, 10)];
        let mut rng = TinyRng(0xd15c);
        for case in 0..200 {
            let p = random_presentation(&mut rng);
            let y = random_subset(&p, &mut rng);
            for delta in &deltas {
                let (z, rho) =
                    discretize(&p, &y, delta).map_err(|e| format!("case {case}: {e}"))?;
                ensure(z.thetas() == y.thetas(), format!("case {case}: vertex part moved"))?;
                let idx = z.index_sets(&p).map_err(|e| e.to_string())?;
                ensure(
                    idx.lll.is_empty() && idx.lrr.is_empty(),
                    format!("case {case}: degenerate end classes survive"),
                )?;
                for i in 0..p.l() {
                    let mut image: Vec<(Q, Q)> = Vec::new();
                    for f in &rho.edges[i] {
                        ensure(f.is_nondecreasing(), format!("case {case}: edge not monotone"))?;
                        for (x, fx) in f.breakpoints() {
                            ensure(
                                (fx - x).abs() < *delta,
                                format!("case {case}: breakpoint moved by {}", fx - x),
                            )?;
                        }
                        let (lo, hi) = f.range();
                        image.push((lo, hi));
                    }
                    for s in &rho.splits[i] {
                        image.push((s.lo.clone(), s.lo.clone()));
                        image.push((s.hi.clone(), s.hi.clone()));
                    }
                    for t in &rho.fixed[i] {
                        image.push((t.clone(), t.clone()));
                    }
                    let expected: Vec<(Q, Q)> =
                        z.block_trace(i).iter().map(|pc| (pc.lo.clone(), pc.hi.clone())).collect();
                    ensure(
                        merged_union(image) == expected,
                        format!("case {case}: collapse image differs from the emitted set"),
                    )?;
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 4: monotone surjections onto an interval
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_monotone_surjection() {
    criterion(4, "monotone surjection", Duration::from_secs(1), || {
        let mut rng = TinyRng(0x5u64);
        for case in 0..100 {
            let denom = 60i64;
            let n_comp = 1 + rng.below(3) as usize;
            let mut cuts = BTreeSet::new();
            while cuts.len() < 2 * n_comp {
                cuts.insert(rng.below(denom as u64 + 1) as i64);
            }
            let cuts: Vec<i64> = cuts.into_iter().collect();
            let comps: Vec<(Q, Q)> =
                cuts.chunks(2).map(|w| (q(w[0], denom), q(w[1], denom))).collect();
            let z_lo = q(rng.below(5) as i64, 10);
            let z_hi = &z_lo + q(1 + rng.below(5) as i64, 10);
            let f = monotone_surjection(&comps, &z_lo, &z_hi)
                .map_err(|e| format!("case {case}: {e}"))?;
            ensure(f.is_nondecreasing(), format!("case {case}: not monotone"))?;
            let first = &comps[0].0;
            let last = &comps[comps.len() - 1].1;
            ensure(
                f.eval(first).map_err(|e| e.to_string())? == z_lo,
                format!("case {case}: left endpoint misses the floor"),
            )?;
            ensure(
                f.eval(last).map_err(|e| e.to_string())? == z_hi,
                format!("case {case}: right endpoint misses the ceiling"),
            )?;
            let total: Q = comps.iter().map(|(a, b)| b - a).sum();
            let slope = (&z_hi - &z_lo) / total;
            for (idx, (a, b)) in comps.iter().enumerate() {
                let fa = f.eval(a).map_err(|e| e.to_string())?;
                let fb = f.eval(b).map_err(|e| e.to_string())?;
                ensure(
                    (&fb - &fa) == slope.clone() * (b - a),
                    format!("case {case}: component {idx} breaks the common slope"),
                )?;
                if idx + 1 < comps.len() {
                    let next = &comps[idx + 1].0;
                    let fn_next = f.eval(next).map_err(|e| e.to_string())?;
                    ensure(
                        fn_next == fb,
                        format!("case {case}: gap after component {idx} is not a plateau"),
                    )?;
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 5: spectrum pairing
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_pairing() {
    criterion(5, "spectrum pairing", Duration::from_secs(2), || {
        let p = samples::unit_interval();
        let mut rng = TinyRng(0xbeef);
        for case in 0..100 {
            let m = [6i64, 8, 12][rng.below(3) as usize];
            let two_eta = q(2, m);
            let npts = 1 + rng.below(4);
            let mut first = Vec::new();
            let mut second = Vec::new();
            for _ in 0..npts {
                let c = 2 + rng.below(m as u64 - 3) as i64;
                let off = rng.below(9) as i64 - 4;
                first.push((0usize, q(c, m)));
                second.push((0usize, q(4 * c + off, 4 * m)));
            }
            let a = FiniteSpectrum::canonical(&p, vec![0, 0], first, 0)
                .map_err(|e| e.to_string())?;
            let b = FiniteSpectrum::canonical(&p, vec![0, 0], second, 0)
                .map_err(|e| e.to_string())?;
            let r = pair_spectra(&p, &a, &b, m as u64).map_err(|e| e.to_string())?;
            ensure(r.success, format!("case {case}: constructed pairing failed"))?;
            ensure(
                r.max_gap <= two_eta,
                format!("case {case}: gap {} above twice the mesh", r.max_gap),
            )?;
        }
        for case in 0..20 {
            let m = 10i64;
            let c = 2 + rng.below(3) as i64;
            let g = 3 + rng.below(3) as i64;
            let a = FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(c, m))], 0)
                .map_err(|e| e.to_string())?;
            let b = FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(c + g, m))], 0)
                .map_err(|e| e.to_string())?;
            let r = pair_spectra(&p, &a, &b, m as u64).map_err(|e| e.to_string())?;
            ensure(!r.success, format!("adversarial case {case}: pairing claimed success"))?;
            ensure(
                r.max_gap == q(g, m),
                format!("adversarial case {case}: gap {} against forced {}", r.max_gap, q(g, m)),
            )?;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 6: path coverage around every spectral point
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_coverage() {
    criterion(6, "path coverage", Duration::from_secs(2), || {
        let p = samples::unit_interval();
        let mut rng = TinyRng(0xc0fe);
        for case in 0..100 {
            let m1 = [16u64, 20, 24][rng.below(3) as usize];
            let bundle = ConstantBundle {
                n: 2,
                eps: q(1, 2),
                m: 2,
                eta: q(1, 8),
                eps_prime: q(1, 5120),
                m1,
                eta1: q(1, m1 as i64),
            };
            let npts = 1 + rng.below(3);
            let mut anchors = BTreeSet::new();
            while anchors.len() < npts as usize {
                anchors.insert(3 + rng.below(m1 - 5) as i64);
            }
            let mut first = Vec::new();
            let mut second = Vec::new();
            for &c in &anchors {
                let off = rng.below(3) as i64 - 1;
                first.push((0usize, q(c, m1 as i64)));
                second.push((0usize, q(c + off, m1 as i64)));
            }
            let s_phi = FiniteSpectrum::canonical(&p, vec![0, 0], first, 0)
                .map_err(|e| e.to_string())?;
            let s_psi = FiniteSpectrum::canonical(&p, vec![0, 0], second, 0)
                .map_err(|e| e.to_string())?;
            let pairing = pair_spectra(&p, &s_phi, &s_psi, m1).map_err(|e| e.to_string())?;
            ensure(pairing.success, format!("case {case}: fine pairing failed"))?;
            let fam = spectral_paths(&p, &s_phi, &s_psi, &pairing, &bundle)
                .map_err(|e| format!("case {case}: {e}"))?;
            for (block, t) in s_phi.interior.iter().chain(s_psi.interior.iter()) {
                let y = SpectrumPoint::Interior { block: *block, t: t.clone() };
                let covered = coverage_check(&fam, &y).map_err(|e| e.to_string())?;
                ensure(covered, format!("case {case}: ball around {t} not covered"))?;
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 7: numerical unitary bridge
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_bridge() {
    criterion(7, "unitary bridge", Duration::from_secs(30), || {
        let p = samples::unit_interval();
        let f = ProfileElement {
            theta_eigs: vec![vec![Q::zero()], vec![Q::one()]],
            branches: vec![vec![PlFunc::identity(Q::zero(), Q::one())]],
        };
        let eps = q(1, 2);
        for n in [2u64, 4, 8] {
            let bundle =
                choose_constants(&p, n, &eps, std::slice::from_ref(&f)).map_err(|e| e.to_string())?;
            let mesh = 2 * bundle.m * bundle.n;
            let budget = EnumBudget { max_total: 24, max_type2_runs: 1 };
            let mut detectors =
                enumerate_family(&p, mesh, budget).map_err(|e| e.to_string())?.functions;
            let tagged: Vec<_> = detectors
                .iter()
                .take(2)
                .flat_map(|h| lift_to_matrix_units(&p, h).expect("untagged lifts"))
                .collect();
            detectors.extend(tagged);
            for seed in 1..=20u64 {
                let mut rng = TinyRng((n << 32) ^ seed);
                let (phi, psi) =
                    sample_instance(&p, &bundle, &mut rng).map_err(|e| e.to_string())?;
                let trace =
                    unitary_bridge(&p, &phi, &psi, &detectors, std::slice::from_ref(&f), &bundle)
                        .map_err(|e| format!("n = {n}, seed {seed}: {e}"))?;
                ensure(
                    trace.endpoint_error < 1e-8,
                    format!("n = {n}, seed {seed}: endpoint error {}", trace.endpoint_error),
                )?;
                ensure(
                    trace.path_defect < q_to_f64(&bundle.eps),
                    format!("n = {n}, seed {seed}: path defect {}", trace.path_defect),
                )?;
                for entry in &trace.chain {
                    ensure(
                        entry.measured < entry.allowed,
                        format!("n = {n}, seed {seed}: {} out of bounds", entry.label),
                    )?;
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------------------
// Criterion 8: end-to-end chain rewriting
// ---------------------------------------------------------------------------

fn line_identity_profile(p: &Presentation) -> ProfileElement {
    let f = ProfileElement {
        theta_eigs: vec![vec![Q::zero()], vec![Q::one()]],
        branches: vec![vec![PlFunc::identity(Q::zero(), Q::one())]],
    };
    f.validate(p).expect("identity profile is valid");
    f
}

fn line_tent_map(p: &Presentation, peak: Q) -> PatternHom {
    let tent = PlFunc::new(vec![
        (Q::zero(), Q::zero()),
        (peak, Q::one()),
        (Q::one(), Q::zero()),
    ])
    .expect("tent breakpoints");
    let mut vs = std::collections::BTreeMap::new();
    vs.insert(0, FiniteSpectrum::canonical(p, vec![1, 0], vec![], 0).expect("left end"));
    vs.insert(1, FiniteSpectrum::canonical(p, vec![1, 0], vec![], 0).expect("right end"));
    PatternHom::new(
        p.clone(),
        p.clone(),
        ClosedSubset::full(p),
        vs,
        vec![vec![PieceMap { tracks: vec![Track::Pl { block: 0, f: tent }], pad: 0 }]],
    )
    .expect("tent pattern")
}

#[test]
fn acceptance_8_rewrite() {
    criterion(8, "end-to-end rewrite", Duration::from_secs(60), || {
        // Half-interval chain: two stages joined by f(z) -> f(z/2).
        let p = samples::unit_interval();
        let mut vs = std::collections::BTreeMap::new();
        vs.insert(0, FiniteSpectrum::canonical(&p, vec![1, 0], vec![], 0).expect("left end"));
        vs.insert(
            1,
            FiniteSpectrum::canonical(&p, vec![0, 0], vec![(0, q(1, 2))], 0).expect("midpoint"),
        );
        let half = PatternHom::new(
            p.clone(),
            p.clone(),
            ClosedSubset::full(&p),
            vs,
            vec![vec![PieceMap {
                tracks: vec![Track::Pl {
                    block: 0,
                    f: PlFunc::affine(Q::zero(), Q::zero(), Q::one(), q(1, 2)),
                }],
                pad: 0,
            }]],
        )
        .expect("half map");
        let spec = ChainSpec {
            stages: vec![p.clone(), p.clone()],
            maps: vec![half],
            dense_sets: vec![vec![line_identity_profile(&p)], vec![line_identity_profile(&p)]],
            eps_schedule: vec![q(1, 2), q(1, 4)],
        };
        let cert = rewrite_chain(&spec).map_err(|e| e.to_string())?;
        let b1 = &cert.new_stages[0];
        ensure(
            b1.k() == [1, 1] && b1.dims() == [1] && b1.alpha() == [vec![1, 0]]
                && b1.beta() == [vec![0, 1]],
            "half-interval model must present continuous functions on an interval",
        )?;
        for psi in &cert.injective_maps {
            let inj = psi.is_injective().map_err(|e| e.to_string())?;
            ensure(inj.injective, "half-interval connecting map not injective")?;
        }
        for rep in &cert.reports {
            for d in &rep.step.commutation {
                ensure(d.is_zero(), format!("half-interval commutation defect {d} nonzero"))?;
            }
        }

        // Twenty random three-stage chains of tent maps.
        let mut rng = TinyRng(0x8e3a);
        for case in 0..20 {
            let peaks = [
                q(1 + rng.below(6) as i64, 8),
                q(1 + rng.below(6) as i64, 8),
            ];
            let maps = vec![
                line_tent_map(&p, peaks[0].clone()),
                line_tent_map(&p, peaks[1].clone()),
            ];
            let spec = ChainSpec {
                stages: vec![p.clone(), p.clone(), p.clone()],
                maps,
                dense_sets: vec![
                    vec![line_identity_profile(&p)],
                    vec![line_identity_profile(&p)],
                    vec![line_identity_profile(&p)],
                ],
                eps_schedule: ChainSpec::default_schedule(3),
            };
            let cert = rewrite_chain(&spec).map_err(|e| format!("case {case}: {e}"))?;
            for psi in &cert.injective_maps {
                let inj = psi.is_injective().map_err(|e| e.to_string())?;
                ensure(inj.injective, format!("case {case}: a connecting map is not injective"))?;
            }
            for rep in &cert.reports {
                for d in &rep.step.commutation {
                    ensure(
                        *d <= rep.commutation_bound,
                        format!("case {case}: commutation {d} above {}", rep.commutation_bound),
                    )?;
                }
                for d in &rep.step.approximation {
                    ensure(
                        *d <= rep.approximation_bound,
                        format!("case {case}: approximation {d} above {}", rep.approximation_bound),
                    )?;
                }
            }
        }
        Ok(())
    });
}
