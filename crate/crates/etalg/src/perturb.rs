//! Spectral homotopies between matrix evaluations with the same block data.
//!
//! Given two finite spectra that agree after a collar sweep, the continuous
//! deformation between the corresponding evaluations splits into three
//! stages: interior points of the first spectrum travel to their partners
//! (or to a glued end) during `[0, 1/3]`, the spectrum holds still on
//! `[1/3, 2/3]` while the unitary part rotates, and the second spectrum's
//! points travel back out during `[2/3, 1]`.  Each travelling point first
//! sweeps the full closed ball of radius `4 eta1` around its start, so the
//! union of the moving spectra covers a definite neighbourhood of every
//! interior point — the fact the injectivity argument runs on.
//!
//! Everything in this module is exact rational arithmetic.  The unitary
//! content of the middle stage lives in [`crate::bridge`].

use crate::error::{Error, Result};
use crate::pattern::{FiniteSpectrum, PairingResult, ProfileElement};
use crate::pl::PlFunc;
use crate::presentation::Presentation;
use crate::rational::{qi, strictly_above, Q};
use crate::spectrum::SpectrumPoint;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// The derived mesh and tolerance data for one deformation problem:
/// a target matrix size `n`, a tolerance `eps`, the coarse grid `m` from
/// the working family's slopes, and the fine grid `m1` for the pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantBundle {
    /// Target matrix size.
    pub n: u64,
    /// Requested output tolerance.
    pub eps: Q,
    /// Coarse grid: working functions move by less than `eps/2` across
    /// any two points closer than `2/m`.
    pub m: u64,
    /// `1 / (2 m n)` — the detector mesh.
    pub eta: Q,
    /// `eps / (40 n^6)` — the tolerance demanded of the detector family.
    pub eps_prime: Q,
    /// Fine grid for pairing spectra; `eta1 = 1/m1`.
    pub m1: u64,
    /// `1 / m1`, strictly below `eta / 2`, and small enough that detector
    /// functions move by less than `eps_prime / 8` across `4 eta1`.
    pub eta1: Q,
}

fn big_to_grid(b: BigInt, what: &str) -> Result<u64> {
    b.to_u64()
        .ok_or_else(|| Error::invalid(format!("{what} does not fit a 64-bit grid size")))
}

/// Derive the full constant bundle from a working family.
///
/// `m` is the least grid with `max_slope * (2/m) <= eps/2`; the detector
/// mesh is `eta = 1/(2 m n)`; the detector tolerance is
/// `eps_prime = eps/(40 n^6)`; and `m1` is the least fine grid with both
/// `1/m1 < eta/2` and `4 * (1/m1) * (1/eta) < eps_prime / 8` (detector
/// functions have slope `1/eta`).
///
/// The family must be nonempty, valid for `p`, and bounded by 1 in
/// absolute value — the deformation bounds are stated for a normalized
/// family.
pub fn choose_constants(
    p: &Presentation,
    n: u64,
    eps: &Q,
    working: &[ProfileElement],
) -> Result<ConstantBundle> {
    if n == 0 {
        return Err(Error::invalid("target matrix size must be positive"));
    }
    if *eps <= Q::zero() || *eps >= Q::one() {
        return Err(Error::invalid("tolerance must lie strictly between 0 and 1"));
    }
    if working.is_empty() {
        return Err(Error::invalid("the working family must be nonempty"));
    }
    let one = Q::one();
    let mut slope = Q::zero();
    for f in working {
        f.validate(p)?;
        for lists in &f.theta_eigs {
            for v in lists {
                if v.abs() > one {
                    return Err(Error::invalid("working family must be bounded by 1; normalize first"));
                }
            }
        }
        for block in &f.branches {
            for br in block {
                let s = br.max_abs_slope();
                if s > slope {
                    slope = s;
                }
                for (_, v) in br.breakpoints() {
                    if v.abs() > one {
                        return Err(Error::invalid("working family must be bounded by 1; normalize first"));
                    }
                }
            }
        }
    }

    // slope * (2/m) <= eps/2  <=>  m >= 4*slope/eps.
    let m = if slope.is_zero() {
        1u64
    } else {
        let bound = qi(4) * &slope / eps;
        big_to_grid(bound.ceil().to_integer(), "coarse grid")?.max(1)
    };

    let two_mn = BigInt::from(2u64) * BigInt::from(m) * BigInt::from(n);
    let eta = Q::new(BigInt::one(), two_mn);
    let n6 = BigInt::from(n).pow(6);
    let eps_prime = eps / Q::from(BigInt::from(40u64) * n6);

    // 1/m1 < eta/2  <=>  m1 > 4 m n;  4/(m1 eta) < eps_prime/8  <=>
    // m1 > 32 / (eta eps_prime).
    let lower_half = BigInt::from(4u64) * BigInt::from(m) * BigInt::from(n) + BigInt::one();
    let lower_mod = strictly_above(&(qi(32) / (&eta * &eps_prime)));
    let m1 = big_to_grid(lower_half.max(lower_mod), "fine grid")?;
    let eta1 = Q::new(BigInt::one(), BigInt::from(m1));

    Ok(ConstantBundle {
        n,
        eps: eps.clone(),
        m,
        eta,
        eps_prime,
        m1,
        eta1,
    })
}

/// Where a travelling spectrum point ends up at the inner end of its stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathTarget {
    /// Swept into the glued left end of its block.
    LeftEnd,
    /// Sent to a partner point strictly inside the block.
    Point(Q),
    /// Swept into the glued right end.
    RightEnd,
}

impl PathTarget {
    fn value(&self) -> Q {
        match self {
            PathTarget::LeftEnd => Q::zero(),
            PathTarget::Point(y) => y.clone(),
            PathTarget::RightEnd => Q::one(),
        }
    }
}

/// One travelling interior point: a piecewise-linear position track over
/// the whole time interval `[0, 1]`, whose image is exactly the closed
/// `4 eta1`-ball around the anchor, clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralPath {
    pub block: usize,
    /// The outer endpoint: position at time 0 (first-spectrum side) or at
    /// time 1 (second-spectrum side).
    pub anchor: Q,
    /// The inner endpoint (at time 1/3 resp. 2/3).
    pub target: PathTarget,
    /// The realized image, `[max(0, anchor - 4 eta1), min(1, anchor + 4 eta1)]`.
    pub window: (Q, Q),
    /// Position as a function of global time; constant outside the active
    /// stage.
    pub track: PlFunc,
}

/// The complete three-stage family: first-spectrum tracks active on
/// `[0, 1/3]`, a constant matched spectrum on `[1/3, 2/3]`, and
/// second-spectrum tracks active on `[2/3, 1]`.
#[derive(Debug, Clone)]
pub struct PathFamily {
    pub phi_paths: Vec<SpectralPath>,
    /// The common spectrum held during the middle stage (collar points
    /// already absorbed into the glued ends).
    pub middle: FiniteSpectrum,
    pub psi_paths: Vec<SpectralPath>,
    pub eta1: Q,
}

fn window_around(anchor: &Q, eta1: &Q) -> (Q, Q) {
    let four = qi(4) * eta1;
    let lo = anchor - &four;
    let hi = anchor + &four;
    (
        if lo < Q::zero() { Q::zero() } else { lo },
        if hi > Q::one() { Q::one() } else { hi },
    )
}

/// The canonical excursion: from `start`, visit the window edge nearer the
/// anchor, then the far edge, then settle at `finish`; breakpoints at equal
/// thirds of the active stage.
fn excursion_track(
    window: &(Q, Q),
    anchor: &Q,
    start: &Q,
    finish: &Q,
    stage_lo: Q,
    stage_hi: Q,
) -> Result<PlFunc> {
    let (lo, hi) = window;
    let (near, far) = if &(anchor - lo) <= &(hi - anchor) {
        (lo.clone(), hi.clone())
    } else {
        (hi.clone(), lo.clone())
    };
    let third = (&stage_hi - &stage_lo) / qi(3);
    let mut pts = Vec::new();
    if stage_lo > Q::zero() {
        pts.push((Q::zero(), start.clone()));
    }
    pts.push((stage_lo.clone(), start.clone()));
    pts.push((&stage_lo + &third, near));
    pts.push((&stage_lo + &third + &third, far));
    pts.push((stage_hi.clone(), finish.clone()));
    if stage_hi < Q::one() {
        pts.push((Q::one(), finish.clone()));
    }
    PlFunc::new(pts)
}

fn sorted(mut v: Vec<Q>) -> Vec<Q> {
    v.sort();
    v
}

fn block_points(s: &FiniteSpectrum, block: usize) -> Vec<Q> {
    s.interior
        .iter()
        .filter(|(i, _)| *i == block)
        .map(|(_, t)| t.clone())
        .collect()
}

/// Build the three-stage family from a fine-grid pairing.
///
/// The pairing must have been computed at mesh `1/m1` for exactly these two
/// spectra: matched pairs travel to each other, unmatched points must lie
/// strictly inside the `eta1`-collars and are swept into the glued ends.
/// After the sweep the two sides must land on the same spectrum; that
/// common value is returned as the middle stage.
pub fn spectral_paths(
    p: &Presentation,
    s_phi: &FiniteSpectrum,
    s_psi: &FiniteSpectrum,
    pairing: &PairingResult,
    bundle: &ConstantBundle,
) -> Result<PathFamily> {
    let eta1 = &bundle.eta1;
    let two_eta1 = eta1 + eta1;
    if pairing.per_block.len() != p.l() {
        return Err(Error::invalid("pairing has the wrong number of blocks"));
    }
    if !pairing.success || pairing.max_gap > two_eta1 {
        return Err(Error::invalid(format!(
            "pairing gap {} exceeds the fine-mesh tolerance {}",
            pairing.max_gap, two_eta1
        )));
    }
    if s_phi.zero_pad != s_psi.zero_pad {
        return Err(Error::invalid("spectra have different zero padding"));
    }

    let one_minus = Q::one() - eta1;
    let mut phi_paths = Vec::new();
    let mut psi_paths = Vec::new();
    let mut phi_mid_interior: Vec<(usize, Q)> = Vec::new();
    let mut psi_mid_interior: Vec<(usize, Q)> = Vec::new();

    let third = Q::new(BigInt::one(), BigInt::from(3u64));
    let two_thirds = &third + &third;

    for (i, bp) in pairing.per_block.iter().enumerate() {
        // The pairing must account for exactly the interior points present.
        let mut firsts: Vec<Q> = bp.matched.iter().map(|(x, _)| x.clone()).collect();
        firsts.extend(bp.left_over_first.iter().cloned());
        firsts.extend(bp.right_over_first.iter().cloned());
        if sorted(firsts) != block_points(s_phi, i) {
            return Err(Error::invalid(format!(
                "pairing does not cover the first spectrum on block {i}"
            )));
        }
        let mut seconds: Vec<Q> = bp.matched.iter().map(|(_, y)| y.clone()).collect();
        seconds.extend(bp.left_over_second.iter().cloned());
        seconds.extend(bp.right_over_second.iter().cloned());
        if sorted(seconds) != block_points(s_psi, i) {
            return Err(Error::invalid(format!(
                "pairing does not cover the second spectrum on block {i}"
            )));
        }
        for x in bp.left_over_first.iter().chain(bp.left_over_second.iter()) {
            if *x >= *eta1 {
                return Err(Error::invalid(format!(
                    "unmatched point {x} on block {i} is outside the left collar"
                )));
            }
        }
        for x in bp.right_over_first.iter().chain(bp.right_over_second.iter()) {
            if *x <= one_minus {
                return Err(Error::invalid(format!(
                    "unmatched point {x} on block {i} is outside the right collar"
                )));
            }
        }

        let mut push_phi = |anchor: &Q, target: PathTarget| -> Result<()> {
            let window = window_around(anchor, eta1);
            let inner = target.value();
            let track = excursion_track(&window, anchor, anchor, &inner, Q::zero(), third.clone())?;
            phi_paths.push(SpectralPath {
                block: i,
                anchor: anchor.clone(),
                target,
                window,
                track,
            });
            Ok(())
        };
        for (x, y) in &bp.matched {
            push_phi(x, PathTarget::Point(y.clone()))?;
            phi_mid_interior.push((i, y.clone()));
        }
        for x in &bp.left_over_first {
            push_phi(x, PathTarget::LeftEnd)?;
            phi_mid_interior.push((i, Q::zero()));
        }
        for x in &bp.right_over_first {
            push_phi(x, PathTarget::RightEnd)?;
            phi_mid_interior.push((i, Q::one()));
        }

        let mut push_psi = |anchor: &Q, target: PathTarget| -> Result<()> {
            let window = window_around(anchor, eta1);
            let inner = target.value();
            let track =
                excursion_track(&window, anchor, &inner, anchor, two_thirds.clone(), Q::one())?;
            psi_paths.push(SpectralPath {
                block: i,
                anchor: anchor.clone(),
                target,
                window,
                track,
            });
            Ok(())
        };
        for (_, y) in &bp.matched {
            push_psi(y, PathTarget::Point(y.clone()))?;
            psi_mid_interior.push((i, y.clone()));
        }
        for y in &bp.left_over_second {
            push_psi(y, PathTarget::LeftEnd)?;
            psi_mid_interior.push((i, Q::zero()));
        }
        for y in &bp.right_over_second {
            push_psi(y, PathTarget::RightEnd)?;
            psi_mid_interior.push((i, Q::one()));
        }
    }

    let phi_mid = FiniteSpectrum::canonical(
        p,
        s_phi.theta_mult.clone(),
        phi_mid_interior,
        s_phi.zero_pad,
    )?;
    let psi_mid = FiniteSpectrum::canonical(
        p,
        s_psi.theta_mult.clone(),
        psi_mid_interior,
        s_psi.zero_pad,
    )?;
    if phi_mid != psi_mid {
        return Err(Error::invalid(
            "spectra do not meet at a common matched spectrum after the collar sweep",
        ));
    }

    Ok(PathFamily {
        phi_paths,
        middle: phi_mid,
        psi_paths,
        eta1: eta1.clone(),
    })
}

/// Exact coverage test: does the union of the track images contain the
/// closed `4 eta1`-ball (clipped to `[0, 1]`) around `y`?
///
/// `y` must be an interior point of one of the two endpoint spectra — that
/// is, the anchor of some track.
pub fn coverage_check(family: &PathFamily, y: &SpectrumPoint) -> Result<bool> {
    let (block, t) = match y {
        SpectrumPoint::Interior { block, t } => (*block, t),
        SpectrumPoint::Theta(_) => {
            return Err(Error::invalid("coverage is asked of interior points only"))
        }
    };
    let anchored = family
        .phi_paths
        .iter()
        .chain(family.psi_paths.iter())
        .any(|sp| sp.block == block && sp.anchor == *t);
    if !anchored {
        return Err(Error::invalid(format!(
            "point {t} on block {block} is not in either endpoint spectrum"
        )));
    }

    let ball = window_around(t, &family.eta1);
    let mut windows: Vec<(Q, Q)> = family
        .phi_paths
        .iter()
        .chain(family.psi_paths.iter())
        .filter(|sp| sp.block == block)
        .map(|sp| sp.window.clone())
        .collect();
    windows.sort();

    let mut reach = ball.0.clone();
    for (lo, hi) in windows {
        if lo > reach {
            break;
        }
        if hi > reach {
            reach = hi;
        }
        if reach >= ball.1 {
            return Ok(true);
        }
    }
    Ok(reach >= ball.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{pair_spectra, BlockPairing};
    use crate::presentation::Presentation;
    use crate::rational::q;

    fn line() -> Presentation {
        Presentation::new(vec![1, 1], vec![1], vec![vec![1, 0]], vec![vec![0, 1]], true).unwrap()
    }

    fn identity_profile(_p: &Presentation) -> ProfileElement {
        ProfileElement {
            theta_eigs: vec![vec![Q::zero()], vec![Q::one()]],
            branches: vec![vec![PlFunc::identity(Q::zero(), Q::one())]],
        }
    }

    fn spec_of(p: &Presentation, pts: &[(usize, Q)], theta: Vec<u64>) -> FiniteSpectrum {
        FiniteSpectrum::canonical(p, theta, pts.to_vec(), 0).unwrap()
    }

    #[test]
    fn constants_match_the_worked_values() {
        let p = line();
        let f = identity_profile(&p);
        let b = choose_constants(&p, 2, &q(1, 2), &[f.clone()]).unwrap();
        assert_eq!(b.m, 8);
        assert_eq!(b.eta, q(1, 32));
        assert_eq!(b.eps_prime, q(1, 5120));
        // 32 / (eta eps') = 32*32*5120 = 5242880, strictly above -> +1.
        assert_eq!(b.m1, 5_242_881);
        assert_eq!(b.eta1, q(1, 5_242_881));
        assert!(&b.eta1 + &b.eta1 < b.eta);

        // A constant family has zero slope: the coarse grid collapses.
        let constant = ProfileElement {
            theta_eigs: vec![vec![q(1, 2)], vec![q(1, 2)]],
            branches: vec![vec![PlFunc::constant(Q::zero(), Q::one(), q(1, 2))]],
        };
        let b1 = choose_constants(&p, 2, &q(1, 2), &[constant]).unwrap();
        assert_eq!(b1.m, 1);

        // The detector tolerance is linear in eps at fixed n.
        let b2 = choose_constants(&p, 2, &q(1, 4), &[f]).unwrap();
        assert_eq!(&b2.eps_prime + &b2.eps_prime, b.eps_prime);
    }

    #[test]
    fn constants_reject_bad_input() {
        let p = line();
        let f = identity_profile(&p);
        assert!(choose_constants(&p, 2, &q(1, 2), &[]).is_err());
        assert!(choose_constants(&p, 2, &q(3, 2), &[f.clone()]).is_err());
        assert!(choose_constants(&p, 0, &q(1, 2), &[f.clone()]).is_err());
        let big = ProfileElement {
            theta_eigs: vec![vec![Q::zero()], vec![qi(2)]],
            branches: vec![vec![PlFunc::affine(Q::zero(), Q::zero(), Q::one(), qi(2))]],
        };
        assert!(choose_constants(&p, 2, &q(1, 2), &[big]).is_err());
    }

    /// A bundle with a human-sized fine grid, for the path geometry tests.
    fn toy_bundle(m1: u64) -> ConstantBundle {
        ConstantBundle {
            n: 2,
            eps: q(1, 2),
            m: 2,
            eta: q(1, 8),
            eps_prime: q(1, 5120),
            m1,
            eta1: q(1, m1 as i64),
        }
    }

    #[test]
    fn matched_paths_sweep_the_worked_window() {
        let p = line();
        let s_phi = spec_of(&p, &[(0, q(1, 2))], vec![0, 0]);
        let s_psi = spec_of(&p, &[(0, q(11, 20))], vec![0, 0]);
        let pairing = pair_spectra(&p, &s_phi, &s_psi, 20).unwrap();
        assert!(pairing.success);
        let fam = spectral_paths(&p, &s_phi, &s_psi, &pairing, &toy_bundle(20)).unwrap();

        assert_eq!(fam.phi_paths.len(), 1);
        let path = &fam.phi_paths[0];
        assert_eq!(path.window, (q(3, 10), q(7, 10)));
        assert_eq!(path.target, PathTarget::Point(q(11, 20)));
        assert_eq!(path.track.eval(&Q::zero()).unwrap(), q(1, 2));
        assert_eq!(path.track.eval(&q(1, 9)).unwrap(), q(3, 10));
        assert_eq!(path.track.eval(&q(2, 9)).unwrap(), q(7, 10));
        assert_eq!(path.track.eval(&q(1, 3)).unwrap(), q(11, 20));
        assert_eq!(path.track.eval(&Q::one()).unwrap(), q(11, 20));
        let (rl, rh) = path.track.range();
        assert_eq!((rl, rh), (q(3, 10), q(7, 10)));

        let back = &fam.psi_paths[0];
        assert_eq!(back.window, (q(7, 20), q(3, 4)));
        assert_eq!(back.track.eval(&q(2, 3)).unwrap(), q(11, 20));
        assert_eq!(back.track.eval(&Q::one()).unwrap(), q(11, 20));

        assert_eq!(fam.middle, spec_of(&p, &[(0, q(11, 20))], vec![0, 0]));
        assert!(coverage_check(
            &fam,
            &SpectrumPoint::Interior { block: 0, t: q(1, 2) }
        )
        .unwrap());
    }

    #[test]
    fn collar_points_sweep_to_the_glued_ends() {
        let p = line();
        // One point deep in the left collar, the partner deep in the right
        // collar; sizes stay balanced through the boundary rewrite.
        let s_phi = spec_of(&p, &[(0, q(1, 40))], vec![0, 0]);
        let s_psi = spec_of(&p, &[(0, q(39, 40))], vec![1, 1]);
        // Padding the first side with the same vertex content keeps the
        // matched spectra equal: the left end rewrites by the alpha row
        // (vertex 0), the right end by the beta row (vertex 1).
        let s_phi = FiniteSpectrum::canonical(&p, vec![0, 1], s_phi.interior.clone(), 0).unwrap();
        let s_psi = FiniteSpectrum::canonical(&p, vec![1, 0], s_psi.interior.clone(), 0).unwrap();
        let pairing = pair_spectra(&p, &s_phi, &s_psi, 20).unwrap();
        assert!(pairing.success);
        let fam = spectral_paths(&p, &s_phi, &s_psi, &pairing, &toy_bundle(20)).unwrap();

        assert_eq!(fam.phi_paths[0].target, PathTarget::LeftEnd);
        assert_eq!(fam.phi_paths[0].window, (Q::zero(), q(9, 40)));
        assert_eq!(fam.psi_paths[0].target, PathTarget::RightEnd);
        assert_eq!(fam.psi_paths[0].window, (q(31, 40), Q::one()));
        // Both sides sweep into vertices: {theta_0 + alpha row} on the left,
        // {theta_1 + beta row} on the right; both equal (1, 1).
        assert_eq!(fam.middle, spec_of(&p, &[], vec![1, 1]));

        // The ball around the collar point is clipped at 0 and covered.
        assert!(coverage_check(
            &fam,
            &SpectrumPoint::Interior { block: 0, t: q(1, 40) }
        )
        .unwrap());
    }

    #[test]
    fn identity_pairing_still_sweeps_windows() {
        let p = line();
        let s = spec_of(&p, &[(0, q(1, 2))], vec![0, 0]);
        let pairing = pair_spectra(&p, &s, &s, 20).unwrap();
        let fam = spectral_paths(&p, &s, &s, &pairing, &toy_bundle(20)).unwrap();
        assert_eq!(fam.middle, s);
        let path = &fam.phi_paths[0];
        assert_eq!(path.window, (q(3, 10), q(7, 10)));
        assert_eq!(path.track.eval(&q(1, 3)).unwrap(), q(1, 2));
        let (rl, rh) = path.track.range();
        assert_eq!((rl, rh), path.window.clone());
    }

    #[test]
    fn mismatched_middles_are_rejected() {
        // Two pure-vertex spectra of the same size but different vertices:
        // the pairing is vacuous, yet no common middle spectrum exists.
        let p = line();
        let s_phi = spec_of(&p, &[], vec![1, 0]);
        let s_psi = spec_of(&p, &[], vec![0, 1]);
        let pairing = pair_spectra(&p, &s_phi, &s_psi, 20).unwrap();
        assert!(pairing.success);
        let err = spectral_paths(&p, &s_phi, &s_psi, &pairing, &toy_bundle(20)).unwrap_err();
        assert!(err.to_string().contains("matched spectrum"));
    }

    #[test]
    fn stale_or_non_collar_pairings_are_rejected() {
        let p = line();
        let s_phi = spec_of(&p, &[(0, q(1, 2))], vec![0, 0]);
        let s_psi = spec_of(&p, &[(0, q(11, 20))], vec![0, 0]);
        // A pairing computed for different spectra does not cover these.
        let other = spec_of(&p, &[(0, q(1, 4))], vec![0, 0]);
        let stale = pair_spectra(&p, &other, &s_psi, 20).unwrap();
        assert!(spectral_paths(&p, &s_phi, &s_psi, &stale, &toy_bundle(20)).is_err());

        // A hand-built pairing leaving a core point unmatched is rejected.
        let bad = PairingResult {
            per_block: vec![BlockPairing {
                matched: vec![],
                left_over_first: vec![q(1, 2)],
                right_over_first: vec![],
                left_over_second: vec![q(11, 20)],
                right_over_second: vec![],
                max_gap: Q::zero(),
            }],
            max_gap: Q::zero(),
            success: true,
        };
        let err = spectral_paths(&p, &s_phi, &s_psi, &bad, &toy_bundle(20)).unwrap_err();
        assert!(err.to_string().contains("collar"));
    }

    #[test]
    fn coverage_rejects_foreign_points() {
        let p = line();
        let s = spec_of(&p, &[(0, q(1, 2))], vec![0, 0]);
        let pairing = pair_spectra(&p, &s, &s, 20).unwrap();
        let fam = spectral_paths(&p, &s, &s, &pairing, &toy_bundle(20)).unwrap();
        assert!(coverage_check(&fam, &SpectrumPoint::Interior { block: 0, t: q(1, 3) }).is_err());
        assert!(coverage_check(&fam, &SpectrumPoint::Theta(0)).is_err());
    }
}
