//! Runtime oracle suites.
//!
//! Each check compares a production code path against an independent
//! evaluation (a closed form, a finite-squeezing limit, a two-mode invariant
//! formula) on a deterministic pseudo-random sample and reports the worst
//! discrepancy against a fixed tolerance.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::composable::{
    build_tripartite_cm, eve_given_bob, holevo_bob_eve_composable, tripartite_closed_form, AttackConfig,
};
use crate::error::Result;
use crate::gaussian::{
    condition_on_measurement, symplectic_eigenvalues, symplectic_watermark, tmsv_cm, CovarianceMatrix, Quadrature,
};
use crate::link::{
    admissible_gain_max, continuous_limit_for, effective_channel, propagate_link, shared_cm, Amplifier, LinkConfig,
};
use crate::protocol::{ProtocolCase, SecurityParams};
use crate::unconditional::{
    conditional_alice_eigenvalue, kgr_unconditional, mutual_information, mutual_information_of,
};

/// Squeezing parameter of the finite homodyne oracle.
pub const FINITE_Z: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelfCheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl SelfCheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed)
    }
}

/// Draws a random link: `L` in `[0, 200]`, `M` in `1..=10`, `eps` in
/// `[0, 0.1]`, any amplifier, the gain anywhere below the power bound of
/// `v`, and `v` log-uniform in `[1, v_hi]`.
pub fn random_point(rng: &mut StdRng, v_hi: f64) -> (LinkConfig, f64) {
    let l = rng.random_range(0.0..200.0);
    let m = rng.random_range(1..=10usize);
    let eps = rng.random_range(0.0..0.1);
    let v = v_hi.powf(rng.random_range(0.0..1.0f64));
    let amp = [Amplifier::None, Amplifier::PhaseInsensitive, Amplifier::PhaseSensitive][rng.random_range(0..3usize)];
    let probe = LinkConfig::new(l, m, eps).with_amplifier(amp, 1.0);
    let g = 1.0 + rng.random_range(0.0..1.0) * (admissible_gain_max(&probe, v) - 1.0);
    (probe.with_amplifier(amp, g), v)
}

fn case_for(amp: Amplifier, rng: &mut StdRng) -> ProtocolCase {
    match amp {
        Amplifier::None => ProtocolCase::NoAmplifier,
        Amplifier::PhaseInsensitive => ProtocolCase::PhaseInsensitive,
        Amplifier::PhaseSensitive if rng.random_bool(0.5) => ProtocolCase::AmplifiedQuadrature,
        Amplifier::PhaseSensitive => ProtocolCase::DeamplifiedQuadrature,
    }
}

/// Largest entrywise difference, relative to `max(1, |entry|)`.
pub fn max_entry_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0)).fold(0.0, f64::max)
}

fn finite_homodyne(quadrature: Quadrature, z: f64) -> DMatrix<f64> {
    match quadrature {
        Quadrature::Q => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![z, 1.0 / z])),
        Quadrature::P => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 / z, z])),
    }
}

fn finite_conditional(rest: &DMatrix<f64>, cross: &DMatrix<f64>, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    let inv = kernel.clone().try_inverse().expect("measurement kernel is invertible");
    rest - cross * inv * cross.transpose()
}

/// Conditional CM of modes `0..n-1` after a homodyne on the last mode of
/// `sigma`, evaluated with a finitely squeezed detector `diag(z, 1/z)` as
/// `sigma_A - C (sigma_B + sigma_m)^-1 C^T`.
pub fn finite_z_conditional(sigma: &CovarianceMatrix, quadrature: Quadrature, z: f64) -> DMatrix<f64> {
    let d = sigma.matrix().nrows();
    let s = sigma.matrix();
    let rest = s.view((0, 0), (d - 2, d - 2)).into_owned();
    let cross = s.view((0, d - 2), (d - 2, 2)).into_owned();
    let b = s.view((d - 2, d - 2), (2, 2)).into_owned();
    finite_conditional(&rest, &cross, &(b + finite_homodyne(quadrature, z)))
}

/// Mutual information as the raw determinant ratio
/// `1/2 log2 det(sigma_B + sigma_m) / det(sigma_B|A + sigma_m)` with a
/// finitely squeezed homodyne on Bob and Alice heterodyning.
pub fn finite_z_mutual_information(shared: &CovarianceMatrix, quadrature: Quadrature, z: f64) -> f64 {
    let s = shared.matrix();
    let a = s.view((0, 0), (2, 2)).into_owned();
    let c = s.view((2, 0), (2, 2)).into_owned();
    let b = s.view((2, 2), (2, 2)).into_owned();
    let b_given_a = finite_conditional(&b, &c, &(a + DMatrix::identity(2, 2)));
    let m = finite_homodyne(quadrature, z);
    0.5 * ((&b + &m).determinant() / (b_given_a + m).determinant()).log2()
}

/// Two-mode symplectic spectrum from the invariants `Delta = det A + det B +
/// 2 det C` and `det sigma`.
pub fn two_mode_spectrum(sigma: &CovarianceMatrix) -> (f64, f64) {
    let s = sigma.matrix();
    let det2 = |r: usize, c: usize| s[(r, c)] * s[(r + 1, c + 1)] - s[(r, c + 1)] * s[(r + 1, c)];
    let delta = det2(0, 0) + det2(2, 2) + 2.0 * det2(0, 2);
    let disc = (delta * delta - 4.0 * s.determinant()).max(0.0).sqrt();
    (((delta + disc) / 2.0).sqrt(), ((delta - disc) / 2.0).max(0.0).sqrt())
}

/// Shared CM from effective parameters vs span-by-span CP propagation.
pub fn check_shared_cm(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 200.0);
        let generic = propagate_link(&tmsv_cm(v)?, &link, 1, 1..=link.spans)?;
        err = err.max(max_entry_error(generic.matrix(), shared_cm(&link, v)?.matrix()));
    }
    Ok(CheckOutcome { name: "shared CM: closed form vs propagation", cases: samples, max_error: err, tolerance: 1e-9 })
}

/// Joint state under the entangling cloner vs its entrywise closed form.
pub fn check_tripartite_cm(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 200.0);
        let attack = AttackConfig::new(rng.random_range(1..=link.spans));
        let generic = build_tripartite_cm(&link, v, attack)?;
        let closed = tripartite_closed_form(&link, v, attack)?;
        err = err.max(max_entry_error(generic.cm().matrix(), closed.cm().matrix()));
    }
    Ok(CheckOutcome { name: "cloner CM: closed form vs propagation", cases: samples, max_error: err, tolerance: 1e-9 })
}

/// Eve's conditional state: rank-one homodyne limit vs finite squeezing.
pub fn check_eve_conditional(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 50.0);
        let case = case_for(link.amplifier, rng);
        let attack = AttackConfig::new(rng.random_range(1..=link.spans));
        let closed = tripartite_closed_form(&link, v, attack)?;
        // reorder to (E1, E2, B) so the measured mode is last
        let ebe = closed.cm().reduced(&[2, 3, 1])?;
        let finite = finite_z_conditional(&ebe, case.quadrature(), FINITE_Z);
        let limit = eve_given_bob(&build_tripartite_cm(&link, v, attack)?, case)?;
        err = err.max(max_entry_error(limit.matrix(), &finite));
    }
    Ok(CheckOutcome { name: "Eve|Bob: homodyne limit vs finite z", cases: samples, max_error: err, tolerance: 1e-6 })
}

/// Mutual information (conditional variances) vs finite-z determinant ratio.
pub fn check_mutual_information(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 30.0);
        let shared = shared_cm(&link, v)?;
        for quad in [Quadrature::Q, Quadrature::P] {
            let analytic = mutual_information_of(&shared, quad)?;
            err = err.max((analytic - finite_z_mutual_information(&shared, quad, FINITE_Z)).abs());
        }
    }
    Ok(CheckOutcome { name: "I_AB: homodyne limit vs finite z", cases: samples, max_error: err, tolerance: 1e-6 })
}

/// Alice's conditional CM after Bob's homodyne vs finite squeezing, and the
/// closed-form `d3` vs `sqrt det` of the generic Schur complement.
pub fn check_alice_conditional(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 50.0);
        let case = case_for(link.amplifier, rng);
        let shared = shared_cm(&link, v)?;
        let limit = condition_on_measurement(&shared, 1, case.bob_measurement())?;
        err = err.max(max_entry_error(limit.matrix(), &finite_z_conditional(&shared, case.quadrature(), FINITE_Z)));
        let d3 = conditional_alice_eigenvalue(&link, case, v);
        err = err.max((d3 - limit.determinant().sqrt()).abs() / d3);
    }
    Ok(CheckOutcome { name: "Alice|Bob: limit vs finite z vs d3", cases: samples, max_error: err, tolerance: 1e-6 })
}

/// Generic symplectic spectrum vs the two-mode invariant formula.
pub fn check_two_mode_spectrum(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (link, v) = random_point(rng, 200.0);
        let attack = AttackConfig::new(rng.random_range(1..=link.spans));
        let joint = build_tripartite_cm(&link, v, attack)?;
        for cm in [shared_cm(&link, v)?, joint.eve()] {
            let d = symplectic_eigenvalues(&cm)?;
            let (hi, lo) = two_mode_spectrum(&cm);
            err = err.max((d[0] - hi).abs() / hi).max((d[1] - lo.max(1.0)).abs() / hi);
        }
    }
    Ok(CheckOutcome {
        name: "symplectic spectrum vs two-mode invariants",
        cases: samples,
        max_error: err,
        tolerance: 1e-9,
    })
}

/// Effective parameters of a 64-span phase-sensitive link vs the
/// continuous-amplification limit, relative error.
pub fn check_continuous_limit() -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    let mut cases = 0;
    let spans = 64;
    for t_n in [0.1, 0.5] {
        let length = -10.0 * f64::log10(t_n) / crate::link::DEFAULT_LOSS_DB_PER_KM;
        for g_inf in [1.0, 1.2, 1.5] {
            let base = LinkConfig::new(length, spans, 0.05);
            let link = base.with_amplifier(Amplifier::PhaseSensitive, f64::powf(g_inf, 1.0 / spans as f64));
            let finite = effective_channel(&link);
            let limit = continuous_limit_for(&base, g_inf)?;
            let pairs =
                [(finite.t_q, limit.t_q), (finite.t_p, limit.t_p), (finite.n_q, limit.n_q), (finite.n_p, limit.n_p)];
            for (a, b) in pairs {
                err = err.max((a - b).abs() / b.abs());
            }
            cases += 1;
        }
    }
    Ok(CheckOutcome { name: "continuous limit at M = 64", cases, max_error: err, tolerance: 1e-2 })
}

/// Unit gain collapses all amplifiers onto the bare fiber; the lossless
/// noiseless link gives `K = 1/2 log2 V` and `chi_BE = 0`.
pub fn check_reductions(rng: &mut StdRng, samples: usize) -> Result<CheckOutcome> {
    let mut err = 0.0f64;
    for _ in 0..samples {
        let (mut fiber, v) = random_point(rng, 200.0);
        fiber = fiber.with_amplifier(Amplifier::None, 1.0);
        let attack = AttackConfig::new(rng.random_range(1..=fiber.spans));
        let bare = shared_cm(&fiber, v)?;
        let bare_joint = build_tripartite_cm(&fiber, v, attack)?;
        let n = ProtocolCase::NoAmplifier;
        let i_n = mutual_information(&fiber, n, v)?;
        let chi_n = holevo_bob_eve_composable(&fiber, n, v, attack)?;
        for case in
            [ProtocolCase::PhaseInsensitive, ProtocolCase::AmplifiedQuadrature, ProtocolCase::DeamplifiedQuadrature]
        {
            let link = case.configure(&fiber, 1.0);
            err = err.max(max_entry_error(bare.matrix(), shared_cm(&link, v)?.matrix()));
            err = err
                .max(max_entry_error(bare_joint.cm().matrix(), build_tripartite_cm(&link, v, attack)?.cm().matrix()));
            err = err.max((mutual_information(&link, case, v)? - i_n).abs());
            err = err.max((holevo_bob_eve_composable(&link, case, v, attack)? - chi_n).abs());
            if case != ProtocolCase::PhaseInsensitive {
                let p = SecurityParams::new(0.95, case)?;
                let k = kgr_unconditional(&fiber, &p, v, 1.0)?.kgr;
                let k_n = kgr_unconditional(&fiber, &p.with_case(n), v, 1.0)?.kgr;
                err = err.max((k - k_n).abs());
            }
        }
        let lossless = LinkConfig::new(0.0, fiber.spans, 0.0);
        for case in [ProtocolCase::NoAmplifier, ProtocolCase::AmplifiedQuadrature, ProtocolCase::DeamplifiedQuadrature]
        {
            let r = kgr_unconditional(&lossless, &SecurityParams::new(1.0, case)?, v, 1.0)?;
            err = err.max((r.kgr - 0.5 * v.log2()).abs()).max(r.chi_be.abs());
        }
    }
    Ok(CheckOutcome { name: "unit-gain and lossless reductions", cases: samples, max_error: err, tolerance: 1e-10 })
}

/// No symplectic eigenvalue computed so far fell below `1 - 1e-9`.
pub fn check_physicality_watermark() -> CheckOutcome {
    let w = symplectic_watermark();
    let deficit = if w.is_finite() { (1.0 - w).max(0.0) } else { 0.0 };
    CheckOutcome { name: "physicality watermark", cases: 1, max_error: deficit, tolerance: 1e-9 }
}

/// Runs every suite with `samples` random points each (the spectrum and
/// homodyne suites use `samples / 2`).
pub fn run_selfcheck(samples: usize, seed: u64) -> Result<SelfCheckReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let half = (samples / 2).max(1);
    let outcomes = vec![
        check_shared_cm(&mut rng, samples)?,
        check_tripartite_cm(&mut rng, samples)?,
        check_mutual_information(&mut rng, half)?,
        check_alice_conditional(&mut rng, half)?,
        check_eve_conditional(&mut rng, half)?,
        check_two_mode_spectrum(&mut rng, half)?,
        check_continuous_limit()?,
        check_reductions(&mut rng, half)?,
        check_physicality_watermark(),
    ];
    Ok(SelfCheckReport { outcomes })
}
