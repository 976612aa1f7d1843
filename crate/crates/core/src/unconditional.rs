//! Key rates when the whole link is untrusted.
//!
//! Eve purifies the Alice-Bob state, so her entropies follow from the
//! shared covariance matrix alone. Reverse reconciliation is assumed
//! throughout. Phase-insensitive links are rejected: Eve would also hold the
//! amplifier idlers, so no sound rate can be computed from the shared state.

use crate::error::{Error, Result};
use crate::gaussian::{
    condition_on_measurement, entropy_h, quadrature_variance, symplectic_eigenvalues, MeasurementKind, Quadrature,
};
use crate::link::{admissible_gain_max, effective_channel, shared_cm, Amplifier, LinkConfig};
use crate::optimize::{bisect_sign_change, last_true_index, optimize_v, optimize_vg, Bisection, OptimizerSettings};
use crate::protocol::{KeyRateResult, ProtocolCase, SecurityParams};

/// Optimized rates above this count as a secure link.
pub const SECURE_RATE_FLOOR: f64 = 1e-12;
/// Grid step of the maximum-secure-distance search, km.
pub const DISTANCE_STEP_KM: f64 = 0.5;

/// Shannon information between Alice (heterodyne) and Bob (homodyne on the
/// case's quadrature), `1/2 log2(var_B / var_B|A)`.
pub fn mutual_information(link: &LinkConfig, case: ProtocolCase, v: f64) -> Result<f64> {
    case.check_link(link)?;
    let shared = shared_cm(link, v)?;
    mutual_information_of(&shared, case.quadrature())
}

/// Mutual information for an Alice-Bob covariance matrix with Alice on mode 0.
pub fn mutual_information_of(shared: &crate::gaussian::CovarianceMatrix, quadrature: Quadrature) -> Result<f64> {
    let bob_given_alice = condition_on_measurement(shared, 0, MeasurementKind::Heterodyne)?;
    let var_b = quadrature_variance(shared, 1, quadrature);
    let var_b_given_a = quadrature_variance(&bob_given_alice, 0, quadrature);
    if !(var_b_given_a > 0.0) {
        return Err(Error::Numerical(format!("conditional variance {var_b_given_a} <= 0")));
    }
    Ok(0.5 * (var_b / var_b_given_a).log2())
}

/// `sqrt(det sigma_A|B)` after Bob's homodyne: `V sqrt(1 - Z^2 / (V (V + N)))`
/// with `N` the added noise of the measured quadrature.
pub fn conditional_alice_eigenvalue(link: &LinkConfig, case: ProtocolCase, v: f64) -> f64 {
    let ch = effective_channel(link);
    let n = match case.quadrature() {
        Quadrature::Q => ch.n_q,
        Quadrature::P => ch.n_p,
    };
    let z2 = v * v - 1.0;
    v * (1.0 - z2 / (v * (v + n))).max(0.0).sqrt()
}

/// Holevo information between Bob and a purifying Eve,
/// `h(d1) + h(d2) - h(d3)`.
pub fn holevo_bob_eve_unconditional(link: &LinkConfig, case: ProtocolCase, v: f64) -> Result<f64> {
    case.check_link(link)?;
    if link.amplifier == Amplifier::PhaseInsensitive {
        return Err(Error::Unsupported(
            "phase-insensitive links under unconditional security: Eve also purifies the amplifier idlers".into(),
        ));
    }
    let shared = shared_cm(link, v)?;
    let d = symplectic_eigenvalues(&shared)?;
    let d3 = conditional_alice_eigenvalue(link, case, v);
    Ok(entropy_h(d[0])? + entropy_h(d[1])? - entropy_h(d3)?)
}

fn reject_pia(case: ProtocolCase) -> Result<()> {
    if case == ProtocolCase::PhaseInsensitive {
        Err(Error::Unsupported(
            "phase-insensitive links under unconditional security: Eve also purifies the amplifier idlers".into(),
        ))
    } else {
        Ok(())
    }
}

/// `beta I_AB - chi_BE` at `(V, G)` on the fiber `base`.
pub fn kgr_unconditional(base: &LinkConfig, params: &SecurityParams, v: f64, g: f64) -> Result<KeyRateResult> {
    reject_pia(params.case)?;
    let link = params.case.configure(base, g);
    let g_max = admissible_gain_max(&link, v);
    if g > g_max * (1.0 + 1e-12) {
        return Err(Error::ConstraintViolation { v, gain: g, g_max });
    }
    let i_ab = mutual_information(&link, params.case, v)?;
    let chi_be = holevo_bob_eve_unconditional(&link, params.case, v)?;
    Ok(KeyRateResult {
        kgr: params.beta * i_ab - chi_be,
        v_opt: v,
        g_opt: link.gain,
        g_max,
        i_ab,
        chi_be,
        constraint_active: link.amplifier != Amplifier::None && g >= g_max * (1.0 - 1e-9) && g_max > 1.0,
    })
}

/// Rate maximized over `(V, G)`; a single-variable search over `V` for the
/// unamplified benchmark.
pub fn optimize_unconditional(
    base: &LinkConfig,
    params: &SecurityParams,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    reject_pia(params.case)?;
    base.validate()?;
    let opt = if params.case == ProtocolCase::NoAmplifier {
        optimize_v(|v| Ok(kgr_unconditional(base, params, v, 1.0)?.kgr), settings)?
    } else {
        let probe = params.case.configure(base, 1.0);
        optimize_vg(
            |v, g| Ok(kgr_unconditional(base, params, v, g)?.kgr),
            |v| admissible_gain_max(&probe, v),
            settings,
        )?
    };
    let mut result = kgr_unconditional(base, params, opt.v, opt.g)?;
    result.constraint_active = opt.constraint_active;
    Ok(result)
}

/// Largest excess noise (bisection in `[0, 1]`, resolution `1e-4`) that keeps
/// the optimized rate positive. The `excess_noise` of `base` is ignored.
/// Returns 0 when no noise level gives a key and 1 when all do.
pub fn max_tolerable_noise(base: &LinkConfig, params: &SecurityParams, settings: &OptimizerSettings) -> Result<f64> {
    let rate = |eps: f64| Ok(optimize_unconditional(&base.with_excess_noise(eps), params, settings)?.kgr);
    Ok(match bisect_sign_change(rate, (0.0, 1.0), 1e-4)? {
        Bisection::Root(eps) => eps,
        Bisection::NoSignChange { positive: true } => 1.0,
        Bisection::NoSignChange { positive: false } => 0.0,
    })
}

/// Largest length on a 0.5 km grid, up to `max_km`, whose optimized rate
/// exceeds [`SECURE_RATE_FLOOR`]. The rate is assumed to decrease with
/// length, which lets the grid be searched by bisection. `None` if even the
/// shortest link is insecure.
pub fn max_secure_distance(
    base: &LinkConfig,
    params: &SecurityParams,
    settings: &OptimizerSettings,
    max_km: f64,
) -> Result<Option<f64>> {
    let n = (max_km / DISTANCE_STEP_KM).floor() as usize + 1;
    let idx = last_true_index(n, |i| {
        let l = i as f64 * DISTANCE_STEP_KM;
        Ok(optimize_unconditional(&base.with_length(l), params, settings)?.kgr > SECURE_RATE_FLOOR)
    })?;
    Ok(idx.map(|i| i as f64 * DISTANCE_STEP_KM))
}
