//! Restricted eavesdropping: a single untrusted span attacked with an
//! entangling cloner.
//!
//! Eve replaces the thermal environment of span `k` with one arm of her own
//! TMSV of variance `V_eps = 1 + 2 n_T`, keeps the reflected output and the
//! second arm. Tracing her modes out gives back exactly the trusted link, so
//! Alice and Bob cannot see the attack. All amplifiers and the other spans
//! are trusted. The unamplified benchmark is the same construction at unit
//! gain.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::gaussian::{
    apply_cp, beam_splitter_symplectic, condition_on_measurement, embed_on_modes, tensor, tmsv_cm, von_neumann_entropy,
    CovarianceMatrix,
};
use crate::link::{
    admissible_gain_max, amplifier_map, effective_channel_after, propagate_link, shared_cm, span_params, Amplifier,
    LinkConfig,
};
use crate::optimize::{optimize_v, optimize_vg, OptimizerSettings};
use crate::protocol::{KeyRateResult, ProtocolCase, SecurityParams};
use crate::unconditional::mutual_information;

/// `|R - 1|` below this counts as "no advantage".
pub const UNIT_RATIO_TOL: f64 = 1e-3;

/// Mode indices of the joint state.
pub const ALICE: usize = 0;
pub const BOB: usize = 1;
pub const EVE_REFLECTED: usize = 2;
pub const EVE_IDLER: usize = 3;

/// Position of the untrusted span, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttackConfig {
    pub span: usize,
}

impl AttackConfig {
    pub fn new(span: usize) -> Self {
        Self { span }
    }

    pub fn validate(&self, link: &LinkConfig) -> Result<()> {
        if self.span == 0 || self.span > link.spans {
            return Err(Error::Config(format!("attacked span {} outside 1..={}", self.span, link.spans)));
        }
        Ok(())
    }
}

/// Variance of Eve's TMSV, matched to the span's thermal noise.
pub fn eve_variance(link: &LinkConfig) -> f64 {
    1.0 + 2.0 * span_params(link).thermal_photons
}

/// Joint covariance matrix over `(A, B, E1, E2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteCM {
    cm: CovarianceMatrix,
}

impl TripartiteCM {
    pub fn new(cm: CovarianceMatrix) -> Result<Self> {
        if cm.n_modes() != 4 {
            return Err(Error::Dimension { expected: 4, found: cm.n_modes() });
        }
        Ok(Self { cm })
    }

    pub fn cm(&self) -> &CovarianceMatrix {
        &self.cm
    }

    /// Alice-Bob marginal.
    pub fn alice_bob(&self) -> CovarianceMatrix {
        self.cm.reduced(&[ALICE, BOB]).expect("modes in range")
    }

    /// Eve's marginal over `(E1, E2)`.
    pub fn eve(&self) -> CovarianceMatrix {
        self.cm.reduced(&[EVE_REFLECTED, EVE_IDLER]).expect("modes in range")
    }

    /// Bob together with Eve, Bob first.
    pub fn bob_eve(&self) -> CovarianceMatrix {
        self.cm.reduced(&[BOB, EVE_REFLECTED, EVE_IDLER]).expect("modes in range")
    }

    /// 2x4 correlation block between Alice and Eve.
    pub fn alice_eve_block(&self) -> DMatrix<f64> {
        self.cm.matrix().view((0, 4), (2, 4)).into_owned()
    }

    /// 2x4 correlation block between Bob and Eve.
    pub fn bob_eve_block(&self) -> DMatrix<f64> {
        self.cm.matrix().view((2, 4), (2, 4)).into_owned()
    }
}

/// Builds the joint state by propagation: trusted spans `1..k-1`, the
/// cloner's beam splitter in place of span `k`'s loss, amplifier `k`, and
/// trusted spans `k+1..M`.
pub fn build_tripartite_cm(link: &LinkConfig, v: f64, attack: AttackConfig) -> Result<TripartiteCM> {
    link.validate()?;
    attack.validate(link)?;
    let k = attack.span;
    let sp = span_params(link);
    let before = propagate_link(&tmsv_cm(v)?, link, BOB, 1..=k - 1)?;
    let joint = tensor(&before, &tmsv_cm(eve_variance(link))?);
    let cloner = embed_on_modes(&beam_splitter_symplectic(sp.transmissivity)?, &[BOB, EVE_REFLECTED], 4)?;
    let tapped = apply_cp(&joint, &cloner)?;
    let amplified = apply_cp(&tapped, &embed_on_modes(&amplifier_map(link.amplifier, link.gain)?, &[BOB], 4)?)?;
    let out = propagate_link(&amplified, link, BOB, k + 1..=link.spans)?;
    TripartiteCM::new(out)
}

/// Joint state assembled entry by entry from the effective channel
/// parameters of the first `k - 1` spans. Independent of the propagation
/// path in [`build_tripartite_cm`] and used to cross-check it.
pub fn tripartite_closed_form(link: &LinkConfig, v: f64, attack: AttackConfig) -> Result<TripartiteCM> {
    link.validate()?;
    attack.validate(link)?;
    let k = attack.span;
    let m = link.spans;
    let t = span_params(link).transmissivity;
    let v_eps = eve_variance(link);
    let z_eps = (v_eps * v_eps - 1.0).sqrt();
    let z = (v * v - 1.0).sqrt();
    let (g_q, g_p) = match link.amplifier {
        Amplifier::None => (1.0, 1.0),
        Amplifier::PhaseInsensitive => (link.gain, link.gain),
        Amplifier::PhaseSensitive => (link.gain, 1.0 / link.gain),
    };
    let pre = effective_channel_after(link, k - 1);
    let (b_q, b_p) = (pre.output_variance_q(v), pre.output_variance_p(v));
    let (z_q, z_p) = (pre.t_q.sqrt() * z, pre.t_p.sqrt() * z);

    let e_q = (1.0 - t) * b_q + t * v_eps;
    let e_p = (1.0 - t) * b_p + t * v_eps;
    let c1_q = -(1.0 - t).sqrt() * z_q;
    let c1_p = -(1.0 - t).sqrt() * z_p;
    let after = |g: f64, extra: i32| (g * t).powi((m - k) as i32 + extra);
    let c2_q = (after(g_q, 1) * (1.0 - t)).sqrt() * (v_eps - b_q);
    let c2_p = (after(g_p, 1) * (1.0 - t)).sqrt() * (v_eps - b_p);
    let c3_q = (after(g_q, 0) * g_q * (1.0 - t)).sqrt() * z_eps;
    let c3_p = (after(g_p, 0) * g_p * (1.0 - t)).sqrt() * z_eps;
    let st_z = t.sqrt() * z_eps;

    let ab = shared_cm(link, v)?;
    let mut data = DMatrix::zeros(8, 8);
    data.view_mut((0, 0), (4, 4)).copy_from(ab.matrix());
    #[rustfmt::skip]
    let eve = DMatrix::from_row_slice(4, 4, &[
        e_q, 0.0, st_z, 0.0,
        0.0, e_p, 0.0, -st_z,
        st_z, 0.0, v_eps, 0.0,
        0.0, -st_z, 0.0, v_eps,
    ]);
    #[rustfmt::skip]
    let cross = DMatrix::from_row_slice(4, 4, &[
        c1_q, 0.0, 0.0, 0.0,
        0.0, -c1_p, 0.0, 0.0,
        c2_q, 0.0, c3_q, 0.0,
        0.0, c2_p, 0.0, -c3_p,
    ]);
    data.view_mut((4, 4), (4, 4)).copy_from(&eve);
    data.view_mut((0, 4), (4, 4)).copy_from(&cross);
    data.view_mut((4, 0), (4, 4)).copy_from(&cross.transpose());
    TripartiteCM::new(CovarianceMatrix::new(data)?)
}

/// Eve's conditional state after Bob's homodyne detection.
pub fn eve_given_bob(joint: &TripartiteCM, case: ProtocolCase) -> Result<CovarianceMatrix> {
    condition_on_measurement(&joint.bob_eve(), 0, case.bob_measurement())
}

/// Holevo information between Bob and Eve, `S(E) - S(E|B)`.
pub fn holevo_bob_eve_composable(link: &LinkConfig, case: ProtocolCase, v: f64, attack: AttackConfig) -> Result<f64> {
    case.check_link(link)?;
    let joint = build_tripartite_cm(link, v, attack)?;
    holevo_from_joint(&joint, case)
}

pub(crate) fn holevo_from_joint(joint: &TripartiteCM, case: ProtocolCase) -> Result<f64> {
    let s_e = von_neumann_entropy(&joint.eve())?;
    let s_e_given_b = von_neumann_entropy(&eve_given_bob(joint, case)?)?;
    Ok(s_e - s_e_given_b)
}

/// `beta I_AB - chi_BE` at `(V, G)` with span `attack.span` untrusted.
pub fn kgr_composable(
    base: &LinkConfig,
    params: &SecurityParams,
    v: f64,
    g: f64,
    attack: AttackConfig,
) -> Result<KeyRateResult> {
    let link = params.case.configure(base, g);
    let g_max = admissible_gain_max(&link, v);
    if g > g_max * (1.0 + 1e-12) {
        return Err(Error::ConstraintViolation { v, gain: g, g_max });
    }
    let i_ab = mutual_information(&link, params.case, v)?;
    let chi_be = holevo_bob_eve_composable(&link, params.case, v, attack)?;
    Ok(KeyRateResult {
        kgr: params.beta * i_ab - chi_be,
        v_opt: v,
        g_opt: link.gain,
        g_max,
        i_ab,
        chi_be,
        constraint_active: link.amplifier != Amplifier::None && g_max > 1.0 && g >= g_max * (1.0 - 1e-9),
    })
}

/// Rate maximized over `(V, G)` under the case's power constraint.
pub fn optimize_composable(
    base: &LinkConfig,
    params: &SecurityParams,
    attack: AttackConfig,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    base.validate()?;
    attack.validate(base)?;
    let opt = if params.case == ProtocolCase::NoAmplifier {
        optimize_v(|v| Ok(kgr_composable(base, params, v, 1.0, attack)?.kgr), settings)?
    } else {
        let probe = params.case.configure(base, 1.0);
        optimize_vg(
            |v, g| Ok(kgr_composable(base, params, v, g, attack)?.kgr),
            |v| admissible_gain_max(&probe, v),
            settings,
        )?
    };
    let mut result = kgr_composable(base, params, opt.v, opt.g, attack)?;
    result.constraint_active = opt.constraint_active;
    Ok(result)
}

/// Optimized unamplified wiretap rate at the same fiber and attack position.
pub fn benchmark_composable(
    base: &LinkConfig,
    beta: f64,
    attack: AttackConfig,
    settings: &OptimizerSettings,
) -> Result<KeyRateResult> {
    let params = SecurityParams::new(beta, ProtocolCase::NoAmplifier)?;
    optimize_composable(&base.with_amplifier(Amplifier::None, 1.0), &params, attack, settings)
}

fn ratio(amplified: f64, benchmark: f64) -> Result<f64> {
    if !(benchmark > 0.0) {
        return Err(Error::Domain(format!("benchmark rate {benchmark:.3e} is not positive; key ratio undefined")));
    }
    Ok(amplified / benchmark)
}

/// `K_c(case) / K_c(no amplifier)`, both optimized.
pub fn key_ratio(
    base: &LinkConfig,
    params: &SecurityParams,
    attack: AttackConfig,
    settings: &OptimizerSettings,
) -> Result<f64> {
    let bench = benchmark_composable(base, params.beta, attack, settings)?;
    let amp = optimize_composable(base, params, attack, settings)?;
    ratio(amp.kgr, bench.kgr)
}

/// Key ratios over attack positions (outer index, `1..=M`) and lengths
/// (inner index). `None` where the benchmark rate is not positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioProfile {
    pub case: ProtocolCase,
    pub lengths_km: Vec<f64>,
    pub ratios: Vec<Vec<Option<f64>>>,
}

impl RatioProfile {
    /// True when every defined ratio of attack position `k` is within
    /// [`UNIT_RATIO_TOL`] of one.
    pub fn is_unit(&self, k: usize) -> bool {
        self.ratios[k - 1].iter().flatten().all(|r| (r - 1.0).abs() < UNIT_RATIO_TOL)
    }

    pub fn spans(&self) -> usize {
        self.ratios.len()
    }
}

/// Computes the ratio profile for `params.case` on every attack position.
/// `(k, L)` points are evaluated in parallel.
pub fn ratio_profile(
    base: &LinkConfig,
    params: &SecurityParams,
    lengths_km: &[f64],
    settings: &OptimizerSettings,
) -> Result<RatioProfile> {
    base.validate()?;
    let m = base.spans;
    let points: Vec<(usize, f64)> = (1..=m).flat_map(|k| lengths_km.iter().map(move |&l| (k, l))).collect();
    let values: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(k, l)| {
            let fiber = base.with_length(l);
            let attack = AttackConfig::new(k);
            let bench = benchmark_composable(&fiber, params.beta, attack, settings)?;
            if !(bench.kgr > 0.0) {
                return Ok(None);
            }
            let amp = optimize_composable(&fiber, params, attack, settings)?;
            Ok(Some(amp.kgr / bench.kgr))
        })
        .collect::<Result<_>>()?;
    let ratios = values.chunks(lengths_km.len().max(1)).map(<[_]>::to_vec).collect();
    Ok(RatioProfile { case: params.case, lengths_km: lengths_km.to_vec(), ratios })
}

/// Threshold attack position read off a ratio profile.
///
/// When Bob measures an amplified quadrature (cases I and IIa) this is the
/// smallest `k` such that the ratio is identically one for every `k' >= k`.
/// For the deamplified quadrature (case IIb) it is the largest `k` such that
/// the ratio is identically one for every `k' <= k` (0 if already `k = 1`
/// benefits).
pub fn threshold_from_profile(profile: &RatioProfile) -> Result<usize> {
    let m = profile.spans();
    match profile.case {
        ProtocolCase::PhaseInsensitive | ProtocolCase::AmplifiedQuadrature => {
            let mut k_th = m + 1;
            while k_th > 1 && profile.is_unit(k_th - 1) {
                k_th -= 1;
            }
            Ok(k_th)
        }
        ProtocolCase::DeamplifiedQuadrature => Ok((1..=m).take_while(|&k| profile.is_unit(k)).count()),
        ProtocolCase::NoAmplifier => domain("the unamplified benchmark has no threshold span"),
    }
}

/// Threshold attack position for `params.case` over the length grid.
pub fn threshold_span(
    base: &LinkConfig,
    params: &SecurityParams,
    lengths_km: &[f64],
    settings: &OptimizerSettings,
) -> Result<usize> {
    if params.case == ProtocolCase::NoAmplifier {
        return domain("the unamplified benchmark has no threshold span");
    }
    threshold_from_profile(&ratio_profile(base, params, lengths_km, settings)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_close(a: &CovarianceMatrix, b: &CovarianceMatrix, tol: f64) {
        for (x, y) in a.matrix().iter().zip(b.matrix().iter()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn generic_matches_closed_form() {
        let base = LinkConfig::new(70.0, 5, 0.05);
        for amp in [Amplifier::None, Amplifier::PhaseInsensitive, Amplifier::PhaseSensitive] {
            for k in 1..=5 {
                let link = base.with_amplifier(amp, 1.07);
                let a = build_tripartite_cm(&link, 6.0, AttackConfig::new(k)).unwrap();
                let b = tripartite_closed_form(&link, 6.0, AttackConfig::new(k)).unwrap();
                assert_close(a.cm(), b.cm(), 1e-10);
            }
        }
    }

    #[test]
    fn attack_is_invisible() {
        let link = LinkConfig::new(45.0, 4, 0.05).with_amplifier(Amplifier::PhaseSensitive, 1.05);
        for k in 1..=4 {
            let joint = build_tripartite_cm(&link, 9.0, AttackConfig::new(k)).unwrap();
            assert_close(&joint.alice_bob(), &shared_cm(&link, 9.0).unwrap(), 1e-10);
        }
    }

    #[test]
    fn noiseless_span_decouples_idler() {
        let link = LinkConfig::new(30.0, 3, 0.0);
        let joint = build_tripartite_cm(&link, 5.0, AttackConfig::new(2)).unwrap();
        let eve = joint.eve();
        assert_eq!(eve.block(1, 1), nalgebra::Matrix2::identity());
        assert_eq!(eve.block(0, 1), nalgebra::Matrix2::zeros());
        let d = eve.symplectic_eigenvalues().unwrap();
        assert!(d[0] > 1.0);
        assert_abs_diff_eq!(d[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn first_span_attack_ignores_gain_in_eve_marginal() {
        let base = LinkConfig::new(80.0, 5, 0.05);
        let attack = AttackConfig::new(1);
        let s = |g: f64| {
            let link = base.with_amplifier(Amplifier::PhaseInsensitive, g);
            von_neumann_entropy(&build_tripartite_cm(&link, 7.0, attack).unwrap().eve()).unwrap()
        };
        let s1 = s(1.0);
        for g in [1.05, 1.1, 1.3] {
            assert_abs_diff_eq!(s(g), s1, epsilon = 1e-12);
        }
    }

    #[test]
    fn tap_leaks_even_without_noise() {
        let link = LinkConfig::new(25.0, 2, 0.0);
        let chi = holevo_bob_eve_composable(&link, ProtocolCase::NoAmplifier, 10.0, AttackConfig::new(1)).unwrap();
        assert!(chi > 0.0);
    }

    #[test]
    fn no_modulation_no_key() {
        let base = LinkConfig::new(20.0, 2, 0.05);
        let p = SecurityParams::new(0.95, ProtocolCase::NoAmplifier).unwrap();
        let r = kgr_composable(&base, &p, 1.0, 1.0, AttackConfig::new(2)).unwrap();
        assert_abs_diff_eq!(r.i_ab, 0.0, epsilon = 1e-12);
        assert!(r.kgr <= 1e-12);
    }

    #[test]
    fn unit_gain_reduces_to_benchmark() {
        let base = LinkConfig::new(60.0, 5, 0.05);
        let attack = AttackConfig::new(3);
        let n = kgr_composable(&base, &SecurityParams::new(0.95, ProtocolCase::NoAmplifier).unwrap(), 8.0, 1.0, attack)
            .unwrap();
        for case in
            [ProtocolCase::PhaseInsensitive, ProtocolCase::AmplifiedQuadrature, ProtocolCase::DeamplifiedQuadrature]
        {
            let r = kgr_composable(&base, &SecurityParams::new(0.95, case).unwrap(), 8.0, 1.0, attack).unwrap();
            assert_abs_diff_eq!(r.kgr, n.kgr, epsilon = 1e-10);
        }
    }

    #[test]
    fn attack_position_is_validated() {
        let link = LinkConfig::new(20.0, 3, 0.05);
        assert!(build_tripartite_cm(&link, 3.0, AttackConfig::new(0)).is_err());
        assert!(build_tripartite_cm(&link, 3.0, AttackConfig::new(4)).is_err());
    }

    #[test]
    fn threshold_rules() {
        let unit = Some(1.0);
        let up = Some(1.5);
        let profile =
            |case, rows: Vec<Vec<Option<f64>>>| RatioProfile { case, lengths_km: vec![1.0, 2.0], ratios: rows };
        let amp = profile(
            ProtocolCase::PhaseInsensitive,
            vec![vec![up, up], vec![unit, up], vec![unit, unit], vec![unit, None]],
        );
        assert_eq!(threshold_from_profile(&amp).unwrap(), 3);
        let de = profile(
            ProtocolCase::DeamplifiedQuadrature,
            vec![vec![unit, unit], vec![unit, unit], vec![unit, up], vec![up, up]],
        );
        assert_eq!(threshold_from_profile(&de).unwrap(), 2);
        let none = profile(ProtocolCase::AmplifiedQuadrature, vec![vec![up, up], vec![up, up]]);
        assert_eq!(threshold_from_profile(&none).unwrap(), 3);
    }
}
