//! Upper bound on the restricted-eavesdropping rate when the Alice-Bob term
//! is replaced by the Holevo capacity of the link.
//!
//! Only phase-insensitive links are supported; the phase-sensitive capacity
//! is not covered by this model.
//!
//! The reconciliation efficiency multiplies `chi_AB` exactly as for the
//! Shannon term, even though a Holevo quantity is not something error
//! correction reconciles.

use crate::composable::{holevo_bob_eve_composable, AttackConfig};
use crate::error::{Error, Result};
use crate::gaussian::{condition_on_measurement, entropy_h, MeasurementKind, Quadrature};
use crate::link::{admissible_gain_max, shared_cm, Amplifier, LinkConfig};
use crate::optimize::{optimize_v, optimize_vg, OptimizerSettings};
use crate::protocol::{ProtocolCase, SecurityParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltimateResult {
    pub kgr_upper: f64,
    pub chi_ab: f64,
    pub chi_be: f64,
    pub v_opt: f64,
    pub g_opt: f64,
}

fn check_supported(link: &LinkConfig) -> Result<()> {
    if link.amplifier == Amplifier::PhaseSensitive {
        return Err(Error::Unsupported(
            "the Holevo-capacity bound is only available for phase-insensitive or unamplified links".into(),
        ));
    }
    Ok(())
}

/// `sqrt(det sigma_{A|B})` for Bob's `q` homodyne.
pub fn conditional_alice_determinant_root(link: &LinkConfig, v: f64) -> Result<f64> {
    let cond = condition_on_measurement(&shared_cm(link, v)?, 1, MeasurementKind::homodyne(Quadrature::Q))?;
    Ok(cond.determinant().max(1.0).sqrt())
}

/// Holevo information `h(V) - h(sqrt(det sigma_{A|B}))` between Alice's
/// ensemble and Bob's output.
pub fn holevo_capacity_ab(link: &LinkConfig, v: f64) -> Result<f64> {
    check_supported(link)?;
    Ok(entropy_h(v)? - entropy_h(conditional_alice_determinant_root(link, v)?)?)
}

fn evaluate(link: &LinkConfig, beta: f64, v: f64, attack: AttackConfig) -> Result<(f64, f64, f64)> {
    let case = match link.amplifier {
        Amplifier::None => ProtocolCase::NoAmplifier,
        _ => ProtocolCase::PhaseInsensitive,
    };
    let chi_ab = holevo_capacity_ab(link, v)?;
    let chi_be = holevo_bob_eve_composable(link, case, v, attack)?;
    Ok((beta * chi_ab - chi_be, chi_ab, chi_be))
}

fn finish(
    base: &LinkConfig,
    beta: f64,
    attack: AttackConfig,
    case: ProtocolCase,
    v: f64,
    g: f64,
) -> Result<UltimateResult> {
    let link = case.configure(base, g);
    let (kgr_upper, chi_ab, chi_be) = evaluate(&link, beta, v, attack)?;
    Ok(UltimateResult { kgr_upper, chi_ab, chi_be, v_opt: v, g_opt: link.gain })
}

/// `max_{V,G} [beta chi_AB - chi_BE]` for phase-insensitive amplifiers
/// under the gain constraint.
pub fn ultimate_kgr(
    base: &LinkConfig,
    params: &SecurityParams,
    attack: AttackConfig,
    settings: &OptimizerSettings,
) -> Result<UltimateResult> {
    base.validate()?;
    attack.validate(base)?;
    match params.case {
        ProtocolCase::PhaseInsensitive => {}
        ProtocolCase::NoAmplifier => return ultimate_benchmark(base, params.beta, attack, settings),
        other => {
            return Err(Error::Unsupported(format!("the Holevo-capacity bound is not available for case {other}")))
        }
    }
    let case = ProtocolCase::PhaseInsensitive;
    let probe = case.configure(base, 1.0);
    let opt = optimize_vg(
        |v, g| {
            let link = case.configure(base, g);
            let g_max = admissible_gain_max(&link, v);
            if g > g_max * (1.0 + 1e-12) {
                return Err(Error::ConstraintViolation { v, gain: g, g_max });
            }
            Ok(evaluate(&link, params.beta, v, attack)?.0)
        },
        |v| admissible_gain_max(&probe, v),
        settings,
    )?;
    finish(base, params.beta, attack, case, opt.v, opt.g)
}

/// Holevo-capacity rate of the unamplified link, optimized over `V`.
pub fn ultimate_benchmark(
    base: &LinkConfig,
    beta: f64,
    attack: AttackConfig,
    settings: &OptimizerSettings,
) -> Result<UltimateResult> {
    let link = base.with_amplifier(Amplifier::None, 1.0);
    link.validate()?;
    attack.validate(&link)?;
    let opt = optimize_v(|v| Ok(evaluate(&link, beta, v, attack)?.0), settings)?;
    finish(&link, beta, attack, ProtocolCase::NoAmplifier, opt.v, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unconditional::mutual_information;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lossless_capacity_is_entropy_of_modulation() {
        let link = LinkConfig::new(0.0, 1, 0.0);
        assert_abs_diff_eq!(holevo_capacity_ab(&link, 3.0).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn holevo_exceeds_shannon() {
        for l in [0.0, 20.0, 80.0, 150.0] {
            for g in [1.0, 1.03, 1.1] {
                let link = LinkConfig::new(l, 5, 0.05).with_amplifier(Amplifier::PhaseInsensitive, g);
                for v in [1.5, 4.0, 20.0, 90.0] {
                    let chi = holevo_capacity_ab(&link, v).unwrap();
                    let i = mutual_information(&link, ProtocolCase::PhaseInsensitive, v).unwrap();
                    assert!(chi >= i - 1e-12, "L={l} G={g} V={v}: {chi} < {i}");
                }
            }
        }
    }

    #[test]
    fn phase_sensitive_is_rejected() {
        let link = LinkConfig::new(10.0, 2, 0.05).with_amplifier(Amplifier::PhaseSensitive, 1.01);
        assert!(matches!(holevo_capacity_ab(&link, 3.0), Err(Error::Unsupported(_))));
        let p = SecurityParams::new(0.95, ProtocolCase::AmplifiedQuadrature).unwrap();
        let s = OptimizerSettings::default();
        assert!(ultimate_kgr(&LinkConfig::new(10.0, 2, 0.05), &p, AttackConfig::new(1), &s).is_err());
    }

    #[test]
    fn bound_dominates_shannon_rate() {
        let s = OptimizerSettings::default();
        let base = LinkConfig::new(60.0, 5, 0.05);
        let p = SecurityParams::new(0.95, ProtocolCase::PhaseInsensitive).unwrap();
        let attack = AttackConfig::new(2);
        let upper = ultimate_kgr(&base, &p, attack, &s).unwrap();
        let lower = crate::composable::optimize_composable(&base, &p, attack, &s).unwrap();
        assert!(upper.kgr_upper >= lower.kgr - 1e-9);
    }
}
