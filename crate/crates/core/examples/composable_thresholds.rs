//! Key ratios when only one span is untrusted, and the threshold attack
//! position read off a coarse length grid.

use multispan_qkd::composable::{key_ratio, ratio_profile, threshold_from_profile, AttackConfig};
use multispan_qkd::{LinkConfig, OptimizerSettings, ProtocolCase, SecurityParams};

fn main() -> multispan_qkd::Result<()> {
    let settings = OptimizerSettings::default();
    let base = LinkConfig::new(120.0, 5, 0.05);
    let cases =
        [ProtocolCase::PhaseInsensitive, ProtocolCase::AmplifiedQuadrature, ProtocolCase::DeamplifiedQuadrature];

    println!("key ratio at L = 120 km, M = 5");
    for case in cases {
        let params = SecurityParams::new(0.95, case)?;
        let ratios = (1..=5)
            .map(|k| key_ratio(&base, &params, AttackConfig::new(k), &settings).map(|r| format!("{r:.4}")))
            .collect::<multispan_qkd::Result<Vec<_>>>()?;
        println!("  {:>3}: {}", case.label(), ratios.join("  "));
    }

    // a coarse grid is enough to see the thresholds
    let lengths: Vec<f64> = (0..20).map(|i| 1.0 + 10.0 * i as f64).collect();
    for case in cases {
        let params = SecurityParams::new(0.95, case)?;
        let profile = ratio_profile(&base, &params, &lengths, &settings)?;
        println!("threshold attack position, case {}: {}", case.label(), threshold_from_profile(&profile)?);
    }
    Ok(())
}
