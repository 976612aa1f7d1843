//! Holevo-capacity upper bound against the Shannon-rate key for a
//! phase-insensitive link with one untrusted span.

use multispan_qkd::composable::{optimize_composable, AttackConfig};
use multispan_qkd::ultimate::{ultimate_benchmark, ultimate_kgr};
use multispan_qkd::{LinkConfig, OptimizerSettings, ProtocolCase, SecurityParams};

fn main() -> multispan_qkd::Result<()> {
    let settings = OptimizerSettings::default();
    let params = SecurityParams::new(0.95, ProtocolCase::PhaseInsensitive)?;
    let base = LinkConfig::new(100.0, 10, 0.05);
    println!("L = 100 km, M = 10");
    println!("{:>3} {:>12} {:>12} {:>12} {:>8}", "k", "upper", "shannon", "upper_n", "g_opt");
    for k in [1, 3, 5, 7, 10] {
        let attack = AttackConfig::new(k);
        let upper = ultimate_kgr(&base, &params, attack, &settings)?;
        let lower = optimize_composable(&base, &params, attack, &settings)?;
        let bench = ultimate_benchmark(&base, params.beta, attack, &settings)?;
        println!(
            "{k:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>8.5}",
            upper.kgr_upper, lower.kgr, bench.kgr_upper, upper.g_opt
        );
    }
    Ok(())
}
