//! Optimized key rates with the whole link untrusted, for the unamplified
//! benchmark and both phase-sensitive measurement choices.

use multispan_qkd::unconditional::{max_secure_distance, optimize_unconditional};
use multispan_qkd::{LinkConfig, OptimizerSettings, ProtocolCase, SecurityParams};

fn main() -> multispan_qkd::Result<()> {
    let settings = OptimizerSettings::default();
    let spans = 10;
    let cases = [ProtocolCase::NoAmplifier, ProtocolCase::AmplifiedQuadrature, ProtocolCase::DeamplifiedQuadrature];

    println!("M = {spans}, eps = 0.05, beta = 0.95");
    println!("{:>6} {:>5} {:>12} {:>9} {:>8}", "L_km", "case", "kgr_bits", "v_opt", "g_opt");
    for l in [10.0, 50.0, 100.0, 130.0] {
        for case in cases {
            let params = SecurityParams::new(0.95, case)?;
            let r = optimize_unconditional(&LinkConfig::new(l, spans, 0.05), &params, &settings)?;
            println!("{l:>6} {:>5} {:>12.4e} {:>9.3} {:>8.5}", case.label(), r.kgr, r.v_opt, r.g_opt);
        }
    }
    for case in [ProtocolCase::NoAmplifier, ProtocolCase::DeamplifiedQuadrature] {
        let params = SecurityParams::new(0.95, case)?;
        let d = max_secure_distance(&LinkConfig::new(0.0, spans, 0.05), &params, &settings, 400.0)?;
        println!("secure distance, case {}: {:?} km", case.label(), d);
    }
    Ok(())
}
