//! Largest tolerable excess noise against link length for several span counts.

use multispan_qkd::unconditional::max_tolerable_noise;
use multispan_qkd::{LinkConfig, OptimizerSettings, ProtocolCase, SecurityParams};

fn main() -> multispan_qkd::Result<()> {
    let settings = OptimizerSettings::default();
    let bench = SecurityParams::new(0.95, ProtocolCase::NoAmplifier)?;
    let psa = SecurityParams::new(0.95, ProtocolCase::DeamplifiedQuadrature)?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "L_km", "n", "IIb M=2", "IIb M=5", "IIb M=10");
    for l in [10.0, 50.0, 100.0, 150.0] {
        let mut row = vec![max_tolerable_noise(&LinkConfig::new(l, 1, 0.0), &bench, &settings)?];
        for m in [2, 5, 10] {
            row.push(max_tolerable_noise(&LinkConfig::new(l, m, 0.0), &psa, &settings)?);
        }
        let cells: Vec<String> = row.iter().map(|e| format!("{e:>10.4}")).collect();
        println!("{l:>6} {}", cells.join(" "));
    }
    Ok(())
}
