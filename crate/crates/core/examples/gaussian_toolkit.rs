//! Builds a two-mode squeezed vacuum, sends one arm through a thermal-loss
//! channel and a phase-sensitive amplifier, and reports spectra, entropies
//! and the state after Bob's homodyne.

use multispan_qkd::gaussian::{apply_cp, condition_on_measurement, embed_on_modes, tmsv_cm};
use multispan_qkd::link::{amplifier_map, thermal_loss_map};
use multispan_qkd::{Amplifier, MeasurementKind, Quadrature};

fn main() -> multispan_qkd::Result<()> {
    let v = 10.0;
    let state = tmsv_cm(v)?;
    println!(
        "TMSV V = {v}: symplectic spectrum {:?}, entropy {:.6} bits",
        state.symplectic_eigenvalues()?,
        state.entropy()?
    );

    let channel = thermal_loss_map(0.5, 0.02)?.then(&amplifier_map(Amplifier::PhaseSensitive, 1.4)?)?;
    let shared = apply_cp(&state, &embed_on_modes(&channel, &[1], 2)?)?;
    println!("after loss and amplification:\n{}", shared.matrix());
    let d = shared.symplectic_eigenvalues()?;
    println!("spectrum {:?}, physical: {}", d, shared.is_physical());

    for quad in [Quadrature::Q, Quadrature::P] {
        let cond = condition_on_measurement(&shared, 1, MeasurementKind::homodyne(quad))?;
        println!("Alice given Bob's {quad:?} homodyne: det {:.6}", cond.determinant());
    }
    let het = condition_on_measurement(&shared, 1, MeasurementKind::Heterodyne)?;
    println!("Alice given Bob's heterodyne: det {:.6}", het.determinant());
    Ok(())
}
