//! Effective transmissivities and noises of a phase-sensitive chain as the
//! number of spans grows at fixed overall gain, against the continuous limit.

use multispan_qkd::link::{continuous_limit_for, effective_channel};
use multispan_qkd::{Amplifier, LinkConfig};

fn main() -> multispan_qkd::Result<()> {
    let g_inf = 1.5;
    let fiber = LinkConfig::new(100.0, 1, 0.05);
    let limit = continuous_limit_for(&fiber, g_inf)?;
    println!("L = 100 km, overall gain {g_inf}");
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "M", "t_q", "n_q", "t_p", "n_p");
    for m in [1, 2, 4, 8, 16, 64, 256] {
        let link = fiber.with_spans(m).with_amplifier(Amplifier::PhaseSensitive, g_inf.powf(1.0 / m as f64));
        let c = effective_channel(&link);
        println!("{m:>5} {:>10.5} {:>10.4} {:>10.5} {:>10.4}", c.t_q, c.n_q, c.t_p, c.n_p);
    }
    println!("{:>5} {:>10.5} {:>10.4} {:>10.5} {:>10.4}", "inf", limit.t_q, limit.n_q, limit.t_p, limit.n_p);
    Ok(())
}
