//! Two-point function at large imaginary-time separation. Without damping it
//! decays exponentially; any eta > 0 leaves an eta / (pi m^4 tau^2) tail.
//!
//! cargo run --release --example correlator -- [eta]

use std::f64::consts::PI;

use dissipative_rg::spectra::long_range_correlator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eta: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1.0);
    println!("{:>8} {:>6} {:>16} {:>16} {:>12}", "tau", "m^2", "G(eta=0)", "G(eta)", "tau^2 G");
    for m2 in [1.0, 4.0] {
        for tau in [1.0, 10.0, 100.0, 1000.0] {
            let free = long_range_correlator(tau, 0.0, m2)?.value;
            let damped = long_range_correlator(tau, eta, m2)?.value;
            println!("{tau:>8} {m2:>6} {free:>16.6e} {damped:>16.6e} {:>12.6}", tau * tau * damped);
        }
        println!("tail amplitude eta/(pi m^4) = {:.6}", eta / (PI * m2 * m2));
    }
    Ok(())
}
