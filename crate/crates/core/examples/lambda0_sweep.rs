//! Critical coupling and exponent over a range of lambda0, next to the dilute
//! instanton value 2 pi lambda0. Slow: a full critical scan per coupling.
//!
//! cargo run --release --example lambda0_sweep -- [lambda0...]

use dissipative_rg::critical::{critical_scan, fit_power_law, instanton_critical, Setup, WINDOW_INTERVALS};
use dissipative_rg::flow::FlowConfig;
use dissipative_rg::model::ModelParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut lambdas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if lambdas.is_empty() {
        lambdas = vec![0.1, 0.4, 0.7, 1.0];
    }
    println!("{:>8} {:>12} {:>12} {:>8} {:>10}", "lambda0", "eta_c", "2pi*l0", "gamma", "R^2");
    for l in lambdas {
        let setup = Setup::with_default_grid(ModelParams::new(l)?, FlowConfig::ohmic_default())?;
        let scan = critical_scan(&setup, 1, 45.0 * l, 16, WINDOW_INTERVALS)?;
        match fit_power_law(&scan) {
            Ok(f) => println!(
                "{l:>8} {:>12.5} {:>12.5} {:>8.4} {:>10.6}",
                f.eta_c,
                instanton_critical(l),
                f.gamma,
                f.r_squared
            ),
            Err(e) => println!("{l:>8} fit failed: {e}"),
        }
    }
    Ok(())
}
