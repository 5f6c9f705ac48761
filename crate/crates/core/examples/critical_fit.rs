//! Susceptibility scan at fixed lambda0 (Ohmic bath), refinement towards the
//! localization onset, and the critical power-law fit.
//!
//! cargo run --release --example critical_fit -- [lambda0] [eta_max] [points]

use dissipative_rg::critical::{critical_scan, fit_power_law, instanton_critical, Setup, WINDOW_INTERVALS};
use dissipative_rg::flow::FlowConfig;
use dissipative_rg::model::ModelParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let lambda0 = args.first().copied().unwrap_or(1.0);
    let eta_max = args.get(1).copied().unwrap_or(45.0 * lambda0);
    let points = args.get(2).copied().unwrap_or(16.0) as usize;

    let setup = Setup::with_default_grid(ModelParams::new(lambda0)?, FlowConfig::ohmic_default())?;
    let scan = critical_scan(&setup, 1, eta_max, points, WINDOW_INTERVALS)?;

    println!("{:>12} {:>24} {:>14}", "eta", "status", "chi");
    for p in &scan.points {
        let chi = p.chi.map_or("-".to_string(), |c| format!("{c:.6e}"));
        println!("{:>12.6} {:>24} {:>14}", p.eta, p.status.as_str(), chi);
    }
    println!("window has {} points", scan.window().len());
    let fit = fit_power_law(&scan)?;
    println!(
        "eta_c = {:.6}  gamma = {:.4}  C = {:.4}  R^2 = {:.6}  (instanton: {:.4})",
        fit.eta_c,
        fit.gamma,
        fit.c,
        fit.r_squared,
        instanton_critical(lambda0)
    );
    Ok(())
}
