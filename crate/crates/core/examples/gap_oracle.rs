//! Exact lowest levels of the bare double well against the effective mass
//! from the flow at eta = 0.
//!
//! cargo run --release --example gap_oracle -- [lambda0...]

use dissipative_rg::critical::{evaluate_point, PointStatus, Setup};
use dissipative_rg::flow::FlowConfig;
use dissipative_rg::model::ModelParams;
use dissipative_rg::oracle::{default_half_width, solve_schrodinger_extrapolated, DEFAULT_NODES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut lambdas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if lambdas.is_empty() {
        lambdas = vec![0.05, 0.1, 0.2, 0.4, 1.0, 2.0, 5.0];
    }
    println!("{:>8} {:>14} {:>14} {:>12} {:>12} {:>9}", "lambda0", "E0", "E1", "gap", "m_eff", "diff");
    for l in lambdas {
        let p = ModelParams::new(l)?;
        let exact = solve_schrodinger_extrapolated(&p, default_half_width(&p), DEFAULT_NODES, 2)?;
        let gap = exact.gap()?;
        let point = evaluate_point(&Setup::with_default_grid(p, FlowConfig::ohmic_default())?, 1, 0.0)?;
        // a flow that keeps two minima has no gap estimate
        let m = point.m_eff_sq.filter(|_| point.status == PointStatus::Converged).map(f64::sqrt);
        println!(
            "{l:>8} {:>14.9} {:>14.9} {gap:>12.8} {:>12} {:>9}",
            exact.energies[0],
            exact.energies[1],
            m.map_or(point.status.as_str().into(), |m| format!("{m:.8}")),
            m.map_or("-".into(), |m| format!("{:+.2}%", 100.0 * (m / gap - 1.0))),
        );
    }
    Ok(())
}
