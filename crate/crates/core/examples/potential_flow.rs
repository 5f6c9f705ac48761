//! Flows the bare double well without dissipation and prints snapshots of the
//! potential: the barrier is washed out and a single well is left.
//!
//! cargo run --release --example potential_flow -- [lambda0]

use dissipative_rg::critical::default_half_width;
use dissipative_rg::flow::{integrate_flow_with_snapshots, log_scales, FlowConfig};
use dissipative_rg::grid::PotentialGrid;
use dissipative_rg::model::{DissipationSpec, ModelParams};
use dissipative_rg::observables::observe;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda0: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0.1);
    let p = ModelParams::new(lambda0)?;
    let grid = PotentialGrid::init_from_bare(&p, default_half_width(&p), 801)?;
    let cfg = FlowConfig::ohmic_default();
    let none = DissipationSpec::none();
    let scales = log_scales(cfg.lambda_uv, cfg.lambda_ir, 1);
    let (result, snaps) = integrate_flow_with_snapshots(&grid, &none, &cfg, &scales)?;

    let qs = [0.0, 0.5 * p.well_position(), p.well_position(), 1.5 * p.well_position()];
    print!("{:>12}", "Lambda");
    for q in qs {
        print!("{:>14}", format!("V({q:.3})"));
    }
    println!();
    let at = |g: &PotentialGrid, q: f64| g.values()[g.center() + (q / g.spacing()).round() as usize];
    for s in &snaps {
        print!("{:>12.3e}", s.lambda);
        for q in qs {
            print!("{:>14.6}", at(&s.grid, q));
        }
        println!();
    }
    let o = observe(&result.final_grid, &none)?;
    println!(
        "{:?}: V''(0) {:.4} -> {:.4}, E0 = {:.6}, m_eff = {:.6}",
        result.status,
        grid.curvature_at_origin(),
        result.final_grid.curvature_at_origin(),
        o.e0,
        o.m_eff().unwrap_or(f64::NAN)
    );
    Ok(())
}
