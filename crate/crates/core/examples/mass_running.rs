//! Running of the curvature at the origin, m^2(Lambda), for a few Ohmic
//! couplings. Damping slows the rise and past the transition m^2 stays negative.
//!
//! cargo run --release --example mass_running -- [lambda0] [eta...]

use dissipative_rg::critical::default_half_width;
use dissipative_rg::flow::{integrate_flow_with_snapshots, log_scales, FlowConfig};
use dissipative_rg::grid::PotentialGrid;
use dissipative_rg::model::{DissipationSpec, ModelParams};
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let lambda0 = args.first().copied().unwrap_or(0.4);
    let etas = if args.len() > 1 { args[1..].to_vec() } else { vec![0.0, 4.0, 8.0, 11.0, 14.0] };

    let p = ModelParams::new(lambda0)?;
    let grid = PotentialGrid::init_from_bare(&p, default_half_width(&p), 801)?;
    let cfg = FlowConfig::ohmic_default();
    let scales = log_scales(cfg.lambda_uv, cfg.lambda_ir, 2);
    let runs = etas
        .par_iter()
        .map(|&eta| {
            let spec = DissipationSpec::new(1, eta)?;
            Ok(integrate_flow_with_snapshots(&grid, &spec, &cfg, &scales)?)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error + Send + Sync>>>()
        .map_err(|e| e.to_string())?;

    print!("{:>12}", "Lambda");
    for eta in &etas {
        print!("{:>14}", format!("eta={eta}"));
    }
    println!();
    for (k, lambda) in scales.iter().enumerate().skip(1) {
        print!("{lambda:>12.3e}");
        for (_, snaps) in &runs {
            print!("{:>14}", snaps.get(k - 1).map_or("-".into(), |s| format!("{:.6}", s.curvature_at_origin())));
        }
        println!();
    }
    for (eta, (r, _)) in etas.iter().zip(&runs) {
        println!("eta = {eta}: {}", r.status.as_str());
    }
    Ok(())
}
