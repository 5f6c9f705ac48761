//! Effective mass against eta for several bath exponents at lambda_uv = 100.
//! s = 1 and 5 suppress the mass, s = 3 enhances it and only exists up to
//! the hard cutoff eta < 1/lambda_uv.
//!
//! cargo run --release --example s_comparison -- [lambda0]

use dissipative_rg::critical::{scan_eta, Setup};
use dissipative_rg::flow::FlowConfig;
use dissipative_rg::model::ModelParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda0: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(0.4);
    let setup = Setup::with_default_grid(ModelParams::new(lambda0)?, FlowConfig::comparison_default())?;

    let small = [0.0, 0.002, 0.004, 0.006, 0.008, 0.0099];
    println!("near eta = 0");
    println!("{:>10} {:>12} {:>12} {:>12}", "eta", "s=1", "s=3", "s=5");
    let scans = [1, 3, 5].map(|s| scan_eta(&setup, s, &small));
    for (k, eta) in small.iter().enumerate() {
        print!("{eta:>10}");
        for scan in &scans {
            let p = &scan.as_ref().map_err(|e| e.to_string())?.points[k];
            print!("{:>12}", p.m_eff_sq.map_or(p.status.as_str().into(), |m| format!("{m:.6}")));
        }
        println!();
    }

    let wide: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
    let s1 = scan_eta(&setup, 1, &wide)?;
    let s5 = scan_eta(&setup, 5, &wide)?;
    println!("s = 1 against s = 5");
    println!("{:>10} {:>12} {:>12}", "eta", "s=1", "s=5");
    for (a, b) in s1.points.iter().zip(&s5.points) {
        let show = |m: Option<f64>| m.map_or("-".into(), |m| format!("{m:.6}"));
        println!("{:>10} {:>12} {:>12}", a.eta, show(a.m_eff_sq), show(b.m_eff_sq));
    }
    Ok(())
}
