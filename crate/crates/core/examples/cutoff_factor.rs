//! The dissipative cutoff factor f(E) = E^2 / (E^2 + sigma eta |E|^s) for a
//! few bath exponents, with the scale E_c where it halves or blows up.
//!
//! cargo run --example cutoff_factor -- [eta]

use dissipative_rg::model::DissipationSpec;
use dissipative_rg::spectra::CutoffProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eta: f64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1.0);
    let profiles = [1, 3, 5, 7]
        .into_iter()
        .map(|s| DissipationSpec::new(s, eta).map(CutoffProfile::new))
        .collect::<Result<Vec<_>, _>>()?;

    for p in &profiles {
        println!("s = {}: {:?}, E_c = {:?}", p.spec.s(), p.spec.regime(), p.e_c);
    }
    print!("{:>12}", "E");
    for p in &profiles {
        print!("{:>14}", format!("s={}", p.spec.s()));
    }
    println!();
    let tables: Vec<_> = profiles.iter().map(|p| p.table(1e-2, 1e2, 17)).collect();
    for k in 0..17 {
        print!("{:>12.4e}", tables[0][k].0);
        for t in &tables {
            // a pole (s = 3, 7 at E_c) has no value
            print!("{:>14}", t[k].1.map_or("pole".into(), |f| format!("{f:.6}")));
        }
        println!();
    }
    Ok(())
}
