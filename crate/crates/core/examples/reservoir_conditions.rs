//! Regularity report and thermodynamic table for each reservoir family.

use rmt_thermal::reservoir::{check_conditions, ReservoirModel, DEFAULT_A_CANDIDATES};
use rmt_thermal::thermo::{darwin_fowler_mu, entropy_rate, saddle_beta};

fn main() -> rmt_thermal::Result<()> {
    let j = 16;
    let families = [
        (ReservoirModel::gaussian(0.0, 1.0, j)?, [-1.0, -0.5, 0.5]),
        (ReservoirModel::exponential(1.0, j)?, [0.5, 1.0, 2.0]),
        (ReservoirModel::lattice(1, 1.0, j)?, [0.2, 0.5, 0.8]),
        (ReservoirModel::lattice(2, 1.0, j)?, [0.5, 1.0, 1.5]),
    ];
    for (m, eps) in &families {
        let rep = check_conditions(m, &DEFAULT_A_CANDIDATES, 1.0)?;
        println!("{:?}", m.family);
        println!(
            "  a = {}, J0 = {}, sup |phi| on |t| >= 1: {:.4}, superexponential left tail: {}",
            rep.a_exponent, rep.hausdorff_young_j0, rep.char_fn_gap, rep.left_tail_superexponential
        );
        println!("  {:>8} {:>10} {:>12} {:>14}", "eps", "beta", "s(eps)", "mu_J(eps)");
        let unit = m.with_j(1);
        for &e in eps {
            let b = saddle_beta(&unit, e)?;
            println!("  {:>8.3} {:>10.5} {:>12.6} {:>14.6e}", e, b, entropy_rate(&unit, e)?, darwin_fowler_mu(&unit, e, j)?);
        }
    }
    Ok(())
}
