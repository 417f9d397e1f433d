//! Saddle-point density mu_J(eps) against the exact block-sum density nu_J(J eps).

use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::thermo::darwin_fowler_mu;

fn main() -> rmt_thermal::Result<()> {
    let cases = [
        (ReservoirModel::exponential(1.0, 1)?, 0.5),
        (ReservoirModel::lattice(1, 1.0, 1)?, 0.3),
        (ReservoirModel::lattice(2, 1.0, 1)?, 0.6),
    ];
    for (m, eps) in &cases {
        println!("{:?}, eps = {eps}", m.family);
        println!("  {:>4} {:>14} {:>14} {:>10}", "J", "nu_J(J eps)", "mu_J(eps)", "ratio - 1");
        for &j in &[4u32, 8, 16, 32, 64] {
            let nu = m.with_j(j).dos(j as f64 * eps)?;
            let mu = darwin_fowler_mu(m, *eps, j)?;
            println!("  {:>4} {:>14.6e} {:>14.6e} {:>10.2e}", j, nu, mu, nu / mu - 1.0);
        }
    }
    Ok(())
}
