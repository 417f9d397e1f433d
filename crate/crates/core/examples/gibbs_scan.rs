//! Trace distance between the normalized spectral density at E = J eps and the
//! Gibbs state at beta(eps), for growing block count J.

use rmt_thermal::ensemble::SystemSpec;
use rmt_thermal::gibbs::gibbs_ratio_scan;
use rmt_thermal::numerics::{CMatrix, HermitianMatrix, C64};
use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::selfconsistent::SolverOptions;

fn main() -> rmt_thermal::Result<()> {
    // non-commuting H_S and Sigma so the dressing does not vanish identically
    let mut sx = CMatrix::zeros(2, 2);
    sx[(0, 1)] = C64::new(1.0, 0.0);
    sx[(1, 0)] = C64::new(1.0, 0.0);
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.5, -0.5]), HermitianMatrix::new(sx)?)?;
    let model = ReservoirModel::gaussian(0.0, 1.0, 8)?;
    let rep = gibbs_ratio_scan(&sys, &model, -1.0, &[8, 16, 32, 64, 128], &SolverOptions::default())?;
    println!("beta = {}", rep.beta);
    println!("{:>5} {:>12} {:>16}", "J", "D_J", "|gamma/mu - e^-bH|");
    for r in &rep.rows {
        println!("{:>5} {:>12.4e} {:>16.4e}", r.j, r.trace_distance, r.ratio_deviation);
    }
    println!("fitted rate {:.3}", rep.fitted_rate);
    Ok(())
}
