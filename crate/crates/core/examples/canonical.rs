//! Canonically weighted reduced state against the Gibbs state of H_S.

use rmt_thermal::ensemble::SystemSpec;
use rmt_thermal::gibbs::{canonical_reduced_dm, gibbs_reference};
use rmt_thermal::numerics::{CMatrix, HermitianMatrix, C64};
use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::selfconsistent::SolverOptions;

fn main() -> rmt_thermal::Result<()> {
    let mut sx = CMatrix::zeros(2, 2);
    sx[(0, 1)] = C64::new(1.0, 0.0);
    sx[(1, 0)] = C64::new(1.0, 0.0);
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.5, -0.5]), HermitianMatrix::new(sx)?)?;
    let model = ReservoirModel::gaussian(0.0, 1.0, 8)?;
    let opts = SolverOptions::default();
    println!("{:>5} {:>5} {:>12} {:>12}", "beta", "J", "rho_11", "D to Gibbs");
    for &beta in &[0.5, 1.0] {
        let g = gibbs_reference(&sys.h_s, beta)?;
        for &j in &[8u32, 16, 32] {
            let c = canonical_reduced_dm(&sys, &model, beta, j, &opts)?;
            println!("{:>5} {:>5} {:>12.6} {:>12.4e}", beta, j, c.rho.matrix()[(1, 1)].re, c.rho.trace_distance(&g));
        }
        println!("{:>5} {:>5} {:>12.6}", beta, "Gibbs", g.matrix()[(1, 1)].re);
    }
    Ok(())
}
