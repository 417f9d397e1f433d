//! Real-axis spectral density gamma_J(E) of a coupled qubit and its total mass.

use rmt_thermal::ensemble::SystemSpec;
use rmt_thermal::numerics::{trace, CMatrix, HermitianMatrix, C64};
use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::selfconsistent::{gamma_density, SolverOptions};

fn main() -> rmt_thermal::Result<()> {
    let mut sx = CMatrix::zeros(2, 2);
    sx[(0, 1)] = C64::new(0.5, 0.0);
    sx[(1, 0)] = C64::new(0.5, 0.0);
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.0, 1.0]), HermitianMatrix::new(sx)?)?;
    let model = ReservoirModel::gaussian(0.0, 1.0, 4)?;
    let grid: Vec<f64> = (0..=100).map(|k| -9.0 + 19.0 * k as f64 / 100.0).collect();
    let d = gamma_density(&sys, &model, &grid, &SolverOptions::default())?;
    println!("{:>8} {:>12} {:>12} {:>12}", "E", "gamma_00", "gamma_11", "Re gamma_01");
    for (i, e) in grid.iter().enumerate().step_by(5) {
        let g = d.value(i);
        println!("{:>8.3} {:>12.6} {:>12.6} {:>12.6}", e, g[(0, 0)].re, g[(1, 1)].re, g[(0, 1)].re);
    }
    let mass = d.total_mass();
    println!("total mass: diag ({:.6}, {:.6}), off-diagonal {:.2e}, trace {:.6}", mass[(0, 0)].re, mass[(1, 1)].re, mass[(0, 1)].norm(), trace(&mass).re);
    Ok(())
}
