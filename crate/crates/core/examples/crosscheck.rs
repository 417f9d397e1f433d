//! Monte Carlo reduced density matrix on an energy window against the fixed-point
//! window measure. Usage: crosscheck [N] [M]  (defaults 512 and 4).

use rmt_thermal::ensemble::{run_realization, split_seed, DensityMatrix, EnergyWindow, SystemSpec};
use rmt_thermal::numerics::{hermitian_part, CMatrix, HermitianMatrix, C64};
use rmt_thermal::reservoir::{LevelMode, ReservoirModel};
use rmt_thermal::selfconsistent::{window_measure_real_axis, SolverOptions};

fn main() -> rmt_thermal::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let big_n = args.first().copied().unwrap_or(512);
    let m = args.get(1).copied().unwrap_or(4);
    let mut sx = CMatrix::zeros(2, 2);
    sx[(0, 1)] = C64::new(1.0, 0.0);
    sx[(1, 0)] = C64::new(1.0, 0.0);
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.0, 1.0]), HermitianMatrix::new(sx)?)?;
    let model = ReservoirModel::gaussian(0.0, 1.0, 8)?;
    // off-centre: a window centred at 0.5 gives rho = 1/2 by symmetry
    let win = EnergyWindow::new(2.0, 1.0)?;

    let mut mean = CMatrix::zeros(2, 2);
    for r in 0..m {
        let data = run_realization(&sys, &model, big_n, LevelMode::Quantile, split_seed(2024, 0, r as u64))?;
        let micro = data.reduced_dm(&win)?;
        println!("realization {r}: {} eigenvalues in window, rho_00 = {:.4}", micro.count, micro.rho.matrix()[(0, 0)].re);
        mean += micro.rho.matrix();
    }
    mean /= C64::new(m as f64, 0.0);
    let e_s = window_measure_real_axis(&sys, &model, &win, 4, &SolverOptions::default())?;
    let rho = DensityMatrix::from_unnormalized(&hermitian_part(&e_s))?;
    let dev = (&mean - rho.matrix()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let show = |a: &CMatrix| format!("rho_00 = {:.5}, rho_11 = {:.5}, |rho_01| = {:.2e}", a[(0, 0)].re, a[(1, 1)].re, a[(0, 1)].norm());
    println!("Monte Carlo (N = {big_n}, M = {m}): {}", show(&mean));
    println!("fixed point:            {}", show(rho.matrix()));
    println!("max entrywise deviation {dev:.3e}");
    Ok(())
}
