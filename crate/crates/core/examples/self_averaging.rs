//! Variance of the partial-trace resolvent g(z) over realizations as N grows.

use rmt_thermal::ensemble::{selfaveraging_study, SystemSpec};
use rmt_thermal::numerics::{CMatrix, HermitianMatrix, C64};
use rmt_thermal::reservoir::{LevelMode, ReservoirModel};

fn main() -> rmt_thermal::Result<()> {
    let mut sx = CMatrix::zeros(2, 2);
    sx[(0, 1)] = C64::new(1.0, 0.0);
    sx[(1, 0)] = C64::new(1.0, 0.0);
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.0, 1.0]), HermitianMatrix::new(sx)?)?;
    let model = ReservoirModel::gaussian(0.0, 1.0, 8)?;
    let table = selfaveraging_study(&sys, &model, C64::new(1.0, 1.0), &[64, 128, 256, 512], 16, 99, LevelMode::Quantile)?;
    println!("{:>6} {:>14} {:>12}", "N", "max Var g", "mean g_00");
    for r in &table.rows {
        println!("{:>6} {:>14.4e} {:>12}", r.big_n, r.max_variance, format!("{:.5}{:+.5}i", r.mean_re[0], r.mean_im[0]));
    }
    println!("log-log slope {:.3}", table.slope);
    Ok(())
}
