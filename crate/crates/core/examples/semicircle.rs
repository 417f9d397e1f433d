//! Scalar fixed point f = (-z - f)^{-1} (H_S = 0, Sigma = 1, point-mass reservoir)
//! against the closed-form semicircle Stieltjes transform.

use rmt_thermal::ensemble::SystemSpec;
use rmt_thermal::numerics::{HermitianMatrix, C64};
use rmt_thermal::selfconsistent::{herglotz_verify, solve_halfplane, Nu, SolverOptions};

fn closed_form(z: C64) -> C64 {
    let d = (z * z - 4.0).sqrt();
    let a = (-z + d) / 2.0;
    if a.im > 0.0 { a } else { (-z - d) / 2.0 }
}

fn main() -> rmt_thermal::Result<()> {
    let sys = SystemSpec::new(HermitianMatrix::zeros(1), HermitianMatrix::identity(1))?;
    let opts = SolverOptions::with_tol(1e-12);
    let mut trace = Vec::new();
    println!("{:>16} {:>26} {:>10} {:>6}", "z", "f(z)", "error", "iter");
    for &(re, im) in &[(0.0, 0.05), (1.0, 0.05), (1.9, 0.1), (2.5, 0.5), (-1.0, 1.0), (0.0, 10.0)] {
        let z = C64::new(re, im);
        let s = solve_halfplane(&sys, &Nu::delta(0.0), z, &opts)?;
        let f = s.value.value[(0, 0)];
        println!("{:>16} {:>26} {:>10.2e} {:>6}", format!("{z:.2}"), format!("{f:.10}"), (f - closed_form(z)).norm(), s.iterations);
        trace.push(s.value);
    }
    let rep = herglotz_verify(&trace);
    println!("Herglotz: min Im eigenvalue {:.3e}, max |f| Im z {:.4}", rep.min_imag_eigenvalue, rep.max_norm_times_imz);
    Ok(())
}
