mod common;

use common::*;
use rmt_thermal::ensemble::{trace_distance, SystemSpec};
use rmt_thermal::gibbs::*;
use rmt_thermal::numerics::*;
use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::selfconsistent::SolverOptions;
use rmt_thermal::thermo::saddle_beta;

fn sigma_z_system() -> SystemSpec {
    SystemSpec::new(herm(pauli_z() * C64::new(0.5, 0.0)), herm(pauli_z())).unwrap()
}

fn gaussian() -> ReservoirModel {
    ReservoirModel::gaussian(0.0, 1.0, 8).unwrap()
}

#[test]
fn gibbs_reference_two_level() {
    let g = gibbs_reference(&HermitianMatrix::from_diag(&[0.0, 1.0]), 1.0).unwrap();
    assert!((g.matrix()[(0, 0)].re - 0.7310585786300049).abs() < 1e-12);
    assert!((g.matrix()[(1, 1)].re - 0.2689414213699951).abs() < 1e-12);
    let flat = gibbs_reference(&HermitianMatrix::from_diag(&[0.0, 1.0, 3.0]), 0.0).unwrap();
    assert!(max_diff(flat.matrix(), &(CMatrix::identity(3, 3) / C64::new(3.0, 0.0))) < 1e-15);
}

#[test]
fn decoupled_scan_matches_shifted_gaussian() {
    // Σ = 0: γ_αα(E) = ν_J(E - h_α), so ρ ∝ diag(e^{-βh} e^{-h²/2J})
    let h = [0.0, 1.0];
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&h), HermitianMatrix::zeros(2)).unwrap();
    let eps = -1.0;
    let js = [8u32, 16, 32, 64];
    let rep = gibbs_ratio_scan(&sys, &gaussian(), eps, &js, &SolverOptions::default()).unwrap();
    assert!((rep.beta - 1.0).abs() < 1e-12);
    let gibbs = gibbs_reference(&sys.h_s, 1.0).unwrap();
    for (j, d) in js.iter().zip(&rep.trace_distances) {
        let w: Vec<f64> = h.iter().map(|x| (-x - x * x / (2.0 * *j as f64)).exp()).collect();
        let z: f64 = w.iter().sum();
        let want = HermitianMatrix::from_diag(&w.iter().map(|x| x / z).collect::<Vec<_>>()).matrix().clone();
        assert!((d - trace_distance(&want, gibbs.matrix())).abs() < 1e-8, "J={j}");
    }
    assert!(rep.trace_distances[1] <= 0.02 && rep.trace_distances[3] <= 0.005);
}

#[test]
fn trivial_system_hamiltonians_give_flat_states() {
    let opts = SolverOptions::default();
    let m = gaussian();
    for c in [0.0, 0.7] {
        let h = HermitianMatrix::from_diag(&[c, c]);
        let sys = SystemSpec::new(h, herm(pauli_x())).unwrap();
        let rep = gibbs_ratio_scan(&sys, &m, -0.5, &[8, 16], &opts).unwrap();
        assert!(rep.trace_distances.iter().all(|d| *d <= 1e-8), "c={c}: {:?}", rep.trace_distances);
    }
    let sys = sigma_z_system();
    let flat = canonical_reduced_dm(&sys, &m, 0.0, 16, &opts).unwrap();
    assert!(max_diff(flat.rho.matrix(), &(CMatrix::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-8);
}

#[test]
fn canonical_decoupled_is_exactly_gibbs() {
    let sys = SystemSpec::new(HermitianMatrix::from_diag(&[0.0, 0.6, 1.5]), HermitianMatrix::zeros(3)).unwrap();
    let c = canonical_reduced_dm(&sys, &gaussian(), 0.8, 8, &SolverOptions::default()).unwrap();
    let g = gibbs_reference(&sys.h_s, 0.8).unwrap();
    assert!(c.rho.trace_distance(&g) < 1e-8);
    assert!(c.edge_weight < 1e-10);
}

#[test]
fn coupled_scan_approaches_gibbs() {
    let sys = sigma_z_system();
    let js = [8u32, 16, 32, 64];
    let rep = gibbs_ratio_scan(&sys, &gaussian(), -1.0, &js, &SolverOptions::default()).unwrap();
    assert!((rep.beta - saddle_beta(&gaussian(), -1.0).unwrap()).abs() < 1e-12);
    let d = &rep.trace_distances;
    assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
    assert!(rep.fitted_rate <= -0.4, "rate {}", rep.fitted_rate);
    // the most populated level stays the Gibbs ground state (h = -0.5, index 1)
    for row in &rep.rows {
        assert!(row.rho_re[3] > row.rho_re[0]);
        assert!(row.residual <= 1e-8);
    }
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.ratio_deviation).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn canonical_and_microcanonical_limits_agree() {
    let sys = sigma_z_system();
    let m = gaussian();
    let opts = SolverOptions::default();
    let beta = 1.0;
    let c32 = canonical_reduced_dm(&sys, &m, beta, 32, &opts).unwrap();
    let g = gibbs_reference(&sys.h_s, beta).unwrap();
    assert!(c32.rho.trace_distance(&g) <= 0.02);
    let c64 = canonical_reduced_dm(&sys, &m, beta, 64, &opts).unwrap();
    // ε(β) = -β a² for the zero-mean Gaussian
    let micro = reduced_dm_limit(&sys, &m.with_j(64), -64.0 * beta, &opts).unwrap();
    assert!(c64.rho.trace_distance(&micro) <= 0.03);
}
