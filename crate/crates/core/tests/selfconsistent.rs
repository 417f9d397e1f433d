mod common;

use common::*;
use rmt_thermal::ensemble::{EnergyWindow, SystemSpec};
use rmt_thermal::numerics::*;
use rmt_thermal::reservoir::{check_conditions, ReservoirModel, DEFAULT_A_CANDIDATES};
use rmt_thermal::selfconsistent::*;
use rmt_thermal::Error;

fn semicircle_root(z: C64) -> C64 {
    // f² + z f + 1 = 0 with Im f > 0
    let d = (z * z - 4.0).sqrt();
    let a = (-z + d) / 2.0;
    let b = (-z - d) / 2.0;
    if a.im > 0.0 { a } else { b }
}

fn scalar_sys() -> SystemSpec {
    SystemSpec::new(HermitianMatrix::zeros(1), HermitianMatrix::identity(1)).unwrap()
}

fn qubit(sigma: CMatrix) -> SystemSpec {
    SystemSpec::new(HermitianMatrix::from_diag(&[0.0, 1.0]), herm(sigma)).unwrap()
}

#[test]
fn semicircle_anchor() {
    let sys = scalar_sys();
    let opts = SolverOptions::with_tol(1e-12);
    let mut trace = Vec::new();
    for k in 0..50 {
        let im = 0.05 * (10.0f64 / 0.05).powf(k as f64 / 49.0);
        let re = -3.0 + 6.0 * ((k * 37) % 50) as f64 / 49.0;
        let z = C64::new(re, im);
        let s = solve_halfplane(&sys, &Nu::delta(0.0), z, &opts).unwrap();
        assert!((s.value.value[(0, 0)] - semicircle_root(z)).norm() < 1e-8, "z = {z}");
        trace.push(s.value);
    }
    let rep = herglotz_verify(&trace);
    assert!(rep.positive && rep.bounded);
}

#[test]
fn herglotz_flags_conjugated_input() {
    let z = C64::new(0.3, 0.5);
    let f = CMatrix::from_element(1, 1, semicircle_root(z).conj());
    let rep = herglotz_verify(&[HerglotzMatrix { z, value: f }]);
    assert!(!rep.positive);
}

#[test]
fn decoupled_halfplane_matches_direct_integral() {
    let sys = qubit(CMatrix::zeros(2, 2));
    let nu = Nu::Gaussian { mean: 0.5, sd: 1.2 };
    let z = C64::new(0.4, 0.2);
    let s = solve_halfplane(&sys, &nu, z, &SolverOptions::default()).unwrap();
    for (a, h) in [0.0, 1.0].iter().enumerate() {
        let want = integrate(
            |e: f64| {
                let w = normal_pdf(e, 0.5, 1.2);
                let r = (C64::new(e + h, 0.0) - z).inv() * w;
                vec![r.re, r.im]
            },
            &[-12.0, -0.4 - h, 13.0],
            1e-13,
            1e-12,
            4000,
        )
        .value;
        assert!((s.value.value[(a, a)] - C64::new(want[0], want[1])).norm() < 1e-9);
    }
}

#[test]
fn conjugate_symmetry() {
    let sys = qubit(pauli_x());
    let nu = Nu::Gaussian { mean: 0.0, sd: 2.0 };
    let opts = SolverOptions::with_tol(1e-11);
    for z in [C64::new(0.5, 0.3), C64::new(-1.0, 1.5)] {
        let up = solve_halfplane(&sys, &nu, z, &opts).unwrap().value.value;
        let down = solve_halfplane(&sys, &nu, z.conj(), &opts).unwrap().value.value;
        assert!(max_diff(&down, &up.adjoint()) < 1e-9);
    }
}

#[test]
fn residual_and_reapplication() {
    let sys = qubit(pauli_x());
    let nu = Nu::Gaussian { mean: 0.0, sd: 2.0 };
    let opts = SolverOptions::with_tol(1e-10);
    let z = C64::new(0.2, 0.5);
    let s = solve_halfplane(&sys, &nu, z, &opts).unwrap();
    assert!(s.residual <= opts.tol);
    let again = phi_map(&sys, &nu, z, &s.value.value, opts.tol).unwrap();
    assert!(max_abs(&(&again - &s.value.value)) <= 2.0 * opts.tol);
}

#[test]
fn unique_fixed_point_from_random_starts() {
    let sys = qubit(pauli_x());
    let nu = Nu::Gaussian { mean: 0.0, sd: 1.0 };
    let opts = SolverOptions::with_tol(1e-11);
    let mut r = rng(3);
    let z = C64::new(0.3, 1.5);
    let mut sols = Vec::new();
    for _ in 0..2 {
        // Herglotz start: Hermitian real part, PSD imaginary part
        let f0 = random_hermitian(2, 1.0, &mut r) + random_psd(2, 1.0, &mut r) * C64::new(0.0, 1.0);
        sols.push(solve_halfplane_from(&sys, &nu, z, &opts, Some(&f0)).unwrap().value.value);
    }
    assert!(max_diff(&sols[0], &sols[1]) <= 10.0 * opts.tol);
}

#[test]
fn model_nu_agrees_with_gaussian_closed_form() {
    // the Fourier route (Nu::Model) against the E-quadrature route for the same density
    let sys = qubit(pauli_x());
    let m = ReservoirModel::gaussian(0.0, 1.0, 4).unwrap();
    let opts = SolverOptions::with_tol(1e-11);
    let z = C64::new(0.5, 0.4);
    let a = solve_halfplane(&sys, &Nu::Model(m.clone()), z, &opts).unwrap().value.value;
    let b = solve_halfplane(&sys, &Nu::from_model(&m), z, &opts).unwrap().value.value;
    assert!(max_diff(&a, &b) < 1e-8);
}

#[test]
fn real_axis_decoupled_shift_oracle() {
    let sys = qubit(CMatrix::zeros(2, 2));
    let opts = SolverOptions::default();
    for m in [ReservoirModel::gaussian(0.0, 1.0, 8).unwrap(), ReservoirModel::exponential(1.0, 8).unwrap()] {
        for &e in &[-3.0, 2.0, 6.5] {
            if m.dos(e).unwrap() == 0.0 {
                continue;
            }
            let g = solve_real_axis(&sys, &m, e, &opts).unwrap().gamma();
            for (a, h) in [0.0, 1.0].iter().enumerate() {
                let want = m.dos(e - h).unwrap();
                assert!((g[(a, a)].re - want).abs() < 1e-6 * want.max(1e-3), "{:?} E={e}", m.family);
            }
            assert!(g[(0, 1)].norm() < 1e-10);
        }
    }
}

#[test]
fn real_axis_agrees_with_extrapolated_halfplane() {
    let sys = qubit(pauli_x());
    let m = ReservoirModel::gaussian(0.0, 1.0, 8).unwrap();
    let e = 0.5;
    let ra = solve_real_axis(&sys, &m, e, &SolverOptions::default()).unwrap();
    let rich = solve_real_axis_extrapolated(&sys, &Nu::from_model(&m), e, 0.02, &SolverOptions::with_tol(1e-11)).unwrap();
    assert!(max_diff(&ra.value().value, &rich) < 1e-4);
}

#[test]
fn real_axis_shift_depth_is_immaterial() {
    // the contour deformation changes the path, not the value
    let sys = qubit(pauli_x());
    let m = ReservoirModel::gaussian(0.0, 1.0, 8).unwrap();
    let opts = SolverOptions::default();
    let e = -2.0;
    let shifted = solve_real_axis(&sys, &m, e, &opts).unwrap();
    let plain = solve_real_axis_with(&sys, &m, e, &opts, 0.0, None).unwrap();
    assert!(shifted.beta_shift > 0.0);
    assert!(max_diff(&shifted.value().value, &plain.value().value) < 1e-9);
}

#[test]
fn real_axis_below_j0_is_rejected() {
    let sys = qubit(pauli_x());
    let m = ReservoirModel::lattice(1, 1.0, 2).unwrap();
    assert!(matches!(solve_real_axis(&sys, &m, 1.0, &SolverOptions::default()), Err(Error::JBelowJ0 { .. })));
}

#[test]
fn real_axis_norm_bound() {
    let sys = qubit(pauli_x() * C64::new(0.5, 0.0));
    for &j in &[2u32, 4, 8] {
        let m = ReservoirModel::gaussian(0.0, 1.0, j).unwrap();
        let bound = check_conditions(&m, &DEFAULT_A_CANDIDATES, 1.0).unwrap().hausdorff_young_bound();
        for k in 0..9 {
            let e = -4.0 + k as f64;
            let f = solve_real_axis(&sys, &m, e, &SolverOptions::default()).unwrap().value().value;
            assert!(op_norm(&f) <= bound, "J={j} E={e}: {} > {bound}", op_norm(&f));
        }
    }
}

#[test]
fn dressing_vanishes_at_macroscopic_energies() {
    let sys = SystemSpec::new(herm(pauli_z() * C64::new(0.5, 0.0)), herm(pauli_z())).unwrap();
    let m = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    let eps = -1.0;
    let mut norms = Vec::new();
    for &j in &[8u32, 16, 32, 64] {
        let s = solve_real_axis(&sys, &m.with_j(j), j as f64 * eps, &SolverOptions::default()).unwrap();
        norms.push(op_norm(&s.value().value));
    }
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    // nonzero first moment of the tilted block: rate J^{-1}, within a factor 2 in the exponent
    let xs: Vec<f64> = [8.0f64, 16.0, 32.0, 64.0].iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    let slope = rmt_thermal::ensemble::fit_slope(&xs, &ys);
    assert!((-2.0..=-0.5).contains(&slope), "slope {slope}");
}

#[test]
fn spectral_density_total_mass() {
    let sys = qubit(pauli_x() * C64::new(0.5, 0.0));
    let m = ReservoirModel::gaussian(0.0, 1.0, 4).unwrap();
    let grid: Vec<f64> = (0..=240).map(|k| -12.0 + 25.0 * k as f64 / 240.0).collect();
    let d = gamma_density(&sys, &m, &grid, &SolverOptions::default()).unwrap();
    assert!(max_diff(&d.total_mass(), &CMatrix::identity(2, 2)) < 1e-4);
    for g in d.values() {
        assert!(min_eig_hermitian(&g) > -1e-10);
    }
}

#[test]
fn parallel_and_chained_grids_agree() {
    let sys = qubit(pauli_x());
    let m = ReservoirModel::gaussian(0.0, 1.0, 8).unwrap();
    let grid = [-1.0, 0.0, 1.0, 2.0];
    let opts = SolverOptions::default();
    let a = gamma_density_mode(&sys, &m, &grid, &opts, GridMode::Chained).unwrap();
    let b = gamma_density_mode(&sys, &m, &grid, &opts, GridMode::Parallel).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(max_diff(x, &y) < 1e-8);
    }
}

#[test]
fn window_measure_decoupled_and_full_support() {
    let sys = qubit(CMatrix::zeros(2, 2));
    let m = ReservoirModel::gaussian(0.0, 1.0, 2).unwrap();
    let win = EnergyWindow::new(0.3, 1.4).unwrap();
    let opts = SolverOptions::default();
    let e = window_measure_real_axis(&sys, &m, &win, 4, &opts).unwrap();
    let inv = stieltjes_invert_window(&sys, &Nu::from_model(&m), &win, 0.05, &opts).unwrap();
    for (a, h) in [0.0, 1.0].iter().enumerate() {
        let want = m.cdf(win.hi() - h).unwrap() - m.cdf(win.lo() - h).unwrap();
        assert!((e[(a, a)].re - want).abs() < 1e-6);
        assert!((inv.e_s[(a, a)].re - want).abs() < 1e-3);
    }
    assert!(!inv.edge_warning);
    let coupled = qubit(pauli_x());
    let full = EnergyWindow::new(0.5, 16.0).unwrap();
    let all = stieltjes_invert_window(&coupled, &Nu::from_model(&m), &full, 0.05, &opts).unwrap();
    assert!(max_diff(&all.e_s, &CMatrix::identity(2, 2)) < 1e-3);
    assert!(all.edge_warning);
}
