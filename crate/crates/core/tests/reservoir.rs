mod common;

use proptest::prelude::*;
use rmt_thermal::numerics::{integrate, integrate_decaying, C64};
use rmt_thermal::reservoir::*;
use std::f64::consts::PI;

fn gamma_pdf(e: f64, j: u32, eps0: f64) -> f64 {
    let jf = j as f64;
    ((jf - 1.0) * e.ln() - e / eps0 - statrs::function::gamma::ln_gamma(jf) - jf * eps0.ln()).exp()
}

/// Arcsine density on [0, eps0].
fn q1(x: f64, eps0: f64) -> f64 {
    if x <= 0.0 || x >= eps0 {
        0.0
    } else {
        1.0 / (PI * (x * (eps0 - x)).sqrt())
    }
}

/// (q1 * q1)(e) by quadrature. With x = eps0(1 - cos θ)/2 the outer factor becomes dθ/π and the
/// inner inverse square roots sit at the ends of the feasible θ-range, removed by a cosine map.
fn p2_oracle(e: f64, eps0: f64) -> f64 {
    if e <= 0.0 || e >= 2.0 * eps0 {
        return 0.0;
    }
    let theta = |x: f64| (1.0 - 2.0 * x / eps0).clamp(-1.0, 1.0).acos();
    let (ta, tb) = (theta((e - eps0).max(0.0)), theta(e.min(eps0)));
    let r = integrate(
        |phi: f64| {
            let th = ta + 0.5 * (tb - ta) * (1.0 - phi.cos());
            let dth = 0.5 * (tb - ta) * phi.sin();
            let x = 0.5 * eps0 * (1.0 - th.cos());
            q1(e - x, eps0) * dth / PI
        },
        &[0.0, PI],
        1e-12,
        1e-10,
        2000,
    );
    r.value
}

/// (p2 * p2)(e) with the quadrature p2 above; breakpoints at the logarithmic singularities.
fn p4_oracle(e: f64, eps0: f64) -> f64 {
    let lo = (e - 2.0 * eps0).max(0.0);
    let hi = e.min(2.0 * eps0);
    let mut bp = vec![lo, hi];
    for c in [eps0, e - eps0] {
        if c > lo && c < hi {
            bp.push(c);
        }
    }
    bp.sort_by(f64::total_cmp);
    bp.dedup();
    integrate(|y: f64| p2_oracle(y, eps0) * p2_oracle(e - y, eps0), &bp, 1e-8, 1e-8, 2000).value
}

#[test]
fn char_fn_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    assert_eq!(g.char_fn(0.0).unwrap(), C64::new(1.0, 0.0));
    assert!((g.char_fn(1.0).unwrap() - C64::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    assert!((x.char_fn(1.0).unwrap() - C64::new(0.5, -0.5)).norm() < 1e-15);
}

#[test]
fn lattice_char_fn_is_bessel() {
    // φ₁(t) = e^{-itε₀/2} J₀(tε₀/2) for the arcsine density
    let l = ReservoirModel::lattice(1, 2.0, 1).unwrap();
    for &t in &[0.3, 1.0, 4.0, 17.0] {
        let x = t;
        // J₀ by its integral representation, evaluated independently of the cosine-grid average
        let j0 = integrate(|th: f64| (x * th.sin()).cos() / PI, &[0.0, PI], 1e-14, 0.0, 1000).value;
        let want = C64::new(0.0, -t).exp() * j0;
        assert!((l.char_fn(t).unwrap() - want).norm() < 1e-12, "t = {t}");
    }
}

#[test]
fn laplace_fn_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    assert!((g.laplace_fn(1.0).unwrap() - 0.5f64.exp()).abs() < 1e-14);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    assert!((x.laplace_fn(1.0).unwrap() - 0.5).abs() < 1e-15);
    assert!(x.laplace_fn(-1.0).is_err());
    for m in [&g, &x, &ReservoirModel::lattice(2, 1.0, 1).unwrap()] {
        assert!((m.laplace_fn(0.0).unwrap() - 1.0).abs() < 1e-13);
    }
}

#[test]
fn gaussian_dos_examples() {
    let g = ReservoirModel::gaussian(1.0, 1.0, 4).unwrap();
    assert!((g.dos(4.0).unwrap() - 0.1994711402007164).abs() < 1e-12);
    let g1 = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    assert!((g1.dos(0.0).unwrap() - 0.3989422804014327).abs() < 1e-15);
}

#[test]
fn exponential_dos_matches_gamma_density() {
    for &j in &[3u32, 8, 32] {
        let x = ReservoirModel::exponential(1.0, j).unwrap();
        for &f in &[0.3, 0.7, 1.0, 1.6] {
            let e = f * j as f64;
            let got = x.dos(e).unwrap();
            let want = gamma_pdf(e, j, 1.0);
            assert!((got - want).abs() <= 1e-8 * want, "J={j} E={e}: {got} vs {want}");
        }
    }
}

#[test]
fn lattice_two_blocks_matches_convolution_oracle() {
    let l = ReservoirModel::lattice(1, 1.0, 2).unwrap();
    for &e in &[0.05, 0.5, 0.93, 1.2, 1.77] {
        let want = p2_oracle(e, 1.0);
        assert!((l.dos(e).unwrap() - want).abs() < 1e-6, "E = {e}");
    }
    // the J = 2 density has a logarithmic van Hove singularity at E = ε₀
    assert!(l.dos(1.0).unwrap() > 1e3 || !l.dos(1.0).unwrap().is_finite());
}

#[test]
fn lattice_four_blocks_matches_convolution_oracle() {
    let l = ReservoirModel::lattice(1, 1.0, 4).unwrap();
    let l2 = ReservoirModel::lattice(2, 1.0, 2).unwrap();
    for &e in &[0.4, 1.3, 2.0, 2.9] {
        let want = p4_oracle(e, 1.0);
        assert!((l.dos(e).unwrap() - want).abs() < 1e-6, "E = {e}");
        // d = 2 blocks of the same chain give the same total order
        assert!((l2.dos(e).unwrap() - want).abs() < 1e-6, "E = {e}");
    }
}

#[test]
fn sample_levels_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    let q = g.sample_levels(2, LevelMode::Quantile, 0).unwrap();
    assert!((q[0] + 0.6744897501960817).abs() < 1e-9 && (q[1] - 0.6744897501960817).abs() < 1e-9);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    let m = x.sample_levels(1, LevelMode::Quantile, 0).unwrap();
    assert!((m[0] - 2f64.ln()).abs() < 1e-9);
    let l = ReservoirModel::lattice(1, 2.0, 1).unwrap();
    let m = l.sample_levels(1, LevelMode::Quantile, 0).unwrap();
    assert!((m[0] - 1.0).abs() < 1e-12, "symmetric arcsine density has median ε₀/2");
}

#[test]
fn iid_levels_empirical_cdf() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 3).unwrap();
    let mut v = g.sample_levels(4096, LevelMode::Iid, 99).unwrap();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut sup = 0.0f64;
    for (k, x) in v.iter().enumerate() {
        let f = g.cdf(*x).unwrap();
        sup = sup.max((f - k as f64 / n).abs()).max((f - (k + 1) as f64 / n).abs());
    }
    assert!(sup < 0.03, "Kolmogorov distance {sup}");
    let again = g.sample_levels(4096, LevelMode::Iid, 99).unwrap();
    let mut again = again;
    again.sort_by(f64::total_cmp);
    assert_eq!(v, again);
}

#[test]
fn check_conditions_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 4).unwrap();
    let r = check_conditions(&g, &DEFAULT_A_CANDIDATES, 1.0).unwrap();
    assert_eq!(r.a_exponent, 2.0);
    assert_eq!(r.hausdorff_young_j0, 2.0);
    assert!((r.char_fn_gap - (-0.5f64).exp()).abs() < 1e-12);
    assert!(r.left_tail_superexponential);

    let l = ReservoirModel::lattice(1, 1.0, 4).unwrap();
    let r = check_conditions(&l, &DEFAULT_A_CANDIDATES, 1.0).unwrap();
    assert_eq!(r.candidates[0], (2.0, None));
    assert_eq!(r.a_exponent, 1.5);
    assert!((r.hausdorff_young_j0 - 3.0).abs() < 1e-12);
    // ∫q₁^{1.5} by direct quadrature in θ: (1/π)∫ (π·(ε₀/2) sin θ)^{-1/2} dθ
    let direct = integrate(|th: f64| (PI * 0.5 * th.sin()).powf(-0.5) / PI, &[0.0, PI / 2.0, PI], 1e-9, 1e-10, 20_000).value;
    assert!((r.lq_integral - direct).abs() < 1e-6);
    assert!(r.char_fn_gap < 1.0);

    let x = ReservoirModel::exponential(1.0, 4).unwrap();
    let r = check_conditions(&x, &DEFAULT_A_CANDIDATES, 1.0).unwrap();
    assert_eq!(r.hausdorff_young_j0, 2.0);
    assert!((r.lq_integral - 0.5).abs() < 1e-15);
}

#[test]
fn no_feasible_exponent_is_rejected() {
    let l = ReservoirModel::lattice(1, 1.0, 4).unwrap();
    assert!(check_conditions(&l, &[2.0], 1.0).is_err());
}

#[test]
fn dos_integrates_to_one() {
    for m in [
        ReservoirModel::gaussian(0.3, 0.7, 5).unwrap(),
        ReservoirModel::exponential(1.0, 6).unwrap(),
        ReservoirModel::lattice(1, 1.0, 3).unwrap(),
        ReservoirModel::lattice(1, 1.0, 24).unwrap(),
    ] {
        let t = total_mass(&m).unwrap();
        assert!((t - 1.0).abs() < 1e-6, "{:?}: {t}", m.family);
    }
}

#[test]
fn gaussian_convolution_semigroup() {
    let g2 = ReservoirModel::gaussian(0.5, 1.0, 2).unwrap();
    let g4 = g2.with_j(4);
    for &e in &[-1.0, 0.5, 2.0, 4.0] {
        let conv = integrate(|x: f64| g2.dos(x).unwrap() * g2.dos(e - x).unwrap(), &[-30.0, e / 2.0, 30.0], 1e-14, 1e-12, 4000).value;
        assert!((conv - g4.dos(e).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn gaussian_fourier_inversion_matches_closed_form() {
    let g = ReservoirModel::gaussian(0.2, 1.0, 1).unwrap();
    for &j in &[1u32, 4, 16] {
        let m = g.with_j(j);
        for &f in &[-1.0, 0.0, 0.8] {
            let e = j as f64 * 0.2 + f * (j as f64).sqrt();
            // ν_J(E) = (1/π) ∫_0^∞ Re(e^{iEt} φ(t)^J) dt on the real line
            let r = integrate_decaying(
                |t: f64| (C64::new(0.0, e * t).exp() * g.char_fn(t).unwrap().powu(j)).re / PI,
                |t| g.char_fn(t).unwrap().norm().powi(j as i32),
                1.0,
                1e-11,
            )
            .unwrap();
            assert!((r.value - m.dos(e).unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn tabulated_family_round_trip() {
    let text = "# energy density\n0.0 0.0\n0.5 0.5\n1.0 1.0\n1.5 0.5\n2.0 0.0\n";
    let tab = Tabulated::parse(text).unwrap();
    let m = ReservoirModel::new(Family::Tabulated(tab), 1).unwrap();
    assert!((m.laplace_fn(0.0).unwrap() - 1.0).abs() < 1e-10);
    assert!((m.char_fn(0.0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
    assert!((m.block_mean() - 1.0).abs() < 1e-12);
    assert!(Tabulated::parse("0 1\n0 1\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn char_fn_bounded_and_hermitian(t in -40.0f64..40.0, fam in 0usize..4) {
        let m = match fam {
            0 => ReservoirModel::gaussian(0.4, 1.3, 1).unwrap(),
            1 => ReservoirModel::exponential(0.8, 1).unwrap(),
            2 => ReservoirModel::lattice(1, 1.0, 1).unwrap(),
            _ => ReservoirModel::lattice(3, 0.5, 1).unwrap(),
        };
        let p = m.char_fn(t).unwrap();
        let q = m.char_fn(-t).unwrap();
        prop_assert!(p.norm() <= 1.0 + 1e-12);
        prop_assert!((p - q.conj()).norm() < 1e-12);
    }

    #[test]
    fn char_fn_gap_below_one(t0 in 0.2f64..5.0, fam in 0usize..3) {
        let m = match fam {
            0 => ReservoirModel::gaussian(0.0, 0.7, 4).unwrap(),
            1 => ReservoirModel::exponential(1.0, 4).unwrap(),
            _ => ReservoirModel::lattice(1, 1.0, 4).unwrap(),
        };
        let r = check_conditions(&m, &DEFAULT_A_CANDIDATES, t0).unwrap();
        prop_assert!(r.char_fn_gap < 1.0);
        // the reported sup dominates a spot check beyond t0
        for k in 0..20 {
            let t = t0 + 0.37 * k as f64;
            prop_assert!(m.char_fn(t).unwrap().norm() <= r.char_fn_gap + 1e-9);
        }
    }
}
