use rmt_thermal::numerics::integrate;
use rmt_thermal::reservoir::ReservoirModel;
use rmt_thermal::thermo::*;
use std::f64::consts::PI;

fn families() -> Vec<(ReservoirModel, f64, f64)> {
    // model and a bulk ε-range
    vec![
        (ReservoirModel::gaussian(0.3, 0.8, 1).unwrap(), -0.9, 1.5),
        (ReservoirModel::exponential(1.0, 1).unwrap(), 0.3, 2.5),
        (ReservoirModel::lattice(1, 1.0, 1).unwrap(), 0.15, 0.85),
        (ReservoirModel::lattice(2, 1.0, 1).unwrap(), 0.3, 1.7),
    ]
}

#[test]
fn saddle_beta_closed_forms() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    assert!((saddle_beta(&g, -0.5).unwrap() - 0.5).abs() < 1e-12);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    assert!((saddle_beta(&x, 0.5).unwrap() - 1.0).abs() < 1e-12);
    // β < 0 above the mean, down to the exponential domain edge -1/ε₀
    let b = saddle_beta(&x, 4.0).unwrap();
    assert!((b - (1.0 / 4.0 - 1.0)).abs() < 1e-12);
    assert!(saddle_beta(&x, -0.1).is_err());
    let l = ReservoirModel::lattice(1, 1.0, 1).unwrap();
    assert!(saddle_beta(&l, 1.2).is_err());
    assert!(saddle_beta(&l, 0.5).unwrap().abs() < 1e-10);
}

#[test]
fn entropy_rate_examples() {
    let g = ReservoirModel::gaussian(1.0, 1.0, 1).unwrap();
    assert!((entropy_rate(&g, 0.5).unwrap() + 0.125).abs() < 1e-14);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    assert!((entropy_rate(&x, 0.5).unwrap() - (0.5 - 2f64.ln())).abs() < 1e-12);
    for (m, _, _) in families() {
        assert!(entropy_rate(&m, m.block_mean()).unwrap().abs() < 1e-10);
    }
}

#[test]
fn entropy_rate_nonpositive_and_concave() {
    for (m, lo, hi) in families() {
        let h = 1e-3;
        for k in 0..=20 {
            let e = lo + (hi - lo) * k as f64 / 20.0;
            let s = entropy_rate(&m, e).unwrap();
            assert!(s <= 1e-12);
            let d2 = (entropy_rate(&m, e + h).unwrap() - 2.0 * s + entropy_rate(&m, e - h).unwrap()) / (h * h);
            assert!(d2 < 0.0, "{:?} at {e}: s'' = {d2}", m.family);
        }
    }
}

#[test]
fn darwin_fowler_examples() {
    let g = ReservoirModel::gaussian(1.0, 1.0, 1).unwrap();
    assert!((darwin_fowler_mu(&g, 1.0, 4).unwrap() - (8.0 * PI).powf(-0.5)).abs() < 1e-15);
    let g0 = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    let want = (32.0 * PI).powf(-0.5) * (-2.0f64).exp();
    assert!((darwin_fowler_mu(&g0, 0.5, 16).unwrap() - want).abs() < 1e-15);
    let x = ReservoirModel::exponential(1.0, 32).unwrap();
    let ratio = x.dos(16.0).unwrap() / darwin_fowler_mu(&x, 0.5, 32).unwrap();
    assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gaussian_darwin_fowler_is_exact() {
    let g = ReservoirModel::gaussian(0.2, 0.7, 1).unwrap();
    for &j in &[1u32, 4, 16, 64] {
        for &e in &[-1.0, 0.0, 0.2, 0.9] {
            let nu = g.with_j(j).dos(j as f64 * e).unwrap();
            let mu = darwin_fowler_mu(&g, e, j).unwrap();
            assert!((nu / mu - 1.0).abs() < 1e-12, "J={j} ε={e}");
        }
    }
}

#[test]
fn darwin_fowler_error_decreases_in_j() {
    // exponential: compare with the exact Gamma density; lattice: with the Fourier/convolution dos
    let cases = [
        (ReservoirModel::exponential(1.0, 1).unwrap(), vec![0.5, 0.8, 1.2, 1.6]),
        (ReservoirModel::lattice(1, 1.0, 1).unwrap(), vec![0.3, 0.4, 0.6, 0.7]),
    ];
    for (m, eps) in cases {
        let mut prev = f64::INFINITY;
        for &j in &[8u32, 16, 32, 64] {
            let mj = m.with_j(j);
            let worst = eps
                .iter()
                .map(|&e| (mj.dos(j as f64 * e).unwrap() / darwin_fowler_mu(&m, e, j).unwrap() - 1.0).abs())
                .fold(0.0, f64::max);
            if j == 32 {
                assert!(worst <= 0.1, "{:?} J=32: {worst}", m.family);
            }
            assert!(worst < prev, "{:?} J={j}: {worst} !< {prev}", m.family);
            prev = worst;
        }
    }
}

#[test]
fn tilted_density_moments() {
    for (m, lo, hi) in families() {
        for &beta in &[-0.3, 0.0, 0.7, 2.0] {
            let (_, l1, l2) = m.log_laplace(beta).unwrap();
            let (a, b) = match m.block_support() {
                (x, y) if x.is_finite() && y.is_finite() => (x, y),
                (x, _) if x.is_finite() => (x, x + 60.0),
                _ => (lo - 12.0, hi + 12.0),
            };
            let mut bp: Vec<f64> = (0..=16).map(|k| a + (b - a) * k as f64 / 16.0).collect();
            bp.dedup();
            let q = |e: f64| tilted_density(&m, beta, &[e]).unwrap()[0];
            let r = integrate(|e: f64| {
                let w = q(e);
                vec![w, w * e, w * e * e]
            }, &bp, 1e-12, 1e-11, 20_000);
            let (m0, m1, m2) = (r.value[0], r.value[1], r.value[2]);
            assert!((m0 - 1.0).abs() < 1e-8, "{:?} β={beta}: mass {m0}", m.family);
            assert!((m1 + l1).abs() < 1e-8, "{:?} β={beta}: mean", m.family);
            assert!((m2 - m1 * m1 - l2).abs() < 1e-8, "{:?} β={beta}: variance", m.family);
        }
    }
}

#[test]
fn tilted_density_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    let grid = [-2.0, -1.0, 0.5];
    let q = tilted_density(&g, 1.0, &grid).unwrap();
    for (x, v) in grid.iter().zip(q) {
        let want = (-(x + 1.0f64).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
        assert!((v - want).abs() < 1e-14);
    }
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    let q = tilted_density(&x, 1.0, &[0.0, 1.0]).unwrap();
    assert!((q[0] - 2.0).abs() < 1e-14 && (q[1] - 2.0 * (-2.0f64).exp()).abs() < 1e-14);
    let q0 = tilted_density(&x, 0.0, &[0.7]).unwrap();
    assert!((q0[0] - x.block_density(0.7).unwrap()).abs() < 1e-15);
}

#[test]
fn free_energy_examples() {
    let g = ReservoirModel::gaussian(0.0, 1.0, 1).unwrap();
    let (z, f) = free_energy(&g, 1.0, 2).unwrap();
    assert!((z - 1f64.exp()).abs() < 1e-14 && (f.unwrap() + 0.5).abs() < 1e-15);
    let x = ReservoirModel::exponential(1.0, 1).unwrap();
    let (z, f) = free_energy(&x, 1.0, 3).unwrap();
    assert!((z - 0.125).abs() < 1e-15 && (f.unwrap() - 2f64.ln()).abs() < 1e-14);
    assert_eq!(free_energy(&x, 0.0, 3).unwrap(), (1.0, None));
    for (m, _, _) in families() {
        let f = free_energy(&m, 1e-7, 1).unwrap().1.unwrap();
        assert!((f - m.block_mean()).abs() < 1e-5);
    }
}

#[test]
fn convexity_of_beta_f() {
    for (m, _, _) in families() {
        for &b in &[0.25, 0.5, 1.0, 2.0] {
            let h = 1e-3;
            let bf = |x: f64| x * free_energy(&m, x, 1).unwrap().1.unwrap();
            let d2 = (bf(b + h) - 2.0 * bf(b) + bf(b - h)) / (h * h);
            let (_, _, l2) = m.log_laplace(b).unwrap();
            assert!(d2 < 0.0);
            assert!((d2 + l2).abs() <= 1e-6 * l2.max(1.0) + 1e-6, "{:?} β={b}: {d2} vs {}", m.family, -l2);
        }
    }
}

#[test]
fn envelope_theorem() {
    for (m, lo, hi) in families() {
        for k in 0..20 {
            let e = lo + (hi - lo) * (k as f64 + 0.5) / 20.0;
            let h = 1e-5;
            let ds = (entropy_rate(&m, e + h).unwrap() - entropy_rate(&m, e - h).unwrap()) / (2.0 * h);
            let b = saddle_beta(&m, e).unwrap();
            assert!((ds - b).abs() < 1e-6 * (1.0 + b.abs()), "{:?} ε={e}: {ds} vs {b}", m.family);
        }
    }
}

#[test]
fn legendre_duality() {
    for (m, lo, hi) in families() {
        let (a, b) = m.block_support();
        let (a, b) = (if a.is_finite() { a } else { lo - 6.0 }, if b.is_finite() { b } else { hi + 6.0 });
        for &beta in &[0.25, 0.5, 1.0] {
            let n = 20_000;
            let best = (1..n)
                .filter_map(|k| {
                    let e = a + (b - a) * k as f64 / n as f64;
                    entropy_rate(&m, e).ok().map(|s| e * beta - s)
                })
                .fold(f64::INFINITY, f64::min);
            let bf = beta * free_energy(&m, beta, 1).unwrap().1.unwrap();
            assert!((best - bf).abs() < 1e-6, "{:?} β={beta}: {best} vs {bf}", m.family);
        }
    }
}
