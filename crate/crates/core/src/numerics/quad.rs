//! Adaptive Gauss-Kronrod quadrature for scalar and matrix-valued integrands.

use super::linalg::{CMatrix, C64};
use crate::error::{Error, Result};
use std::collections::BinaryHeap;

/// Values that can be integrated: a vector space with a max-norm.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn norm(&self) -> f64 {
        self.re.abs().max(self.im.abs())
    }
}

impl QuadValue for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b * w;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()))
    }
}

impl QuadValue for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += w * b;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

// 21-point Kronrod nodes (positive half, descending) with 10-point Gauss weights.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980111902,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn gk21<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.zero_like();
    let mut gauss = fc.zero_like();
    kron.add_scaled(&fc, WGK[10]);
    for k in 0..10 {
        let x = h * XGK[k];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kron.add_scaled(&f1, WGK[k]);
        kron.add_scaled(&f2, WGK[k]);
        if k % 2 == 1 {
            gauss.add_scaled(&f1, WG[k / 2]);
            gauss.add_scaled(&f2, WG[k / 2]);
        }
    }
    let mut diff = kron.clone();
    diff.add_scaled(&gauss, -1.0);
    let mut value = kron.zero_like();
    value.add_scaled(&kron, h);
    (value, diff.norm() * h.abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integral<V> {
    pub value: V,
    /// Estimated absolute error (max-norm).
    pub error: f64,
    /// Upper truncation point (equals the upper limit for finite intervals).
    pub truncation: f64,
    pub evaluations: usize,
}

/// Adaptive GK21 over [a, b] split first at the given interior breakpoints.
/// Stops when the summed error estimate is below max(abs_tol, rel_tol * |I|).
pub fn integrate<V: QuadValue>(
    mut f: impl FnMut(f64) -> V,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Integral<V> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let mut total: Option<V> = None;
    let mut total_err = 0.0;
    for w in breakpoints.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (value, error) = gk21(&mut f, w[0], w[1]);
        evals += 21;
        match total.as_mut() {
            None => total = Some(value.clone()),
            Some(t) => t.add_scaled(&value, 1.0),
        }
        total_err += error;
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }
    let mut total = total.expect("integrate needs a non-empty interval");
    while total_err > abs_tol.max(rel_tol * total.norm()) && heap.len() < max_panels {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evals += 42;
        total.add_scaled(&worst.value, -1.0);
        total.add_scaled(&v1, 1.0);
        total.add_scaled(&v2, 1.0);
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // exact re-summation in interval order
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = total.zero_like();
    let mut error = 0.0;
    for p in &panels {
        value.add_scaled(&p.value, 1.0);
        error += p.error;
    }
    let last = breakpoints.last().copied().unwrap_or(0.0);
    Integral { value, error, truncation: last, evaluations: evals }
}

/// Scalar convenience wrapper over a finite interval.
pub fn integrate_finite(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Integral<f64> {
    integrate(f, &[a, b], tol, 0.0, 4000)
}

/// Integrates `f` over [0, ∞) given a monotone integrable envelope with |f(t)| ≤ C·envelope(t).
///
/// The truncation point T is the first dyadic panel edge beyond which the envelope's
/// tail mass (extrapolated geometrically from successive dyadic panel masses) is below
/// tol/2; the remaining tol/2 is the quadrature budget on [0, T]. The returned error
/// adds the tail estimate to the quadrature estimate. `scale` is the envelope tail
/// factor C (1 when |f| ≤ envelope).
pub fn integrate_decaying<V: QuadValue>(
    f: impl FnMut(f64) -> V,
    envelope: impl Fn(f64) -> f64,
    scale: f64,
    tol: f64,
) -> Result<Integral<V>> {
    let (t_end, tail, edges) = truncation_point(&envelope, tol / (2.0 * scale.max(1e-300)))?;
    let mut r = integrate(f, &edges, tol / 2.0, 0.0, 200_000);
    r.error += tail * scale;
    r.truncation = t_end;
    Ok(r)
}

/// Finds T with envelope tail mass below `tail_tol`; returns (T, tail estimate, panel edges).
pub fn truncation_point(envelope: &impl Fn(f64) -> f64, tail_tol: f64) -> Result<(f64, f64, Vec<f64>)> {
    let e0 = envelope(0.0);
    if !e0.is_finite() {
        return Err(Error::NotIntegrable("envelope not finite at 0".into()));
    }
    // first scale: where the envelope has dropped to half its initial value
    let mut t1 = 1.0f64;
    if e0 > 0.0 {
        while envelope(t1) > 0.5 * e0 && t1 < 1e12 {
            t1 *= 2.0;
        }
        while envelope(0.5 * t1) <= 0.5 * e0 && t1 > 1e-12 {
            t1 *= 0.5;
        }
    }
    let mass = |a: f64, b: f64| integrate(&envelope, &[a, b], 1e-3 * tail_tol.min(1.0), 1e-8, 200).value;
    let mut edges = vec![0.0, t1];
    let mut prev = mass(0.0, t1);
    let mut stall = 0;
    const MAX_DOUBLINGS: usize = 60;
    for _ in 0..MAX_DOUBLINGS {
        let a = *edges.last().unwrap();
        let b = 2.0 * a;
        let m = mass(a, b);
        if !m.is_finite() {
            return Err(Error::NotIntegrable("envelope mass not finite".into()));
        }
        edges.push(b);
        let ratio = if prev > 0.0 { m / prev } else { 0.0 };
        let tail = if ratio < 1.0 { m * ratio / (1.0 - ratio) } else { f64::INFINITY };
        if tail < tail_tol {
            return Ok((b, tail, edges));
        }
        if ratio >= 0.999 {
            stall += 1;
            if stall >= 4 {
                return Err(Error::NotIntegrable(format!(
                    "dyadic panel masses stop decaying beyond t = {a:.3e} (ratio {ratio:.4})"
                )));
            }
        } else {
            stall = 0;
        }
        prev = m;
    }
    Err(Error::NotIntegrable(format!(
        "tail mass above {tail_tol:.3e} at t = {:.3e}",
        edges.last().unwrap()
    )))
}
