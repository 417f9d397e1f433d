//! Scaling-and-squaring Padé matrix exponential (Higham 2005 degree selection).

use super::linalg::{CMatrix, C64};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// e^M for a square complex matrix. Non-normal input is fine; no eigendecomposition is used.
pub fn matrix_exp(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("matrix_exp needs a square matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix_exp input".into()));
    }
    let nrm = norm1(m);
    let id = CMatrix::identity(n, n);
    let result = if nrm <= THETA13 {
        let a2 = m * m;
        let (deg, _) = *THETA.iter().find(|(_, th)| nrm <= *th).unwrap_or(&(13, THETA13));
        pade(m, &a2, &id, deg)?
    } else {
        let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
        let scaled = m * r(2f64.powi(-s));
        let a2 = &scaled * &scaled;
        let mut x = pade(&scaled, &a2, &id, 13)?;
        for _ in 0..s {
            x = &x * &x;
        }
        x
    };
    if result.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpOverflow { norm: nrm });
    }
    Ok(result)
}

fn pade(a: &CMatrix, a2: &CMatrix, id: &CMatrix, deg: usize) -> Result<CMatrix> {
    let (u, v) = match deg {
        3 => {
            let u = a * (a2 * r(B3[3]) + id * r(B3[1]));
            let v = a2 * r(B3[2]) + id * r(B3[0]);
            (u, v)
        }
        5 => {
            let a4 = a2 * a2;
            let u = a * (&a4 * r(B5[5]) + a2 * r(B5[3]) + id * r(B5[1]));
            let v = &a4 * r(B5[4]) + a2 * r(B5[2]) + id * r(B5[0]);
            (u, v)
        }
        7 => {
            let a4 = a2 * a2;
            let a6 = &a4 * a2;
            let u = a * (&a6 * r(B7[7]) + &a4 * r(B7[5]) + a2 * r(B7[3]) + id * r(B7[1]));
            let v = &a6 * r(B7[6]) + &a4 * r(B7[4]) + a2 * r(B7[2]) + id * r(B7[0]);
            (u, v)
        }
        9 => {
            let a4 = a2 * a2;
            let a6 = &a4 * a2;
            let a8 = &a6 * a2;
            let u = a * (&a8 * r(B9[9]) + &a6 * r(B9[7]) + &a4 * r(B9[5]) + a2 * r(B9[3]) + id * r(B9[1]));
            let v = &a8 * r(B9[8]) + &a6 * r(B9[6]) + &a4 * r(B9[4]) + a2 * r(B9[2]) + id * r(B9[0]);
            (u, v)
        }
        _ => {
            let a4 = a2 * a2;
            let a6 = &a4 * a2;
            let b = &B13;
            let inner_u = &a6 * (&a6 * r(b[13]) + &a4 * r(b[11]) + a2 * r(b[9]));
            let u = a * (inner_u + &a6 * r(b[7]) + &a4 * r(b[5]) + a2 * r(b[3]) + id * r(b[1]));
            let inner_v = &a6 * (&a6 * r(b[12]) + &a4 * r(b[10]) + a2 * r(b[8]));
            let v = inner_v + &a6 * r(b[6]) + &a4 * r(b[4]) + a2 * r(b[2]) + id * r(b[0]);
            (u, v)
        }
    };
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).ok_or_else(|| Error::Numerical("singular Padé denominator".into()))
}
