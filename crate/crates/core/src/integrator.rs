// Explicit Runge-Kutta integrators on small fixed-size real vectors.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for &(c, k) in terms {
        if c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Adaptive Dormand-Prince 5(4). Lands exactly on `t1`. `step` carries the
/// step-size estimate across calls; `check` runs after every accepted step.
pub(crate) fn dopri54<const N: usize, F, C>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerances,
    step: &mut f64,
    mut check: C,
) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(f64, &[f64; N]) -> Result<()>,
{
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let mut t = t0;
    let mut y = y0;
    if t1 <= t0 {
        return Ok(y);
    }
    let mut h = if *step > 0.0 { step.min(tol.max_step) } else { tol.max_step.min(1e-3) };
    let mut k1 = f(t, &y);

    while t < t1 {
        let last = t + h * (1.0 + 1e-9) >= t1;
        let hh = if last { t1 - t } else { h };
        if !last && hh <= 16.0 * f64::EPSILON * t.abs() {
            return Err(Error::StepUnderflow { t, step: hh });
        }
        let k2 = f(t + C2 * hh, &axpy(&y, hh, &[(A21, &k1)]));
        let k3 = f(t + C3 * hh, &axpy(&y, hh, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hh, &axpy(&y, hh, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hh, &axpy(&y, hh, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            t + hh,
            &axpy(&y, hh, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, hh, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + hh, &y_new);

        let mut err = 0.0f64;
        for i in 0..N {
            let e = hh
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + hh };
            y = y_new;
            k1 = k7;
            check(t, &y)?;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // keep the pre-truncation step when the final step was shortened
            h = (h.max(hh) * grow).min(tol.max_step);
        } else {
            h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    *step = h;
    Ok(y)
}

/// Classic fixed-step RK4; the last step is shortened to land on `t1`.
pub(crate) fn rk4<const N: usize, F, C>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    h: f64,
    mut check: C,
) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(f64, &[f64; N]) -> Result<()>,
{
    let mut t = t0;
    let mut y = y0;
    while t < t1 {
        let last = t + h * (1.0 + 1e-9) >= t1;
        let hh = if last { t1 - t } else { h };
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * hh, &axpy(&y, hh, &[(0.5, &k1)]));
        let k3 = f(t + 0.5 * hh, &axpy(&y, hh, &[(0.5, &k2)]));
        let k4 = f(t + hh, &axpy(&y, hh, &[(1.0, &k3)]));
        y = axpy(&y, hh, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
        t = if last { t1 } else { t + hh };
        check(t, &y)?;
    }
    Ok(y)
}
