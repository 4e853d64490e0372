//! Explicit Runge-Kutta integrators: adaptive Dormand-Prince 5(4) and
//! classical fixed-step RK4.

use serde::Serialize;

use crate::error::{FinslerError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Steps below this fraction of the interval are a failure.
    pub min_step_fraction: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            max_steps: 100_000,
            min_step_fraction: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest accepted scaled local error estimate; at most 1.
    pub max_error_ratio: f64,
}

impl OdeStats {
    pub fn merge(&mut self, other: &OdeStats) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
        self.max_error_ratio = self.max_error_ratio.max(other.max_error_ratio);
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `u' = f(t, u)` from `t0` to `t1`. `observe` sees every accepted
/// state, including the initial one, and may abort the solve.
pub fn dopri5<T, F, O>(
    mut f: F,
    t0: T,
    t1: T,
    u0: &[T],
    opts: &OdeOptions,
    mut observe: O,
) -> Result<(Vec<T>, OdeStats)>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    O: FnMut(T, &[T]) -> Result<()>,
{
    let dim = u0.len();
    let mut stats = OdeStats::default();
    let mut u = u0.to_vec();
    let mut t = t0;
    observe(t, &u)?;
    let span = t1 - t0;
    if span == T::zero() {
        return Ok((u, stats));
    }
    let dir = span.signum();
    let (rtol, atol) = (T::lit(opts.rtol), T::lit(opts.atol));
    let h_min = span.abs() * T::lit(opts.min_step_fraction);

    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    f(t, &u, &mut k[0])?;
    stats.evaluations += 1;

    // Initial step from the size of the derivative.
    let d0 = scaled_norm(&u, &u, &u, rtol, atol);
    let d1 = scaled_norm(&k[0], &u, &u, rtol, atol);
    let mut h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h = h.min(span.abs()) * dir;

    let mut stage = vec![T::zero(); dim];
    let mut u5 = vec![T::zero(); dim];
    let mut last_rejected = false;
    loop {
        if (t1 - t) * dir <= T::zero() {
            break;
        }
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(FinslerError::StepFailure {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
        if (t + h - t1) * dir > T::zero() {
            h = t1 - t;
        }
        for s in 1..7 {
            for d in 0..dim {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += T::lit(A[s][j]) * kj[d];
                }
                stage[d] = u[d] + h * acc;
            }
            f(t + T::lit(C[s]) * h, &stage, &mut k[s])?;
            stats.evaluations += 1;
        }
        let mut err = T::zero();
        for d in 0..dim {
            let mut s5 = T::zero();
            let mut s4 = T::zero();
            for s in 0..7 {
                s5 += T::lit(B5[s]) * k[s][d];
                s4 += T::lit(B4[s]) * k[s][d];
            }
            u5[d] = u[d] + h * s5;
            let sc = atol + rtol * u[d].abs().max(u5[d].abs());
            let e = h * (s5 - s4) / sc;
            err += e * e;
        }
        err = (err / T::from_usize_lossy(dim.max(1))).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= T::lit(0.25);
            if h.abs() < h_min {
                return Err(FinslerError::StepFailure {
                    t: t.to_f64_lossy(),
                    h: h.to_f64_lossy(),
                });
            }
            last_rejected = true;
            continue;
        }
        if err <= T::one() {
            t += h;
            std::mem::swap(&mut u, &mut u5);
            stats.steps += 1;
            stats.max_error_ratio = stats.max_error_ratio.max(err.to_f64_lossy());
            observe(t, &u)?;
            // First-same-as-last: the seventh stage is f at the new state.
            k.swap(0, 6);
            let mut fac = T::lit(0.9) * err.max(T::lit(1e-10)).powf(T::lit(-0.2));
            fac = fac.min(T::lit(5.0)).max(T::lit(0.2));
            if last_rejected {
                fac = fac.min(T::one());
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.1));
            h *= fac;
            last_rejected = true;
        }
        if h.abs() < h_min && (t1 - t) * dir > h_min {
            return Err(FinslerError::StepFailure {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
    }
    Ok((u, stats))
}

fn scaled_norm<T: Real>(v: &[T], a: &[T], b: &[T], rtol: T, atol: T) -> T {
    let mut s = T::zero();
    for d in 0..v.len() {
        let sc = atol + rtol * a[d].abs().max(b[d].abs());
        s += (v[d] / sc) * (v[d] / sc);
    }
    (s / T::from_usize_lossy(v.len().max(1))).sqrt()
}

/// Classical fourth-order Runge-Kutta with `steps` equal steps.
pub fn rk4<T, F>(mut f: F, t0: T, t1: T, u0: &[T], steps: usize) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    let dim = u0.len();
    let h = (t1 - t0) / T::from_usize_lossy(steps.max(1));
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let mut u = u0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
        vec![T::zero(); dim],
    );
    let mut tmp = vec![T::zero(); dim];
    for s in 0..steps.max(1) {
        let t = t0 + h * T::from_usize_lossy(s);
        f(t, &u, &mut k1)?;
        for d in 0..dim {
            tmp[d] = u[d] + half * h * k1[d];
        }
        f(t + half * h, &tmp, &mut k2)?;
        for d in 0..dim {
            tmp[d] = u[d] + half * h * k2[d];
        }
        f(t + half * h, &tmp, &mut k3)?;
        for d in 0..dim {
            tmp[d] = u[d] + h * k3[d];
        }
        f(t + h, &tmp, &mut k4)?;
        for d in 0..dim {
            u[d] += h * sixth * (k1[d] + T::lit(2.0) * (k2[d] + k3[d]) + k4[d]);
        }
    }
    Ok(u)
}
