//! Dormand–Prince 5(4) with Hairer's continuous extension.

use crate::error::IntegrationError;
use crate::scalar::Real;

use super::IntegratorConfig;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn rms_scaled<T: Real>(v: &[T], y: &[T], y2: &[T], atol: T, rtol: T) -> T {
    let n = T::lit(v.len().max(1) as f64);
    let s: T = v
        .iter()
        .zip(y)
        .zip(y2)
        .map(|((&e, &a), &b)| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Linear combination `y + h Σ c_i k_i` written into `out`.
fn combine<T: Real>(out: &mut [T], y: &[T], h: T, terms: &[(f64, &[T])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (c, k) in terms {
            if *c != 0.0 {
                acc = acc + T::lit(*c) * k[i];
            }
        }
        *o = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t = 0` and returns the solution at each
/// requested time (ascending, non-negative).
pub fn integrate<T, F>(rhs: F, y0: &[T], t_out: &[T], cfg: &IntegratorConfig) -> Result<Vec<Vec<T>>, IntegrationError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<(), IntegrationError>,
{
    integrate_controlled(rhs, y0, y0.len(), t_out, cfg)
}

/// As [`integrate`], with step-size control looking only at the first
/// `controlled` components. Trailing components that do not feed back into
/// the leading ones (forward sensitivities) then ride along on the same step
/// sequence, so the leading block is bit-identical with or without them.
pub fn integrate_controlled<T, F>(
    mut rhs: F,
    y0: &[T],
    controlled: usize,
    t_out: &[T],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<T>>, IntegrationError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<(), IntegrationError>,
{
    let n = y0.len();
    let nc = controlled.min(n);
    let atol = T::lit(cfg.atol);
    let rtol = T::lit(cfg.rtol);
    let mut out = Vec::with_capacity(t_out.len());
    let mut next = 0;
    let mut t = T::zero();
    while next < t_out.len() && t_out[next] <= t {
        out.push(y0.to_vec());
        next += 1;
    }
    if next == t_out.len() {
        return Ok(out);
    }
    let t_end = *t_out.last().unwrap();

    let mut y = y0.to_vec();
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut k5 = vec![T::zero(); n];
    let mut k6 = vec![T::zero(); n];
    let mut k7 = vec![T::zero(); n];
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    let mut err = vec![T::zero(); n];
    rhs(t, &y, &mut k1)?;

    let mut h = match cfg.initial_step {
        Some(h0) => T::lit(h0),
        None => initial_step(&mut rhs, t, &y, &k1, nc, atol, rtol, &mut ytmp, &mut k2)?,
    };
    h = h.min(t_end - t);

    let mut steps = 0usize;
    let mut last_rejected = false;
    let mut nonfinite = false;
    loop {
        if steps >= cfg.max_steps {
            return Err(IntegrationError::StepLimit(cfg.max_steps));
        }
        steps += 1;
        let remaining = t_end - t;
        if h >= remaining {
            h = remaining;
        }
        if h <= T::epsilon() * T::lit(16.0) * t.abs().max(T::one()) {
            if nonfinite {
                return Err(IntegrationError::NonFinite { t: t.to_f64_lossy(), theta: vec![] });
            }
            return Err(IntegrationError::StepUnderflow(t.to_f64_lossy()));
        }

        combine(&mut ytmp, &y, h, &[(A21, &k1)]);
        rhs(t + T::lit(C2) * h, &ytmp, &mut k2)?;
        combine(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        rhs(t + T::lit(C3) * h, &ytmp, &mut k3)?;
        combine(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        rhs(t + T::lit(C4) * h, &ytmp, &mut k4)?;
        combine(&mut ytmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        rhs(t + T::lit(C5) * h, &ytmp, &mut k5)?;
        combine(&mut ytmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        rhs(t + h, &ytmp, &mut k6)?;
        combine(&mut ynew, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if h == remaining { t_end } else { t + h };
        rhs(t_new, &ynew, &mut k7)?;

        for i in 0..n {
            err[i] = h
                * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
        }
        let e = rms_scaled(&err[..nc], &y[..nc], &ynew[..nc], atol, rtol);

        if !e.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            h = h * T::lit(FAC_MIN);
            last_rejected = true;
            nonfinite = true;
            continue;
        }

        if e <= T::one() {
            // dense output for requested times inside (t, t_new]
            while next < t_out.len() && t_out[next] <= t_new {
                let tq = t_out[next];
                if tq == t_new {
                    out.push(ynew.clone());
                } else {
                    let s = (tq - t) / h;
                    let s1 = T::one() - s;
                    let mut yq = vec![T::zero(); n];
                    for i in 0..n {
                        let r2 = ynew[i] - y[i];
                        let r3 = h * k1[i] - r2;
                        let r4 = r2 - h * k7[i] - r3;
                        let r5 = h
                            * (T::lit(D1) * k1[i]
                                + T::lit(D3) * k3[i]
                                + T::lit(D4) * k4[i]
                                + T::lit(D5) * k5[i]
                                + T::lit(D6) * k6[i]
                                + T::lit(D7) * k7[i]);
                        yq[i] = y[i] + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
                    }
                    out.push(yq);
                }
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if next == t_out.len() {
                return Ok(out);
            }
            let mut fac = if e == T::zero() {
                T::lit(FAC_MAX)
            } else {
                (T::lit(SAFETY) * e.powf(T::lit(-0.2))).min(T::lit(FAC_MAX)).max(T::lit(FAC_MIN))
            };
            if last_rejected {
                fac = fac.min(T::one());
            }
            h = h * fac;
            last_rejected = false;
            nonfinite = false;
        } else {
            let fac = (T::lit(SAFETY) * e.powf(T::lit(-0.2))).max(T::lit(FAC_MIN));
            h = h * fac;
            last_rejected = true;
            nonfinite = false;
        }
    }
}

/// Initial step heuristic from Hairer, Nørsett & Wanner.
#[allow(clippy::too_many_arguments)]
fn initial_step<T, F>(
    rhs: &mut F,
    t: T,
    y: &[T],
    f0: &[T],
    nc: usize,
    atol: T,
    rtol: T,
    y1: &mut [T],
    f1: &mut [T],
) -> Result<T, IntegrationError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<(), IntegrationError>,
{
    let yc = &y[..nc];
    let d0 = rms_scaled(yc, yc, yc, atol, rtol);
    let d1 = rms_scaled(&f0[..nc], yc, yc, atol, rtol);
    let tiny = T::lit(1e-5);
    let h0 = if d0 < tiny || d1 < tiny { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    for i in 0..y.len() {
        y1[i] = y[i] + h0 * f0[i];
    }
    rhs(t + h0, y1, f1)?;
    let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = rms_scaled(&diff[..nc], yc, yc, atol, rtol) / h0;
    let m = d1.max(d2);
    let h1 = if m <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / m).powf(T::lit(0.2))
    };
    Ok((T::lit(100.0) * h0).min(h1))
}
