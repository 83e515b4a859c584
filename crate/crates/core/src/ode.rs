//! Dormand–Prince 5(4) for autonomous systems `y' = f(y)`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before giving up, relative to `max(1, |t|)`.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Sum of accepted local error estimates (max-norm, absolute).
    pub error_estimate: f64,
}

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate from `t = 0` to `t_end`. A failing right-hand side (for example a
/// stage that leaves the domain) is treated as a rejected step.
pub fn solve<F>(mut rhs: F, y0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<(Vec<f64>, OdeStats)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok((y, stats));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("integration horizon must be finite and >= 0, got {t_end}")));
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs(&y, &mut k[0])?;
    stats.evaluations += 1;

    let norm = |v: &[f64], scale: &[f64]| -> f64 {
        v.iter().zip(scale).fold(0.0f64, |m, (a, s)| m.max(a.abs() / s))
    };
    let scale0: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = norm(&y, &scale0);
    let d1 = norm(&k[0], &scale0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end);
    // very steep starts (large λ) legitimately need steps below the nominal floor
    let floor_scale = (h * 1e-6).min(opts.h_min);

    let mut t = 0.0;
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut last_failure = String::from("step size underflow");
    while t < t_end {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                steps: stats.steps,
                reason: "step budget exhausted".into(),
            });
        }
        if h < floor_scale * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                steps: stats.steps,
                reason: last_failure,
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let mut ok = true;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let after = &mut k[s..];
            stats.evaluations += 1;
            if let Err(e) = rhs(&stage, &mut after[0]) {
                last_failure = e.to_string();
                ok = false;
                break;
            }
            if after[0].iter().any(|v| !v.is_finite()) {
                last_failure = "non-finite derivative".into();
                ok = false;
                break;
            }
        }
        if !ok {
            stats.rejected += 1;
            h *= 0.25;
            continue;
        }
        // stage 7 is evaluated at the fifth-order solution
        y_new.copy_from_slice(&stage);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += E[j] * kj[i];
            }
            err[i] = h * acc;
        }
        let scale: Vec<f64> = y
            .iter()
            .zip(&y_new)
            .map(|(a, b)| opts.atol + opts.rtol * a.abs().max(b.abs()))
            .collect();
        let e = norm(&err, &scale);
        if e <= 1.0 {
            t = if last { t_end } else { t + h };
            stats.steps += 1;
            stats.error_estimate += err.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(6);
            first[0].copy_from_slice(&rest[0]);
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            last_failure = "local error above tolerance at the step-size floor".into();
            h *= (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let (y, stats) = solve(
            |y, dy| {
                dy[0] = -y[0];
                Ok(())
            },
            &[1.0],
            2.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y[0], (-2.0f64).exp(), max_relative = 1e-9);
        assert!(stats.steps > 0);
    }

    #[test]
    fn riccati_closed_form() {
        // y' = -y²/2, y(0) = 1 → y(t) = 1 / (1 + t/2)
        let (y, _) = solve(
            |y, dy| {
                dy[0] = -0.5 * y[0] * y[0];
                Ok(())
            },
            &[1.0],
            1.0,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y[0], 2.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn blowup_is_a_clean_error() {
        let res = solve(
            |y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            2.0,
            &OdeOptions::default(),
        );
        assert!(matches!(res, Err(Error::Integration { .. })));
    }

    #[test]
    fn zero_horizon_is_identity() {
        let (y, stats) = solve(|_, _| panic!("no evaluation expected"), &[3.0, 4.0], 0.0, &OdeOptions::default()).unwrap();
        assert_eq!(y, vec![3.0, 4.0]);
        assert_eq!(stats.steps, 0);
    }
}
