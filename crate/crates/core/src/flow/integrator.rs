//! Explicit Runge-Kutta time stepping for method-of-lines systems.
//!
//! The adaptive path is the Dormand-Prince 5(4) pair (FSAL) with a PI step
//! size controller; the fixed path is classical RK4. Both land exactly on
//! caller-supplied checkpoint times and report every accepted step through
//! a callback that may stop the integration early.

/// Right-hand side `dy/dt = f(t, y)` that may refuse to evaluate.
pub trait OdeSystem {
    type Error: Clone;

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Self::Error>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Dormand-Prince 5(4) with error control.
    Adaptive { rel_tol: f64, abs_tol: f64 },
    /// Classical RK4 with a constant step in `t`.
    FixedRk4 { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_steps: usize,
    /// Smallest admissible step before the run is abandoned.
    pub min_dt: f64,
}

/// Returned by the step callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Data handed to the callback after each accepted step.
pub struct Accepted<'a> {
    pub t: f64,
    pub dt: f64,
    pub y: &'a [f64],
    pub dydt: &'a [f64],
    /// Set when `t` is one of the requested checkpoints.
    pub checkpoint: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<E> {
    /// Reached the final time.
    Finished,
    /// The callback asked to stop at `t`.
    Stopped { t: f64 },
    /// Step budget exhausted at `t`.
    MaxSteps { t: f64 },
    /// The right-hand side failed and the step could not be shrunk further.
    Failed { t: f64, error: E },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand-Prince 5(4) tableau.
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

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller constants (Hairer, Wanner: beta = 0.04, alpha = 0.2 - 0.75 beta).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

/// Integrates `sys` from `t0` to `t1`, overwriting `y` with the last accepted state.
///
/// `checkpoints` must be sorted ascending; values outside `(t0, t1]` are ignored.
pub fn integrate<S, F>(
    sys: &mut S,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    method: Method,
    limits: Limits,
    checkpoints: &[f64],
    mut on_step: F,
) -> (Outcome<S::Error>, Stats)
where
    S: OdeSystem,
    F: FnMut(&Accepted<'_>) -> Control,
{
    let mut stats = Stats::default();
    let mut ws = Workspace::new(y.len());
    let mut next_cp = checkpoints.partition_point(|&c| c <= t0);

    if let Err(error) = sys.rhs(t0, y, &mut ws.k[0]) {
        return (Outcome::Failed { t: t0, error }, stats);
    }
    stats.evaluations += 1;

    let mut t = t0;
    let (mut dt, adaptive) = match method {
        Method::Adaptive { .. } => (initial_step(t1 - t0, y, &ws.k[0]), true),
        Method::FixedRk4 { dt } => (dt, false),
    };
    let mut err_prev: f64 = 1e-4;
    let mut last_failure: Option<S::Error> = None;

    loop {
        if t >= t1 {
            return (Outcome::Finished, stats);
        }
        if stats.accepted >= limits.max_steps {
            return (Outcome::MaxSteps { t }, stats);
        }

        // Land on the next checkpoint or the end point without overshooting.
        let cp_target = checkpoints.get(next_cp).copied().filter(|&c| c <= t1);
        let target = cp_target.unwrap_or(t1);
        let mut h = dt.min(target - t);
        let mut hits_target = false;
        if t + h >= target || target - (t + h) < 1e-12 * target.abs().max(1.0) {
            h = target - t;
            hits_target = true;
        }

        let step = if adaptive {
            dopri_step(sys, t, h, y, &mut ws, &mut stats)
        } else {
            rk4_step(sys, t, h, y, &mut ws, &mut stats)
        };

        match step {
            Err(error) => {
                stats.rejected += 1;
                if !adaptive || h * 0.25 < limits.min_dt {
                    return (Outcome::Failed { t, error }, stats);
                }
                last_failure = Some(error);
                dt = h * 0.25;
                continue;
            }
            Ok(()) => {
                let (rel_tol, abs_tol) = match method {
                    Method::Adaptive { rel_tol, abs_tol } => (rel_tol, abs_tol),
                    Method::FixedRk4 { .. } => (0.0, 0.0),
                };
                if adaptive {
                    let e = error_norm(&ws.tmp, y, &ws.y_new, rel_tol, abs_tol);
                    if !(e <= 1.0) {
                        stats.rejected += 1;
                        let fac = if e.is_finite() {
                            (SAFETY * e.powf(-ALPHA)).max(FAC_MIN)
                        } else {
                            FAC_MIN
                        };
                        dt = h * fac.min(1.0);
                        if dt < limits.min_dt {
                            return match last_failure.take() {
                                Some(error) => (Outcome::Failed { t, error }, stats),
                                None => (Outcome::MaxSteps { t }, stats),
                            };
                        }
                        continue;
                    }
                    let e = e.max(1e-10);
                    let fac = SAFETY * e.powf(-ALPHA) * err_prev.powf(BETA);
                    let fac = fac.clamp(FAC_MIN, FAC_MAX);
                    err_prev = e;
                    // Keep the controller's step, not the clipped one, when a
                    // checkpoint shortened this step.
                    let base = if hits_target { dt.max(h) } else { h };
                    dt = base * fac;
                }

                t = if hits_target { target } else { t + h };
                y.copy_from_slice(&ws.y_new);
                // FSAL: the last stage is the derivative at the new point.
                ws.k.swap(0, 6);
                stats.accepted += 1;
                last_failure = None;

                let checkpoint = if hits_target && cp_target == Some(target) {
                    next_cp += 1;
                    Some(next_cp - 1)
                } else {
                    None
                };
                let info = Accepted {
                    t,
                    dt: h,
                    y,
                    dydt: &ws.k[0],
                    checkpoint,
                };
                if on_step(&info) == Control::Stop {
                    return (Outcome::Stopped { t }, stats);
                }
            }
        }
    }
}

fn initial_step(span: f64, y: &[f64], f0: &[f64]) -> f64 {
    let d0 = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let d1 = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span).max(1e-12 * span)
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = abs_tol + rel_tol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// One Dormand-Prince step; `ws.k[0]` must hold `f(t, y)` on entry. On
/// success `ws.y_new` holds the fifth-order solution, `ws.k[6]` the
/// derivative there, and `ws.tmp` the local error estimate.
fn dopri_step<S: OdeSystem>(
    sys: &mut S,
    t: f64,
    h: f64,
    y: &[f64],
    ws: &mut Workspace,
    stats: &mut Stats,
) -> Result<(), S::Error> {
    let n = y.len();
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, tmp, k2)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, tmp, k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, tmp, k4)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, tmp, k5)?;
    for i in 0..n {
        tmp[i] = y[i]
            + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, tmp, k6)?;
    for i in 0..n {
        y_new[i] = y[i]
            + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    sys.rhs(t + h, y_new, k7)?;
    stats.evaluations += 6;

    for i in 0..n {
        tmp[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(())
}

/// One classical RK4 step with the same workspace conventions as [`dopri_step`].
fn rk4_step<S: OdeSystem>(
    sys: &mut S,
    t: f64,
    h: f64,
    y: &[f64],
    ws: &mut Workspace,
    stats: &mut Stats,
) -> Result<(), S::Error> {
    let n = y.len();
    let Workspace { k, tmp, y_new } = ws;
    let [k1, k2, k3, k4, _, _, k7] = k;

    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, tmp, k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, tmp, k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, tmp, k4)?;
    for i in 0..n {
        y_new[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    sys.rhs(t + h, y_new, k7)?;
    stats.evaluations += 4;
    tmp.iter_mut().for_each(|e| *e = 0.0);
    Ok(())
}
