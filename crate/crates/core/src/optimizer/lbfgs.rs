//! Bound-constrained limited-memory BFGS with projected backtracking.
//!
//! Variables with `lo == hi` stay fixed. The quasi-Newton direction is built
//! on the free set (variables not pinned at a bound by an outward gradient)
//! and the step is projected back onto the box.

use std::collections::VecDeque;

/// Why the inner solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InnerStop {
    Converged,
    MaxIter,
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct InnerResult {
    pub stop: InnerStop,
    pub iterations: usize,
    pub projected_gradient: f64,
}

/// ∞-norm of the projected gradient: `g_i` for interior variables, only the
/// inward-pointing part at a bound, zero for fixed variables.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let gi = if lo[i] >= hi[i] {
            0.0
        } else if x[i] <= lo[i] {
            g[i].min(0.0)
        } else if x[i] >= hi[i] {
            g[i].max(0.0)
        } else {
            g[i]
        };
        // NaN must not pass as stationary
        if gi.is_nan() {
            return f64::INFINITY;
        }
        worst = worst.max(gi.abs());
    }
    worst
}

pub(crate) struct Settings {
    pub memory: usize,
    pub max_iter: usize,
    pub tol: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STALL_LIMIT: usize = 8;

/// Minimizes `f` over `lo ≤ x ≤ hi` starting from `x` (projected first).
/// `f(x, Some(g))` must fill `g` with the gradient; `f(x, None)` returns the
/// value only. Accepted values are appended to `trace`.
pub(crate) fn minimize<F>(
    f: &mut F,
    x: &mut [f64],
    lo: &[f64],
    hi: &[f64],
    settings: &Settings,
    trace: &mut Vec<f64>,
) -> InnerResult
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let n = x.len();
    for i in 0..n {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
    let mut g = vec![0.0; n];
    let mut fx = f(x, Some(&mut g));
    trace.push(fx);

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut free = vec![false; n];
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut alphas = vec![0.0; settings.memory];
    let mut stall = 0;

    for it in 0..settings.max_iter {
        let pg = projected_gradient_norm(x, &g, lo, hi);
        if pg <= settings.tol {
            return InnerResult {
                stop: InnerStop::Converged,
                iterations: it,
                projected_gradient: pg,
            };
        }
        for i in 0..n {
            free[i] = lo[i] < hi[i]
                && !(x[i] <= lo[i] && g[i] > 0.0)
                && !(x[i] >= hi[i] && g[i] < 0.0);
        }

        let mut accepted = false;
        for attempt in 0..2 {
            if attempt == 1 {
                if pairs.is_empty() {
                    break;
                }
                pairs.clear();
            }
            two_loop(&pairs, &g, &free, &mut d, &mut alphas);
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                pairs.clear();
                for i in 0..n {
                    d[i] = if free[i] { -g[i] } else { 0.0 };
                }
                slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
                if !(slope < 0.0) {
                    break;
                }
            }
            let mut alpha = if pairs.is_empty() {
                let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (1.0 / dmax).min(1.0)
            } else {
                1.0
            };
            for _ in 0..MAX_BACKTRACKS {
                let mut decrease = 0.0;
                for i in 0..n {
                    xn[i] = (x[i] + alpha * d[i]).clamp(lo[i], hi[i]);
                    decrease += g[i] * (xn[i] - x[i]);
                }
                if decrease < 0.0 {
                    let fnew = f(&xn, None);
                    if fnew.is_finite() && fnew <= fx + ARMIJO * decrease {
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return InnerResult {
                stop: InnerStop::Stalled,
                iterations: it,
                projected_gradient: pg,
            };
        }

        let fnew = f(&xn, Some(&mut gn));
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        let (mut sy, mut yy) = (0.0, 0.0);
        for i in 0..n {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
            sy += s[i] * y[i];
            yy += y[i] * y[i];
        }
        if sy > 1e-12 * yy && sy > 0.0 {
            if pairs.len() == settings.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        if fx - fnew <= 1e-15 * fx.abs().max(1.0) {
            stall += 1;
        } else {
            stall = 0;
        }
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        fx = fnew;
        trace.push(fx);
        if stall >= STALL_LIMIT {
            return InnerResult {
                stop: InnerStop::Stalled,
                iterations: it + 1,
                projected_gradient: projected_gradient_norm(x, &g, lo, hi),
            };
        }
    }
    InnerResult {
        stop: InnerStop::MaxIter,
        iterations: settings.max_iter,
        projected_gradient: projected_gradient_norm(x, &g, lo, hi),
    }
}

/// `d = −H g` restricted to the free set.
fn two_loop(
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    g: &[f64],
    free: &[bool],
    d: &mut [f64],
    alphas: &mut [f64],
) {
    let n = g.len();
    for i in 0..n {
        d[i] = if free[i] { g[i] } else { 0.0 };
    }
    let masked_dot = |a: &[f64], b: &[f64]| -> f64 {
        (0..n).filter(|&i| free[i]).map(|i| a[i] * b[i]).sum()
    };
    for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let a = rho * masked_dot(s, d);
        alphas[k] = a;
        for i in 0..n {
            if free[i] {
                d[i] -= a * y[i];
            }
        }
    }
    if let Some((s, y, _)) = pairs.back() {
        let sy = masked_dot(s, y);
        let yy = masked_dot(y, y);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            d.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for (k, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * masked_dot(y, d);
        for i in 0..n {
            if free[i] {
                d[i] += s[i] * (alphas[k] - b);
            }
        }
    }
    d.iter_mut().for_each(|v| *v = -*v);
}
