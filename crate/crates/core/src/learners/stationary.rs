//! Stationary distributions of row-stochastic matrices.
//!
//! Power iteration on the lazy, slightly damped chain
//! `P = 1/2 (I + (1 - lambda) Q + lambda U)` with `U` uniform. Laziness removes
//! periodicity and damping makes the fixed point unique when `Q` is
//! reducible; neither moves the fixed point by more than `lambda`. The
//! residual is always measured against the undamped `Q`. If the iteration cap
//! is hit (slowly mixing `Q`) the linear system `pi (Q - I) = 0, sum pi = 1`
//! is solved directly as a fallback.

use crate::error::{Error, Result};

pub const DAMPING: f64 = 1e-12;
pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;
/// Largest residual accepted from the direct-solve fallback.
pub const FALLBACK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub used_fallback: bool,
}

/// `||pi Q - pi||_1`.
pub fn residual(q: &[Vec<f64>], pi: &[f64]) -> f64 {
    left_multiply(q, pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

fn left_multiply(q: &[Vec<f64>], pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pi.len()];
    for (row, &p) in q.iter().zip(pi) {
        if p == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(row) {
            *o += p * v;
        }
    }
    out
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    for x in v {
        *x /= s;
    }
}

/// Stationary distribution of `q`, warm-started from `start` when given.
pub fn stationary_distribution(q: &[Vec<f64>], start: Option<&[f64]>) -> Result<(Vec<f64>, Diagnostics)> {
    let k = q.len();
    if k == 0 || q.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidDistribution("stationary solver needs a square matrix".into()));
    }
    let mut pi = match start {
        Some(s) if s.len() == k && s.iter().all(|v| *v >= 0.0) && s.iter().sum::<f64>() > 0.0 => {
            s.to_vec()
        }
        _ => vec![1.0 / k as f64; k],
    };
    normalize(&mut pi);
    let uniform = DAMPING / k as f64;
    let mut last = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let next = left_multiply(q, &pi);
        last = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if last <= TOLERANCE {
            return Ok((
                pi,
                Diagnostics {
                    iterations: it,
                    residual: last,
                    used_fallback: false,
                },
            ));
        }
        for (p, n) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + (1.0 - DAMPING) * n + uniform);
        }
        normalize(&mut pi);
    }
    log::debug!("power iteration stalled at residual {last:e}; solving directly");
    let direct = solve_direct(q);
    let r = direct.as_ref().map_or(f64::INFINITY, |p| residual(q, p));
    match direct {
        Some(p) if r <= FALLBACK_TOLERANCE => Ok((
            p,
            Diagnostics {
                iterations: MAX_ITERATIONS,
                residual: r,
                used_fallback: true,
            },
        )),
        _ => Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: last.min(r),
        }),
    }
}

/// Gaussian elimination on `(Q - I)^T pi = 0` with the last equation
/// replaced by `sum pi = 1`.
fn solve_direct(q: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = q.len();
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            let mut row: Vec<f64> = (0..k).map(|c| q[c][r] - f64::from(u8::from(r == c))).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..k).map(|r| (a[r][k] / a[r][r]).max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    normalize(&mut pi);
    Some(pi)
}
