//! Spectral projected gradient over products of demand simplices.

use log::debug;

use super::simplex::project_onto_simplex;
use crate::game::StrategyProfile;

const ARMIJO: f64 = 1e-4;
/// Relative size of objective changes indistinguishable from rounding.
const NOISE: f64 = 1e-12;
/// Past values the line search may fall back on.
const MEMORY: usize = 10;
const STEP_MIN: f64 = 1e-30;
const STEP_MAX: f64 = 1e30;

/// Shifts every user's gradient row so it averages zero over the links the
/// user currently uses. Projection onto a demand simplex ignores such
/// shifts, and removing them keeps the small differences that matter from
/// cancelling against a large common part.
pub(crate) fn center_rows(g: &mut [f64], p: &StrategyProfile) {
    let l = p.n_links();
    for (i, row) in g.chunks_mut(l).enumerate() {
        let x = p.row(i);
        let used = x.iter().filter(|&&v| v > 0.0).count();
        let mean = if used > 0 {
            row.iter().zip(x).filter(|(_, &v)| v > 0.0).map(|(r, _)| r).sum::<f64>() / used as f64
        } else {
            row.iter().sum::<f64>() / l as f64
        };
        row.iter_mut().for_each(|r| *r -= mean);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct Ascent {
    pub profile: StrategyProfile,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Maximizes `value` over profiles with fixed row sums `demands`.
///
/// `value` returns `-inf` outside the domain, `grad` is its gradient and
/// `residual(p, grad)` the stopping measure. Steps follow Barzilai-Borwein
/// lengths with a non-monotone Armijo search along the projected direction;
/// `first_step` seeds the first length. The best profile seen is returned.
pub(crate) fn ascend<V, G, R>(
    demands: &[f64],
    start: StrategyProfile,
    value: V,
    grad: G,
    residual: R,
    first_step: f64,
    max_iters: usize,
    tol: f64,
) -> Ascent
where
    V: Fn(&StrategyProfile) -> f64,
    G: Fn(&StrategyProfile) -> Vec<f64>,
    R: Fn(&StrategyProfile, &[f64]) -> f64,
{
    let (n, l) = (start.n_users(), start.n_links());
    let mut p = start;
    let mut v = value(&p);
    let mut history = vec![v];
    let mut best = (v, p.clone(), f64::INFINITY);
    let mut step = first_step.clamp(STEP_MIN, STEP_MAX);
    let mut prev: Option<(StrategyProfile, Vec<f64>)> = None;
    let mut iterations = max_iters;

    for iter in 0..max_iters {
        let mut g = grad(&p);
        let r = residual(&p, &g);
        if v >= best.0 {
            best = (v, p.clone(), r);
        }
        if r < tol {
            return Ascent {
                profile: p,
                value: v,
                iterations: iter,
                residual: r,
            };
        }
        center_rows(&mut g, &p);

        if let Some((pp, pg)) = &prev {
            let s: Vec<f64> = p.as_slice().iter().zip(pp.as_slice()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            // Negative curvature along the last move is the usual concave case.
            step = if sy < 0.0 {
                (dot(&s, &s) / -sy).clamp(STEP_MIN, STEP_MAX)
            } else {
                (2.0 * step).min(STEP_MAX)
            };
        }

        let project = |len: f64| {
            let mut q = StrategyProfile::zeros(n, l);
            for i in 0..n {
                let moved: Vec<f64> = (0..l).map(|k| p.get(i, k) + len * g[i * l + k]).collect();
                q.row_mut(i).copy_from_slice(&project_onto_simplex(&moved, demands[i]));
            }
            q
        };

        // Backtrack along the projection arc rather than a chord, so flows
        // that should vanish reach exactly zero.
        // Non-monotone: measure against the worst of the recent values.
        let reference = history.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut t = 1.0;
        let mut accepted = None;
        while t * step > STEP_MIN && t > 1e-20 {
            let trial = project(t * step);
            let d: Vec<f64> = trial.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a - b).collect();
            let rise = dot(&g, &d);
            if !(rise > 0.0) {
                break;
            }
            let tv = value(&trial);
            if tv.is_finite() {
                // Near a maximum the value change drowns in rounding; the
                // slope at the trial still tells whether the step overshot.
                let flat = (tv - v).abs() <= NOISE * v.abs().max(1.0) && {
                    let mut gt = grad(&trial);
                    center_rows(&mut gt, &p);
                    dot(&gt, &d) >= 0.0
                };
                if tv >= reference + ARMIJO * rise || flat {
                    accepted = Some((trial, tv));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, tv)) = accepted else {
            debug!("ascent stalled at iteration {iter}, residual {r:.3e}, value {v}");
            iterations = iter;
            break;
        };
        prev = Some((std::mem::replace(&mut p, trial), g));
        v = tv;
        history.push(v);
        if history.len() > MEMORY {
            history.remove(0);
        }
    }

    let g = grad(&p);
    let r = residual(&p, &g);
    if v >= best.0 {
        best = (v, p, r);
    }
    let (value, profile, residual) = best;
    Ascent {
        profile,
        value,
        iterations,
        residual,
    }
}
