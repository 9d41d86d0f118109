//! Water-filling: equalize strictly increasing marginals across links.
//!
//! For a level `lambda`, each link's own flow is the inverse of its marginal
//! at `lambda` (zero when the marginal at zero flow already exceeds it). The
//! level is then chosen so the flows add up to the demand. Both searches are
//! bracketed bisections accelerated by Newton steps whenever those stay
//! inside the bracket.

use crate::cost::CostModel;

const MAX_ROOT_STEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct WaterFill {
    pub flows: Vec<f64>,
    /// Common marginal cost on every link carrying flow.
    pub level: f64,
}

/// Root of an increasing function on `[lo, hi]` with `g(lo) <= 0 <= g(hi)`.
/// `g` returns value and derivative. Stops when the bracket or the value is
/// below the given tolerances.
fn bracketed_root(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol_value: f64,
) -> f64 {
    let mut z = 0.5 * (lo + hi);
    for _ in 0..MAX_ROOT_STEPS {
        let (v, d) = g(z);
        if v.abs() <= tol_value {
            return z;
        }
        if v < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = z - v / d;
        z = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    z
}

/// Own flow on one link at marginal level `level`, given `background`
/// flow from others and an upper bound `cap` (the demand).
pub(crate) fn flow_at_level(model: &CostModel, background: f64, level: f64, cap: f64) -> f64 {
    if model.marginal(0.0, background) >= level {
        return 0.0;
    }
    let room = model.capacity().map_or(f64::INFINITY, |c| c - background);
    if cap < room && model.marginal(cap, background + cap) <= level {
        return cap;
    }
    let hi = cap.min(room);
    let tol = 1e-14 * level.abs().max(1.0);
    bracketed_root(
        |x| {
            let f = background + x;
            (
                model.marginal(x, f) - level,
                model.marginal_slope(x, f),
            )
        },
        0.0,
        hi,
        tol,
    )
    .clamp(0.0, hi)
}

/// Splits `demand` over the links described by `models` and `background`
/// so that all used links share the same marginal. Returns `None` when
/// residual capacity cannot carry the demand.
pub fn water_fill(models: &[&CostModel], background: &[f64], demand: f64) -> Option<WaterFill> {
    debug_assert_eq!(models.len(), background.len());
    let n = models.len();
    if demand <= 0.0 {
        let level = models
            .iter()
            .zip(background)
            .map(|(m, &b)| m.marginal(0.0, b))
            .fold(f64::INFINITY, f64::min);
        return Some(WaterFill {
            flows: vec![0.0; n],
            level,
        });
    }
    let room: f64 = models
        .iter()
        .zip(background)
        .map(|(m, &b)| m.capacity().map_or(f64::INFINITY, |c| (c - b).max(0.0)))
        .sum();
    if room <= demand {
        return None;
    }

    let fill = |level: f64| -> Vec<f64> {
        models
            .iter()
            .zip(background)
            .map(|(m, &b)| flow_at_level(m, b, level, demand))
            .collect()
    };
    let sum_and_slope = |level: f64| -> (f64, f64) {
        let flows = fill(level);
        let mut slope = 0.0;
        for ((m, &b), &x) in models.iter().zip(background).zip(&flows) {
            if x > 0.0 && x < demand {
                slope += 1.0 / m.marginal_slope(x, b + x);
            }
        }
        (flows.iter().sum::<f64>() - demand, slope)
    };

    let lo = models
        .iter()
        .zip(background)
        .map(|(m, &b)| m.marginal(0.0, b))
        .fold(f64::INFINITY, f64::min);
    let mut step = lo.abs().max(1.0);
    let mut hi = lo + step;
    while sum_and_slope(hi).0 < 0.0 {
        step *= 2.0;
        hi = lo + step;
        if !hi.is_finite() {
            return None;
        }
    }
    let level = bracketed_root(sum_and_slope, lo, hi, 1e-15 * demand);
    let mut flows = fill(level);
    settle(models, background, level, demand, &mut flows);
    Some(WaterFill { flows, level })
}

/// Closes the gap between the filled flows and the demand. The level search
/// can end on a bracket narrower than rounding while the flows still miss
/// the demand, typically at the foot of a nearly flat marginal. The gap is
/// spread in proportion to `1 / marginal slope`, as a level step would,
/// which lands it on the flat links without disturbing the others.
fn settle(models: &[&CostModel], background: &[f64], level: f64, demand: f64, flows: &mut [f64]) {
    let gap = demand - flows.iter().sum::<f64>();
    if gap == 0.0 {
        return;
    }
    let near = 1e-12 * level.abs().max(1.0);
    let share: Vec<f64> = models
        .iter()
        .zip(background)
        .zip(flows.iter())
        .map(|((m, &b), &x)| {
            let open = if gap > 0.0 {
                x < demand && (x > 0.0 || m.marginal(0.0, b) <= level + near)
            } else {
                x > 0.0
            };
            if open {
                1.0 / m.marginal_slope(x, b + x).max(f64::MIN_POSITIVE)
            } else {
                0.0
            }
        })
        .collect();
    let widest = share.iter().cloned().fold(0.0, f64::max);
    if widest > 0.0 {
        // Normalize first so flat links with enormous shares stay finite.
        let share: Vec<f64> = share.iter().map(|w| w / widest).collect();
        let sum: f64 = share.iter().sum();
        for (x, w) in flows.iter_mut().zip(&share) {
            *x = (*x + gap * w / sum).max(0.0);
        }
    }
    let total: f64 = flows.iter().sum();
    if total > 0.0 {
        let scale = demand / total;
        flows.iter_mut().for_each(|x| *x *= scale);
    }
}

/// Multiplier and KKT residual of one user's flows: positive-flow links
/// must share the marginal `lambda`, idle links must not undercut it.
pub(crate) fn kkt_residual(marginals: &[f64], flows: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&m, &x) in marginals.iter().zip(flows) {
        if x > 0.0 {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (lo, if lo.is_finite() { 0.0 } else { f64::INFINITY });
    }
    let lambda = 0.5 * (lo + hi);
    let mut residual = 0.5 * (hi - lo);
    for (&m, &x) in marginals.iter().zip(flows) {
        if x == 0.0 {
            residual = residual.max(lambda - m);
        }
    }
    (lambda, residual)
}
