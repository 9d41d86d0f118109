//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routebargain_core::metrics::{
    benchmark_strategy, perceived_optima, price_of_anarchy, price_of_heterogeneity, price_of_isolation,
    price_of_selfishness,
};
use routebargain_core::solvers::{initial_profile, nash_equilibrium_from, perceived_optimum, StartRule};
use routebargain_core::{
    bargain, flow_exchange, instances, nbs_general, nbs_identical, nbs_two_user, BargainMethod, BargainOptions,
    BargainOutcome, Baseline, CostModel, Error, Game, Homogeneity, SolverOptions,
};

const KKT_TOL: f64 = 1e-7;
const UNIQUE_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-9;

/// Soundness and identity findings gathered from every solve in criteria 1-6.
#[derive(Default)]
struct Audit {
    solves: usize,
    soundness: Vec<String>,
    identities: usize,
    identity: Vec<String>,
}

impl Audit {
    fn baseline(&mut self, label: &str, game: &Game, base: &Baseline) {
        let opts = SolverOptions::default();
        self.solves += 1;
        for (what, r) in [("equilibrium", base.nep.kkt_residual), ("optimum", base.optimum.kkt_residual)] {
            if !(r <= KKT_TOL) {
                self.soundness.push(format!("{label}: {what} KKT residual {r:.2e}"));
            }
        }
        let other = initial_profile(game, StartRule::FirstLinks);
        match nash_equilibrium_from(game, &other, &opts) {
            Ok(second) => {
                let gap = second.profile.max_abs_diff(&base.nep.profile);
                if gap > UNIQUE_TOL {
                    self.soundness.push(format!("{label}: equilibria from two starts differ by {gap:.2e}"));
                }
            }
            Err(e) => self.soundness.push(format!("{label}: second equilibrium start failed: {e}")),
        }
        if game.homogeneity() == Homogeneity::HomogeneousH5 {
            let models = game.shared_models().expect("homogeneous");
            let nep = base.nep.link_totals();
            let opt = base.optimum.link_totals();
            let lat = |f: &[f64]| -> Vec<f64> { models.iter().zip(f).map(|(m, &x)| m.latency(x)).collect() };
            for (what, t) in [("equilibrium", lat(&nep)), ("optimum", lat(&opt))] {
                if t.windows(2).any(|w| w[0] > w[1] * (1.0 + 1e-9) + 1e-12) {
                    self.soundness.push(format!("{label}: {what} latencies not ordered by link: {t:?}"));
                }
            }
            // Links where the equilibrium is at least as loaded as the optimum
            // must come first.
            let tol = 1e-8 * game.total_demand();
            let first_below = nep.iter().zip(&opt).position(|(h, s)| *h < s - tol);
            if let Some(m) = first_below {
                if nep[m..].iter().zip(&opt[m..]).any(|(h, s)| *h > s + tol) {
                    self.soundness.push(format!("{label}: no threshold link (nep {nep:?}, opt {opt:?})"));
                }
            }
        }
    }

    fn residual(&mut self, label: &str, r: f64) {
        self.solves += 1;
        if !(r <= KKT_TOL) {
            self.soundness.push(format!("{label}: KKT residual {r:.2e}"));
        }
    }

    fn identity(&mut self, label: &str, base: &Baseline, outcome: &BargainOutcome) {
        self.identities += 1;
        let (a, s, i) = (
            price_of_anarchy(base),
            price_of_selfishness(base, outcome),
            price_of_isolation(base, outcome),
        );
        if !((a - s * i).abs() <= IDENTITY_TOL * a) {
            self.identity.push(format!("{label}: PoA {a} vs PoS*PoI {}", s * i));
        }
    }
}

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn baseline(game: &Game) -> Result<Baseline, String> {
    Baseline::compute(game, &SolverOptions::default()).map_err(|e| e.to_string())
}

fn criterion_1(audit: &mut Audit) -> Verdict {
    let game = instances::nbs_three_user().map_err(|e| e.to_string())?;
    let base = baseline(&game)?;
    audit.baseline("nbs-3user", &game, &base);
    let out = bargain(&game, &base, &BargainOptions::default()).map_err(|e| e.to_string())?;
    audit.identity("nbs-3user", &base, &out);
    check(out.method == BargainMethod::NashProductAscent, || format!("method {:?}", out.method))?;
    let f1 = out.profile.link_totals()[0];
    let f_star = 15.0 * 2f64.sqrt() - 10.0;
    check((f1 - 11.17).abs() <= 0.05, || format!("f1 = {f1}"))?;
    check(f1 < f_star, || format!("f1 = {f1} not below optimum {f_star}"))?;
    Ok(format!("f1 = {f1:.6}, optimum {f_star:.6}, certainty {:?}", out.certainty))
}

fn criterion_2(audit: &mut Audit) -> Verdict {
    let eps = 0.05;
    let game = instances::heterogeneous_pair(eps).map_err(|e| e.to_string())?;
    let base = baseline(&game)?;
    audit.baseline("hetero-pair", &game, &base);
    let rows = base.nep.profile.rows();
    check(
        (rows[0][0] - 0.5).abs() < 1e-9 && (rows[1][0] - 0.5).abs() < 1e-9,
        || format!("equilibrium {rows:?}"),
    )?;
    let c = &base.nep_costs.per_user;
    check((c[0] - 0.5).abs() < 1e-9 && (c[1] - 10.0).abs() < 1e-7, || format!("costs {c:?}"))?;
    let out = nbs_general(&game, &base, &base.nep.profile, &BargainOptions::default()).map_err(|e| e.to_string())?;
    audit.identity("hetero-pair", &base, &out);
    check(out.method == BargainMethod::CoincidesWithNep, || format!("method {:?}", out.method))?;
    let (poa, pos) = (price_of_anarchy(&base), price_of_selfishness(&base, &out));
    check((poa - pos).abs() <= 1e-9 * poa, || format!("PoS {pos} != PoA {poa}"))?;
    check(poa >= 0.2 / eps, || format!("PoA {poa} < {}", 0.2 / eps))?;
    Ok(format!("costs ({:.6}, {:.6}), PoS = PoA = {poa:.4}", c[0], c[1]))
}

/// Nash-product maximizer over `(x1, x2)`, the link-1 flows of two users on
/// two shared links. The search runs a zooming grid over the link-1 total
/// `s = x1 + x2`; for fixed `s` both costs are linear in `x1`, so the best
/// split is the vertex of a concave quadratic, clamped to feasibility.
fn grid_nash_product(game: &Game, d: &[f64]) -> (f64, [f64; 2]) {
    let r = game.demands();
    let total = r[0] + r[1];
    let (t1, t2) = (*game.model(0, 0), *game.model(0, 1));
    let best_split = |s: f64| -> (f64, f64) {
        let (a, b) = (t1.latency(s), t2.latency(total - s));
        if !(a.is_finite() && b.is_finite()) {
            return (f64::NEG_INFINITY, 0.0);
        }
        // g1 = p - k x1 and g2 = q + k x1.
        let k = a - b;
        let p = d[0] - r[0] * b;
        let q = d[1] - s * a - (r[1] - s) * b;
        let (lo, hi) = ((s - r[1]).max(0.0), s.min(r[0]));
        let hi = hi.max(lo);
        let x1 = if k == 0.0 { lo } else { ((p - q) / (2.0 * k)).clamp(lo, hi) };
        let (g1, g2) = (p - k * x1, q + k * x1);
        // Outside the region of strict gains, score by the worse gain so
        // the zoom still homes in on it.
        (if g1 > 0.0 && g2 > 0.0 { g1 * g2 } else { g1.min(g2) }, x1)
    };
    let (mut lo, mut hi) = (0.0, total);
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    let n = 4000;
    for _ in 0..16 {
        let h = (hi - lo) / n as f64;
        for j in 0..=n {
            let s = lo + j as f64 * h;
            let (v, x1) = best_split(s);
            if v > best.0 {
                best = (v, [x1, s - x1]);
            }
        }
        let s = best.1[0] + best.1[1];
        lo = (s - 5.0 * h).max(0.0);
        hi = (s + 5.0 * h).min(total);
    }
    best
}

fn criterion_3(audit: &mut Audit) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut done, mut worst_gap, mut worst_grid) = (0, 0.0f64, 0.0f64);
    while done < 50 {
        let game = instances::random_mm1(&mut rng, 2, 2).map_err(|e| e.to_string())?;
        let base = baseline(&game)?;
        if price_of_anarchy(&base) <= 1.0 + 1e-9 {
            continue;
        }
        done += 1;
        let label = format!("two-user #{done}");
        audit.baseline(&label, &game, &base);
        let out = nbs_two_user(&game, &base).map_err(|e| e.to_string())?;
        audit.identity(&label, &base, &out);
        let g = out.gains();
        let gap = (g[0] - g[1]).abs() / g[0].abs().max(g[1].abs());
        worst_gap = worst_gap.max(gap);
        check(gap <= 1e-6, || format!("{label}: gains {g:?}"))?;
        let pos = price_of_selfishness(&base, &out);
        check((pos - 1.0).abs() <= 1e-6, || format!("{label}: PoS {pos}"))?;
        let (best, x) = grid_nash_product(&game, &base.nep_costs.per_user);
        // Gains are differences of costs, so each factor carries rounding
        // of order 1e-16 times the equilibrium cost.
        let g = out.gains();
        let rounding = 1e-12 * base.nep_costs.system * (g[0] + g[1]);
        check(out.nash_product >= best - rounding, || {
            format!("{label}: grid product {best} beats {}", out.nash_product)
        })?;
        let p = routebargain_core::StrategyProfile::from_rows(vec![
            vec![x[0], game.demands()[0] - x[0]],
            vec![x[1], game.demands()[1] - x[1]],
        ]);
        let grid_costs = game.evaluate_cost(&p).map_err(|e| e.to_string())?;
        let scale = base.nep_costs.system;
        for (a, b) in grid_costs.per_user.iter().zip(&out.costs.per_user) {
            let diff = (a - b).abs() / scale;
            worst_grid = worst_grid.max(diff);
            check(diff <= 1e-6, || format!("{label}: grid costs {:?} vs {:?}", grid_costs.per_user, out.costs.per_user))?;
        }
    }
    Ok(format!("50 instances, worst gain gap {worst_gap:.1e}, worst grid cost gap {worst_grid:.1e}"))
}

fn criterion_4(audit: &mut Audit) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut done, mut max_ratio, mut below_eps) = (0, 0.0f64, Vec::new());
    let c = 3.0;
    while done < 50 {
        let n = rng.gen_range(2..=6);
        let l = rng.gen_range(2..=5);
        let game = instances::random_mm1(&mut rng, n, l).map_err(|e| e.to_string())?;
        let base = baseline(&game)?;
        if price_of_anarchy(&base) <= 1.0 + 1e-9 {
            continue;
        }
        done += 1;
        let label = format!("exchange #{done} (N={n}, L={l})");
        audit.baseline(&label, &game, &base);
        let eps = base.surplus() / (2.0 * n as f64);
        let ex = flow_exchange(&game, &base.nep_costs, &base.optimum, eps).map_err(|e| format!("{label}: {e}"))?;
        audit.identity(&label, &base, &ex.outcome);
        let g = ex.outcome.gains();
        check(g.iter().all(|&x| x > 0.0), || format!("{label}: gains {g:?}"))?;
        if g.iter().any(|&x| x < eps * (1.0 - 1e-9)) {
            below_eps.push(format!("{label}: min gain {:.3e} < eps {eps:.3e}", g.iter().cloned().fold(f64::INFINITY, f64::min)));
        }
        for (a, b) in ex.outcome.profile.link_totals().iter().zip(base.optimum.link_totals()) {
            check((a - b).abs() <= 1e-8, || format!("{label}: aggregate {a} vs {b}"))?;
        }
        let ratio = ex.events as f64 / (n * l) as f64;
        max_ratio = max_ratio.max(ratio);
        check(ratio <= c, || format!("{label}: {} events", ex.events))?;
    }
    if !below_eps.is_empty() {
        return Err(format!(
            "{} of 50 instances leave a user below epsilon (all gains strict); first: {}",
            below_eps.len(),
            below_eps[0]
        ));
    }
    Ok(format!("50 instances, events <= {max_ratio:.2}*N*L"))
}

fn criterion_5(audit: &mut Audit) -> Verdict {
    let eps = 0.01;
    let mut last_poa = 0.0;
    let mut summary = Vec::new();
    for n in [2, 5, 10, 20, 35, 50] {
        let game = instances::high_poa(n, eps).map_err(|e| e.to_string())?;
        let base = baseline(&game)?;
        let label = format!("high-poa N={n}");
        audit.baseline(&label, &game, &base);
        let out = nbs_identical(&game, &base).map_err(|e| e.to_string())?;
        audit.identity(&label, &base, &out);
        let share = base.optimum_cost() / n as f64;
        for j in &out.costs.per_user {
            check((j - share).abs() <= 1e-9 * share.max(1e-300), || format!("{label}: cost {j} vs {share}"))?;
        }
        let pos = price_of_selfishness(&base, &out);
        check((pos - 1.0).abs() <= 1e-6, || format!("{label}: PoS {pos}"))?;
        let poa = price_of_anarchy(&base);
        let bound = instances::high_poa_lower_bound(n, eps);
        check(poa >= bound, || format!("{label}: PoA {poa} below bound {bound}"))?;
        check(poa >= last_poa * (1.0 - 1e-12), || format!("{label}: PoA {poa} fell from {last_poa}"))?;
        last_poa = poa;
        if [5, 20, 50].contains(&n) {
            summary.push(format!("N={n} PoA {poa:.4} >= {bound:.4}"));
        }
    }
    // Random identical-demand instances on shared non-M/M/1 latencies.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..10 {
        let n = rng.gen_range(2..=6);
        let l = rng.gen_range(2..=4);
        let models: Vec<CostModel> = (0..l)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    CostModel::linear(rng.gen_range(0.0..2.0), rng.gen_range(0.2..3.0))
                } else {
                    CostModel::power(rng.gen_range(0.0..1.0), rng.gen_range(0.2..2.0), rng.gen_range(1.0..4.0))
                }
            })
            .collect();
        let game = Game::homogeneous(models, &vec![rng.gen_range(0.1..2.0); n]).map_err(|e| e.to_string())?;
        let base = baseline(&game)?;
        let label = format!("identical #{k}");
        audit.baseline(&label, &game, &base);
        let out = nbs_identical(&game, &base).map_err(|e| e.to_string())?;
        audit.identity(&label, &base, &out);
        let pos = price_of_selfishness(&base, &out);
        check((pos - 1.0).abs() <= 1e-6, || format!("{label}: PoS {pos}"))?;
    }
    Ok(summary.join(", "))
}

fn criterion_6(audit: &mut Audit) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = SolverOptions::default();
    let mut worst: f64 = 0.0;
    let mut unconverged = 0;
    for k in 0..20 {
        let n = rng.gen_range(2..=5);
        let l = rng.gen_range(2..=4);
        let game = instances::random_standard(&mut rng, n, l).map_err(|e| e.to_string())?;
        let base = baseline(&game)?;
        let label = format!("standard #{k} (N={n}, L={l})");
        audit.baseline(&label, &game, &base);
        for i in 0..n {
            let p = perceived_optimum(&game, i, &opts).map_err(|e| e.to_string())?;
            audit.residual(&format!("{label} perceived optimum {i}"), p.kkt_residual);
        }
        let (poh, _) = price_of_heterogeneity(&game, &base, &opts).map_err(|e| e.to_string())?;
        let perceived = perceived_optima(&game, &opts).map_err(|e| e.to_string())?;
        let total = game.total_demand();
        for (i, u) in game.users().iter().enumerate() {
            let bound = total / u.demand;
            worst = worst.max(poh[i] / bound);
            check(poh[i] <= bound + 1e-6, || format!("{label}: PoH^{i} = {} > {bound}", poh[i]))?;
            let b = benchmark_strategy(&game, i, &base.nep).map_err(|e| format!("{label}: {e}"))?;
            let eq = base.nep_costs.per_user[i];
            let slack = 1e-6 * perceived[i];
            check(eq <= b.cost + slack && b.cost <= perceived[i] + slack, || {
                format!("{label}: user {i} chain {eq} <= {} <= {}", b.cost, perceived[i])
            })?;
        }
        let out = match bargain(&game, &base, &BargainOptions::default()) {
            Ok(o) => o,
            Err(Error::BargainNoConvergence { best, .. }) => {
                unconverged += 1;
                *best
            }
            Err(e) => return Err(format!("{label}: {e}")),
        };
        audit.identity(&label, &base, &out);
    }
    Ok(format!(
        "20 instances, max PoH^i * r^i / R = {worst:.4}; {unconverged} bargaining ascents hit the iteration cap"
    ))
}

fn main() {
    let mut audit = Audit::default();
    type Criterion = fn(&mut Audit) -> Verdict;
    let criteria: [(&str, Criterion, u64); 6] = [
        ("bargaining outcome of the three-user M/M/1 game", criterion_1, 10),
        ("heterogeneous pair: bargaining coincides with equilibrium", criterion_2, 5),
        ("two-user homogeneous bargaining is socially optimal", criterion_3, 60),
        ("flow exchange makes every user strictly better off", criterion_4, 60),
        ("identical users: equal shares of the optimum", criterion_5, 30),
        ("heterogeneity price bound and benchmark chain", criterion_6, 60),
    ];
    let mut failed = 0;
    let mut report = |id: usize, name: &str, verdict: Verdict, elapsed: Option<(Duration, u64)>| {
        let timing = elapsed.map_or(String::new(), |(d, _)| format!(" [{:.2}s]", d.as_secs_f64()));
        match verdict {
            Ok(detail) => println!("PASS {id}. {name}{timing}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id}. {name}{timing}: {detail}");
            }
        }
    };
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut verdict = run(&mut audit);
        let elapsed = start.elapsed();
        if elapsed > Duration::from_secs(*limit) {
            verdict = Err(format!(
                "took {:.1}s, limit {limit}s ({})",
                elapsed.as_secs_f64(),
                verdict.unwrap_or_else(|e| e)
            ));
        }
        report(k + 1, name, verdict, Some((elapsed, *limit)));
    }
    let soundness = if audit.soundness.is_empty() {
        Ok(format!("{} solves checked", audit.solves))
    } else {
        Err(format!("{} findings; first: {}", audit.soundness.len(), audit.soundness[0]))
    };
    report(7, "solver soundness across all solves", soundness, None);
    let identity = if audit.identity.is_empty() {
        Ok(format!("{} instances checked", audit.identities))
    } else {
        Err(format!("{} violations; first: {}", audit.identity.len(), audit.identity[0]))
    };
    report(8, "PoA = PoS * PoI", identity, None);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
