//! Known values of the reference presets.

use routebargain_core::{instances, BargainMethod};

use crate::presets::{Preset, DEFAULT_HETERO_EPS, DEFAULT_POA_EPS};
use crate::record::{Check, ResultRecord};

const GROWTH_SIZES: [usize; 3] = [5, 20, 50];

pub fn presets() -> Vec<Preset> {
    let mut out = vec![
        Preset::NbsThreeUser,
        Preset::Hetero {
            eps: DEFAULT_HETERO_EPS,
        },
    ];
    out.extend(GROWTH_SIZES.iter().map(|&n| Preset::PoaGrowth { n, eps: DEFAULT_POA_EPS }));
    out.push(Preset::Symmetric);
    out
}

fn check(name: &str, expected: impl Into<String>, observed: f64, pass: bool) -> Check {
    Check {
        name: name.into(),
        expected: expected.into(),
        observed: if observed != 0.0 && observed.abs() < 1e-4 {
            format!("{observed:.3e}")
        } else {
            format!("{observed:.9}")
        },
        pass,
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Checks that depend on a single preset's record.
pub fn checks(preset: &Preset, r: &ResultRecord) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(e) = &r.error {
        out.push(Check {
            name: "solved".into(),
            expected: "no solver error".into(),
            observed: e.clone(),
            pass: false,
        });
        return out;
    }
    let (Some(nep), Some(opt), Some(nbs), Some(prices)) = (&r.nep, &r.optimum, &r.bargained, &r.prices) else {
        return out;
    };
    out.push(check(
        "identity poa = pos * poi",
        "relative error <= 1e-9",
        (prices.poa - prices.pos * prices.poi).abs() / prices.poa,
        rel_close(prices.poa, prices.pos * prices.poi, 1e-9),
    ));
    match *preset {
        Preset::NbsThreeUser => {
            let f1 = nbs.link_totals[0];
            let optimal = 15.0 * 2f64.sqrt() - 10.0;
            out.push(check("bargained flow on link 1", "11.17 +- 0.05", f1, (f1 - 11.17).abs() <= 0.05));
            out.push(check(
                "below optimal flow on link 1",
                format!("< {optimal:.9}"),
                f1,
                f1 < optimal,
            ));
            out.push(check("pos above 1", "> 1", prices.pos, prices.pos > 1.0));
            out.push(check(
                "pos below poa",
                format!("< {:.9}", prices.poa),
                prices.pos,
                prices.pos < prices.poa,
            ));
        }
        Preset::Hetero { eps } => {
            out.push(check("nep flow on link 2", "0", nep.link_totals[1], nep.link_totals[1].abs() <= 1e-9));
            for (i, want) in [0.5, 10.0].into_iter().enumerate() {
                let got = nep.costs.per_user[i];
                out.push(check(
                    &format!("nep cost of user {}", i + 1),
                    format!("{want}"),
                    got,
                    rel_close(got, want, 1e-6),
                ));
            }
            out.push(Check {
                name: "bargaining coincides with equilibrium".into(),
                expected: "coincides-with-nep".into(),
                observed: serde_json::to_string(&nbs.method).unwrap_or_default().trim_matches('"').to_string(),
                pass: nbs.method == BargainMethod::CoincidesWithNep,
            });
            out.push(check(
                "pos equals poa",
                format!("{:.9}", prices.poa),
                prices.pos,
                rel_close(prices.pos, prices.poa, 1e-9),
            ));
            let floor = 0.2 / eps;
            out.push(check(
                "poa lower bound",
                format!(">= {floor:.9}"),
                prices.poa,
                prices.poa >= floor,
            ));
        }
        Preset::PoaGrowth { n, eps } => {
            let bound = instances::high_poa_lower_bound(n, eps);
            out.push(check("poa lower bound", format!(">= {bound:.9}"), prices.poa, prices.poa >= bound));
            let share = opt.costs.system / n as f64;
            let worst = nbs
                .costs
                .per_user
                .iter()
                .map(|c| (c - share).abs() / share)
                .fold(0.0, f64::max);
            out.push(check(
                "bargained cost per user is optimum / N",
                "relative error <= 1e-6",
                worst,
                worst <= 1e-6,
            ));
            out.push(check("pos is 1", "1 +- 1e-6", prices.pos, (prices.pos - 1.0).abs() <= 1e-6));
        }
        Preset::Symmetric => {
            let flows = &opt.flows[0];
            out.push(check(
                "optimum splits evenly",
                format!("{}", flows[0]),
                flows[1],
                (flows[0] - flows[1]).abs() <= 1e-9,
            ));
        }
    }
    out
}

/// Checks spanning several presets: anarchy grows with the number of users.
pub fn cross_checks(presets: &[Preset], records: &mut [ResultRecord]) {
    let growth: Vec<(usize, Option<f64>)> = presets
        .iter()
        .zip(records.iter())
        .filter_map(|(p, r)| match p {
            Preset::PoaGrowth { n, .. } => Some((*n, r.prices.as_ref().map(|p| p.poa))),
            _ => None,
        })
        .collect();
    let Some(last) = presets.iter().rposition(|p| matches!(p, Preset::PoaGrowth { .. })) else {
        return;
    };
    let values: Option<Vec<f64>> = growth.iter().map(|(_, v)| *v).collect();
    let pass = values
        .as_ref()
        .is_some_and(|v| v.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)));
    let sizes: Vec<String> = growth.iter().map(|(n, _)| n.to_string()).collect();
    records[last].checks.push(Check {
        name: format!("poa nondecreasing over N = {}", sizes.join(", ")),
        expected: "nondecreasing".into(),
        observed: values.map_or("missing".into(), |v| {
            v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" <= ")
        }),
        pass,
    });
}
