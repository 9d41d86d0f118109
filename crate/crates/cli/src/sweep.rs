//! Parameter grids and the flat table export.

use serde::Serialize;

use crate::error::CliError;
use crate::record::{round_significant, ResultRecord};

const MAX_POINTS: usize = 100_000;

/// `NAME=START..END[:STEP]`, endpoints inclusive, step 1 by default.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let bad = |reason: String| CliError::validation("param", reason);
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| bad(format!("expected NAME=START..END[:STEP], got \"{spec}\"")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(bad("parameter name is empty".into()));
        }
        let (range, step) = match range.split_once(':') {
            Some((r, s)) => (r, Some(s)),
            None => (range, None),
        };
        let (start, end) = range
            .split_once("..")
            .ok_or_else(|| bad(format!("expected START..END, got \"{range}\"")))?;
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("\"{}\" is not a number", s.trim())))
        };
        let (start, end) = (number(start)?, number(end)?);
        let step = step.map(number).transpose()?.unwrap_or(1.0);
        if step <= 0.0 {
            return Err(bad(format!("step must be positive, got {step}")));
        }
        if end < start {
            return Err(bad(format!("range end {end} lies below its start {start}")));
        }
        let span = (end - start) / step;
        if span >= MAX_POINTS as f64 {
            return Err(bad(format!("grid has more than {MAX_POINTS} points")));
        }
        // Tolerate rounding in the span so 0.01..0.09:0.01 includes 0.09.
        let count = (span + 1e-9).floor() as usize + 1;
        let values = (0..count).map(|k| round_significant(start + k as f64 * step)).collect();
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }
}

#[derive(Debug, Serialize)]
struct PriceRow {
    parameter: Option<f64>,
    poa: Option<f64>,
    pos: Option<f64>,
    poi: Option<f64>,
    poh: Option<f64>,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct CheckRow<'a> {
    scenario: &'a str,
    check: &'a str,
    expected: &'a str,
    observed: &'a str,
    pass: bool,
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("in-memory writer flushes");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// One row per record: parameter, poa, pos, poi, poh, converged.
pub fn price_table(records: &[ResultRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let p = r.prices.as_ref();
        let round = |x: Option<f64>| x.map(round_significant);
        w.serialize(PriceRow {
            parameter: r.parameter.as_ref().map(|p| p.value),
            poa: round(p.map(|p| p.poa)),
            pos: round(p.map(|p| p.pos)),
            poi: round(p.map(|p| p.poi)),
            poh: round(p.map(|p| p.poh)),
            converged: r.converged(),
        })
        .expect("rows serialize");
    }
    // An empty sweep still gets its header.
    if records.is_empty() {
        w.write_record(["parameter", "poa", "pos", "poi", "poh", "converged"])
            .expect("header writes");
    }
    finish(w)
}

/// One row per golden check.
pub fn check_table(records: &[ResultRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        for c in &r.checks {
            w.serialize(CheckRow {
                scenario: &r.scenario,
                check: &c.name,
                expected: &c.expected,
                observed: &c.observed,
                pass: c.pass,
            })
            .expect("rows serialize");
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_grid() {
        let g = Grid::parse("N=2..5").unwrap();
        assert_eq!(g.name, "N");
        assert_eq!(g.values, vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn fractional_grid_keeps_its_end() {
        let g = Grid::parse("eps=0.01..0.09:0.01").unwrap();
        assert_eq!(g.values.len(), 9);
        assert_eq!(g.values[8], 0.09);
        assert_eq!(g.values[2], 0.03);
    }

    #[test]
    fn bad_grids() {
        for spec in ["N", "N=5..2", "N=1..3:0", "N=a..3", "=1..2", "N=1-3", "N=0..1e9"] {
            assert!(Grid::parse(spec).is_err(), "{spec}");
        }
    }

    #[test]
    fn empty_table_has_header() {
        assert_eq!(price_table(&[]), "parameter,poa,pos,poi,poh,converged\n");
    }
}
