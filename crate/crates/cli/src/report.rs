//! Selector runs and their tabular reports.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use mac_core::g2o::PoseGraphProblem;
use mac_core::{
    evaluate_selection, greedy_esp, mac, naive_topk, BinarySelection, FiedlerOptions,
    Initialization, MacOptions, Rounding,
};
use serde::Serialize;

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MacNearest,
    MacMadow,
    Naive,
    GreedyEsp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MacNearest, Method::MacMadow, Method::Naive, Method::GreedyEsp];

    pub fn name(self) -> &'static str {
        match self {
            Method::MacNearest => "mac-nearest",
            Method::MacMadow => "mac-madow",
            Method::Naive => "naive",
            Method::GreedyEsp => "greedy-esp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected mac-nearest, mac-madow, naive or greedy-esp)"))
    }
}

/// Solver settings shared by every cell of a run.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub seed: u64,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub madow_draws: usize,
    pub init: Initialization,
    pub timing: bool,
}

impl RunSettings {
    fn mac_options(&self, rounding: Rounding) -> MacOptions {
        MacOptions {
            rounding,
            max_iters: self.max_iters,
            gap_tol: self.gap_tol,
            seed: self.seed,
            init: self.init,
            madow_draws: self.madow_draws,
            fiedler: FiedlerOptions::default(),
        }
    }
}

/// One row of output. Optional fields are blank for selectors that do not
/// produce them (the baselines have no relaxation or bound).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: String,
    pub method: String,
    pub fraction: f64,
    pub budget: usize,
    pub candidates: usize,
    pub lambda2_rounded: f64,
    pub lambda2_relaxed: Option<f64>,
    pub dual_bound: Option<f64>,
    pub duality_gap: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_s: Option<f64>,
    pub seed: u64,
    pub weight_rule: String,
}

/// Runs `method` on `built` and returns the report with the chosen selection.
pub fn run_method(
    dataset: &str,
    weight_rule: &str,
    built: &PoseGraphProblem,
    method: Method,
    settings: &RunSettings,
) -> Result<(RunReport, BinarySelection)> {
    let problem = &built.problem;
    let k = problem.budget();
    let m = problem.candidate_count();
    let fiedler = FiedlerOptions::default();

    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        dataset: dataset.to_string(),
        method: method.name().to_string(),
        fraction: if m == 0 { 1.0 } else { k as f64 / m as f64 },
        budget: k,
        candidates: m,
        lambda2_rounded: 0.0,
        lambda2_relaxed: None,
        dual_bound: None,
        duality_gap: None,
        iterations: None,
        wall_time_s: None,
        seed: settings.seed,
        weight_rule: weight_rule.to_string(),
    };

    let started = Instant::now();
    let selection = match method {
        Method::MacNearest | Method::MacMadow => {
            let rounding = if method == Method::MacNearest { Rounding::Nearest } else { Rounding::Madow };
            let result = mac(problem, &settings.mac_options(rounding))
                .with_context(|| format!("{method} with K = {k}"))?;
            let elapsed = started.elapsed().as_secs_f64();
            report.lambda2_rounded = result.f_rounded;
            report.lambda2_relaxed = Some(result.f_relaxed);
            report.dual_bound = Some(result.best_dual_bound);
            report.duality_gap = Some((result.best_dual_bound - result.f_relaxed).max(0.0));
            report.iterations = Some(result.iterations());
            report.wall_time_s = settings.timing.then_some(elapsed);
            return Ok((report, result.rounded_x));
        }
        Method::Naive => naive_topk(problem, k)?,
        Method::GreedyEsp => greedy_esp(problem, k).with_context(|| format!("{method} with K = {k}"))?.selection,
    };
    let elapsed = started.elapsed().as_secs_f64();
    report.lambda2_rounded = evaluate_selection(problem, &selection, &fiedler)?;
    report.wall_time_s = settings.timing.then_some(elapsed);
    Ok((report, selection))
}

pub fn write_csv<W: std::io::Write>(rows: &[RunReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub const CSV_HEADER: [&str; 14] = [
    "schema_version",
    "dataset",
    "method",
    "fraction",
    "budget",
    "candidates",
    "lambda2_rounded",
    "lambda2_relaxed",
    "dual_bound",
    "duality_gap",
    "iterations",
    "wall_time_s",
    "seed",
    "weight_rule",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lp".parse::<Method>().is_err());
    }

    #[test]
    fn header_matches_serialized_fields() {
        let row = RunReport {
            schema_version: SCHEMA_VERSION,
            dataset: "d".into(),
            method: "naive".into(),
            fraction: 0.5,
            budget: 1,
            candidates: 2,
            lambda2_rounded: 0.25,
            lambda2_relaxed: None,
            dual_bound: None,
            duality_gap: None,
            iterations: None,
            wall_time_s: None,
            seed: 3,
            weight_rule: "w".into(),
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "1,d,naive,0.5,1,2,0.25,,,,,,3,w");

        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), CSV_HEADER.join(","));
    }
}
