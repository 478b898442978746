use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plot::{histogram_svg, sweep_svg};
use super::{EvalReport, SweepResult};
use crate::error::{Error, Result};
use crate::output::write_files;
use crate::geo::{PriorFile, ProximityPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub threshold: i64,
    pub seed: u64,
    pub unseen_ratio: f64,
    pub validation_targets: usize,
    pub test_targets: usize,
    pub unseen_pois: usize,
}

/// Everything a run reports. Contains no timings, so identical inputs give
/// byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub run_id: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub split: Option<SplitSummary>,
    pub reports: Vec<EvalReport>,
    pub sweep: Option<SweepResult>,
    pub prior: Option<PriorFile>,
}

/// (subset, method, accuracy per k)
type TableRow = (String, String, Vec<(usize, f64)>);

fn table_rows(reports: &[EvalReport]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for (subset, unseen) in [("all", false), ("unseen", true)] {
        for r in reports {
            let accs = if unseen { r.unseen_acc_at.as_ref() } else { Some(&r.acc_at) };
            if let Some(accs) = accs {
                rows.push((
                    subset.to_string(),
                    r.method.clone(),
                    accs.iter().map(|(&k, &a)| (k, a)).collect(),
                ));
            }
        }
    }
    rows
}

fn table_csv(reports: &[EvalReport]) -> String {
    let rows = table_rows(reports);
    let mut s = String::from("pois,method");
    if let Some((_, _, accs)) = rows.first() {
        for (k, _) in accs {
            write!(s, ",acc@{k}").unwrap();
        }
    }
    s.push('\n');
    for (subset, method, accs) in rows {
        write!(s, "{subset},{method}").unwrap();
        for (_, a) in accs {
            write!(s, ",{a:.4}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn table_text(reports: &[EvalReport]) -> String {
    let rows = table_rows(reports);
    let mut s = format!("{:<8} {:<10}", "POIs", "Method");
    if let Some((_, _, accs)) = rows.first() {
        for (k, _) in accs {
            write!(s, " {:>8}", format!("Acc@{k}")).unwrap();
        }
    }
    s.push('\n');
    for (subset, method, accs) in rows {
        write!(s, "{subset:<8} {method:<10}").unwrap();
        for (_, a) in accs {
            write!(s, " {a:>8.4}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn sweep_csv(sweep: &SweepResult) -> String {
    let mut s = String::from("target_ratio,realized_ratio,threshold,method,k,acc\n");
    for p in &sweep.points {
        for r in &p.reports {
            for (k, a) in &r.acc_at {
                writeln!(
                    s,
                    "{},{:.6},{},{},{k},{a:.6}",
                    p.target_ratio, p.realized_ratio, p.threshold, r.method
                )
                .unwrap();
            }
        }
    }
    s.push_str("\n# slopes\nmethod,k,slope\n");
    for (m, by_k) in &sweep.slopes {
        for (k, v) in by_k {
            writeln!(s, "{m},{k},{v:.6}").unwrap();
        }
    }
    s
}

fn histogram_csv(prior: &ProximityPrior) -> Result<String> {
    let mut buf = Vec::new();
    prior.write_histogram_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("ASCII csv"))
}

/// Plot files derivable from `results`.
fn plot_files(results: &RunResults) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    if let Some(p) = &results.prior {
        let prior = ProximityPrior::from_json(p)?;
        files.push(("prior_histogram.svg".to_string(), histogram_svg(&prior).into_bytes()));
    }
    if let Some(s) = &results.sweep {
        files.push(("sweep.svg".to_string(), sweep_svg(s).into_bytes()));
    }
    Ok(files)
}

/// Writes `results.json`, the accuracy table (CSV and text), the prior
/// histogram (CSV and SVG) and the sweep (CSV and SVG) for whatever parts
/// `results` holds.
pub fn emit_report(results: &RunResults, dir: &Path) -> Result<Vec<PathBuf>> {
    if let Some(s) = &results.sweep {
        if s.points.is_empty() {
            return Err(Error::contract("empty sweep"));
        }
    }
    if results.reports.is_empty() && results.sweep.is_none() && results.prior.is_none() {
        return Err(Error::contract("nothing to report"));
    }
    for r in results.reports.iter().chain(results.sweep.iter().flat_map(|s| s.points.iter().flat_map(|p| &p.reports))) {
        check_monotone(r)?;
    }
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut add = |name: &str, body: String| files.push((name.to_string(), body.into_bytes()));
    add("results.json", serde_json::to_string_pretty(results)? + "\n");
    if !results.reports.is_empty() {
        add("table1.csv", table_csv(&results.reports));
        add("table1.txt", table_text(&results.reports));
    }
    if let Some(p) = &results.prior {
        add("prior_histogram.csv", histogram_csv(&ProximityPrior::from_json(p)?)?);
    }
    if let Some(s) = &results.sweep {
        add("sweep.csv", sweep_csv(s));
    }
    files.extend(plot_files(results)?);
    write_files(dir, &files)
}

/// Re-renders the SVG plots from a saved `results.json`.
pub fn write_plots(results: &RunResults, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = plot_files(results)?;
    if files.is_empty() {
        return Err(Error::contract("results hold neither a prior nor a sweep"));
    }
    write_files(dir, &files)
}

fn check_monotone(r: &EvalReport) -> Result<()> {
    for accs in std::iter::once(&r.acc_at).chain(r.unseen_acc_at.as_ref()) {
        let v: Vec<f64> = accs.values().copied().collect();
        if v.iter().any(|a| !(0.0..=1.0).contains(a)) || v.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::contract(format!("accuracies of {} are not monotone in k", r.method)));
        }
    }
    Ok(())
}
