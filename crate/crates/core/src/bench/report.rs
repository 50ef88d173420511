use super::config::{ExperimentConfig, Method};
use crate::error::{PtcError, Result};

pub const CSV_HEADER: [&str; 7] = ["alpha", "method", "avg_var", "avg_opt", "avg_coverage", "trials", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub alpha: f64,
    pub method: Method,
    pub avg_var: f64,
    /// Mean robust objective (worst case over the set; CVaR value for `cvar`).
    pub avg_opt: f64,
    pub avg_coverage: f64,
    /// Trials that produced at least one scored test point.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFailure {
    pub alpha: f64,
    pub method: Method,
    pub failed_trials: usize,
    pub failed_points: usize,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub failures: Vec<MethodFailure>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.method.to_string(),
                r.avg_var.to_string(),
                r.avg_opt.to_string(),
                r.avg_coverage.to_string(),
                r.trials.to_string(),
                r.seed.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Methods with no successful trial at some α.
    pub fn failed_methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for r in &self.rows {
            if r.trials == 0 && !out.contains(&r.method) {
                out.push(r.method);
            }
        }
        out
    }

    pub fn row(&self, alpha: f64, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.alpha == alpha && r.method == method)
    }
}

/// Report CSV fields kept as text.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub alpha: String,
    pub method: String,
    pub avg_var: String,
    pub avg_coverage: String,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| PtcError::Format(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(PtcError::Format(format!(
            "expected header '{}', got '{}'",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| PtcError::Format(e.to_string()))?;
        rows.push(CsvRow {
            alpha: rec[0].to_string(),
            method: rec[1].to_string(),
            avg_var: rec[2].to_string(),
            avg_coverage: rec[4].to_string(),
        });
    }
    if rows.is_empty() {
        return Err(PtcError::Format("report has no rows".into()));
    }
    Ok(rows)
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn panel(title: &str, rows: &[CsvRow], alphas: &[&str], methods: &[&str], pick: fn(&CsvRow) -> &str) -> String {
    let mut grid: Vec<Vec<&str>> = vec![std::iter::once("alpha").chain(methods.iter().copied()).collect()];
    for a in alphas {
        let mut line = vec![*a];
        for m in methods {
            let v = rows.iter().find(|r| r.alpha == *a && r.method == *m).map_or("-", pick);
            line.push(v);
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{title}\n");
    for line in grid {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Two aligned panels (VaR, coverage): α rows by method columns, both in
/// order of first appearance. Values are echoed as written in the CSV.
pub fn render_table(text: &str) -> Result<String> {
    let rows = parse_report_csv(text)?;
    let alphas = first_seen(rows.iter().map(|r| r.alpha.as_str()));
    let methods = first_seen(rows.iter().map(|r| r.method.as_str()));
    Ok(format!(
        "{}\n{}",
        panel("Average VaR", &rows, &alphas, &methods, |r| &r.avg_var),
        panel("Average coverage", &rows, &alphas, &methods, |r| &r.avg_coverage)
    ))
}
