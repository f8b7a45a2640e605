use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;

use super::run::{CsvRow, CSV_COLUMNS};
use super::HarnessError;
use crate::metrics::fit_order;

/// Errors below this are at the floating-point floor and are left out of fits.
pub const ERROR_FLOOR: f64 = 1e-11;

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, HarnessError> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| HarnessError::Malformed(format!("line {line}: column '{}' has value '{raw}'", CSV_COLUMNS[i])))
}

/// Parse the data rows of a run CSV; `#` lines are skipped.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| HarnessError::Malformed(e.to_string()))?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().map(str::trim).ne(CSV_COLUMNS) {
        return Err(HarnessError::Malformed(format!("unexpected header '{}'", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| HarnessError::Malformed(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != CSV_COLUMNS.len() {
            return Err(HarnessError::Malformed(format!("line {line}: {} fields, expected {}", rec.len(), CSV_COLUMNS.len())));
        }
        rows.push(CsvRow {
            experiment: rec[0].trim().to_string(),
            level: field(&rec, 1, line)?,
            degree: field(&rec, 2, line)?,
            h: field(&rec, 3, line)?,
            dofs_fine: field(&rec, 4, line)?,
            dofs_small: field(&rec, 5, line)?,
            j: field(&rec, 6, line)?,
            lambda: Complex64::new(field(&rec, 7, line)?, field(&rec, 8, line)?),
            err_lambda: field(&rec, 9, line)?,
            err_u_h1: field(&rec, 10, line)?,
            err_u_b: field(&rec, 11, line)?,
            err_uadj_h1: field(&rec, 12, line)?,
            wall_ms: field(&rec, 13, line)?,
        });
    }
    Ok(rows)
}

/// Errors of one (level, mesh) point summed over the eigenvalue indices.
#[derive(Debug, Clone)]
struct Point {
    level: usize,
    degree: usize,
    h: f64,
    dofs: usize,
    err_lambda: f64,
    err_u_h1: f64,
}

fn points(rows: &[&CsvRow]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|p| p.level == r.level && p.degree == r.degree && p.h == r.h && p.dofs == r.dofs_fine) {
            Some(p) => {
                p.err_lambda += r.err_lambda;
                p.err_u_h1 += r.err_u_h1;
            }
            None => out.push(Point { level: r.level, degree: r.degree, h: r.h, dofs: r.dofs_fine, err_lambda: r.err_lambda, err_u_h1: r.err_u_h1 }),
        }
    }
    out
}

/// Fitted order over the points whose error is above the floor.
fn order_text(xs: &[f64], errs: &[f64]) -> String {
    let (x, e): (Vec<f64>, Vec<f64>) = xs.iter().zip(errs).filter(|(_, &e)| e.is_finite() && e >= ERROR_FLOOR).map(|(&x, &e)| (x, e)).unzip();
    match fit_order(&x, &e) {
        Ok(o) => format!("{o:.2}"),
        Err(_) => format!("n/a ({} usable points)", x.len()),
    }
}

fn block(name: &str, rows: &[&CsvRow], out: &mut String) {
    let pts = points(rows);
    let _ = writeln!(out, "== {name} ==");
    let _ = writeln!(out, "{:>5} {:>6} {:>12} {:>9} {:>14} {:>14}", "level", "degree", "h", "dofs", "err_lambda", "err_u_h1");
    for p in &pts {
        let _ = writeln!(out, "{:>5} {:>6} {:>12.6e} {:>9} {:>14.6e} {:>14.6e}", p.level, p.degree, p.h, p.dofs, p.err_lambda, p.err_u_h1);
    }
    let mut levels: Vec<usize> = pts.iter().map(|p| p.level).collect();
    levels.sort_unstable();
    levels.dedup();
    let per_level: Vec<Vec<&Point>> = levels.iter().map(|&l| pts.iter().filter(|p| p.level == l).collect()).collect();
    if per_level.iter().any(|v| v.len() > 1) {
        for v in &per_level {
            let hs: Vec<f64> = v.iter().map(|p| p.h).collect();
            let el: Vec<f64> = v.iter().map(|p| p.err_lambda).collect();
            let eu: Vec<f64> = v.iter().map(|p| p.err_u_h1).collect();
            let _ = writeln!(
                out,
                "level {} (degree {}): order err_lambda {}, order err_u_h1 {}",
                v[0].level,
                v[0].degree,
                order_text(&hs, &el),
                order_text(&hs, &eu)
            );
        }
    } else if name == "lshape_adaptive" {
        let dofs: Vec<f64> = pts.iter().map(|p| p.dofs as f64).collect();
        let el: Vec<f64> = pts.iter().map(|p| p.err_lambda).collect();
        let _ = writeln!(out, "order err_lambda vs dofs {}", order_text(&dofs, &el));
    } else if pts.len() > 1 {
        let hs: Vec<f64> = pts.iter().map(|p| p.h).collect();
        let el: Vec<f64> = pts.iter().map(|p| p.err_lambda).collect();
        let eu: Vec<f64> = pts.iter().map(|p| p.err_u_h1).collect();
        let _ = writeln!(out, "order err_lambda {}", order_text(&hs, &el));
        let _ = writeln!(out, "order err_u_h1 {}", order_text(&hs, &eu));
    }
    if let Some(last) = pts.last() {
        let _ = writeln!(out, "final err_lambda {:.6e} (level {}, h {:.6e}, dofs {})", last.err_lambda, last.level, last.h, last.dofs);
    }
}

/// Convergence table of every experiment in `rows`, in order of appearance.
pub fn summarize_rows(rows: &[CsvRow]) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NoData);
    }
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.experiment.as_str()) {
            names.push(&r.experiment);
        }
    }
    let mut out = String::new();
    for (i, name) in names.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let subset: Vec<&CsvRow> = rows.iter().filter(|r| r.experiment == *name).collect();
        block(name, &subset, &mut out);
    }
    Ok(out)
}

pub fn summarize(path: &Path) -> Result<String, HarnessError> {
    let file = std::fs::File::open(path)?;
    summarize_rows(&read_csv(file)?)
}
