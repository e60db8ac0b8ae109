//! Row-by-row comparison of two reports.
//!
//! Two CSV files must share a header and row count, and every non-numeric
//! cell must match; those cells identify the row. Numeric cells that differ
//! are reported with their delta. Directories compare each artifact they
//! hold, and both must hold the same set.

use std::fmt;
use std::path::Path;

use crate::error::CliError;
use crate::runner::{FAILOVER_CSV, MULTICAST_CSV, POLICING_CSV, THROUGHPUT_CSV};

const ARTIFACTS: [&str; 4] = [THROUGHPUT_CSV, FAILOVER_CSV, MULTICAST_CSV, POLICING_CSV];

#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub file: String,
    /// 1-based data row.
    pub row: usize,
    /// Non-numeric cells of the row, joined by commas.
    pub key: String,
    pub column: String,
    pub a: f64,
    pub b: f64,
}

impl Delta {
    pub fn change(&self) -> f64 {
        self.b - self.a
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {} [{}] {}: {} -> {} ({:+})",
            self.file,
            self.row,
            self.key,
            self.column,
            self.a,
            self.b,
            self.change()
        )
    }
}

fn cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Compares two CSV texts; `name` labels the deltas.
pub fn compare_csv(name: &str, a: &str, b: &str) -> Result<Vec<Delta>, CliError> {
    let (mut la, mut lb) = (a.lines(), b.lines());
    let (ha, hb) = (la.next().unwrap_or(""), lb.next().unwrap_or(""));
    if ha != hb {
        return Err(CliError::Schema(format!("{name}: header `{ha}` vs `{hb}`")));
    }
    let columns: Vec<&str> = ha.split(',').collect();
    let (ra, rb): (Vec<&str>, Vec<&str>) = (la.collect(), lb.collect());
    if ra.len() != rb.len() {
        return Err(CliError::Schema(format!("{name}: {} rows vs {}", ra.len(), rb.len())));
    }
    let mut out = Vec::new();
    for (i, (x, y)) in ra.iter().zip(&rb).enumerate() {
        let (cx, cy): (Vec<&str>, Vec<&str>) = (x.split(',').collect(), y.split(',').collect());
        if cx.len() != columns.len() || cy.len() != columns.len() {
            return Err(CliError::Schema(format!("{name} row {}: wrong field count", i + 1)));
        }
        let mut key = Vec::new();
        let mut numeric = Vec::new();
        for (k, (u, v)) in cx.iter().zip(&cy).enumerate() {
            match (cell(u), cell(v)) {
                (Some(p), Some(q)) => numeric.push((k, p, q)),
                _ if u == v => key.push(*u),
                _ => {
                    return Err(CliError::Schema(format!(
                        "{name} row {}: `{}` is `{u}` vs `{v}`",
                        i + 1,
                        columns[k]
                    )))
                }
            }
        }
        let key = key.join(",");
        for (k, p, q) in numeric {
            if p != q {
                out.push(Delta {
                    file: name.to_string(),
                    row: i + 1,
                    key: key.clone(),
                    column: columns[k].to_string(),
                    a: p,
                    b: q,
                });
            }
        }
    }
    Ok(out)
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))
}

/// Compares two report files or two report directories.
pub fn compare_paths(a: &Path, b: &Path) -> Result<Vec<Delta>, CliError> {
    match (a.is_dir(), b.is_dir()) {
        (false, false) => {
            let name = a.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned());
            compare_csv(&name, &read(a)?, &read(b)?)
        }
        (true, true) => {
            let mut out = Vec::new();
            for name in ARTIFACTS {
                let (pa, pb) = (a.join(name), b.join(name));
                match (pa.exists(), pb.exists()) {
                    (true, true) => out.extend(compare_csv(name, &read(&pa)?, &read(&pb)?)?),
                    (false, false) => {}
                    _ => return Err(CliError::Schema(format!("{name} present in only one report"))),
                }
            }
            Ok(out)
        }
        _ => Err(CliError::Usage("compare needs two files or two directories".into())),
    }
}
