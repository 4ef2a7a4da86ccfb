//! CSV tables and output files.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrators::Trajectory;

/// Floats carry 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Per-sample record of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub rows: Vec<RecordRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    /// Derived quantity of the experiment (relative energy error, energy ratio, ...).
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub rhs_evals: u64,
}

impl RunRecord {
    pub const HEADER: [&'static str; 7] = [
        "step",
        "time",
        "energy",
        "value",
        "residual",
        "iterations",
        "rhs_evals",
    ];

    /// Rows every `stride` steps (and the last one) from a per-step trajectory.
    pub fn from_trajectory(
        label: &str,
        tr: &Trajectory,
        stride: usize,
        value: impl Fn(usize, f64) -> f64,
    ) -> Self {
        let stride = stride.max(1);
        let last = tr.samples.last().map_or(0, |s| s.step);
        let rows = tr
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.step % stride == 0 || s.step == last)
            .map(|(i, s)| RecordRow {
                step: s.step,
                time: s.time,
                energy: s.energy,
                value: value(i, s.energy),
                residual: s.residual,
                iterations: s.iterations,
                rhs_evals: s.rhs_evals,
            })
            .collect();
        Self {
            label: label.into(),
            rows,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::HEADER);
        for r in &self.rows {
            t.push(vec![
                r.step.to_string(),
                fmt_f64(r.time),
                fmt_f64(r.energy),
                fmt_f64(r.value),
                fmt_f64(r.residual),
                r.iterations.to_string(),
                r.rhs_evals.to_string(),
            ]);
        }
        t
    }
}

/// `<kind>_<parts...>_seed<seed>.csv` inside `dir`.
pub fn output_path(dir: &Path, kind: &str, parts: &[String], seed: u64) -> PathBuf {
    let mut name = kind.to_string();
    for p in parts {
        name.push('_');
        name.push_str(p);
    }
    name.push_str(&format!("_seed{seed}.csv"));
    dir.join(name)
}

/// `K1-2-4` style tag for a list of sweep counts.
pub fn list_tag<T: std::fmt::Display>(prefix: &str, items: &[T]) -> String {
    let joined: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("{prefix}{}", joined.join("-"))
}

/// `tol1e-2-1e-6` style tag.
pub fn tol_tag(items: &[f64]) -> String {
    let joined: Vec<String> = items.iter().map(|t| format!("{t:e}")).collect();
    format!("tol{}", joined.join("_"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), fmt_f64(0.5)]);
        let p = dir.path().join("sub/t.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "a,b\n1,5.0000000000000000e-1\n"
        );
    }

    #[test]
    fn file_names() {
        let p = output_path(
            Path::new("out"),
            "converge",
            &["M3".into(), list_tag("K", &[1, 2])],
            7,
        );
        assert_eq!(p, Path::new("out/converge_M3_K1-2_seed7.csv"));
        assert_eq!(tol_tag(&[1e-2, 1e-10]), "tol1e-2_1e-10");
    }
}
