//! CSV and JSON rendering with 17 significant digits, so that identical runs
//! produce byte-identical files.

use std::io;

use serde::Serialize;

use crate::experiments::{ConvergenceReport, VarianceReport};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `serde_json` formatter that writes floats with [`fmt_f64`].
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// A CSV table preceded by one `#` metadata comment line.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub comment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(comment: impl Into<String>, header: &[&str]) -> Self {
        Self {
            comment: comment.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.comment.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// One row per trial: the tracked feature's IG and path-sampled attribution.
pub fn variance_csv(report: &VarianceReport, comment: &str) -> CsvTable {
    let mut t = CsvTable::new(comment, &["trial", "ig", "psig"]);
    for s in &report.samples {
        t.push(vec![s.trial.to_string(), fmt_f64(s.ig), fmt_f64(s.ps)]);
    }
    t
}

/// One row per budget.
pub fn convergence_csv(report: &ConvergenceReport, comment: &str) -> CsvTable {
    let mut t = CsvTable::new(
        comment,
        &[
            "budget",
            "mse_det",
            "mse_mc",
            "mc_baselines",
            "mc_inner_steps",
        ],
    );
    for p in &report.points {
        t.push(vec![
            p.budget.to_string(),
            fmt_f64(p.mse_det),
            fmt_f64(p.mse_mc),
            p.mc_baselines.to_string(),
            p.mc_inner_steps.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn json_uses_fixed_precision() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<f64>,
            n: usize,
            bad: f64,
        }
        let s = to_json(&S {
            a: 0.5,
            b: vec![1.0 / 3.0],
            n: 4,
            bad: f64::NAN,
        })
        .unwrap();
        assert_eq!(
            s,
            "{\"a\":5.0000000000000000e-1,\"b\":[3.3333333333333331e-1],\"n\":4,\"bad\":null}\n"
        );
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["a"], 0.5);
    }

    #[test]
    fn csv_render() {
        let mut t = CsvTable::new("psig 0.1.0 seed=1", &["x", "y"]);
        t.push(vec!["1".into(), fmt_f64(2.0)]);
        assert_eq!(
            t.render(),
            "# psig 0.1.0 seed=1\nx,y\n1,2.0000000000000000e0\n"
        );
    }
}
