use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::spec::CliError;

/// Shortest round-trip decimal; scientific notation outside `[1e-5, 1e16)`
/// so tiny and huge values stay readable.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_multi(alpha: &[u32]) -> String {
    alpha.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

pub fn fmt_point(p: &[C64]) -> String {
    p.iter()
        .map(|z| {
            if z.im == 0.0 {
                fmt_f64(z.re)
            } else {
                format!("{}{}{}i", fmt_f64(z.re), if z.im < 0.0 { "-" } else { "+" }, fmt_f64(z.im.abs()))
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// A CSV table whose first column is always `op`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        let mut header = vec!["op".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, op: &str, values: Vec<String>) {
        debug_assert_eq!(values.len() + 1, self.header.len());
        let mut row = Vec::with_capacity(values.len() + 1);
        row.push(op.to_string());
        row.extend(values);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::io(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::io(e.to_string()))
    }
}

/// `PATH.json` next to the CSV.
pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::io(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0, -0.5, 0.1 + 0.2, 1e-300, 3.5e20, 12345.678, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1e-7), "1e-7");
    }

    #[test]
    fn csv_has_op_column() {
        let mut t = Table::new(&["d", "root"]);
        t.push("fekete.diameter_entry", vec!["1".into(), fmt_f64(0.5)]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "op,d,root\nfekete.diameter_entry,1,0.5\n");
    }
}
