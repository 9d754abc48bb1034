//! Time-series CSV with a fixed header and 17 significant digits per value.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

pub fn header_line() -> String {
    DiagnosticsRecord::CSV_HEADER.join(",")
}

/// Render records as CSV text; every row ends with a newline.
pub fn to_csv(records: &[DiagnosticsRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }
    let mut out = header_line();
    out.push('\n');
    for r in records {
        let row: Vec<String> = r.csv_values().iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

pub fn from_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty series file".into()))?;
    if header.trim() != header_line() {
        return Err(Error::Format(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != DiagnosticsRecord::CSV_HEADER.len() {
            return Err(Error::Format(format!("row {} has {} columns", k + 1, cells.len())));
        }
        let mut v = [0.0; 19];
        for (slot, cell) in v.iter_mut().zip(&cells) {
            *slot = cell
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {}: cannot parse `{cell}`", k + 1)))?;
        }
        out.push(DiagnosticsRecord::from_csv_values(&v));
    }
    Ok(out)
}

pub fn write_series(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let text = to_csv(records)?;
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_record_row() {
        let r = DiagnosticsRecord {
            r_star: 1.0,
            lambda: 0.05,
            ..Default::default()
        };
        let text = to_csv(&[r]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(
            lines[0],
            "t,Q,Qdiag,C,sigma,a_lam,b_lam,Q_lam,C_lam,b,mu,rho,Rprof,delta_jet,eps_strain,eta_ext,E,r_star,lambda"
        );
        let cells: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[..17].iter().all(|v| *v == 0.0));
        assert_eq!(cells[17], 1.0);
        assert_eq!(cells[18], 0.05);
    }

    #[test]
    fn empty_series_is_rejected() {
        assert!(to_csv(&[]).is_err());
        assert!(from_csv("t,Q\n1,2\n").is_err());
    }
}
