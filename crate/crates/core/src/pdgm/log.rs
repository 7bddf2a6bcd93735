use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::fmt::sig17;

pub const ITERATE_CSV_HEADER: &str = "k,gap,iterate_gap,energy,x_err_sq,y_err_sq";

/// One row of an iteration log. `energy` is NaN for methods without a
/// discrete Lyapunov certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub gap: f64,
    pub iterate_gap: f64,
    pub energy: f64,
    pub x_err_sq: f64,
    pub y_err_sq: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterateLog {
    pub records: Vec<IterateRecord>,
}

impl IterateLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gap).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn iterate_gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.iterate_gap).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{ITERATE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.k,
                sig17(r.gap),
                sig17(r.iterate_gap),
                sig17(r.energy),
                sig17(r.x_err_sq),
                sig17(r.y_err_sq)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let log = IterateLog {
            records: vec![IterateRecord {
                k: 1,
                gap: 1.0,
                iterate_gap: 2.0,
                energy: f64::NAN,
                x_err_sq: 1.5,
                y_err_sq: 0.5,
            }],
        };
        let text = log.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ITERATE_CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("1,1.0000000000000000e0,2.0000000000000000e0,NaN,1.5000000000000000e0,5.0000000000000000e-1")
        );
        assert_eq!(lines.next(), None);
    }
}
