use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::spin::SpinVector;

pub const CSV_HEADER: &str = "t,sbar_perp1,sbar_perp2,sbar_par,contrast,contrast_total";

/// Time series of the ensemble-average spin with its transverse contrast
/// |S̄⊥| and total polarization |S̄|.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContrastCurve {
    times: Vec<f64>,
    sbar: Vec<SpinVector>,
    contrast: Vec<f64>,
    contrast_total: Vec<f64>,
}

impl ContrastCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        ContrastCurve {
            times: Vec::with_capacity(n),
            sbar: Vec::with_capacity(n),
            contrast: Vec::with_capacity(n),
            contrast_total: Vec::with_capacity(n),
        }
    }

    /// Appends a sample. Times must be strictly increasing.
    pub fn push(&mut self, t: f64, sbar: SpinVector) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::invalid("times", "must be strictly increasing"));
            }
        }
        self.times.push(t);
        self.sbar.push(sbar);
        self.contrast.push(sbar.transverse_norm());
        self.contrast_total.push(sbar.norm());
        Ok(())
    }

    pub fn from_samples(samples: impl IntoIterator<Item = (f64, SpinVector)>) -> Result<Self> {
        let mut c = ContrastCurve::new();
        for (t, s) in samples {
            c.push(t, s)?;
        }
        Ok(c)
    }

    /// Curve built from bare contrast values, with S̄ along u⊥1.
    pub fn from_contrast(times: &[f64], contrast: &[f64]) -> Result<Self> {
        if times.len() != contrast.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                found: contrast.len(),
            });
        }
        Self::from_samples(
            times
                .iter()
                .zip(contrast)
                .map(|(&t, &c)| (t, SpinVector::new(c, 0.0, 0.0))),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sbar(&self) -> &[SpinVector] {
        &self.sbar
    }

    pub fn contrast(&self) -> &[f64] {
        &self.contrast
    }

    pub fn contrast_total(&self) -> &[f64] {
        &self.contrast_total
    }

    /// Mean contrast over samples with t in [t0, t1].
    pub fn mean_contrast(&self, t0: f64, t1: f64) -> Option<f64> {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.contrast)
            .filter(|(&t, _)| t >= t0 && t <= t1)
            .map(|(_, &c)| c)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// Contrast at the sample nearest to `t`.
    pub fn contrast_near(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| self.contrast[i])
    }

    /// Samples with t <= t_end.
    pub fn truncated(&self, t_end: f64) -> ContrastCurve {
        let k = self.times.partition_point(|&t| t <= t_end);
        ContrastCurve {
            times: self.times[..k].to_vec(),
            sbar: self.sbar[..k].to_vec(),
            contrast: self.contrast[..k].to_vec(),
            contrast_total: self.contrast_total[..k].to_vec(),
        }
    }

    /// Writes the trajectory CSV, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let s = self.sbar[i];
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], s.perp1, s.perp2, s.par, self.contrast[i], self.contrast_total[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Reads a trajectory CSV written by [`ContrastCurve::write_csv`].
    /// Contrast columns are recomputed from S̄.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        let got: Vec<&str> = headers.iter().map(str::trim).collect();
        let want: Vec<&str> = CSV_HEADER.split(',').collect();
        if got != want {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            });
        }
        let mut c = ContrastCurve::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("missing column {}", i + 1),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })
            };
            c.push(f(0)?, SpinVector::new(f(1)?, f(2)?, f(3)?))
                .map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
        }
        Ok(c)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_is_transverse_norm() {
        let c = ContrastCurve::from_samples([
            (0.0, SpinVector::new(0.6, 0.8, 0.0)),
            (0.1, SpinVector::new(0.3, 0.4, 1.2)),
        ])
        .unwrap();
        assert_eq!(c.contrast(), &[1.0, 0.5]);
        assert_eq!(c.contrast_total()[1], 1.3);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let mut c = ContrastCurve::new();
        c.push(0.0, SpinVector::U_PERP1).unwrap();
        assert!(c.push(0.0, SpinVector::U_PERP1).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = ContrastCurve::from_samples((0..5).map(|k| {
            let t = k as f64 * 0.1;
            (t, SpinVector::new(t.cos() / 3.0, t.sin() / 7.0, 1e-17 * t))
        }))
        .unwrap();
        let text = c.to_csv_string();
        assert!(text.starts_with(CSV_HEADER));
        let back = ContrastCurve::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn read_reports_bad_line() {
        let text = format!("{CSV_HEADER}\n0,1,0,0,1,1\n0.1,abc,0,0,1,1\n");
        match ContrastCurve::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
