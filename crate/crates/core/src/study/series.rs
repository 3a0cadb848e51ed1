//! Strain time series, CSV I/O and phase / train-forecast partitioning.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const CSV_HEADER: [&str; 2] = ["time_min", "strain_microeps"];

/// Timestamped strain record (minutes, microstrain) with optional phase labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrainSeries {
    times: Vec<f64>,
    strains: Vec<f64>,
    phases: Option<Vec<u8>>,
}

impl StrainSeries {
    pub fn new(times: Vec<f64>, strains: Vec<f64>) -> Result<Self> {
        Self::with_phases(times, strains, None)
    }

    pub fn with_phases(times: Vec<f64>, strains: Vec<f64>, phases: Option<Vec<u8>>) -> Result<Self> {
        if times.len() != strains.len() {
            return Err(Error::Data(format!(
                "{} times but {} strains",
                times.len(),
                strains.len()
            )));
        }
        if let Some(p) = &phases {
            if p.len() != times.len() {
                return Err(Error::Data("phase labels do not match series length".into()));
            }
            if let Some(bad) = p.iter().find(|&&x| !(1..=3).contains(&x)) {
                return Err(Error::Data(format!("phase label {bad} not in 1..=3")));
            }
        }
        if let Some(i) = times.iter().chain(&strains).position(|x| !x.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at position {}",
                i % times.len().max(1)
            )));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!(
                "times not strictly increasing at index {} ({} then {})",
                w + 1,
                times[w],
                times[w + 1]
            )));
        }
        Ok(Self { times, strains, phases })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn strains(&self) -> &[f64] {
        &self.strains
    }

    pub fn phases(&self) -> Option<&[u8]> {
        self.phases.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Sub-series of the points whose time satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(f64) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.times[i])).collect();
        Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            strains: idx.iter().map(|&i| self.strains[i]).collect(),
            phases: self.phases.as_ref().map(|p| idx.iter().map(|&i| p[i]).collect()),
        }
    }

    /// Population mean and standard deviation of the strains.
    pub fn strain_moments(&self) -> (f64, f64) {
        let n = self.len() as f64;
        let mean = self.strains.iter().sum::<f64>() / n;
        let var = self.strains.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// Writes `time_min,strain_microeps` (plus a `phase` column when labels are
    /// present) with shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        match &self.phases {
            Some(_) => writeln!(out, "{},{},phase", CSV_HEADER[0], CSV_HEADER[1])?,
            None => writeln!(out, "{},{}", CSV_HEADER[0], CSV_HEADER[1])?,
        }
        for i in 0..self.len() {
            match &self.phases {
                Some(p) => writeln!(out, "{},{},{}", self.times[i], self.strains[i], p[i])?,
                None => writeln!(out, "{},{}", self.times[i], self.strains[i])?,
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (ti, si) = match (col(CSV_HEADER[0]), col(CSV_HEADER[1])) {
            (Some(t), Some(s)) => (t, s),
            _ => {
                return Err(Error::Data(format!(
                    "{}: missing column(s); expected header `{}`",
                    path.display(),
                    CSV_HEADER.join(",")
                )))
            }
        };
        let pi = col("phase");

        let (mut times, mut strains, mut phases) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize, what: &str| -> Result<f64> {
                let raw = rec
                    .get(i)
                    .ok_or_else(|| Error::Data(format!("{}:{line}: missing {what}", path.display())))?;
                raw.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Data(format!("{}:{line}: bad {what} `{raw}`", path.display())))
            };
            let t = field(ti, "time")?;
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(Error::Data(format!(
                        "{}:{line}: time {t} not after previous {prev}",
                        path.display()
                    )));
                }
            }
            times.push(t);
            strains.push(field(si, "strain")?);
            if let Some(pi) = pi {
                let raw = rec.get(pi).unwrap_or("").trim();
                let ph = raw
                    .parse::<u8>()
                    .ok()
                    .filter(|p| (1..=3).contains(p))
                    .ok_or_else(|| Error::Data(format!("{}:{line}: bad phase `{raw}`", path.display())))?;
                phases.push(ph);
            }
        }
        if times.len() < 2 {
            return Err(Error::Data(format!(
                "{}: need at least 2 observations, found {}",
                path.display(),
                times.len()
            )));
        }
        Self::with_phases(times, strains, pi.map(|_| phases))
    }
}

/// Partitions into `t < b1`, `b1 <= t < b2` and `t >= b2`.
pub fn split_phases(s: &StrainSeries, b1: f64, b2: f64) -> Result<(StrainSeries, StrainSeries, StrainSeries)> {
    if !(b1 < b2) {
        return Err(Error::Config(format!(
            "phase boundaries must satisfy b1 < b2, got {b1}, {b2}"
        )));
    }
    Ok((
        s.filter(|t| t < b1),
        s.filter(|t| t >= b1 && t < b2),
        s.filter(|t| t >= b2),
    ))
}

/// Training set `t_start <= t < t_split` and forecast set `t >= t_split`.
/// Points before `t_start` belong to neither.
pub fn split_train_forecast(s: &StrainSeries, t_start: f64, t_split: f64) -> Result<(StrainSeries, StrainSeries)> {
    if !(t_start < t_split) {
        return Err(Error::Config(format!(
            "split time {t_split} must exceed start {t_start}"
        )));
    }
    let train = s.filter(|t| t >= t_start && t < t_split);
    let forecast = s.filter(|t| t >= t_split);
    if train.is_empty() || forecast.is_empty() {
        return Err(Error::Data(format!(
            "split at {t_split} leaves {} training and {} forecast points",
            train.len(),
            forecast.len()
        )));
    }
    Ok((train, forecast))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize, t0: f64, dt: f64) -> StrainSeries {
        let times: Vec<f64> = (0..n).map(|i| t0 + dt * i as f64).collect();
        let strains = times.iter().map(|t| -390.0 - 0.1 * t).collect();
        StrainSeries::new(times, strains).unwrap()
    }

    #[test]
    fn construction_invariants() {
        assert!(StrainSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(StrainSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(StrainSeries::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(StrainSeries::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(StrainSeries::with_phases(vec![0.0, 1.0], vec![1.0, 2.0], Some(vec![1, 4])).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = StrainSeries::with_phases(
            vec![0.0, 0.5, 1.0 / 3.0 + 1.0],
            vec![-390.123456789012, -1e-7, 5.0],
            Some(vec![1, 2, 3]),
        )
        .unwrap();
        s.write_csv(&p).unwrap();
        assert_eq!(StrainSeries::load_csv(&p).unwrap(), s);

        let plain = ramp(10, 3.0, 0.7);
        plain.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("time_min,strain_microeps\n"));
        assert!(!text.contains('\r'));
        assert_eq!(StrainSeries::load_csv(&p).unwrap(), plain);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let check = |body: &str, needle: &str| {
            std::fs::write(&p, body).unwrap();
            match StrainSeries::load_csv(&p) {
                Err(Error::Data(msg)) => assert!(msg.contains(needle), "{msg} lacks {needle}"),
                other => panic!("expected data error, got {other:?}"),
            }
        };
        check("time_min,strain_microeps\n0,1\n1,2\n1,3\n", ":4:");
        check("time_min,strain_microeps\n", "at least 2");
        check("time_min,strain\n0,1\n1,2\n", "missing column");
        check("time_min,strain_microeps\n0,1\n1,abc\n", ":3:");
    }

    #[test]
    fn phase_boundaries() {
        let s = ramp(1301, 0.0, 1.0);
        let (p1, p2, p3) = split_phases(&s, 200.0, 1100.0).unwrap();
        assert_eq!(p1.last_time(), Some(199.0));
        assert_eq!(p2.times()[0], 200.0);
        assert_eq!(p3.times()[0], 1100.0);
        assert_eq!(p1.len() + p2.len() + p3.len(), s.len());
        assert!(split_phases(&s, 1100.0, 200.0).is_err());
    }

    #[test]
    fn train_forecast_boundaries() {
        let s = ramp(1301, 0.0, 1.0);
        let (tr, fc) = split_train_forecast(&s, 200.0, 800.0).unwrap();
        assert_eq!(tr.times()[0], 200.0);
        assert_eq!(tr.last_time(), Some(799.0));
        assert_eq!(fc.times()[0], 800.0);
        assert_eq!(fc.last_time(), Some(1300.0));
        assert!(!tr.times().contains(&150.0) && !fc.times().contains(&150.0));
        assert!(split_train_forecast(&s, 200.0, 2000.0).is_err());
    }

    proptest! {
        #[test]
        fn partitions_never_drop_or_duplicate(
            n in 2usize..400,
            dt in 0.5f64..7.0,
            b1 in 0.0f64..1500.0,
            gap in 1.0f64..800.0,
            split_gap in 1.0f64..900.0,
        ) {
            let s = ramp(n, 0.0, dt);
            let b2 = b1 + gap;
            let (a, b, c) = split_phases(&s, b1, b2).unwrap();
            let mut all: Vec<f64> = [a.times(), b.times(), c.times()].concat();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all.as_slice(), s.times());

            let start = 200.0;
            if let Ok((tr, fc)) = split_train_forecast(&s, start, start + split_gap) {
                let expected: Vec<f64> = s.times().iter().copied().filter(|&t| t >= start).collect();
                let got: Vec<f64> = [tr.times(), fc.times()].concat();
                prop_assert_eq!(got, expected);
            }
        }
    }
}
