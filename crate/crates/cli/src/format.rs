//! Scenario JSON, report JSON and the CSV exports.
//!
//! Rates are in bits in every file and in nats inside the library. JSON numbers
//! are written with serde_json's shortest round-trip form, so they carry full
//! double precision. CSV numbers carry 12 significant digits.

use std::f64::consts::LN_2;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use gne_core::experiments::{ConvergenceReport, SweepRow};
use gne_core::netgen::NetworkGeometry;
use gne_core::{IterationTrace, Scenario};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: io::Error },

    #[error("{path}: {err}")]
    Json {
        path: PathBuf,
        err: serde_json::Error,
    },

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error(transparent)]
    Scenario(#[from] gne_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn field(field: impl Into<String>, message: impl Into<String>) -> FormatError {
    FormatError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// On-disk scenario. `gain[q][r][k]` is the power gain from transmitter `r`
/// to receiver `q` on subchannel `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_users: usize,
    pub num_subchannels: usize,
    pub gain: Vec<Vec<Vec<f64>>>,
    pub noise: Vec<Vec<f64>>,
    pub rate_target_bits: Vec<f64>,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        let (q_n, n) = (s.num_users(), s.num_subchannels());
        Self {
            num_users: q_n,
            num_subchannels: n,
            gain: (0..q_n)
                .map(|q| {
                    (0..q_n)
                        .map(|r| (0..n).map(|k| s.gain(q, r, k)).collect())
                        .collect()
                })
                .collect(),
            noise: (0..q_n)
                .map(|q| (0..n).map(|k| s.noise(q, k)).collect())
                .collect(),
            rate_target_bits: s.rate_targets().iter().map(|r| r / LN_2).collect(),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario, FormatError> {
        let (q_n, n) = (self.num_users, self.num_subchannels);
        if q_n == 0 {
            return Err(field("num_users", "must be at least 1"));
        }
        if n == 0 {
            return Err(field("num_subchannels", "must be at least 1"));
        }
        if self.gain.len() != q_n {
            return Err(field(
                "gain",
                format!("has {} receivers, num_users is {q_n}", self.gain.len()),
            ));
        }
        for (q, row) in self.gain.iter().enumerate() {
            if row.len() != q_n {
                return Err(field(
                    format!("gain[{q}]"),
                    format!("has {} transmitters, num_users is {q_n}", row.len()),
                ));
            }
            for (r, per_k) in row.iter().enumerate() {
                if per_k.len() != n {
                    return Err(field(
                        format!("gain[{q}][{r}]"),
                        format!("has {} subchannels, num_subchannels is {n}", per_k.len()),
                    ));
                }
            }
        }
        if self.noise.len() != q_n {
            return Err(field(
                "noise",
                format!("has {} rows, num_users is {q_n}", self.noise.len()),
            ));
        }
        for (q, row) in self.noise.iter().enumerate() {
            if row.len() != n {
                return Err(field(
                    format!("noise[{q}]"),
                    format!("has {} subchannels, num_subchannels is {n}", row.len()),
                ));
            }
        }
        if self.rate_target_bits.len() != q_n {
            return Err(field(
                "rate_target_bits",
                format!(
                    "has {} entries, num_users is {q_n}",
                    self.rate_target_bits.len()
                ),
            ));
        }
        if let Some((q, r)) = self
            .rate_target_bits
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(field(
                format!("rate_target_bits[{q}]"),
                format!("{r} must be positive"),
            ));
        }
        Ok(Scenario::from_nested(
            &self.gain,
            &self.noise,
            self.rate_target_bits.iter().map(|b| b * LN_2).collect(),
        )?)
    }
}

fn open(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|err| FormatError::Io {
            path: path.to_owned(),
            err,
        })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|err| FormatError::Io {
        path: path.to_owned(),
        err,
    })?;
    serde_json::from_str(&text).map_err(|err| FormatError::Json {
        path: path.to_owned(),
        err,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, FormatError> {
    read_json::<ScenarioFile>(path)?.to_scenario()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(out: &mut impl Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut w = open(path)?;
    write_json(&mut w, value)
        .and_then(|_| w.flush())
        .map_err(|err| FormatError::Io {
            path: path.to_owned(),
            err,
        })
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<(), FormatError> {
    save_json(path, &ScenarioFile::from_scenario(s))
}

/// `v` with 12 significant digits, fixed notation for moderate magnitudes and
/// scientific otherwise, trailing zeros removed.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{v:.*}", (11 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, FormatError> {
    Ok(csv::Writer::from_writer(open(path)?))
}

/// One row per (sweep, user): `iteration,user,rate_nats,rate_bits,total_power,residual`.
pub fn write_trace_csv<W: Write>(out: W, trace: &IterationTrace) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "user",
        "rate_nats",
        "rate_bits",
        "total_power",
        "residual",
    ])?;
    for snap in &trace.snapshots {
        for (q, (rate, power)) in snap.rates.iter().zip(&snap.total_power).enumerate() {
            w.write_record([
                snap.iteration.to_string(),
                q.to_string(),
                fmt_num(*rate),
                fmt_num(rate / LN_2),
                fmt_num(*power),
                fmt_num(snap.residual),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_trace_csv(path: &Path, trace: &IterationTrace) -> Result<(), FormatError> {
    write_trace_csv(open(path)?, trace)
}

/// Both traces of a convergence run: `iteration,algorithm,user,rate_bits,residual`.
pub fn save_convergence_csv(path: &Path, report: &ConvergenceReport) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "algorithm", "user", "rate_bits", "residual"])?;
    for (name, outcome) in [
        ("sequential", &report.sequential),
        ("simultaneous", &report.simultaneous),
    ] {
        for snap in &outcome.trace.snapshots {
            for (q, rate) in snap.rates.iter().enumerate() {
                w.write_record([
                    snap.iteration.to_string(),
                    name.to_string(),
                    q.to_string(),
                    fmt_num(rate / LN_2),
                    fmt_num(snap.residual),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn save_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "proximity",
        "target_bits",
        "p_existence",
        "p_uniqueness",
        "p_zmax",
        "p_dd",
        "p_cor3",
        "trials",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            fmt_num(r.proximity),
            fmt_num(r.target_bits),
            fmt_num(r.p_existence),
            fmt_num(r.p_uniqueness),
            fmt_num(r.p_zmax),
            fmt_num(r.p_dd),
            fmt_num(r.p_cor3),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `link,tx_x,tx_y,rx_x,rx_y`. Geometries built from distances alone have no
/// positions to export.
pub fn save_geometry_csv(path: &Path, geom: &NetworkGeometry) -> Result<(), FormatError> {
    let (Some(tx), Some(rx)) = (&geom.tx, &geom.rx) else {
        return Err(field("geometry", "has no node positions"));
    };
    let mut w = csv_writer(path)?;
    w.write_record(["link", "tx_x", "tx_y", "rx_x", "rx_y"])?;
    for (q, (t, r)) in tx.iter().zip(rx).enumerate() {
        w.write_record([
            q.to_string(),
            fmt_num(t[0]),
            fmt_num(t[1]),
            fmt_num(r[0]),
            fmt_num(r[1]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(10.0 / 9.0), "1.11111111111");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(123456.0), "123456");
        assert_eq!(fmt_num(1e-10), "1e-10");
        assert_eq!(fmt_num(1.0 / 3.0 * 1e-7), "3.33333333333e-8");
        assert_eq!(fmt_num(999999999999.9), "1e12");
        assert_eq!(fmt_num(0.999_999_999_999_9), "1");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn file_round_trip() {
        let s = Scenario::symmetric(2, 3, 1.0, 0.1, 1.0, LN_2).unwrap();
        let file = ScenarioFile::from_scenario(&s);
        assert_eq!(file.rate_target_bits, vec![1.0, 1.0]);
        assert_eq!(file.gain[0][1], vec![0.1; 3]);
        assert_eq!(file.to_scenario().unwrap(), s);
    }

    type Mutation = fn(&mut ScenarioFile);

    #[test]
    fn errors_name_the_field() {
        let good =
            ScenarioFile::from_scenario(&Scenario::symmetric(2, 2, 1.0, 0.1, 1.0, 1.0).unwrap());
        let cases: [(Mutation, &str); 5] = [
            (|f| f.gain[1].pop().map(drop).unwrap(), "gain[1]"),
            (|f| f.noise[0].push(1.0), "noise[0]"),
            (|f| f.rate_target_bits[1] = -1.0, "rate_target_bits[1]"),
            (|f| f.num_subchannels = 3, "gain[0][0]"),
            (|f| f.noise[1][0] = 0.0, "noise[1][0]"),
        ];
        for (mutate, name) in cases {
            let mut f = good.clone();
            mutate(&mut f);
            let msg = f.to_scenario().unwrap_err().to_string();
            assert!(msg.contains(name), "{msg} should mention {name}");
        }
    }
}
