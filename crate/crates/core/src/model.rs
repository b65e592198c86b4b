//! Problem instances and the elementary channel formulas.
//!
//! Gains are power gains `|H_qr(k)|^2` (receiver `q`, transmitter `r`,
//! subchannel `k`). Indices are zero based.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// A full problem instance: channel gains, noise variances and rate targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    num_users: usize,
    num_subchannels: usize,
    // [q][r][k], row-major
    gain: Vec<f64>,
    // [q][k]
    noise: Vec<f64>,
    rate_target: Vec<f64>,
}

impl Scenario {
    /// Builds a scenario from flat row-major arrays.
    ///
    /// `gain` is indexed `[q][r][k]`, `noise` is indexed `[q][k]`, and
    /// `rate_target` holds one target per user in nats.
    pub fn new(
        num_users: usize,
        num_subchannels: usize,
        gain: Vec<f64>,
        noise: Vec<f64>,
        rate_target: Vec<f64>,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::InvalidScenario("num_users must be positive".into()));
        }
        if num_subchannels == 0 {
            return Err(Error::InvalidScenario(
                "num_subchannels must be positive".into(),
            ));
        }
        let (q, n) = (num_users, num_subchannels);
        if gain.len() != q * q * n {
            return Err(Error::InvalidScenario(alloc::format!(
                "gain has {} entries, expected {}",
                gain.len(),
                q * q * n
            )));
        }
        if noise.len() != q * n {
            return Err(Error::InvalidScenario(alloc::format!(
                "noise has {} entries, expected {}",
                noise.len(),
                q * n
            )));
        }
        if rate_target.len() != q {
            return Err(Error::InvalidScenario(alloc::format!(
                "rate_target has {} entries, expected {}",
                rate_target.len(),
                q
            )));
        }
        for (i, &g) in gain.iter().enumerate() {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidScenario(alloc::format!(
                    "gain[{}][{}][{}] = {} is not a finite nonnegative number",
                    i / (q * n),
                    (i / n) % q,
                    i % n,
                    g
                )));
            }
        }
        for u in 0..q {
            for k in 0..n {
                if !(gain[(u * q + u) * n + k] > 0.0) {
                    return Err(Error::InvalidScenario(alloc::format!(
                        "direct gain[{u}][{u}][{k}] must be positive"
                    )));
                }
                let s = noise[u * n + k];
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::InvalidScenario(alloc::format!(
                        "noise[{u}][{k}] = {s} must be positive"
                    )));
                }
            }
            let r = rate_target[u];
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidScenario(alloc::format!(
                    "rate_target[{u}] = {r} must be positive"
                )));
            }
        }
        Ok(Self {
            num_users,
            num_subchannels,
            gain,
            noise,
            rate_target,
        })
    }

    /// Builds a scenario from nested arrays `gain[q][r][k]` and `noise[q][k]`.
    pub fn from_nested(
        gain: &[Vec<Vec<f64>>],
        noise: &[Vec<f64>],
        rate_target: Vec<f64>,
    ) -> Result<Self> {
        let q = gain.len();
        let n = gain
            .first()
            .and_then(|row| row.first())
            .map_or(0, |v| v.len());
        let mut flat = Vec::with_capacity(q * q * n);
        for (u, row) in gain.iter().enumerate() {
            if row.len() != q {
                return Err(Error::InvalidScenario(alloc::format!(
                    "gain[{u}] has {} transmitters, expected {q}",
                    row.len()
                )));
            }
            for (r, per_k) in row.iter().enumerate() {
                if per_k.len() != n {
                    return Err(Error::InvalidScenario(alloc::format!(
                        "gain[{u}][{r}] has {} subchannels, expected {n}",
                        per_k.len()
                    )));
                }
                flat.extend_from_slice(per_k);
            }
        }
        let mut noise_flat = Vec::with_capacity(q * n);
        for (u, row) in noise.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidScenario(alloc::format!(
                    "noise[{u}] has {} subchannels, expected {n}",
                    row.len()
                )));
            }
            noise_flat.extend_from_slice(row);
        }
        Self::new(q, n, flat, noise_flat, rate_target)
    }

    /// Same-shaped instance on every subchannel: direct gain `direct`, every
    /// cross gain `cross`, noise `noise` and common target `rate` (nats).
    pub fn symmetric(
        num_users: usize,
        num_subchannels: usize,
        direct: f64,
        cross: f64,
        noise: f64,
        rate: f64,
    ) -> Result<Self> {
        let (q, n) = (num_users, num_subchannels);
        let mut gain = vec![cross; q * q * n];
        for u in 0..q {
            for k in 0..n {
                gain[(u * q + u) * n + k] = direct;
            }
        }
        Self::new(q, n, gain, vec![noise; q * n], vec![rate; q])
    }

    /// Copy of this scenario with different rate targets (nats).
    pub fn with_rate_targets(&self, rate_target: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_users,
            self.num_subchannels,
            self.gain.clone(),
            self.noise.clone(),
            rate_target,
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subchannels(&self) -> usize {
        self.num_subchannels
    }

    /// `|H_qr(k)|^2`. Panics on out-of-range indices.
    #[inline]
    pub fn gain(&self, q: usize, r: usize, k: usize) -> f64 {
        self.gain[(q * self.num_users + r) * self.num_subchannels + k]
    }

    #[inline]
    pub fn noise(&self, q: usize, k: usize) -> f64 {
        self.noise[q * self.num_subchannels + k]
    }

    #[inline]
    pub fn rate_target(&self, q: usize) -> f64 {
        self.rate_target[q]
    }

    pub fn rate_targets(&self) -> &[f64] {
        &self.rate_target
    }

    pub fn gains_flat(&self) -> &[f64] {
        &self.gain
    }

    pub fn noise_flat(&self) -> &[f64] {
        &self.noise
    }

    /// `e^{R*_q} - 1`, the SINR a single subchannel would need to carry the
    /// whole target.
    #[inline]
    pub(crate) fn snr_gap(&self, q: usize) -> f64 {
        libm::expm1(self.rate_target[q])
    }

    pub(crate) fn check_user(&self, q: usize) -> Result<()> {
        check_index("user", q, self.num_users)
    }

    pub(crate) fn check_allocation(&self, p: &PowerAllocation) -> Result<()> {
        if p.num_users() != self.num_users {
            return Err(Error::DimensionMismatch {
                expected: self.num_users,
                actual: p.num_users(),
            });
        }
        if p.num_subchannels() != self.num_subchannels {
            return Err(Error::DimensionMismatch {
                expected: self.num_subchannels,
                actual: p.num_subchannels(),
            });
        }
        Ok(())
    }
}

/// Per-user, per-subchannel transmit powers `p_q(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    num_users: usize,
    num_subchannels: usize,
    values: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(num_users: usize, num_subchannels: usize) -> Self {
        Self {
            num_users,
            num_subchannels,
            values: vec![0.0; num_users * num_subchannels],
        }
    }

    pub fn filled(num_users: usize, num_subchannels: usize, value: f64) -> Result<Self> {
        Self::from_flat(
            num_users,
            num_subchannels,
            vec![value; num_users * num_subchannels],
        )
    }

    pub fn from_flat(num_users: usize, num_subchannels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_users * num_subchannels {
            return Err(Error::DimensionMismatch {
                expected: num_users * num_subchannels,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(alloc::format!(
                "power {bad} is not a finite nonnegative number"
            )));
        }
        Ok(Self {
            num_users,
            num_subchannels,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("ragged power rows".into()));
        }
        Self::from_flat(q, n, rows.concat())
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subchannels(&self) -> usize {
        self.num_subchannels
    }

    #[inline]
    pub fn get(&self, q: usize, k: usize) -> f64 {
        self.values[q * self.num_subchannels + k]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let n = self.num_subchannels;
        &self.values[q * n..(q + 1) * n]
    }

    /// Overwrites user `q`'s row. The caller guarantees nonnegative finite
    /// values of the right length.
    pub(crate) fn set_row(&mut self, q: usize, row: &[f64]) {
        let n = self.num_subchannels;
        self.values[q * n..(q + 1) * n].copy_from_slice(row);
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_users).map(|q| self.row(q).to_vec()).collect()
    }

    /// Sup-norm distance. Shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)))
    }
}

/// Noise-plus-interference `tau_q(k)` seen by every user.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    num_subchannels: usize,
    tau: Vec<f64>,
}

impl InterferenceProfile {
    pub fn new(s: &Scenario, p: &PowerAllocation) -> Result<Self> {
        s.check_allocation(p)?;
        let mut tau = Vec::with_capacity(s.num_users() * s.num_subchannels());
        for q in 0..s.num_users() {
            tau.extend(interference_profile(s, p, q)?);
        }
        Ok(Self {
            num_subchannels: s.num_subchannels(),
            tau,
        })
    }

    pub fn get(&self, q: usize, k: usize) -> f64 {
        self.tau[q * self.num_subchannels + k]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let n = self.num_subchannels;
        &self.tau[q * n..(q + 1) * n]
    }
}

/// Sum and per-subchannel average of one user's powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTotals {
    pub sum: f64,
    pub average: f64,
}

fn interference_at(s: &Scenario, p: &PowerAllocation, q: usize, k: usize) -> f64 {
    let mut tau = s.noise(q, k);
    for r in (0..s.num_users()).filter(|&r| r != q) {
        tau += s.gain(q, r, k) * p.get(r, k);
    }
    tau
}

/// Signal-to-interference-plus-noise ratio of user `q` on subchannel `k`.
pub fn sinr(s: &Scenario, p: &PowerAllocation, q: usize, k: usize) -> Result<f64> {
    s.check_allocation(p)?;
    s.check_user(q)?;
    check_index("subchannel", k, s.num_subchannels())?;
    Ok(s.gain(q, q, k) * p.get(q, k) / interference_at(s, p, q, k))
}

/// Information rate of user `q` in nats: `sum_k ln(1 + sinr_q(k))`.
pub fn rate(s: &Scenario, p: &PowerAllocation, q: usize) -> Result<f64> {
    s.check_allocation(p)?;
    s.check_user(q)?;
    Ok((0..s.num_subchannels())
        .map(|k| libm::log1p(s.gain(q, q, k) * p.get(q, k) / interference_at(s, p, q, k)))
        .sum())
}

/// Rates of all users, in nats.
pub fn rates(s: &Scenario, p: &PowerAllocation) -> Result<Vec<f64>> {
    (0..s.num_users()).map(|q| rate(s, p, q)).collect()
}

pub fn total_power(p: &PowerAllocation, q: usize) -> Result<PowerTotals> {
    check_index("user", q, p.num_users())?;
    let sum: f64 = p.row(q).iter().sum();
    Ok(PowerTotals {
        sum,
        average: sum / p.num_subchannels() as f64,
    })
}

/// `tau_q(k) = sigma_q^2(k) + sum_{r != q} |H_qr(k)|^2 p_r(k)` for every `k`.
pub fn interference_profile(s: &Scenario, p: &PowerAllocation, q: usize) -> Result<Vec<f64>> {
    s.check_allocation(p)?;
    s.check_user(q)?;
    Ok((0..s.num_subchannels())
        .map(|k| interference_at(s, p, q, k))
        .collect())
}

/// Interference profile divided by the direct gain: the floor the waterfill
/// pours over.
pub fn normalized_noise(s: &Scenario, p: &PowerAllocation, q: usize) -> Result<Vec<f64>> {
    let mut tau = interference_profile(s, p, q)?;
    for (k, t) in tau.iter_mut().enumerate() {
        *t /= s.gain(q, q, k);
    }
    Ok(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn two_user() -> Scenario {
        Scenario::symmetric(2, 1, 1.0, 0.5, 1.0, LN_2).unwrap()
    }

    fn single_user_two_channels() -> Scenario {
        Scenario::new(1, 2, vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0]).unwrap()
    }

    #[test]
    fn sinr_examples() {
        let s = two_user();
        let p = PowerAllocation::filled(2, 1, 2.0).unwrap();
        assert!((sinr(&s, &p, 0, 0).unwrap() - 1.0).abs() < 1e-15);
        let z = PowerAllocation::zeros(2, 1);
        assert_eq!(sinr(&s, &z, 1, 0).unwrap(), 0.0);

        let s1 = Scenario::new(1, 1, vec![1.0], vec![2.0], vec![1.0]).unwrap();
        let p1 = PowerAllocation::filled(1, 1, 6.0).unwrap();
        assert_eq!(sinr(&s1, &p1, 0, 0).unwrap(), 3.0);
    }

    #[test]
    fn rate_examples() {
        let s = two_user();
        let p = PowerAllocation::filled(2, 1, 2.0).unwrap();
        assert!((rate(&s, &p, 0).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(rate(&s, &PowerAllocation::zeros(2, 1), 1).unwrap(), 0.0);

        let s2 = single_user_two_channels();
        let p2 = PowerAllocation::from_rows(&[vec![3.0, 2.0]]).unwrap();
        assert!((rate(&s2, &p2, 0).unwrap() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn totals() {
        let p = PowerAllocation::from_rows(&[vec![3.0, 2.0]]).unwrap();
        assert_eq!(
            total_power(&p, 0).unwrap(),
            PowerTotals {
                sum: 5.0,
                average: 2.5
            }
        );
        let z = PowerAllocation::zeros(1, 3);
        assert_eq!(total_power(&z, 0).unwrap().sum, 0.0);
        let one = PowerAllocation::filled(1, 1, 2.0).unwrap();
        let t = total_power(&one, 0).unwrap();
        assert_eq!((t.sum, t.average), (2.0, 2.0));
    }

    #[test]
    fn interference_and_normalized_noise() {
        let s = two_user();
        let p = PowerAllocation::filled(2, 1, 2.0).unwrap();
        assert_eq!(interference_profile(&s, &p, 0).unwrap(), vec![2.0]);
        assert_eq!(normalized_noise(&s, &p, 0).unwrap(), vec![2.0]);
        assert_eq!(
            interference_profile(&s, &PowerAllocation::zeros(2, 1), 1).unwrap(),
            vec![1.0]
        );

        let s2 = single_user_two_channels();
        let p2 = PowerAllocation::from_rows(&[vec![7.0, 9.0]]).unwrap();
        assert_eq!(interference_profile(&s2, &p2, 0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(normalized_noise(&s2, &p2, 0).unwrap(), vec![1.0, 2.0]);

        let s3 = Scenario::new(1, 1, vec![4.0], vec![2.0], vec![1.0]).unwrap();
        let p3 = PowerAllocation::zeros(1, 1);
        assert_eq!(normalized_noise(&s3, &p3, 0).unwrap(), vec![0.5]);

        let prof = InterferenceProfile::new(&s, &p).unwrap();
        assert_eq!(prof.row(1), &[2.0]);
    }

    #[test]
    fn index_errors() {
        let s = two_user();
        let p = PowerAllocation::zeros(2, 1);
        assert!(matches!(
            sinr(&s, &p, 2, 0),
            Err(Error::IndexOutOfRange { what: "user", .. })
        ));
        assert!(matches!(
            sinr(&s, &p, 0, 1),
            Err(Error::IndexOutOfRange {
                what: "subchannel",
                ..
            })
        ));
        assert!(rate(&s, &p, 5).is_err());
        assert!(total_power(&p, 2).is_err());
        assert!(normalized_noise(&s, &p, 9).is_err());
        let wrong = PowerAllocation::zeros(3, 1);
        assert!(matches!(
            rate(&s, &wrong, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::new(1, 1, vec![0.0], vec![1.0], vec![1.0]).is_err());
        assert!(Scenario::new(1, 1, vec![1.0], vec![0.0], vec![1.0]).is_err());
        assert!(Scenario::new(1, 1, vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(Scenario::new(1, 1, vec![1.0, 2.0], vec![1.0], vec![1.0]).is_err());
        assert!(
            Scenario::new(2, 1, vec![1.0, -1.0, 0.0, 1.0], vec![1.0; 2], vec![1.0; 2]).is_err()
        );
        assert!(PowerAllocation::from_flat(1, 1, vec![-1.0]).is_err());
        assert!(PowerAllocation::from_flat(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn nested_roundtrip() {
        let s = Scenario::from_nested(
            &[
                vec![vec![1.0, 2.0], vec![0.1, 0.2]],
                vec![vec![0.3, 0.4], vec![3.0, 4.0]],
            ],
            &[vec![1.0, 1.5], vec![2.0, 2.5]],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(s.gain(0, 1, 1), 0.2);
        assert_eq!(s.gain(1, 0, 0), 0.3);
        assert_eq!(s.noise(1, 1), 2.5);
        assert!(Scenario::from_nested(&[vec![vec![1.0]]], &[vec![1.0, 2.0]], vec![1.0]).is_err());
    }
}
