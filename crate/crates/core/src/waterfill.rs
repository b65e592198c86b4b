//! Rate-constrained single-user waterfilling.
//!
//! Given the normalized noise floor `n(k) = tau(k) / |H(k)|^2` a user sees, the
//! least-power allocation reaching rate `R` is `p(k) = (lambda - n(k))^+` with
//! the water level chosen so that `sum_{n(k) < lambda} ln(lambda / n(k)) = R`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{normalized_noise, PowerAllocation, Scenario};

/// Water level and the subchannels strictly below it.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterLevel {
    pub level: f64,
    /// Active subchannel indices in ascending order.
    pub active: Vec<usize>,
}

fn validate(floor: &[f64], rate: f64) -> Result<()> {
    if floor.is_empty() {
        return Err(Error::InvalidWaterfill("empty noise vector"));
    }
    if floor.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::InvalidWaterfill("noise entries must be positive"));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidWaterfill("rate must be positive"));
    }
    Ok(())
}

/// Exact water level by scanning the sorted floor.
///
/// With the floor sorted ascending, filling the `m` lowest subchannels gives
/// `ln lambda_m = (R + sum_{i<=m} ln n_(i)) / m`. The first `m` whose level
/// does not exceed `n_(m+1)` is the answer. Everything is kept in the log
/// domain so neither `e^R` nor the product of floors can overflow.
pub fn water_level_exact(floor: &[f64], rate: f64) -> Result<WaterLevel> {
    validate(floor, rate)?;
    let mut order: Vec<usize> = (0..floor.len()).collect();
    order.sort_by(|&a, &b| floor[a].total_cmp(&floor[b]));

    let mut log_sum = 0.0;
    let mut log_level = 0.0;
    for (m, &idx) in order.iter().enumerate() {
        log_sum += libm::log(floor[idx]);
        log_level = (rate + log_sum) / (m + 1) as f64;
        match order.get(m + 1) {
            Some(&next) if log_level > libm::log(floor[next]) => continue,
            _ => break,
        }
    }
    let level = libm::exp(log_level);
    // ties at the level count as inactive
    let active = (0..floor.len()).filter(|&k| floor[k] < level).collect();
    Ok(WaterLevel { level, active })
}

fn rate_at_level(floor: &[f64], level: f64) -> f64 {
    floor
        .iter()
        .filter(|&&v| v < level)
        .map(|&v| libm::log(level / v))
        .sum()
}

/// Water level by bisection on the achieved rate.
///
/// Independent of the sorted scan in [`water_level_exact`]; kept as a
/// cross-check. Stops once the achieved rate is within `tol` of `rate` or the
/// bracket can no longer shrink.
pub fn water_level_bisection(floor: &[f64], rate: f64, tol: f64) -> Result<f64> {
    validate(floor, rate)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidWaterfill("tolerance must be positive"));
    }
    let mut lo = floor.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = 2.0 * lo;
    while rate_at_level(floor, hi) < rate {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Ok(mid);
        }
        let achieved = rate_at_level(floor, mid);
        if libm::fabs(achieved - rate) <= tol {
            return Ok(mid);
        }
        if achieved < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `(lambda - n(k))^+` for every subchannel.
pub fn waterfill(floor: &[f64], rate: f64) -> Result<Vec<f64>> {
    let WaterLevel { level, .. } = water_level_exact(floor, rate)?;
    Ok(floor.iter().map(|&v| f64::max(level - v, 0.0)).collect())
}

/// Best response of user `q` to the other users' powers in `p`.
///
/// The result reaches exactly the user's rate target with the least total
/// power; user `q`'s own row of `p` is ignored.
pub fn waterfill_op(s: &Scenario, p: &PowerAllocation, q: usize) -> Result<Vec<f64>> {
    let floor = normalized_noise(s, p, q)?;
    waterfill(&floor, s.rate_target(q))
}
