//! Multicell geometry and frequency-selective Rayleigh channels.
//!
//! Seven base stations sit on a regular hexagonal tiling, one mobile terminal
//! per cell. Downlink: transmitter `q` is base station `q`, receiver `q` is the
//! terminal it serves. Every link gets an `L`-tap channel whose taps are
//! i.i.d. circularly-symmetric complex Gaussian with total power `d^{-gamma}`,
//! and the subchannel gains are `|DFT_N(h)(k)|^2`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Scenario;

pub const HEX_CELLS: usize = 7;

/// Mixes `parts` into `master` (splitmix64 finalizer per part). Used to give
/// every trial and purpose its own generator without sharing state.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Generator for one stream of a seed, e.g. one link.
fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    pub num_links: usize,
    /// Transmitter positions, when the geometry came from a layout.
    pub tx: Option<Vec<[f64; 2]>>,
    pub rx: Option<Vec<[f64; 2]>>,
    /// `distance[q * Q + r]`: transmitter `r` to receiver `q`.
    pub distance: Vec<f64>,
    pub gamma: f64,
}

impl NetworkGeometry {
    pub fn from_distances(num_links: usize, distance: Vec<f64>, gamma: f64) -> Result<Self> {
        if num_links == 0 || distance.len() != num_links * num_links {
            return Err(Error::InvalidParameter(
                "distance matrix must be Q x Q, Q >= 1".into(),
            ));
        }
        if distance.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParameter("distances must be positive".into()));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(
                "path-loss exponent must be positive".into(),
            ));
        }
        Ok(Self {
            num_links,
            tx: None,
            rx: None,
            distance,
            gamma,
        })
    }

    /// Every link at `direct` from its own transmitter and `cross` from all others.
    pub fn uniform(num_links: usize, direct: f64, cross: f64, gamma: f64) -> Result<Self> {
        let distance = (0..num_links * num_links)
            .map(|i| {
                if i / num_links == i % num_links {
                    direct
                } else {
                    cross
                }
            })
            .collect();
        Self::from_distances(num_links, distance, gamma)
    }

    pub fn distance(&self, q: usize, r: usize) -> f64 {
        self.distance[q * self.num_links + r]
    }

    /// Mean power gain `d^{-gamma}` of link `(q, r)`.
    pub fn path_gain(&self, q: usize, r: usize) -> f64 {
        libm::pow(self.distance(q, r), -self.gamma)
    }
}

/// Seven-cell hexagonal layout.
///
/// Base stations are the center cell and its six neighbours at
/// `sqrt(3) * cell_radius`. Each terminal sits `(1 - proximity) * cell_radius`
/// from its own base station at a uniformly random angle, so `proximity -> 1`
/// pulls every terminal onto its base station.
pub fn hex_network(
    proximity: f64,
    seed: u64,
    cell_radius: f64,
    gamma: f64,
) -> Result<NetworkGeometry> {
    if !(0.0..1.0).contains(&proximity) {
        return Err(Error::InvalidParameter(alloc::format!(
            "proximity {proximity} outside [0, 1)"
        )));
    }
    if !(cell_radius.is_finite() && cell_radius > 0.0) {
        return Err(Error::InvalidParameter(
            "cell radius must be positive".into(),
        ));
    }
    let spacing = libm::sqrt(3.0) * cell_radius;
    let mut bs = vec![[0.0, 0.0]];
    for i in 0..6 {
        let a = PI / 6.0 + i as f64 * PI / 3.0;
        bs.push([spacing * libm::cos(a), spacing * libm::sin(a)]);
    }
    let offset = (1.0 - proximity) * cell_radius;
    let mt: Vec<[f64; 2]> = bs
        .iter()
        .enumerate()
        .map(|(q, b)| {
            let theta = stream_rng(seed, q as u64).random::<f64>() * 2.0 * PI;
            [
                b[0] + offset * libm::cos(theta),
                b[1] + offset * libm::sin(theta),
            ]
        })
        .collect();

    let mut distance = Vec::with_capacity(HEX_CELLS * HEX_CELLS);
    for q in 0..HEX_CELLS {
        for r in 0..HEX_CELLS {
            distance.push(if q == r {
                offset
            } else {
                libm::hypot(mt[q][0] - bs[r][0], mt[q][1] - bs[r][1])
            });
        }
    }
    let mut g = NetworkGeometry::from_distances(HEX_CELLS, distance, gamma)?;
    g.tx = Some(bs);
    g.rx = Some(mt);
    Ok(g)
}

/// `H(k) = sum_l h_l e^{-i 2 pi k l / N}` for `k = 0..N`, by Horner's rule in
/// `w_k = e^{-i 2 pi k / N}`.
pub fn frequency_response(taps: &[Complex64], num_subchannels: usize) -> Vec<Complex64> {
    (0..num_subchannels)
        .map(|k| {
            let angle = -2.0 * PI * k as f64 / num_subchannels as f64;
            let w = Complex64::new(libm::cos(angle), libm::sin(angle));
            taps.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, h| acc * w + h)
        })
        .collect()
}

fn draw_taps(rng: &mut ChaCha20Rng, num_taps: usize, mean_power: f64) -> Vec<Complex64> {
    let scale = libm::sqrt(mean_power / (2.0 * num_taps as f64));
    (0..num_taps)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect()
}

/// Per-subchannel power gains `gain[q][r][k]`, flat row-major.
///
/// Link `(q, r)` draws from its own stream of `seed`, so gains do not depend
/// on generation order. A direct link that lands exactly on zero is redrawn.
pub fn rayleigh_gains(
    geom: &NetworkGeometry,
    num_taps: usize,
    num_subchannels: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if num_taps == 0 {
        return Err(Error::InvalidParameter("need at least one tap".into()));
    }
    if num_subchannels < num_taps {
        return Err(Error::InvalidParameter(alloc::format!(
            "{num_subchannels} subchannels cannot resolve {num_taps} taps"
        )));
    }
    let q_n = geom.num_links;
    let mut gain = Vec::with_capacity(q_n * q_n * num_subchannels);
    for q in 0..q_n {
        for r in 0..q_n {
            let mut rng = stream_rng(seed, (q * q_n + r) as u64);
            loop {
                let taps = draw_taps(&mut rng, num_taps, geom.path_gain(q, r));
                let link: Vec<f64> = frequency_response(&taps, num_subchannels)
                    .iter()
                    .map(|h| h.norm_sqr())
                    .collect();
                if q != r || link.iter().all(|&g| g > 0.0) {
                    gain.extend(link);
                    break;
                }
            }
        }
    }
    Ok(gain)
}

/// Full scenario over a geometry: Rayleigh gains, flat noise `noise`, and the
/// given rate targets (nats).
pub fn scenario_from_geometry(
    geom: &NetworkGeometry,
    num_taps: usize,
    num_subchannels: usize,
    seed: u64,
    noise: f64,
    rate_target: Vec<f64>,
) -> Result<Scenario> {
    let gain = rayleigh_gains(geom, num_taps, num_subchannels, seed)?;
    let q_n = geom.num_links;
    Scenario::new(
        q_n,
        num_subchannels,
        gain,
        vec![noise; q_n * num_subchannels],
        rate_target,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proximity_zero_puts_terminal_on_cell_edge() {
        for seed in 0..5 {
            let g = hex_network(0.0, seed, 1.0, 2.5).unwrap();
            for q in 0..HEX_CELLS {
                assert_eq!(g.distance(q, q), 1.0);
            }
        }
    }

    #[test]
    fn proximity_near_one_shrinks_direct_distance() {
        let g = hex_network(1.0 - 1e-9, 3, 1.0, 2.5).unwrap();
        for q in 0..HEX_CELLS {
            assert!(g.distance(q, q) > 0.0 && g.distance(q, q) < 2e-9);
            for r in (0..HEX_CELLS).filter(|&r| r != q) {
                assert!(g.distance(q, r) > 1.0);
            }
        }
        assert!(hex_network(1.0, 3, 1.0, 2.5).is_err());
        assert!(hex_network(-0.1, 3, 1.0, 2.5).is_err());
    }

    #[test]
    fn geometry_is_deterministic() {
        assert_eq!(
            hex_network(0.5, 42, 1.0, 2.5).unwrap(),
            hex_network(0.5, 42, 1.0, 2.5).unwrap()
        );
        assert_ne!(
            hex_network(0.5, 42, 1.0, 2.5).unwrap(),
            hex_network(0.5, 43, 1.0, 2.5).unwrap()
        );
    }

    #[test]
    fn neighbour_spacing() {
        let g = hex_network(0.3, 1, 2.0, 2.5).unwrap();
        let bs = g.tx.unwrap();
        for b in &bs[1..] {
            assert!((libm::hypot(b[0], b[1]) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_channel_with_one_tap() {
        let g = NetworkGeometry::uniform(2, 1.0, 3.0, 2.5).unwrap();
        let gain = rayleigh_gains(&g, 1, 8, 9).unwrap();
        for link in gain.chunks(8) {
            assert!(link.iter().all(|&v| (v - link[0]).abs() <= 1e-15 * link[0]));
        }
    }

    #[test]
    fn gains_are_reproducible() {
        let g = NetworkGeometry::uniform(3, 1.0, 3.0, 2.5).unwrap();
        let a = rayleigh_gains(&g, 6, 32, 5).unwrap();
        let b = rayleigh_gains(&g, 6, 32, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn bad_parameters() {
        let g = NetworkGeometry::uniform(2, 1.0, 3.0, 2.5).unwrap();
        assert!(rayleigh_gains(&g, 0, 8, 1).is_err());
        assert!(rayleigh_gains(&g, 9, 8, 1).is_err());
        assert!(NetworkGeometry::uniform(2, 0.0, 3.0, 2.5).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, &[0, 1]);
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 1]));
        assert_eq!(a, derive_seed(1, &[0, 1]));
    }
}
