#![allow(dead_code)]

use gne_core::conditions::check_uniqueness;
use gne_core::linalg::Matrix;
use gne_core::{PowerAllocation, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct gains in `[0.5, 2)`, cross gains in `[0, cross_max)`, noise in
/// `[0.5, 2)`, targets in `[rate_lo, rate_hi)` nats.
pub fn random_scenario(
    rng: &mut impl Rng,
    q: usize,
    n: usize,
    cross_max: f64,
    (rate_lo, rate_hi): (f64, f64),
) -> Scenario {
    let mut gain = Vec::with_capacity(q * q * n);
    for rx in 0..q {
        for tx in 0..q {
            for _ in 0..n {
                gain.push(if rx == tx {
                    rng.random_range(0.5..2.0)
                } else {
                    rng.random_range(0.0..cross_max)
                });
            }
        }
    }
    let noise = (0..q * n).map(|_| rng.random_range(0.5..2.0)).collect();
    let rates = (0..q).map(|_| rng.random_range(rate_lo..rate_hi)).collect();
    Scenario::new(q, n, gain, noise, rates).unwrap()
}

/// Random scenario with 2-5 users and 1-8 subchannels, a mix of certified and
/// uncertified.
pub fn mixed_scenario(rng: &mut impl Rng) -> Scenario {
    let q = rng.random_range(2..=5);
    let n = rng.random_range(1..=8);
    let cross = [0.02, 0.1, 0.3, 1.0][rng.random_range(0..4)];
    random_scenario(rng, q, n, cross, (0.1, 1.5))
}

/// Rejection-samples scenarios that pass the uniqueness certificate.
pub fn certified_scenario(rng: &mut impl Rng) -> Scenario {
    loop {
        let q = rng.random_range(2..=5);
        let n = rng.random_range(1..=8);
        let s = random_scenario(rng, q, n, 0.1, (0.05, 1.0));
        if check_uniqueness(&s) {
            return s;
        }
    }
}

pub fn random_allocation(rng: &mut impl Rng, q: usize, n: usize, max: f64) -> PowerAllocation {
    PowerAllocation::from_flat(
        q,
        n,
        (0..q * n).map(|_| rng.random_range(0.0..max)).collect(),
    )
    .unwrap()
}

/// Z-matrix with diagonal in `(0, 1]` and off-diagonal in `[-0.6, 0]`, which
/// lands on both sides of the P-matrix boundary for dims 2-6.
pub fn random_z_matrix(rng: &mut impl Rng, dim: usize) -> Matrix {
    Matrix::from_fn(dim, |i, j| {
        if i == j {
            1.0 - rng.random_range(0.0..1.0)
        } else {
            -rng.random_range(0.0..0.6)
        }
    })
}
