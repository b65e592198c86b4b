//! Seeded batch experiments: certificate probabilities over a proximity sweep,
//! and sequential vs simultaneous convergence on one scenario.
//!
//! Trials are independent and keyed by `(master seed, trial index)`, so the
//! work can be split across workers in any order; aggregation only counts.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::conditions::{
    bbar_is_p_matrix, check_existence, check_existence_dd, check_existence_zmax, check_uniqueness,
    check_uniqueness_cor3, contraction_factors,
};
use crate::error::{Error, Result};
use crate::model::{PowerAllocation, Scenario};
use crate::netgen::{derive_seed, hex_network, scenario_from_geometry, NetworkGeometry};
use crate::solvers::{sequential_iwfa, simultaneous_iwfa, SolveOutcome, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub proximity_grid: Vec<f64>,
    pub trials: usize,
    /// Per-subchannel rate targets in bits; each user's total target is
    /// `num_subchannels * target * ln 2` nats.
    pub target_bits: Vec<f64>,
    pub num_taps: usize,
    pub num_subchannels: usize,
    pub gamma: f64,
    pub cell_radius: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            proximity_grid: default_proximity_grid(),
            trials: 200,
            target_bits: vec![1.0, 2.0],
            num_taps: 6,
            num_subchannels: 32,
            gamma: 2.5,
            cell_radius: 1.0,
            noise: 1.0,
            seed: 2008,
        }
    }
}

/// Ten points `1 - 10^{-e}` with `e` from 3 to 12.
///
/// Per-subchannel targets of 1-2 bits over 32 subchannels put `e^{R*}` at
/// `2^32`-`2^64`, so the certificates only start to pass once each terminal is
/// within `~1e-5` (1 bit) or `~1e-8` (2 bits) cell radii of its base station.
/// A linear grid on `[0, 1)` would read zero everywhere.
pub fn default_proximity_grid() -> Vec<f64> {
    (0..10)
        .map(|i| 1.0 - libm::pow(10.0, -(3.0 + i as f64)))
        .collect()
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.proximity_grid.is_empty() {
            return Err(Error::InvalidParameter("empty proximity grid".into()));
        }
        if let Some(p) = self
            .proximity_grid
            .iter()
            .find(|p| !(0.0..1.0).contains(*p))
        {
            return Err(Error::InvalidParameter(alloc::format!(
                "proximity {p} outside [0, 1)"
            )));
        }
        if self.target_bits.is_empty() || self.target_bits.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("targets must be positive".into()));
        }
        if self.num_taps == 0 || self.num_subchannels < self.num_taps {
            return Err(Error::InvalidParameter(
                "need 1 <= num_taps <= num_subchannels".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.cell_radius > 0.0 && self.noise > 0.0) {
            return Err(Error::InvalidParameter(
                "gamma, cell_radius and noise must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Total per-user target in nats for a per-subchannel target in bits.
    pub fn total_rate_nats(&self, target_bits: f64) -> f64 {
        self.num_subchannels as f64 * target_bits * LN_2
    }
}

/// Certificate outcomes for one channel draw at one rate target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFlags {
    pub existence: bool,
    pub uniqueness: bool,
    pub zmax: bool,
    pub dd: bool,
    pub cor3: bool,
}

pub fn certificate_flags(s: &Scenario) -> CertificateFlags {
    let existence = check_existence(s);
    let uniqueness = existence
        .bound
        .as_ref()
        .is_some_and(|pbar| bbar_is_p_matrix(s, pbar));
    CertificateFlags {
        existence: existence.holds,
        uniqueness,
        zmax: check_existence_zmax(s).holds,
        dd: check_existence_dd(s),
        cor3: check_uniqueness_cor3(s),
    }
}

/// One trial at one grid point: a fresh layout and channel draw, tested at
/// every configured rate target. The draw depends only on the master seed and
/// the trial index, so all grid points and targets share it.
pub fn run_trial(
    cfg: &SweepConfig,
    grid_index: usize,
    trial: usize,
) -> Result<Vec<CertificateFlags>> {
    let proximity = *cfg
        .proximity_grid
        .get(grid_index)
        .ok_or(Error::IndexOutOfRange {
            what: "grid point",
            index: grid_index,
            len: cfg.proximity_grid.len(),
        })?;
    let geom = hex_network(
        proximity,
        derive_seed(cfg.seed, &[trial as u64, 0]),
        cfg.cell_radius,
        cfg.gamma,
    )?;
    let base = scenario_from_geometry(
        &geom,
        cfg.num_taps,
        cfg.num_subchannels,
        derive_seed(cfg.seed, &[trial as u64, 1]),
        cfg.noise,
        vec![1.0; geom.num_links],
    )?;
    cfg.target_bits
        .iter()
        .map(|&t| {
            let s = base.with_rate_targets(vec![cfg.total_rate_nats(t); geom.num_links])?;
            Ok(certificate_flags(&s))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub proximity: f64,
    pub target_bits: f64,
    pub p_existence: f64,
    pub p_uniqueness: f64,
    pub p_zmax: f64,
    pub p_dd: f64,
    pub p_cor3: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Counts of passing certificates, indexed `[grid point][target]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCounts {
    counts: Vec<[usize; 5]>,
    targets: usize,
}

impl SweepCounts {
    pub fn new(cfg: &SweepConfig) -> Self {
        Self {
            counts: vec![[0; 5]; cfg.proximity_grid.len() * cfg.target_bits.len()],
            targets: cfg.target_bits.len(),
        }
    }

    pub fn add(&mut self, grid_index: usize, flags: &[CertificateFlags]) {
        for (t, f) in flags.iter().enumerate() {
            let c = &mut self.counts[grid_index * self.targets + t];
            for (slot, pass) in c
                .iter_mut()
                .zip([f.existence, f.uniqueness, f.zmax, f.dd, f.cor3])
            {
                *slot += pass as usize;
            }
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    pub fn rows(&self, cfg: &SweepConfig) -> Vec<SweepRow> {
        let n = cfg.trials as f64;
        let mut rows = Vec::with_capacity(self.counts.len());
        for (g, &proximity) in cfg.proximity_grid.iter().enumerate() {
            for (t, &target_bits) in cfg.target_bits.iter().enumerate() {
                let c = self.counts[g * self.targets + t];
                rows.push(SweepRow {
                    proximity,
                    target_bits,
                    p_existence: c[0] as f64 / n,
                    p_uniqueness: c[1] as f64 / n,
                    p_zmax: c[2] as f64 / n,
                    p_dd: c[3] as f64 / n,
                    p_cor3: c[4] as f64 / n,
                    trials: cfg.trials,
                    seed: cfg.seed,
                });
            }
        }
        rows
    }
}

/// Fraction of trials passing each certificate at every (proximity, target).
pub fn condition_probability_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut counts = SweepCounts::new(cfg);
    for g in 0..cfg.proximity_grid.len() {
        for trial in 0..cfg.trials {
            counts.add(g, &run_trial(cfg, g, trial)?);
        }
    }
    Ok(counts.rows(cfg))
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / libm::sqrt(sxx * syy))
}

/// Both algorithms from the same starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub sequential: SolveOutcome,
    pub simultaneous: SolveOutcome,
    /// Predicted `(rho_sim, rho_seq)` when the existence certificate holds.
    pub predicted_contraction: Option<(f64, f64)>,
}

impl ConvergenceReport {
    pub fn iterations_sequential(&self) -> Option<usize> {
        self.sequential
            .converged
            .then_some(self.sequential.iterations)
    }

    pub fn iterations_simultaneous(&self) -> Option<usize> {
        self.simultaneous
            .converged
            .then_some(self.simultaneous.iterations)
    }
}

pub fn convergence_experiment(s: &Scenario, opts: &SolverOptions) -> Result<ConvergenceReport> {
    let p0 = PowerAllocation::zeros(s.num_users(), s.num_subchannels());
    Ok(ConvergenceReport {
        sequential: sequential_iwfa(s, &p0, opts)?,
        simultaneous: simultaneous_iwfa(s, &p0, opts)?,
        predicted_contraction: contraction_factors(s).ok(),
    })
}

/// First sweep whose recorded residual is below `tol`.
pub fn iterations_to_tolerance(outcome: &SolveOutcome, tol: f64) -> Option<usize> {
    outcome
        .trace
        .snapshots
        .iter()
        .find(|snap| snap.residual < tol)
        .map(|snap| snap.iteration)
}

/// Parameters of the many-link convergence scenario: every link `direct`
/// from its own transmitter and `cross` from the others.
///
/// With ten links at cross distance 3 the uniqueness certificate needs a flat
/// channel and a small target: one tap and 0.1 bit certify about one draw in
/// ten, two or more taps essentially never.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkArrayConfig {
    pub num_links: usize,
    pub direct_distance: f64,
    pub cross_distance: f64,
    pub gamma: f64,
    pub num_taps: usize,
    pub num_subchannels: usize,
    /// Total per-user targets in bits, cycled over the users.
    pub target_bits: Vec<f64>,
    pub noise: f64,
}

impl Default for LinkArrayConfig {
    fn default() -> Self {
        Self {
            num_links: 10,
            direct_distance: 1.0,
            cross_distance: 3.0,
            gamma: 2.5,
            num_taps: 1,
            num_subchannels: 16,
            target_bits: vec![0.1],
            noise: 1.0,
        }
    }
}

pub fn link_array_scenario(cfg: &LinkArrayConfig, seed: u64) -> Result<Scenario> {
    let geom = NetworkGeometry::uniform(
        cfg.num_links,
        cfg.direct_distance,
        cfg.cross_distance,
        cfg.gamma,
    )?;
    if cfg.target_bits.is_empty() {
        return Err(Error::InvalidParameter("no rate targets".into()));
    }
    let targets = (0..cfg.num_links)
        .map(|q| cfg.target_bits[q % cfg.target_bits.len()] * LN_2)
        .collect();
    scenario_from_geometry(
        &geom,
        cfg.num_taps,
        cfg.num_subchannels,
        seed,
        cfg.noise,
        targets,
    )
}

/// Draws `link_array_scenario(cfg, derive_seed(master, [i]))` for
/// `i = 0, 1, ..` and keeps the first `count` that pass the uniqueness
/// certificate, with their seeds. Fails if `max_draws` is not enough.
pub fn certified_link_arrays(
    cfg: &LinkArrayConfig,
    master: u64,
    count: usize,
    max_draws: usize,
) -> Result<Vec<(u64, Scenario)>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..max_draws as u64 {
        if out.len() == count {
            break;
        }
        let seed = derive_seed(master, &[i]);
        let s = link_array_scenario(cfg, seed)?;
        if check_uniqueness(&s) {
            out.push((seed, s));
        }
    }
    if out.len() < count {
        return Err(Error::InvalidParameter(alloc::format!(
            "only {} of {count} certified scenarios in {max_draws} draws",
            out.len()
        )));
    }
    Ok(out)
}
