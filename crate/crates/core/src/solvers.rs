//! Iterative waterfilling, the single-subchannel closed form, and checks that a
//! power allocation is an equilibrium.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::conditions::{build_zk, is_p_matrix_z};
use crate::error::{Error, Result};
use crate::model::{normalized_noise, rate, rates, total_power, PowerAllocation, Scenario};
use crate::waterfill::waterfill_op;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Cap on the number of sweeps.
    pub max_iterations: usize,
    /// Stop once a sweep moves no power by more than this (sup-norm).
    pub residual_tol: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            residual_tol: 1e-10,
            record_trace: true,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "residual_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// State after one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Sweep index, starting at 1.
    pub iteration: usize,
    pub powers: PowerAllocation,
    /// Per-user rates in nats.
    pub rates: Vec<f64>,
    /// `||p(n+1) - p(n)||_inf`, the move the following sweep makes.
    pub residual: f64,
    pub total_power: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub powers: PowerAllocation,
    pub trace: IterationTrace,
    pub converged: bool,
    /// Sweeps performed before the iterate stopped moving.
    pub iterations: usize,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Gauss-Seidel: users update in index order, each seeing the newest powers.
    Sequential,
    /// Jacobi: all users respond to the previous sweep, then commit together.
    Simultaneous,
}

fn sweep(s: &Scenario, p: &PowerAllocation, schedule: Schedule) -> Result<PowerAllocation> {
    let mut next = p.clone();
    for q in 0..s.num_users() {
        let source = match schedule {
            Schedule::Sequential => &next,
            Schedule::Simultaneous => p,
        };
        let row = waterfill_op(s, source, q)?;
        next.set_row(q, &row);
    }
    Ok(next)
}

fn snapshot(
    s: &Scenario,
    iteration: usize,
    p: &PowerAllocation,
    residual: f64,
) -> Result<Snapshot> {
    Ok(Snapshot {
        iteration,
        powers: p.clone(),
        rates: rates(s, p)?,
        residual,
        total_power: (0..s.num_users())
            .map(|q| total_power(p, q).map(|t| t.sum))
            .collect::<Result<_>>()?,
    })
}

/// Runs iterative waterfilling with the given update schedule.
///
/// Each sweep's successor is computed before the sweep is recorded, so the
/// residual stored with sweep `n` is `||p(n+1) - p(n)||_inf` and the returned
/// powers are the first iterate whose successor moved less than the tolerance.
/// A run whose powers overflow stops early with `converged = false`.
pub fn iwfa(
    s: &Scenario,
    p0: &PowerAllocation,
    opts: &SolverOptions,
    schedule: Schedule,
) -> Result<SolveOutcome> {
    opts.validate()?;
    s.check_allocation(p0)?;
    let mut trace = IterationTrace::default();
    let diverged = |powers: PowerAllocation, trace, iterations| SolveOutcome {
        powers,
        trace,
        converged: false,
        iterations,
        final_residual: f64::INFINITY,
    };
    let Some(mut current) = try_sweep(s, p0, schedule)? else {
        return Ok(diverged(p0.clone(), trace, 0));
    };
    let mut residual = f64::INFINITY;
    for n in 1..=opts.max_iterations {
        let Some(next) = try_sweep(s, &current, schedule)? else {
            return Ok(diverged(current, trace, n));
        };
        residual = next.max_abs_diff(&current);
        if opts.record_trace {
            trace.snapshots.push(snapshot(s, n, &current, residual)?);
        }
        if residual < opts.residual_tol {
            return Ok(SolveOutcome {
                powers: current,
                trace,
                converged: true,
                iterations: n,
                final_residual: residual,
            });
        }
        current = next;
    }
    Ok(SolveOutcome {
        powers: current,
        trace,
        converged: false,
        iterations: opts.max_iterations,
        final_residual: residual,
    })
}

/// `None` once interference or power is no longer finite.
fn try_sweep(
    s: &Scenario,
    p: &PowerAllocation,
    schedule: Schedule,
) -> Result<Option<PowerAllocation>> {
    match sweep(s, p, schedule) {
        Ok(next) if next.as_flat().iter().all(|v| v.is_finite()) => Ok(Some(next)),
        Ok(_) | Err(Error::InvalidWaterfill(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn sequential_iwfa(
    s: &Scenario,
    p0: &PowerAllocation,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    iwfa(s, p0, opts, Schedule::Sequential)
}

pub fn simultaneous_iwfa(
    s: &Scenario,
    p0: &PowerAllocation,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    iwfa(s, p0, opts, Schedule::Simultaneous)
}

/// Equilibrium of a single-subchannel game.
///
/// With one subchannel every user is active, so the equilibrium solves the
/// linear system `Z p = sigma^2 (e^{R*} - 1)`. It exists (and is then unique)
/// exactly when `Z` is a P-matrix.
pub fn solve_single_subchannel(s: &Scenario) -> Result<PowerAllocation> {
    if s.num_subchannels() != 1 {
        return Err(Error::NotSingleSubchannel(s.num_subchannels()));
    }
    let z = build_zk(s, 0)?;
    if !is_p_matrix_z(&z)? {
        return Err(Error::NotPMatrix);
    }
    let rhs: Vec<f64> = (0..s.num_users())
        .map(|q| s.noise(q, 0) * libm::expm1(s.rate_target(q)))
        .collect();
    let p = z.solve(&rhs).ok_or(Error::NotPMatrix)?;
    PowerAllocation::from_flat(
        s.num_users(),
        1,
        p.into_iter().map(|v| f64::max(v, 0.0)).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GneCheck {
    pub is_gne: bool,
    /// `max_q ||p_q - WF_q(p_{-q})||_inf`.
    pub max_deviation: f64,
}

/// Fixed-point test: `p` is an equilibrium iff every user's row equals its own
/// waterfilling best response.
pub fn verify_gne(s: &Scenario, p: &PowerAllocation, tol: f64) -> Result<GneCheck> {
    s.check_allocation(p)?;
    let mut dev = 0.0f64;
    for q in 0..s.num_users() {
        let wf = waterfill_op(s, p, q)?;
        for (a, b) in p.row(q).iter().zip(&wf) {
            dev = dev.max(libm::fabs(a - b));
        }
    }
    Ok(GneCheck {
        is_gne: dev <= tol,
        max_deviation: dev,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Recovered water level `lambda_q` per user.
    pub multipliers: Vec<f64>,
    /// `max |min(p_q(k), p_q(k) + n_q(k) - lambda_q)|`, in power units.
    pub max_complementarity_violation: f64,
    /// `max_q |rate_q - R*_q|`, in nats.
    pub max_rate_violation: f64,
    pub multipliers_positive: bool,
}

impl KktReport {
    pub fn max_violation(&self) -> f64 {
        self.max_complementarity_violation
            .max(self.max_rate_violation)
    }
}

/// Checks the optimality system of every user's rate-constrained problem.
///
/// Each user's multiplier is recovered as the mean water level `p + n` over
/// the subchannels carrying more than `tol` power (the lowest floor when none
/// do). Then `0 <= p_q(k)` must be complementary to
/// `tau_q(k) + |H_qq(k)|^2 (p_q(k) - lambda_q) >= 0`, measured after dividing by
/// the direct gain, and the rate constraint must be tight.
pub fn verify_kkt(s: &Scenario, p: &PowerAllocation, tol: f64) -> Result<KktReport> {
    s.check_allocation(p)?;
    let mut multipliers = Vec::with_capacity(s.num_users());
    let mut comp = 0.0f64;
    let mut rate_violation = 0.0f64;
    for q in 0..s.num_users() {
        let floor = normalized_noise(s, p, q)?;
        let row = p.row(q);
        let (sum, count) = row
            .iter()
            .zip(&floor)
            .filter(|(pk, _)| **pk > tol)
            .fold((0.0, 0usize), |(acc, c), (pk, nk)| (acc + pk + nk, c + 1));
        let lambda = if count > 0 {
            sum / count as f64
        } else {
            floor.iter().copied().fold(f64::INFINITY, f64::min)
        };
        for (pk, nk) in row.iter().zip(&floor) {
            comp = comp.max(libm::fabs(pk.min(pk + nk - lambda)));
        }
        rate_violation = rate_violation.max(libm::fabs(rate(s, p, q)? - s.rate_target(q)));
        multipliers.push(lambda);
    }
    let multipliers_positive = multipliers.iter().all(|&l| l > 0.0);
    Ok(KktReport {
        multipliers,
        max_complementarity_violation: comp,
        max_rate_violation: rate_violation,
        multipliers_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::LN_2;

    fn sym(cross: f64) -> Scenario {
        Scenario::symmetric(2, 1, 1.0, cross, 1.0, LN_2).unwrap()
    }

    #[test]
    fn sequential_examples() {
        let s = sym(0.1);
        let opts = SolverOptions::default();
        let out = sequential_iwfa(&s, &PowerAllocation::zeros(2, 1), &opts).unwrap();
        assert!(out.converged);
        for q in 0..2 {
            assert!((out.powers.get(q, 0) - 10.0 / 9.0).abs() < 1e-9);
        }
        let from5 =
            sequential_iwfa(&s, &PowerAllocation::filled(2, 1, 5.0).unwrap(), &opts).unwrap();
        assert!(from5.powers.max_abs_diff(&out.powers) < 1e-9);
    }

    #[test]
    fn single_user_one_sweep() {
        let s = Scenario::new(1, 3, vec![1.0, 0.5, 2.0], vec![1.0, 2.0, 0.3], vec![2.0]).unwrap();
        let p0 = PowerAllocation::zeros(1, 3);
        let opts = SolverOptions::default();
        let wf = waterfill_op(&s, &p0, 0).unwrap();
        for out in [
            sequential_iwfa(&s, &p0, &opts).unwrap(),
            simultaneous_iwfa(&s, &p0, &opts).unwrap(),
        ] {
            assert!(out.converged);
            assert_eq!(out.iterations, 1);
            assert_eq!(out.trace.snapshots.len(), 1);
            assert_eq!(out.powers.row(0), wf.as_slice());
        }
    }

    #[test]
    fn simultaneous_examples() {
        let s = sym(0.1);
        let opts = SolverOptions::default();
        let sim = simultaneous_iwfa(&s, &PowerAllocation::zeros(2, 1), &opts).unwrap();
        let seq = sequential_iwfa(&s, &PowerAllocation::zeros(2, 1), &opts).unwrap();
        assert!(sim.converged);
        assert!((sim.powers.get(0, 0) - 10.0 / 9.0).abs() < 1e-9);
        assert!(sim.powers.max_abs_diff(&seq.powers) < 1e-8);
    }

    #[test]
    fn nonconvergent_run_reports_false() {
        let s = sym(2.0);
        let opts = SolverOptions {
            max_iterations: 50,
            ..Default::default()
        };
        let out = simultaneous_iwfa(&s, &PowerAllocation::zeros(2, 1), &opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 50);
        assert_eq!(out.trace.snapshots.len(), 50);
    }

    #[test]
    fn trace_can_be_disabled() {
        let opts = SolverOptions {
            record_trace: false,
            ..Default::default()
        };
        let out = sequential_iwfa(&sym(0.1), &PowerAllocation::zeros(2, 1), &opts).unwrap();
        assert!(out.converged && out.trace.snapshots.is_empty());
    }

    #[test]
    fn bad_options() {
        let s = sym(0.1);
        let p0 = PowerAllocation::zeros(2, 1);
        let zero_iters = SolverOptions {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(sequential_iwfa(&s, &p0, &zero_iters).is_err());
        let zero_tol = SolverOptions {
            residual_tol: 0.0,
            ..Default::default()
        };
        assert!(sequential_iwfa(&s, &p0, &zero_tol).is_err());
        assert!(
            sequential_iwfa(&s, &PowerAllocation::zeros(3, 1), &SolverOptions::default()).is_err()
        );
    }

    #[test]
    fn closed_form_examples() {
        let p = solve_single_subchannel(&sym(0.5)).unwrap();
        assert!((p.get(0, 0) - 2.0).abs() < 1e-14 && (p.get(1, 0) - 2.0).abs() < 1e-14);
        let s1 = Scenario::new(1, 1, vec![1.0], vec![1.0], vec![3f64.ln()]).unwrap();
        assert!((solve_single_subchannel(&s1).unwrap().get(0, 0) - 2.0).abs() < 1e-14);
        assert_eq!(solve_single_subchannel(&sym(2.0)), Err(Error::NotPMatrix));
        let s2 = Scenario::symmetric(2, 2, 1.0, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(
            solve_single_subchannel(&s2),
            Err(Error::NotSingleSubchannel(2))
        );
    }

    #[test]
    fn verify_gne_examples() {
        let s = sym(0.1);
        let gne = PowerAllocation::filled(2, 1, 10.0 / 9.0).unwrap();
        assert!(verify_gne(&s, &gne, 1e-8).unwrap().is_gne);
        let doubled = PowerAllocation::filled(2, 1, 20.0 / 9.0).unwrap();
        let c = verify_gne(&s, &doubled, 1e-8).unwrap();
        // best response to 20/9 is 1 + 0.1 * 20/9 = 11/9
        assert!(!c.is_gne);
        assert!((c.max_deviation - 1.0).abs() < 1e-12);
        assert!(
            !verify_gne(&s, &PowerAllocation::zeros(2, 1), 1e-8)
                .unwrap()
                .is_gne
        );
    }

    #[test]
    fn verify_kkt_examples() {
        let s = sym(0.1);
        let gne = PowerAllocation::filled(2, 1, 10.0 / 9.0).unwrap();
        let r = verify_kkt(&s, &gne, 1e-8).unwrap();
        assert!(r.max_violation() < 1e-8);
        // lambda = p + n = 10/9 + 1 + 0.1 * 10/9
        assert!((r.multipliers[0] - (10.0 / 9.0 + 1.0 + 1.0 / 9.0)).abs() < 1e-12);

        let r = verify_kkt(&s, &PowerAllocation::zeros(2, 1), 1e-8).unwrap();
        assert!((r.max_rate_violation - LN_2).abs() < 1e-15);

        let s1 = Scenario::new(1, 2, vec![1.0, 1.0], vec![1.0, 2.0], vec![8f64.ln()]).unwrap();
        let p = PowerAllocation::from_rows(&[vec![3.0, 2.0]]).unwrap();
        let r = verify_kkt(&s1, &p, 1e-10).unwrap();
        assert!((r.multipliers[0] - 4.0).abs() < 1e-14);
        assert!(r.max_violation() < 1e-14 && r.multipliers_positive);
    }

    #[test]
    fn kkt_flags_inactive_channel_below_level() {
        // floor (1, 2), all power on channel 0 at level 4 leaves channel 1 under water
        let s1 = Scenario::new(1, 2, vec![1.0, 1.0], vec![1.0, 2.0], vec![4f64.ln()]).unwrap();
        let p = PowerAllocation::from_rows(&[vec![3.0, 0.0]]).unwrap();
        let r = verify_kkt(&s1, &p, 1e-10).unwrap();
        assert!((r.max_complementarity_violation - 2.0).abs() < 1e-14);
    }
}
