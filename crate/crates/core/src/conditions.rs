//! Existence and uniqueness certificates for the equilibrium.
//!
//! All certificates reduce to asking whether some Z-matrix built from the
//! channel gains and `e^{R*} - 1` is a P-matrix. For Z-matrices that is the
//! nonsingular M-matrix property, decided by the signs of the leading
//! principal minors in `O(Q^3)`; the exhaustive `2^Q` minor enumeration is
//! kept for cross-checking.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::linalg::Matrix;
use crate::model::{PowerAllocation, Scenario};
use crate::spectral::{spectral_radius_nonnegative, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Pivots below this fraction of their row's magnitude count as singular.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Default size limit for [`is_p_matrix_exhaustive`].
pub const EXHAUSTIVE_MAX_DIM: usize = 8;

/// Outcome of an existence test together with the power bound it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceCertificate {
    pub holds: bool,
    /// Componentwise upper bound on every equilibrium; present iff `holds`.
    pub bound: Option<PowerAllocation>,
}

/// Per-subchannel existence matrix: diagonal `|H_qq(k)|^2`, off-diagonal
/// `-(e^{R*_q} - 1) |H_qr(k)|^2`.
pub fn build_zk(s: &Scenario, k: usize) -> Result<Matrix> {
    check_index("subchannel", k, s.num_subchannels())?;
    Ok(Matrix::from_fn(s.num_users(), |q, r| {
        if q == r {
            s.gain(q, q, k)
        } else {
            -s.snr_gap(q) * s.gain(q, r, k)
        }
    }))
}

/// Worst-case normalized cross gains `beta_max[q][r] = max_k |H_qr|^2 / |H_rr|^2`.
pub fn beta_max(s: &Scenario) -> Matrix {
    Matrix::from_fn(s.num_users(), |q, r| {
        if q == r {
            0.0
        } else {
            (0..s.num_subchannels())
                .map(|k| s.gain(q, r, k) / s.gain(r, r, k))
                .fold(0.0, f64::max)
        }
    })
}

/// Single matrix that dominates every per-subchannel matrix after column
/// scaling. Returns `(Z^max, beta_max)`.
pub fn build_zmax(s: &Scenario) -> (Matrix, Matrix) {
    let beta = beta_max(s);
    let z = Matrix::from_fn(s.num_users(), |q, r| {
        if q == r {
            1.0
        } else {
            -s.snr_gap(q) * beta.get(q, r)
        }
    });
    (z, beta)
}

pub fn is_z_matrix(m: &Matrix) -> bool {
    let n = m.dim();
    (0..n).all(|i| (0..n).all(|j| i == j || m.get(i, j) <= 0.0))
}

/// P-matrix test for a Z-matrix through its leading principal minors.
///
/// Gaussian elimination without pivoting exposes `minor_k / minor_{k-1}` as the
/// `k`-th pivot. On a Z-matrix with positive pivots the Schur complements stay
/// Z-matrices, so there is no cancellation to worry about.
pub fn is_p_matrix_z(m: &Matrix) -> Result<bool> {
    if !is_z_matrix(m) {
        return Err(Error::NotZMatrix);
    }
    let n = m.dim();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            m.row(i)
                .iter()
                .fold(0.0, |a, v| f64::max(a, libm::fabs(*v)))
        })
        .collect();
    let mut a = m.clone();
    for k in 0..n {
        let pivot = a.get(k, k);
        if !(pivot > PIVOT_RTOL * scale[k]) {
            return Ok(false);
        }
        for i in k + 1..n {
            let f = a.get(i, k) / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a.set(i, j, a.get(i, j) - f * a.get(k, j));
            }
        }
    }
    Ok(true)
}

/// P-matrix test by definition: every nonempty principal minor is positive.
pub fn is_p_matrix_exhaustive(m: &Matrix, max_dim: usize) -> Result<bool> {
    let n = m.dim();
    if n > max_dim {
        return Err(Error::DimensionTooLarge {
            dim: n,
            max: max_dim,
        });
    }
    let mut idx = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        idx.clear();
        idx.extend((0..n).filter(|i| mask & (1 << i) != 0));
        if !(m.principal_submatrix(&idx).determinant() > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Existence certificate from the per-subchannel matrices.
///
/// When every `Z_k` is a P-matrix an equilibrium exists and each one is
/// bounded by `pbar(k) = Z_k^{-1} (sigma_q^2(k) (e^{R*_q} - 1))_q`.
pub fn check_existence(s: &Scenario) -> ExistenceCertificate {
    let (q_n, n) = (s.num_users(), s.num_subchannels());
    let mut bound = vec![0.0; q_n * n];
    for k in 0..n {
        let zk = build_zk(s, k).expect("subchannel index in range");
        if !matches!(is_p_matrix_z(&zk), Ok(true)) {
            return ExistenceCertificate {
                holds: false,
                bound: None,
            };
        }
        let rhs: Vec<f64> = (0..q_n).map(|q| s.noise(q, k) * s.snr_gap(q)).collect();
        let Some(col) = zk.solve(&rhs) else {
            return ExistenceCertificate {
                holds: false,
                bound: None,
            };
        };
        for (q, v) in col.into_iter().enumerate() {
            // rounding can leave a -0.0 behind; the exact inverse is nonnegative
            bound[q * n + k] = f64::max(v, 0.0);
        }
    }
    ExistenceCertificate {
        holds: true,
        bound: Some(PowerAllocation::from_flat(q_n, n, bound).expect("finite bound")),
    }
}

/// Existence certificate from the single worst-case matrix `Z^max`.
pub fn check_existence_zmax(s: &Scenario) -> ExistenceCertificate {
    let (zmax, _) = build_zmax(s);
    let fail = ExistenceCertificate {
        holds: false,
        bound: None,
    };
    if !matches!(is_p_matrix_z(&zmax), Ok(true)) {
        return fail;
    }
    let gaps: Vec<f64> = (0..s.num_users()).map(|q| s.snr_gap(q)).collect();
    let Some(d) = zmax.solve(&gaps) else {
        return fail;
    };
    let (q_n, n) = (s.num_users(), s.num_subchannels());
    let mut bound = Vec::with_capacity(q_n * n);
    for q in 0..q_n {
        for k in 0..n {
            let max_noise = (0..q_n).map(|r| s.noise(r, k)).fold(0.0, f64::max);
            bound.push(f64::max(max_noise / s.gain(q, q, k) * d[q], 0.0));
        }
    }
    ExistenceCertificate {
        holds: true,
        bound: Some(PowerAllocation::from_flat(q_n, n, bound).expect("finite bound")),
    }
}

/// Row diagonal dominance of every `Z_k`:
/// `sum_{r != q} |H_qr(k)|^2 / |H_qq(k)|^2 < 1 / (e^{R*_q} - 1)`.
pub fn check_existence_dd(s: &Scenario) -> bool {
    let q_n = s.num_users();
    (0..q_n).all(|q| {
        let limit = 1.0 / s.snr_gap(q);
        (0..s.num_subchannels()).all(|k| {
            let cross: f64 = (0..q_n).filter(|&r| r != q).map(|r| s.gain(q, r, k)).sum();
            cross / s.gain(q, q, k) < limit
        })
    })
}

/// Worst-case interference of user `r` at the power bound,
/// `sigma_r^2(k) + sum_{r' != r} |H_rr'(k)|^2 pbar_r'(k)`.
fn tau_bar(s: &Scenario, pbar: &PowerAllocation, r: usize, k: usize) -> f64 {
    s.noise(r, k)
        + (0..s.num_users())
            .filter(|&rp| rp != r)
            .map(|rp| s.gain(r, rp, k) * pbar.get(rp, k))
            .sum::<f64>()
}

/// `beta_hat[q][r] = max_k |H_qr|^2 / |H_rr|^2 * tau_bar_r(k) / sigma_q^2(k)`,
/// zero on the diagonal.
pub fn beta_hat_max(s: &Scenario, pbar: &PowerAllocation) -> Result<Matrix> {
    s.check_allocation(pbar)?;
    Ok(Matrix::from_fn(s.num_users(), |q, r| {
        if q == r {
            return 0.0;
        }
        (0..s.num_subchannels())
            .map(|k| s.gain(q, r, k) / s.gain(r, r, k) * tau_bar(s, pbar, r, k) / s.noise(q, k))
            .fold(0.0, f64::max)
    }))
}

/// Nonnegative contraction matrix `B`: diagonal `e^{-R*_q}`, off-diagonal
/// `e^{R*_q} beta_hat[q][r]`.
pub fn build_b(s: &Scenario, beta_hat: &Matrix) -> Matrix {
    Matrix::from_fn(s.num_users(), |q, r| {
        if q == r {
            libm::exp(-s.rate_target(q))
        } else {
            libm::exp(s.rate_target(q)) * beta_hat.get(q, r)
        }
    })
}

/// Comparison matrix of `B`: same diagonal, negated off-diagonal.
pub fn build_bbar(s: &Scenario, beta_hat: &Matrix) -> Matrix {
    let b = build_b(s, beta_hat);
    Matrix::from_fn(
        b.dim(),
        |q, r| if q == r { b.get(q, q) } else { -b.get(q, r) },
    )
}

/// `chi = 1 - max_q (e^{R*_q} - 1) sum_{r != q} beta_max[q][r]` and
/// `rho = (e^{R*max} - 1) / (e^{R*min} - 1)`.
pub fn chi_rho(s: &Scenario) -> (f64, f64) {
    let beta = beta_max(s);
    let q_n = s.num_users();
    let worst = (0..q_n)
        .map(|q| s.snr_gap(q) * beta.row(q).iter().sum::<f64>())
        .fold(0.0, f64::max);
    let targets = s.rate_targets();
    let r_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 - worst, libm::expm1(r_max) / libm::expm1(r_min))
}

/// Scalar `gamma` of the equal-noise uniqueness condition:
/// `m / (rho + m)` with `m = max_q (e^{-R*_q} - e^{-2 R*_q})`.
pub fn gamma(s: &Scenario) -> f64 {
    let m = s
        .rate_targets()
        .iter()
        .map(|&r| libm::exp(-r) - libm::exp(-2.0 * r))
        .fold(0.0, f64::max);
    let (_, rho) = chi_rho(s);
    m / (rho + m)
}

/// Whether `B_bar`, built from the given existence bound, is a P-matrix.
pub fn bbar_is_p_matrix(s: &Scenario, pbar: &PowerAllocation) -> bool {
    beta_hat_max(s, pbar)
        .map(|bh| matches!(is_p_matrix_z(&build_bbar(s, &bh)), Ok(true)))
        .unwrap_or(false)
}

/// Uniqueness certificate: existence holds and `B_bar` is a P-matrix.
pub fn check_uniqueness(s: &Scenario) -> bool {
    match check_existence(s).bound {
        Some(pbar) => bbar_is_p_matrix(s, &pbar),
        None => false,
    }
}

/// Closed-form uniqueness test in terms of `beta_max`, `chi`, `rho` and noise
/// ratios. Needs `0 < chi <= 1` (`chi = 1` only without interference).
pub fn check_uniqueness_cor3(s: &Scenario) -> bool {
    let (chi, rho) = chi_rho(s);
    if !(chi > 0.0 && chi <= 1.0) {
        return false;
    }
    let beta = beta_max(s);
    let (q_n, n) = (s.num_users(), s.num_subchannels());
    let noise_ratio = |r: usize, q: usize| {
        (0..n)
            .map(|k| s.noise(r, k) / s.noise(q, k))
            .fold(0.0, f64::max)
    };
    (0..q_n).all(|q| {
        let worst_ratio = (0..q_n).map(|rp| noise_ratio(rp, q)).fold(0.0, f64::max);
        let lhs: f64 = (0..q_n)
            .filter(|&r| r != q)
            .map(|r| beta.get(q, r) * (noise_ratio(r, q) + worst_ratio * (rho / chi - 1.0)))
            .sum();
        lhs < libm::exp(-2.0 * s.rate_target(q))
    })
}

/// Jacobi and Gauss-Seidel iteration matrices of `B`.
///
/// Jacobi: `Diag(B)^{-1} offDiag(B)`. Gauss-Seidel:
/// `(Diag(B) - Low(B))^{-1} Up(B)` with `Low`/`Up` the strict triangles.
pub fn iteration_matrices(b: &Matrix) -> (Matrix, Matrix) {
    let n = b.dim();
    let jacobi = Matrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            b.get(i, j) / b.get(i, i)
        }
    });
    // forward substitution, one column of Up(B) at a time
    let mut seq = Matrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            let up = if j > i { b.get(i, j) } else { 0.0 };
            let low: f64 = (0..i).map(|l| b.get(i, l) * seq.get(l, j)).sum();
            seq.set(i, j, (up + low) / b.get(i, i));
        }
    }
    (jacobi, seq)
}

/// Spectral radii `(rho_sim, rho_seq)` of the simultaneous and sequential
/// error-iteration matrices. Either below one guarantees linear convergence of
/// the corresponding algorithm.
pub fn contraction_factors(s: &Scenario) -> Result<(f64, f64)> {
    let pbar = check_existence(s)
        .bound
        .ok_or(Error::ExistenceCertificateMissing)?;
    let bh = beta_hat_max(s, &pbar)?;
    Ok(contraction_from_beta_hat(s, &bh))
}

fn contraction_from_beta_hat(s: &Scenario, beta_hat: &Matrix) -> (f64, f64) {
    let (jacobi, seq) = iteration_matrices(&build_b(s, beta_hat));
    (
        spectral_radius_nonnegative(&jacobi, DEFAULT_TOL, DEFAULT_MAX_ITER),
        spectral_radius_nonnegative(&seq, DEFAULT_TOL, DEFAULT_MAX_ITER),
    )
}

/// Everything the certificates say about one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub zk_all_p: bool,
    pub zmax_p: bool,
    pub dd_existence: bool,
    pub pbar: Option<Vec<Vec<f64>>>,
    pub pbar_zmax: Option<Vec<Vec<f64>>>,
    pub bbar_p: bool,
    pub chi: f64,
    pub rho: f64,
    pub gamma: f64,
    pub cor3_uniqueness: bool,
    pub contraction_simultaneous: Option<f64>,
    pub contraction_sequential: Option<f64>,
}

pub fn diagnose(s: &Scenario) -> DiagnosticsReport {
    let existence = check_existence(s);
    let zmax = check_existence_zmax(s);
    let (chi, rho) = chi_rho(s);
    let (bbar_p, contraction) = match &existence.bound {
        Some(pbar) => {
            let bh = beta_hat_max(s, pbar).expect("bound has scenario shape");
            let p = matches!(is_p_matrix_z(&build_bbar(s, &bh)), Ok(true));
            (p, Some(contraction_from_beta_hat(s, &bh)))
        }
        None => (false, None),
    };
    DiagnosticsReport {
        zk_all_p: existence.holds,
        zmax_p: zmax.holds,
        dd_existence: check_existence_dd(s),
        pbar: existence.bound.as_ref().map(PowerAllocation::to_rows),
        pbar_zmax: zmax.bound.as_ref().map(PowerAllocation::to_rows),
        bbar_p,
        chi,
        rho,
        gamma: gamma(s),
        cor3_uniqueness: check_uniqueness_cor3(s),
        contraction_simultaneous: contraction.map(|c| c.0),
        contraction_sequential: contraction.map(|c| c.1),
    }
}
