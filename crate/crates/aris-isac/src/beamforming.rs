//! Per-slot transmit/receive beamforming.
//!
//! The inner solver is a deterministic heuristic: RIS phases are first
//! aligned to maximize the AP-RIS-target path gain, communication
//! beamformers are zero-forcing over the effective user channels with
//! per-user power chosen so each SINR meets the threshold exactly, and the
//! residual power budget goes to a rank-1 sensing covariance pointed along
//! the target path. When the zero-forcing power demand exceeds the budget a
//! bounded coordinate-wise phase repair runs; if the demand still cannot be
//! met the beamformers are scaled to the budget and the solution is flagged
//! infeasible.
//!
//! The receive side is the closed-form null-space projection beamformer:
//! the target path is projected orthogonal to every self-interference and
//! clutter-echo direction before conjugate matching.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::channel::ChannelSet;
use crate::{Error, Result};

/// Number of single-element phase repair updates attempted when the
/// zero-forcing power demand exceeds the budget.
const PHASE_REPAIR_UPDATES: usize = 20;
/// Candidate phases per element during repair.
const PHASE_GRID: usize = 16;
/// Relative singular-value cutoff for the projector pseudoinverse.
const PINV_CUTOFF: f64 = 1e-12;

/// Noise powers and constraints of the link, all linear.
#[derive(Clone, Copy, Debug)]
pub struct LinkBudget {
    /// Receiver noise power at each user.
    pub noise_user: f64,
    /// Receiver noise power at the AP.
    pub noise_ap: f64,
    /// Per-user SINR threshold (linear ratio).
    pub sinr_threshold: f64,
    /// Total AP transmit power budget.
    pub total_power: f64,
}

/// Transmit/receive design for one slot.
#[derive(Clone, Debug)]
pub struct BeamformingSolution {
    /// Communication beamformers, one M-vector per user.
    pub w: Vec<DVector<Complex64>>,
    /// Sensing covariance, M x M Hermitian PSD.
    pub r_s: DMatrix<Complex64>,
    /// Rank-1 sensing beam carrying `tr(r_s)`; `None` when no power is left
    /// for sensing.
    pub sensing_beam: Option<DVector<Complex64>>,
    /// RIS phase coefficients, unit modulus, length N.
    pub phases: DVector<Complex64>,
    /// Receive beamformer, unit norm, length M.
    pub f_rx: DVector<Complex64>,
    /// Achieved downlink SINR per user (linear).
    pub sinr: Vec<f64>,
    /// True when every SINR constraint is met within the power budget.
    pub feasible: bool,
}

impl BeamformingSolution {
    /// Total transmit power `sum ||w_k||^2 + tr(R_s)`.
    pub fn transmit_power(&self) -> f64 {
        let comm: f64 = self.w.iter().map(|w| w.norm_squared()).sum();
        let sense: f64 = (0..self.r_s.nrows()).map(|i| self.r_s[(i, i)].re).sum();
        comm + sense
    }
}

/// Target path seen from the AP receive side: `v = G^T Phi^T a(theta_s)`.
pub fn target_path(channels: &ChannelSet, phases: &DVector<Complex64>) -> DVector<Complex64> {
    path_for(channels, phases, &channels.a_target)
}

/// Clutter path of user `k`: `G^T Phi^T a(theta_k)`.
pub fn clutter_path(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
    k: usize,
) -> DVector<Complex64> {
    path_for(channels, phases, &channels.a_clutter[k])
}

fn path_for(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
    a: &DVector<Complex64>,
) -> DVector<Complex64> {
    let weighted = a.zip_map(phases, |an, pn| an * pn);
    channels.g_ap_ris.transpose() * weighted
}

/// Echo input direction for steering vector `a`: `(a^H Phi G)^T`.
pub fn echo_input(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
    a: &DVector<Complex64>,
) -> DVector<Complex64> {
    let weighted = a.zip_map(phases, |an, pn| an.conj() * pn);
    channels.g_ap_ris.transpose() * weighted
}

/// Effective downlink channel of user `k`: `h_k = G^H Phi^H h^{U,k}`.
pub fn effective_user_channel(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
    k: usize,
) -> DVector<Complex64> {
    let weighted = channels.h_ris_user[k].zip_map(phases, |hn, pn| hn * pn.conj());
    channels.g_ap_ris.adjoint() * weighted
}

/// Downlink SINR of user `k` for a populated solution.
pub fn sinr(
    solution: &BeamformingSolution,
    channels: &ChannelSet,
    budget: &LinkBudget,
    k: usize,
) -> f64 {
    let h = effective_user_channel(channels, &solution.phases, k);
    let signal = h.dotc(&solution.w[k]).norm_sqr();
    let mut interference = 0.0;
    for (i, w) in solution.w.iter().enumerate() {
        if i != k {
            interference += h.dotc(w).norm_sqr();
        }
    }
    let rs_h = &solution.r_s * &h;
    interference += h.dotc(&rs_h).re.max(0.0);
    signal / (interference + budget.noise_user)
}

/// Matched-filter receive beamformer (no projection): `conj(v)/||v||`.
pub fn matched_receive(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let v = target_path(channels, phases);
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::NoEcho);
    }
    Ok(v.map(|e| e.conj()) / Complex64::from(n))
}

/// Align RIS phases to maximize the target path gain `||G^T Phi^T a_s||`.
///
/// Elementwise alignment against the current combined direction, iterated a
/// few times (a power-method heuristic; exact for M = 1).
pub fn target_aligned_phases(channels: &ChannelSet) -> DVector<Complex64> {
    let n = channels.a_target.len();
    // b_n = a_n * (n-th row of G)^T, so v = sum_n phi_n b_n.
    let rows: Vec<DVector<Complex64>> = (0..n)
        .map(|i| channels.g_ap_ris.row(i).transpose() * channels.a_target[i])
        .collect();
    let m = channels.g_ap_ris.ncols();
    let mut r = DVector::from_element(m, Complex64::new(1.0, 0.0));
    let mut phases = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..4 {
        for i in 0..n {
            let proj = r.dotc(&rows[i]);
            phases[i] = if proj.norm() > 0.0 {
                Complex64::from_polar(1.0, -proj.arg())
            } else {
                Complex64::new(1.0, 0.0)
            };
        }
        let v: DVector<Complex64> = rows
            .iter()
            .zip(phases.iter())
            .map(|(b, p)| b * *p)
            .fold(DVector::zeros(m), |acc, x| acc + x);
        let norm = v.norm();
        if norm == 0.0 {
            break;
        }
        r = v / Complex64::from(norm);
    }
    phases
}

/// Intermediate quantities of the closed-form power allocation.
struct PowerSolve {
    /// Zero-forcing directions (unit cross-talk), one per user.
    zf: Vec<DVector<Complex64>>,
    /// `||zf_k||^2`.
    cost: Vec<f64>,
    /// `|h_k^H u|^2` coupling of the sensing beam into user k.
    coupling: Vec<f64>,
    /// Normalized sensing direction `conj(v)/||v||`.
    u: DVector<Complex64>,
    /// Power left for sensing after meeting every SINR constraint exactly;
    /// negative when the budget is insufficient.
    p_rem: f64,
}

/// Zero-forcing directions and the sensing power headroom for fixed phases.
fn power_solve(
    channels: &ChannelSet,
    budget: &LinkBudget,
    phases: &DVector<Complex64>,
) -> Result<PowerSolve> {
    let k_users = channels.num_users();
    let v = target_path(channels, phases);
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Err(Error::NoEcho);
    }
    let u = v.map(|e| e.conj()) / Complex64::from(vnorm);

    if k_users == 0 {
        return Ok(PowerSolve {
            zf: vec![],
            cost: vec![],
            coupling: vec![],
            u,
            p_rem: budget.total_power,
        });
    }

    let h_mat = DMatrix::from_columns(
        &(0..k_users)
            .map(|k| effective_user_channel(channels, phases, k))
            .collect::<Vec<_>>(),
    );
    // W = H (H^H H)^-1 gives h_i^H w_k = delta_ik.
    let gram = h_mat.adjoint() * &h_mat;
    let gram_inv = gram
        .svd(true, true)
        .pseudo_inverse(1e-30)
        .map_err(|e| Error::Runtime(e.to_string()))?;
    let w_all = &h_mat * gram_inv;
    let zf: Vec<DVector<Complex64>> = (0..k_users).map(|k| w_all.column(k).into()).collect();
    let cost: Vec<f64> = zf.iter().map(|w| w.norm_squared()).collect();
    let coupling: Vec<f64> = (0..k_users)
        .map(|k| h_mat.column(k).dotc(&u).norm_sqr())
        .collect();

    // p_k = Gamma (sigma^2 + p_rem * coupling_k); total power = sum p_k c_k
    // + p_rem, which is linear in p_rem.
    let gamma = budget.sinr_threshold;
    let noise_tax: f64 = cost.iter().map(|c| gamma * budget.noise_user * c).sum();
    let coupling_tax: f64 = cost
        .iter()
        .zip(&coupling)
        .map(|(c, b)| gamma * b * c)
        .sum();
    let p_rem = (budget.total_power - noise_tax) / (1.0 + coupling_tax);
    Ok(PowerSolve {
        zf,
        cost,
        coupling,
        u,
        p_rem,
    })
}

/// Assemble a full solution from a power solve.
fn assemble(
    channels: &ChannelSet,
    budget: &LinkBudget,
    phases: DVector<Complex64>,
    ps: PowerSolve,
) -> Result<BeamformingSolution> {
    let m = channels.g_ap_ris.ncols();
    let gamma = budget.sinr_threshold;
    let feasible = ps.p_rem >= 0.0;

    let (w, r_s, sensing_beam) = if feasible {
        let w: Vec<DVector<Complex64>> = ps
            .zf
            .iter()
            .zip(&ps.coupling)
            .map(|(dir, b)| {
                let p_k = gamma * (budget.noise_user + ps.p_rem * b);
                dir * Complex64::from(p_k.sqrt())
            })
            .collect();
        if ps.p_rem > 0.0 {
            let ws = &ps.u * Complex64::from(ps.p_rem.sqrt());
            let r_s = &ws * ws.adjoint();
            (w, r_s, Some(ws))
        } else {
            (w, DMatrix::zeros(m, m), None)
        }
    } else {
        // Insufficient budget: drop sensing, scale every beamformer by the
        // common factor that lands exactly on the budget.
        let need: f64 = ps
            .cost
            .iter()
            .map(|c| gamma * budget.noise_user * c)
            .sum();
        let scale = (budget.total_power / need).sqrt();
        let w: Vec<DVector<Complex64>> = ps
            .zf
            .iter()
            .map(|dir| dir * Complex64::from((gamma * budget.noise_user).sqrt() * scale))
            .collect();
        (w, DMatrix::zeros(m, m), None)
    };

    let f_rx = matched_receive(channels, &phases)?;
    let mut solution = BeamformingSolution {
        w,
        r_s,
        sensing_beam,
        phases,
        f_rx,
        sinr: vec![],
        feasible,
    };
    solution.sinr = (0..channels.num_users())
        .map(|k| sinr(&solution, channels, budget, k))
        .collect();
    Ok(solution)
}

/// Solve phases, transmit beamformers, and sensing covariance for one slot.
///
/// The receive beamformer of the returned solution is the unprojected
/// matched filter; callers wanting NSP replace it via
/// [`nsp_receive_beamformer`].
pub fn optimize_phases_and_beamformers(
    channels: &ChannelSet,
    budget: &LinkBudget,
) -> Result<BeamformingSolution> {
    optimize_with_phases(channels, budget, target_aligned_phases(channels), true)
}

/// As [`optimize_phases_and_beamformers`] but with externally fixed phases
/// (the Fixed-RIS benchmark).
pub fn optimize_beamformers_fixed_phases(
    channels: &ChannelSet,
    budget: &LinkBudget,
    phases: DVector<Complex64>,
) -> Result<BeamformingSolution> {
    optimize_with_phases(channels, budget, phases, false)
}

fn optimize_with_phases(
    channels: &ChannelSet,
    budget: &LinkBudget,
    mut phases: DVector<Complex64>,
    allow_repair: bool,
) -> Result<BeamformingSolution> {
    let k_users = channels.num_users();
    let m = channels.g_ap_ris.ncols();
    if k_users > m {
        return Err(Error::ShapeMismatch(format!(
            "zero-forcing needs K <= M, got K={k_users}, M={m}"
        )));
    }
    let mut ps = power_solve(channels, budget, &phases)?;

    if allow_repair && ps.p_rem < 0.0 && k_users > 0 {
        let n = phases.len();
        let mut element = 0usize;
        for _ in 0..PHASE_REPAIR_UPDATES {
            let mut best_phase = phases[element];
            let mut best_headroom = ps.p_rem;
            for g in 0..PHASE_GRID {
                let candidate = Complex64::from_polar(1.0, TAU * g as f64 / PHASE_GRID as f64);
                let old = phases[element];
                phases[element] = candidate;
                if let Ok(trial) = power_solve(channels, budget, &phases) {
                    if trial.p_rem > best_headroom {
                        best_headroom = trial.p_rem;
                        best_phase = candidate;
                    }
                }
                phases[element] = old;
            }
            phases[element] = best_phase;
            ps = power_solve(channels, budget, &phases)?;
            if ps.p_rem >= 0.0 {
                break;
            }
            element = (element + 1) % n;
        }
    }

    assemble(channels, budget, phases, ps)
}

/// Columns spanning the self-interference and clutter-echo subspace.
fn interference_columns(
    channels: &ChannelSet,
    solution: &BeamformingSolution,
) -> Vec<DVector<Complex64>> {
    let mut cols = Vec::new();
    for w in &solution.w {
        if w.norm_squared() > 0.0 {
            cols.push(&channels.g_si * w);
        }
    }
    if let Some(ws) = &solution.sensing_beam {
        if ws.norm_squared() > 0.0 {
            cols.push(&channels.g_si * ws);
        }
    }
    for k in 0..channels.num_users() {
        cols.push(clutter_path(channels, &solution.phases, k));
    }
    cols
}

/// Closed-form NSP receive beamformer: project the target path orthogonal
/// to the interference span, then conjugate-match and normalize.
pub fn nsp_receive_beamformer(
    channels: &ChannelSet,
    solution: &BeamformingSolution,
) -> Result<DVector<Complex64>> {
    let v = target_path(channels, &solution.phases);
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Err(Error::NoEcho);
    }
    let cols = interference_columns(channels, solution);
    if cols.is_empty() {
        return Ok(v.map(|e| e.conj()) / Complex64::from(vnorm));
    }
    let c = DMatrix::from_columns(&cols);
    let svd = c.svd(true, false);
    let u = svd.u.as_ref().expect("SVD with u requested");
    let s_max = svd.singular_values.max();
    let mut projected = v.clone();
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv > PINV_CUTOFF * s_max {
            let basis: DVector<Complex64> = u.column(i).into();
            let coeff = basis.dotc(&projected);
            projected -= basis * coeff;
        }
    }
    let pnorm = projected.norm();
    if pnorm <= 1e-8 * vnorm {
        return Err(Error::NspDegenerate);
    }
    Ok(projected.map(|e| e.conj()) / Complex64::from(pnorm))
}

/// Interference operator `B = clutter echo + SI` applied at the AP receiver.
fn interference_operator(
    channels: &ChannelSet,
    phases: &DVector<Complex64>,
) -> DMatrix<Complex64> {
    let mut b = channels.g_si.clone();
    for k in 0..channels.num_users() {
        let v_k = clutter_path(channels, phases, k);
        let u_k = echo_input(channels, phases, &channels.a_clutter[k]);
        b += (&v_k * u_k.transpose()) * channels.alpha_clutter[k];
    }
    b
}

/// Power of the SI-plus-clutter component after the receive beamformer.
pub fn residual_interference_power(channels: &ChannelSet, solution: &BeamformingSolution) -> f64 {
    let b = interference_operator(channels, &solution.phases);
    // Row vector f^T B.
    let fb = b.transpose() * &solution.f_rx;
    let mut power = 0.0;
    for w in &solution.w {
        power += fb.zip_fold(w, Complex64::ZERO, |acc, a, b| acc + a * b).norm_sqr();
    }
    if let Some(ws) = &solution.sensing_beam {
        power += fb.zip_fold(ws, Complex64::ZERO, |acc, a, b| acc + a * b).norm_sqr();
    }
    power
}

/// Interference power before receive beamforming, `tr(B Cov B^H)`.
pub fn pre_beamforming_interference_power(
    channels: &ChannelSet,
    solution: &BeamformingSolution,
) -> f64 {
    let b = interference_operator(channels, &solution.phases);
    let mut power = 0.0;
    for w in &solution.w {
        power += (&b * w).norm_squared();
    }
    if let Some(ws) = &solution.sensing_beam {
        power += (&b * ws).norm_squared();
    }
    power
}
