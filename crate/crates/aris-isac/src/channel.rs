//! Per-slot channel realizations.
//!
//! All links are quasi-static within a slot. Power gains follow the
//! inverse-square law with reference gain `beta0` at 1 m; matrix and vector
//! entries carry the corresponding field amplitude `sqrt(beta0)/d`. The
//! AP-RIS link is a flat-fading realization (i.i.d. uniform entry phases,
//! redrawn each slot from the caller's seeded RNG), the RIS-user links carry
//! the deterministic array phase of the user's direction, and the
//! ARIS-target/clutter reflections are steering-vector outer products scaled
//! by the two-way gain `sqrt(beta_s)/d^2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use crate::geometry::{distance, doa_sine, Position3};
use crate::{Error, Result};

/// Physical channel parameters, all gains linear.
#[derive(Clone, Debug)]
pub struct ChannelParams {
    /// Reference channel power gain at 1 m (linear).
    pub beta0: f64,
    /// Two-way reference power gain including RCS at 1 m (linear).
    pub beta_s: f64,
    /// Residual self-interference channel power (linear), uniform over
    /// antenna pairs.
    pub si_power: f64,
    /// RIS element spacing over wavelength.
    pub element_spacing_over_wavelength: f64,
    /// AP antennas M.
    pub num_ap_antennas: usize,
    /// RIS elements N.
    pub num_ris_elements: usize,
    /// AP antenna spacing over wavelength (half wavelength by default).
    pub ap_antenna_spacing_over_wavelength: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.beta0 <= 0.0 || self.beta_s <= 0.0 || self.si_power <= 0.0 {
            return Err(Error::Config("channel gains must be positive".into()));
        }
        if self.num_ap_antennas < 1 || self.num_ris_elements < 1 {
            return Err(Error::Config("M and N must be at least 1".into()));
        }
        Ok(())
    }
}

/// All channels realized for one time slot.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    /// AP to RIS matrix, N x M.
    pub g_ap_ris: DMatrix<Complex64>,
    /// RIS to user vectors, each length N.
    pub h_ris_user: Vec<DVector<Complex64>>,
    /// RIS steering vector toward the target.
    pub a_target: DVector<Complex64>,
    /// RIS steering vectors toward each clutter (user) direction.
    pub a_clutter: Vec<DVector<Complex64>>,
    /// Two-way amplitude gain of the target path.
    pub alpha_target: Complex64,
    /// Two-way amplitude gains of the clutter paths.
    pub alpha_clutter: Vec<Complex64>,
    /// Residual self-interference matrix, M x M.
    pub g_si: DMatrix<Complex64>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.h_ris_user.len()
    }
}

fn amplitude(beta0: f64, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "channel undefined at zero distance".into(),
        ));
    }
    Ok(beta0.sqrt() / d)
}

/// AP-RIS channel: entry power gain `beta0 / d^2`, i.i.d. fading phases.
pub fn ap_ris_channel<R: Rng>(
    params: &ChannelParams,
    p_ap: Position3,
    p_aris: Position3,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    let amp = amplitude(params.beta0, distance(p_ap, p_aris))?;
    let (n, m) = (params.num_ris_elements, params.num_ap_antennas);
    Ok(DMatrix::from_fn(n, m, |_, _| {
        Complex64::from_polar(amp, rng.random_range(0.0..TAU))
    }))
}

/// RIS-user channel: entry power gain `beta0 / d^2`, array phase of the
/// user's direction.
pub fn ris_user_channel(
    params: &ChannelParams,
    p_aris: Position3,
    p_user: Position3,
) -> Result<DVector<Complex64>> {
    let amp = amplitude(params.beta0, distance(p_aris, p_user))?;
    let a = steering(params, doa_sine(p_aris, p_user)?);
    Ok(a.map(|e| e * amp))
}

/// RIS steering vector toward `sin_theta`, unit modulus per entry.
pub fn steering(params: &ChannelParams, sin_theta: f64) -> DVector<Complex64> {
    let step = TAU * params.element_spacing_over_wavelength * sin_theta;
    DVector::from_fn(params.num_ris_elements, |n, _| {
        Complex64::from_polar(1.0, step * n as f64)
    })
}

/// Two-way amplitude gain `sqrt(beta_s) / d^2` of a reflection path.
pub fn two_way_gain(params: &ChannelParams, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "two-way gain undefined at zero distance".into(),
        ));
    }
    Ok(params.beta_s.sqrt() / (d * d))
}

/// Target-plus-clutter response matrix
/// `H = alpha_s a(th_s) a^H(th_s) + sum_k alpha_k a(th_k) a^H(th_k)`.
pub fn target_response(channels: &ChannelSet) -> DMatrix<Complex64> {
    let mut h = outer(&channels.a_target) * channels.alpha_target;
    for (a, alpha) in channels.a_clutter.iter().zip(&channels.alpha_clutter) {
        h += outer(a) * *alpha;
    }
    h
}

/// Unit-gain target response `A(th_s) = a a^H` (no two-way gain).
pub fn unit_target_response(channels: &ChannelSet) -> DMatrix<Complex64> {
    outer(&channels.a_target)
}

fn outer(a: &DVector<Complex64>) -> DMatrix<Complex64> {
    a * a.adjoint()
}

/// Residual self-interference channel: constant modulus `sqrt(si_power)`,
/// phase set by the inter-antenna distance.
pub fn si_channel(params: &ChannelParams) -> DMatrix<Complex64> {
    let amp = params.si_power.sqrt();
    let m = params.num_ap_antennas;
    let spacing = params.ap_antenna_spacing_over_wavelength;
    DMatrix::from_fn(m, m, |i, j| {
        let d_over_lambda = (i as f64 - j as f64).abs() * spacing;
        Complex64::from_polar(amp, -TAU * d_over_lambda)
    })
}

/// Realize every channel for one slot.
pub fn realize<R: Rng>(
    params: &ChannelParams,
    p_ap: Position3,
    p_aris: Position3,
    users: &[Position3],
    target: Position3,
    rng: &mut R,
) -> Result<ChannelSet> {
    let g_ap_ris = ap_ris_channel(params, p_ap, p_aris, rng)?;
    let h_ris_user = users
        .iter()
        .map(|u| ris_user_channel(params, p_aris, *u))
        .collect::<Result<Vec<_>>>()?;
    let a_target = steering(params, doa_sine(p_aris, target)?);
    let a_clutter = users
        .iter()
        .map(|u| Ok(steering(params, doa_sine(p_aris, *u)?)))
        .collect::<Result<Vec<_>>>()?;
    let alpha_target = Complex64::new(two_way_gain(params, distance(p_aris, target))?, 0.0);
    let alpha_clutter = users
        .iter()
        .map(|u| Ok(Complex64::new(two_way_gain(params, distance(p_aris, *u))?, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSet {
        g_ap_ris,
        h_ris_user,
        a_target,
        a_clutter,
        alpha_target,
        alpha_clutter,
        g_si: si_channel(params),
    })
}
