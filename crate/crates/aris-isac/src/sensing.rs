//! Radar sensing: echo SNR, range-measurement statistics, Fisher
//! information, and target localization.
//!
//! Each hover point yields one range measurement modeled as Gaussian with
//! mean equal to the true RIS-target distance and a variance inversely
//! proportional to the post-combining echo SNR. Because that variance grows
//! as the fourth power of range, the Fisher information per measurement
//! carries both the usual `1/sigma^2` mean term and an `8/d^2` term from
//! the range-dependent variance. Collecting measurements from several hover
//! points lets a weighted least-squares solver recover the target's ground
//! coordinates, and the Cramer-Rao bound on that estimate follows from the
//! chain rule through the range map.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::beamforming::{self, BeamformingSolution};
use crate::channel::ChannelSet;
use crate::geometry::Position3;
use crate::{Error, Result};

/// Condition-number limit beyond which a coordinate FIM is treated as
/// singular.
const CONDITION_LIMIT: f64 = 1e12;

/// Scalars of the sensing link, all linear.
#[derive(Clone, Copy, Debug)]
pub struct SensingParams {
    /// Proportionality constant between measurement variance and 1/SNR.
    pub variance_scale: f64,
    /// Matched-filter processing gain applied to the echo SNR.
    pub processing_gain: f64,
    /// Receiver noise power at the AP.
    pub noise_ap: f64,
}

/// One range measurement taken from a hover point.
#[derive(Clone, Copy, Debug)]
pub struct Measurement {
    /// ARIS position the echo was collected from.
    pub hover: Position3,
    /// Measured (or true, in analysis) RIS-target distance.
    pub distance: f64,
    /// Variance of the range measurement.
    pub variance: f64,
}

/// Measurements accumulated over an episode.
#[derive(Clone, Debug, Default)]
pub struct MeasurementSet {
    pub measurements: Vec<Measurement>,
}

impl MeasurementSet {
    pub fn push(&mut self, m: Measurement) {
        self.measurements.push(m);
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

/// Coordinate Fisher information and the derived position bound.
#[derive(Clone, Copy, Debug)]
pub struct FisherResult {
    /// 2x2 Fisher information of the ground coordinates.
    pub fim: Matrix2<f64>,
    /// Cramer-Rao bound on the squared position error, `tr(J^-1)`.
    pub crb_xy: f64,
}

/// Target localization estimate.
#[derive(Clone, Copy, Debug)]
pub struct LocalizationResult {
    pub x: f64,
    pub y: f64,
    /// Set when the geometry cannot pin the target down (fewer than three
    /// hover points, or a near-singular coordinate FIM at the solution).
    pub ambiguous: bool,
}

/// Post-combining echo SNR for one slot.
///
/// The useful power is the two-way target return of the full transmit
/// covariance after the receive beamformer; the denominator adds whatever
/// self-interference and clutter power that beamformer lets through to the
/// AP noise floor.
pub fn echo_snr(
    channels: &ChannelSet,
    solution: &BeamformingSolution,
    params: &SensingParams,
) -> Result<f64> {
    let v_s = beamforming::target_path(channels, &solution.phases);
    let u_s = beamforming::echo_input(channels, &solution.phases, &channels.a_target);
    let out_gain = solution
        .f_rx
        .zip_fold(&v_s, Complex64::ZERO, |acc, a, b| acc + a * b)
        .norm_sqr();
    let mut in_power = 0.0;
    for w in &solution.w {
        in_power += u_s
            .zip_fold(w, Complex64::ZERO, |acc, a, b| acc + a * b)
            .norm_sqr();
    }
    if let Some(ws) = &solution.sensing_beam {
        in_power += u_s
            .zip_fold(ws, Complex64::ZERO, |acc, a, b| acc + a * b)
            .norm_sqr();
    }
    let useful = channels.alpha_target.norm_sqr() * out_gain * in_power;
    if useful == 0.0 {
        return Err(Error::NoEcho);
    }
    let residual = beamforming::residual_interference_power(channels, solution);
    Ok(params.processing_gain * useful / (params.noise_ap + residual))
}

/// Range-measurement variance from the echo SNR.
pub fn variance_from_snr(params: &SensingParams, snr: f64) -> Result<f64> {
    if snr <= 0.0 || !snr.is_finite() {
        return Err(Error::NoEcho);
    }
    Ok(params.variance_scale / snr)
}

/// Measurement variance for one slot.
pub fn measurement_variance(
    channels: &ChannelSet,
    solution: &BeamformingSolution,
    params: &SensingParams,
) -> Result<f64> {
    variance_from_snr(params, echo_snr(channels, solution, params)?)
}

/// Draw one Gaussian range measurement around the true distance.
pub fn sample_measurement<R: Rng + ?Sized>(
    true_distance: f64,
    variance: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::Runtime(format!(
            "measurement variance must be finite and non-negative, got {variance}"
        )));
    }
    let normal = Normal::new(true_distance, variance.sqrt())
        .map_err(|e| Error::Runtime(e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Per-measurement Fisher information about its own range.
///
/// For a Gaussian range measurement whose variance scales as the fourth
/// power of range, the information is `1/sigma_l^2 + 8/d_l^2`.
pub fn fim_distances(set: &MeasurementSet) -> DVector<f64> {
    DVector::from_iterator(
        set.len(),
        set.measurements
            .iter()
            .map(|m| 1.0 / m.variance + 8.0 / (m.distance * m.distance)),
    )
}

/// Range map and its Jacobian for a ground-coordinate guess.
fn range_jacobian(set: &MeasurementSet, x: f64, y: f64) -> (DVector<f64>, DMatrix<f64>) {
    let l = set.len();
    let mut ranges = DVector::zeros(l);
    let mut jac = DMatrix::zeros(2, l);
    for (i, m) in set.measurements.iter().enumerate() {
        let dx = x - m.hover.x;
        let dy = y - m.hover.y;
        let d = (dx * dx + dy * dy + m.hover.z * m.hover.z).sqrt();
        ranges[i] = d;
        jac[(0, i)] = dx / d;
        jac[(1, i)] = dy / d;
    }
    (ranges, jac)
}

/// Fisher information of the target's ground coordinates at a guess.
pub fn coordinate_fim(set: &MeasurementSet, x: f64, y: f64) -> Result<FisherResult> {
    if set.is_empty() {
        return Err(Error::SingularGeometry);
    }
    let j_d = fim_distances(set);
    let (_, q) = range_jacobian(set, x, y);
    let mut fim = Matrix2::zeros();
    for i in 0..set.len() {
        let col = Vector2::new(q[(0, i)], q[(1, i)]);
        fim += col * col.transpose() * j_d[i];
    }
    if !fim.iter().all(|e| e.is_finite()) {
        return Err(Error::SingularGeometry);
    }
    let eig = fim.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || hi / lo > CONDITION_LIMIT {
        return Err(Error::SingularGeometry);
    }
    let inv = fim.try_inverse().ok_or(Error::SingularGeometry)?;
    Ok(FisherResult {
        fim,
        crb_xy: inv[(0, 0)] + inv[(1, 1)],
    })
}

/// Weighted least-squares cost of a guess.
fn wls_cost(set: &MeasurementSet, x: f64, y: f64) -> f64 {
    let (ranges, _) = range_jacobian(set, x, y);
    set.measurements
        .iter()
        .zip(ranges.iter())
        .map(|(m, &r)| {
            let e = r - m.distance;
            e * e / m.variance
        })
        .sum()
}

/// Maximum-likelihood target localization from range measurements.
///
/// A coarse grid over the map picks the basin, then Gauss-Newton refines to
/// sub-millimeter tolerance.
pub fn mle_localize(set: &MeasurementSet, half_width: f64) -> Result<LocalizationResult> {
    if set.is_empty() {
        return Err(Error::SingularGeometry);
    }
    const GRID: usize = 41;
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..GRID {
        for j in 0..GRID {
            let x = -half_width + 2.0 * half_width * i as f64 / (GRID - 1) as f64;
            let y = -half_width + 2.0 * half_width * j as f64 / (GRID - 1) as f64;
            let c = wls_cost(set, x, y);
            if c < best.2 {
                best = (x, y, c);
            }
        }
    }
    let (mut x, mut y, _) = best;
    for _ in 0..50 {
        let (ranges, q) = range_jacobian(set, x, y);
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (i, m) in set.measurements.iter().enumerate() {
            let col = Vector2::new(q[(0, i)], q[(1, i)]);
            let w = 1.0 / m.variance;
            jtj += col * col.transpose() * w;
            jtr += col * ((ranges[i] - m.distance) * w);
        }
        let Some(inv) = jtj.try_inverse() else { break };
        let step = inv * jtr;
        x -= step[0];
        y -= step[1];
        if step.norm() < 1e-9 {
            break;
        }
    }
    let ambiguous = set.len() < 3 || coordinate_fim(set, x, y).is_err();
    Ok(LocalizationResult { x, y, ambiguous })
}
