//! Range-only target localization from aerial hover points, checked
//! against the Cramer-Rao bound.
//!
//! Collects noisy RIS-target range measurements from hover points spread
//! on an arc (angular diversity is what makes the coordinate Fisher
//! information well conditioned), runs the grid-plus-Gauss-Newton maximum
//! likelihood estimator many times, and compares the empirical mean
//! squared error with the CRB at the true position.

use aris_isac::geometry::{distance, Position3};
use aris_isac::sensing::{coordinate_fim, mle_localize, Measurement, MeasurementSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), aris_isac::Error> {
    let target = Position3::ground(60.0, 40.0);
    let altitude = 50.0;
    let variance = 4.0;
    let trials = 500;

    // Hover points on a quarter arc of radius 70 around the target.
    let hovers: Vec<Position3> = (0..8)
        .map(|i| {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / 7.0;
            Position3::new(
                target.x + 70.0 * theta.cos(),
                target.y + 70.0 * theta.sin(),
                altitude,
            )
        })
        .collect();

    let mut truth = MeasurementSet::default();
    for &h in &hovers {
        truth.push(Measurement {
            hover: h,
            distance: distance(h, target),
            variance,
        });
    }
    let fisher = coordinate_fim(&truth, target.x, target.y)?;
    println!(
        "{} hover points, range variance {} m^2, CRB(x,y) = {:.4} m^2",
        hovers.len(),
        variance,
        fisher.crb_xy
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mse = 0.0;
    for _ in 0..trials {
        let mut set = MeasurementSet::default();
        for m in &truth.measurements {
            let noisy = aris_isac::sensing::sample_measurement(m.distance, m.variance, &mut rng)?;
            set.push(Measurement {
                distance: noisy,
                ..*m
            });
        }
        let est = mle_localize(&set, 150.0)?;
        mse += (est.x - target.x).powi(2) + (est.y - target.y).powi(2);
    }
    mse /= trials as f64;

    println!(
        "empirical MSE over {} trials = {:.4} m^2 (ratio to CRB {:.3})",
        trials,
        mse,
        mse / fisher.crb_xy
    );
    Ok(())
}
