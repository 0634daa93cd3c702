//! Evaluation tooling: trajectories, synthetic motions, replays, reports and
//! a numerical reference solver.

pub mod oracle;
pub mod replay;
pub mod report;
pub mod synth;
pub mod trajectory;

use rand::Rng;

use crate::geometry::Vec3;

/// Uniform direction, by rejection from the unit cube.
pub(crate) fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
