//! Pose-covariance proxy and the D-optimality scalar used by the reward.
//!
//! The covariance grows with motion through the linearized unicycle model
//! (`Σ ← F Σ Fᵀ + Q·dt`) and shrinks by a scalar factor when the robot
//! re-observes mapped obstacles. The mean always tracks the true pose.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{integrate_unicycle, Pose, Velocity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    /// Translational motion noise, m²/s.
    pub q_xy: f64,
    /// Heading motion noise, rad²/s.
    pub q_theta: f64,
    /// Re-observation shrink gain `k` in `Σ / (1 + k·m)`.
    pub correction_gain: f64,
    /// Diagonal of the covariance at episode start.
    pub initial_variance: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            q_xy: 1e-4,
            q_theta: 1e-4,
            correction_gain: 0.5,
            initial_variance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseBelief {
    pub mean: Pose,
    pub sigma: Matrix3<f64>,
}

impl PoseBelief {
    pub fn new(mean: Pose, sigma: Matrix3<f64>) -> Self {
        Self { mean, sigma }
    }

    pub fn isotropic(mean: Pose, variance: f64) -> Self {
        Self::new(mean, Matrix3::identity() * variance)
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = SymmetricEigen::new(self.sigma).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

/// Jacobian of the exact-arc unicycle step with respect to `(x, y, θ)`.
pub fn motion_jacobian(pose: &Pose, cmd: Velocity, dt: f64) -> Matrix3<f64> {
    let th = pose.theta;
    let (dx_dth, dy_dth) = if cmd.omega.abs() < 1e-12 {
        (-cmd.v * dt * th.sin(), cmd.v * dt * th.cos())
    } else {
        let r = cmd.v / cmd.omega;
        let th2 = th + cmd.omega * dt;
        (r * (th2.cos() - th.cos()), r * (th2.sin() - th.sin()))
    };
    Matrix3::new(1.0, 0.0, dx_dth, 0.0, 1.0, dy_dth, 0.0, 0.0, 1.0)
}

/// Motion update: mean along the arc, `Σ ← F Σ Fᵀ + Q·dt`.
pub fn propagate(belief: &PoseBelief, cmd: Velocity, dt: f64, cfg: &UncertaintyConfig) -> PoseBelief {
    let f = motion_jacobian(&belief.mean, cmd, dt);
    let q = Matrix3::from_diagonal(&nalgebra::Vector3::new(cfg.q_xy, cfg.q_xy, cfg.q_theta)) * dt;
    let mut sigma = f * belief.sigma * f.transpose() + q;
    // keep exact symmetry against round-off
    sigma = (sigma + sigma.transpose()) * 0.5;
    PoseBelief::new(integrate_unicycle(belief.mean, cmd, dt), sigma)
}

/// Re-observation update: `Σ ← Σ / (1 + k·m)` where `m ∈ [0, 1]` is the
/// fraction of beams that landed on already-mapped obstacles.
pub fn observe_correct(belief: &PoseBelief, reobserved_fraction: f64, gain: f64) -> PoseBelief {
    let m = reobserved_fraction.clamp(0.0, 1.0);
    PoseBelief::new(belief.mean, belief.sigma / (1.0 + gain * m))
}

/// D-optimality criterion: geometric mean of the eigenvalues,
/// `exp(mean(log λ)) = det(Σ)^(1/n)`.
pub fn d_optimality(sigma: &Matrix3<f64>) -> Result<f64> {
    let eig = SymmetricEigen::new(*sigma).eigenvalues;
    if let Some(bad) = eig.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Domain(format!(
            "covariance is not positive definite (eigenvalue {bad:e})"
        )));
    }
    let mean_log = eig.iter().map(|l| l.ln()).sum::<f64>() / eig.len() as f64;
    Ok(mean_log.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ActionSet;
    use proptest::prelude::*;

    fn forward() -> Velocity {
        ActionSet::default().forward
    }

    #[test]
    fn identity_is_one() {
        assert!((d_optimality(&Matrix3::identity()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_geometric_mean() {
        let s = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 4.0, 16.0));
        assert!((d_optimality(&s).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity() {
        let s = Matrix3::identity() * 0.37;
        assert!((d_optimality(&s).unwrap() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn non_spd_rejected() {
        let s = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 0.0, 2.0));
        assert!(matches!(d_optimality(&s), Err(Error::Domain(_))));
        let s = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 2.0));
        assert!(d_optimality(&s).is_err());
    }

    #[test]
    fn translation_without_noise_preserves_determinant() {
        let cfg = UncertaintyConfig {
            q_xy: 0.0,
            q_theta: 0.0,
            ..Default::default()
        };
        let sigma = Matrix3::new(2e-3, 3e-4, 1e-4, 3e-4, 1e-3, -2e-4, 1e-4, -2e-4, 5e-4);
        let b = PoseBelief::new(Pose::new(1.0, 2.0, 0.7), sigma);
        let p = propagate(&b, forward(), 0.5, &cfg);
        assert!((motion_jacobian(&b.mean, forward(), 0.5).determinant() - 1.0).abs() < 1e-15);
        let rel = (p.sigma.determinant() - sigma.determinant()).abs() / sigma.determinant();
        assert!(rel < 1e-10);
    }

    #[test]
    fn noise_grows_trace() {
        let b = PoseBelief::isotropic(Pose::default(), 1e-6);
        let p = propagate(&b, forward(), 0.5, &UncertaintyConfig::default());
        assert!(p.sigma.trace() > b.sigma.trace());
    }

    #[test]
    fn determinant_strictly_increases() {
        let cfg = UncertaintyConfig::default();
        let mut b = PoseBelief::isotropic(Pose::default(), 1e-6);
        let turn = ActionSet::default().turn_left;
        for k in 0..100 {
            let cmd = if k % 3 == 0 { turn } else { forward() };
            let next = propagate(&b, cmd, 0.5, &cfg);
            assert!(next.sigma.determinant() > b.sigma.determinant());
            b = next;
        }
    }

    #[test]
    fn correction_factors() {
        let b = PoseBelief::isotropic(Pose::default(), 0.3);
        assert_eq!(observe_correct(&b, 0.0, 0.5).sigma, b.sigma);
        let full = observe_correct(&b, 1.0, 0.5);
        for (a, e) in full.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((a - e * 2.0 / 3.0).abs() < 1e-15);
        }
        let half = observe_correct(&b, 0.5, 0.5);
        assert!((half.sigma[(0, 0)] - 0.3 * 0.8).abs() < 1e-15);
    }

    fn spd() -> impl Strategy<Value = Matrix3<f64>> {
        (prop::array::uniform9(-1.0f64..1.0), 1e-3f64..1.0).prop_map(|(a, d)| {
            let m = Matrix3::from_row_slice(&a);
            m * m.transpose() + Matrix3::identity() * d
        })
    }

    proptest! {
        #[test]
        fn homogeneous(s in spd(), c in 1e-3f64..1e3) {
            let f = d_optimality(&s).unwrap();
            let fc = d_optimality(&(s * c)).unwrap();
            prop_assert!((fc - c * f).abs() <= 1e-9 * (c * f).max(1.0));
        }

        #[test]
        fn bounded_by_mean_eigenvalue(s in spd()) {
            prop_assert!(d_optimality(&s).unwrap() <= s.trace() / 3.0 + 1e-12);
        }

        #[test]
        fn correction_never_grows_eigenvalues(s in spd(), m in 0.0f64..1.0) {
            let b = PoseBelief::new(Pose::default(), s);
            let c = observe_correct(&b, m, 0.5);
            for (a, e) in c.eigenvalues().iter().zip(b.eigenvalues()) {
                prop_assert!(*a <= e + 1e-15);
            }
        }
    }

    #[test]
    fn long_propagation_stays_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cfg = UncertaintyConfig::default();
        let actions = ActionSet::default();
        let mut b = PoseBelief::isotropic(Pose::default(), 1e-4);
        for _ in 0..10_000 {
            let cmd = match rng.random_range(0..3) {
                0 => actions.forward,
                1 => actions.turn_left,
                _ => actions.turn_right,
            };
            b = propagate(&b, cmd, 0.5, &cfg);
            if rng.random_bool(0.3) {
                b = observe_correct(&b, rng.random(), cfg.correction_gain);
            }
            assert_eq!(b.sigma, b.sigma.transpose());
        }
        assert!(b.eigenvalues()[0] > 0.0);
    }
}
