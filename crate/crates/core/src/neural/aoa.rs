//! Angle-of-arrival labels computed from positions.

use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::dataset::ArrayPose;
use crate::scalar::{wrap_angle, Scalar};

/// Azimuth in `(-pi, pi]`, elevation in `[-pi/2, pi/2]`, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaLabel<T> {
    pub azimuth: T,
    pub elevation: T,
}

/// Azimuth is the signed horizontal angle from broadside to the UE direction
/// (counter-clockwise seen from above); elevation is measured from the horizontal plane.
pub fn aoa_from_position<T: Scalar>(position: [T; 3], pose: &ArrayPose<T>) -> Result<AoaLabel<T>, NeuralError> {
    let d = [
        position[0] - pose.position[0],
        position[1] - pose.position[1],
        position[2] - pose.position[2],
    ];
    if d.iter().all(|x| *x == T::zero()) {
        return Err(NeuralError::Degenerate("position coincides with the array center".into()));
    }
    let b = pose.broadside;
    let b_h = b[0].hypot(b[1]);
    if !(b_h > T::epsilon()) {
        return Err(NeuralError::Degenerate("broadside has no horizontal component".into()));
    }
    let (bx, by) = (b[0] / b_h, b[1] / b_h);
    let cross = bx * d[1] - by * d[0];
    let along = bx * d[0] + by * d[1];
    let azimuth = wrap_angle(cross.atan2(along));
    let elevation = d[2].atan2(d[0].hypot(d[1]));
    Ok(AoaLabel { azimuth, elevation })
}

/// One angle regressed by its own network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleComponent {
    Azimuth,
    Elevation,
}

impl AngleComponent {
    /// Regression target width: azimuth is learned as `(sin, cos)`, elevation directly.
    pub fn encoded_width(self) -> usize {
        match self {
            AngleComponent::Azimuth => 2,
            AngleComponent::Elevation => 1,
        }
    }

    pub fn select<T: Scalar>(self, label: &AoaLabel<T>) -> T {
        match self {
            AngleComponent::Azimuth => label.azimuth,
            AngleComponent::Elevation => label.elevation,
        }
    }

    pub fn encode<T: Scalar>(self, angle: T) -> Vec<T> {
        match self {
            AngleComponent::Azimuth => vec![angle.sin(), angle.cos()],
            AngleComponent::Elevation => vec![angle],
        }
    }

    /// Maps a regression output back to a canonical angle.
    pub fn decode<T: Scalar>(self, y: &[T]) -> T {
        match self {
            AngleComponent::Azimuth => wrap_angle(y[0].atan2(y[1])),
            AngleComponent::Elevation => self.canonicalize(y[0]),
        }
    }

    /// Azimuth wrapped into `(-pi, pi]`, elevation clamped to `[-pi/2, pi/2]`.
    pub fn canonicalize<T: Scalar>(self, angle: T) -> T {
        match self {
            AngleComponent::Azimuth => wrap_angle(angle),
            AngleComponent::Elevation => angle.max(-T::FRAC_PI_2()).min(T::FRAC_PI_2()),
        }
    }

    pub(crate) fn seed_salt(self) -> u64 {
        match self {
            AngleComponent::Azimuth => 0x617a_696d,
            AngleComponent::Elevation => 0x656c_6576,
        }
    }
}
