//! Photo metadata as reported by edge participants.
//!
//! A photo is described entirely by its metadata tuple: where and when it
//! was taken, where the camera pointed, how wide and how far it sees, and
//! the payload size and resolution. Pixels never enter the simulation.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::geometry::{Direction3, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhotoId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub u32);

impl fmt::Display for PhotoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotoError {
    #[error("photo {id}: field of view {fov_rad} rad outside (0, pi]")]
    FieldOfView { id: PhotoId, fov_rad: f64 },
    #[error("photo {id}: range {range_m} m must be positive and finite")]
    Range { id: PhotoId, range_m: f64 },
    #[error("photo {id}: size {size_mb} MB must be positive and finite")]
    Size { id: PhotoId, size_mb: f64 },
    #[error("photo {id}: resolution {resolution_mp} MP must be positive and finite")]
    Resolution { id: PhotoId, resolution_mp: f64 },
    #[error("photo {id}: timestamp {taken_at_min} is not finite")]
    Timestamp { id: PhotoId, taken_at_min: f64 },
    #[error("photo {id}: {source}")]
    Pose {
        id: PhotoId,
        #[source]
        source: crate::geometry::GeometryError,
    },
}

/// Metadata tuple of one photo.
///
/// Units: meters for positions and range, radians for the field of view,
/// minutes for the timestamp, megabytes for the size and megapixels for the
/// resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoMeta {
    pub photo_id: PhotoId,
    pub participant_id: ParticipantId,
    pub location: Point3,
    pub direction: Direction3,
    pub fov_rad: f64,
    pub range_m: f64,
    pub taken_at_min: f64,
    pub size_mb: f64,
    pub resolution_mp: f64,
}

impl PhotoMeta {
    /// Checks every field constraint. Constructors in this crate call this;
    /// deserialized values must be validated explicitly.
    pub fn validate(&self) -> Result<(), PhotoError> {
        let id = self.photo_id;
        self.location
            .validate()
            .and_then(|_| self.direction.validate())
            .map_err(|source| PhotoError::Pose { id, source })?;
        if !(self.fov_rad > 0.0 && self.fov_rad <= std::f64::consts::PI) {
            return Err(PhotoError::FieldOfView {
                id,
                fov_rad: self.fov_rad,
            });
        }
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return Err(PhotoError::Range {
                id,
                range_m: self.range_m,
            });
        }
        if !(self.size_mb > 0.0 && self.size_mb.is_finite()) {
            return Err(PhotoError::Size {
                id,
                size_mb: self.size_mb,
            });
        }
        if !(self.resolution_mp > 0.0 && self.resolution_mp.is_finite()) {
            return Err(PhotoError::Resolution {
                id,
                resolution_mp: self.resolution_mp,
            });
        }
        if !self.taken_at_min.is_finite() {
            return Err(PhotoError::Timestamp {
                id,
                taken_at_min: self.taken_at_min,
            });
        }
        Ok(())
    }
}

/// Builder used by tests and the scene generator. Defaults describe a 12 MP,
/// 5 MB photo with a 60 degree field of view and a 10 m range.
#[derive(Debug, Clone)]
pub struct PhotoBuilder {
    meta: PhotoMeta,
}

impl PhotoBuilder {
    pub fn new(photo_id: u32, participant_id: u32) -> Self {
        Self {
            meta: PhotoMeta {
                photo_id: PhotoId(photo_id),
                participant_id: ParticipantId(participant_id),
                location: Point3::ORIGIN,
                direction: Direction3::X,
                fov_rad: 60f64.to_radians(),
                range_m: 10.0,
                taken_at_min: 0.0,
                size_mb: 5.0,
                resolution_mp: 12.0,
            },
        }
    }

    pub fn location(mut self, location: Point3) -> Self {
        self.meta.location = location;
        self
    }

    pub fn direction(mut self, direction: Direction3) -> Self {
        self.meta.direction = direction;
        self
    }

    pub fn fov_deg(mut self, deg: f64) -> Self {
        self.meta.fov_rad = deg.to_radians();
        self
    }

    pub fn fov_rad(mut self, rad: f64) -> Self {
        self.meta.fov_rad = rad;
        self
    }

    pub fn range_m(mut self, range: f64) -> Self {
        self.meta.range_m = range;
        self
    }

    pub fn taken_at_min(mut self, t: f64) -> Self {
        self.meta.taken_at_min = t;
        self
    }

    pub fn size_mb(mut self, size: f64) -> Self {
        self.meta.size_mb = size;
        self
    }

    pub fn resolution_mp(mut self, mp: f64) -> Self {
        self.meta.resolution_mp = mp;
        self
    }

    pub fn build(self) -> Result<PhotoMeta, PhotoError> {
        self.meta.validate()?;
        Ok(self.meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_defaults_are_valid() {
        assert!(PhotoBuilder::new(1, 1).build().is_ok());
    }

    #[test]
    fn rejects_out_of_range_fields() {
        assert!(matches!(
            PhotoBuilder::new(1, 1).fov_deg(0.0).build(),
            Err(PhotoError::FieldOfView { .. })
        ));
        assert!(matches!(
            PhotoBuilder::new(1, 1).fov_deg(181.0).build(),
            Err(PhotoError::FieldOfView { .. })
        ));
        assert!(PhotoBuilder::new(1, 1).fov_deg(180.0).build().is_ok());
        assert!(matches!(
            PhotoBuilder::new(1, 1).range_m(0.0).build(),
            Err(PhotoError::Range { .. })
        ));
        assert!(matches!(
            PhotoBuilder::new(1, 1).size_mb(-1.0).build(),
            Err(PhotoError::Size { .. })
        ));
        assert!(matches!(
            PhotoBuilder::new(1, 1).resolution_mp(f64::NAN).build(),
            Err(PhotoError::Resolution { .. })
        ));
    }

    #[test]
    fn rejects_non_unit_direction() {
        let mut photo = PhotoBuilder::new(1, 1).build().unwrap();
        photo.direction = Direction3 {
            dx: 0.0,
            dy: 0.0,
            dz: 0.0,
        };
        assert!(matches!(photo.validate(), Err(PhotoError::Pose { .. })));
    }
}
