//! Scenes: participants, their photos and channels, and run parameters.
//!
//! Scenes come from the seeded generator or from a versioned TOML file. The
//! file keeps every float in shortest round-trip form, so saving and loading
//! is lossless.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::allocation::CloudLink;
use crate::channel::{ChannelState, PhysicalLink};
use crate::geometry::{Direction3, Point3, SensingGrid};
use crate::photo::{ParticipantId, PhotoBuilder, PhotoId, PhotoMeta};
use crate::rng::{stream_rng, Stream};

pub const SCHEMA_VERSION: u32 = 1;

/// Participant id of the task requester.
pub const REQUESTER_ID: ParticipantId = ParticipantId(0);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("bad generation settings: {0}")]
    BadGeneration(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown preset `{0}` (expected gate-like or temple-like)")]
    UnknownPreset(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

fn bad_generation(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::BadGeneration(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: ParticipantId,
    pub location: Point3,
    pub channel: ChannelState,
    pub photos: Vec<PhotoMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub eta: f64,
    pub omega: f64,
    pub total_bandwidth_hz: f64,
    pub target_threshold: u32,
    pub now_min: f64,
    pub seed: u64,
    pub max_photos_per_participant: usize,
}

/// Request-stream model for the edge cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheParams {
    pub capacity_units: u64,
    pub model_count: usize,
    pub alpha: f64,
    pub requests: usize,
    pub warmup: usize,
}

impl Default for CacheParams {
    fn default() -> Self {
        CacheParams {
            capacity_units: 10,
            model_count: 100,
            alpha: crate::caching::DEFAULT_ALPHA,
            requests: 1000,
            warmup: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub grid: SensingGrid,
    pub requester_photo: PhotoMeta,
    pub participants: Vec<Participant>,
    pub cloud: Option<CloudLink>,
    pub cache: Option<CacheParams>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let p = &self.params;
        if !(p.eta > 0.0 && p.eta <= 1.0) {
            return Err(invalid(format!("eta = {} outside (0, 1]", p.eta)));
        }
        if !(p.omega > 0.0 && p.omega.is_finite()) {
            return Err(invalid(format!("omega = {} must be positive", p.omega)));
        }
        if !(p.total_bandwidth_hz > 0.0 && p.total_bandwidth_hz.is_finite()) {
            return Err(invalid(format!(
                "total_bandwidth_hz = {} must be positive",
                p.total_bandwidth_hz
            )));
        }
        if p.target_threshold == 0 {
            return Err(invalid("target_threshold must be at least 1"));
        }
        if !p.now_min.is_finite() {
            return Err(invalid("now_min must be finite"));
        }
        if self.participants.is_empty() {
            return Err(invalid("at least one participant is required"));
        }
        self.grid
            .validate()
            .map_err(|e| invalid(format!("grid: {e}")))?;
        self.requester_photo
            .validate()
            .map_err(|e| invalid(format!("requester_photo: {e}")))?;
        if let Some(cloud) = &self.cloud {
            if !(cloud.backhaul_rate_bps > 0.0)
                || !(cloud.wan_rtt_s >= 0.0 && cloud.wan_rtt_s.is_finite())
            {
                return Err(invalid(
                    "cloud needs a positive backhaul rate and a finite nonnegative rtt",
                ));
            }
        }
        if let Some(cache) = &self.cache {
            if cache.model_count == 0 || !(cache.alpha > 0.0 && cache.alpha.is_finite()) {
                return Err(invalid("cache needs model_count >= 1 and alpha > 0"));
            }
        }

        let mut participant_ids = BTreeSet::new();
        let mut photo_ids = BTreeSet::from([self.requester_photo.photo_id]);
        for part in &self.participants {
            let id = part.participant_id;
            if id == self.requester_photo.participant_id {
                return Err(invalid(format!(
                    "participant {id} reuses the requester's id"
                )));
            }
            if !participant_ids.insert(id) {
                return Err(invalid(format!("duplicate participant {id}")));
            }
            part.location
                .validate()
                .map_err(|e| invalid(format!("participant {id}: {e}")))?;
            part.channel
                .validate()
                .map_err(|e| invalid(format!("participant {id}: {e}")))?;
            if part.photos.len() > p.max_photos_per_participant {
                return Err(invalid(format!(
                    "participant {id} holds {} photos, more than {}",
                    part.photos.len(),
                    p.max_photos_per_participant
                )));
            }
            for photo in &part.photos {
                if photo.participant_id != id {
                    return Err(invalid(format!(
                        "photo {} is listed under {id} but names {}",
                        photo.photo_id, photo.participant_id
                    )));
                }
                if !photo_ids.insert(photo.photo_id) {
                    return Err(invalid(format!("duplicate photo {}", photo.photo_id)));
                }
                photo.validate().map_err(|e| invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Participant photos in participant order.
    pub fn photos(&self) -> Vec<PhotoMeta> {
        self.participants
            .iter()
            .flat_map(|p| p.photos.iter().cloned())
            .collect()
    }

    pub fn photo_count(&self) -> usize {
        self.participants.iter().map(|p| p.photos.len()).sum()
    }

    pub fn channels(&self) -> BTreeMap<ParticipantId, ChannelState> {
        self.participants
            .iter()
            .map(|p| (p.participant_id, p.channel))
            .collect()
    }

    pub fn photo(&self, id: PhotoId) -> Option<&PhotoMeta> {
        self.participants
            .iter()
            .flat_map(|p| p.photos.iter())
            .find(|p| p.photo_id == id)
    }
}

// File schema. Channels are written as `snr_linear`; `snr_db` or a physical
// link table are accepted on input.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    params: ScenarioParams,
    grid: SensingGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cloud: Option<CloudLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cache: Option<CacheParams>,
    requester_photo: PhotoMeta,
    participants: Vec<ParticipantFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParticipantFile {
    participant_id: ParticipantId,
    location: Point3,
    channel: ChannelFile,
    #[serde(default)]
    photos: Vec<PhotoMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ChannelFile {
    Linear(LinearChannel),
    Db(DbChannel),
    Physical(PhysicalLink),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearChannel {
    snr_linear: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    physical: Option<PhysicalLink>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbChannel {
    snr_db: f64,
}

impl ChannelFile {
    fn into_state(self, id: ParticipantId) -> Result<ChannelState, ScenarioError> {
        let err = |e: crate::channel::ChannelError| invalid(format!("participant {id}: {e}"));
        match self {
            ChannelFile::Linear(c) => Ok(ChannelState {
                snr_linear: c.snr_linear,
                physical: c.physical,
            }),
            ChannelFile::Db(c) => ChannelState::from_db(c.snr_db).map_err(err),
            ChannelFile::Physical(link) => ChannelState::from_physical(link).map_err(err),
        }
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            params: s.params.clone(),
            grid: s.grid.clone(),
            cloud: s.cloud,
            cache: s.cache.clone(),
            requester_photo: s.requester_photo.clone(),
            participants: s
                .participants
                .iter()
                .map(|p| ParticipantFile {
                    participant_id: p.participant_id,
                    location: p.location,
                    channel: ChannelFile::Linear(LinearChannel {
                        snr_linear: p.channel.snr_linear,
                        physical: p.channel.physical,
                    }),
                    photos: p.photos.clone(),
                })
                .collect(),
        }
    }
}

pub fn scenario_to_toml(scenario: &Scenario) -> Result<String, ScenarioError> {
    toml::to_string(&ScenarioFile::from(scenario)).map_err(|e| ScenarioError::Parse(e.to_string()))
}

/// Parses and validates a scenario document.
pub fn scenario_from_toml(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::Parse(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let participants = file
        .participants
        .into_iter()
        .map(|p| {
            Ok(Participant {
                participant_id: p.participant_id,
                location: p.location,
                channel: p.channel.into_state(p.participant_id)?,
                photos: p.photos,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let scenario = Scenario {
        params: file.params,
        grid: file.grid,
        requester_photo: file.requester_photo,
        participants,
        cloud: file.cloud,
        cache: file.cache,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    let text = scenario_to_toml(scenario)?;
    std::fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_toml(&text)
}

/// Closed-open sampling range `(lo, hi]` for the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Span { lo, hi }
    }

    /// Uniform draw from `(lo, hi]`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.hi - (self.hi - self.lo) * rng.random::<f64>()
    }

    fn check(&self, name: &str, positive: bool) -> Result<(), ScenarioError> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo <= self.hi
            && (!positive || self.lo >= 0.0);
        if ok && (!positive || self.hi > 0.0) {
            Ok(())
        } else {
            Err(bad_generation(format!(
                "{name} range ({}, {}] is empty or nonpositive",
                self.lo, self.hi
            )))
        }
    }
}

/// Parameters of the synthetic scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub objectives: Vec<Point3>,
    /// Half-width of the cube around each objective that photos aim into.
    pub objective_radius_m: f64,
    pub ring_radius_m: f64,
    pub participant_count: usize,
    pub max_photos_per_participant: usize,
    pub photo_total: usize,
    pub grid_side: u32,
    pub camera_height_m: f64,
    pub position_jitter_m: f64,
    pub fov_deg: Span,
    pub range_m: Span,
    pub snr_db: Span,
    pub freshness_min: Span,
    pub size_mb: Span,
    pub resolution_mp: Span,
    pub eta: f64,
    pub omega: f64,
    pub total_bandwidth_hz: f64,
    pub target_threshold: u32,
    pub now_min: f64,
    pub cloud: Option<CloudLink>,
    pub cache: Option<CacheParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    /// One objective, 68 photos.
    GateLike,
    /// Three objectives, 141 photos.
    TempleLike,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::GateLike, Preset::TempleLike];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::GateLike => "gate-like",
            Preset::TempleLike => "temple-like",
        }
    }

    pub fn spec(&self) -> GenerationSpec {
        let p = |x, y, z| Point3 { x, y, z };
        let (objectives, photo_total) = match self {
            Preset::GateLike => (vec![p(18.0, 18.0, 3.0)], 68),
            Preset::TempleLike => (
                vec![p(13.0, 20.0, 3.0), p(21.0, 13.0, 3.0), p(22.0, 23.0, 3.0)],
                141,
            ),
        };
        GenerationSpec {
            objectives,
            objective_radius_m: 2.5,
            ring_radius_m: 12.0,
            participant_count: 10,
            max_photos_per_participant: 20,
            photo_total,
            grid_side: 36,
            camera_height_m: 1.5,
            position_jitter_m: 2.0,
            fov_deg: Span::new(45.0, 70.0),
            range_m: Span::new(12.0, 18.0),
            snr_db: Span::new(0.0, 30.0),
            freshness_min: Span::new(0.0, 10.0),
            size_mb: Span::new(3.0, 7.0),
            resolution_mp: Span::new(8.0, 16.0),
            eta: 0.95,
            omega: crate::pricing::DEFAULT_OMEGA,
            total_bandwidth_hz: 10e6,
            target_threshold: 2,
            now_min: 0.0,
            cloud: Some(CloudLink {
                backhaul_rate_bps: 50e6,
                wan_rtt_s: 0.1,
            }),
            cache: Some(CacheParams::default()),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gate-like" | "gate" => Ok(Preset::GateLike),
            "temple-like" | "temple" => Ok(Preset::TempleLike),
            _ => Err(ScenarioError::UnknownPreset(s.to_string())),
        }
    }
}

impl GenerationSpec {
    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.objectives.is_empty() {
            return Err(bad_generation("no objectives"));
        }
        for o in &self.objectives {
            o.validate()
                .map_err(|e| bad_generation(format!("objective: {e}")))?;
        }
        if self.participant_count == 0 {
            return Err(bad_generation("participant_count must be at least 1"));
        }
        if self.photo_total > self.participant_count * self.max_photos_per_participant {
            return Err(bad_generation(format!(
                "{} photos do not fit in {} participants of {} photos",
                self.photo_total, self.participant_count, self.max_photos_per_participant
            )));
        }
        if self.grid_side == 0 {
            return Err(bad_generation("grid_side must be positive"));
        }
        for (name, v) in [
            ("ring_radius_m", self.ring_radius_m),
            ("objective_radius_m", self.objective_radius_m),
            ("position_jitter_m", self.position_jitter_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad_generation(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        if !(self.ring_radius_m > 0.0) {
            return Err(bad_generation("ring_radius_m must be positive"));
        }
        self.fov_deg.check("fov_deg", true)?;
        if self.fov_deg.hi > 180.0 {
            return Err(bad_generation("fov_deg must not exceed 180"));
        }
        self.range_m.check("range_m", true)?;
        self.snr_db.check("snr_db", false)?;
        self.freshness_min.check("freshness_min", true)?;
        self.size_mb.check("size_mb", true)?;
        self.resolution_mp.check("resolution_mp", true)?;
        Ok(())
    }
}

/// Builds a scene from `spec`; a pure function of `(spec, seed)`.
///
/// Participants stand on a ring around the objectives' centroid. Each photo
/// is taken near its owner's spot, aimed at a random point around a random
/// objective.
pub fn generate_scene(spec: &GenerationSpec, seed: u64) -> Result<Scenario, ScenarioError> {
    spec.check()?;
    let mut rng = stream_rng(seed, Stream::Generation, 0);
    let m = spec.participant_count;
    let n_obj = spec.objectives.len() as f64;
    let cx = spec.objectives.iter().map(|o| o.x).sum::<f64>() / n_obj;
    let cy = spec.objectives.iter().map(|o| o.y).sum::<f64>() / n_obj;
    let side = spec.grid_side as f64;
    let clamp = |v: f64| v.clamp(0.0, side - 1e-9);
    let to_err = |e: crate::photo::PhotoError| bad_generation(e.to_string());

    let make_photo =
        |rng: &mut rand_chacha::ChaCha8Rng, id: u32, owner: ParticipantId, spot: &Point3| {
            let j = spec.position_jitter_m;
            let location = Point3 {
                x: clamp(spot.x + rng.random_range(-j..=j)),
                y: clamp(spot.y + rng.random_range(-j..=j)),
                z: clamp(spot.z + rng.random_range(-0.3..=0.3)),
            };
            let objective = spec.objectives[rng.random_range(0..spec.objectives.len())];
            let r = spec.objective_radius_m;
            let aim = Point3 {
                x: objective.x + rng.random_range(-r..=r),
                y: objective.y + rng.random_range(-r..=r),
                z: (objective.z + rng.random_range(-r..=r)).max(0.5),
            };
            let direction = Direction3::towards(&location, &aim).unwrap_or(Direction3::X);
            PhotoBuilder::new(id, owner.0)
                .location(location)
                .direction(direction)
                .fov_deg(spec.fov_deg.sample(rng))
                .range_m(spec.range_m.sample(rng))
                .taken_at_min(spec.now_min - spec.freshness_min.sample(rng))
                .size_mb(spec.size_mb.sample(rng))
                .resolution_mp(spec.resolution_mp.sample(rng))
                .build()
        };

    let ring_point = |angle: f64, radius: f64| Point3 {
        x: clamp(cx + radius * angle.cos()),
        y: clamp(cy + radius * angle.sin()),
        z: spec.camera_height_m,
    };
    let requester_spot = ring_point(PI / m as f64, spec.ring_radius_m);
    let requester_photo = make_photo(&mut rng, 0, REQUESTER_ID, &requester_spot).map_err(to_err)?;

    let mut participants = Vec::with_capacity(m);
    let mut next_id = 1u32;
    for idx in 0..m {
        let count = spec.photo_total / m + usize::from(idx < spec.photo_total % m);
        let angle = 2.0 * PI * idx as f64 / m as f64 + rng.random_range(-0.3..=0.3) * PI / m as f64;
        let radius = spec.ring_radius_m * rng.random_range(0.9..=1.1);
        let location = ring_point(angle, radius);
        let channel = ChannelState::from_db(spec.snr_db.sample(&mut rng))
            .map_err(|e| bad_generation(e.to_string()))?;
        let participant_id = ParticipantId(idx as u32 + 1);
        let mut photos = Vec::with_capacity(count);
        for _ in 0..count {
            photos.push(make_photo(&mut rng, next_id, participant_id, &location).map_err(to_err)?);
            next_id += 1;
        }
        participants.push(Participant {
            participant_id,
            location,
            channel,
            photos,
        });
    }

    let scenario = Scenario {
        params: ScenarioParams {
            eta: spec.eta,
            omega: spec.omega,
            total_bandwidth_hz: spec.total_bandwidth_hz,
            target_threshold: spec.target_threshold,
            now_min: spec.now_min,
            seed,
            max_photos_per_participant: spec.max_photos_per_participant,
        },
        grid: SensingGrid::new(spec.grid_side, Point3::ORIGIN)
            .map_err(|e| bad_generation(e.to_string()))?,
        requester_photo,
        participants,
        cloud: spec.cloud,
        cache: spec.cache.clone(),
    };
    scenario
        .validate()
        .map_err(|e| bad_generation(e.to_string()))?;
    Ok(scenario)
}

pub fn generate_preset(preset: Preset, seed: u64) -> Result<Scenario, ScenarioError> {
    generate_scene(&preset.spec(), seed)
}
