//! Bandwidth allocation for photo upload.
//!
//! A participant uploading `D` MB over `B_m` Hz at linear SNR `s` needs
//! `8e6 · D / (B_m · log2(1 + s))` seconds. The min-max optimum gives each
//! participant bandwidth in proportion to `D / log2(1 + s)`, which makes all
//! positive delays equal.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::photo::ParticipantId;

/// Decimal megabytes to bits.
pub const BITS_PER_MB: f64 = 8e6;

/// Relative slack for the optimality checks.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("participant {0} has data to upload but zero bandwidth")]
    ZeroBandwidth(ParticipantId),
    #[error("no participant has data to upload")]
    NoLoad,
    #[error("total bandwidth {0} Hz must be positive and finite")]
    Bandwidth(f64),
    #[error("participant {participant}: invalid load ({reason})")]
    InvalidLoad {
        participant: ParticipantId,
        reason: &'static str,
    },
    #[error("allocation has no share for participant {0}")]
    MissingShare(ParticipantId),
    #[error("closed-form allocation is not optimal: {reason}")]
    OptimalityViolation {
        reason: String,
        alternative: BandwidthAllocation,
    },
    #[error("cloud upload scheme needs backhaul_rate_bps and wan_rtt_s")]
    MissingBackhaul,
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UploadLoad {
    pub participant_id: ParticipantId,
    pub total_mb: f64,
    pub snr_linear: f64,
}

impl UploadLoad {
    pub fn validate(&self) -> Result<(), AllocationError> {
        let participant = self.participant_id;
        if !(self.total_mb >= 0.0 && self.total_mb.is_finite()) {
            return Err(AllocationError::InvalidLoad {
                participant,
                reason: "total_mb must be finite and nonnegative",
            });
        }
        if !(self.snr_linear > 0.0 && self.snr_linear.is_finite()) {
            return Err(AllocationError::InvalidLoad {
                participant,
                reason: "snr_linear must be positive",
            });
        }
        Ok(())
    }

    pub fn has_load(&self) -> bool {
        self.total_mb > 0.0
    }

    /// `D / log2(1 + SNR)`, the closed-form allocation weight.
    pub fn weight(&self) -> f64 {
        self.total_mb / (1.0 + self.snr_linear).log2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthAllocation {
    pub shares: BTreeMap<ParticipantId, f64>,
    pub total_hz: f64,
}

impl BandwidthAllocation {
    pub fn share(&self, id: ParticipantId) -> Option<f64> {
        self.shares.get(&id).copied()
    }

    pub fn sum(&self) -> f64 {
        self.shares.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub per_participant_delay: BTreeMap<ParticipantId, f64>,
    pub max_delay: f64,
}

/// Upload time in seconds of one participant's selected photos.
pub fn upload_delay(load: &UploadLoad, share_hz: f64) -> Result<f64, AllocationError> {
    if !load.has_load() {
        return Ok(0.0);
    }
    if share_hz <= 0.0 {
        return Err(AllocationError::ZeroBandwidth(load.participant_id));
    }
    Ok(load.total_mb * BITS_PER_MB / (share_hz * (1.0 + load.snr_linear).log2()))
}

pub fn delay_report(
    loads: &[UploadLoad],
    allocation: &BandwidthAllocation,
) -> Result<DelayReport, AllocationError> {
    let mut per = BTreeMap::new();
    let mut max_delay: f64 = 0.0;
    for load in loads {
        let share = allocation
            .share(load.participant_id)
            .ok_or(AllocationError::MissingShare(load.participant_id))?;
        let d = upload_delay(load, share)?;
        max_delay = max_delay.max(d);
        per.insert(load.participant_id, d);
    }
    Ok(DelayReport {
        per_participant_delay: per,
        max_delay,
    })
}

fn check_inputs(loads: &[UploadLoad], total_hz: f64) -> Result<(), AllocationError> {
    if !(total_hz > 0.0 && total_hz.is_finite()) {
        return Err(AllocationError::Bandwidth(total_hz));
    }
    for load in loads {
        load.validate()?;
    }
    if !loads.iter().any(UploadLoad::has_load) {
        return Err(AllocationError::NoLoad);
    }
    Ok(())
}

/// Splits `total_hz` in proportion to `weight(load)` over loaded
/// participants; unloaded ones get zero.
fn proportional(
    loads: &[UploadLoad],
    total_hz: f64,
    mut weight: impl FnMut(&UploadLoad) -> f64,
) -> Result<BandwidthAllocation, AllocationError> {
    let weights: Vec<f64> = loads
        .iter()
        .map(|l| if l.has_load() { weight(l) } else { 0.0 })
        .collect();
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(AllocationError::NoLoad);
    }
    Ok(BandwidthAllocation {
        shares: loads
            .iter()
            .zip(&weights)
            .map(|(l, w)| (l.participant_id, total_hz * (w / sum)))
            .collect(),
        total_hz,
    })
}

/// Min-max optimal shares `B · w_m / Σ w_j` with `w = D / log2(1 + SNR)`.
pub fn optimal_allocation(
    loads: &[UploadLoad],
    total_hz: f64,
) -> Result<BandwidthAllocation, AllocationError> {
    check_inputs(loads, total_hz)?;
    proportional(loads, total_hz, UploadLoad::weight)
}

/// Equal split over participants with something to upload.
pub fn fair_allocation(
    loads: &[UploadLoad],
    total_hz: f64,
) -> Result<BandwidthAllocation, AllocationError> {
    check_inputs(loads, total_hz)?;
    proportional(loads, total_hz, |_| 1.0)
}

/// Shares proportional to the number of photos each participant uploads.
pub fn weighted_allocation(
    loads: &[UploadLoad],
    photo_counts: &BTreeMap<ParticipantId, usize>,
    total_hz: f64,
) -> Result<BandwidthAllocation, AllocationError> {
    check_inputs(loads, total_hz)?;
    proportional(loads, total_hz, |l| {
        photo_counts.get(&l.participant_id).copied().unwrap_or(0) as f64
    })
}

/// Flat-Dirichlet random split over loaded participants.
pub fn random_allocation<R: Rng + ?Sized>(
    loads: &[UploadLoad],
    total_hz: f64,
    rng: &mut R,
) -> Result<BandwidthAllocation, AllocationError> {
    check_inputs(loads, total_hz)?;
    proportional(loads, total_hz, |_| Exp1.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationScheme {
    Optimal,
    Fair,
    Weighted,
    Random,
}

impl AllocationScheme {
    pub const ALL: [AllocationScheme; 4] = [
        AllocationScheme::Optimal,
        AllocationScheme::Fair,
        AllocationScheme::Weighted,
        AllocationScheme::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AllocationScheme::Optimal => "optimal",
            AllocationScheme::Fair => "fras",
            AllocationScheme::Weighted => "wras",
            AllocationScheme::Random => "rras",
        }
    }

    pub fn allocate<R: Rng + ?Sized>(
        &self,
        loads: &[UploadLoad],
        photo_counts: &BTreeMap<ParticipantId, usize>,
        total_hz: f64,
        rng: &mut R,
    ) -> Result<BandwidthAllocation, AllocationError> {
        match self {
            AllocationScheme::Optimal => optimal_allocation(loads, total_hz),
            AllocationScheme::Fair => fair_allocation(loads, total_hz),
            AllocationScheme::Weighted => weighted_allocation(loads, photo_counts, total_hz),
            AllocationScheme::Random => random_allocation(loads, total_hz, rng),
        }
    }
}

impl fmt::Display for AllocationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AllocationScheme {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" | "ec-pcs" => Ok(AllocationScheme::Optimal),
            "fras" | "fair" => Ok(AllocationScheme::Fair),
            "wras" | "weighted" => Ok(AllocationScheme::Weighted),
            "rras" | "random" => Ok(AllocationScheme::Random),
            _ => Err(AllocationError::UnknownScheme(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub closed_form_max_delay: f64,
    /// `max / min - 1` over positive delays.
    pub delay_spread: f64,
    pub trials: usize,
    pub best_random_max_delay: f64,
    pub best_line_search_max_delay: f64,
}

fn max_delay_of(loads: &[UploadLoad], shares: &[f64]) -> f64 {
    loads
        .iter()
        .zip(shares)
        .map(|(l, &b)| {
            if b > 0.0 {
                l.total_mb * BITS_PER_MB / (b * (1.0 + l.snr_linear).log2())
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Numerical optimality check of a closed-form allocation.
///
/// Asserts that positive-load delays are equal, that none of `trials`
/// random feasible splits has a lower maximum delay, and that no pairwise
/// bandwidth transfer found by golden-section search lowers it either.
pub fn verify_optimum<R: Rng + ?Sized>(
    loads: &[UploadLoad],
    allocation: &BandwidthAllocation,
    total_hz: f64,
    trials: usize,
    rng: &mut R,
) -> Result<OptimumReport, AllocationError> {
    check_inputs(loads, total_hz)?;
    let active: Vec<UploadLoad> = loads.iter().copied().filter(UploadLoad::has_load).collect();
    let shares: Vec<f64> = active
        .iter()
        .map(|l| {
            allocation
                .share(l.participant_id)
                .ok_or(AllocationError::MissingShare(l.participant_id))
        })
        .collect::<Result<_, _>>()?;
    let delays: Vec<f64> = active
        .iter()
        .zip(&shares)
        .map(|(l, &b)| upload_delay(l, b))
        .collect::<Result<_, _>>()?;
    let hi = delays.iter().copied().fold(f64::MIN, f64::max);
    let lo = delays.iter().copied().fold(f64::MAX, f64::min);
    let spread = hi / lo - 1.0;
    if spread > OPTIMALITY_TOLERANCE {
        return Err(AllocationError::OptimalityViolation {
            reason: format!("positive-load delays differ by {spread:e} relative"),
            alternative: allocation.clone(),
        });
    }
    let closed = max_delay_of(&active, &shares);
    let beaten = |alt: f64| alt < closed * (1.0 - OPTIMALITY_TOLERANCE);
    let to_allocation = |alt: &[f64]| BandwidthAllocation {
        shares: active
            .iter()
            .zip(alt)
            .map(|(l, &b)| (l.participant_id, b))
            .collect(),
        total_hz,
    };

    let mut best_random = f64::INFINITY;
    for _ in 0..trials {
        let draws: Vec<f64> = active.iter().map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        let alt: Vec<f64> = draws.iter().map(|w| total_hz * w / sum).collect();
        let d = max_delay_of(&active, &alt);
        if beaten(d) {
            return Err(AllocationError::OptimalityViolation {
                reason: format!("random split reaches max delay {d} < {closed}"),
                alternative: to_allocation(&alt),
            });
        }
        best_random = best_random.min(d);
    }

    let mut best_line = closed;
    for to in 0..active.len() {
        for from in 0..active.len() {
            if to == from {
                continue;
            }
            let moved = |delta: f64| {
                let mut alt = shares.clone();
                alt[to] += delta;
                alt[from] -= delta;
                max_delay_of(&active, &alt)
            };
            let (delta, d) = golden_min(0.0, shares[from], moved);
            if beaten(d) {
                let mut alt = shares.clone();
                alt[to] += delta;
                alt[from] -= delta;
                return Err(AllocationError::OptimalityViolation {
                    reason: format!("moving {delta} Hz reaches max delay {d} < {closed}"),
                    alternative: to_allocation(&alt),
                });
            }
            best_line = best_line.min(d);
        }
    }

    Ok(OptimumReport {
        closed_form_max_delay: closed,
        delay_spread: spread,
        trials,
        best_random_max_delay: best_random,
        best_line_search_max_delay: best_line,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UploadScheme {
    /// Selected photos to the edge server.
    EdgePartial,
    /// Every photo to the edge server.
    EdgeTotal,
    /// Selected photos to the edge, then forwarded to a cloud server.
    CloudPartial,
}

impl UploadScheme {
    pub const ALL: [UploadScheme; 3] = [
        UploadScheme::EdgePartial,
        UploadScheme::EdgeTotal,
        UploadScheme::CloudPartial,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UploadScheme::EdgePartial => "edge_partial",
            UploadScheme::EdgeTotal => "edge_total",
            UploadScheme::CloudPartial => "cloud_partial",
        }
    }
}

impl fmt::Display for UploadScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UploadScheme {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "edge_partial" | "ec_pcs" => Ok(UploadScheme::EdgePartial),
            "edge_total" | "tpu_es" => Ok(UploadScheme::EdgeTotal),
            "cloud_partial" | "ppu_cs" => Ok(UploadScheme::CloudPartial),
            _ => Err(AllocationError::UnknownScheme(s.to_string())),
        }
    }
}

/// Store-and-forward hop from the edge server to a remote cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudLink {
    pub backhaul_rate_bps: f64,
    pub wan_rtt_s: f64,
}

impl CloudLink {
    /// Serialization of `total_mb` over the backhaul plus one round trip.
    pub fn forward_delay(&self, total_mb: f64) -> f64 {
        total_mb * BITS_PER_MB / self.backhaul_rate_bps + self.wan_rtt_s
    }
}

/// Everything the upload schemes need from a scenario.
#[derive(Debug, Clone)]
pub struct UploadContext {
    pub selected: Vec<UploadLoad>,
    pub selected_counts: BTreeMap<ParticipantId, usize>,
    pub all: Vec<UploadLoad>,
    pub all_counts: BTreeMap<ParticipantId, usize>,
    pub total_hz: f64,
    pub cloud: Option<CloudLink>,
}

/// Delay of an upload scheme under the given allocator.
pub fn scheme_delay<R: Rng + ?Sized>(
    upload: UploadScheme,
    allocator: AllocationScheme,
    ctx: &UploadContext,
    rng: &mut R,
) -> Result<(BandwidthAllocation, DelayReport), AllocationError> {
    let (loads, counts) = match upload {
        UploadScheme::EdgePartial | UploadScheme::CloudPartial => {
            (&ctx.selected, &ctx.selected_counts)
        }
        UploadScheme::EdgeTotal => (&ctx.all, &ctx.all_counts),
    };
    let cloud = match upload {
        UploadScheme::CloudPartial => Some(ctx.cloud.ok_or(AllocationError::MissingBackhaul)?),
        _ => None,
    };
    let allocation = allocator.allocate(loads, counts, ctx.total_hz, rng)?;
    let mut report = delay_report(loads, &allocation)?;
    if let Some(link) = cloud {
        let total_mb: f64 = loads.iter().map(|l| l.total_mb).sum();
        let hop = link.forward_delay(total_mb);
        for (id, d) in report.per_participant_delay.iter_mut() {
            let loaded = loads
                .iter()
                .any(|l| l.participant_id == *id && l.has_load());
            if loaded {
                *d += hop;
            }
        }
        report.max_delay = report
            .per_participant_delay
            .values()
            .copied()
            .fold(0.0, f64::max);
    }
    Ok((allocation, report))
}

/// Delay of an upload scheme with the closed-form optimal allocation.
pub fn upload_scheme_delay(
    scheme: UploadScheme,
    ctx: &UploadContext,
) -> Result<DelayReport, AllocationError> {
    // the optimal allocator draws no randomness
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    scheme_delay(scheme, AllocationScheme::Optimal, ctx, &mut rng).map(|(_, r)| r)
}

/// One CSV line of an allocation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub scheme: String,
    pub participant_id: u32,
    pub share_hz: f64,
    pub delay_s: f64,
    pub max_delay_s: f64,
}

pub fn allocation_rows(
    scheme: &str,
    allocation: &BandwidthAllocation,
    report: &DelayReport,
) -> Vec<AllocationRow> {
    allocation
        .shares
        .iter()
        .map(|(id, &share)| AllocationRow {
            scheme: scheme.to_string(),
            participant_id: id.0,
            share_hz: share,
            delay_s: report.per_participant_delay.get(id).copied().unwrap_or(0.0),
            max_delay_s: report.max_delay,
        })
        .collect()
}
