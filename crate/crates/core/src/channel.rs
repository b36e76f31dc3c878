//! Uplink channel model.
//!
//! SNR is always carried in linear scale. Decibels only appear at the
//! configuration boundary ([`db_to_linear`], [`linear_to_db`]).
//!
//! | quantity     | unit |
//! |--------------|------|
//! | bandwidth    | Hz   |
//! | rate         | bps  |
//! | power, noise | W    |
//! | distance     | m    |

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{name} = {value} is outside its valid domain ({domain})")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
}

fn domain(name: &'static str, value: f64, domain: &'static str) -> ChannelError {
    ChannelError::Domain {
        name,
        value,
        domain,
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Minimum SNR reaching a target bit error rate: `-2 ln(5 ber) / 3`.
pub fn gamma_threshold(ber: f64) -> Result<f64, ChannelError> {
    if !(ber > 0.0 && ber < 0.2) {
        return Err(domain("target_ber", ber, "0 < ber < 0.2"));
    }
    Ok(-2.0 * (5.0 * ber).ln() / 3.0)
}

/// Physical link parameters of one participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLink {
    pub tx_power_w: f64,
    /// Squared fading magnitude `|h|²`.
    pub fading_gain: f64,
    pub distance_m: f64,
    pub pathloss_exp: f64,
    pub noise_w: f64,
    pub target_ber: f64,
}

impl PhysicalLink {
    /// Draws `|h|²` from a unit-mean exponential (Rayleigh amplitude).
    pub fn with_rayleigh_fading<R: Rng + ?Sized>(
        tx_power_w: f64,
        distance_m: f64,
        pathloss_exp: f64,
        noise_w: f64,
        target_ber: f64,
        rng: &mut R,
    ) -> Self {
        PhysicalLink {
            tx_power_w,
            fading_gain: Exp1.sample(rng),
            distance_m,
            pathloss_exp,
            noise_w,
            target_ber,
        }
    }
}

/// `p |h|² / (Γ(ber) d^β N0)`.
pub fn snr_from_physical(link: &PhysicalLink) -> Result<f64, ChannelError> {
    let positive = [
        ("tx_power_w", link.tx_power_w),
        ("fading_gain", link.fading_gain),
        ("distance_m", link.distance_m),
        ("pathloss_exp", link.pathloss_exp),
        ("noise_w", link.noise_w),
    ];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(domain(name, value, "positive and finite"));
        }
    }
    let gamma = gamma_threshold(link.target_ber)?;
    Ok(link.tx_power_w * link.fading_gain
        / (gamma * link.distance_m.powf(link.pathloss_exp) * link.noise_w))
}

/// Maximum uplink rate `B log2(1 + SNR)` in bps.
pub fn uplink_rate(bandwidth_hz: f64, snr_linear: f64) -> f64 {
    bandwidth_hz * (1.0 + snr_linear).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub snr_linear: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalLink>,
}

impl ChannelState {
    pub fn from_linear(snr_linear: f64) -> Result<Self, ChannelError> {
        let state = ChannelState {
            snr_linear,
            physical: None,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn from_db(snr_db: f64) -> Result<Self, ChannelError> {
        Self::from_linear(db_to_linear(snr_db))
    }

    pub fn from_physical(link: PhysicalLink) -> Result<Self, ChannelError> {
        Ok(ChannelState {
            snr_linear: snr_from_physical(&link)?,
            physical: Some(link),
        })
    }

    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.snr_linear)
    }

    /// Spectral efficiency `log2(1 + SNR)` in bit/s/Hz.
    pub fn spectral_efficiency(&self) -> f64 {
        (1.0 + self.snr_linear).log2()
    }

    pub fn link_budget(&self, bandwidth_hz: f64) -> LinkBudget {
        LinkBudget {
            bandwidth_hz,
            rate_bps: uplink_rate(bandwidth_hz, self.snr_linear),
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.snr_linear > 0.0 && self.snr_linear.is_finite()) {
            return Err(domain("snr_linear", self.snr_linear, "positive and finite"));
        }
        if let Some(link) = &self.physical {
            let expected = snr_from_physical(link)?;
            if ((self.snr_linear - expected) / expected).abs() > 1e-9 {
                return Err(domain(
                    "snr_linear",
                    self.snr_linear,
                    "must match the physical link parameters",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
}
