//! Photo pricing.
//!
//! `price = ω · ρ · (t0 − t) / (D · SNR)` with ρ in megapixels, freshness in
//! minutes, D in megabytes and SNR linear. Stale photos cost more under this
//! formula; that is kept as-is.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::channel::ChannelState;
pub use crate::photo::{ParticipantId, PhotoId, PhotoMeta};

pub const DEFAULT_OMEGA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("photo {photo_id} taken at {taken_at_min} min is later than now ({now_min} min)")]
    Staleness {
        photo_id: PhotoId,
        taken_at_min: f64,
        now_min: f64,
    },
    #[error("price scale omega = {0} must be positive and finite")]
    Omega(f64),
    #[error("participant {0} has no channel state")]
    MissingChannel(ParticipantId),
    #[error("channel SNR {0} must be positive")]
    Snr(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTag {
    pub photo_id: PhotoId,
    pub price: f64,
}

pub fn price_photo(
    photo: &PhotoMeta,
    channel: &ChannelState,
    now_min: f64,
    omega: f64,
) -> Result<PriceTag, PricingError> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(PricingError::Omega(omega));
    }
    if !(channel.snr_linear > 0.0) {
        return Err(PricingError::Snr(channel.snr_linear));
    }
    if now_min < photo.taken_at_min {
        return Err(PricingError::Staleness {
            photo_id: photo.photo_id,
            taken_at_min: photo.taken_at_min,
            now_min,
        });
    }
    let freshness = now_min - photo.taken_at_min;
    Ok(PriceTag {
        photo_id: photo.photo_id,
        price: omega * photo.resolution_mp * freshness / (photo.size_mb * channel.snr_linear),
    })
}

/// Prices every photo with its participant's channel, preserving order.
pub fn price_all(
    photos: &[PhotoMeta],
    channels: &BTreeMap<ParticipantId, ChannelState>,
    now_min: f64,
    omega: f64,
) -> Result<Vec<PriceTag>, PricingError> {
    photos
        .iter()
        .map(|photo| {
            let channel = channels
                .get(&photo.participant_id)
                .ok_or(PricingError::MissingChannel(photo.participant_id))?;
            price_photo(photo, channel, now_min, omega)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photo::PhotoBuilder;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snr(v: f64) -> ChannelState {
        ChannelState::from_linear(v).unwrap()
    }

    #[test]
    fn hand_evaluated_price() {
        let photo = PhotoBuilder::new(1, 1)
            .resolution_mp(12.0)
            .size_mb(5.0)
            .taken_at_min(100.0)
            .build()
            .unwrap();
        let tag = price_photo(&photo, &snr(100.0), 105.0, 0.1).unwrap();
        // 0.1 * 12 * 5 / (5 * 100)
        assert!((tag.price - 0.012).abs() < 1e-15);
        assert_eq!(tag.photo_id, PhotoId(1));
    }

    #[test]
    fn just_taken_photo_is_free() {
        let photo = PhotoBuilder::new(1, 1).taken_at_min(42.0).build().unwrap();
        assert_eq!(
            price_photo(&photo, &snr(3.0), 42.0, 0.1).unwrap().price,
            0.0
        );
    }

    #[test]
    fn future_photo_is_rejected() {
        let photo = PhotoBuilder::new(1, 1).taken_at_min(42.0).build().unwrap();
        assert!(matches!(
            price_photo(&photo, &snr(3.0), 41.0, 0.1),
            Err(PricingError::Staleness { .. })
        ));
        assert_eq!(
            price_photo(&photo, &snr(3.0), 50.0, 0.0),
            Err(PricingError::Omega(0.0))
        );
    }

    #[test]
    fn price_all_plumbing() {
        let channels = BTreeMap::from([(ParticipantId(1), snr(10.0))]);
        assert!(price_all(&[], &channels, 0.0, 0.1).unwrap().is_empty());
        let photo = PhotoBuilder::new(3, 1).build().unwrap();
        let all = price_all(std::slice::from_ref(&photo), &channels, 5.0, 0.1).unwrap();
        assert_eq!(
            all,
            vec![price_photo(&photo, &channels[&ParticipantId(1)], 5.0, 0.1).unwrap()]
        );
        let orphan = PhotoBuilder::new(4, 2).build().unwrap();
        assert_eq!(
            price_all(&[photo, orphan], &channels, 5.0, 0.1),
            Err(PricingError::MissingChannel(ParticipantId(2)))
        );
    }

    #[test]
    fn price_all_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let channels: BTreeMap<_, _> = (1..=4)
            .map(|m| (ParticipantId(m), snr(rng.random_range(1.0..1000.0))))
            .collect();
        let photos: Vec<_> = (0..20)
            .map(|n| {
                PhotoBuilder::new(n, 1 + n % 4)
                    .taken_at_min(rng.random_range(0.0..10.0))
                    .size_mb(rng.random_range(1.0..8.0))
                    .resolution_mp(rng.random_range(4.0..24.0))
                    .build()
                    .unwrap()
            })
            .collect();
        let tags = price_all(&photos, &channels, 10.0, 0.1).unwrap();
        for (photo, tag) in photos.iter().zip(&tags) {
            let s = channels[&photo.participant_id].snr_linear;
            let expected =
                0.1 * photo.resolution_mp * (10.0 - photo.taken_at_min) / (photo.size_mb * s);
            assert_eq!(tag.photo_id, photo.photo_id);
            assert!((tag.price - expected).abs() <= 1e-12 * expected.abs());
        }
    }

    proptest! {
        #[test]
        fn factor_two_perturbations(
            rho in 1.0..50.0f64, fresh in 0.01..10.0f64, d in 0.5..20.0f64,
            s in 0.01..1000.0f64, omega in 0.01..10.0f64,
        ) {
            let price = |rho: f64, fresh: f64, d: f64, s: f64, omega: f64| {
                let photo = PhotoBuilder::new(0, 1)
                    .resolution_mp(rho)
                    .size_mb(d)
                    .taken_at_min(100.0 - fresh)
                    .build()
                    .unwrap();
                price_photo(&photo, &snr(s), 100.0, omega).unwrap().price
            };
            let base = price(rho, fresh, d, s, omega);
            prop_assert!(base > 0.0);
            let rel = |a: f64, b: f64| ((a - b) / b).abs() < 1e-9;
            prop_assert!(rel(price(rho * 2.0, fresh, d, s, omega), 2.0 * base));
            prop_assert!(rel(price(rho, fresh * 2.0, d, s, omega), 2.0 * base));
            prop_assert!(rel(price(rho, fresh, d * 2.0, s, omega), 0.5 * base));
            prop_assert!(rel(price(rho, fresh, d, s * 2.0, omega), 0.5 * base));
            prop_assert!(rel(price(rho, fresh, d, s, omega * 2.0), 2.0 * base));
        }
    }
}
