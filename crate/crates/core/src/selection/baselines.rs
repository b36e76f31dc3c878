//! Baseline selectors: uniform random sampling and pose clustering.

use rand::Rng;

use super::{SelectionError, SelectionProblem, SelectionResult};
use crate::photo::PhotoMeta;

pub const CLUSTER_ITERATIONS: usize = 50;

/// Uniform sample of `count` photos without replacement. Feasibility is
/// reported, not enforced.
pub fn random_select<R: Rng + ?Sized>(
    problem: &SelectionProblem,
    count: usize,
    rng: &mut R,
) -> Result<SelectionResult, SelectionError> {
    let n = problem.photo_count();
    if count > n {
        return Err(SelectionError::Count {
            count,
            available: n,
        });
    }
    let picks = rand::seq::index::sample(rng, n, count).into_vec();
    Ok(problem.result_for(&picks))
}

type Feature = [f64; 5];

/// Position and viewing angles of a photo.
fn raw_feature(photo: &PhotoMeta) -> Feature {
    [
        photo.location.x,
        photo.location.y,
        photo.location.z,
        photo.direction.azimuth(),
        photo.direction.elevation(),
    ]
}

/// Rescales every dimension to zero mean and unit variance. Constant
/// dimensions are only centered.
fn standardize(raw: &[Feature]) -> Vec<Feature> {
    let n = raw.len() as f64;
    let mut mean = [0.0; 5];
    let mut sd = [0.0; 5];
    for f in raw {
        for d in 0..5 {
            mean[d] += f[d] / n;
        }
    }
    for f in raw {
        for d in 0..5 {
            sd[d] += (f[d] - mean[d]).powi(2) / n;
        }
    }
    for s in &mut sd {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    raw.iter()
        .map(|f| std::array::from_fn(|d| (f[d] - mean[d]) / sd[d]))
        .collect()
}

fn dist2(a: &Feature, b: &Feature) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding. Falls back to a uniform pick among unchosen points
/// once every point coincides with some center.
fn seed_centers<R: Rng + ?Sized>(points: &[Feature], k: usize, rng: &mut R) -> Vec<Feature> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first]];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        centers.push(points[next]);
        for (w, p) in nearest.iter_mut().zip(points) {
            *w = w.min(dist2(p, &points[next]));
        }
    }
    centers
}

fn closest(centers: &[Feature], p: &Feature) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Centroids after a fixed number of Lloyd iterations. Empty clusters keep
/// their previous centroid.
pub(crate) fn kmeans<R: Rng + ?Sized>(points: &[Feature], k: usize, rng: &mut R) -> Vec<Feature> {
    let mut centers = seed_centers(points, k, rng);
    for _ in 0..CLUSTER_ITERATIONS {
        let mut sums = vec![[0.0; 5]; k];
        let mut counts = vec![0usize; k];
        for p in points {
            let c = closest(&centers, p);
            counts[c] += 1;
            for d in 0..5 {
                sums[c][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = std::array::from_fn(|d| sums[c][d] / counts[c] as f64);
            }
        }
    }
    centers
}

/// Clusters photos on (x, y, z, azimuth, elevation) into `count` groups and
/// takes the photo closest to each centroid. Every centroid claims a
/// distinct photo, so exactly `count` photos are returned.
pub fn cluster_select<R: Rng + ?Sized>(
    photos: &[PhotoMeta],
    problem: &SelectionProblem,
    count: usize,
    rng: &mut R,
) -> Result<SelectionResult, SelectionError> {
    if count == 0 || count > photos.len() {
        return Err(SelectionError::Count {
            count,
            available: photos.len(),
        });
    }
    let indices = photos
        .iter()
        .map(|p| {
            problem
                .index_of(p.photo_id)
                .ok_or(SelectionError::UnknownPhoto(p.photo_id))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let raw: Vec<Feature> = photos.iter().map(raw_feature).collect();
    let points = standardize(&raw);
    let centers = kmeans(&points, count, rng);
    let mut taken = vec![false; photos.len()];
    let mut picks = Vec::with_capacity(count);
    for center in &centers {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = dist2(p, center);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("count <= photos");
        taken[i] = true;
        picks.push(indices[i]);
    }
    Ok(problem.result_for(&picks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, CoverageSet, Direction3, Point3};
    use crate::photo::{PhotoBuilder, PhotoId};
    use crate::pricing::PriceTag;
    use crate::selection::test_support::problem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn random_select_edge_counts() {
        let p = problem(&[&[0], &[1], &[2], &[0, 1]], &[1.0; 4], 3, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let all = random_select(&p, 4, &mut rng).unwrap();
        let ids: BTreeSet<_> = all.chosen_ids.iter().copied().collect();
        assert_eq!(ids.len(), 4);
        assert!(random_select(&p, 0, &mut rng)
            .unwrap()
            .chosen_ids
            .is_empty());
        assert!(matches!(
            random_select(&p, 5, &mut rng),
            Err(SelectionError::Count { .. })
        ));
    }

    #[test]
    fn random_select_is_seed_reproducible() {
        let sets: Vec<Vec<u32>> = (0..30).map(|c| vec![c]).collect();
        let refs: Vec<&[u32]> = sets.iter().map(|s| s.as_slice()).collect();
        let p = problem(&refs, &[1.0; 30], 30, 1.0);
        let a = random_select(&p, 10, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = random_select(&p, 10, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let c = random_select(&p, 10, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chosen_ids, c.chosen_ids);
    }

    fn group_photos() -> Vec<PhotoMeta> {
        let mut photos = Vec::new();
        for n in 0..10u32 {
            let (base, dir) = if n < 5 {
                (Point3::new(0.0, 0.0, 1.5).unwrap(), Direction3::X)
            } else {
                (
                    Point3::new(40.0, 40.0, 1.5).unwrap(),
                    Direction3::normalized(-1.0, 0.0, 0.0).unwrap(),
                )
            };
            let jitter = n as f64 * 0.1;
            photos.push(
                PhotoBuilder::new(n, 1)
                    .location(base.offset(jitter, -jitter, 0.0))
                    .direction(dir)
                    .build()
                    .unwrap(),
            );
        }
        photos
    }

    fn problem_for(photos: &[PhotoMeta]) -> SelectionProblem {
        let sets = photos
            .iter()
            .map(|p| CoverageSet {
                photo_id: p.photo_id,
                cells: [Cell::new(p.photo_id.0, 0, 0)].into(),
            })
            .collect();
        let tags: Vec<PriceTag> = photos
            .iter()
            .map(|p| PriceTag {
                photo_id: p.photo_id,
                price: 1.0,
            })
            .collect();
        SelectionProblem::new(sets, &tags, photos.len(), 1.0).unwrap()
    }

    #[test]
    fn two_separated_groups_one_pick_each() {
        let photos = group_photos();
        let p = problem_for(&photos);
        for seed in 0..10 {
            let r = cluster_select(&photos, &p, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let groups: BTreeSet<bool> = r.chosen_ids.iter().map(|id| id.0 < 5).collect();
            assert_eq!(groups.len(), 2, "seed {seed}: {:?}", r.chosen_ids);
        }
    }

    #[test]
    fn all_clusters_select_everything() {
        let photos = group_photos();
        let p = problem_for(&photos);
        let r =
            cluster_select(&photos, &p, photos.len(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ids: BTreeSet<PhotoId> = r.chosen_ids.iter().copied().collect();
        assert_eq!(ids.len(), photos.len());
        assert!(r.feasible);
    }

    #[test]
    fn cluster_select_is_seed_reproducible() {
        let photos = group_photos();
        let p = problem_for(&photos);
        let a = cluster_select(&photos, &p, 4, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let b = cluster_select(&photos, &p, 4, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_still_yield_distinct_picks() {
        let photos: Vec<PhotoMeta> = (0..6)
            .map(|n| PhotoBuilder::new(n, 1).build().unwrap())
            .collect();
        let p = problem_for(&photos);
        let r = cluster_select(&photos, &p, 6, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ids: BTreeSet<PhotoId> = r.chosen_ids.iter().copied().collect();
        assert_eq!(ids.len(), 6);
    }
}
