//! Empirical check of the greedy selector against the harmonic bound
//! `F_k = 1 + 1/2 + ... + 1/k`, `k` being the required cell count.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SelectionError, SelectionProblem, SelectionResult};
use crate::geometry::{Cell, CoverageSet};
use crate::photo::PhotoId;
use crate::pricing::PriceTag;

const BOUND_SLACK: f64 = 1e-9;

pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub greedy_cost: f64,
    pub exact_cost: f64,
    pub ratio: f64,
    pub bound: f64,
    pub violation: bool,
}

/// One serialized audit line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub instance_id: u64,
    pub greedy_cost: f64,
    pub exact_cost: f64,
    pub ratio: f64,
    pub bound: f64,
}

impl AuditReport {
    pub fn record(&self, instance_id: u64) -> AuditRecord {
        AuditRecord {
            instance_id,
            greedy_cost: self.greedy_cost,
            exact_cost: self.exact_cost,
            ratio: self.ratio,
            bound: self.bound,
        }
    }
}

pub fn audit_ratio(
    greedy: &SelectionResult,
    exact: &SelectionResult,
    required: usize,
) -> Result<AuditReport, SelectionError> {
    if !(greedy.feasible && exact.feasible) {
        return Err(SelectionError::AuditInfeasible);
    }
    let ratio = if exact.total_cost > 0.0 {
        greedy.total_cost / exact.total_cost
    } else if greedy.total_cost == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let bound = harmonic(required);
    Ok(AuditReport {
        greedy_cost: greedy.total_cost,
        exact_cost: exact.total_cost,
        ratio,
        bound,
        violation: ratio > bound + BOUND_SLACK,
    })
}

/// Size limits for [`random_instance`]; ranges are inclusive.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub photos: (usize, usize),
    pub cells: (usize, usize),
    /// Give every uncovered cell to some photo so the full target is
    /// reachable.
    pub ensure_feasible: bool,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            photos: (2, 12),
            cells: (4, 40),
            ensure_feasible: true,
        }
    }
}

/// Random abstract partial-cover instance with prices in (0, 1].
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, shape: &InstanceShape) -> SelectionProblem {
    let n = rng.random_range(shape.photos.0..=shape.photos.1);
    let u = rng.random_range(shape.cells.0..=shape.cells.1);
    let density = rng.random_range(0.08..0.45);
    let mut sets: Vec<Vec<u32>> = (0..n)
        .map(|_| (0..u as u32).filter(|_| rng.random_bool(density)).collect())
        .collect();
    if shape.ensure_feasible {
        for c in 0..u as u32 {
            if !sets.iter().any(|s| s.contains(&c)) {
                let owner = rng.random_range(0..n);
                sets[owner].push(c);
            }
        }
    }
    let coverage: Vec<CoverageSet> = sets
        .into_iter()
        .enumerate()
        .map(|(i, cells)| CoverageSet {
            photo_id: PhotoId(i as u32),
            cells: cells.into_iter().map(|c| Cell::new(c, 0, 0)).collect(),
        })
        .collect();
    let prices: Vec<PriceTag> = (0..n)
        .map(|i| PriceTag {
            photo_id: PhotoId(i as u32),
            price: 1.0 - rng.random::<f64>(),
        })
        .collect();
    let eta = rng.random_range(0.3..=1.0);
    SelectionProblem::new(coverage, &prices, u, eta).expect("generated instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{exact_select, greedy_select};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn identical_results_give_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_instance(&mut rng, &InstanceShape::default());
        let g = greedy_select(&p);
        let report = audit_ratio(&g, &g, p.required()).unwrap();
        assert_eq!(report.ratio, 1.0);
        assert!(!report.violation);
        let record = report.record(7);
        assert_eq!(record.instance_id, 7);
        let json = serde_json::to_string(&record).unwrap();
        assert!(json.starts_with("{\"instance_id\":7,\"greedy_cost\":"));
    }

    #[test]
    fn infeasible_inputs_are_rejected() {
        let r = SelectionResult {
            chosen_ids: vec![],
            total_cost: 0.0,
            covered_cells: Default::default(),
            coverage_count: 0,
            feasible: false,
        };
        assert_eq!(audit_ratio(&r, &r, 3), Err(SelectionError::AuditInfeasible));
    }

    #[test]
    fn ratio_above_bound_is_flagged() {
        let mk = |cost| SelectionResult {
            chosen_ids: vec![],
            total_cost: cost,
            covered_cells: Default::default(),
            coverage_count: 1,
            feasible: true,
        };
        let report = audit_ratio(&mk(2.0), &mk(1.0), 1).unwrap();
        assert!(report.violation);
        let report = audit_ratio(&mk(1.5), &mk(1.0), 2).unwrap();
        assert!(!report.violation);
    }

    #[test]
    fn seeded_sweep_has_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let p = random_instance(&mut rng, &InstanceShape::default());
            let g = greedy_select(&p);
            let e = exact_select(&p, 20).unwrap();
            let report = audit_ratio(&g, &e, p.required()).unwrap();
            assert!(!report.violation, "{report:?}");
            assert!(report.ratio >= 1.0 - 1e-12);
        }
    }
}
