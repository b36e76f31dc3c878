//! Cost-aware partial-cover photo selection.
//!
//! Given each photo's coverage of the target area and its price, pick a set
//! of photos covering at least `⌈η · |target|⌉` cells at minimum total price.
//! [`greedy_select`] is the production selector; [`exact_select`] is an
//! exhaustive oracle for small instances and [`audit_ratio`] checks the
//! greedy against the harmonic bound.

mod audit;
mod baselines;
mod exact;
mod greedy;

pub use audit::{audit_ratio, harmonic, random_instance, AuditRecord, AuditReport, InstanceShape};
pub use baselines::{cluster_select, random_select, CLUSTER_ITERATIONS};
pub use exact::{exact_select, DEFAULT_MAX_EXACT_PHOTOS};
pub use greedy::greedy_select;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::geometry::{Cell, CoverageSet};
use crate::photo::PhotoId;
use crate::pricing::PriceTag;

/// Slack applied before taking the ceiling of `η · |target|`, so that
/// products such as `0.95 · 20` that land a hair above an integer are not
/// rounded up.
const REQUIRED_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("coverage ratio eta = {0} outside (0, 1]")]
    Eta(f64),
    #[error("photo {0} has no price")]
    MissingPrice(PhotoId),
    #[error("photo {0} appears more than once")]
    DuplicatePhoto(PhotoId),
    #[error("photo {photo_id} has invalid price {price}")]
    Price { photo_id: PhotoId, price: f64 },
    #[error("coverage sets span {covered} cells but the target has only {target_size}")]
    TargetSize { covered: usize, target_size: usize },
    #[error("exact search over {photos} photos exceeds the limit of {max}")]
    TooLarge { photos: usize, max: usize },
    #[error("cannot pick {count} photos out of {available}")]
    Count { count: usize, available: usize },
    #[error("photo {0} is not part of the selection problem")]
    UnknownPhoto(PhotoId),
    #[error("audit requires both selections to be feasible")]
    AuditInfeasible,
}

/// Required cell count `⌈η · target_size⌉`.
pub fn required_cells(eta: f64, target_size: usize) -> usize {
    let raw = (eta * target_size as f64 - REQUIRED_SLACK).ceil();
    (raw.max(0.0) as usize).min(target_size)
}

/// A validated partial-cover instance.
///
/// Cells are re-indexed densely, and every photo keeps its sorted list of
/// local cell indices.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    coverage_sets: Vec<CoverageSet>,
    prices: Vec<f64>,
    target_size: usize,
    eta: f64,
    required: usize,
    cells: Vec<Cell>,
    members: Vec<Vec<usize>>,
}

impl SelectionProblem {
    pub fn new(
        coverage_sets: Vec<CoverageSet>,
        prices: &[PriceTag],
        target_size: usize,
        eta: f64,
    ) -> Result<Self, SelectionError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(SelectionError::Eta(eta));
        }
        let mut by_id = BTreeMap::new();
        for tag in prices {
            by_id.insert(tag.photo_id, tag.price);
        }
        let mut seen = BTreeSet::new();
        let mut aligned = Vec::with_capacity(coverage_sets.len());
        for set in &coverage_sets {
            if !seen.insert(set.photo_id) {
                return Err(SelectionError::DuplicatePhoto(set.photo_id));
            }
            let price = *by_id
                .get(&set.photo_id)
                .ok_or(SelectionError::MissingPrice(set.photo_id))?;
            if !(price >= 0.0 && price.is_finite()) {
                return Err(SelectionError::Price {
                    photo_id: set.photo_id,
                    price,
                });
            }
            aligned.push(price);
        }
        let universe: BTreeSet<Cell> = coverage_sets
            .iter()
            .flat_map(|s| s.cells.iter().copied())
            .collect();
        if universe.len() > target_size {
            return Err(SelectionError::TargetSize {
                covered: universe.len(),
                target_size,
            });
        }
        let cells: Vec<Cell> = universe.into_iter().collect();
        let local: BTreeMap<Cell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let members = coverage_sets
            .iter()
            .map(|s| s.cells.iter().map(|c| local[c]).collect())
            .collect();
        Ok(SelectionProblem {
            coverage_sets,
            prices: aligned,
            target_size,
            eta,
            required: required_cells(eta, target_size),
            cells,
            members,
        })
    }

    pub fn coverage_sets(&self) -> &[CoverageSet] {
        &self.coverage_sets
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `⌈η · |target|⌉`.
    pub fn required(&self) -> usize {
        self.required
    }

    pub fn photo_count(&self) -> usize {
        self.coverage_sets.len()
    }

    pub fn photo_id(&self, idx: usize) -> PhotoId {
        self.coverage_sets[idx].photo_id
    }

    pub fn price(&self, idx: usize) -> f64 {
        self.prices[idx]
    }

    pub fn index_of(&self, id: PhotoId) -> Option<usize> {
        self.coverage_sets.iter().position(|s| s.photo_id == id)
    }

    /// Same instance with every price multiplied by `factor`.
    pub fn with_scaled_prices(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        scaled.prices.iter_mut().for_each(|p| *p *= factor);
        scaled
    }

    /// Same instance with a different coverage ratio.
    pub fn with_eta(&self, eta: f64) -> Result<Self, SelectionError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(SelectionError::Eta(eta));
        }
        let mut other = self.clone();
        other.eta = eta;
        other.required = required_cells(eta, self.target_size);
        Ok(other)
    }

    pub(crate) fn members(&self, idx: usize) -> &[usize] {
        &self.members[idx]
    }

    pub(crate) fn universe_size(&self) -> usize {
        self.cells.len()
    }

    /// Sum of prices taken in ascending photo-id order, so that equal sets
    /// always produce bitwise-equal costs.
    pub(crate) fn cost_of(&self, indices: &[usize]) -> f64 {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_by_key(|&i| self.photo_id(i));
        sorted.iter().map(|&i| self.prices[i]).sum()
    }

    /// Builds the result record for an arbitrary list of photo indices,
    /// keeping the given order.
    pub(crate) fn result_for(&self, indices: &[usize]) -> SelectionResult {
        let covered: BTreeSet<Cell> = indices
            .iter()
            .flat_map(|&i| self.members[i].iter().map(|&c| self.cells[c]))
            .collect();
        let coverage_count = covered.len();
        SelectionResult {
            chosen_ids: indices.iter().map(|&i| self.photo_id(i)).collect(),
            total_cost: self.cost_of(indices),
            covered_cells: covered,
            coverage_count,
            feasible: coverage_count >= self.required,
        }
    }

    /// Evaluates a selection given by photo ids.
    pub fn evaluate(&self, ids: &[PhotoId]) -> Result<SelectionResult, SelectionError> {
        let indices = ids
            .iter()
            .map(|&id| self.index_of(id).ok_or(SelectionError::UnknownPhoto(id)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.result_for(&indices))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Photo ids in the order they were picked.
    pub chosen_ids: Vec<PhotoId>,
    pub total_cost: f64,
    pub covered_cells: BTreeSet<Cell>,
    pub coverage_count: usize,
    pub feasible: bool,
}

impl SelectionResult {
    pub fn photo_count(&self) -> usize {
        self.chosen_ids.len()
    }

    pub fn coverage_ratio(&self, target_size: usize) -> f64 {
        if target_size == 0 {
            0.0
        } else {
            self.coverage_count as f64 / target_size as f64
        }
    }
}
