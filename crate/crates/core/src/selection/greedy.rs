use super::{SelectionProblem, SelectionResult};
use crate::photo::PhotoId;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    idx: usize,
    marginal: usize,
    price: f64,
    id: PhotoId,
}

impl Candidate {
    /// Priority order: free photos first (larger marginal, then lower id),
    /// then highest marginal/price, then lower price, then lower id.
    fn beats(&self, other: &Candidate) -> bool {
        match (self.price == 0.0, other.price == 0.0) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => (self.marginal, other.id) > (other.marginal, self.id),
            (false, false) => {
                let a = self.marginal as f64 / self.price;
                let b = other.marginal as f64 / other.price;
                if a != b {
                    a > b
                } else if self.price != other.price {
                    self.price < other.price
                } else {
                    self.id < other.id
                }
            }
        }
    }
}

/// Greedy partial cover.
///
/// Each round scores every unpicked photo by `min(new cells, still
/// required) / price` and takes the best one, until the requirement is met.
/// The result is flagged infeasible, with the best-effort picks, when no
/// remaining photo adds a cell.
pub fn greedy_select(problem: &SelectionProblem) -> SelectionResult {
    let n = problem.photo_count();
    let mut uncovered = vec![true; problem.universe_size()];
    let mut picked = vec![false; n];
    let mut order = Vec::new();
    let mut remaining = problem.required();

    // photos that see no target cell can never be picked
    let candidates: Vec<usize> = (0..n).filter(|&i| !problem.members(i).is_empty()).collect();

    while remaining > 0 {
        let mut best: Option<(Candidate, usize)> = None;
        for &idx in &candidates {
            if picked[idx] {
                continue;
            }
            let gain = problem
                .members(idx)
                .iter()
                .filter(|&&c| uncovered[c])
                .count();
            let marginal = gain.min(remaining);
            if marginal == 0 {
                continue;
            }
            let cand = Candidate {
                idx,
                marginal,
                price: problem.price(idx),
                id: problem.photo_id(idx),
            };
            if best.as_ref().is_none_or(|(b, _)| cand.beats(b)) {
                best = Some((cand, gain));
            }
        }
        let Some((choice, gain)) = best else {
            break;
        };
        picked[choice.idx] = true;
        order.push(choice.idx);
        for &c in problem.members(choice.idx) {
            uncovered[c] = false;
        }
        remaining = remaining.saturating_sub(gain);
    }

    problem.result_for(&order)
}
