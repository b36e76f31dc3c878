use super::{SelectionError, SelectionProblem, SelectionResult};
use crate::photo::PhotoId;

pub const DEFAULT_MAX_EXACT_PHOTOS: usize = 20;

/// Dense bit set over the problem's local cell indices.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64).max(1)])
    }

    fn from_indices(len: usize, idx: &[usize]) -> Self {
        let mut b = Self::empty(len);
        for &i in idx {
            b.0[i / 64] |= 1 << (i % 64);
        }
        b
    }

    fn union(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }

    fn union_count(&self, other: &Bits) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

struct Best {
    cost: f64,
    ids: Vec<PhotoId>,
    indices: Vec<usize>,
}

impl Best {
    /// Lower cost, then fewer photos, then lexicographically smaller ids.
    fn improved_by(&self, cost: f64, ids: &[PhotoId]) -> bool {
        if cost != self.cost {
            return cost < self.cost;
        }
        if ids.len() != self.ids.len() {
            return ids.len() < self.ids.len();
        }
        ids < self.ids.as_slice()
    }
}

struct Search<'a> {
    problem: &'a SelectionProblem,
    order: Vec<usize>,
    sets: Vec<Bits>,
    suffix: Vec<Bits>,
    required: usize,
    best: Option<Best>,
    stack: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, pos: usize, covered: &Bits, cost: f64) {
        if let Some(best) = &self.best {
            if cost > best.cost {
                return;
            }
        }
        if covered.count() >= self.required {
            let mut ids: Vec<PhotoId> = self
                .stack
                .iter()
                .map(|&i| self.problem.photo_id(i))
                .collect();
            ids.sort();
            if self.best.as_ref().is_none_or(|b| b.improved_by(cost, &ids)) {
                self.best = Some(Best {
                    cost,
                    ids,
                    indices: self.stack.clone(),
                });
            }
            return;
        }
        if pos == self.order.len() || covered.union_count(&self.suffix[pos]) < self.required {
            return;
        }
        let idx = self.order[pos];
        self.stack.push(idx);
        let with = covered.union(&self.sets[pos]);
        self.run(pos + 1, &with, cost + self.problem.price(idx));
        self.stack.pop();
        self.run(pos + 1, covered, cost);
    }
}

/// Minimum-cost feasible subset by exhaustive search with cost and
/// reachability pruning.
///
/// Ties are broken by fewer photos, then by the lexicographically smallest
/// sorted id list. `chosen_ids` is returned in ascending id order.
pub fn exact_select(
    problem: &SelectionProblem,
    max_photos: usize,
) -> Result<SelectionResult, SelectionError> {
    let n = problem.photo_count();
    if n > max_photos {
        return Err(SelectionError::TooLarge {
            photos: n,
            max: max_photos,
        });
    }
    let universe = problem.universe_size();
    let mut order: Vec<usize> = (0..n).filter(|&i| !problem.members(i).is_empty()).collect();
    order.sort_by_key(|&i| problem.photo_id(i));
    let sets: Vec<Bits> = order
        .iter()
        .map(|&i| Bits::from_indices(universe, problem.members(i)))
        .collect();
    let mut suffix = vec![Bits::empty(universe); order.len() + 1];
    for pos in (0..order.len()).rev() {
        suffix[pos] = suffix[pos + 1].union(&sets[pos]);
    }
    let mut search = Search {
        problem,
        order,
        sets,
        suffix,
        required: problem.required(),
        best: None,
        stack: Vec::new(),
    };
    search.run(0, &Bits::empty(universe), 0.0);

    Ok(match search.best {
        Some(best) => {
            let mut indices = best.indices;
            indices.sort_by_key(|&i| problem.photo_id(i));
            problem.result_for(&indices)
        }
        None => {
            let mut all: Vec<usize> = (0..n).filter(|&i| !problem.members(i).is_empty()).collect();
            all.sort_by_key(|&i| problem.photo_id(i));
            let mut res = problem.result_for(&all);
            res.feasible = false;
            res
        }
    })
}
