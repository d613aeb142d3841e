//! Brute-force semantics of the finite-horizon reach-avoid game.
//!
//! Nothing here shares code paths with the solver beyond the game's dynamics:
//! the running cost is re-derived from the raw weights and regions, the
//! value is an unmemoised game-tree recursion, and the winning sets come
//! from a separate controllable-predecessor recursion.

use crate::error::{Error, Result};
use crate::game::{ModalGame, Value};
use crate::lattice::{Region, StateVec};

/// Intermediate point `t` of the unit-step path from `a` to `b`.
fn path_point(a: &[i64], b: &[i64], t: i64) -> Vec<i64> {
    a.iter()
        .zip(b)
        .map(|(&s, &e)| s + (e - s).signum() * t.min((e - s).abs()))
        .collect()
}

fn running_cost(g: &ModalGame, x: &[i64], u: &[i64], d: &[i64], next: &[i64]) -> Value {
    let goal = g.goal().contains(x);
    let bad = g.unsafe_region().contains(x);
    if goal && !bad {
        return Value::Finite(0);
    }
    if bad {
        return Value::Top;
    }
    if g.crossing_shield() {
        let steps = x.iter().zip(next).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
        for t in 1..steps {
            if g.unsafe_region().contains(&path_point(x, next, t)) {
                return Value::Top;
            }
        }
    }
    let w = g.weights();
    let mut sum: u128 = 0;
    for (i, &c) in x.iter().enumerate() {
        sum += w.p[i] as u128 * (c as i128 * c as i128) as u128;
    }
    for (i, &c) in u.iter().enumerate() {
        sum += w.q[i] as u128 * (c as i128 * c as i128) as u128;
    }
    for (i, &c) in d.iter().enumerate() {
        sum += w.r[i] as u128 * (c as i128 * c as i128) as u128;
    }
    if sum >= g.top_bound() as u128 {
        Value::Top
    } else {
        Value::Finite(sum as u64)
    }
}

fn terminal(g: &ModalGame, x: &[i64]) -> Value {
    if g.scope().contains(x) && g.goal().contains(x) && !g.unsafe_region().contains(x) {
        Value::Finite(0)
    } else {
        Value::Top
    }
}

fn add(a: Value, b: Value, top: u64) -> Value {
    match (a, b) {
        (Value::Finite(a), Value::Finite(b)) if (a as u128 + b as u128) < top as u128 => Value::Finite(a + b),
        _ => Value::Top,
    }
}

struct Search<'a> {
    game: &'a ModalGame,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    /// `bound` is the best value the caller can already guarantee; once a
    /// disturbance pushes a control's cost to it, that control is dropped.
    fn value(&mut self, x: &[i64], k: usize, bound: Value) -> Result<Value> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::NodeBudgetExceeded(self.budget));
        }
        let g = self.game;
        if k >= g.horizon() {
            return Ok(terminal(g, x));
        }
        if !g.scope().contains(x) {
            return Ok(Value::Top);
        }
        let mut best = Value::Top;
        for u in g.controls().iter() {
            let cap = best.min(bound);
            let mut worst = Value::Finite(0);
            for d in g.disturbances().iter() {
                let next = g.successor(x, u, d, k);
                let stage = running_cost(g, x, u, d, &next);
                let total = if stage.is_top() {
                    Value::Top
                } else {
                    add(stage, self.value(&next, k + 1, Value::Top)?, g.top_bound())
                };
                worst = worst.max(total);
                if worst >= cap && cap != Value::Top || worst.is_top() {
                    break;
                }
            }
            best = best.min(worst);
        }
        Ok(best)
    }
}

/// Game-tree value of `x` at stage `k`, refusing after `budget` nodes.
pub fn brute_force_value(g: &ModalGame, x: &[i64], k: usize, budget: u64) -> Result<Value> {
    let mut s = Search {
        game: g,
        nodes: 0,
        budget,
    };
    s.value(x, k, Value::Top)
}

/// Controllable-predecessor sets: `T(N)` is the safe goal, and `T(k-1)`
/// holds the safe cells with a control whose every disturbance lands in
/// `T(k)` at a finite running cost.
pub fn reach_avoid_set(g: &ModalGame, k: usize) -> Region {
    let scope = g.scope();
    let mut target: Vec<StateVec> = scope
        .iter()
        .filter(|x| g.goal().contains(x) && !g.unsafe_region().contains(x))
        .collect();
    let mut stage = g.horizon();
    while stage > k.max(1) {
        stage -= 1;
        let inside = |y: &[i64]| target.binary_search_by(|t| t.coords().cmp(y)).is_ok();
        let mut prev = Vec::new();
        for x in scope.iter() {
            if g.unsafe_region().contains(&x) {
                continue;
            }
            let ok = g.controls().iter().any(|u| {
                g.disturbances().iter().all(|d| {
                    let next = g.successor(&x, u, d, stage);
                    running_cost(g, &x, u, d, &next).is_finite() && inside(&next)
                })
            });
            if ok {
                prev.push(x);
            }
        }
        target = prev;
    }
    Region::from_cells(scope.dim(), target).expect("scope cells share a dimension")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn line5_values() {
        let g = fixtures::line5();
        assert_eq!(
            brute_force_value(&g, &[0], 1, 1_000_000).unwrap(),
            Value::Finite(4)
        );
        assert_eq!(brute_force_value(&g, &[0], 2, 1_000_000).unwrap(), Value::Top);
        assert_eq!(
            brute_force_value(&g, &[3], 4, 1_000_000).unwrap(),
            Value::Finite(1)
        );
    }

    #[test]
    fn terminal_stage_is_phi() {
        let g = fixtures::line5();
        for p in 0..=4 {
            let expected = if p == 4 { Value::Finite(0) } else { Value::Top };
            assert_eq!(brute_force_value(&g, &[p], 5, 10).unwrap(), expected);
        }
    }

    #[test]
    fn unsafe_state_is_top() {
        let g = fixtures::gap9();
        for k in 1..g.horizon() {
            assert_eq!(brute_force_value(&g, &[4, 0], k, 10).unwrap(), Value::Top);
        }
    }

    #[test]
    fn node_budget_refuses() {
        let g = fixtures::gap9_segment();
        assert_eq!(
            brute_force_value(&g, &[5, 2], 1, 100),
            Err(Error::NodeBudgetExceeded(100))
        );
    }

    #[test]
    fn line5_sets() {
        let g = fixtures::line5();
        let cells = |r: Region| r.iter().map(|c| c[0]).collect::<Vec<_>>();
        assert_eq!(cells(reach_avoid_set(&g, 5)), vec![4]);
        assert_eq!(cells(reach_avoid_set(&g, 2)), vec![1, 2, 3, 4]);
        assert_eq!(cells(reach_avoid_set(&g, 1)), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn gap9_terminal_set() {
        let g = fixtures::gap9();
        let r = reach_avoid_set(&g, g.horizon());
        assert_eq!(
            r.iter().cloned().collect::<Vec<_>>(),
            vec![StateVec::from([8, 2])]
        );
    }
}
