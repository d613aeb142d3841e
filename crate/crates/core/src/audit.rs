//! Table scans that certify properties a correct solution must have.
//!
//! Each audit returns every violation it finds rather than stopping at the
//! first, so a failed audit doubles as a debugging listing.

use crate::game::{ModalGame, Value};
use crate::lattice::{crossing_cells, minkowski_dilate, MoveSet, StateVec};
use crate::solver::{neighbourhood_clause, Solution};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Audit<V> {
    pub violations: Vec<V>,
}

impl<V> Audit<V> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<V> FromIterator<V> for Audit<V> {
    fn from_iter<I: IntoIterator<Item = V>>(iter: I) -> Self {
        Self {
            violations: iter.into_iter().collect(),
        }
    }
}

/// `V(x, k-1)` finite but larger than `V(x, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotonicityViolation {
    pub x: StateVec,
    pub k: usize,
    pub earlier: Value,
    pub later: Value,
}

/// A controlled step from a winning state whose unit-step path touches an
/// unsafe position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldViolation {
    pub x: StateVec,
    pub k: usize,
    pub u: StateVec,
    pub d: StateVec,
    pub hit: StateVec,
}

/// The neighbourhood clause held at `k` but not at `l < k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixpointViolation {
    pub k: usize,
    pub l: usize,
}

/// A controlled step from `W(k)` that leaves `W(k+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureViolation {
    pub x: StateVec,
    pub k: usize,
    pub u: StateVec,
    pub d: StateVec,
    pub next: StateVec,
}

/// `V(x, k-1) < ⊤ ⟹ V(x, k-1) <= V(x, k)` for `k` in `2..=N`.
pub fn monotonicity_audit(sol: &Solution) -> Audit<MonotonicityViolation> {
    let t = sol.table();
    let scope = t.game().scope();
    let mut out = Vec::new();
    for k in 2..=t.horizon() {
        for cell in 0..t.cell_count() {
            let (earlier, later) = (t.value_at(cell, k - 1), t.value_at(cell, k));
            if earlier.is_finite() && earlier > later {
                out.push(MonotonicityViolation {
                    x: scope.point(cell),
                    k,
                    earlier,
                    later,
                });
            }
        }
    }
    Audit { violations: out }
}

/// From every winning `(x, k)` the argmin control keeps the whole unit-step
/// path to each successor clear of `α` in position projection.
pub fn vector_field_certificate(sol: &Solution, g: &ModalGame) -> Audit<FieldViolation> {
    let t = sol.table();
    let axes = g.position_axes();
    let bad = g.unsafe_region().project(&axes);
    let mut out = Vec::new();
    if bad.is_empty() {
        return Audit { violations: out };
    }
    let scope = t.game().scope();
    for k in 1..=t.horizon() {
        for cell in 0..t.cell_count() {
            if !t.value_at(cell, k).is_finite() {
                continue;
            }
            let Some(ui) = t.argmin_index(cell, k) else {
                continue;
            };
            let x = scope.point(cell);
            let u = g.controls().get(ui);
            for d in g.disturbances().iter() {
                let next = g.successor(&x, u, d, k);
                let path = crossing_cells(&x, &next).into_iter().chain([next]);
                if let Some(hit) = path.map(|c| c.project(&axes)).find(|p| bad.contains(p)) {
                    out.push(FieldViolation {
                        x: x.clone(),
                        k,
                        u: u.clone(),
                        d: d.clone(),
                        hit,
                    });
                }
            }
        }
    }
    Audit { violations: out }
}

/// The neighbourhood clause of the fixpoint test is inherited downward.
pub fn fixpoint_implication_audit(sol: &Solution, x0: &[i64]) -> Audit<FixpointViolation> {
    let n = sol.horizon();
    let holds: Vec<bool> = (1..=n).map(|k| neighbourhood_clause(sol, k, x0)).collect();
    let mut out = Vec::new();
    for k in 1..=n {
        if holds[k - 1] {
            out.extend(
                (1..k)
                    .filter(|&l| !holds[l - 1])
                    .map(|l| FixpointViolation { k, l }),
            );
        }
    }
    Audit { violations: out }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantReport {
    /// Winning states at stage 1 inside `α ⊕ [±δ]`.
    pub inclusion: Audit<StateVec>,
    pub closure: Audit<ClosureViolation>,
}

/// Checks `W(1) ∩ (α ⊕ [±δ]) = ∅` and one-step closure
/// `x ∈ W(k) ⟹ x^{u*d} ∈ W(k+1)` for every disturbance, separately.
///
/// Closure is checked on the computed stages only; quasi-stationary copies
/// below the fixpoint stage are not backups of their successor row.
pub fn invariant_set_audit(sol: &Solution, g: &ModalGame, delta: u64) -> InvariantReport {
    let t = sol.table();
    let scope = t.game().scope();
    let halo = minkowski_dilate(g.unsafe_region(), &MoveSet::cube(g.dim(), delta as i64), None)
        .expect("unsafe region lives in state space");
    let inclusion = (0..t.cell_count())
        .filter(|&c| t.value_at(c, 1).is_finite())
        .map(|c| scope.point(c))
        .filter(|x| halo.contains(x))
        .collect();

    let mut closure = Vec::new();
    for k in *sol.stages_computed().start()..t.horizon() {
        for cell in 0..t.cell_count() {
            if !t.value_at(cell, k).is_finite() {
                continue;
            }
            let Some(ui) = t.argmin_index(cell, k) else {
                continue;
            };
            let x = scope.point(cell);
            let u = g.controls().get(ui);
            for d in g.disturbances().iter() {
                let next = g.successor(&x, u, d, k);
                if !t.value_or_top(&next, k + 1).is_finite() {
                    closure.push(ClosureViolation {
                        x: x.clone(),
                        k,
                        u: u.clone(),
                        d: d.clone(),
                        next,
                    });
                }
            }
        }
    }
    InvariantReport {
        inclusion,
        closure: Audit { violations: closure },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::solver::{ddp_solve, FixpointMode, SolveOptions};

    fn solve(g: &ModalGame) -> Solution {
        ddp_solve(g, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn monotonicity_examples() {
        let g = fixtures::line5();
        let mut sol = solve(&g);
        assert!(monotonicity_audit(&sol).passed());

        sol.table_mut().set_value(&[3], 3, Value::Finite(5)).unwrap();
        let a = monotonicity_audit(&sol);
        assert_eq!(
            a.violations,
            vec![MonotonicityViolation {
                x: [3].into(),
                k: 4,
                earlier: Value::Finite(5),
                later: Value::Finite(1),
            }]
        );

        let one = g.with_scope_and_horizon(g.scope().clone(), 1).unwrap();
        assert!(monotonicity_audit(&solve(&one)).passed());
    }

    #[test]
    fn vector_field_examples() {
        let line = fixtures::line5();
        assert!(vector_field_certificate(&solve(&line), &line).passed());
        let gap = fixtures::gap9_segment();
        assert!(vector_field_certificate(&solve(&gap), &gap).passed());

        let shielded = fixtures::jump_wall();
        assert!(vector_field_certificate(&solve(&shielded), &shielded).passed());
        let bare = shielded.with_crossing_shield(false);
        let a = vector_field_certificate(&solve(&bare), &bare);
        assert!(!a.passed());
        assert!(a.violations.iter().all(|v| v.hit == StateVec::from([2])));
    }

    #[test]
    fn fixpoint_implication_examples() {
        let g = fixtures::line5();
        let sol = solve(&g);
        assert!(fixpoint_implication_audit(&sol, &[0]).passed());
        assert!(fixpoint_implication_audit(&sol, &[40]).passed());
        let fp = ddp_solve(
            &g,
            &SolveOptions::with_fixpoint(FixpointMode::Approximate([3].into())),
        )
        .unwrap();
        assert!(fixpoint_implication_audit(&fp, &[3]).passed());
    }

    #[test]
    fn invariant_set_examples() {
        let g = fixtures::line5();
        let r = invariant_set_audit(&solve(&g), &g, 1);
        assert!(r.inclusion.passed() && r.closure.passed());

        let gap = fixtures::gap9_segment();
        let r = invariant_set_audit(&solve(&gap), &gap, 1);
        assert!(r.closure.passed());
    }
}
