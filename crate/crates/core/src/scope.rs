//! The synthesis hyper-policy: solve, and while the start state is not yet
//! winning, grow the scope and the horizon and solve again.

use crate::game::ModalGame;
use crate::lattice::{ScopeBox, StateVec};
use crate::solver::{ddp_solve, extract_policy, FixpointMode, Policy, PolicyMode, Solution, SolveOptions};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HyperPolicyConfig {
    pub delta: u64,
    pub initial_horizon: usize,
    /// Stages added per extension.
    pub horizon_step: usize,
    /// Cells added per axis and side per extension.
    pub scope_margin: u64,
    pub max_extensions: usize,
}

/// Dilates the scope by the margin (clipped to the arena) and lengthens the
/// horizon by the configured step.
pub fn extend(
    scope: &ScopeBox,
    horizon: usize,
    cfg: &HyperPolicyConfig,
    arena: &ScopeBox,
) -> (ScopeBox, usize) {
    (
        scope.dilate(cfg.scope_margin as i64, Some(arena)),
        horizon + cfg.horizon_step,
    )
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub policy: Policy,
    pub solution: Solution,
    pub extensions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unsolvable {
    pub scope: ScopeBox,
    pub horizon: usize,
    /// Winning cells at stage 1 in the last solve.
    pub region_size: usize,
    pub solves: usize,
    pub reason: String,
}

impl std::fmt::Display for Unsolvable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "unsolvable after {} solve(s): {} (scope {}..{}, horizon {}, {} winning cells at stage 1)",
            self.solves,
            self.reason,
            self.scope.lo(),
            self.scope.hi(),
            self.horizon,
            self.region_size
        )
    }
}

/// Solves `game` starting from `cfg.initial_horizon`, extending scope and
/// horizon until `x0` is winning at stage 1 or the extension budget is spent.
///
/// Performs at most `max_extensions + 1` solves.
pub fn hyper_policy_synthesize(
    cfg: &HyperPolicyConfig,
    game: &ModalGame,
    x0: &StateVec,
    arena: &ScopeBox,
) -> Result<Synthesis, Unsolvable> {
    let mut scope = game.scope().clone();
    let mut horizon = cfg.initial_horizon.max(1);
    let mut solves = 0;
    let mut last_region = 0;
    let fail = |scope: &ScopeBox, horizon, region_size, solves, reason: String| Unsolvable {
        scope: scope.clone(),
        horizon,
        region_size,
        solves,
        reason,
    };

    for extensions in 0..=cfg.max_extensions {
        let g = game
            .with_scope_and_horizon(scope.clone(), horizon)
            .map_err(|e| fail(&scope, horizon, last_region, solves, e.to_string()))?;
        let options = SolveOptions::with_fixpoint(FixpointMode::Approximate(x0.clone()));
        solves += 1;
        let solution =
            ddp_solve(&g, &options).map_err(|e| fail(&scope, horizon, last_region, solves, e.to_string()))?;
        last_region = solution.table().winning_count(1);
        if solution.value(x0, 1).is_ok_and(|v| v.is_finite()) {
            let mode = if solution.fixpoint_stage().is_some() {
                PolicyMode::QuasiStationary
            } else {
                PolicyMode::NonStationary
            };
            let policy = extract_policy(&solution, mode).expect("mode matches the solution");
            return Ok(Synthesis {
                policy,
                solution,
                extensions,
            });
        }
        let (next_scope, next_horizon) = extend(&scope, horizon, cfg, arena);
        if next_scope == scope && next_horizon == horizon {
            break;
        }
        scope = next_scope;
        horizon = next_horizon;
    }
    Err(fail(
        &scope,
        horizon,
        last_region,
        solves,
        "start state not winning within the extension budget".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::solver::PolicyKind;

    fn cfg(
        initial_horizon: usize,
        horizon_step: usize,
        scope_margin: u64,
        max_extensions: usize,
    ) -> HyperPolicyConfig {
        HyperPolicyConfig {
            delta: 1,
            initial_horizon,
            horizon_step,
            scope_margin,
            max_extensions,
        }
    }

    #[test]
    fn extend_examples() {
        let arena = ScopeBox::new([0], [9]).unwrap();
        let scope = ScopeBox::new([0], [4]).unwrap();
        let (s, n) = extend(&scope, 5, &cfg(5, 1, 2, 0), &arena);
        assert_eq!((s, n), (ScopeBox::new([0], [6]).unwrap(), 6));

        let (s, n) = extend(&arena, 5, &cfg(5, 1, 2, 0), &arena);
        assert_eq!((s, n), (arena.clone(), 6));

        let (s, n) = extend(&scope, 5, &cfg(5, 1, 0, 0), &arena);
        assert_eq!((s, n), (scope, 6));
    }

    #[test]
    fn line5_extends_horizon_to_five() {
        let g = fixtures::line5();
        let arena = g.scope().clone();
        let syn = hyper_policy_synthesize(&cfg(2, 1, 0, 5), &g, &[0].into(), &arena).unwrap();
        assert_eq!(syn.extensions, 3);
        assert_eq!(syn.solution.horizon(), 5);

        let direct = hyper_policy_synthesize(&cfg(5, 1, 0, 5), &g, &[0].into(), &arena).unwrap();
        assert_eq!(direct.extensions, 0);
        assert_eq!(syn.policy.kind(), direct.policy.kind());
        for p in 0..=4 {
            for k in 1..=5 {
                assert_eq!(syn.policy.lookup(&[p], k), direct.policy.lookup(&[p], k));
            }
        }
    }

    #[test]
    fn line5_direct_solve_is_quasi_stationary_at_stage_one() {
        let g = fixtures::line5();
        let syn = hyper_policy_synthesize(&cfg(5, 1, 0, 0), &g, &[0].into(), g.scope()).unwrap();
        assert_eq!(syn.policy.kind(), PolicyKind::QuasiStationary(1));
    }

    #[test]
    fn gapless_wall_is_unsolvable() {
        let g = fixtures::gap9_gapless();
        let arena = g.scope().clone();
        let err = hyper_policy_synthesize(&cfg(4, 2, 1, 6), &g, &[0, 2].into(), &arena).unwrap_err();
        assert_eq!(err.solves, 7);
        assert_eq!(err.region_size, 0);
    }

    #[test]
    fn stalled_extension_stops_early() {
        let g = fixtures::gap9_gapless();
        let arena = g.scope().clone();
        let err = hyper_policy_synthesize(&cfg(4, 0, 0, 50), &g, &[0, 2].into(), &arena).unwrap_err();
        assert_eq!(err.solves, 1);
    }
}
