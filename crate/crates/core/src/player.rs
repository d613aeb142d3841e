//! The hybrid game player: synthesises one modal controller per route
//! segment, runs it in closed loop against a disturbance model and records
//! the play.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{CostWeights, Dynamics, GameDef, GameSpace, ModalGame, Value};
use crate::lattice::{chebyshev, minkowski_dilate, MoveSet, Region, ScopeBox, StateVec};
use crate::scope::{hyper_policy_synthesize, HyperPolicyConfig};
use crate::solver::Solution;
use crate::wellformed::horizon_heuristic;

/// Arena, waypoint route and static obstacles.
///
/// Route waypoints and obstacle cells are position vectors, i.e. states
/// projected onto the position axes of `space`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskConfig {
    pub space: GameSpace,
    pub route: Vec<StateVec>,
    pub obstacles: Region,
    /// Half-width of the waypoint areas `p_i ⊕ [±delta]`.
    pub delta: u64,
}

impl TaskConfig {
    pub fn new(space: GameSpace, route: Vec<StateVec>, obstacles: Region, delta: u64) -> Result<Self> {
        let pdim = space.position_axes().len();
        if route.is_empty() {
            return Err(Error::InvalidTask("route is empty".into()));
        }
        if let Some(p) = route.iter().find(|p| p.dim() != pdim) {
            return Err(Error::DimensionMismatch {
                expected: pdim,
                got: p.dim(),
            });
        }
        if !obstacles.is_empty() && obstacles.dim() != pdim {
            return Err(Error::DimensionMismatch {
                expected: pdim,
                got: obstacles.dim(),
            });
        }
        let arena = space.ambient().project(&space.position_axes());
        if let Some(p) = route.iter().find(|p| !arena.contains(p)) {
            return Err(Error::InvalidTask(format!("waypoint {p} outside the arena")));
        }
        Ok(Self {
            space,
            route,
            obstacles,
            delta,
        })
    }

    pub fn arena(&self) -> &ScopeBox {
        self.space.ambient()
    }

    pub fn position_axes(&self) -> Vec<usize> {
        self.space.position_axes()
    }

    /// The arena projected onto the position axes.
    pub fn position_arena(&self) -> ScopeBox {
        self.arena().project(&self.position_axes())
    }

    pub fn position_of(&self, x: &[i64]) -> StateVec {
        StateVec::from(x.to_vec()).project(&self.position_axes())
    }

    pub fn is_obstacle(&self, x: &[i64]) -> bool {
        self.obstacles.contains(&self.position_of(x))
    }
}

/// Dynamics, player ranges and cost weights shared by every segment game.
#[derive(Clone, Debug)]
pub struct GameTemplate {
    pub dynamics: Arc<dyn Dynamics>,
    pub controls: MoveSet,
    pub disturbances: MoveSet,
    pub weights: CostWeights,
    pub top_bound: u64,
    pub crossing_shield: bool,
}

/// A complete hybrid-game configuration.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub template: GameTemplate,
    pub hyper: HyperPolicyConfig,
    pub task: TaskConfig,
    pub x0: StateVec,
    /// Time-scale factor of the horizon heuristic.
    pub sigma: u64,
    /// Half-width of the terminal cuboid around each segment end.
    pub goal_radius: u64,
    /// Obstacles are dilated by this many cells to form the unsafe region.
    pub unsafe_margin: u64,
    /// Cap on closed-loop steps over the whole play.
    pub max_steps: usize,
}

impl Configuration {
    /// Checks dimensions only; semantic conditions such as `x0 ∉ α` are left
    /// to the well-formedness report.
    pub fn validate(&self) -> Result<()> {
        let m = self.task.arena().dim();
        if self.x0.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.x0.dim(),
            });
        }
        if !self.task.arena().contains(&self.x0) {
            return Err(Error::OutOfScope(self.x0.coords().to_vec()));
        }
        if self.hyper.delta != self.task.delta {
            return Err(Error::InvalidTask(format!(
                "robustness margin {} differs from waypoint area half-width {}",
                self.hyper.delta, self.task.delta
            )));
        }
        if self.template.dynamics.state_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.template.dynamics.state_dim(),
            });
        }
        Ok(())
    }

    pub fn delta(&self) -> u64 {
        self.hyper.delta
    }

    /// Position cells of `O ⊕ [±unsafe_margin]`.
    pub fn unsafe_positions(&self) -> Region {
        let pdim = self.task.position_axes().len();
        if self.unsafe_margin == 0 || self.task.obstacles.is_empty() {
            return self.task.obstacles.clone();
        }
        minkowski_dilate(
            &self.task.obstacles,
            &MoveSet::cube(pdim, self.unsafe_margin as i64),
            None,
        )
        .expect("obstacles are position vectors")
    }

    /// States of `scope` whose position is unsafe.
    pub fn unsafe_region(&self, scope: &ScopeBox) -> Region {
        let bad = self.unsafe_positions();
        let axes = self.task.position_axes();
        Region::from_cells(
            scope.dim(),
            scope.iter().filter(|x| bad.contains(&x.project(&axes))),
        )
        .expect("scope cells share a dimension")
    }

    /// States of `scope` whose position lies within `goal_radius` of `target`.
    pub fn goal_region(&self, target: &[i64], scope: &ScopeBox) -> Region {
        let axes = self.task.position_axes();
        Region::from_cells(
            scope.dim(),
            scope
                .iter()
                .filter(|x| chebyshev(&x.project(&axes), target) <= self.goal_radius),
        )
        .expect("scope cells share a dimension")
    }

    /// The modal game steering into the cuboid around `target`.
    pub fn segment_game(&self, target: &[i64], scope: ScopeBox, horizon: usize) -> Result<ModalGame> {
        let t = &self.template;
        ModalGame::new(GameDef {
            space: self.task.space.clone(),
            dynamics: Arc::clone(&t.dynamics),
            controls: t.controls.clone(),
            disturbances: t.disturbances.clone(),
            goal: self.goal_region(target, &scope),
            unsafe_region: self.unsafe_region(&scope),
            weights: t.weights.clone(),
            horizon,
            top_bound: t.top_bound,
            delta: self.hyper.delta,
            crossing_shield: t.crossing_shield,
            scope,
        })
    }

    /// The game over the whole arena toward the final waypoint.
    pub fn arena_game(&self) -> Result<ModalGame> {
        let target = self.task.route.last().expect("route is non-empty");
        self.segment_game(
            target,
            self.task.arena().clone(),
            self.hyper.initial_horizon.max(1),
        )
    }

    /// Number of segments played: one per waypoint after the first, or one
    /// for a single-waypoint route.
    pub fn segment_count(&self) -> usize {
        self.targets().len()
    }

    /// The state a stand-alone solve of segment `seg` starts from: `x0` for
    /// the first segment, otherwise the segment's first waypoint with all
    /// non-position coordinates zero.
    pub fn segment_start(&self, seg: usize) -> StateVec {
        if seg == 0 {
            return self.x0.clone();
        }
        let mut x = StateVec::zeros(self.x0.dim()).into_inner();
        for (j, &a) in self.task.position_axes().iter().enumerate() {
            x[a] = self.task.route[seg][j];
        }
        x.into()
    }

    /// The modal game and hyper-policy settings for segment `seg` entered at
    /// state `x`. The scope covers the segment's waypoints and `x`, padded by
    /// `δ` plus the scope margin; the horizon is at least the heuristic
    /// estimate plus one.
    pub fn segment_setup(&self, seg: usize, x: &StateVec) -> Result<(ModalGame, HyperPolicyConfig)> {
        let task = &self.task;
        let targets = self.targets();
        let target = targets
            .get(seg)
            .ok_or_else(|| Error::InvalidTask(format!("no segment {seg}")))?;
        let from = &task.route[seg.min(task.route.len() - 1)];
        let pos = task.position_of(x);
        let pad = self.delta() + self.hyper.scope_margin;
        let scope = segment_box(task, from, target, pad).union_hull(&segment_box(task, &pos, &pos, 0));
        let heuristic = horizon_heuristic(
            &pos,
            &Region::from_cells(pos.dim(), [target.clone()]).expect("one cell"),
            self.sigma,
            task.space.v_min(),
            task.space.v_max(),
        );
        let horizon = self.hyper.initial_horizon.max(heuristic as usize + 1);
        let game = self.segment_game(target, scope, horizon)?;
        let hyper = HyperPolicyConfig {
            initial_horizon: horizon,
            ..self.hyper.clone()
        };
        Ok((game, hyper))
    }

    fn targets(&self) -> &[StateVec] {
        let r = &self.task.route;
        if r.len() == 1 {
            r
        } else {
            &r[1..]
        }
    }
}

/// Full-state box whose position axes cover `from` and `to` dilated by
/// `pad`; non-position axes span the arena.
fn segment_box(task: &TaskConfig, from: &[i64], to: &[i64], pad: u64) -> ScopeBox {
    let axes = task.position_axes();
    let arena = task.arena();
    let mut lo = arena.lo().coords().to_vec();
    let mut hi = arena.hi().coords().to_vec();
    for (j, &a) in axes.iter().enumerate() {
        lo[a] = (from[j].min(to[j]) - pad as i64).max(arena.lo()[a]);
        hi[a] = (from[j].max(to[j]) + pad as i64).min(arena.hi()[a]);
    }
    ScopeBox::new(lo, hi).expect("clipped box around in-arena points")
}

/// Bounding box of waypoints `i` and `i + 1` dilated by `pad` and clipped to
/// the arena; for the last waypoint, the box around the final two.
pub fn modal_scope_for_segment(task: &TaskConfig, i: usize, pad: u64) -> ScopeBox {
    let r = &task.route;
    let i = i.min(r.len().saturating_sub(2));
    let j = (i + 1).min(r.len() - 1);
    segment_box(task, &r[i], &r[j], pad)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AdversaryModel {
    Zero,
    Random(u64),
    Worst,
}

/// A disturbance player with its own random stream.
#[derive(Clone, Debug)]
pub struct Adversary {
    model: AdversaryModel,
    rng: ChaCha8Rng,
}

impl Adversary {
    pub fn new(model: AdversaryModel) -> Self {
        let seed = match model {
            AdversaryModel::Random(s) => s,
            _ => 0,
        };
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn model(&self) -> AdversaryModel {
        self.model
    }
}

/// Picks the disturbance for `(x, k, u)` from `d_range`.
///
/// `Worst` replays the solver's recorded maximiser and falls back to the
/// lexicographically largest disturbance when none is recorded.
pub fn adversary_move(
    adv: &mut Adversary,
    d_range: &MoveSet,
    sol: Option<&Solution>,
    x: &[i64],
    u: &[i64],
    k: usize,
) -> StateVec {
    match adv.model {
        AdversaryModel::Zero => StateVec::zeros(d_range.dim()),
        AdversaryModel::Random(_) => d_range.get(adv.rng.gen_range(0..d_range.len())).clone(),
        AdversaryModel::Worst => sol
            .and_then(|s| s.table().maximizer(x, k, u))
            .unwrap_or_else(|| d_range.get(d_range.len() - 1))
            .clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayStep {
    pub segment: usize,
    pub stage: usize,
    pub x: StateVec,
    pub u: StateVec,
    pub d: StateVec,
    /// `V(x, k)` before the move.
    pub value: Value,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum JumpKind {
    WaypointIncrement,
    Finish,
}

impl JumpKind {
    pub fn name(self) -> &'static str {
        match self {
            JumpKind::WaypointIncrement => "waypoint",
            JumpKind::Finish => "finish",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Jump {
    /// Index of the visited state at which the jump fires; state `i` is the
    /// pre-move state of step `i`, and `steps.len()` is the final state.
    pub state: usize,
    pub kind: JumpKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    Finished,
    EnteredUnsafe,
    UnsolvableSegment,
    HorizonExhausted,
    BudgetExceeded,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Finished => "Finished",
            Termination::EnteredUnsafe => "EnteredUnsafe",
            Termination::UnsolvableSegment => "UnsolvableSegment",
            Termination::HorizonExhausted => "HorizonExhausted",
            Termination::BudgetExceeded => "BudgetExceeded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayTrace {
    pub steps: Vec<PlayStep>,
    pub jumps: Vec<Jump>,
    pub final_state: StateVec,
    pub final_segment: usize,
    pub final_stage: usize,
    pub termination: Termination,
    pub diagnostics: Vec<String>,
}

impl PlayTrace {
    /// Every visited state, including the final one.
    pub fn states(&self) -> impl Iterator<Item = &StateVec> {
        self.steps
            .iter()
            .map(|s| &s.x)
            .chain(std::iter::once(&self.final_state))
    }
}

/// Runs the hybrid player on `cfg` against `adversary`.
///
/// Each segment is solved by the hyper-policy; the closed loop then uses the
/// argmin rows of the computed stages, from the fixpoint row (or stage 1)
/// up to `N - 1`.
pub fn hybrid_play(cfg: &Configuration, adversary: AdversaryModel) -> PlayTrace {
    let mut adv = Adversary::new(adversary);
    let task = &cfg.task;
    let delta = cfg.delta();
    let mut x = cfg.x0.clone();
    let mut steps = Vec::new();
    let mut jumps = Vec::new();
    let mut diagnostics = Vec::new();
    let mut stage = 1;
    let targets = cfg.targets();

    let finish = |steps: Vec<PlayStep>, jumps, x, seg, stage, termination, diagnostics| PlayTrace {
        steps,
        jumps,
        final_state: x,
        final_segment: seg,
        final_stage: stage,
        termination,
        diagnostics,
    };

    if task.is_obstacle(&x) {
        diagnostics.push(format!("start state {x} is inside an obstacle"));
        return finish(steps, jumps, x, 0, stage, Termination::EnteredUnsafe, diagnostics);
    }

    let arrived = |x: &[i64], target: &[i64]| chebyshev(&task.position_of(x), target) <= delta;

    for (seg, target) in targets.iter().enumerate() {
        let last = seg + 1 == targets.len();
        let jump = |state: usize| Jump {
            state,
            kind: if last {
                JumpKind::Finish
            } else {
                JumpKind::WaypointIncrement
            },
        };
        if arrived(&x, target) {
            jumps.push(jump(steps.len()));
            continue;
        }

        let (game, hyper) = match cfg.segment_setup(seg, &x) {
            Ok(v) => v,
            Err(e) => {
                diagnostics.push(format!("segment {seg}: {e}"));
                return finish(
                    steps,
                    jumps,
                    x,
                    seg,
                    stage,
                    Termination::UnsolvableSegment,
                    diagnostics,
                );
            }
        };
        let synth = match hyper_policy_synthesize(&hyper, &game, &x, task.arena()) {
            Ok(s) => s,
            Err(u) => {
                diagnostics.push(format!("segment {seg}: {u}"));
                return finish(
                    steps,
                    jumps,
                    x,
                    seg,
                    stage,
                    Termination::UnsolvableSegment,
                    diagnostics,
                );
            }
        };
        let sol = &synth.solution;
        let g = sol.game();
        let n = sol.horizon();
        stage = *sol.stages_computed().start();
        let mut reached = false;
        while stage < n {
            let Some(u) = sol.table().argmin(&x, stage).cloned() else {
                diagnostics.push(format!("segment {seg}: no control for {x} at stage {stage}"));
                return finish(
                    steps,
                    jumps,
                    x,
                    seg,
                    stage,
                    Termination::HorizonExhausted,
                    diagnostics,
                );
            };
            let d = adversary_move(&mut adv, g.disturbances(), Some(sol), &x, &u, stage);
            let value = sol.table().value_or_top(&x, stage);
            let next = g.successor(&x, &u, &d, stage);
            steps.push(PlayStep {
                segment: seg,
                stage,
                x: x.clone(),
                u,
                d,
                value,
            });
            x = next;
            stage += 1;
            if !task.arena().contains(&x) || task.is_obstacle(&x) {
                diagnostics.push(format!("segment {seg}: entered unsafe state {x}"));
                return finish(
                    steps,
                    jumps,
                    x,
                    seg,
                    stage,
                    Termination::EnteredUnsafe,
                    diagnostics,
                );
            }
            if arrived(&x, target) {
                jumps.push(jump(steps.len()));
                reached = true;
                break;
            }
            if steps.len() >= cfg.max_steps {
                diagnostics.push(format!("step budget {} spent", cfg.max_steps));
                return finish(
                    steps,
                    jumps,
                    x,
                    seg,
                    stage,
                    Termination::BudgetExceeded,
                    diagnostics,
                );
            }
        }
        if !reached {
            diagnostics.push(format!("segment {seg}: waypoint area not reached by stage {n}"));
            return finish(
                steps,
                jumps,
                x,
                seg,
                stage,
                Termination::HorizonExhausted,
                diagnostics,
            );
        }
    }
    let seg = targets.len() - 1;
    finish(steps, jumps, x, seg, stage, Termination::Finished, diagnostics)
}

/// A play is correct when it finished inside the final waypoint area and
/// never visited an obstacle.
pub fn play_correct(trace: &PlayTrace, task: &TaskConfig) -> bool {
    let goal = task.route.last().expect("route is non-empty");
    trace.termination == Termination::Finished
        && chebyshev(&task.position_of(&trace.final_state), goal) <= task.delta
        && trace.states().all(|x| !task.is_obstacle(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::game::Kinematic;

    fn gap9_task(gap_rows: &[i64]) -> TaskConfig {
        let g = fixtures::gap9();
        TaskConfig::new(
            g.space().clone(),
            vec![[0, 2].into(), [8, 2].into()],
            fixtures::gap9_wall(gap_rows),
            1,
        )
        .unwrap()
    }

    fn gap9_config(gap_rows: &[i64]) -> Configuration {
        let g = fixtures::gap9();
        Configuration {
            template: GameTemplate {
                dynamics: Arc::new(Kinematic::for_space(g.space())),
                controls: g.controls().clone(),
                disturbances: g.disturbances().clone(),
                weights: g.weights().clone(),
                top_bound: g.top_bound(),
                crossing_shield: true,
            },
            hyper: HyperPolicyConfig {
                delta: 1,
                initial_horizon: 12,
                horizon_step: 2,
                scope_margin: 1,
                max_extensions: 3,
            },
            task: gap9_task(gap_rows),
            x0: [0, 2].into(),
            sigma: 1,
            goal_radius: 1,
            unsafe_margin: 0,
            max_steps: 200,
        }
    }

    #[test]
    fn segment_scope_examples() {
        let task = gap9_task(&[2]);
        assert_eq!(
            modal_scope_for_segment(&task, 0, 2),
            ScopeBox::new([0, 0], [8, 4]).unwrap()
        );
        assert_eq!(
            modal_scope_for_segment(&task, 0, 0),
            ScopeBox::new([0, 2], [8, 2]).unwrap()
        );
        assert_eq!(
            modal_scope_for_segment(&task, 1, 0),
            ScopeBox::new([0, 2], [8, 2]).unwrap()
        );
    }

    #[test]
    fn adversary_examples() {
        let d = MoveSet::cube(2, 1);
        let mut zero = Adversary::new(AdversaryModel::Zero);
        assert_eq!(
            adversary_move(&mut zero, &d, None, &[0, 0], &[0, 0], 1),
            StateVec::zeros(2)
        );
        let mut worst = Adversary::new(AdversaryModel::Worst);
        assert_eq!(
            adversary_move(&mut worst, &d, None, &[0, 0], &[0, 0], 1),
            StateVec::from([1, 1])
        );

        let g = fixtures::line5();
        let sol = crate::solver::ddp_solve(&g, &Default::default()).unwrap();
        assert_eq!(
            adversary_move(&mut worst, g.disturbances(), Some(&sol), &[0], &[1], 1),
            StateVec::from([0])
        );
    }

    #[test]
    fn random_adversary_is_seeded() {
        let d = MoveSet::cube(1, 3);
        let draw = |seed| {
            let mut a = Adversary::new(AdversaryModel::Random(seed));
            (0..32)
                .map(|_| adversary_move(&mut a, &d, None, &[0], &[0], 1))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
        assert!(draw(7).iter().all(|m| d.contains(m)));
    }

    #[test]
    fn gapless_wall_is_unsolvable_segment() {
        let t = hybrid_play(&gap9_config(&[]), AdversaryModel::Zero);
        assert_eq!(t.termination, Termination::UnsolvableSegment);
        assert!(!play_correct(&t, &gap9_config(&[]).task));
    }

    #[test]
    fn wide_gap_finishes_under_every_adversary() {
        let cfg = gap9_config(&[1, 2, 3]);
        for adv in [
            AdversaryModel::Zero,
            AdversaryModel::Worst,
            AdversaryModel::Random(3),
        ] {
            let t = hybrid_play(&cfg, adv);
            assert_eq!(
                t.termination,
                Termination::Finished,
                "{adv:?}: {:?}",
                t.diagnostics
            );
            assert!(play_correct(&t, &cfg.task));
            assert_eq!(t.jumps.last().unwrap().kind, JumpKind::Finish);
            for (s, next) in t
                .steps
                .iter()
                .zip(t.steps.iter().skip(1).map(|s| &s.x).chain([&t.final_state]))
            {
                assert_eq!(&s.x.add(&s.u).add(&s.d), next);
            }
        }
    }

    #[test]
    fn start_in_obstacle_enters_unsafe() {
        let mut cfg = gap9_config(&[2]);
        cfg.x0 = [4, 0].into();
        let t = hybrid_play(&cfg, AdversaryModel::Zero);
        assert_eq!(t.termination, Termination::EnteredUnsafe);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn play_correct_rejects_obstacle_visits() {
        let cfg = gap9_config(&[1, 2, 3]);
        let mut t = hybrid_play(&cfg, AdversaryModel::Zero);
        assert!(play_correct(&t, &cfg.task));
        t.steps[0].x = [4, 0].into();
        assert!(!play_correct(&t, &cfg.task));
    }
}
