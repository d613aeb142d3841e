//! The modal integer difference game: dynamics, saturating values and the
//! weighted reach-avoid cost model.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{crossing_cells, MoveSet, Region, ScopeBox, StateVec};

/// A cost-to-go value: a finite magnitude below the configured ceiling, or ⊤.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Value {
    Finite(u64),
    Top,
}

impl Value {
    pub const ZERO: Value = Value::Finite(0);

    /// Saturates magnitudes at or above `top_bound` to ⊤.
    pub fn finite(v: u128, top_bound: u64) -> Value {
        if v < top_bound as u128 {
            Value::Finite(v as u64)
        } else {
            Value::Top
        }
    }

    pub fn sat_add(self, other: Value, top_bound: u64) -> Value {
        match (self, other) {
            (Value::Finite(a), Value::Finite(b)) => Value::finite(a as u128 + b as u128, top_bound),
            _ => Value::Top,
        }
    }

    pub fn is_top(self) -> bool {
        self == Value::Top
    }

    pub fn is_finite(self) -> bool {
        !self.is_top()
    }

    pub fn as_finite(self) -> Option<u64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::Top => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(v) => write!(f, "{v}"),
            Value::Top => write!(f, "TOP"),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum Role {
    Position,
    Velocity,
    Waypoint,
}

/// The ambient state space with per-coordinate roles and speed limits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GameSpace {
    ambient: ScopeBox,
    roles: Vec<Role>,
    v_max: i64,
    v_min: i64,
}

impl GameSpace {
    pub fn new(ambient: ScopeBox, roles: Vec<Role>, v_max: i64, v_min: i64) -> Result<Self> {
        if roles.len() != ambient.dim() {
            return Err(Error::DimensionMismatch {
                expected: ambient.dim(),
                got: roles.len(),
            });
        }
        if !roles.contains(&Role::Position) {
            return Err(Error::InvalidGame("no position coordinates".into()));
        }
        if !(v_max >= v_min && v_min >= 1) {
            return Err(Error::InvalidGame(format!(
                "speed limits must satisfy v_max >= v_min >= 1, got v_max={v_max}, v_min={v_min}"
            )));
        }
        Ok(Self {
            ambient,
            roles,
            v_max,
            v_min,
        })
    }

    /// All coordinates are positions.
    pub fn positional(ambient: ScopeBox, v_max: i64, v_min: i64) -> Result<Self> {
        let roles = vec![Role::Position; ambient.dim()];
        Self::new(ambient, roles, v_max, v_min)
    }

    pub fn ambient(&self) -> &ScopeBox {
        &self.ambient
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn v_max(&self) -> i64 {
        self.v_max
    }

    pub fn v_min(&self) -> i64 {
        self.v_min
    }

    fn axes_with(&self, role: Role) -> Vec<usize> {
        (0..self.roles.len()).filter(|&a| self.roles[a] == role).collect()
    }

    pub fn position_axes(&self) -> Vec<usize> {
        self.axes_with(Role::Position)
    }

    pub fn velocity_axes(&self) -> Vec<usize> {
        self.axes_with(Role::Velocity)
    }
}

/// Discrete dynamics `f̂`: the successor of `x` under `(u, d)` at stage `k`
/// is `x + offset(x, u, d, k)`.
///
/// Implementations must be side-effect free.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn offset(&self, x: &[i64], u: &[i64], d: &[i64], k: usize, out: &mut [i64]);

    /// Dimension of control and disturbance moves.
    fn move_dim(&self) -> usize;

    fn state_dim(&self) -> usize;

    fn is_time_invariant(&self) -> bool {
        true
    }

    /// Coordinates whose post-step value counts as a velocity, if any.
    fn velocity_axes(&self) -> &[usize] {
        &[]
    }
}

/// `Δp = u + d` on the position coordinates; everything else is frozen.
#[derive(Clone, Debug)]
pub struct Kinematic {
    state_dim: usize,
    position_axes: Vec<usize>,
}

impl Kinematic {
    pub fn new(state_dim: usize, position_axes: Vec<usize>) -> Self {
        Self {
            state_dim,
            position_axes,
        }
    }

    pub fn for_space(space: &GameSpace) -> Self {
        Self::new(space.ambient().dim(), space.position_axes())
    }
}

impl Dynamics for Kinematic {
    fn offset(&self, _x: &[i64], u: &[i64], d: &[i64], _k: usize, out: &mut [i64]) {
        out.fill(0);
        for (j, &a) in self.position_axes.iter().enumerate() {
            out[a] = u[j] + d[j];
        }
    }

    fn move_dim(&self) -> usize {
        self.position_axes.len()
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }
}

/// `v' = clamp(v + u + d, ±v_max)`, `Δp = v'`; other coordinates frozen.
#[derive(Clone, Debug)]
pub struct DoubleIntegrator {
    state_dim: usize,
    position_axes: Vec<usize>,
    velocity_axes: Vec<usize>,
    v_max: i64,
}

impl DoubleIntegrator {
    pub fn new(
        state_dim: usize,
        position_axes: Vec<usize>,
        velocity_axes: Vec<usize>,
        v_max: i64,
    ) -> Result<Self> {
        if position_axes.len() != velocity_axes.len() {
            return Err(Error::InvalidGame(
                "double integrator needs one velocity per position".into(),
            ));
        }
        Ok(Self {
            state_dim,
            position_axes,
            velocity_axes,
            v_max,
        })
    }

    pub fn for_space(space: &GameSpace) -> Result<Self> {
        Self::new(
            space.ambient().dim(),
            space.position_axes(),
            space.velocity_axes(),
            space.v_max(),
        )
    }
}

impl Dynamics for DoubleIntegrator {
    fn offset(&self, x: &[i64], u: &[i64], d: &[i64], _k: usize, out: &mut [i64]) {
        out.fill(0);
        for j in 0..self.position_axes.len() {
            let (pa, va) = (self.position_axes[j], self.velocity_axes[j]);
            let v_next = (x[va] + u[j] + d[j]).clamp(-self.v_max, self.v_max);
            out[va] = v_next - x[va];
            out[pa] = v_next;
        }
    }

    fn move_dim(&self) -> usize {
        self.velocity_axes.len()
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn velocity_axes(&self) -> &[usize] {
        &self.velocity_axes
    }
}

/// Diagonal quadratic weights of the running cost `x'Px + u'Qu + d'Rd`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CostWeights {
    pub p: Vec<u64>,
    pub q: Vec<u64>,
    pub r: Vec<u64>,
}

fn quad(w: &[u64], v: &[i64]) -> u128 {
    w.iter()
        .zip(v)
        .map(|(&w, &c)| w as u128 * (c.unsigned_abs() as u128).pow(2))
        .sum()
}

impl CostWeights {
    pub fn zero(state_dim: usize, move_dim: usize) -> Self {
        Self {
            p: vec![0; state_dim],
            q: vec![0; move_dim],
            r: vec![0; move_dim],
        }
    }

    /// `λ(u, d; x)` before saturation.
    pub fn lambda(&self, x: &[i64], u: &[i64], d: &[i64]) -> u128 {
        quad(&self.p, x) + quad(&self.q, u) + quad(&self.r, d)
    }

    /// The control's share of `λ`, used for tie-breaking.
    pub fn control_cost(&self, u: &[i64]) -> u128 {
        quad(&self.q, u)
    }
}

/// Everything needed to build a [`ModalGame`].
#[derive(Clone, Debug)]
pub struct GameDef {
    pub space: GameSpace,
    pub scope: ScopeBox,
    pub dynamics: Arc<dyn Dynamics>,
    pub controls: MoveSet,
    pub disturbances: MoveSet,
    pub goal: Region,
    pub unsafe_region: Region,
    pub weights: CostWeights,
    pub horizon: usize,
    pub top_bound: u64,
    pub delta: u64,
    pub crossing_shield: bool,
}

/// A validated, immutable modal game over a finite scope.
#[derive(Clone, Debug)]
pub struct ModalGame {
    def: GameDef,
}

impl ModalGame {
    pub fn new(def: GameDef) -> Result<Self> {
        let m = def.space.ambient().dim();
        let check_dim = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, got })
            }
        };
        check_dim(def.scope.dim(), m)?;
        check_dim(def.dynamics.state_dim(), m)?;
        check_dim(def.controls.dim(), def.dynamics.move_dim())?;
        check_dim(def.disturbances.dim(), def.dynamics.move_dim())?;
        check_dim(def.weights.p.len(), m)?;
        check_dim(def.weights.q.len(), def.dynamics.move_dim())?;
        check_dim(def.weights.r.len(), def.dynamics.move_dim())?;
        if !def.goal.is_empty() {
            check_dim(def.goal.dim(), m)?;
        }
        if !def.unsafe_region.is_empty() {
            check_dim(def.unsafe_region.dim(), m)?;
        }
        if def.horizon < 1 {
            return Err(Error::InvalidGame("horizon must be at least 1".into()));
        }
        if def.delta < 1 {
            return Err(Error::InvalidGame("robustness margin must be positive".into()));
        }
        if def.top_bound < 1 {
            return Err(Error::InvalidGame("top bound must be positive".into()));
        }
        if !def.controls.contains_zero() || !def.disturbances.contains_zero() {
            return Err(Error::InvalidGame(
                "control and disturbance ranges must contain 0".into(),
            ));
        }
        if let Some(c) = def.goal.iter().find(|c| !def.scope.contains(c)) {
            return Err(Error::InvalidGame(format!("goal cell {c} outside scope")));
        }
        if def.goal.difference(&def.unsafe_region).is_empty() {
            return Err(Error::InvalidGame("goal minus unsafe region is empty".into()));
        }
        Ok(Self { def })
    }

    pub fn def(&self) -> &GameDef {
        &self.def
    }

    /// Same game over another scope and horizon; goal cells outside the new
    /// scope are dropped.
    pub fn with_scope_and_horizon(&self, scope: ScopeBox, horizon: usize) -> Result<ModalGame> {
        let mut def = self.def.clone();
        def.goal = def.goal.clip(&scope);
        def.scope = scope;
        def.horizon = horizon;
        ModalGame::new(def)
    }

    pub fn with_crossing_shield(&self, on: bool) -> ModalGame {
        let mut def = self.def.clone();
        def.crossing_shield = on;
        ModalGame { def }
    }

    pub fn dim(&self) -> usize {
        self.def.scope.dim()
    }

    pub fn space(&self) -> &GameSpace {
        &self.def.space
    }

    pub fn scope(&self) -> &ScopeBox {
        &self.def.scope
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.def.dynamics.as_ref()
    }

    pub fn controls(&self) -> &MoveSet {
        &self.def.controls
    }

    pub fn disturbances(&self) -> &MoveSet {
        &self.def.disturbances
    }

    pub fn goal(&self) -> &Region {
        &self.def.goal
    }

    pub fn unsafe_region(&self) -> &Region {
        &self.def.unsafe_region
    }

    pub fn weights(&self) -> &CostWeights {
        &self.def.weights
    }

    pub fn horizon(&self) -> usize {
        self.def.horizon
    }

    pub fn top_bound(&self) -> u64 {
        self.def.top_bound
    }

    pub fn delta(&self) -> u64 {
        self.def.delta
    }

    pub fn crossing_shield(&self) -> bool {
        self.def.crossing_shield
    }

    pub fn position_axes(&self) -> Vec<usize> {
        self.def.space.position_axes()
    }

    pub fn is_unsafe(&self, x: &[i64]) -> bool {
        self.def.unsafe_region.contains(x)
    }

    /// `x ⊨ ρ ∧ ¬α`.
    pub fn is_goal(&self, x: &[i64]) -> bool {
        self.def.goal.contains(x) && !self.is_unsafe(x)
    }

    /// `x + f̂(x, u, d, k)` without range checks.
    pub fn successor(&self, x: &[i64], u: &[i64], d: &[i64], k: usize) -> StateVec {
        let mut off = vec![0; x.len()];
        self.def.dynamics.offset(x, u, d, k, &mut off);
        StateVec::new(x.iter().zip(&off).map(|(a, b)| a + b).collect())
    }

    pub fn step(&self, x: &[i64], u: &[i64], d: &[i64], k: usize) -> Result<StateVec> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.def.controls.contains(u) {
            return Err(Error::MoveNotInRange(u.to_vec()));
        }
        if !self.def.disturbances.contains(d) {
            return Err(Error::MoveNotInRange(d.to_vec()));
        }
        Ok(self.successor(x, u, d, k))
    }

    /// One `(u, d, x^{ud})` triple per move pair, in lexicographic move order.
    pub fn successors(&self, x: &[i64], k: usize) -> Vec<(StateVec, StateVec, StateVec)> {
        let mut out = Vec::with_capacity(self.def.controls.len() * self.def.disturbances.len());
        for u in self.def.controls.iter() {
            for d in self.def.disturbances.iter() {
                out.push((u.clone(), d.clone(), self.successor(x, u, d, k)));
            }
        }
        out
    }

    pub fn lambda(&self, x: &[i64], u: &[i64], d: &[i64]) -> Value {
        Value::finite(self.def.weights.lambda(x, u, d), self.def.top_bound)
    }

    /// The crossing shield: does the straight lattice path to the successor
    /// pass through an unsafe cell strictly between the endpoints?
    pub fn crosses_unsafe(&self, x: &[i64], next: &[i64]) -> bool {
        self.def.crossing_shield
            && !self.def.unsafe_region.is_empty()
            && crossing_cells(x, next)
                .iter()
                .any(|c| self.def.unsafe_region.contains(c))
    }

    /// Stage cost `L(u, d; x, k)`.
    pub fn stage_cost(&self, x: &[i64], u: &[i64], d: &[i64], k: usize) -> Value {
        if self.is_goal(x) {
            return Value::ZERO;
        }
        if self.is_unsafe(x) {
            return Value::Top;
        }
        if self.def.crossing_shield && !self.def.unsafe_region.is_empty() {
            let next = self.successor(x, u, d, k);
            if self.crosses_unsafe(x, &next) {
                return Value::Top;
            }
        }
        self.lambda(x, u, d)
    }

    /// Terminal cost `Φ(x)`.
    pub fn terminal_cost(&self, x: &[i64]) -> Value {
        if self.is_goal(x) {
            Value::ZERO
        } else {
            Value::Top
        }
    }

    /// Largest finite `λ` over scope × U × D.
    pub fn max_stage_cost(&self) -> u64 {
        let mut best = 0u64;
        for x in self.def.scope.iter() {
            for u in self.def.controls.iter() {
                for d in self.def.disturbances.iter() {
                    if let Value::Finite(v) = self.lambda(&x, u, d) {
                        best = best.max(v);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn sat_add_examples() {
        let top = 1_000_000;
        assert_eq!(Value::Finite(2).sat_add(Value::Finite(3), top), Value::Finite(5));
        assert_eq!(Value::Top.sat_add(Value::Finite(5), top), Value::Top);
        assert_eq!(Value::Top.sat_add(Value::Top, top), Value::Top);
        assert_eq!(Value::Finite(6).sat_add(Value::Finite(4), 10), Value::Top);
    }

    #[test]
    fn top_is_maximal() {
        assert!(Value::Finite(u64::MAX) < Value::Top);
        assert!(Value::ZERO < Value::Finite(1));
    }

    #[test]
    fn step_examples() {
        let line5 = fixtures::line5();
        assert_eq!(line5.step(&[2], &[1], &[0], 1).unwrap(), StateVec::from([3]));

        let int3 = fixtures::int3();
        assert_eq!(int3.step(&[0, 3], &[1], &[1], 1).unwrap(), StateVec::from([3, 3]));

        let gap9 = fixtures::gap9();
        assert_eq!(
            gap9.step(&[4, 2], &[1, 0], &[0, 1], 1).unwrap(),
            StateVec::from([5, 3])
        );
    }

    #[test]
    fn step_rejects_moves_outside_range() {
        let line5 = fixtures::line5();
        assert!(matches!(
            line5.step(&[2], &[2], &[0], 1),
            Err(Error::MoveNotInRange(_))
        ));
        assert!(matches!(
            line5.step(&[2], &[0], &[1], 1),
            Err(Error::MoveNotInRange(_))
        ));
    }

    #[test]
    fn successor_counts() {
        assert_eq!(fixtures::line5().successors(&[0], 1).len(), 3);
        assert_eq!(fixtures::gap9().successors(&[0, 2], 1).len(), 27);

        let line5 = fixtures::line5();
        let mut def = line5.def().clone();
        def.controls = MoveSet::zero(1);
        let idle = ModalGame::new(def).unwrap();
        let s = idle.successors(&[2], 1);
        assert_eq!(s, vec![([0].into(), [0].into(), [2].into())]);
    }

    #[test]
    fn stage_cost_examples() {
        let line5 = fixtures::line5();
        assert_eq!(line5.stage_cost(&[2], &[1], &[0], 1), Value::Finite(1));
        assert_eq!(line5.stage_cost(&[4], &[1], &[0], 1), Value::ZERO);

        let gap9 = fixtures::gap9();
        let mut def = gap9.def().clone();
        def.unsafe_region.insert([4, 2].into()).unwrap();
        def.goal = Region::from_cells(2, [StateVec::from([8, 2])]).unwrap();
        let walled = ModalGame::new(def).unwrap();
        // landing on an unsafe cell is shielded through its value; the state
        // itself being unsafe is shielded through the stage cost
        assert_eq!(walled.stage_cost(&[4, 2], &[1, 0], &[0, 0], 1), Value::Top);
    }

    #[test]
    fn crossing_shield_blocks_jumps_over_unsafe_cells() {
        let g = fixtures::jump_wall();
        // from 1 a jump of +2 passes the wall at 2
        assert_eq!(g.stage_cost(&[1], &[2], &[0], 1), Value::Top);
        assert!(g.stage_cost(&[1], &[1], &[0], 1).is_finite());
        let off = g.with_crossing_shield(false);
        assert_eq!(off.stage_cost(&[1], &[2], &[0], 1), Value::Finite(4));
    }

    #[test]
    fn terminal_cost_examples() {
        let line5 = fixtures::line5();
        assert_eq!(line5.terminal_cost(&[4]), Value::ZERO);
        assert_eq!(line5.terminal_cost(&[3]), Value::Top);

        let mut def = line5.def().clone();
        def.goal = Region::from_cells(1, [StateVec::from([3]), StateVec::from([4])]).unwrap();
        def.unsafe_region = Region::from_cells(1, [StateVec::from([3])]).unwrap();
        let g = ModalGame::new(def).unwrap();
        assert_eq!(g.terminal_cost(&[3]), Value::Top);
    }

    #[test]
    fn game_validation() {
        let line5 = fixtures::line5();
        let mut def = line5.def().clone();
        def.unsafe_region = def.goal.clone();
        assert!(ModalGame::new(def).is_err());

        let mut def = line5.def().clone();
        def.controls = MoveSet::new([StateVec::from([1])]).unwrap();
        assert!(ModalGame::new(def).is_err());

        let mut def = line5.def().clone();
        def.goal = Region::from_cells(1, [StateVec::from([9])]).unwrap();
        assert!(ModalGame::new(def).is_err());
    }
}
