//! Shielded backward minimax value iteration over a modal game.
//!
//! Row `N` of the value table holds the terminal cost. Each earlier row `k`
//! is the min over controls of the max over disturbances of the stage cost
//! at `(x, k)` plus the row-`k+1` value of the successor; successors outside
//! the scope count as ⊤. The winning region at stage `k` is the set of cells
//! with a finite value there.

use std::cmp::Ordering;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{ModalGame, Value};
use crate::lattice::{norm_inf, MoveSet, Region, StateVec};

/// Early termination of the backward sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FixpointMode {
    Off,
    /// Stop at the first (largest) stage where the winning region stops
    /// growing, or where the δ-neighbourhood of the given start state has
    /// become winning.
    Approximate(StateVec),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub fixpoint: FixpointMode,
    /// Keep the maximising disturbance per `(x, k, u)` for adversary replay.
    pub record_maximizers: bool,
    /// Compute each row in parallel over cells.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            fixpoint: FixpointMode::Off,
            record_maximizers: true,
            parallel: true,
        }
    }
}

impl SolveOptions {
    pub fn with_fixpoint(fixpoint: FixpointMode) -> Self {
        Self {
            fixpoint,
            ..Self::default()
        }
    }
}

/// Dense value and argmin tables over `scope × 1..=N`.
#[derive(Clone, Debug)]
pub struct ValueTable {
    game: ModalGame,
    cells: usize,
    values: Vec<Value>,
    argmin: Vec<Option<u16>>,
    maximizers: Option<Vec<u16>>,
}

impl ValueTable {
    /// Assembles a table from raw rows; `values` and `argmin` are indexed by
    /// `(k - 1) * cells + cell` with `k` in `1..=N`.
    pub fn from_parts(game: ModalGame, values: Vec<Value>, argmin: Vec<Option<StateVec>>) -> Result<Self> {
        let cells = game.scope().cell_count();
        let expected = cells * game.horizon();
        if values.len() != expected || argmin.len() != expected {
            return Err(Error::InvalidGame(format!(
                "table needs {expected} entries, got {} values and {} argmins",
                values.len(),
                argmin.len()
            )));
        }
        let argmin = argmin
            .into_iter()
            .map(|u| match u {
                None => Ok(None),
                Some(u) => game
                    .controls()
                    .index_of(&u)
                    .map(|i| Some(i as u16))
                    .ok_or(Error::MoveNotInRange(u.into_inner())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            game,
            cells,
            values,
            argmin,
            maximizers: None,
        })
    }

    pub fn game(&self) -> &ModalGame {
        &self.game
    }

    pub fn horizon(&self) -> usize {
        self.game.horizon()
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    fn slot(&self, cell: usize, k: usize) -> usize {
        (k - 1) * self.cells + cell
    }

    fn check_stage(&self, k: usize) -> Result<()> {
        if (1..=self.horizon()).contains(&k) {
            Ok(())
        } else {
            Err(Error::StageOutOfRange {
                stage: k,
                lo: 1,
                hi: self.horizon(),
            })
        }
    }

    fn cell_of(&self, x: &[i64]) -> Result<usize> {
        self.game
            .scope()
            .index_of(x)
            .ok_or_else(|| Error::OutOfScope(x.to_vec()))
    }

    pub fn row(&self, k: usize) -> &[Value] {
        let start = (k - 1) * self.cells;
        &self.values[start..start + self.cells]
    }

    pub fn value_at(&self, cell: usize, k: usize) -> Value {
        self.values[self.slot(cell, k)]
    }

    pub fn value(&self, x: &[i64], k: usize) -> Result<Value> {
        self.check_stage(k)?;
        Ok(self.value_at(self.cell_of(x)?, k))
    }

    /// Value with out-of-scope states read as ⊤.
    pub fn value_or_top(&self, x: &[i64], k: usize) -> Value {
        match self.game.scope().index_of(x) {
            Some(c) => self.value_at(c, k),
            None => Value::Top,
        }
    }

    pub fn argmin_index(&self, cell: usize, k: usize) -> Option<usize> {
        self.argmin[self.slot(cell, k)].map(usize::from)
    }

    pub fn argmin(&self, x: &[i64], k: usize) -> Option<&StateVec> {
        if !(1..=self.horizon()).contains(&k) {
            return None;
        }
        let cell = self.game.scope().index_of(x)?;
        self.argmin_index(cell, k).map(|i| self.game.controls().get(i))
    }

    /// Recorded maximising disturbance for `(x, k, u)`.
    pub fn maximizer(&self, x: &[i64], k: usize, u: &[i64]) -> Option<&StateVec> {
        let maxes = self.maximizers.as_ref()?;
        if !(1..self.horizon()).contains(&k) {
            return None;
        }
        let cell = self.game.scope().index_of(x)?;
        let ui = self.game.controls().index_of(u)?;
        let nu = self.game.controls().len();
        let di = maxes[(self.slot(cell, k)) * nu + ui];
        Some(self.game.disturbances().get(di as usize))
    }

    /// Overwrites a stored value; meant for constructing corrupted tables.
    pub fn set_value(&mut self, x: &[i64], k: usize, v: Value) -> Result<()> {
        self.check_stage(k)?;
        let slot = self.slot(self.cell_of(x)?, k);
        self.values[slot] = v;
        Ok(())
    }

    pub fn winning_count(&self, k: usize) -> usize {
        self.row(k).iter().filter(|v| v.is_finite()).count()
    }
}

/// The result of a backward sweep.
#[derive(Clone, Debug)]
pub struct Solution {
    table: Arc<ValueTable>,
    fixpoint_stage: Option<usize>,
    computed_from: usize,
}

impl Solution {
    /// Wraps an externally assembled table, e.g. one read back from a dump.
    pub fn from_table(table: ValueTable, fixpoint_stage: Option<usize>, computed_from: usize) -> Self {
        Self {
            table: Arc::new(table),
            fixpoint_stage,
            computed_from,
        }
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn shared_table(&self) -> Arc<ValueTable> {
        Arc::clone(&self.table)
    }

    pub fn table_mut(&mut self) -> &mut ValueTable {
        Arc::make_mut(&mut self.table)
    }

    pub fn game(&self) -> &ModalGame {
        self.table.game()
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon()
    }

    pub fn fixpoint_stage(&self) -> Option<usize> {
        self.fixpoint_stage
    }

    /// Stages whose rows came out of an actual backup (or the terminal
    /// cost); rows below are quasi-stationary copies.
    pub fn stages_computed(&self) -> RangeInclusive<usize> {
        self.computed_from..=self.horizon()
    }

    pub fn value(&self, x: &[i64], k: usize) -> Result<Value> {
        self.table.value(x, k)
    }
}

/// Per-scope lookup tables for the fast stage-cost path.
struct CostModel<'a> {
    game: &'a ModalGame,
    goal: Vec<bool>,
    unsafe_: Vec<bool>,
    shield_active: bool,
}

impl<'a> CostModel<'a> {
    fn new(game: &'a ModalGame) -> Self {
        let scope = game.scope();
        let n = scope.cell_count();
        let mut goal = vec![false; n];
        let mut unsafe_ = vec![false; n];
        for (i, x) in scope.iter().enumerate() {
            unsafe_[i] = game.is_unsafe(&x);
            goal[i] = game.goal().contains(&x) && !unsafe_[i];
        }
        Self {
            game,
            goal,
            unsafe_,
            shield_active: game.crossing_shield() && !game.unsafe_region().is_empty(),
        }
    }

    fn stage_cost(&self, cell: usize, x: &[i64], u: &[i64], d: &[i64], next: &[i64]) -> Value {
        if self.goal[cell] {
            return Value::ZERO;
        }
        if self.unsafe_[cell] {
            return Value::Top;
        }
        if self.shield_active && self.game.crosses_unsafe(x, next) {
            return Value::Top;
        }
        self.game.lambda(x, u, d)
    }
}

struct CellBackup {
    value: Value,
    best: Option<u16>,
    maximizers: Vec<u16>,
}

/// Min over controls of max over disturbances for one cell.
///
/// Ties in the max keep the lexicographically smallest disturbance; ties in
/// the min prefer the smaller control cost, then the lexicographically
/// smallest control.
fn backup_cell(
    cost: &CostModel<'_>,
    next_row: &[Value],
    cell: usize,
    x: &StateVec,
    k: usize,
    record: bool,
) -> CellBackup {
    let game = cost.game;
    let scope = game.scope();
    let top = game.top_bound();
    let (controls, disturbances) = (game.controls(), game.disturbances());
    let mut best: Option<(Value, u128, usize)> = None;
    let mut maximizers = if record {
        Vec::with_capacity(controls.len())
    } else {
        Vec::new()
    };
    let mut off = vec![0i64; x.len()];
    let mut next = vec![0i64; x.len()];
    for (ui, u) in controls.iter().enumerate() {
        let mut worst: Option<(Value, usize)> = None;
        for (di, d) in disturbances.iter().enumerate() {
            game.dynamics().offset(x, u, d, k, &mut off);
            for a in 0..x.len() {
                next[a] = x[a] + off[a];
            }
            let tail = match scope.index_of(&next) {
                Some(c) => next_row[c],
                None => Value::Top,
            };
            let total = cost.stage_cost(cell, x, u, d, &next).sat_add(tail, top);
            if worst.is_none_or(|(w, _)| total > w) {
                worst = Some((total, di));
            }
        }
        let (worst, wd) = worst.expect("disturbance range is non-empty");
        if record {
            maximizers.push(wd as u16);
        }
        let ucost = game.weights().control_cost(u);
        let better = match best {
            None => true,
            Some((bv, bc, _)) => match worst.cmp(&bv) {
                Ordering::Less => true,
                Ordering::Equal => ucost < bc,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((worst, ucost, ui));
        }
    }
    let (value, _, ui) = best.expect("control range is non-empty");
    CellBackup {
        value,
        best: value.is_finite().then_some(ui as u16),
        maximizers,
    }
}

/// Runs the shielded backward sweep.
///
/// Refuses games whose horizon times the largest finite stage cost reaches
/// the top bound, since sums could then saturate to ⊤ spuriously.
pub fn ddp_solve(game: &ModalGame, options: &SolveOptions) -> Result<Solution> {
    let horizon = game.horizon();
    let max_cost = game.max_stage_cost();
    if (horizon as u128) * (max_cost as u128) >= game.top_bound() as u128 {
        return Err(Error::StageCostUnbounded {
            horizon,
            max_stage_cost: max_cost,
            top_bound: game.top_bound(),
        });
    }
    if game.controls().len() > u16::MAX as usize || game.disturbances().len() > u16::MAX as usize {
        return Err(Error::InvalidGame("move sets larger than 65535".into()));
    }

    let scope = game.scope();
    let cells = scope.cell_count();
    let nu = game.controls().len();
    let points: Vec<StateVec> = scope.iter().collect();
    let cost = CostModel::new(game);

    let mut values = vec![Value::Top; cells * horizon];
    let mut argmin = vec![None; cells * horizon];
    let mut maximizers = options
        .record_maximizers
        .then(|| vec![0u16; cells * horizon * nu]);

    let last = (horizon - 1) * cells;
    for (i, x) in points.iter().enumerate() {
        values[last + i] = game.terminal_cost(x);
    }

    let neighbourhood: Option<Vec<usize>> = match &options.fixpoint {
        FixpointMode::Off => None,
        FixpointMode::Approximate(x0) => Some(neighbourhood_cells(game, x0)),
    };
    let nbhd_winning = |row: &[Value], nb: &[usize]| !nb.is_empty() && nb.iter().all(|&c| row[c].is_finite());
    let mut nbhd_seen = neighbourhood
        .as_ref()
        .is_some_and(|nb| nbhd_winning(&values[last..], nb));

    let mut fixpoint_stage = None;
    let mut computed_from = horizon;
    for k in (1..horizon).rev() {
        let (lower, upper) = values.split_at_mut(k * cells);
        let next_row = &upper[..cells];
        let row = &mut lower[(k - 1) * cells..];
        let record = options.record_maximizers;
        let compute = |i: usize| backup_cell(&cost, next_row, i, &points[i], k, record);
        let backups: Vec<CellBackup> = if options.parallel && cells >= 512 {
            (0..cells).into_par_iter().map(compute).collect()
        } else {
            (0..cells).map(compute).collect()
        };
        for (i, b) in backups.into_iter().enumerate() {
            row[i] = b.value;
            argmin[(k - 1) * cells + i] = b.best;
            if let Some(m) = maximizers.as_mut() {
                let base = ((k - 1) * cells + i) * nu;
                m[base..base + nu].copy_from_slice(&b.maximizers);
            }
        }
        computed_from = k;

        if let Some(nb) = &neighbourhood {
            nbhd_seen |= nbhd_winning(row, nb);
            let grown = row.iter().filter(|v| v.is_finite()).count()
                != next_row.iter().filter(|v| v.is_finite()).count();
            if !grown || nbhd_seen {
                fixpoint_stage = Some(k);
                break;
            }
        }
    }

    if let Some(ks) = fixpoint_stage {
        let src = (ks - 1) * cells;
        for k in 1..ks {
            let dst = (k - 1) * cells;
            values.copy_within(src..src + cells, dst);
            argmin.copy_within(src..src + cells, dst);
            if let Some(m) = maximizers.as_mut() {
                m.copy_within(src * nu..(src + cells) * nu, dst * nu);
            }
        }
    }

    Ok(Solution {
        table: Arc::new(ValueTable {
            game: game.clone(),
            cells,
            values,
            argmin,
            maximizers,
        }),
        fixpoint_stage,
        computed_from,
    })
}

/// In-scope cells of `x0 ⊕ [±δ]^m`; empty when `x0` itself is out of scope.
fn neighbourhood_cells(game: &ModalGame, x0: &[i64]) -> Vec<usize> {
    let scope = game.scope();
    if !scope.contains(x0) {
        return Vec::new();
    }
    MoveSet::cube(x0.len(), game.delta() as i64)
        .iter()
        .filter_map(|d| scope.index_of(&StateVec::from(x0.to_vec()).add(d)))
        .collect()
}

pub fn value(sol: &Solution, x: &[i64], k: usize) -> Result<Value> {
    sol.value(x, k)
}

/// Cells with a finite value at stage `k`.
pub fn winning_region(sol: &Solution, k: usize) -> Result<Region> {
    let t = sol.table();
    t.check_stage(k)?;
    let scope = t.game().scope();
    let cells = t
        .row(k)
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, _)| scope.point(i));
    Ok(Region::from_cells(scope.dim(), cells).expect("scope points share a dimension"))
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum PolicyMode {
    NonStationary,
    QuasiStationary,
    Stationary,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum PolicyKind {
    NonStationary,
    /// Row `k*` reused for every stage.
    QuasiStationary(usize),
    /// Row of an exact fixpoint, reused for every stage.
    Stationary(usize),
}

/// A controller read off an argmin table.
#[derive(Clone, Debug)]
pub struct Policy {
    kind: PolicyKind,
    table: Arc<ValueTable>,
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn mode(&self) -> PolicyMode {
        match self.kind {
            PolicyKind::NonStationary => PolicyMode::NonStationary,
            PolicyKind::QuasiStationary(_) => PolicyMode::QuasiStationary,
            PolicyKind::Stationary(_) => PolicyMode::Stationary,
        }
    }

    /// Control for `x` at stage `k`; `None` outside the winning region.
    pub fn lookup(&self, x: &[i64], k: usize) -> Option<&StateVec> {
        match self.kind {
            PolicyKind::NonStationary => self.table.argmin(x, k),
            PolicyKind::QuasiStationary(row) | PolicyKind::Stationary(row) => self.table.argmin(x, row),
        }
    }
}

pub fn extract_policy(sol: &Solution, mode: PolicyMode) -> Result<Policy> {
    let kind = match mode {
        PolicyMode::NonStationary => PolicyKind::NonStationary,
        PolicyMode::QuasiStationary => match sol.fixpoint_stage() {
            Some(k) => PolicyKind::QuasiStationary(k),
            None => {
                return Err(Error::ModeUnavailable(
                    "quasi-stationary policy needs a fixpoint stage".into(),
                ))
            }
        },
        PolicyMode::Stationary => {
            let t = sol.table();
            let lo = *sol.stages_computed().start();
            let row = (lo..t.horizon())
                .rev()
                .find(|&k| t.row(k) == t.row(k + 1))
                .ok_or_else(|| Error::ModeUnavailable("no two consecutive identical value rows".into()))?;
            PolicyKind::Stationary(row)
        }
    };
    Ok(Policy {
        kind,
        table: sol.shared_table(),
    })
}

/// A difference of two saturating values: `⊤ - ⊤ = 0`, `⊤ - n = +⊤`,
/// `n - ⊤ = -⊤`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum ValueDiff {
    NegTop,
    Finite(i128),
    PosTop,
}

impl ValueDiff {
    pub fn between(a: Value, b: Value) -> ValueDiff {
        match (a, b) {
            (Value::Finite(a), Value::Finite(b)) => ValueDiff::Finite(a as i128 - b as i128),
            (Value::Top, Value::Top) => ValueDiff::Finite(0),
            (Value::Top, Value::Finite(_)) => ValueDiff::PosTop,
            (Value::Finite(_), Value::Top) => ValueDiff::NegTop,
        }
    }
}

/// Both sides of the discrete HJI equation at one `(x, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualReport {
    /// `V(x, k-1) - V(x, k)`.
    pub lhs: ValueDiff,
    /// `min_u max_d H(x, u, d, k)`.
    pub rhs: ValueDiff,
    /// `lhs - rhs` when both sides are finite; `Some(0)` when they agree.
    pub residual: Option<i128>,
}

impl ResidualReport {
    pub fn is_zero(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// Recomputes the Hamiltonian min-max at `(x, k)` from row `k` and compares
/// it with the stored stage-to-stage value difference.
pub fn hji_residual(sol: &Solution, x: &[i64], k: usize) -> Result<ResidualReport> {
    let t = sol.table();
    let g = t.game();
    if !(2..=t.horizon()).contains(&k) {
        return Err(Error::StageOutOfRange {
            stage: k,
            lo: 2,
            hi: t.horizon(),
        });
    }
    let here = t.value(x, k)?;
    let before = t.value(x, k - 1)?;
    let mut rhs: Option<ValueDiff> = None;
    for u in g.controls().iter() {
        let mut worst: Option<ValueDiff> = None;
        for d in g.disturbances().iter() {
            let next = g.successor(x, u, d, k - 1);
            let h = ValueDiff::between(
                g.stage_cost(x, u, d, k - 1)
                    .sat_add(t.value_or_top(&next, k), g.top_bound()),
                here,
            );
            worst = Some(worst.map_or(h, |w| w.max(h)));
        }
        let worst = worst.expect("non-empty disturbances");
        rhs = Some(rhs.map_or(worst, |r| r.min(worst)));
    }
    let lhs = ValueDiff::between(before, here);
    let rhs = rhs.expect("non-empty controls");
    let residual = match (lhs, rhs) {
        (ValueDiff::Finite(a), ValueDiff::Finite(b)) => Some(a - b),
        _ if lhs == rhs => Some(0),
        _ => None,
    };
    Ok(ResidualReport { lhs, rhs, residual })
}

/// The fixpoint approximation at stage `k`: the winning region did not grow
/// from `k + 1` to `k`, or the δ-neighbourhood of `x0` is winning at some
/// stage `k' >= k`.
pub fn fixpoint_reached(sol: &Solution, k: usize, x0: &[i64]) -> Result<bool> {
    let t = sol.table();
    let range = sol.stages_computed();
    if !(range.contains(&k) && range.contains(&(k + 1))) {
        return Err(Error::StageOutOfRange {
            stage: k,
            lo: *range.start(),
            hi: range.end() - 1,
        });
    }
    if t.winning_count(k) == t.winning_count(k + 1) {
        return Ok(true);
    }
    Ok(neighbourhood_clause(sol, k, x0))
}

/// `∃k' >= k: V(x0 ⊕ Δ, k') < ⊤`, restricted to in-scope neighbours.
pub fn neighbourhood_clause(sol: &Solution, k: usize, x0: &[i64]) -> bool {
    let t = sol.table();
    let nb = neighbourhood_cells(t.game(), x0);
    !nb.is_empty() && (k..=t.horizon()).any(|kk| nb.iter().all(|&c| t.value_at(c, kk).is_finite()))
}

/// Largest sup-norm of a single-step offset over scope × U × D × `1..=N`.
pub fn step_bound(game: &ModalGame) -> u64 {
    let mut off = vec![0; game.dim()];
    let stages: Vec<usize> = if game.dynamics().is_time_invariant() {
        vec![1]
    } else {
        (1..=game.horizon()).collect()
    };
    let mut best = 0;
    for x in game.scope().iter() {
        for u in game.controls().iter() {
            for d in game.disturbances().iter() {
                for &k in &stages {
                    game.dynamics().offset(&x, u, d, k, &mut off);
                    best = best.max(norm_inf(&off));
                }
            }
        }
    }
    best
}
