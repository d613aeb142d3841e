//! Checkers for the side-conditions of a configuration: local
//! controllability, robustness bounds, perforation, delay and horizon hints.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::game::ModalGame;
use crate::lattice::{chebyshev, minkowski_dilate, MoveSet, Region, ScopeBox, Trajectory};
use crate::player::{Configuration, TaskConfig};

/// For every non-zero disturbance some control satisfies
/// `‖d‖² + ⟨d, u⟩ <= 0`.
pub fn check_local_controllability(controls: &MoveSet, disturbances: &MoveSet) -> bool {
    disturbances.iter().filter(|d| !d.is_zero()).all(|d| {
        let nd: i128 = d.iter().map(|&c| c as i128 * c as i128).sum();
        controls.iter().any(|u| {
            let dot: i128 = d.iter().zip(u.iter()).map(|(&a, &b)| a as i128 * b as i128).sum();
            nd + dot <= 0
        })
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DeltaBound {
    pub value: u64,
    /// Set when no state qualified, so `value` defaulted to 0.
    pub empty_domain: bool,
}

fn stages(g: &ModalGame) -> Vec<usize> {
    if g.dynamics().is_time_invariant() {
        vec![1]
    } else {
        (1..=g.horizon()).collect()
    }
}

/// Position drift `‖f̂(x, 0, d, k)|_p‖∞`, and whether the post-step velocity
/// is non-zero (always true without velocity axes).
fn drift(g: &ModalGame, x: &[i64], d: &[i64], k: usize, off: &mut [i64]) -> (u64, bool) {
    let zero = vec![0; g.controls().dim()];
    g.dynamics().offset(x, &zero, d, k, off);
    let pos = g.position_axes();
    let vel = g.space().velocity_axes();
    let moving = vel.is_empty() || vel.iter().any(|&a| x[a] + off[a] != 0);
    (
        pos.iter().map(|&a| off[a].unsigned_abs()).max().unwrap_or(0),
        moving,
    )
}

/// Max over `d` of the min over moving states `x` and stages of the
/// zero-control position drift. The margin `δ` must exceed it.
pub fn delta_lower_bound(g: &ModalGame) -> DeltaBound {
    let mut off = vec![0; g.dim()];
    let ks = stages(g);
    let mut best: Option<u64> = None;
    for d in g.disturbances().iter() {
        let mut least: Option<u64> = None;
        for x in g.scope().iter() {
            for &k in &ks {
                let (n, moving) = drift(g, &x, d, k, &mut off);
                if moving {
                    least = Some(least.map_or(n, |l| l.min(n)));
                }
            }
        }
        if let Some(l) = least {
            best = Some(best.map_or(l, |b| b.max(l)));
        }
    }
    DeltaBound {
        value: best.unwrap_or(0),
        empty_domain: best.is_none(),
    }
}

/// Max over `d`, goal states and stages of the zero-control position drift.
pub fn delta_goal_bound(g: &ModalGame) -> u64 {
    let mut off = vec![0; g.dim()];
    let ks = stages(g);
    let mut best = 0;
    for x in g.goal().iter().filter(|x| g.scope().contains(x)) {
        for d in g.disturbances().iter() {
            for &k in &ks {
                best = best.max(drift(g, x, d, k, &mut off).0);
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PerforationOutcome {
    Witness(Trajectory),
    NoTube,
    /// A waypoint lies in the obstacle set dilated by `δ`.
    WaypointBlocked(usize),
}

impl PerforationOutcome {
    pub fn witness(&self) -> Option<&Trajectory> {
        match self {
            PerforationOutcome::Witness(t) => Some(t),
            _ => None,
        }
    }
}

/// Searches for a continuous tube `σ ⊕ [±δ]` inside the arena and clear of
/// obstacles whose cells cover the waypoints in route order.
///
/// Breadth-first over (cell, waypoints covered so far) with unit Chebyshev
/// moves, so the search is complete and the witness is shortest.
pub fn check_perforation(task: &TaskConfig, delta: u64) -> PerforationOutcome {
    let arena = task.position_arena();
    let dim = arena.dim();
    let blocked = minkowski_dilate(&task.obstacles, &MoveSet::cube(dim, delta as i64), None)
        .expect("obstacles are position vectors");
    if let Some(i) = task.route.iter().position(|w| blocked.contains(w)) {
        return PerforationOutcome::WaypointBlocked(i);
    }
    let Some(inner) = shrink(&arena, delta) else {
        return PerforationOutcome::NoTube;
    };
    let route = &task.route;
    let n = route.len();
    let cells = inner.cell_count();
    let free: Vec<bool> = inner.iter().map(|c| !blocked.contains(&c)).collect();
    let advance = |c: &[i64], mut j: usize| {
        while j < n && chebyshev(c, &route[j]) <= delta {
            j += 1;
        }
        j
    };

    // State id = cell * (n + 1) + covered.
    let mut parent: Vec<Option<usize>> = vec![None; cells * (n + 1)];
    let mut seen = vec![false; cells * (n + 1)];
    let mut queue = VecDeque::new();
    for (i, c) in inner.iter().enumerate() {
        if !free[i] {
            continue;
        }
        let j = advance(&c, 0);
        if j >= 1 {
            let id = i * (n + 1) + j;
            if !seen[id] {
                seen[id] = true;
                queue.push_back(id);
            }
        }
    }
    let steps = MoveSet::cube(dim, 1);
    while let Some(id) = queue.pop_front() {
        let (i, j) = (id / (n + 1), id % (n + 1));
        if j == n {
            let mut path = vec![inner.point(i)];
            let mut cur = id;
            while let Some(p) = parent[cur] {
                path.push(inner.point(p / (n + 1)));
                cur = p;
            }
            path.reverse();
            return PerforationOutcome::Witness(Trajectory::new(path).expect("non-empty path"));
        }
        let c = inner.point(i);
        for s in steps.iter().filter(|s| !s.is_zero()) {
            let nc = c.add(s);
            let Some(ni) = inner.index_of(&nc) else { continue };
            if !free[ni] {
                continue;
            }
            let nid = ni * (n + 1) + advance(&nc, j);
            if !seen[nid] {
                seen[nid] = true;
                parent[nid] = Some(id);
                queue.push_back(nid);
            }
        }
    }
    PerforationOutcome::NoTube
}

fn shrink(b: &ScopeBox, by: u64) -> Option<ScopeBox> {
    let by = by as i64;
    let lo: Vec<i64> = b.lo().iter().map(|v| v + by).collect();
    let hi: Vec<i64> = b.hi().iter().map(|v| v - by).collect();
    ScopeBox::new(lo, hi).ok()
}

/// The largest `δ` admitting a perforation witness.
pub fn perforation_width(task: &TaskConfig) -> Result<u64> {
    (0..=task.position_arena().diameter())
        .rev()
        .find(|&d| check_perforation(task, d).witness().is_some())
        .ok_or(Error::NotPerforated)
}

/// `max_d min_{x ∈ traj, k} ‖f̂(x, 0, d, k)|_p‖∞ < δ`, with `k` running over
/// `1..=|traj|`.
pub fn robust_trackable(g: &ModalGame, traj: &Trajectory, delta: u64) -> bool {
    let mut off = vec![0; g.dim()];
    let ks: Vec<usize> = if g.dynamics().is_time_invariant() {
        vec![1]
    } else {
        (1..=traj.len()).collect()
    };
    let mut lhs = 0;
    for d in g.disturbances().iter() {
        let mut least: Option<u64> = None;
        for x in traj.points() {
            for &k in &ks {
                let n = drift(g, x, d, k, &mut off).0;
                least = Some(least.map_or(n, |l| l.min(n)));
            }
        }
        lhs = lhs.max(least.unwrap_or(0));
    }
    lhs < delta
}

/// `⌊δ_O / δ⌋`; zero for `δ = 0`.
pub fn delay_bound(delta: u64, delta_o: u64) -> u64 {
    delta_o.checked_div(delta).unwrap_or(0)
}

/// `min_{p' ∈ goal} ⌊2σ‖p - p'‖₂ / (v_min + v_max)⌋`, exact in integers.
pub fn horizon_heuristic(p: &[i64], goal: &Region, sigma: u64, v_min: i64, v_max: i64) -> u64 {
    let speed = (v_min + v_max).max(1) as u128;
    goal.iter()
        .map(|q| {
            let sq: u128 = p
                .iter()
                .zip(q.iter())
                .map(|(a, b)| {
                    let d = (a - b).unsigned_abs() as u128;
                    d * d
                })
                .sum();
            let scaled = 4 * (sigma as u128) * (sigma as u128) * sq;
            (scaled.isqrt() / speed) as u64
        })
        .min()
        .unwrap_or(0)
}

/// `N · max λ < ⊤`.
pub fn check_stage_cost_bound(g: &ModalGame) -> bool {
    (g.horizon() as u128) * (g.max_stage_cost() as u128) < g.top_bound() as u128
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellFormedReport {
    pub perforated: bool,
    pub witness: Option<Trajectory>,
    pub locally_controllable: bool,
    pub delta: u64,
    pub delta_lower: u64,
    pub delta_lower_empty: bool,
    pub delta_exceeds_lower: bool,
    pub delta_goal: u64,
    pub perforation_width: Option<u64>,
    pub delay_bound: u64,
    pub horizon_hint: u64,
    pub stage_cost_ok: bool,
    pub x0_safe: bool,
    pub waypoints_clear: bool,
    pub overall: bool,
    pub diagnostics: Vec<String>,
}

impl fmt::Display for WellFormedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u64>| v.map_or("none".to_string(), |v| v.to_string());
        writeln!(f, "perforated={}", self.perforated)?;
        writeln!(
            f,
            "witness_length={}",
            self.witness.as_ref().map_or(0, Trajectory::len)
        )?;
        writeln!(f, "locally_controllable={}", self.locally_controllable)?;
        writeln!(f, "delta={}", self.delta)?;
        writeln!(f, "delta_lower={}", self.delta_lower)?;
        writeln!(f, "delta_lower_empty_domain={}", self.delta_lower_empty)?;
        writeln!(f, "delta_exceeds_lower={}", self.delta_exceeds_lower)?;
        writeln!(f, "delta_goal={}", self.delta_goal)?;
        writeln!(f, "perforation_width={}", opt(self.perforation_width))?;
        writeln!(f, "delay_bound={}", self.delay_bound)?;
        writeln!(f, "horizon_hint={}", self.horizon_hint)?;
        writeln!(f, "stage_cost_ok={}", self.stage_cost_ok)?;
        writeln!(f, "x0_safe={}", self.x0_safe)?;
        writeln!(f, "waypoints_clear={}", self.waypoints_clear)?;
        writeln!(f, "overall={}", self.overall)?;
        for d in &self.diagnostics {
            writeln!(f, "diagnostic={d}")?;
        }
        Ok(())
    }
}

/// Runs every checker on `cfg`. Failures become report fields.
pub fn well_formed(cfg: &Configuration) -> WellFormedReport {
    let task = &cfg.task;
    let delta = cfg.delta();
    let mut diagnostics = Vec::new();

    let perforation = check_perforation(task, delta);
    let waypoints_clear = !matches!(perforation, PerforationOutcome::WaypointBlocked(_));
    if let PerforationOutcome::WaypointBlocked(i) = perforation {
        diagnostics.push(format!("waypoint {i} lies within {delta} cells of an obstacle"));
    }
    let witness = perforation.witness().cloned();
    let perforated = witness.is_some();
    if !perforated {
        diagnostics.push(format!(
            "no obstacle-free tube of half-width {delta} covers the route"
        ));
    }
    let width = perforation_width(task).ok();
    let delay = width.map_or(0, |w| delay_bound(delta, w));
    if delay < 1 {
        diagnostics.push(format!(
            "delay bound {delay} below 1 (perforation width {})",
            width.map_or("none".into(), |w| w.to_string())
        ));
    }

    let locally_controllable =
        check_local_controllability(&cfg.template.controls, &cfg.template.disturbances);
    if !locally_controllable {
        diagnostics.push("some disturbance cannot be countered by any control".into());
    }

    let x0_safe = !task.is_obstacle(&cfg.x0);
    if !x0_safe {
        diagnostics.push(format!("start state {} lies in the unsafe region", cfg.x0));
    }

    let pos0 = task.position_of(&cfg.x0);
    let final_goal = Region::from_cells(pos0.dim(), task.route.last().cloned()).expect("one waypoint");
    let horizon_hint = horizon_heuristic(
        &pos0,
        &final_goal,
        cfg.sigma,
        task.space.v_min(),
        task.space.v_max(),
    );

    let (delta_lower, delta_lower_empty, delta_goal, stage_cost_ok) = match cfg.arena_game() {
        Ok(g) => {
            let lower = delta_lower_bound(&g);
            (
                lower.value,
                lower.empty_domain,
                delta_goal_bound(&g),
                check_stage_cost_bound(&g),
            )
        }
        Err(e) => {
            diagnostics.push(format!("arena game: {e}"));
            (0, true, 0, false)
        }
    };
    if !stage_cost_ok {
        diagnostics.push("horizon times the largest stage cost reaches the top bound".into());
    }
    if delta_lower_empty {
        diagnostics.push("no moving state in the drift bound domain; bound reported as 0".into());
    }

    let overall =
        perforated && locally_controllable && delay >= 1 && stage_cost_ok && x0_safe && waypoints_clear;
    WellFormedReport {
        perforated,
        witness,
        locally_controllable,
        delta,
        delta_lower,
        delta_lower_empty,
        delta_exceeds_lower: delta > delta_lower,
        delta_goal,
        perforation_width: width,
        delay_bound: delay,
        horizon_hint,
        stage_cost_ok,
        x0_safe,
        waypoints_clear,
        overall,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::game::GameSpace;
    use crate::lattice::StateVec;

    fn line_moves(v: &[i64]) -> MoveSet {
        MoveSet::new(v.iter().map(|&x| StateVec::from([x]))).unwrap()
    }

    #[test]
    fn local_controllability_examples() {
        assert!(check_local_controllability(
            &line_moves(&[-1, 0, 1]),
            &line_moves(&[-1, 0, 1])
        ));
        assert!(!check_local_controllability(
            &line_moves(&[-1, 0, 1]),
            &line_moves(&[-2, 0, 2])
        ));
        assert!(check_local_controllability(&line_moves(&[0]), &line_moves(&[0])));
    }

    #[test]
    fn delta_bounds() {
        let int3 = fixtures::int3();
        assert_eq!(delta_lower_bound(&int3).value, 1);
        let line = fixtures::line5();
        assert_eq!(
            delta_lower_bound(&line),
            DeltaBound {
                value: 0,
                empty_domain: false
            }
        );
        assert_eq!(delta_lower_bound(&fixtures::gap9()).value, 1);

        assert_eq!(delta_goal_bound(&line), 0);
        assert_eq!(delta_goal_bound(&fixtures::gap9()), 1);
        assert_eq!(delta_goal_bound(&int3), 3);
    }

    fn task(arena: ScopeBox, route: Vec<StateVec>, obstacles: Region) -> TaskConfig {
        let space = GameSpace::positional(arena, 1, 1).unwrap();
        TaskConfig::new(space, route, obstacles, 1).unwrap()
    }

    fn gap9_task(gap_rows: &[i64]) -> TaskConfig {
        task(
            ScopeBox::new([0, 0], [8, 4]).unwrap(),
            vec![[0, 2].into(), [8, 2].into()],
            fixtures::gap9_wall(gap_rows),
        )
    }

    #[test]
    fn perforation_examples() {
        let t = gap9_task(&[2]);
        let w = check_perforation(&t, 0);
        let w = w.witness().expect("tube through the gap");
        assert!(w.is_continuous());
        assert!(w.points().contains(&StateVec::from([4, 2])));
        assert_eq!(check_perforation(&gap9_task(&[]), 0), PerforationOutcome::NoTube);

        let open = task(
            ScopeBox::new([0, 0], [8, 4]).unwrap(),
            vec![[0, 2].into(), [8, 2].into()],
            Region::empty(2),
        );
        let w = check_perforation(&open, 0);
        let w = w.witness().unwrap();
        let completion = Trajectory::new(open.route.clone())
            .unwrap()
            .continuous_completion();
        assert_eq!(w.len(), completion.len());

        assert_eq!(
            check_perforation(&gap9_task(&[2]), 4),
            PerforationOutcome::WaypointBlocked(0)
        );
    }

    #[test]
    fn perforation_widths() {
        assert_eq!(perforation_width(&gap9_task(&[2])), Ok(0));
        assert_eq!(perforation_width(&gap9_task(&[0, 1, 2, 3, 4])), Ok(2));
        let square = task(
            ScopeBox::new([0, 0], [8, 8]).unwrap(),
            vec![[1, 1].into(), [4, 4].into(), [7, 7].into()],
            Region::empty(2),
        );
        assert_eq!(perforation_width(&square), Ok(4));
        assert_eq!(perforation_width(&gap9_task(&[])), Err(Error::NotPerforated));
    }

    #[test]
    fn robust_tracking_examples() {
        let line = fixtures::line5();
        let t = Trajectory::new(vec![[0].into(), [1].into()]).unwrap();
        assert!(robust_trackable(&line, &t, 1));
        assert!(robust_trackable(
            &line,
            &Trajectory::new(vec![[2].into()]).unwrap(),
            1
        ));

        let g = fixtures::gap9();
        let w = check_perforation(&gap9_task(&[2]), 0).witness().cloned().unwrap();
        assert!(!robust_trackable(&g, &w, 1));
        assert!(robust_trackable(&g, &w, 2));
    }

    #[test]
    fn delay_examples() {
        assert_eq!(delay_bound(2, 5), 2);
        assert_eq!(delay_bound(2, 4), 2);
        assert_eq!(delay_bound(3, 2), 0);
    }

    #[test]
    fn horizon_examples() {
        let goal = Region::from_cells(3, [StateVec::from([10, 0, 0])]).unwrap();
        assert_eq!(horizon_heuristic(&[0, 0, 0], &goal, 1, 1, 3), 5);
        assert_eq!(horizon_heuristic(&[10, 0, 0], &goal, 1, 1, 3), 0);
        assert_eq!(horizon_heuristic(&[0, 0, 0], &goal, 3, 1, 3), 15);
    }

    #[test]
    fn stage_cost_bound_examples() {
        let line = fixtures::line5();
        assert!(check_stage_cost_bound(&line));
        let mut def = line.def().clone();
        def.top_bound = 4;
        assert!(!check_stage_cost_bound(&ModalGame::new(def).unwrap()));
        let mut def = line.def().clone();
        def.weights.q = vec![0];
        def.horizon = 1_000_000;
        assert!(check_stage_cost_bound(&ModalGame::new(def).unwrap()));
    }
}
