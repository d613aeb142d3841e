//! Seeded random games shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ra_ddp::game::{CostWeights, DoubleIntegrator, GameDef, GameSpace, Kinematic, Role};
use ra_ddp::player::Configuration;
use ra_ddp::taskfile::TaskFile;
use ra_ddp::{ModalGame, MoveSet, Region, ScopeBox, StateVec};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_config(name: &str) -> Configuration {
    TaskFile::load(fixture_path(name))
        .and_then(|t| t.to_configuration())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The zero move plus between `lo - 1` and `hi - 1` other elements of `pool`.
fn sample_moves(rng: &mut ChaCha8Rng, pool: &MoveSet, lo: usize, hi: usize) -> MoveSet {
    let n = rng.gen_range(lo..=hi);
    let others: Vec<&StateVec> = pool.iter().filter(|m| !m.is_zero()).collect();
    let picked = others.choose_multiple(rng, n - 1).map(|m| (*m).clone());
    MoveSet::new(picked.chain([StateVec::zeros(pool.dim())])).unwrap()
}

fn sample_cells(rng: &mut ChaCha8Rng, scope: &ScopeBox, lo: usize, hi: usize) -> Region {
    let n = rng.gen_range(lo..=hi);
    let cells: Vec<StateVec> = scope.iter().collect();
    Region::from_cells(scope.dim(), cells.choose_multiple(rng, n).cloned()).unwrap()
}

/// A random game within the oracle's reach: at most 200 scope cells,
/// `N <= 6`, at most 9 controls and 9 disturbances, and a game tree small
/// enough to enumerate.
pub fn random_game(seed: u64) -> ModalGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = rng.gen_range(0..3);
    let (scope, space) = match family {
        0 => {
            let len = rng.gen_range(4..=40);
            let scope = ScopeBox::new([0], [len - 1]).unwrap();
            let pad = rng.gen_range(0..=1);
            let space = GameSpace::positional(scope.dilate(pad, None), 2, 1).unwrap();
            (scope, space)
        }
        1 => {
            let (w, h) = (rng.gen_range(3..=14), rng.gen_range(3..=14));
            let scope = ScopeBox::new([0, 0], [w - 1, h - 1]).unwrap();
            let pad = rng.gen_range(0..=1);
            let space = GameSpace::positional(scope.dilate(pad, None), 2, 1).unwrap();
            (scope, space)
        }
        _ => {
            let v_max = rng.gen_range(1..=3);
            let len = rng.gen_range(4..=12);
            let scope = ScopeBox::new([0, -v_max], [len - 1, v_max]).unwrap();
            let space =
                GameSpace::new(scope.clone(), vec![Role::Position, Role::Velocity], v_max, 1).unwrap();
            (scope, space)
        }
    };
    let move_dim = if family == 1 { 2 } else { 1 };
    let dynamics: Arc<dyn ra_ddp::game::Dynamics> = if family == 2 {
        Arc::new(DoubleIntegrator::for_space(&space).unwrap())
    } else {
        Arc::new(Kinematic::for_space(&space))
    };

    let control_pool = MoveSet::cube(move_dim, if move_dim == 1 { 2 } else { 1 });
    let controls = sample_moves(&mut rng, &control_pool, 1, control_pool.len().min(9));
    let disturbance_pool = MoveSet::cube(move_dim, 1);
    let disturbances = sample_moves(&mut rng, &disturbance_pool, 1, disturbance_pool.len().min(4));

    // Keep (|U|·|D|)^(N-1) enumerable.
    let branching = (controls.len() * disturbances.len()) as f64;
    let max_n = (1..=6)
        .rev()
        .find(|&n| branching.powi(n as i32 - 1) <= 2.0e5)
        .unwrap_or(1);
    let horizon = rng.gen_range(1..=max_n);

    let cells = scope.cell_count();
    let goal = sample_cells(&mut rng, &scope, 1, 5.min(cells));
    let mut unsafe_region = sample_cells(&mut rng, &scope, 0, cells / 6);
    if family == 2 {
        // Obstacles are positions: block every velocity at a sampled cell.
        let goal_p: Vec<i64> = goal.iter().map(|c| c.coords()[0]).collect();
        let hit: Vec<i64> = unsafe_region
            .iter()
            .map(|c| c.coords()[0])
            .filter(|p| !goal_p.contains(p))
            .collect();
        unsafe_region = Region::from_cells(2, scope.iter().filter(|c| hit.contains(&c.coords()[0]))).unwrap();
    }
    if goal.difference(&unsafe_region).is_empty() {
        unsafe_region = unsafe_region.difference(&goal);
    }
    let m = scope.dim();
    let weights = CostWeights {
        p: (0..m).map(|_| rng.gen_range(0..=1)).collect(),
        q: (0..move_dim).map(|_| rng.gen_range(0..=3)).collect(),
        r: (0..move_dim).map(|_| rng.gen_range(0..=2)).collect(),
    };
    let tight = rng.gen_bool(0.3);
    let slack = rng.gen_range(1..=5);
    let g = ModalGame::new(GameDef {
        space,
        scope,
        dynamics,
        controls,
        disturbances,
        goal,
        unsafe_region,
        weights,
        horizon,
        top_bound: 1_000_000,
        delta: 1,
        crossing_shield: rng.gen_bool(0.7),
    })
    .unwrap();
    if !tight {
        return g;
    }
    // Close to the smallest bound the solver accepts, with room for one
    // extra stage.
    let mut def = g.def().clone();
    def.top_bound = g.max_stage_cost() * (horizon as u64 + 1) + slack;
    ModalGame::new(def).unwrap()
}
