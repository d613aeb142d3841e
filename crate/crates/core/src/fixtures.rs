//! Small named desk instances used by tests, examples and the CLI fixtures.

use std::sync::Arc;

use crate::game::{CostWeights, DoubleIntegrator, GameDef, GameSpace, Kinematic, ModalGame, Role};
use crate::lattice::{MoveSet, Region, ScopeBox, StateVec};

const TOP_BOUND: u64 = 1_000_000;

fn region(dim: usize, cells: impl IntoIterator<Item = StateVec>) -> Region {
    Region::from_cells(dim, cells).expect("fixture cells share one dimension")
}

/// 1-D kinematic corridor `0..4`, goal `{4}`, unit control cost, `N = 5`.
pub fn line5() -> ModalGame {
    let arena = ScopeBox::new([0], [4]).unwrap();
    let space = GameSpace::positional(arena.clone(), 1, 1).unwrap();
    ModalGame::new(GameDef {
        dynamics: Arc::new(Kinematic::for_space(&space)),
        scope: arena,
        controls: MoveSet::cube(1, 1),
        disturbances: MoveSet::zero(1),
        goal: region(1, [StateVec::from([4])]),
        unsafe_region: Region::empty(1),
        weights: CostWeights {
            p: vec![0],
            q: vec![1],
            r: vec![0],
        },
        horizon: 5,
        top_bound: TOP_BOUND,
        delta: 1,
        crossing_shield: true,
        space,
    })
    .unwrap()
}

/// The wall column `x = 4` of the 9×5 GAP9 arena, minus the listed gap rows.
pub fn gap9_wall(gap_rows: &[i64]) -> Region {
    region(
        2,
        (0..=4)
            .filter(|y| !gap_rows.contains(y))
            .map(|y| StateVec::from([4, y])),
    )
}

fn gap9_with_wall(wall: Region) -> ModalGame {
    let arena = ScopeBox::new([0, 0], [8, 4]).unwrap();
    let space = GameSpace::positional(arena.clone(), 2, 1).unwrap();
    ModalGame::new(GameDef {
        dynamics: Arc::new(Kinematic::for_space(&space)),
        scope: arena,
        controls: MoveSet::cube(2, 1),
        disturbances: MoveSet::new([[0, 0].into(), [0, 1].into(), [0, -1].into()]).unwrap(),
        goal: region(2, [StateVec::from([8, 2])]),
        unsafe_region: wall,
        weights: CostWeights {
            p: vec![0, 0],
            q: vec![1, 1],
            r: vec![0, 0],
        },
        horizon: 12,
        top_bound: TOP_BOUND,
        delta: 1,
        crossing_shield: true,
        space,
    })
    .unwrap()
}

/// 2-D kinematic arena `(0..8)×(0..4)` with a wall at `x = 4` open only at
/// `(4,2)`, vertical disturbance, goal `{(8,2)}`, `N = 12`.
pub fn gap9() -> ModalGame {
    gap9_with_wall(gap9_wall(&[2]))
}

/// GAP9 with the gap closed.
pub fn gap9_gapless() -> ModalGame {
    gap9_with_wall(gap9_wall(&[]))
}

/// GAP9 whose terminal region is the `[±1]` neighbourhood of `(8,2)`, the
/// goal shape used when GAP9 is played as a route segment.
pub fn gap9_segment() -> ModalGame {
    let g = gap9();
    let mut def = g.def().clone();
    def.goal = ScopeBox::new([7, 1], [8, 3])
        .map(|b| Region::from_box(&b))
        .unwrap();
    ModalGame::new(def).unwrap()
}

/// 1-D double integrator: `p ∈ 0..9`, `v ∈ -3..3`, `U = D = {-1,0,1}`,
/// `v_max = 3`, goal `p = 9` at any speed, `N = 6`.
pub fn int3() -> ModalGame {
    let arena = ScopeBox::new([0, -3], [9, 3]).unwrap();
    let space = GameSpace::new(arena.clone(), vec![Role::Position, Role::Velocity], 3, 1).unwrap();
    let goal = region(2, (-3..=3).map(|v| StateVec::from([9, v])));
    ModalGame::new(GameDef {
        dynamics: Arc::new(DoubleIntegrator::for_space(&space).unwrap()),
        scope: arena,
        controls: MoveSet::cube(1, 1),
        disturbances: MoveSet::cube(1, 1),
        goal,
        unsafe_region: Region::empty(2),
        weights: CostWeights {
            p: vec![0, 0],
            q: vec![1],
            r: vec![0],
        },
        horizon: 6,
        top_bound: TOP_BOUND,
        delta: 1,
        crossing_shield: true,
        space,
    })
    .unwrap()
}

/// 1-D kinematic corridor `0..4` with long jumps `U = [±2]` and an unsafe
/// cell at `2`: without the crossing shield the controller can jump it.
pub fn jump_wall() -> ModalGame {
    let arena = ScopeBox::new([0], [4]).unwrap();
    let space = GameSpace::positional(arena.clone(), 2, 1).unwrap();
    ModalGame::new(GameDef {
        dynamics: Arc::new(Kinematic::for_space(&space)),
        scope: arena,
        controls: MoveSet::cube(1, 2),
        disturbances: MoveSet::zero(1),
        goal: region(1, [StateVec::from([4])]),
        unsafe_region: region(1, [StateVec::from([2])]),
        weights: CostWeights {
            p: vec![0],
            q: vec![1],
            r: vec![0],
        },
        horizon: 4,
        top_bound: TOP_BOUND,
        delta: 1,
        crossing_shield: true,
        space,
    })
    .unwrap()
}
