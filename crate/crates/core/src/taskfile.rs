//! The TOML task file: a serialised [`Configuration`].
//!
//! ```toml
//! [arena]
//! lo = [0, 0]
//! hi = [8, 4]
//!
//! [dynamics]
//! family = "kinematic"   # or "double_integrator"
//! v_max = 1
//!
//! [players]
//! U = [[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 0], [0, 1], [1, -1], [1, 0], [1, 1]]
//! D = [[0, -1], [0, 0], [0, 1]]
//!
//! [weights]
//! P = [0, 0]
//! Q = [1, 1]
//! R = [0, 0]
//!
//! [costs]
//! top_bound = 1000000
//!
//! [route]
//! waypoints = [[0, 2], [8, 2]]
//!
//! [obstacles]
//! cells = [[4, 0], [4, 1], [4, 3], [4, 4]]
//!
//! [robustness]
//! delta = 1
//! sigma = 1
//!
//! [horizon]
//! initial_N = 12
//! delta_I = 2
//! scope_margin = 1
//! max_extensions = 3
//!
//! [run]
//! adversary = "zero"
//! seed = 0
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostWeights, DoubleIntegrator, Dynamics, GameSpace, Kinematic, Role};
use crate::lattice::{MoveSet, Region, ScopeBox, StateVec};
use crate::player::{AdversaryModel, Configuration, GameTemplate, TaskConfig};
use crate::scope::HyperPolicyConfig;

const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub arena: ArenaSection,
    pub dynamics: DynamicsSection,
    pub players: PlayersSection,
    pub weights: WeightsSection,
    pub costs: CostsSection,
    pub route: RouteSection,
    #[serde(default, skip_serializing_if = "ObstaclesSection::is_empty")]
    pub obstacles: ObstaclesSection,
    pub robustness: RobustnessSection,
    pub horizon: HorizonSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaSection {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `x' = x + u + d` on every axis.
    Kinematic,
    /// First half of the axes are positions, second half velocities.
    DoubleIntegrator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub family: Family,
    pub v_max: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min: Option<i64>,
    /// Disables the crossing shield when false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossing_shield: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayersSection {
    #[serde(rename = "U")]
    pub u: Vec<Vec<i64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(rename = "P")]
    pub p: Vec<u64>,
    #[serde(rename = "Q")]
    pub q: Vec<u64>,
    #[serde(rename = "R")]
    pub r: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    pub top_bound: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSection {
    pub waypoints: Vec<Vec<i64>>,
    /// Full start state; defaults to the first waypoint at rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstaclesSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxSpec>,
}

impl ObstaclesSection {
    fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.boxes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    pub delta: u64,
    pub sigma: u64,
    /// Half-width of the segment goal cuboid; defaults to `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_radius: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsafe_margin: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    #[serde(rename = "initial_N")]
    pub initial_n: usize,
    #[serde(rename = "delta_I")]
    pub delta_i: usize,
    pub scope_margin: u64,
    pub max_extensions: usize,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    #[default]
    Zero,
    Random,
    Worst,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub adversary: AdversaryKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl RunSection {
    pub fn adversary_model(&self) -> AdversaryModel {
        match self.adversary {
            AdversaryKind::Zero => AdversaryModel::Zero,
            AdversaryKind::Random => AdversaryModel::Random(self.seed),
            AdversaryKind::Worst => AdversaryModel::Worst,
        }
    }
}

fn moves(rows: &[Vec<i64>], what: &str) -> Result<MoveSet> {
    MoveSet::new(rows.iter().cloned().map(StateVec::from))
        .map_err(|e| Error::TaskFile(format!("{what}: {e}")))
}

impl TaskFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::TaskFile(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::TaskFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("task files contain only integers, strings and arrays")
    }

    fn space(&self) -> Result<GameSpace> {
        let arena = ScopeBox::new(self.arena.lo.clone(), self.arena.hi.clone())?;
        let m = arena.dim();
        let roles = match self.dynamics.family {
            Family::Kinematic => vec![Role::Position; m],
            Family::DoubleIntegrator => {
                if m % 2 != 0 {
                    return Err(Error::TaskFile(
                        "double integrator needs as many velocity axes as position axes".into(),
                    ));
                }
                let mut r = vec![Role::Position; m / 2];
                r.extend(vec![Role::Velocity; m / 2]);
                r
            }
        };
        GameSpace::new(
            arena,
            roles,
            self.dynamics.v_max,
            self.dynamics.v_min.unwrap_or(1),
        )
    }

    /// Builds and validates the configuration.
    pub fn to_configuration(&self) -> Result<Configuration> {
        let space = self.space()?;
        let dynamics: Arc<dyn Dynamics> = match self.dynamics.family {
            Family::Kinematic => Arc::new(Kinematic::for_space(&space)),
            Family::DoubleIntegrator => Arc::new(DoubleIntegrator::for_space(&space)?),
        };
        let pdim = space.position_axes().len();
        let mut obstacles = Region::empty(pdim);
        for c in &self.obstacles.cells {
            obstacles.insert(c.clone().into())?;
        }
        for b in &self.obstacles.boxes {
            let b = ScopeBox::new(b.lo.clone(), b.hi.clone())?;
            for c in b.iter() {
                obstacles.insert(c)?;
            }
        }
        let route: Vec<StateVec> = self.route.waypoints.iter().cloned().map(StateVec::from).collect();
        let delta = self.robustness.delta;
        let task = TaskConfig::new(space, route, obstacles, delta)?;
        let x0 = match &self.route.start {
            Some(s) => StateVec::from(s.clone()),
            None => {
                let mut x = vec![0; task.arena().dim()];
                for (j, &a) in task.position_axes().iter().enumerate() {
                    x[a] = task.route[0][j];
                }
                x.into()
            }
        };
        let controls = moves(&self.players.u, "U")?;
        let disturbances = moves(&self.players.d, "D")?;
        for (what, set) in [("U", &controls), ("D", &disturbances)] {
            if set.dim() != dynamics.move_dim() {
                return Err(Error::TaskFile(format!(
                    "{what} moves have dimension {}, dynamics expect {}",
                    set.dim(),
                    dynamics.move_dim()
                )));
            }
            if !set.contains_zero() {
                return Err(Error::TaskFile(format!("{what} must contain the zero move")));
            }
        }
        let w = &self.weights;
        if w.p.len() != task.arena().dim()
            || w.q.len() != dynamics.move_dim()
            || w.r.len() != dynamics.move_dim()
        {
            return Err(Error::TaskFile(
                "weight vector lengths do not match the dimensions".into(),
            ));
        }
        if delta < 1 {
            return Err(Error::TaskFile("robustness delta must be at least 1".into()));
        }
        if self.robustness.sigma < 1 {
            return Err(Error::TaskFile("sigma must be at least 1".into()));
        }
        let cfg = Configuration {
            template: GameTemplate {
                dynamics,
                controls,
                disturbances,
                weights: CostWeights {
                    p: w.p.clone(),
                    q: w.q.clone(),
                    r: w.r.clone(),
                },
                top_bound: self.costs.top_bound,
                crossing_shield: self.dynamics.crossing_shield.unwrap_or(true),
            },
            hyper: HyperPolicyConfig {
                delta,
                initial_horizon: self.horizon.initial_n,
                horizon_step: self.horizon.delta_i,
                scope_margin: self.horizon.scope_margin,
                max_extensions: self.horizon.max_extensions,
            },
            task,
            x0,
            sigma: self.robustness.sigma,
            goal_radius: self.robustness.goal_radius.unwrap_or(delta),
            unsafe_margin: self.robustness.unsafe_margin.unwrap_or(0),
            max_steps: self.run.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
