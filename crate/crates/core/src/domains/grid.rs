//! Grid layouts and their goal-oriented MDPs.
//!
//! A state is a free cell plus a payload flag (sample held, passenger
//! onboard, package carried). The agent moves with `N`, `S`, `E`, `W` and
//! picks up its payload with `Interact` at the pickup cell. Moves into walls
//! or obstacles leave the agent in place; successful moves slip and stay put
//! with the layout's slip probability. The goal is the goal cell with the
//! payload, and it is absorbing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Successor, TabularMdp};

/// `(x, y)`, with `y` growing southwards.
pub type Cell = (usize, usize);

pub const ACTION_NAMES: [&str; 5] = ["N", "S", "E", "W", "interact"];
pub const INTERACT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Coral,
    Eddy,
    AutonomyRoad,
    Pothole,
    Slippery,
    NarrowCorridor,
}

impl FeatureKind {
    /// Kebab-case name, as serialized.
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Coral => "coral",
            FeatureKind::Eddy => "eddy",
            FeatureKind::AutonomyRoad => "autonomy-road",
            FeatureKind::Pothole => "pothole",
            FeatureKind::Slippery => "slippery",
            FeatureKind::NarrowCorridor => "narrow-corridor",
        }
    }

    /// Fraction of free cells covered when a layout is sampled.
    pub fn default_density(self) -> f64 {
        match self {
            FeatureKind::Coral | FeatureKind::Pothole | FeatureKind::Slippery => 0.12,
            FeatureKind::Eddy | FeatureKind::AutonomyRoad | FeatureKind::NarrowCorridor => 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub obstacles: BTreeSet<Cell>,
    #[serde(default)]
    pub features: BTreeMap<FeatureKind, BTreeSet<Cell>>,
    /// Cells the agent may start from, with or without its payload.
    pub start_cells: BTreeSet<Cell>,
    /// Where the payload is picked up; `None` means it is carried from the start.
    pub pickup_cell: Option<Cell>,
    pub goal_cell: Cell,
    pub slip_probability: f64,
    /// Seed the layout was sampled with, if any.
    #[serde(default)]
    pub seed: u64,
}

impl GridSpec {
    /// Empty `width × height` grid carrying the payload from the start; every
    /// non-goal cell is a start cell.
    pub fn open(width: usize, height: usize, goal_cell: Cell) -> Self {
        let start_cells = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&c| c != goal_cell)
            .collect();
        Self {
            width,
            height,
            obstacles: BTreeSet::new(),
            features: BTreeMap::new(),
            start_cells,
            pickup_cell: None,
            goal_cell,
            slip_probability: 0.0,
            seed: 0,
        }
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && !self.obstacles.contains(&cell)
    }

    pub fn has(&self, kind: FeatureKind, cell: Cell) -> bool {
        self.features.get(&kind).is_some_and(|cells| cells.contains(&cell))
    }

    pub fn features_at(&self, cell: Cell) -> Vec<FeatureKind> {
        self.features
            .iter()
            .filter(|(_, cells)| cells.contains(&cell))
            .map(|(&k, _)| k)
            .collect()
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&c| self.is_free(c))
            .collect()
    }

    /// Cell reached by moving from `cell` in direction `action`, if any.
    pub fn neighbour(&self, cell: Cell, action: usize) -> Option<Cell> {
        let (x, y) = cell;
        let next = match action {
            0 => (x, y.checked_sub(1)?),
            1 => (x, y + 1),
            2 => (x + 1, y),
            3 => (x.checked_sub(1)?, y),
            _ => return None,
        };
        self.is_free(next).then_some(next)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be at least 1×1".into());
        }
        if !(0.0..1.0).contains(&self.slip_probability) {
            return bad(format!("slip probability {} outside [0, 1)", self.slip_probability));
        }
        if !self.is_free(self.goal_cell) {
            return bad(format!("goal cell {:?} is blocked or out of bounds", self.goal_cell));
        }
        if let Some(p) = self.pickup_cell {
            if !self.is_free(p) {
                return bad(format!("pickup cell {p:?} is blocked or out of bounds"));
            }
        }
        if self.start_cells.is_empty() {
            return bad("no start cells".into());
        }
        if let Some(c) = self.start_cells.iter().find(|&&c| !self.is_free(c)) {
            return bad(format!("start cell {c:?} is blocked or out of bounds"));
        }
        for (kind, cells) in &self.features {
            if let Some(c) = cells.iter().find(|&&c| !self.in_bounds(c)) {
                return bad(format!("{kind:?} cell {c:?} is out of bounds"));
            }
        }
        if let Some(c) = self.obstacles.iter().find(|&&c| !self.in_bounds(c)) {
            return bad(format!("obstacle {c:?} is out of bounds"));
        }
        Ok(())
    }
}

/// Indexing between states and `(cell, payload)` pairs.
#[derive(Debug, Clone)]
pub(crate) struct StateSpace {
    free: Vec<Cell>,
    index: BTreeMap<Cell, usize>,
    /// Payload flag of each layer; one layer when the payload is pre-carried.
    layers: Vec<bool>,
}

impl StateSpace {
    pub(crate) fn new(spec: &GridSpec) -> Self {
        let free = spec.free_cells();
        let index = free.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let layers = if spec.pickup_cell.is_some() {
            vec![false, true]
        } else {
            vec![true]
        };
        Self { free, index, layers }
    }

    pub(crate) fn len(&self) -> usize {
        self.free.len() * self.layers.len()
    }

    pub(crate) fn state(&self, cell: Cell, carrying: bool) -> Option<usize> {
        let layer = self.layers.iter().position(|&l| l == carrying)?;
        Some(layer * self.free.len() + self.index.get(&cell)?)
    }

    pub(crate) fn cell(&self, state: usize) -> (Cell, bool) {
        let n = self.free.len();
        (self.free[state % n], self.layers[state / n])
    }
}

pub(crate) fn build_mdp(spec: &GridSpec, space: &StateSpace, discount: f64) -> Result<TabularMdp> {
    let goal = space
        .state(spec.goal_cell, true)
        .expect("validated goal cell is free");
    // Episodes may begin in any layer: a start cell with or without payload.
    let start_states: Vec<usize> = (0..space.len())
        .filter(|&s| s != goal && spec.start_cells.contains(&space.cell(s).0))
        .collect();
    if start_states.is_empty() {
        return Err(Error::InvalidModel("every start cell is the goal".into()));
    }
    let slip = spec.slip_probability;
    TabularMdp::from_fn(space.len(), ACTION_NAMES.len(), goal, start_states, discount, |s, a| {
        let (cell, carrying) = space.cell(s);
        let stay = vec![Successor::new(s, 1.0)];
        if s == goal {
            return stay;
        }
        if a == INTERACT {
            return match spec.pickup_cell {
                Some(p) if p == cell && !carrying => {
                    vec![Successor::new(space.state(cell, true).expect("carrying layer"), 1.0)]
                }
                _ => stay,
            };
        }
        match spec.neighbour(cell, a) {
            None => stay,
            Some(next) => {
                let next = space.state(next, carrying).expect("free neighbour");
                if slip > 0.0 {
                    vec![Successor::new(next, 1.0 - slip), Successor::new(s, slip)]
                } else {
                    vec![Successor::new(next, 1.0)]
                }
            }
        }
    })
}

/// States with a positive-probability path to the goal under some policy.
pub fn can_reach_goal(mdp: &TabularMdp) -> Vec<bool> {
    let n = mdp.num_states();
    let mut predecessors = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            for x in mdp.successors(s, a) {
                if x.prob > 0.0 {
                    predecessors[x.state].push(s);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    seen[mdp.goal_state()] = true;
    let mut queue = VecDeque::from([mdp.goal_state()]);
    while let Some(s) = queue.pop_front() {
        for &p in &predecessors[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}
