//! Path planning over the unit grid that never crosses an invalid boundary.
//!
//! The planner is a column relay:
//!
//! 1. units in the origin's column are reached by straight up/down runs that
//!    cross no invalid vertical boundary;
//! 2. a unit in an adjacent column is reached through a turning unit of the
//!    already planned column, one horizontal step and a straight vertical run;
//! 3. farther columns repeat step 2 with the previous column as relay, and
//!    after each column is planned, gaps in the column behind it are filled by
//!    turning back from the new column.
//!
//! Turning units are searched nearest-row first, scanning outward, with ties
//! going to the smaller row index. The planner is heuristic by construction;
//! [`plan_with_retry`] reruns it on the transposed grid and from the other
//! origins to recover units it left behind. [`oracle`] holds the exhaustive
//! breadth-first search used to tell blocking from genuine dead ends.

mod montecarlo;
pub mod oracle;

use std::fmt;

use crate::boundary_logic::InvalidBoundaryMaps;
use crate::error::{invalid, Error, Result};
use crate::Unit;

pub use montecarlo::{blocking_montecarlo, loglog_slope, random_invalid_maps, BlockingStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub fn letter(self) -> char {
        match self {
            Move::Up => 'U',
            Move::Down => 'D',
            Move::Left => 'L',
            Move::Right => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'U' => Some(Move::Up),
            'D' => Some(Move::Down),
            'L' => Some(Move::Left),
            'R' => Some(Move::Right),
            _ => None,
        }
    }

    /// The same move seen on the transposed grid.
    pub fn transposed(self) -> Self {
        match self {
            Move::Up => Move::Left,
            Move::Down => Move::Right,
            Move::Left => Move::Up,
            Move::Right => Move::Down,
        }
    }

    pub(crate) fn apply(self, (r, c): Unit, rows: usize, cols: usize) -> Option<Unit> {
        match self {
            Move::Up => r.checked_sub(1).map(|r| (r, c)),
            Move::Down => (r + 1 < rows).then_some((r + 1, c)),
            Move::Left => c.checked_sub(1).map(|c| (r, c)),
            Move::Right => (c + 1 < cols).then_some((r, c + 1)),
        }
    }
}

/// Boundary crossed by a move out of `unit`: `(horizontal?, row, col)`
/// indexing `matrix_a` (horizontal) or `matrix_b` (vertical).
pub(crate) fn crossed_edge(unit: Unit, mv: Move) -> Option<(bool, usize, usize)> {
    let (r, c) = unit;
    match mv {
        Move::Right => Some((true, r, c)),
        Move::Left => c.checked_sub(1).map(|c| (true, r, c)),
        Move::Down => Some((false, r, c)),
        Move::Up => r.checked_sub(1).map(|r| (false, r, c)),
    }
}

/// Which stage of [`plan_with_retry`] produced a unit's path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Primary,
    Transposed,
    /// Relayed through origin `origin` (index into the origin list).
    AlternateOrigin { origin: usize, transposed: bool },
    Unreachable,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Primary => f.write_str("primary"),
            Strategy::Transposed => f.write_str("transposed"),
            Strategy::AlternateOrigin { origin, transposed: false } => write!(f, "origin{origin}"),
            Strategy::AlternateOrigin { origin, transposed: true } => write!(f, "origin{origin}-transposed"),
            Strategy::Unreachable => f.write_str("unreachable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPlan {
    pub origin: Unit,
    rows: usize,
    cols: usize,
    steps: Vec<Option<Vec<Move>>>,
    strategy: Vec<Strategy>,
}

impl PathPlan {
    pub fn from_steps(origin: Unit, rows: usize, cols: usize, steps: Vec<Option<Vec<Move>>>) -> Result<Self> {
        if steps.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} units", rows * cols),
                actual: format!("{} entries", steps.len()),
            });
        }
        let strategy = steps
            .iter()
            .map(|s| if s.is_some() { Strategy::Primary } else { Strategy::Unreachable })
            .collect();
        Ok(Self { origin, rows, cols, steps, strategy })
    }

    pub fn units(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn path(&self, (r, c): Unit) -> Option<&[Move]> {
        self.steps[r * self.cols + c].as_deref()
    }

    pub fn strategy(&self, (r, c): Unit) -> Strategy {
        self.strategy[r * self.cols + c]
    }

    pub fn is_reachable(&self, unit: Unit) -> bool {
        self.path(unit).is_some()
    }

    pub fn unreachable(&self) -> Vec<Unit> {
        self.all_units().filter(|&u| !self.is_reachable(u)).collect()
    }

    pub fn reachable_count(&self) -> usize {
        self.steps.iter().filter(|s| s.is_some()).count()
    }

    fn all_units(&self) -> impl Iterator<Item = Unit> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }

    fn set(&mut self, (r, c): Unit, path: Vec<Move>, strategy: Strategy) {
        let i = r * self.cols + c;
        self.steps[i] = Some(path);
        self.strategy[i] = strategy;
    }

    /// Replays the path to `target`, checking every crossed boundary.
    /// Returns the unit the replay lands on.
    pub fn replay(&self, target: Unit, invalid_maps: &InvalidBoundaryMaps) -> Result<Unit> {
        let path = self
            .path(target)
            .ok_or_else(|| invalid(format!("unit {target:?} is unreachable")))?;
        replay_moves(self.origin, path, invalid_maps)
    }
}

/// Walks `moves` from `start`, failing on a grid exit or an invalid boundary.
pub fn replay_moves(start: Unit, moves: &[Move], invalid_maps: &InvalidBoundaryMaps) -> Result<Unit> {
    let (rows, cols) = invalid_maps.units();
    let mut at = start;
    for (i, &mv) in moves.iter().enumerate() {
        let next = mv
            .apply(at, rows, cols)
            .ok_or_else(|| invalid(format!("step {i} ({}) leaves the grid at {at:?}", mv.letter())))?;
        let (horizontal, r, c) = crossed_edge(at, mv).expect("in-grid move crosses a boundary");
        let blocked = if horizontal {
            invalid_maps.matrix_a[[r, c]]
        } else {
            invalid_maps.matrix_b[[r, c]]
        };
        if blocked {
            return Err(invalid(format!("step {i} ({}) crosses an invalid boundary at {at:?}", mv.letter())));
        }
        at = next;
    }
    Ok(at)
}

fn check_origin(invalid_maps: &InvalidBoundaryMaps, origin: Unit) -> Result<()> {
    let (rows, cols) = invalid_maps.units();
    if origin.0 >= rows || origin.1 >= cols {
        return Err(invalid(format!("origin {origin:?} is outside the {rows}x{cols} grid")));
    }
    Ok(())
}

struct Relay<'a> {
    inv: &'a InvalidBoundaryMaps,
    rows: usize,
    cols: usize,
    /// Segment id of each unit within its column; equal ids share a clear vertical run.
    segment: Vec<usize>,
    paths: Vec<Option<Vec<Move>>>,
}

impl<'a> Relay<'a> {
    fn new(inv: &'a InvalidBoundaryMaps) -> Self {
        let (rows, cols) = inv.units();
        let mut segment = vec![0; rows * cols];
        for c in 0..cols {
            let mut id = 0;
            for r in 0..rows {
                if r > 0 && inv.matrix_b[[r - 1, c]] {
                    id += 1;
                }
                segment[r * cols + c] = id;
            }
        }
        Self { inv, rows, cols, segment, paths: vec![None; rows * cols] }
    }

    fn seg(&self, r: usize, c: usize) -> usize {
        self.segment[r * self.cols + c]
    }

    fn reached(&self, r: usize, c: usize) -> bool {
        self.paths[r * self.cols + c].is_some()
    }

    fn vertical_run(from: usize, to: usize) -> impl Iterator<Item = Move> {
        let mv = if to < from { Move::Up } else { Move::Down };
        std::iter::repeat_n(mv, from.abs_diff(to))
    }

    /// Rows in nearest-first order around `t`, smaller row first on ties.
    fn scan_order(t: usize, rows: usize) -> impl Iterator<Item = usize> {
        (0..rows).flat_map(move |d| {
            let below = t.checked_sub(d);
            let above = (d > 0 && t + d < rows).then_some(t + d);
            below.into_iter().chain(above)
        })
    }

    fn origin_column(&mut self, (r0, c0): Unit) {
        for r in 0..self.rows {
            if self.seg(r, c0) == self.seg(r0, c0) {
                self.paths[r * self.cols + c0] = Some(Self::vertical_run(r0, r).collect());
            }
        }
    }

    /// Plans unreached units of `target` through turning units of the adjacent
    /// `source` column. Returns whether any unit was newly reached.
    fn fill_from(&mut self, target: usize, source: usize) -> bool {
        let mut grew = false;
        let step = if target > source { Move::Right } else { Move::Left };
        let boundary_col = target.min(source);
        for t in 0..self.rows {
            if self.reached(t, target) {
                continue;
            }
            let turn = Self::scan_order(t, self.rows).find(|&k| {
                self.reached(k, source)
                    && !self.inv.matrix_a[[k, boundary_col]]
                    && self.seg(k, target) == self.seg(t, target)
            });
            if let Some(k) = turn {
                let mut path = self.paths[k * self.cols + source].clone().expect("turning unit is reached");
                path.push(step);
                path.extend(Self::vertical_run(k, t));
                self.paths[t * self.cols + target] = Some(path);
                grew = true;
            }
        }
        grew
    }

    /// Turns back from column `from` towards `-step`, relaying for as long as
    /// each column gains units.
    fn turn_back(&mut self, from: usize, towards_right: bool) {
        let mut k = from;
        loop {
            let next = if towards_right { k + 1 } else { k.wrapping_sub(1) };
            if next >= self.cols || !self.fill_from(next, k) {
                break;
            }
            k = next;
        }
    }

    fn run(mut self, origin: Unit) -> Vec<Option<Vec<Move>>> {
        let c0 = origin.1;
        self.origin_column(origin);
        for c in c0 + 1..self.cols {
            self.fill_from(c, c - 1);
            self.turn_back(c, false);
        }
        for c in (0..c0).rev() {
            self.fill_from(c, c + 1);
            self.turn_back(c, true);
        }
        self.paths
    }
}

/// Column-relay plan from a single origin.
pub fn plan_paths(invalid_maps: &InvalidBoundaryMaps, origin: Unit) -> Result<PathPlan> {
    check_origin(invalid_maps, origin)?;
    let (rows, cols) = invalid_maps.units();
    PathPlan::from_steps(origin, rows, cols, Relay::new(invalid_maps).run(origin))
}

fn plan_transposed(invalid_maps: &InvalidBoundaryMaps, origin: Unit) -> Result<PathPlan> {
    let t = invalid_maps.transposed();
    let plan_t = plan_paths(&t, (origin.1, origin.0))?;
    let (rows, cols) = invalid_maps.units();
    let mut steps = vec![None; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            steps[r * cols + c] = plan_t
                .path((c, r))
                .map(|p| p.iter().map(|m| m.transposed()).collect::<Vec<_>>());
        }
    }
    PathPlan::from_steps(origin, rows, cols, steps)
}

/// Primary plan from `origins[0]`, then the transposed plan, then relays
/// through each further origin (direct and transposed) for units still missing.
pub fn plan_with_retry(invalid_maps: &InvalidBoundaryMaps, origins: &[Unit]) -> Result<PathPlan> {
    let (&first, rest) = origins
        .split_first()
        .ok_or_else(|| invalid("at least one origin is required"))?;
    for &o in origins {
        check_origin(invalid_maps, o)?;
    }
    let mut plan = plan_paths(invalid_maps, first)?;
    if plan.unreachable().is_empty() {
        return Ok(plan);
    }
    let fill = |plan: &mut PathPlan, other: &PathPlan, prefix: &[Move], strategy: Strategy| {
        for u in plan.unreachable() {
            if let Some(p) = other.path(u) {
                let mut path = prefix.to_vec();
                path.extend_from_slice(p);
                plan.set(u, path, strategy);
            }
        }
    };

    let transposed = plan_transposed(invalid_maps, first)?;
    fill(&mut plan, &transposed, &[], Strategy::Transposed);

    for (i, &o) in rest.iter().enumerate() {
        if plan.unreachable().is_empty() {
            break;
        }
        let Some(prefix) = plan.path(o).map(<[Move]>::to_vec) else {
            continue;
        };
        let direct = plan_paths(invalid_maps, o)?;
        fill(&mut plan, &direct, &prefix, Strategy::AlternateOrigin { origin: i + 1, transposed: false });
        let transposed = plan_transposed(invalid_maps, o)?;
        fill(&mut plan, &transposed, &prefix, Strategy::AlternateOrigin { origin: i + 1, transposed: true });
    }
    Ok(plan)
}
