//! Breadth-first search over valid boundaries, used as ground truth for
//! connectivity and as a reference path generator in tests.

use std::collections::VecDeque;

use ndarray::Array2;

use super::{crossed_edge, Move};
use crate::boundary_logic::InvalidBoundaryMaps;
use crate::Unit;

const MOVES: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

fn neighbours(inv: &InvalidBoundaryMaps, at: Unit) -> impl Iterator<Item = (Move, Unit)> + '_ {
    let (rows, cols) = inv.units();
    MOVES.into_iter().filter_map(move |mv| {
        let next = mv.apply(at, rows, cols)?;
        let (horizontal, r, c) = crossed_edge(at, mv)?;
        let blocked = if horizontal { inv.matrix_a[[r, c]] } else { inv.matrix_b[[r, c]] };
        (!blocked).then_some((mv, next))
    })
}

/// Units connected to `origin` through valid boundaries.
pub fn reachable(inv: &InvalidBoundaryMaps, origin: Unit) -> Array2<bool> {
    let mut seen = Array2::from_elem(inv.units(), false);
    let mut queue = VecDeque::from([origin]);
    seen[origin] = true;
    while let Some(at) = queue.pop_front() {
        for (_, next) in neighbours(inv, at) {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen
}

/// A shortest path from `origin` to `target`, if one exists.
pub fn shortest_path(inv: &InvalidBoundaryMaps, origin: Unit, target: Unit) -> Option<Vec<Move>> {
    let mut back: Array2<Option<(Move, Unit)>> = Array2::from_elem(inv.units(), None);
    let mut seen = Array2::from_elem(inv.units(), false);
    let mut queue = VecDeque::from([origin]);
    seen[origin] = true;
    while let Some(at) = queue.pop_front() {
        if at == target {
            let mut path = Vec::new();
            let mut cur = target;
            while let Some((mv, prev)) = back[cur] {
                path.push(mv);
                cur = prev;
            }
            path.reverse();
            return Some(path);
        }
        for (mv, next) in neighbours(inv, at) {
            if !seen[next] {
                seen[next] = true;
                back[next] = Some((mv, at));
                queue.push_back(next);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_search::replay_moves;

    #[test]
    fn wall_splits_grid() {
        let mut inv = InvalidBoundaryMaps::clear(3, 3);
        for r in 0..3 {
            inv.matrix_a[[r, 0]] = true;
        }
        let seen = reachable(&inv, (0, 0));
        assert_eq!(seen.iter().filter(|&&s| s).count(), 3);
        assert!(shortest_path(&inv, (0, 0), (0, 2)).is_none());
    }

    #[test]
    fn shortest_path_replays() {
        let mut inv = InvalidBoundaryMaps::clear(3, 3);
        inv.matrix_a[[0, 0]] = true;
        let p = shortest_path(&inv, (0, 0), (0, 1)).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(replay_moves((0, 0), &p, &inv).unwrap(), (0, 1));
    }
}
