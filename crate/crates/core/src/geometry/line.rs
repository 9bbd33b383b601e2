use super::{Cell, CellShape, PointSet};
use crate::{Error, Result};

/// Midpoint intervals. Returns the cells (index-aligned with the input), the
/// point indices in coordinate order and each ordered cell's upper edge.
pub(super) fn tessellate(points: &PointSet) -> Result<(Vec<Cell>, Vec<usize>, Vec<f64>)> {
    let n = points.len();
    let xs = points.coords();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    for w in order.windows(2) {
        if xs[w[0]] == xs[w[1]] {
            return Err(Error::DuplicatePoints(w[0].min(w[1]), w[0].max(w[1])));
        }
    }

    let bounds = points.bounds()[0];
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(bounds.lo);
    edges.extend(order.windows(2).map(|w| 0.5 * (xs[w[0]] + xs[w[1]])));
    edges.push(bounds.hi);

    let mut cells: Vec<Option<Cell>> = vec![None; n];
    for (rank, &i) in order.iter().enumerate() {
        let (lo, hi) = (edges[rank], edges[rank + 1]);
        let mut neighbors = Vec::with_capacity(2);
        if rank > 0 {
            neighbors.push(order[rank - 1]);
        }
        if rank + 1 < n {
            neighbors.push(order[rank + 1]);
        }
        neighbors.sort_unstable();
        cells[i] = Some(Cell {
            point_index: i,
            measure: hi - lo,
            volume_quanta: 0.0,
            neighbors,
            shape: CellShape::Interval { lo, hi },
        });
    }
    let upper = edges[1..].to_vec();
    Ok((cells.into_iter().map(Option::unwrap).collect(), order, upper))
}
