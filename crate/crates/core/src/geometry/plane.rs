use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{AdjacencyMode, Cell, CellShape, GridIndex, PointSet, GEOM_TOL};
use crate::{Error, Result};

/// What produced a polygon edge: the box, or the bisector with another site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Boundary,
    Site(usize),
}

/// Convex polygon; `tags[k]` labels the edge from vertex `k` to `k + 1`.
#[derive(Debug, Clone, Default)]
struct Polygon {
    verts: Vec<[f64; 2]>,
    tags: Vec<EdgeTag>,
}

impl Polygon {
    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            verts: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            tags: vec![EdgeTag::Boundary; 4],
        }
    }

    fn max_dist2(&self, p: [f64; 2]) -> f64 {
        self.verts
            .iter()
            .map(|v| (v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2))
            .fold(0.0, f64::max)
    }

    /// Keeps the part with `normal · x <= offset`; the new edge is tagged `tag`.
    fn clip(&mut self, normal: [f64; 2], offset: f64, tag: EdgeTag, out: &mut Polygon) {
        let side = |v: &[f64; 2]| normal[0] * v[0] + normal[1] * v[1] - offset;
        if self.verts.iter().all(|v| side(v) <= 0.0) {
            return;
        }
        out.verts.clear();
        out.tags.clear();
        let n = self.verts.len();
        for k in 0..n {
            let (a, b) = (self.verts[k], self.verts[(k + 1) % n]);
            let (da, db) = (side(&a), side(&b));
            let crossing = || {
                let t = da / (da - db);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            };
            match (da <= 0.0, db <= 0.0) {
                (true, true) => {
                    out.verts.push(a);
                    out.tags.push(self.tags[k]);
                }
                (true, false) => {
                    out.verts.push(a);
                    out.tags.push(self.tags[k]);
                    if da < 0.0 {
                        out.verts.push(crossing());
                        out.tags.push(tag);
                    } else {
                        // `a` already lies on the clip line; the outgoing edge follows it.
                        *out.tags.last_mut().unwrap() = tag;
                    }
                }
                (false, true) => {
                    if db < 0.0 {
                        out.verts.push(crossing());
                        out.tags.push(self.tags[k]);
                    }
                }
                (false, false) => {}
            }
        }
        std::mem::swap(self, out);
    }

    /// Drops vertices that coincide (within `tol`) with their successor.
    fn dedup(&mut self, tol: f64) {
        let mut k = 0;
        while self.verts.len() > 3 && k < self.verts.len() {
            let next = (k + 1) % self.verts.len();
            let (a, b) = (self.verts[k], self.verts[next]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) <= tol {
                self.verts.remove(k);
                self.tags.remove(k);
            } else {
                k += 1;
            }
        }
    }
}

/// Shoelace area; positive for counterclockwise vertex order.
pub fn polygon_area(verts: &[[f64; 2]]) -> f64 {
    let n = verts.len();
    0.5 * (0..n)
        .map(|k| {
            let (a, b) = (verts[k], verts[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn cell_polygon(i: usize, coords: &[f64], points: &PointSet, grid: &GridIndex) -> Result<Polygon> {
    let b = points.bounds();
    let p = [coords[2 * i], coords[2 * i + 1]];
    let mut poly = Polygon::rect(b[0].lo, b[1].lo, b[0].hi, b[1].hi);
    let mut scratch = Polygon::default();
    let mut reach2 = 4.0 * poly.max_dist2(p);
    let mut duplicate = None;
    let center = grid.bucket_of(p);
    for r in 0.. {
        let inside = grid.visit_ring(center, r, |j| {
            if j == i {
                return;
            }
            let q = [coords[2 * j], coords[2 * j + 1]];
            if q == p {
                duplicate = Some(j);
                return;
            }
            let normal = [q[0] - p[0], q[1] - p[1]];
            let d2 = normal[0] * normal[0] + normal[1] * normal[1];
            if d2 >= reach2 {
                return;
            }
            let offset = 0.5 * (normal[0] * (p[0] + q[0]) + normal[1] * (p[1] + q[1]));
            poly.clip(normal, offset, EdgeTag::Site(j), &mut scratch);
            reach2 = 4.0 * poly.max_dist2(p);
        });
        if let Some(j) = duplicate {
            return Err(Error::DuplicatePoints(i.min(j), i.max(j)));
        }
        let covered = r as f64 * grid.bucket_size();
        if !inside || covered * covered >= reach2 {
            break;
        }
    }
    Ok(poly)
}

pub(super) fn tessellate(points: &PointSet, mode: AdjacencyMode) -> Result<(Vec<Cell>, GridIndex)> {
    let coords = points.coords();
    let n = points.len();
    let grid = GridIndex::new(coords, points.bounds());
    let tol = GEOM_TOL * points.diagonal();

    let build = |i: usize| {
        cell_polygon(i, coords, points, &grid).map(|mut poly| {
            poly.dedup(tol);
            poly
        })
    };
    #[cfg(feature = "parallel")]
    let polys: Vec<Result<Polygon>> = (0..n).into_par_iter().map(build).collect();
    #[cfg(not(feature = "parallel"))]
    let polys: Vec<Result<Polygon>> = (0..n).map(build).collect();
    let polys = polys.into_iter().collect::<Result<Vec<_>>>()?;

    let mut neighbors = vec![Vec::new(); n];
    for (i, poly) in polys.iter().enumerate() {
        let m = poly.verts.len();
        for k in 0..m {
            if let EdgeTag::Site(j) = poly.tags[k] {
                let (a, b) = (poly.verts[k], poly.verts[(k + 1) % m]);
                if (a[0] - b[0]).hypot(a[1] - b[1]) > tol {
                    neighbors[i].push(j);
                    neighbors[j].push(i);
                }
            }
        }
    }
    if mode == AdjacencyMode::Vertex {
        for (i, j) in shared_vertex_pairs(&polys, tol) {
            neighbors[i].push(j);
        }
    }

    let cells = polys
        .into_iter()
        .zip(neighbors)
        .enumerate()
        .map(|(i, (poly, mut nb))| {
            nb.sort_unstable();
            nb.dedup();
            Cell {
                point_index: i,
                measure: polygon_area(&poly.verts),
                volume_quanta: 0.0,
                neighbors: nb,
                shape: CellShape::Polygon { vertices: poly.verts },
            }
        })
        .collect();
    Ok((cells, grid))
}

/// Ordered pairs `(i, j)`, `i != j`, of cells with a common vertex.
fn shared_vertex_pairs(polys: &[Polygon], tol: f64) -> Vec<(usize, usize)> {
    let key = |v: [f64; 2]| ((v[0] / tol).floor() as i64, (v[1] / tol).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<(usize, [f64; 2])>> = HashMap::new();
    for (i, poly) in polys.iter().enumerate() {
        for &v in &poly.verts {
            buckets.entry(key(v)).or_default().push((i, v));
        }
    }
    let mut pairs = Vec::new();
    for (i, poly) in polys.iter().enumerate() {
        for &v in &poly.verts {
            let (kx, ky) = key(v);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(entries) = buckets.get(&(kx + dx, ky + dy)) else {
                        continue;
                    };
                    for &(j, w) in entries {
                        if j != i && (v[0] - w[0]).hypot(v[1] - w[1]) <= tol {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_in_half() {
        let mut poly = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        let mut scratch = Polygon::default();
        poly.clip([1.0, 0.0], 0.5, EdgeTag::Site(9), &mut scratch);
        assert!((polygon_area(&poly.verts) - 0.5).abs() < 1e-15);
        assert_eq!(poly.tags.iter().filter(|t| **t == EdgeTag::Site(9)).count(), 1);
    }

    #[test]
    fn clip_through_vertex_keeps_tags_consistent() {
        let mut poly = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        let mut scratch = Polygon::default();
        // Diagonal cut through (1,0) and (0,1).
        poly.clip([1.0, 1.0], 1.0, EdgeTag::Site(3), &mut scratch);
        assert_eq!(poly.verts.len(), 3);
        assert!((polygon_area(&poly.verts) - 0.5).abs() < 1e-15);
        let k = poly.tags.iter().position(|t| *t == EdgeTag::Site(3)).unwrap();
        assert_eq!(poly.verts[k], [1.0, 0.0]);
        assert_eq!(poly.verts[(k + 1) % 3], [0.0, 1.0]);
    }

    #[test]
    fn touching_line_does_not_clip() {
        let mut poly = Polygon::rect(0.0, 0.0, 1.0, 1.0);
        let mut scratch = Polygon::default();
        poly.clip([1.0, 1.0], 2.0, EdgeTag::Site(1), &mut scratch);
        assert_eq!(poly.verts.len(), 4);
        assert!(poly.tags.iter().all(|t| *t == EdgeTag::Boundary));
    }
}
