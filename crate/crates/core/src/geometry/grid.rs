use super::Interval;

/// Uniform bucket grid over a 2D box with square buckets.
///
/// Visiting buckets in rings of growing Chebyshev radius around a query gives
/// a cheap lower bound on the distance to everything not yet visited: after
/// ring `r` every unvisited point is at least `r * bucket_size` away.
#[derive(Debug, Clone)]
pub struct GridIndex {
    origin: [f64; 2],
    h: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
}

const POINTS_PER_BUCKET: f64 = 2.0;

impl GridIndex {
    /// `coords` holds interleaved `x, y` pairs inside `bounds`.
    pub fn new(coords: &[f64], bounds: &[Interval]) -> Self {
        let n = (coords.len() / 2).max(1);
        let (wx, wy) = (bounds[0].width(), bounds[1].width());
        let mut h = (wx * wy * POINTS_PER_BUCKET / n as f64).sqrt();
        // Very elongated boxes: keep bucket counts proportional to n.
        h = h.max(wx.max(wy) / (4 * n) as f64);
        let nx = ((wx / h).ceil() as usize).max(1);
        let ny = ((wy / h).ceil() as usize).max(1);

        let mut grid = Self {
            origin: [bounds[0].lo, bounds[1].lo],
            h,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            items: vec![0; coords.len() / 2],
        };
        let keys: Vec<usize> = coords
            .chunks_exact(2)
            .map(|p| {
                let (bx, by) = grid.bucket_of([p[0], p[1]]);
                by * nx + bx
            })
            .collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for k in 0..nx * ny {
            grid.starts[k + 1] += grid.starts[k];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.items[fill[k]] = i;
            fill[k] += 1;
        }
        grid
    }

    pub fn bucket_size(&self) -> f64 {
        self.h
    }

    pub fn bucket_of(&self, p: [f64; 2]) -> (usize, usize) {
        let bx = ((p[0] - self.origin[0]) / self.h).floor().max(0.0) as usize;
        let by = ((p[1] - self.origin[1]) / self.h).floor().max(0.0) as usize;
        (bx.min(self.nx - 1), by.min(self.ny - 1))
    }

    fn bucket(&self, bx: usize, by: usize) -> &[usize] {
        let k = by * self.nx + bx;
        &self.items[self.starts[k]..self.starts[k + 1]]
    }

    /// Calls `f` for every point in the buckets at Chebyshev distance exactly
    /// `r` from `center`. Returns false once the ring lies entirely outside the grid.
    pub fn visit_ring(&self, center: (usize, usize), r: usize, mut f: impl FnMut(usize)) -> bool {
        let (cx, cy) = (center.0 as isize, center.1 as isize);
        let r = r as isize;
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        if cx - r < 0 && cy - r < 0 && cx + r >= nx && cy + r >= ny {
            return false;
        }
        let mut visit = |x: isize, y: isize| {
            if (0..nx).contains(&x) && (0..ny).contains(&y) {
                self.bucket(x as usize, y as usize).iter().for_each(|&i| f(i));
            }
        };
        if r == 0 {
            visit(cx, cy);
            return true;
        }
        for x in cx - r..=cx + r {
            visit(x, cy - r);
            visit(x, cy + r);
        }
        for y in cy - r + 1..cy + r {
            visit(cx - r, y);
            visit(cx + r, y);
        }
        true
    }

    /// Index of the point nearest `q`; ties go to the smaller index.
    pub fn nearest(&self, coords: &[f64], q: [f64; 2]) -> usize {
        let center = self.bucket_of(q);
        let mut best = (f64::INFINITY, usize::MAX);
        for r in 0.. {
            let inside = self.visit_ring(center, r, |i| {
                let d = (coords[2 * i] - q[0]).powi(2) + (coords[2 * i + 1] - q[1]).powi(2);
                if d < best.0 || (d == best.0 && i < best.1) {
                    best = (d, i);
                }
            });
            let reach = r as f64 * self.h;
            if !inside || (best.1 != usize::MAX && best.0 < reach * reach) {
                break;
            }
        }
        best.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_brute_force() {
        let mut coords = Vec::new();
        let mut s = 12345u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..300 {
            coords.push(next() * 3.0);
            coords.push(next());
        }
        let bounds = [Interval::new(0.0, 3.0), Interval::new(0.0, 1.0)];
        let grid = GridIndex::new(&coords, &bounds);
        for _ in 0..2000 {
            let q = [next() * 3.0, next()];
            let brute = (0..300)
                .min_by(|&a, &b| {
                    let da = (coords[2 * a] - q[0]).powi(2) + (coords[2 * a + 1] - q[1]).powi(2);
                    let db = (coords[2 * b] - q[0]).powi(2) + (coords[2 * b + 1] - q[1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(grid.nearest(&coords, q), brute);
        }
    }

    #[test]
    fn single_point_grid() {
        let grid = GridIndex::new(&[0.5, 0.5], &[Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)]);
        assert_eq!(grid.nearest(&[0.5, 0.5], [0.0, 1.0]), 0);
    }
}
