//! Planar convex hulls (monotone chain) and the predicates the index needs.

pub type Point = [f64; 2];

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull of `points`, starting at the lowest-x vertex.
///
/// Collinear points are dropped, so an all-collinear input yields its two
/// endpoints and a single repeated point yields one vertex.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }

    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Hull of the union of two hulls' vertices.
pub fn merge_hull(a: &[Point], b: &[Point]) -> Vec<Point> {
    let mut all = Vec::with_capacity(a.len() + b.len());
    all.extend_from_slice(a);
    all.extend_from_slice(b);
    convex_hull(&all)
}

fn scale_of(hull: &[Point], q: Point) -> f64 {
    hull.iter().chain(std::iter::once(&q)).flat_map(|p| p.iter()).fold(1.0f64, |m, v| m.max(v.abs()))
}

/// True when `q` lies inside or on the boundary of the convex polygon `hull`.
///
/// A small tolerance relative to the coordinate magnitude absorbs rounding,
/// so points that are vertices or lie on edges are always reported inside.
pub fn contains(hull: &[Point], q: Point) -> bool {
    let eps = 1e-12 * scale_of(hull, q).powi(2);
    match hull.len() {
        0 => false,
        1 => {
            let s = eps.sqrt();
            (hull[0][0] - q[0]).abs() <= s && (hull[0][1] - q[1]).abs() <= s
        }
        2 => on_segment(hull[0], hull[1], q, eps),
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], q) >= -eps),
    }
}

fn on_segment(a: Point, b: Point, q: Point, eps: f64) -> bool {
    if cross(a, b, q).abs() > eps {
        return false;
    }
    let s = eps.sqrt();
    q[0] >= a[0].min(b[0]) - s && q[0] <= a[0].max(b[0]) + s && q[1] >= a[1].min(b[1]) - s && q[1] <= a[1].max(b[1]) + s
}

/// Shoelace area; zero for points and segments.
pub fn area(hull: &[Point]) -> f64 {
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (hull[i], hull[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    twice.abs() / 2.0
}

/// True when every vertex of `inner` lies in `outer`.
pub fn is_subset(inner: &[Point], outer: &[Point]) -> bool {
    inner.iter().all(|&p| contains(outer, p))
}
