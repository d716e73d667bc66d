//! Locating a signal source from its arrival times at three sensors, and the
//! precision regions that follow from bounded arrival times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MultilatError {
    #[error("sensors are collinear")]
    Collinear,
    #[error("signal speed must be positive and finite")]
    BadSpeed,
    #[error("arrival bounds must satisfy earliest <= latest")]
    BadBounds,
    #[error("no solution after {iterations} iterations (residuals {residuals:?})")]
    NoSolution { iterations: usize, residuals: [f64; 3] },
}

/// Three sensors and the signal's propagation speed (m/s). Sensor 3 is the
/// reference: arrival deltas are measured against it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scene {
    sensors: [Point; 3],
    speed: f64,
}

impl Scene {
    pub fn new(sensors: [Point; 3], speed: f64) -> Result<Self, MultilatError> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(MultilatError::BadSpeed);
        }
        let [a, b, c] = sensors;
        let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        let scale = a.dist(b).max(a.dist(c)).max(b.dist(c));
        if scale == 0.0 || cross.abs() <= 1e-9 * scale * scale {
            return Err(MultilatError::Collinear);
        }
        Ok(Scene { sensors, speed })
    }

    pub fn sensors(&self) -> [Point; 3] {
        self.sensors
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Arrival times (s) of a signal emitted at `source` at time `t0`.
    pub fn arrivals(&self, source: Point, t0: f64) -> [f64; 3] {
        self.sensors.map(|s| t0 + s.dist(source) / self.speed)
    }

    /// Path-length differences `(d1, d2)` of sensors 1 and 2 against sensor 3.
    pub fn deltas(&self, arrivals: [f64; 3]) -> (f64, f64) {
        (
            (arrivals[0] - arrivals[2]) * self.speed,
            (arrivals[1] - arrivals[2]) * self.speed,
        )
    }
}

/// Source position and its distance `a` to sensor 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub a: f64,
}

impl Location {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

const MAX_ITER: usize = 200;
const TOLERANCE: f64 = 1e-6;

/// Relative residuals of the three range equations.
fn residuals(scene: &Scene, d: [f64; 3], z: [f64; 3]) -> [f64; 3] {
    let p = Point::new(z[0], z[1]);
    std::array::from_fn(|i| {
        let range = z[2] + d[i];
        let dist = scene.sensors[i].dist(p);
        (dist - range).abs() / range.abs().max(dist).max(1.0)
    })
}

fn system(scene: &Scene, d: [f64; 3], z: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let [x, y, a] = z;
    let mut f = [0.0; 3];
    let mut j = [[0.0; 3]; 3];
    for i in 0..3 {
        let s = scene.sensors[i];
        let r = a + d[i];
        f[i] = (s.x - x).powi(2) + (s.y - y).powi(2) - r * r;
        j[i] = [-2.0 * (s.x - x), -2.0 * (s.y - y), -2.0 * r];
    }
    (f, j)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    Some(std::array::from_fn(|c| {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        det(&mc) / d
    }))
}

fn norm2(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn newton(scene: &Scene, d: [f64; 3], start: [f64; 3]) -> Result<[f64; 3], [f64; 3]> {
    let mut z = start;
    let (mut f, mut j) = system(scene, d, z);
    for _ in 0..MAX_ITER {
        let Some(step) = solve3(j, f.map(|v| -v)) else { break };
        // converged once the full step no longer moves the solution
        if step.iter().all(|s| s.abs() < 1e-10) {
            break;
        }
        // halve the step until the squared residual decreases
        let base = norm2(f);
        let mut lambda = 1.0;
        loop {
            let cand = std::array::from_fn(|k| z[k] + lambda * step[k]);
            let (fc, jc) = system(scene, d, cand);
            if norm2(fc) <= base || lambda < 1e-6 {
                z = cand;
                f = fc;
                j = jc;
                break;
            }
            lambda *= 0.5;
        }
    }
    let r = residuals(scene, d, z);
    if r.iter().all(|v| *v < TOLERANCE) {
        Ok(z)
    } else {
        Err(r)
    }
}

/// Solves for the source given path-length differences `d1` and `d2` (m) of
/// sensors 1 and 2 against sensor 3. Starts at the sensor centroid with `a`
/// equal to the mean sensor spacing.
pub fn locate(scene: &Scene, d1: f64, d2: f64) -> Result<Location, MultilatError> {
    let d = [d1, d2, 0.0];
    let s = scene.sensors;
    let centroid = Point::new((s[0].x + s[1].x + s[2].x) / 3.0, (s[0].y + s[1].y + s[2].y) / 3.0);
    let spacing = (s[0].dist(s[1]) + s[0].dist(s[2]) + s[1].dist(s[2])) / 3.0;
    let valid = |z: &[f64; 3]| d.iter().all(|di| z[2] + di >= -TOLERANCE * spacing);
    let mut last = [f64::INFINITY; 3];
    // the sign of a range is lost by squaring; restart from each sensor if
    // the centroid start lands on a negative range
    let starts = std::iter::once(centroid).chain(s);
    for p in starts {
        match newton(scene, d, [p.x, p.y, spacing]) {
            Ok(z) if valid(&z) => return Ok(Location { x: z[0], y: z[1], a: z[2] }),
            Ok(z) => last = residuals(scene, d, z),
            Err(r) => last = r,
        }
    }
    Err(MultilatError::NoSolution {
        iterations: MAX_ITER,
        residuals: last,
    })
}

/// Locates the source from three arrival times (s).
pub fn locate_arrivals(scene: &Scene, arrivals: [f64; 3]) -> Result<Location, MultilatError> {
    let (d1, d2) = scene.deltas(arrivals);
    locate(scene, d1, d2)
}

/// Earliest and latest possible arrival time (s) at one sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalBounds {
    pub earliest: f64,
    pub latest: f64,
}

/// Age bounds (s) of one sensor's value in a result tuple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeBounds {
    pub min: f64,
    pub max: f64,
}

/// Corner localizations in convex order. `unbounded` is set when a corner
/// had no solution; `vertices` then holds only the corners that did.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub vertices: Vec<Point>,
    pub unbounded: bool,
}

impl Region {
    /// Point-in-polygon test with an absolute tolerance in meters.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => v[0].dist(p) <= tol,
            2 => dist_to_segment(p, v[0], v[1]) <= tol,
            n => {
                let inside = (0..n).all(|i| {
                    let (a, b) = (v[i], v[(i + 1) % n]);
                    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
                });
                inside || (0..n).any(|i| dist_to_segment(p, v[i], v[(i + 1) % n]) <= tol)
            }
        }
    }
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Counter-clockwise order around the centroid, merging points closer than 1 mm.
fn convex_order(mut pts: Vec<Point>) -> Vec<Point> {
    let mut unique: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if unique.iter().all(|q| q.dist(p) > 1e-3) {
            unique.push(p);
        }
    }
    let n = unique.len() as f64;
    let cx = unique.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = unique.iter().map(|p| p.y).sum::<f64>() / n;
    unique.sort_by(|a, b| {
        let ta = (a.y - cy).atan2(a.x - cx);
        let tb = (b.y - cy).atan2(b.x - cx);
        ta.total_cmp(&tb)
    });
    unique
}

/// Region spanned by the six localizations from earliest/latest arrival
/// combinations, leaving out all-earliest and all-latest.
pub fn bounds_region(scene: &Scene, bounds: [ArrivalBounds; 3]) -> Result<Region, MultilatError> {
    if bounds.iter().any(|b| !(b.earliest <= b.latest)) {
        return Err(MultilatError::BadBounds);
    }
    let mut vertices = Vec::with_capacity(6);
    let mut unbounded = false;
    for mask in 1u8..7 {
        let t = std::array::from_fn(|i| {
            if mask & (1 << i) != 0 {
                bounds[i].latest
            } else {
                bounds[i].earliest
            }
        });
        match locate_arrivals(scene, t) {
            Ok(loc) => vertices.push(loc.point()),
            Err(_) => unbounded = true,
        }
    }
    Ok(Region {
        vertices: convex_order(vertices),
        unbounded,
    })
}

/// Guaranteed region: sensor `i` saw the signal between `l_s - age[i].max`
/// and `l_e - age[i].min` on the trusted clock.
pub fn guarantee_region(scene: &Scene, l_s: f64, l_e: f64, age: [AgeBounds; 3]) -> Result<Region, MultilatError> {
    let bounds = age.map(|a| ArrivalBounds {
        earliest: l_s - a.max,
        latest: l_e - a.min,
    });
    bounds_region(scene, bounds)
}

/// Estimated region from the reported read-time spans `(t_min, t_max)`.
pub fn estimate_region(scene: &Scene, reported: [(f64, f64); 3]) -> Result<Region, MultilatError> {
    bounds_region(
        scene,
        reported.map(|(t_min, t_max)| ArrivalBounds {
            earliest: t_min,
            latest: t_max,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SPEED: f64 = 343.0;

    fn thunder() -> Scene {
        Scene::new(
            [Point::new(100.0, 200.0), Point::new(7000.0, 1000.0), Point::new(4200.0, 4000.0)],
            SPEED,
        )
        .unwrap()
    }

    /// Eliminating the quadratic terms leaves (x, y) linear in `a`; the first
    /// range equation is then a quadratic in `a`.
    fn closed_form(scene: &Scene, d1: f64, d2: f64) -> Vec<Location> {
        let [s1, s2, s3] = scene.sensors();
        let k = |s: Point| s.x * s.x + s.y * s.y;
        // 2(s_i - s3) . p = k_i - k_3 - d_i^2 - 2 a d_i
        let row = |s: Point, d: f64| (2.0 * (s.x - s3.x), 2.0 * (s.y - s3.y), k(s) - k(s3) - d * d, -2.0 * d);
        let (a1, b1, c1, e1) = row(s1, d1);
        let (a2, b2, c2, e2) = row(s2, d2);
        let det = a1 * b2 - a2 * b1;
        // p = p0 + a * v
        let p0 = ((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det);
        let v = ((e1 * b2 - e2 * b1) / det, (a1 * e2 - a2 * e1) / det);
        let (ux, uy) = (p0.0 - s3.x, p0.1 - s3.y);
        let qa = v.0 * v.0 + v.1 * v.1 - 1.0;
        let qb = 2.0 * (ux * v.0 + uy * v.1);
        let qc = ux * ux + uy * uy;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return vec![];
        }
        [(-qb + disc.sqrt()) / (2.0 * qa), (-qb - disc.sqrt()) / (2.0 * qa)]
            .into_iter()
            .filter(|&a| a >= 0.0 && a + d1 >= 0.0 && a + d2 >= 0.0)
            .map(|a| Location {
                x: p0.0 + a * v.0,
                y: p0.1 + a * v.1,
                a,
            })
            .collect()
    }

    #[test]
    fn thunderstorm_example() {
        let scene = thunder();
        let loc = locate(&scene, 647.37, 687.40).unwrap();
        assert!((loc.x - 3456.0).abs() < 0.05, "{loc:?}");
        assert!((loc.y - 1234.0).abs() < 0.05, "{loc:?}");
        assert!((loc.a - 2864.31).abs() < 0.005, "{loc:?}");
        let r = residuals(&scene, [647.37, 687.40, 0.0], [loc.x, loc.y, loc.a]);
        assert!(r.iter().all(|v| *v < 1e-6));
    }

    #[test]
    fn exact_deltas_recover_the_source() {
        let scene = thunder();
        let src = Point::new(3456.0, 1234.0);
        let loc = locate_arrivals(&scene, scene.arrivals(src, 0.0)).unwrap();
        assert!(loc.point().dist(src) < 1e-6);
        let (d1, d2) = scene.deltas(scene.arrivals(src, 0.0));
        assert!((d1 - 647.37).abs() < 0.01 && (d2 - 687.40).abs() < 0.01);
    }

    #[test]
    fn source_at_a_sensor() {
        // equilateral layout; source on sensor 3 gives equal deltas
        let h = 3f64.sqrt() / 2.0 * 1000.0;
        let scene = Scene::new(
            [Point::new(0.0, 0.0), Point::new(1000.0, 0.0), Point::new(500.0, h)],
            SPEED,
        )
        .unwrap();
        let loc = locate(&scene, 1000.0, 1000.0).unwrap();
        assert!(loc.point().dist(Point::new(500.0, h)) < 1e-6, "{loc:?}");
        assert!(loc.a.abs() < 1e-6);
    }

    #[test]
    fn rejects_degenerate_scenes() {
        let line = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert_eq!(Scene::new(line, SPEED), Err(MultilatError::Collinear));
        let s = thunder().sensors();
        assert_eq!(Scene::new(s, 0.0), Err(MultilatError::BadSpeed));
    }

    #[test]
    fn impossible_deltas_fail() {
        // path differences longer than the sensor spacing cannot be met
        assert!(matches!(
            locate(&thunder(), 50_000.0, -50_000.0),
            Err(MultilatError::NoSolution { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn forward_model_round_trip(x in 200.0f64..6800.0, y in 300.0f64..3800.0, t0 in 0.0f64..100.0) {
            let scene = thunder();
            let src = Point::new(x, y);
            let (d1, d2) = scene.deltas(scene.arrivals(src, t0));
            let roots = closed_form(&scene, d1, d2);
            prop_assume!(roots.len() == 1);
            let loc = locate(&scene, d1, d2).unwrap();
            prop_assert!(loc.point().dist(src) < 1e-6, "{:?} vs {:?}", loc, src);
            prop_assert!(loc.point().dist(roots[0].point()) < 1e-6);
        }
    }

    #[test]
    fn zero_width_bounds_give_a_point() {
        let scene = thunder();
        let src = Point::new(3456.0, 1234.0);
        let t = scene.arrivals(src, 10.0);
        let region = estimate_region(&scene, t.map(|v| (v, v))).unwrap();
        assert_eq!(region.vertices.len(), 1);
        assert!(region.vertices[0].dist(src) < 1e-6);
        // ages that reproduce the arrivals exactly with l_s == l_e
        let age = t.map(|v| AgeBounds { min: 20.0 - v, max: 20.0 - v });
        let g = guarantee_region(&scene, 20.0, 20.0, age).unwrap();
        assert_eq!(g.vertices.len(), 1);
    }

    #[test]
    fn two_second_guarantee_contains_the_source() {
        let scene = thunder();
        let src = Point::new(3456.0, 1234.0);
        let t = scene.arrivals(src, 0.0);
        // each sensor's value known only within 2 s
        let l_s = 30.0;
        let age = t.map(|v| AgeBounds {
            min: l_s + 1.0 - v,
            max: l_s + 1.0 - v,
        });
        let g = guarantee_region(&scene, l_s - 1.0, l_s + 1.0, age).unwrap();
        assert!(!g.unbounded);
        assert_eq!(g.vertices.len(), 6);
        assert!(g.contains(src, 1e-6));
        // the offset failure lies outside: sensor 2 two seconds late, sensor 3 two seconds early
        let wrong = locate_arrivals(&scene, [t[0], t[1] + 2.0, t[2] - 2.0]).unwrap();
        assert!(!g.contains(wrong.point(), 1.0));
    }

    #[test]
    fn half_second_estimate_contains_deviations() {
        let scene = thunder();
        let src = Point::new(3456.0, 1234.0);
        let t = scene.arrivals(src, 0.0);
        let est = estimate_region(&scene, t.map(|v| (v - 0.5, v + 0.5))).unwrap();
        assert!(!est.vertices.is_empty() && est.contains(src, 1e-6));
        let dev = locate_arrivals(&scene, [t[0] + 0.3, t[1] - 0.5, t[2] + 0.1]).unwrap();
        assert!(est.contains(dev.point(), 1e-6));
    }

    fn random_bounds(rng: &mut impl rand::Rng, t: [f64; 3], width: f64) -> [ArrivalBounds; 3] {
        t.map(|v| {
            let before = rng.gen_range(0.0..=width);
            ArrivalBounds {
                earliest: v - before,
                latest: v - before + width,
            }
        })
    }

    #[test]
    fn monte_carlo_containment() {
        use rand::{Rng, SeedableRng};
        let scene = thunder();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(25);
        let mut checked = 0;
        for _ in 0..1000 {
            let src = Point::new(rng.gen_range(1000.0..6000.0), rng.gen_range(800.0..3200.0));
            let t = scene.arrivals(src, rng.gen_range(0.0..50.0));
            let width = rng.gen_range(0.0..2.0);
            let bounds = random_bounds(&mut rng, t, width);
            let g = bounds_region(&scene, bounds).unwrap();
            if g.unbounded {
                continue;
            }
            checked += 1;
            assert!(g.contains(src, 1e-6), "source {src:?} outside {g:?}");
            // reported times inside the guaranteed bounds give a subset
            let inner = bounds.map(|b| {
                let lo = rng.gen_range(b.earliest..=b.latest);
                let hi = rng.gen_range(lo..=b.latest);
                (lo, hi)
            });
            let e = estimate_region(&scene, inner).unwrap();
            for v in &e.vertices {
                assert!(g.contains(*v, 1e-6), "{v:?} outside {g:?}");
            }
        }
        assert!(checked > 900, "{checked}");
    }

    #[test]
    fn wider_bounds_never_shrink() {
        let scene = thunder();
        let t = scene.arrivals(Point::new(3000.0, 2000.0), 5.0);
        let mut prev: Option<Region> = None;
        for w in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let r = bounds_region(&scene, t.map(|v| ArrivalBounds { earliest: v - w, latest: v + w })).unwrap();
            if let Some(p) = &prev {
                assert!(p.vertices.iter().all(|v| r.contains(*v, 1e-6)));
            }
            prev = Some(r);
        }
    }
}
