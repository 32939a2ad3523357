//! Small 2D segment helpers.

pub type P2 = [f64; 2];

#[inline]
pub fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: P2, b: P2) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn lerp(a: P2, b: P2, t: f64) -> P2 {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Parameter of the orthogonal projection of `p` onto the line through `a`, `b`.
pub fn project_param(p: P2, a: P2, b: P2) -> f64 {
    let d = sub(b, a);
    let l2 = dot(d, d);
    if l2 == 0.0 {
        return 0.0;
    }
    dot(sub(p, a), d) / l2
}

/// Distance from `p` to the infinite line through `a`, `b`.
pub fn line_distance(p: P2, a: P2, b: P2) -> f64 {
    let d = sub(b, a);
    let l = norm(d);
    if l == 0.0 {
        return dist(p, a);
    }
    cross(d, sub(p, a)).abs() / l
}

/// Euclidean distance from `p` to the closed segment `ab`.
pub fn segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let t = project_param(p, a, b).clamp(0.0, 1.0);
    dist(p, lerp(a, b, t))
}

/// Intersection parameters `(s, t)` with `a + s(b−a) = c + t(d−c)` for
/// non-parallel segments.
pub fn intersect_params(a: P2, b: P2, c: P2, d: P2) -> Option<(f64, f64)> {
    let r = sub(b, a);
    let q = sub(d, c);
    let den = cross(r, q);
    if den == 0.0 {
        return None;
    }
    let ac = sub(c, a);
    Some((cross(ac, q) / den, cross(ac, r) / den))
}

/// True when the segments cross at a point interior to both, with each
/// endpoint at least `tol` away from the other segment's supporting line.
pub fn properly_cross(a: P2, b: P2, c: P2, d: P2, tol: f64) -> bool {
    let side = |p: P2, q0: P2, q1: P2| {
        let dir = sub(q1, q0);
        let l = norm(dir);
        if l == 0.0 {
            0.0
        } else {
            cross(dir, sub(p, q0)) / l
        }
    };
    let (s1, s2) = (side(c, a, b), side(d, a, b));
    let (s3, s4) = (side(a, c, d), side(b, c, d));
    let opposite = |x: f64, y: f64| (x > tol && y < -tol) || (x < -tol && y > tol);
    opposite(s1, s2) && opposite(s3, s4)
}

/// Unsigned angle in degrees between two directions, in `[0, 180]`.
pub fn angle_between_deg(u: P2, v: P2) -> f64 {
    cross(u, v).atan2(dot(u, v)).abs().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_cases() {
        assert!(properly_cross(
            [0.0, 0.0],
            [2.0, 2.0],
            [0.0, 2.0],
            [2.0, 0.0],
            1e-9
        ));
        // touching at an endpoint is not a proper crossing
        assert!(!properly_cross(
            [0.0, 0.0],
            [2.0, 0.0],
            [1.0, 0.0],
            [1.0, 3.0],
            1e-9
        ));
        assert!(!properly_cross(
            [0.0, 0.0],
            [1.0, 0.0],
            [2.0, -1.0],
            [2.0, 1.0],
            1e-9
        ));
    }

    #[test]
    fn distances() {
        assert_eq!(segment_distance([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
        assert_eq!(segment_distance([3.0, 4.0], [0.0, 0.0], [0.0, 0.0]), 5.0);
        assert_eq!(segment_distance([-3.0, 4.0], [0.0, 0.0], [1.0, 0.0]), 5.0);
        assert_eq!(line_distance([-3.0, 4.0], [0.0, 0.0], [1.0, 0.0]), 4.0);
        assert_eq!(angle_between_deg([1.0, 0.0], [0.0, -1.0]), 90.0);
    }

    #[test]
    fn intersection() {
        let (s, t) = intersect_params([0.0, 0.0], [4.0, 0.0], [1.0, -1.0], [1.0, 3.0]).unwrap();
        assert_eq!(s, 0.25);
        assert_eq!(t, 0.25);
    }
}
