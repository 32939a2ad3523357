//! Line walk over the heatmap grid used to score candidate lines.
//!
//! The line map is a tent of width one cell around each line, sampled at cell
//! centers. A line running along a cell boundary therefore reads 0.5 in both
//! neighboring cells, while the two cells bracketing it always sum to
//! `2 − cos φ` (`φ` the angle to the major axis). Each step of the walk reads
//! that bracketing pair and divides by the same factor, so a drawn line scores
//! 1 wherever it sits relative to the grid, provided it is at least
//! [`MIN_EXACT_LEN`] cells long. Shorter lines are read at their middle column,
//! where a bracketing cell can fall past an end of the tent and read low.

use crate::heatmap::Plane;

/// Length (cells) skipped at each end of the walk.
pub const END_TRIM: f64 = 1.0;

/// Shortest line (cells) guaranteed to score exactly 1 when drawn: column
/// rounding and the minor-axis offset each move a sample up to 1/√2 along the
/// line, and both must stay inside it from the midpoint.
pub const MIN_EXACT_LEN: f64 = 2.0 * std::f64::consts::SQRT_2;

/// One step of the walk: the two cells bracketing the segment in its column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub cells: [[i64; 2]; 2],
}

/// Steps of the segment `a → b` (coordinates in cell units) and the
/// normalizer `2 − cos φ`.
///
/// The walk visits the columns of the dominant axis whose centers lie on the
/// segment at least [`END_TRIM`] from either end, sampling the segment at each
/// column center. The result does not depend on the direction of traversal.
pub fn line_steps(a: [f64; 2], b: [f64; 2]) -> (Vec<Step>, f64) {
    let (a, b) = if a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).is_le() {
        (a, b)
    } else {
        (b, a)
    };
    let d = [b[0] - a[0], b[1] - a[1]];
    let major = if d[0].abs() >= d[1].abs() { 0 } else { 1 };
    let minor = 1 - major;
    let len = d[0].hypot(d[1]);
    let cos = if len > 0.0 { d[major].abs() / len } else { 1.0 };
    // the first and last cell of the line are shared with whatever else meets
    // at its junctions, so only the interior is walked
    let trim = END_TRIM * cos;
    let (lo, hi) = (a[major].min(b[major]), a[major].max(b[major]));
    // column centers inside the trimmed span, or the middle column if none
    let mut k0 = (lo + trim - 0.5).ceil() as i64;
    let mut k1 = (hi - trim - 0.5).floor() as i64;
    if k0 > k1 {
        k0 = (0.5 * (lo + hi)).floor() as i64;
        k1 = k0;
    }
    let steps = (k0..=k1)
        .map(|k| {
            let m = k as f64 + 0.5;
            let s = if d[major] == 0.0 {
                a[minor]
            } else {
                a[minor] + (m - a[major]) / d[major] * d[minor]
            };
            let j0 = (s - 0.5).floor() as i64;
            let mut cells = [[0i64; 2]; 2];
            for (c, j) in cells.iter_mut().zip([j0, j0 + 1]) {
                c[major] = k;
                c[minor] = j;
            }
            Step { cells }
        })
        .collect();
    (steps, 2.0 - cos)
}

fn at(map: &Plane, [x, y]: [i64; 2]) -> f64 {
    if x >= 0 && y >= 0 && (x as usize) < map.width && (y as usize) < map.height {
        map.get(x as usize, y as usize) as f64
    } else {
        0.0
    }
}

/// Mean line support of `map` along `a → b` (cell units), in `[0, 1]`.
/// Cells outside the grid read as zero.
pub fn mean_along(map: &Plane, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (steps, norm) = line_steps(a, b);
    let sum: f64 = steps
        .iter()
        .map(|st| ((at(map, st.cells[0]) + at(map, st.cells[1])) / norm).min(1.0))
        .sum();
    sum / steps.len() as f64
}
