//! Heatmaps to a 2.5D wireframe.
//!
//! Junctions are read off the thresholded junction maps with their sub-cell
//! offsets. Lines are then built in two stages: first among C-junction pairs
//! whose line confidence clears the threshold, then T-junctions are admitted
//! one at a time once they sit on an existing line, each connected to its
//! single best partner. A greedy pruning pass removes crossing lines and
//! near-duplicate lines at shared endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, P2};
use crate::heatmap::{decode_position, HeatmapBundle, Plane};
use crate::raster;
use crate::wireframe::{JunctionType, Vertex, Wireframe};

/// Tolerance (px) for treating two segments as properly crossing.
pub const CROSS_TOL_PX: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizeParams {
    pub theta_c: f64,
    pub theta_t: f64,
    /// Line confidence threshold.
    pub theta_e: f64,
    /// Minimum polar angle (degrees) between lines sharing an endpoint.
    pub eta_deg: f64,
    /// 4-neighborhood non-maximum suppression on the junction maps.
    pub nms: bool,
    /// Maximum distance, in heatmap cells, for a T-junction to sit on a line.
    pub t_snap: f64,
}

impl Default for VectorizeParams {
    fn default() -> Self {
        Self {
            theta_c: 0.2,
            theta_t: 0.3,
            theta_e: 0.65,
            eta_deg: 10.0,
            nms: true,
            t_snap: 1.5,
        }
    }
}

impl VectorizeParams {
    /// Defaults for heatmaps produced by [`crate::heatmap::encode`], whose
    /// junction peaks are already isolated.
    pub fn for_ground_truth() -> Self {
        Self {
            nms: false,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.theta_c) && unit(self.theta_t) && unit(self.theta_e)) {
            return Err(Error::InvalidParams("thresholds must lie in (0, 1)".into()));
        }
        if !(self.eta_deg > 0.0 && self.eta_deg < 90.0) {
            return Err(Error::InvalidParams("eta_deg must lie in (0, 90)".into()));
        }
        if !(self.t_snap >= 0.0 && self.t_snap.is_finite()) {
            return Err(Error::InvalidParams("t_snap must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Full-resolution pixel position.
    pub xy: P2,
    pub score: f64,
    pub depth: Option<f64>,
    pub cell: (usize, usize),
}

fn is_local_max(m: &Plane, x: usize, y: usize) -> bool {
    let v = m.get(x, y);
    let neighbors = [
        (x.wrapping_sub(1), y, true),
        (x, y.wrapping_sub(1), true),
        (x + 1, y, false),
        (x, y + 1, false),
    ];
    // ties go to the cell earlier in raster order
    neighbors.iter().all(|&(nx, ny, earlier)| {
        if nx >= m.width || ny >= m.height {
            return true;
        }
        let n = m.get(nx, ny);
        if earlier {
            v > n
        } else {
            v >= n
        }
    })
}

/// Junction candidates `stride · (p + O_t(p))` for cells with `J_t(p) ≥ ϑ_t`,
/// returned as `[C, T]` in raster order.
pub fn extract_junctions(bundle: &HeatmapBundle, params: &VectorizeParams) -> [Vec<Candidate>; 2] {
    JunctionType::ALL.map(|t| {
        let ti = t.index();
        let thr = if t == JunctionType::C {
            params.theta_c
        } else {
            params.theta_t
        };
        let jm = &bundle.jmap[ti];
        let mut out = Vec::new();
        for y in 0..jm.height {
            for x in 0..jm.width {
                let score = jm.get(x, y) as f64;
                if score < thr || (params.nms && !is_local_max(jm, x, y)) {
                    continue;
                }
                let d = bundle.jdepth[ti].get(x, y) as f64;
                out.push(Candidate {
                    xy: decode_position(bundle, t, x, y),
                    score,
                    depth: (d > 0.0).then_some(d),
                    cell: (x, y),
                });
            }
        }
        out
    })
}

/// Mean line-map support along the walk between two pixel positions
/// (see [`raster::mean_along`]).
pub fn line_confidence(u: P2, w: P2, emap: &Plane, stride: u32) -> Result<f64> {
    if u == w {
        return Err(Error::DegenerateLine);
    }
    let s = stride as f64;
    Ok(raster::mean_along(emap, u.map(|c| c / s), w.map(|c| c / s)))
}

/// A line with its confidence, between vertex indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredLine {
    pub ends: [usize; 2],
    pub confidence: f64,
}

/// Greedy pruning in descending confidence (ties by endpoint indices): a line
/// is dropped if it properly crosses an accepted line or shares an endpoint
/// with one at a polar angle below `eta_deg`.
pub fn prune_lines(lines: &[ScoredLine], positions: &[P2], eta_deg: f64) -> Vec<ScoredLine> {
    let mut order: Vec<ScoredLine> = lines
        .iter()
        .map(|l| ScoredLine {
            ends: [l.ends[0].min(l.ends[1]), l.ends[0].max(l.ends[1])],
            confidence: l.confidence,
        })
        .collect();
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.ends.cmp(&b.ends)));

    let mut kept: Vec<ScoredLine> = Vec::new();
    'outer: for l in order {
        let [a, b] = l.ends;
        for k in &kept {
            let [c, d] = k.ends;
            if k.ends == l.ends {
                continue 'outer;
            }
            let shared = if a == c || a == d {
                Some(a)
            } else if b == c || b == d {
                Some(b)
            } else {
                None
            };
            match shared {
                Some(s) => {
                    let o1 = if s == a { b } else { a };
                    let o2 = if s == c { d } else { c };
                    let ang = geom::angle_between_deg(
                        geom::sub(positions[o1], positions[s]),
                        geom::sub(positions[o2], positions[s]),
                    );
                    if ang < eta_deg {
                        continue 'outer;
                    }
                }
                None => {
                    if geom::properly_cross(
                        positions[a],
                        positions[b],
                        positions[c],
                        positions[d],
                        CROSS_TOL_PX,
                    ) {
                        continue 'outer;
                    }
                }
            }
        }
        kept.push(l);
    }
    kept
}

/// Where an admitted T-junction was snapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TAttachment {
    /// Output vertex index of the T-junction.
    pub vertex: usize,
    /// Output vertex indices of the line it sits on.
    pub line: [usize; 2],
    /// `w = λ·u + (1 − λ)·v` for `line = [u, v]`, in full-resolution pixels.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized {
    pub wireframe: Wireframe,
    /// Junction-map score of each output vertex.
    pub scores: Vec<f64>,
    /// Attachments whose line survived the final pruning.
    pub attachments: Vec<TAttachment>,
}

#[derive(Clone, Copy, PartialEq)]
enum TState {
    Pending,
    /// On a line (vertex indices), waiting for a partner.
    Attached([usize; 2]),
    Connected,
}

struct Builder<'a> {
    emap: &'a Plane,
    stride: u32,
    pos: Vec<P2>,
}

impl Builder<'_> {
    fn conf(&self, a: usize, b: usize) -> f64 {
        line_confidence(self.pos[a], self.pos[b], self.emap, self.stride).unwrap_or(0.0)
    }

    fn conf_xy(&self, a: P2, b: P2) -> f64 {
        line_confidence(a, b, self.emap, self.stride).unwrap_or(0.0)
    }

    /// Whether no vertex in `others` sits within `tol` px of the interior of
    /// `a–b`; a line through a junction would be two lines.
    fn clear(&self, a: usize, b: usize, others: impl IntoIterator<Item = usize>, tol: f64) -> bool {
        let (pa, pb) = (self.pos[a], self.pos[b]);
        others.into_iter().filter(|&k| k != a && k != b).all(|k| {
            let t = geom::project_param(self.pos[k], pa, pb);
            !(t > 0.0 && t < 1.0 && geom::line_distance(self.pos[k], pa, pb) <= tol)
        })
    }
}

/// Full vectorization with per-vertex scores and T-junction attachments.
pub fn vectorize_detailed(bundle: &HeatmapBundle, params: &VectorizeParams) -> Result<Vectorized> {
    params.check()?;
    let [cs, ts] = extract_junctions(bundle, params);
    let nc = cs.len();
    let all: Vec<(Candidate, JunctionType)> = cs
        .iter()
        .map(|c| (*c, JunctionType::C))
        .chain(ts.iter().map(|c| (*c, JunctionType::T)))
        .collect();
    let mut b = Builder {
        emap: &bundle.emap,
        stride: bundle.stride,
        pos: all.iter().map(|(c, _)| c.xy).collect(),
    };
    let snap_px = params.t_snap * bundle.stride as f64;

    // stage 1: C-C lines
    let mut lines = Vec::new();
    for i in 0..nc {
        for j in (i + 1)..nc {
            if b.pos[i] == b.pos[j] {
                continue;
            }
            let c = b.conf(i, j);
            if c >= params.theta_e && b.clear(i, j, 0..nc, snap_px) {
                lines.push(ScoredLine {
                    ends: [i, j],
                    confidence: c,
                });
            }
        }
    }
    let mut lines = prune_lines(&lines, &b.pos, params.eta_deg);

    // stage 2: admit T-junctions until nothing changes
    let mut state = vec![TState::Pending; ts.len()];
    loop {
        let mut changed = false;

        // other entries of `state` are read and written inside the loop
        #[allow(clippy::needless_range_loop)]
        for ti in 0..ts.len() {
            if state[ti] != TState::Pending {
                continue;
            }
            let v = nc + ti;
            let p = b.pos[v];
            // among lines passing close by with v strictly inside, prefer the
            // one drawn on both sides of v, then the nearest
            let mut best: Option<(f64, f64, usize)> = None;
            for (li, l) in lines.iter().enumerate() {
                let [u, w] = l.ends;
                if u == v || w == v {
                    continue;
                }
                let (pu, pw) = (b.pos[u], b.pos[w]);
                let t = geom::project_param(p, pu, pw);
                if !(t > 0.0 && t < 1.0) {
                    continue;
                }
                let d = geom::line_distance(p, pu, pw);
                if d > snap_px {
                    continue;
                }
                let q = geom::lerp(pu, pw, t);
                let support = b.conf_xy(pu, q).min(b.conf_xy(q, pw));
                let better = match best {
                    None => true,
                    Some((bs, bd, _)) => support > bs || (support == bs && d < bd),
                };
                if better {
                    best = Some((support, d, li));
                }
            }
            if let Some((_, _, li)) = best {
                let [u, w] = lines[li].ends;
                let t = geom::project_param(p, b.pos[u], b.pos[w]);
                b.pos[v] = geom::lerp(b.pos[u], b.pos[w], t);
                state[ti] = TState::Attached([u, w]);
                changed = true;
            }
        }

        for ti in 0..ts.len() {
            let TState::Attached([lu, lw]) = state[ti] else {
                continue;
            };
            let u = nc + ti;
            let line_dir = geom::sub(b.pos[lw], b.pos[lu]);
            let mut best: Option<(f64, usize)> = None;
            let partners = (0..nc).chain(
                (0..ts.len())
                    .filter(|&k| k != ti && matches!(state[k], TState::Attached(_)))
                    .map(|k| nc + k),
            );
            for w in partners {
                if b.pos[w] == b.pos[u] {
                    continue;
                }
                // a partner along the supporting line would just retrace it
                let ang = geom::angle_between_deg(geom::sub(b.pos[w], b.pos[u]), line_dir);
                if ang < params.eta_deg || ang > 180.0 - params.eta_deg {
                    continue;
                }
                let c = b.conf(u, w);
                if c < params.theta_e || best.is_some_and(|(bc, _)| c <= bc) {
                    continue;
                }
                let admitted = (0..nc).chain(
                    (0..ts.len())
                        .filter(|&k| state[k] != TState::Pending)
                        .map(|k| nc + k),
                );
                if b.clear(u, w, admitted, snap_px) {
                    best = Some((c, w));
                }
            }
            if let Some((c, w)) = best {
                lines.push(ScoredLine {
                    ends: [u.min(w), u.max(w)],
                    confidence: c,
                });
                state[ti] = TState::Connected;
                if w >= nc {
                    state[w - nc] = TState::Connected;
                }
                changed = true;
            }
        }

        if !changed {
            break;
        }
    }
    let lines = prune_lines(&lines, &b.pos, params.eta_deg);

    // assemble: all C-junctions, then T-junctions that kept their single line
    let mut degree = vec![0usize; all.len()];
    for l in &lines {
        degree[l.ends[0]] += 1;
        degree[l.ends[1]] += 1;
    }
    let mut remap = vec![usize::MAX; all.len()];
    let mut wf = Wireframe::new(bundle.image_size);
    wf.vps = Some(bundle.vps);
    let mut scores = Vec::new();
    for (i, (c, t)) in all.iter().enumerate() {
        if *t == JunctionType::T && degree[i] != 1 {
            continue;
        }
        let mut v = Vertex::new(b.pos[i], *t, c.depth);
        v.score = Some(c.score);
        remap[i] = wf.add_vertex(v);
        scores.push(c.score);
    }
    for l in &lines {
        let [a, c] = l.ends;
        if remap[a] != usize::MAX && remap[c] != usize::MAX {
            wf.add_edge(remap[a], remap[c]);
        }
    }
    wf.canonicalize();

    let attachments = find_attachments(&wf, snap_px);
    Ok(Vectorized {
        wireframe: wf,
        scores,
        attachments,
    })
}

/// Vectorized 2.5D wireframe.
pub fn vectorize(bundle: &HeatmapBundle, params: &VectorizeParams) -> Result<Wireframe> {
    vectorize_detailed(bundle, params).map(|v| v.wireframe)
}

/// For each T-junction, the non-incident edge it lies on: the closest one
/// within `max_dist` px whose interior contains the junction's projection.
pub fn find_attachments(wf: &Wireframe, max_dist: f64) -> Vec<TAttachment> {
    let mut out = Vec::new();
    for (i, v) in wf.vertices.iter().enumerate() {
        if v.jtype != JunctionType::T {
            continue;
        }
        let mut best: Option<(f64, [usize; 2], f64)> = None;
        for &[a, c] in &wf.edges {
            if a == i || c == i {
                continue;
            }
            let (pa, pc) = (wf.vertices[a].xy, wf.vertices[c].xy);
            let t = geom::project_param(v.xy, pa, pc);
            if !(t > 0.0 && t < 1.0) {
                continue;
            }
            let d = geom::line_distance(v.xy, pa, pc);
            if d <= max_dist && best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, [a, c], 1.0 - t));
            }
        }
        if let Some((_, line, lambda)) = best {
            out.push(TAttachment {
                vertex: i,
                line,
                lambda,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{normalize_vp, VanishingPoints};
    use crate::heatmap::encode;

    fn vps() -> VanishingPoints {
        VanishingPoints::from_normalized([normalize_vp(1.0, 0.0); 3])
    }

    fn line(a: usize, b: usize, c: f64) -> ScoredLine {
        ScoredLine {
            ends: [a, b],
            confidence: c,
        }
    }

    #[test]
    fn confidence_examples() {
        let s = 4;
        let mut e = Plane::filled(16, 16, 1.0);
        assert_eq!(line_confidence([2.0, 2.0], [50.0, 30.0], &e, s).unwrap(), 1.0);
        assert_eq!(
            line_confidence([2.0, 2.0], [50.0, 30.0], &Plane::zeros(16, 16), s).unwrap(),
            0.0
        );
        assert!(matches!(
            line_confidence([2.0, 2.0], [2.0, 2.0], &e, s),
            Err(Error::DegenerateLine)
        ));
        // walk over columns 1..=6; left half lit
        for y in 0..16 {
            for x in 4..16 {
                e.set(x, y, 0.0);
            }
        }
        assert_eq!(raster::line_steps([0.5, 3.5], [7.5, 3.5]).0.len(), 6);
        assert_eq!(line_confidence([2.0, 14.0], [30.0, 14.0], &e, s).unwrap(), 0.5);
        assert_eq!(
            line_confidence([30.0, 14.0], [2.0, 14.0], &e, s).unwrap(),
            line_confidence([2.0, 14.0], [30.0, 14.0], &e, s).unwrap()
        );
    }

    #[test]
    fn threshold_semantics() {
        let mut wf = Wireframe::new((32, 32));
        wf.add_vertex(Vertex::new([6.0, 6.0], JunctionType::C, Some(2.0)));
        let mut b = encode(&wf, &vps()).unwrap();
        b.jmap[0].set(1, 1, 0.25);
        let p = VectorizeParams::for_ground_truth();
        assert_eq!(extract_junctions(&b, &p)[0].len(), 1);
        let p = VectorizeParams { theta_c: 0.3, ..p };
        assert!(extract_junctions(&b, &p)[0].is_empty());
        b.jmap[0].set(1, 1, 0.0);
        let e = extract_junctions(&b, &p);
        assert!(e[0].is_empty() && e[1].is_empty());
    }

    #[test]
    fn nms_keeps_peak() {
        let mut wf = Wireframe::new((32, 32));
        wf.add_vertex(Vertex::new([10.0, 10.0], JunctionType::C, Some(2.0)));
        let mut b = encode(&wf, &vps()).unwrap();
        b.jmap[0].set(1, 2, 0.6);
        b.jmap[0].set(3, 2, 0.6);
        let p = VectorizeParams::default();
        let c = &extract_junctions(&b, &p)[0];
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].cell, (2, 2));
    }

    #[test]
    fn prune_crossing() {
        let pos = [[0.0, 0.0], [10.0, 10.0], [0.0, 10.0], [10.0, 0.0]];
        let kept = prune_lines(&[line(0, 1, 0.9), line(2, 3, 0.8)], &pos, 5.0);
        assert_eq!(kept, vec![line(0, 1, 0.9)]);
    }

    #[test]
    fn prune_right_angle_kept() {
        let pos = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let kept = prune_lines(&[line(0, 1, 0.9), line(0, 2, 0.8)], &pos, 5.0);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn prune_greedy_three() {
        // A (0.9) and C (0.7) are disjoint; B (0.8) crosses both
        let pos = [
            [0.0, 0.0],
            [10.0, 0.0],
            [2.0, -5.0],
            [8.0, 15.0],
            [0.0, 10.0],
            [10.0, 10.0],
        ];
        let lines = [line(0, 1, 0.9), line(2, 3, 0.8), line(4, 5, 0.7)];
        let kept = prune_lines(&lines, &pos, 5.0);
        assert_eq!(kept, vec![line(0, 1, 0.9), line(4, 5, 0.7)]);
    }

    #[test]
    fn prune_near_collinear_shared_endpoint() {
        let pos = [[0.0, 0.0], [20.0, 0.0], [10.0, 0.5]];
        let kept = prune_lines(&[line(0, 1, 0.7), line(0, 2, 0.8)], &pos, 5.0);
        assert_eq!(kept, vec![line(0, 2, 0.8)]);
    }

    #[test]
    fn zeroed_emap_gives_isolated_vertices() {
        let mut wf = Wireframe::new((64, 64));
        let a = wf.add_vertex(Vertex::new([6.0, 6.0], JunctionType::C, Some(2.0)));
        let c = wf.add_vertex(Vertex::new([50.0, 40.0], JunctionType::C, Some(3.0)));
        wf.add_edge(a, c);
        let mut b = encode(&wf, &vps()).unwrap();
        let out = vectorize(&b, &VectorizeParams::for_ground_truth()).unwrap();
        assert_eq!(out.edges, vec![[0, 1]]);
        b.emap = Plane::zeros(16, 16);
        let out = vectorize(&b, &VectorizeParams::for_ground_truth()).unwrap();
        assert_eq!(out.vertices.len(), 2);
        assert!(out.edges.is_empty());
    }

    #[test]
    fn t_junction_attaches_and_connects() {
        // horizontal occluder with a vertical background line ending on it
        let mut wf = Wireframe::new((128, 128));
        let a = wf.add_vertex(Vertex::new([10.0, 60.0], JunctionType::C, Some(5.0)));
        let c = wf.add_vertex(Vertex::new([110.0, 60.0], JunctionType::C, Some(5.0)));
        let top = wf.add_vertex(Vertex::new([50.0, 10.0], JunctionType::C, Some(9.0)));
        let t = wf.add_vertex(Vertex::new([50.0, 60.0], JunctionType::T, Some(9.5)));
        wf.add_edge(a, c);
        wf.add_edge(top, t);
        let b = encode(&wf, &vps()).unwrap();
        let v = vectorize_detailed(&b, &VectorizeParams::for_ground_truth()).unwrap();
        let out = &v.wireframe;
        assert_eq!(out.vertices.len(), 4);
        assert_eq!(out.count(JunctionType::T), 1);
        assert_eq!(out.edges.len(), 2);
        assert!(crate::wireframe::validate(out).is_empty());
        assert_eq!(v.attachments.len(), 1);
        assert!((v.attachments[0].lambda - 0.6).abs() < 1e-6);
    }
}
