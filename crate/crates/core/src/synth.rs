//! Seeded Manhattan block scenes with exact ground-truth wireframes.
//!
//! Blocks are axis-aligned cuboids on a ground grid (world z is up). The
//! visible wireframe is computed analytically: every projected cuboid edge is
//! clipped to the image, split at all pairwise crossings, and each piece is
//! classified by casting a ray from the camera center through its midpoint.
//! Visibility changes at crossings become T-junctions carrying the depth of
//! the background edge.

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{vp_from_pose, CameraModel, Pose, VanishingPoints};
use crate::error::{Error, Result};
use crate::geom::{self, P2};
use crate::wireframe::{validate, JunctionType, Vertex, Wireframe};

/// Junctions closer than this (px) in projection are merged into one C-junction.
pub const MERGE_DIST_PX: f64 = 0.5;

/// Border clips are placed this far inside the right/bottom image edge so the
/// position stays in `[0, W) × [0, H)`.
const BORDER_INSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Cuboid {
    /// Corner `i` takes `max` on axis `k` when bit `k` of `i` is set.
    pub fn corner(&self, i: usize) -> Vector3<f64> {
        Vector3::new(
            if i & 1 != 0 { self.max[0] } else { self.min[0] },
            if i & 2 != 0 { self.max[1] } else { self.min[1] },
            if i & 4 != 0 { self.max[2] } else { self.min[2] },
        )
    }

    /// The 12 edges as corner-index pairs with their axis.
    pub fn edges() -> impl Iterator<Item = (usize, usize, usize)> {
        (0..8).flat_map(|i| {
            (0..3).filter_map(move |axis| {
                let j = i | (1 << axis);
                (j != i).then_some((i, j, axis))
            })
        })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    /// Ray `o + t·d` entry/exit parameters (slab method).
    fn ray_interval(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut tn = f64::NEG_INFINITY;
        let mut tf = f64::INFINITY;
        for k in 0..3 {
            if d[k] == 0.0 {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - o[k]) / d[k];
            let b = (self.max[k] - o[k]) / d[k];
            tn = tn.max(a.min(b));
            tf = tf.min(a.max(b));
        }
        (tn <= tf).then_some((tn, tf))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene3D {
    pub blocks: Vec<Cuboid>,
    pub camera: CameraModel,
    pub pose: Pose,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub image_size: (u32, u32),
    pub focal_range: (f64, f64),
    /// Grid cell size in meters.
    pub block_pitch: f64,
    /// Block side as a fraction of the pitch.
    pub footprint_frac: (f64, f64),
    /// Minimum gap between neighboring blocks (meters).
    pub min_street: f64,
    pub height_range: (f64, f64),
    /// Camera look-down angle.
    pub elevation_deg: (f64, f64),
    /// Camera azimuth measured from the nearest world axis.
    pub azimuth_offset_deg: (f64, f64),
    /// Fraction of the half field of view filled by the scene's bounding sphere.
    pub fill: (f64, f64),
    pub min_buildings: usize,
    /// Required depth margin between a T-junction and its occluder (meters).
    pub min_depth_gap: f64,
    pub min_junction_sep_px: f64,
    /// Minimum distance from a junction to the interior of any edge it does
    /// not end on (a T-junction's occluder excepted).
    pub min_clearance_px: f64,
    pub min_edge_len_px: f64,
    /// Minimum angle between two edges meeting at a junction.
    pub min_junction_angle_deg: f64,
    pub max_attempts: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            image_size: (512, 512),
            focal_range: (400.0, 600.0),
            block_pitch: 10.0,
            footprint_frac: (0.45, 0.8),
            min_street: 1.5,
            height_range: (4.0, 20.0),
            elevation_deg: (20.0, 40.0),
            azimuth_offset_deg: (25.0, 65.0),
            fill: (0.8, 0.95),
            min_buildings: 1,
            min_depth_gap: 0.25,
            min_junction_sep_px: 9.0,
            min_clearance_px: 12.0,
            min_edge_len_px: 16.0,
            min_junction_angle_deg: 15.0,
            max_attempts: 5000,
        }
    }
}

impl SceneParams {
    pub fn check(&self) -> Result<()> {
        let ranges = [
            ("focal_range", self.focal_range),
            ("footprint_frac", self.footprint_frac),
            ("height_range", self.height_range),
            ("elevation_deg", self.elevation_deg),
            ("azimuth_offset_deg", self.azimuth_offset_deg),
            ("fill", self.fill),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParams(format!("{name} must satisfy lo < hi")));
            }
        }
        if self.footprint_frac.0 <= 0.0 || self.footprint_frac.1 > 1.0 {
            return Err(Error::InvalidParams("footprint_frac must lie in (0, 1]".into()));
        }
        if !(self.min_street >= 0.0
            && self.footprint_frac.1 * self.block_pitch + self.min_street <= self.block_pitch)
        {
            return Err(Error::InvalidParams(
                "blocks do not fit their cells with min_street".into(),
            ));
        }
        if self.height_range.0 <= 0.0 || self.focal_range.0 <= 0.0 || self.block_pitch <= 0.0 {
            return Err(Error::InvalidParams("sizes must be positive".into()));
        }
        if self.elevation_deg.0 <= 0.0 || self.elevation_deg.1 >= 90.0 {
            return Err(Error::InvalidParams("elevation must lie in (0, 90)".into()));
        }
        if self.fill.0 <= 0.0 {
            return Err(Error::InvalidParams("fill must be positive".into()));
        }
        let (w, h) = self.image_size;
        if w == 0 || h == 0 {
            return Err(Error::InvalidParams("empty image".into()));
        }
        Ok(())
    }
}

/// Exact ground truth for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Visible wireframe with every depth set; camera and VPs attached.
    pub wireframe: Wireframe,
    pub vps: VanishingPoints,
    pub camera: CameraModel,
    /// World axis (0 = x, 1 = y, 2 = z) of each wireframe edge.
    pub edge_axes: Vec<usize>,
    /// For each T-junction, the wireframe edge it lies on (its occluder).
    pub occluders: HashMap<usize, usize>,
}

/// Samples a block scene, retrying with the same PRNG stream until the view
/// passes every genericity check in `params`.
pub fn generate(seed: u64, grid: (usize, usize), params: &SceneParams) -> Result<Scene3D> {
    params.check()?;
    if grid.0 == 0 || grid.1 == 0 {
        return Err(Error::InvalidParams("grid dimensions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.max_attempts {
        let scene = sample_scene(&mut rng, seed, grid, params);
        if let Ok(raw) = hidden_lines(&scene) {
            if rejection(&raw, params).is_none() {
                return Ok(scene);
            }
        }
    }
    Err(Error::GenerationExhausted(params.max_attempts))
}

fn uniform(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    rng.random_range(r.0..r.1)
}

fn sample_scene(rng: &mut ChaCha8Rng, seed: u64, (rows, cols): (usize, usize), p: &SceneParams) -> Scene3D {
    let pitch = p.block_pitch;
    let mut blocks = Vec::with_capacity(rows * cols);
    let mut max_h: f64 = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let sx = uniform(rng, p.footprint_frac) * pitch;
            let sy = uniform(rng, p.footprint_frac) * pitch;
            let m = p.min_street / 2.0;
            let ox = rng.random_range(m..=(pitch - sx - m));
            let oy = rng.random_range(m..=(pitch - sy - m));
            let h = uniform(rng, p.height_range);
            max_h = max_h.max(h);
            let x0 = c as f64 * pitch + ox;
            let y0 = r as f64 * pitch + oy;
            blocks.push(Cuboid {
                min: [x0, y0, 0.0],
                max: [x0 + sx, y0 + sy, h],
            });
        }
    }

    let (w, h) = p.image_size;
    let focal = uniform(rng, p.focal_range);
    let camera = CameraModel::centered(focal, (w, h));

    let quadrant = rng.random_range(0..4) as f64 * 90.0;
    let azimuth = (quadrant + uniform(rng, p.azimuth_offset_deg)).to_radians();
    let elevation = uniform(rng, p.elevation_deg).to_radians();
    let fill = uniform(rng, p.fill);

    let ext = Vector3::new(cols as f64 * pitch, rows as f64 * pitch, max_h);
    let target = Vector3::new(ext.x / 2.0, ext.y / 2.0, max_h * 0.4);
    let radius = ext.norm() / 2.0;
    let half_fov = ((w.min(h) as f64 / 2.0) / focal).atan();
    let dist = radius / (fill * half_fov).sin();
    let dir = Vector3::new(
        -elevation.cos() * azimuth.cos(),
        -elevation.cos() * azimuth.sin(),
        elevation.sin(),
    );
    let pose = Pose::look_at(target + dir * dist, target, Vector3::z());

    Scene3D {
        blocks,
        camera,
        pose,
        seed,
    }
}

/// Visible-edge wireframe of a scene with exact depths and vanishing points.
pub fn project_gt(scene: &Scene3D) -> Result<GroundTruth> {
    hidden_lines(scene).map(|raw| raw.gt)
}

struct RawProjection {
    gt: GroundTruth,
    /// Smallest spacing (px) between consecutive split points on any edge.
    min_split_gap: f64,
    /// Per T-junction: occluder depth at the crossing.
    occluder_depth: HashMap<usize, f64>,
    visible_blocks: usize,
    merged: bool,
}

struct ProjEdge {
    block: usize,
    corners: (usize, usize),
    axis: usize,
    a: Vector3<f64>,
    b: Vector3<f64>,
    za: f64,
    zb: f64,
    pa: P2,
    pb: P2,
    /// Image-parameter range surviving the border clip.
    clip: (f64, f64),
}

impl ProjEdge {
    fn pixel(&self, t: f64) -> P2 {
        geom::lerp(self.pa, self.pb, t)
    }

    /// Camera depth at image parameter `t` (inverse depth is affine in `t`).
    fn depth(&self, t: f64) -> f64 {
        1.0 / ((1.0 - t) / self.za + t / self.zb)
    }

    fn world(&self, t: f64) -> Vector3<f64> {
        let s = t * self.za / (t * self.za + (1.0 - t) * self.zb);
        self.a + (self.b - self.a) * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Corner(usize, usize),
    Border(usize, u8),
    Crossing(usize, usize),
}

#[derive(Clone, Copy)]
struct Split {
    t: f64,
    partner: usize,
    partner_t: f64,
}

/// Liang–Barsky clip of `p + t(q − p)`, `t ∈ [0, 1]`, to `[0, xmax] × [0, ymax]`.
fn clip_segment(p: P2, q: P2, xmax: f64, ymax: f64) -> Option<(f64, f64)> {
    let d = geom::sub(q, p);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let checks = [
        (-d[0], p[0]),
        (d[0], xmax - p[0]),
        (-d[1], p[1]),
        (d[1], ymax - p[1]),
    ];
    for (pk, qk) in checks {
        if pk == 0.0 {
            if qk < 0.0 {
                return None;
            }
        } else {
            let r = qk / pk;
            if pk < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t1 - t0 > 1e-12).then_some((t0, t1))
}

fn hidden_lines(scene: &Scene3D) -> Result<RawProjection> {
    let cam = &scene.camera;
    let (w, h) = cam.image_size;
    let xmax = w as f64 - BORDER_INSET;
    let ymax = h as f64 - BORDER_INSET;
    let center = scene.pose.center();
    if scene.blocks.iter().any(|b| b.contains(&center)) {
        return Err(Error::InvalidParams("camera inside a block".into()));
    }

    let mut edges = Vec::new();
    for (bi, block) in scene.blocks.iter().enumerate() {
        for (i, j, axis) in Cuboid::edges() {
            let a = block.corner(i);
            let b = block.corner(j);
            let ca = scene.pose.to_camera(&a);
            let cb = scene.pose.to_camera(&b);
            if ca.z <= 1e-6 || cb.z <= 1e-6 {
                return Err(Error::InvalidParams("block behind the camera".into()));
            }
            let pa: P2 = cam.project(&ca).into();
            let pb: P2 = cam.project(&cb).into();
            if let Some(clip) = clip_segment(pa, pb, xmax, ymax) {
                edges.push(ProjEdge {
                    block: bi,
                    corners: (i, j),
                    axis,
                    a,
                    b,
                    za: ca.z,
                    zb: cb.z,
                    pa,
                    pb,
                    clip,
                });
            }
        }
    }

    const EPS: f64 = 1e-9;
    let mut splits: Vec<Vec<Split>> = vec![Vec::new(); edges.len()];
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            let (ei, ej) = (&edges[i], &edges[j]);
            if let Some((s, t)) = geom::intersect_params(ei.pa, ei.pb, ej.pa, ej.pb) {
                if s > ei.clip.0 + EPS && s < ei.clip.1 - EPS && t > ej.clip.0 + EPS && t < ej.clip.1 - EPS {
                    splits[i].push(Split {
                        t: s,
                        partner: j,
                        partner_t: t,
                    });
                    splits[j].push(Split {
                        t,
                        partner: i,
                        partner_t: s,
                    });
                }
            }
        }
    }

    let visible = |e: &ProjEdge, t: f64| -> bool {
        let x = e.world(t);
        let d = x - center;
        !scene.blocks.iter().any(|b| match b.ray_interval(&center, &d) {
            Some((tn, tf)) => tf - tn > 1e-9 && tn < 1.0 - 1e-9 && tf > 1e-9,
            None => false,
        })
    };

    let mut wf = Wireframe::new((w, h));
    let mut keys: HashMap<Key, usize> = HashMap::new();
    let mut edge_axes = Vec::new();
    let mut occluder_of: HashMap<usize, (usize, f64)> = HashMap::new();
    // (edge id, t range) for every visible piece, indexed like `wf.edges`
    let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
    let mut min_split_gap = f64::INFINITY;

    for (ei, e) in edges.iter().enumerate() {
        let sp = &mut splits[ei];
        sp.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut params = vec![e.clip.0];
        params.extend(sp.iter().map(|s| s.t));
        params.push(e.clip.1);
        let vis: Vec<bool> = params
            .windows(2)
            .map(|ts| visible(e, 0.5 * (ts[0] + ts[1])))
            .collect();
        // short runs only matter where they could change what is visible
        for k in 0..vis.len() {
            let near_visible = vis[k] || (k > 0 && vis[k - 1]) || vis.get(k + 1) == Some(&true);
            if near_visible {
                let gap = geom::dist(e.pixel(params[k]), e.pixel(params[k + 1]));
                min_split_gap = min_split_gap.min(gap);
            }
        }

        let mut k = 0;
        while k < vis.len() {
            if !vis[k] {
                k += 1;
                continue;
            }
            let start = k;
            while k < vis.len() && vis[k] {
                k += 1;
            }
            // piece spans params[start] .. params[k]
            let endpoint = |idx: usize| -> (Key, JunctionType) {
                let t = params[idx];
                if idx == 0 {
                    if e.clip.0 > 0.0 {
                        (Key::Border(ei, 0), JunctionType::C)
                    } else {
                        (Key::Corner(e.block, e.corners.0), JunctionType::C)
                    }
                } else if idx == params.len() - 1 {
                    if e.clip.1 < 1.0 {
                        (Key::Border(ei, 1), JunctionType::C)
                    } else {
                        (Key::Corner(e.block, e.corners.1), JunctionType::C)
                    }
                } else {
                    debug_assert!(t > e.clip.0);
                    (Key::Crossing(ei, idx - 1), JunctionType::T)
                }
            };
            let mut ids = [0usize; 2];
            for (slot, idx) in [start, k].into_iter().enumerate() {
                let (key, jt) = endpoint(idx);
                let t = params[idx];
                let id = *keys.entry(key).or_insert_with(|| {
                    let mut xy = e.pixel(t);
                    if let Key::Border(..) = key {
                        xy = [xy[0].clamp(0.0, xmax), xy[1].clamp(0.0, ymax)];
                    }
                    wf.add_vertex(Vertex::new(xy, jt, Some(e.depth(t))))
                });
                if let Key::Crossing(_, s) = key {
                    let split = sp[s];
                    occluder_of.insert(id, (split.partner, split.partner_t));
                }
                ids[slot] = id;
            }
            wf.add_edge(ids[0], ids[1]);
            edge_axes.push(e.axis);
            pieces.push((ei, params[start], params[k]));
        }
    }

    if wf.edges.is_empty() {
        return Err(Error::EmptyView);
    }

    let visible_blocks = {
        let mut seen = vec![false; scene.blocks.len()];
        for &(ei, _, _) in &pieces {
            seen[edges[ei].block] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };

    // occluder piece for each T: the visible piece of the partner edge
    // containing the crossing
    let mut occluders = HashMap::new();
    let mut occluder_depth = HashMap::new();
    for (&vid, &(partner, pt)) in &occluder_of {
        occluder_depth.insert(vid, edges[partner].depth(pt));
        if let Some(pi) = pieces
            .iter()
            .position(|&(ei, t0, t1)| ei == partner && pt > t0 && pt < t1)
        {
            occluders.insert(vid, pi);
        }
    }

    let merged = merge_close(&mut wf, &mut edge_axes, &mut occluders, &mut occluder_depth);

    let vps = vp_from_pose(&scene.pose, cam);
    wf.camera = Some(*cam);
    wf.vps = Some(vps);

    Ok(RawProjection {
        gt: GroundTruth {
            wireframe: wf,
            vps,
            camera: *cam,
            edge_axes,
            occluders,
        },
        min_split_gap,
        occluder_depth,
        visible_blocks,
        merged,
    })
}

/// Merges junctions closer than [`MERGE_DIST_PX`] into single C-junctions.
/// Returns whether anything was merged.
fn merge_close(
    wf: &mut Wireframe,
    edge_axes: &mut Vec<usize>,
    occluders: &mut HashMap<usize, usize>,
    occluder_depth: &mut HashMap<usize, f64>,
) -> bool {
    let n = wf.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut any = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if geom::dist(wf.vertices[i].xy, wf.vertices[j].xy) < MERGE_DIST_PX {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                    any = true;
                }
            }
        }
    }
    if !any {
        return false;
    }

    let mut remap = vec![usize::MAX; n];
    let mut verts: Vec<Vertex> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if remap[root] == usize::MAX {
            remap[root] = verts.len();
            verts.push(wf.vertices[root]);
        }
        remap[i] = remap[root];
        let v = &mut verts[remap[i]];
        if root != i {
            v.jtype = JunctionType::C;
            v.depth = match (v.depth, wf.vertices[i].depth) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
    }
    let mut edges = Vec::new();
    let mut axes = Vec::new();
    let mut edge_map = vec![usize::MAX; wf.edges.len()];
    for (k, &[a, b]) in wf.edges.iter().enumerate() {
        let (a, b) = (remap[a], remap[b]);
        if a == b {
            continue;
        }
        let e = [a.min(b), a.max(b)];
        if let Some(pos) = edges.iter().position(|x| *x == e) {
            edge_map[k] = pos;
            continue;
        }
        edge_map[k] = edges.len();
        edges.push(e);
        axes.push(edge_axes[k]);
    }
    let old_occ = std::mem::take(occluders);
    let old_depth = std::mem::take(occluder_depth);
    for (v, e) in old_occ {
        let nv = remap[v];
        if verts[nv].jtype == JunctionType::T && edge_map[e] != usize::MAX {
            occluders.insert(nv, edge_map[e]);
        }
    }
    for (v, d) in old_depth {
        let nv = remap[v];
        if verts[nv].jtype == JunctionType::T {
            occluder_depth.insert(nv, d);
        }
    }
    wf.vertices = verts;
    wf.edges = edges;
    *edge_axes = axes;
    true
}

/// Genericity checks applied during rejection sampling.
fn rejection(raw: &RawProjection, p: &SceneParams) -> Option<&'static str> {
    let gt = &raw.gt;
    let wf = &gt.wireframe;
    if raw.merged {
        return Some("merged");
    }
    if raw.visible_blocks < p.min_buildings {
        return Some("buildings");
    }
    if !validate(wf).is_empty() {
        return Some("invalid");
    }
    // two occlusion events closer than the merge radius on one edge
    if raw.min_split_gap < MERGE_DIST_PX {
        return Some("split-gap");
    }
    let n = wf.vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if geom::dist(wf.vertices[i].xy, wf.vertices[j].xy) <= p.min_junction_sep_px {
                return Some("separation");
            }
        }
    }
    if wf.edges.iter().any(|&e| wf.edge_length(e) < p.min_edge_len_px) {
        return Some("short-edge");
    }
    for (i, v) in wf.vertices.iter().enumerate() {
        if v.jtype != JunctionType::T {
            continue;
        }
        let Some(&occ) = gt.occluders.get(&i) else {
            return Some("no-occluder");
        };
        let zw = v.depth.unwrap();
        if zw - raw.occluder_depth[&i] < p.min_depth_gap {
            return Some("depth-gap");
        }
        // the linear relaxation of the occlusion order must hold at the truth
        let [a, b] = wf.edges[occ];
        let lam = 1.0 - geom::project_param(v.xy, wf.vertices[a].xy, wf.vertices[b].xy);
        let za = wf.vertices[a].depth.unwrap();
        let zb = wf.vertices[b].depth.unwrap();
        if !(lam > 0.0 && lam < 1.0) || lam * za + (1.0 - lam) * zb + p.min_depth_gap > zw {
            return Some("relaxation");
        }
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &[a, b] in &wf.edges {
        incident[a].push(b);
        incident[b].push(a);
    }
    for (v, nb) in incident.iter().enumerate() {
        let dir = |k: usize| geom::sub(wf.vertices[k].xy, wf.vertices[v].xy);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if geom::angle_between_deg(dir(a), dir(b)) < p.min_junction_angle_deg {
                    return Some("angle");
                }
            }
        }
    }
    // a junction hugging an edge it does not end on reads as a bend in it
    for (v, vert) in wf.vertices.iter().enumerate() {
        for (ei, &[a, b]) in wf.edges.iter().enumerate() {
            if a == v || b == v || gt.occluders.get(&v) == Some(&ei) {
                continue;
            }
            let (pa, pb) = (wf.vertices[a].xy, wf.vertices[b].xy);
            let t = geom::project_param(vert.xy, pa, pb);
            if t > 0.0 && t < 1.0 && geom::line_distance(vert.xy, pa, pb) <= p.min_clearance_px {
                return Some("clearance");
            }
        }
    }
    for (i, &[a, b]) in wf.edges.iter().enumerate() {
        for &[c, d] in &wf.edges[i + 1..] {
            let pts = |k: usize| wf.vertices[k].xy;
            if geom::properly_cross(pts(a), pts(b), pts(c), pts(d), 1e-6) {
                return Some("crossing");
            }
        }
    }
    None
}
