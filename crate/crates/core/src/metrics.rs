//! Evaluation: length-weighted junction AP, edge-map IoU, depth SILog at
//! matched junctions, vanishing-point angular error and focal error.

use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, VanishingPoints};
use crate::error::{Error, Result};
use crate::geom;
use crate::heatmap::{render_edge_map, Plane};
use crate::lift::vp_directions;
use crate::loss::silog;
use crate::wireframe::{JunctionType, Wireframe};

/// Matching thresholds (full-resolution px) averaged into the junction mAP.
pub const AP_THRESHOLDS: [f64; 3] = [0.5, 1.0, 2.0];

/// Angular error above which a vanishing-point estimate counts as a failure.
pub const VP_FAILURE_DEG: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub xy: [f64; 2],
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtJunction {
    pub xy: [f64; 2],
    pub weight: f64,
}

/// One image's worth of junctions of a single type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JunctionSet {
    pub preds: Vec<Detection>,
    pub gts: Vec<GtJunction>,
}

/// Greedy matching in descending score order: each prediction takes the
/// nearest still-unmatched ground truth within `threshold`. Returns the
/// matched ground-truth index per prediction (in input order).
pub fn match_junctions(preds: &[Detection], gts: &[[f64; 2]], threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; preds.len()];
    for i in order {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let d = geom::dist(preds[i].xy, *g);
            if d <= threshold && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if let Some((_, j)) = best {
            taken[j] = true;
            out[i] = Some(j);
        }
    }
    out
}

/// Weighted average precision pooled over images.
///
/// A true positive earns its ground truth's weight; a false positive costs the
/// mean ground-truth weight. Precision is made monotone (the maximum to its
/// right) and integrated over recall with the trapezoid rule, starting from
/// recall 0 at the first precision value.
///
/// With no ground truth at all, AP is 1 when nothing was predicted either and
/// 0 otherwise.
pub fn junction_ap(sets: &[JunctionSet], threshold: f64) -> f64 {
    let total: f64 = sets.iter().flat_map(|s| &s.gts).map(|g| g.weight).sum();
    let count: usize = sets.iter().map(|s| s.gts.len()).sum();
    if count == 0 {
        let any_pred = sets.iter().any(|s| !s.preds.is_empty());
        return if any_pred { 0.0 } else { 1.0 };
    }
    if total <= 0.0 {
        return 0.0;
    }
    let fp_weight = total / count as f64;
    // (score, tp weight, fp weight) per prediction
    let mut events: Vec<(f64, f64, f64)> = Vec::new();
    for s in sets {
        let gxy: Vec<[f64; 2]> = s.gts.iter().map(|g| g.xy).collect();
        let m = match_junctions(&s.preds, &gxy, threshold);
        for (p, m) in s.preds.iter().zip(m) {
            events.push(match m {
                Some(j) => (p.score, s.gts[j].weight, 0.0),
                None => (p.score, 0.0, fp_weight),
            });
        }
    }
    if events.is_empty() {
        return 0.0;
    }
    events.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut recall = Vec::with_capacity(events.len());
    let mut precision = Vec::with_capacity(events.len());
    for (_, t, f) in &events {
        tp += t;
        fp += f;
        recall.push(tp / total);
        precision.push(if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 });
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let (mut r0, mut p0) = (0.0, precision[0]);
    for (r, p) in recall.into_iter().zip(precision) {
        ap += (r - r0) * 0.5 * (p + p0);
        r0 = r;
        p0 = p;
    }
    ap.clamp(0.0, 1.0)
}

/// Mean of [`junction_ap`] over [`AP_THRESHOLDS`].
pub fn junction_map(sets: &[JunctionSet]) -> f64 {
    AP_THRESHOLDS.iter().map(|&t| junction_ap(sets, t)).sum::<f64>() / AP_THRESHOLDS.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Each junction weighs the total length of its incident lines.
    #[default]
    Length,
    Uniform,
}

/// Sum of incident edge lengths per vertex.
pub fn incident_lengths(wf: &Wireframe) -> Vec<f64> {
    let mut w = vec![0.0; wf.vertices.len()];
    for &[a, b] in &wf.edges {
        let l = geom::dist(wf.vertices[a].xy, wf.vertices[b].xy);
        w[a] += l;
        w[b] += l;
    }
    w
}

/// Junctions of type `t` of one prediction/ground-truth pair. Predictions
/// without a score all rank equally, in vertex order.
pub fn junction_set(pred: &Wireframe, gt: &Wireframe, t: JunctionType, weighting: Weighting) -> JunctionSet {
    let weights = incident_lengths(gt);
    JunctionSet {
        preds: pred
            .vertices
            .iter()
            .filter(|v| v.jtype == t)
            .map(|v| Detection {
                xy: v.xy,
                score: v.score.unwrap_or(1.0),
            })
            .collect(),
        gts: gt
            .vertices
            .iter()
            .zip(&weights)
            .filter(|(v, _)| v.jtype == t)
            .map(|(v, &w)| GtJunction {
                xy: v.xy,
                weight: match weighting {
                    Weighting::Length => w,
                    Weighting::Uniform => 1.0,
                },
            })
            .collect(),
    }
}

/// IoU of the two maps binarized at `threshold` (a cell is on when its value
/// is `>= threshold`); 1 when both are empty.
pub fn edge_iou(pred: &Plane, gt: &Plane, threshold: f64) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in pred.data.iter().zip(&gt.data) {
        let (a, b) = (a as f64 >= threshold, b as f64 >= threshold);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Edge-map IoU of two wireframes rendered at `stride`.
pub fn wireframe_iou(pred: &Wireframe, gt: &Wireframe, stride: u32, threshold: f64) -> Result<f64> {
    edge_iou(
        &render_edge_map(pred, stride)?,
        &render_edge_map(gt, stride)?,
        threshold,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VpErrors {
    /// Angle (degrees) between predicted and true calibrated directions, per
    /// vanishing point, after matching the horizontal pair.
    pub per_vp_deg: [f64; 3],
    pub mean_deg: f64,
    pub median_deg: f64,
    /// Some error exceeds [`VP_FAILURE_DEG`].
    pub failure: bool,
}

fn line_angle_deg(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    // directions are unsigned; the cross/dot form stays accurate near 0
    a.cross(b).norm().atan2(a.dot(b).abs()).to_degrees()
}

/// Angular vanishing-point errors through `camera`. The two horizontal points
/// are matched whichever way gives the smaller total error.
pub fn vp_errors(pred: &VanishingPoints, gt: &VanishingPoints, camera: &CameraModel) -> Result<VpErrors> {
    let p = vp_directions(pred, camera)?;
    let g = vp_directions(gt, camera)?;
    let direct = [0, 1].map(|i| line_angle_deg(&p[i], &g[i]));
    let swapped = [0, 1].map(|i| line_angle_deg(&p[1 - i], &g[i]));
    let h = if swapped[0] + swapped[1] < direct[0] + direct[1] {
        swapped
    } else {
        direct
    };
    let per = [h[0], h[1], line_angle_deg(&p[2], &g[2])];
    let mut sorted = per;
    sorted.sort_by(f64::total_cmp);
    Ok(VpErrors {
        per_vp_deg: per,
        mean_deg: per.iter().sum::<f64>() / 3.0,
        median_deg: sorted[1],
        failure: per.iter().any(|&e| e > VP_FAILURE_DEG),
    })
}

/// `|f̂ − f| / f`.
pub fn focal_rel_err(pred: &CameraModel, gt: &CameraModel) -> f64 {
    (pred.focal - gt.focal).abs() / gt.focal
}

/// Predicted and true depths of ground-truth junctions matched (any type) by
/// a prediction of the same type within `threshold`.
pub fn matched_depths(pred: &Wireframe, gt: &Wireframe, threshold: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut zp, mut zg) = (Vec::new(), Vec::new());
    for t in JunctionType::ALL {
        let pi: Vec<usize> = (0..pred.vertices.len())
            .filter(|&i| pred.vertices[i].jtype == t && pred.vertices[i].depth.is_some())
            .collect();
        let gi: Vec<usize> = (0..gt.vertices.len())
            .filter(|&i| gt.vertices[i].jtype == t && gt.vertices[i].depth.is_some())
            .collect();
        let dets: Vec<Detection> = pi
            .iter()
            .map(|&i| Detection {
                xy: pred.vertices[i].xy,
                score: pred.vertices[i].score.unwrap_or(1.0),
            })
            .collect();
        let gxy: Vec<[f64; 2]> = gi.iter().map(|&i| gt.vertices[i].xy).collect();
        let m = match_junctions(&dets, &gxy, threshold);
        for (k, j) in m.into_iter().enumerate() {
            if let Some(j) = j {
                zp.push(pred.vertices[pi[k]].depth.unwrap());
                zg.push(gt.vertices[gi[j]].depth.unwrap());
            }
        }
    }
    (zp, zg)
}

/// SILog over matched junctions.
pub fn silog_eval(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyMatch);
    }
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} depths",
            pred.len(),
            gt.len()
        )));
    }
    if pred.iter().chain(gt).any(|z| !(*z > 0.0)) {
        return Err(Error::InvalidParams("depths must be positive".into()));
    }
    Ok(silog(pred, gt).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub weighting: Weighting,
    /// Edge-map binarization threshold for the IoU.
    pub iou_threshold: f64,
    /// Junction matching distance (px) for depth evaluation.
    pub depth_match_px: f64,
    pub stride: u32,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            weighting: Weighting::Length,
            iou_threshold: 0.5,
            depth_match_px: 2.0,
            stride: 4,
        }
    }
}

/// Scores of one prediction against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub name: String,
    #[serde(rename = "ap_C")]
    pub ap_c: f64,
    #[serde(rename = "ap_T")]
    pub ap_t: f64,
    #[serde(rename = "iou_E")]
    pub iou_e: f64,
    /// `None` when no junction with depth was matched.
    pub silog: Option<f64>,
    /// `None` when either side carries no vanishing points.
    pub vp_err_deg: Option<VpErrors>,
    /// `None` when either side carries no camera.
    pub focal_rel_err: Option<f64>,
    /// Per-type junctions, kept for pooled AP.
    #[serde(skip)]
    sets: [JunctionSet; 2],
}

/// Evaluates one sample. The ground truth must carry its camera when VP and
/// focal errors are wanted.
pub fn evaluate_sample(
    name: &str,
    pred: &Wireframe,
    gt: &Wireframe,
    params: &EvalParams,
) -> Result<SampleReport> {
    let sets = JunctionType::ALL.map(|t| junction_set(pred, gt, t, params.weighting));
    let ap = |s: &JunctionSet| junction_map(std::slice::from_ref(s));
    let depths = matched_depths(pred, gt, params.depth_match_px);
    let silog = silog_eval(&depths.0, &depths.1).ok();
    let vp_err_deg = match (&pred.vps, &gt.vps, &gt.camera) {
        (Some(p), Some(g), Some(cam)) => Some(vp_errors(p, g, cam)?),
        _ => None,
    };
    let focal_rel_err = match (&pred.camera, &gt.camera) {
        (Some(p), Some(g)) => Some(focal_rel_err(p, g)),
        _ => None,
    };
    Ok(SampleReport {
        name: name.to_string(),
        ap_c: ap(&sets[0]),
        ap_t: ap(&sets[1]),
        iou_e: wireframe_iou(pred, gt, params.stride, params.iou_threshold)?,
        silog,
        vp_err_deg,
        focal_rel_err,
        sets,
    })
}

/// Mean and median of a sample; `None` when empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Some(Summary {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

/// Aggregate over samples. Junction AP pools all samples; the other scores
/// are averaged per sample. SILog is averaged too because each lifted sample
/// carries its own depth scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    #[serde(rename = "ap_C")]
    pub ap_c: f64,
    #[serde(rename = "ap_T")]
    pub ap_t: f64,
    /// Pooled AP per threshold in [`AP_THRESHOLDS`] order, C then T.
    #[serde(rename = "ap_C_per_threshold")]
    pub ap_c_per_threshold: [f64; 3],
    #[serde(rename = "ap_T_per_threshold")]
    pub ap_t_per_threshold: [f64; 3],
    #[serde(rename = "iou_E")]
    pub iou_e: f64,
    /// Mean of the per-sample values.
    pub silog: Option<f64>,
    /// Summary of per-sample mean VP errors (degrees).
    pub vp_err_deg: Option<Summary>,
    /// Percentage of samples with a VP error above the failure angle.
    pub vp_failures_pct: Option<f64>,
    pub focal_rel_err: Option<Summary>,
    pub samples: Vec<SampleReport>,
}

pub fn aggregate(samples: Vec<SampleReport>) -> EvalReport {
    let sets_of = |t: usize| -> Vec<JunctionSet> { samples.iter().map(|s| s.sets[t].clone()).collect() };
    let (c, t) = (sets_of(0), sets_of(1));
    let per = |s: &[JunctionSet]| AP_THRESHOLDS.map(|th| junction_ap(s, th));
    let ap_c_per_threshold = per(&c);
    let ap_t_per_threshold = per(&t);
    let mean3 = |a: [f64; 3]| a.iter().sum::<f64>() / 3.0;
    let silogs: Vec<f64> = samples.iter().filter_map(|s| s.silog).collect();
    let vps: Vec<&VpErrors> = samples.iter().filter_map(|s| s.vp_err_deg.as_ref()).collect();
    let vp_means: Vec<f64> = vps.iter().map(|v| v.mean_deg).collect();
    let focal: Vec<f64> = samples.iter().filter_map(|s| s.focal_rel_err).collect();
    let iou = if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s.iou_e).sum::<f64>() / samples.len() as f64
    };
    EvalReport {
        count: samples.len(),
        ap_c: mean3(ap_c_per_threshold),
        ap_t: mean3(ap_t_per_threshold),
        ap_c_per_threshold,
        ap_t_per_threshold,
        iou_e: iou,
        silog: Summary::of(&silogs).map(|s| s.mean),
        vp_err_deg: Summary::of(&vp_means),
        vp_failures_pct: (!vps.is_empty())
            .then(|| 100.0 * vps.iter().filter(|v| v.failure).count() as f64 / vps.len() as f64),
        focal_rel_err: Summary::of(&focal),
        samples,
    }
}
