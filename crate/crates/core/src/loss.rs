//! Reference implementations of the training losses.
//!
//! These are plain `f64` evaluations over [`HeatmapBundle`]s. Predicted
//! probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` before taking logs
//! so binary ground-truth maps can be fed back as predictions.

use serde::{Deserialize, Serialize};

use crate::camera::VanishingPoints;
use crate::error::{Error, Result};
use crate::heatmap::{HeatmapBundle, Plane};

pub const PROB_EPS: f64 = 1e-7;

/// Binary cross entropy with a soft target `q`.
pub fn cross_entropy(p: f64, q: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(q * p.ln() + (1.0 - q) * (1.0 - p).ln())
}

fn check_shape(a: &Plane, b: &Plane, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

/// `(1/n) Σ_t Σ_p CE(J_t(p), Ĵ_t(p))` with `n` the cell count of one map.
pub fn loss_junction(pred: &[Plane; 2], gt: &[Plane; 2]) -> Result<f64> {
    let n = gt[0].data.len() as f64;
    let mut sum = 0.0;
    for t in 0..2 {
        check_shape(&pred[t], &gt[t], "junction map")?;
        sum += pred[t]
            .data
            .iter()
            .zip(&gt[t].data)
            .map(|(&p, &q)| cross_entropy(p as f64, q as f64))
            .sum::<f64>();
    }
    Ok(sum / n)
}

/// Offset error masked by the ground-truth junction map and normalized by
/// the junction count of each type. A type with no junctions contributes 0.
pub fn loss_offset(pred: &[[Plane; 2]; 2], gt: &[[Plane; 2]; 2], gt_jmap: &[Plane; 2]) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..2 {
        for a in 0..2 {
            check_shape(&pred[t][a], &gt[t][a], "offset map")?;
        }
        check_shape(&gt_jmap[t], &gt[t][0], "junction mask")?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &m) in gt_jmap[t].data.iter().enumerate() {
            let m = m as f64;
            if m == 0.0 {
                continue;
            }
            let dx = pred[t][0].data[i] as f64 - gt[t][0].data[i] as f64;
            let dy = pred[t][1].data[i] as f64 - gt[t][1].data[i] as f64;
            num += m * (dx * dx + dy * dy);
            den += m;
        }
        if den > 0.0 {
            total += num / den;
        }
    }
    Ok(total)
}

/// `(1/n) Σ_p CE(E(p), Ê(p))` with soft targets.
pub fn loss_edge(pred: &Plane, gt: &Plane) -> Result<f64> {
    check_shape(pred, gt, "edge map")?;
    let n = gt.data.len() as f64;
    Ok(pred
        .data
        .iter()
        .zip(&gt.data)
        .map(|(&p, &q)| cross_entropy(p as f64, q as f64))
        .sum::<f64>()
        / n)
}

/// Scale-invariant log error of one pooled set of depth pairs.
pub fn silog(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len() as f64;
    if pred.is_empty() {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&p, &g) in pred.iter().zip(gt) {
        let r = p.ln() - g.ln();
        s1 += r * r;
        s2 += r;
    }
    (s1 / n - (s2 * s2) / (n * n)).max(0.0)
}

/// Per-type SILog over the cells where the ground-truth junction map is set,
/// summed over types.
pub fn loss_silog(pred: &[Plane; 2], gt: &[Plane; 2], mask: &[Plane; 2]) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..2 {
        check_shape(&pred[t], &gt[t], "depth map")?;
        check_shape(&mask[t], &gt[t], "depth mask")?;
        let mut p = Vec::new();
        let mut g = Vec::new();
        for (i, &m) in mask[t].data.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (d, dg) = (pred[t].data[i] as f64, gt[t].data[i] as f64);
            if !(d > 0.0 && dg > 0.0) {
                return Err(Error::NonPositiveDepth(i));
            }
            p.push(d);
            g.push(dg);
        }
        total += silog(&p, &g);
    }
    Ok(total)
}

/// Chamfer ℓ2 over the unordered horizontal pair plus squared ℓ2 on the
/// vertical point.
pub fn loss_vp(pred: &VanishingPoints, gt: &VanishingPoints) -> f64 {
    let d = |a: usize, b: usize| (pred.get(a) - gt.get(b)).norm();
    d(0, 0).min(d(1, 0)) + d(0, 1).min(d(1, 1)) + (pred.get(2) - gt.get(2)).norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub junction: f64,
    pub offset: f64,
    pub edge: f64,
    pub depth: f64,
    /// Weight of the VP term, 1.0 by default.
    pub vp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            junction: 2.0,
            offset: 0.25,
            edge: 3.0,
            depth: 0.1,
            vp: 1.0,
        }
    }
}

impl LossWeights {
    pub fn is_valid(&self) -> bool {
        [self.junction, self.offset, self.edge, self.depth, self.vp]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub junction: f64,
    pub offset: f64,
    pub edge: f64,
    pub depth: f64,
    pub vp: f64,
    pub total: f64,
}

/// Every loss term plus the weighted total.
pub fn loss_total(pred: &HeatmapBundle, gt: &HeatmapBundle, w: &LossWeights) -> Result<LossReport> {
    if !w.is_valid() {
        return Err(Error::InvalidParams(
            "loss weights must be finite and >= 0".into(),
        ));
    }
    let junction = loss_junction(&pred.jmap, &gt.jmap)?;
    let offset = loss_offset(&pred.offset, &gt.offset, &gt.jmap)?;
    let edge = loss_edge(&pred.emap, &gt.emap)?;
    let depth = loss_silog(&pred.jdepth, &gt.jdepth, &gt.jmap)?;
    let vp = loss_vp(&pred.vps, &gt.vps);
    let total = w.junction * junction + w.offset * offset + w.edge * edge + w.depth * depth + w.vp * vp;
    Ok(LossReport {
        junction,
        offset,
        edge,
        depth,
        vp,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::normalize_vp;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn plane(w: usize, h: usize, v: &[f32]) -> Plane {
        Plane {
            width: w,
            height: h,
            data: v.to_vec(),
        }
    }

    #[test]
    fn junction_uniform_predictor() {
        let pred = [Plane::filled(3, 2, 0.5), Plane::filled(3, 2, 0.5)];
        let gt = [plane(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), Plane::zeros(3, 2)];
        // two maps, each averaging ln 2 per cell, normalized by one map's cell count
        assert_relative_eq!(
            loss_junction(&pred, &gt).unwrap(),
            2.0 * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn junction_single_cell_hand_value() {
        let pred = [plane(2, 2, &[0.9, 0.1, 0.1, 0.1]), Plane::filled(2, 2, 0.1)];
        let gt = [plane(2, 2, &[1.0, 0.0, 0.0, 0.0]), Plane::zeros(2, 2)];
        let p9 = 0.9f32 as f64;
        let p1 = 0.1f32 as f64;
        let expect = (-(p9.ln()) - 7.0 * (1.0 - p1).ln()) / 4.0;
        assert_relative_eq!(loss_junction(&pred, &gt).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn junction_near_perfect() {
        let eps = 1e-6f32;
        let gt = [plane(2, 1, &[1.0, 0.0]), plane(2, 1, &[0.0, 0.0])];
        let pred = [plane(2, 1, &[1.0 - eps, eps]), plane(2, 1, &[eps, eps])];
        assert!(loss_junction(&pred, &gt).unwrap() < 1e-5);
    }

    #[test]
    fn offset_examples() {
        let mask = [plane(2, 1, &[1.0, 0.0]), Plane::zeros(2, 1)];
        let gt = [
            [plane(2, 1, &[0.2, 0.0]), plane(2, 1, &[0.5, 0.0])],
            [Plane::zeros(2, 1), Plane::zeros(2, 1)],
        ];
        assert_eq!(loss_offset(&gt, &gt, &mask).unwrap(), 0.0);
        let mut pred = gt.clone();
        pred[0][0].data[0] = (0.2f64 + 0.3) as f32;
        pred[0][1].data[0] = (0.5f64 + 0.4) as f32;
        assert_relative_eq!(loss_offset(&pred, &gt, &mask).unwrap(), 0.25, epsilon = 1e-6);
        // errors outside the mask are ignored
        let mut pred = gt.clone();
        pred[0][0].data[1] = 0.9;
        pred[1][1].data[0] = 0.9;
        assert_eq!(loss_offset(&pred, &gt, &mask).unwrap(), 0.0);
    }

    #[test]
    fn edge_examples() {
        let half = Plane::filled(4, 4, 0.5);
        assert_relative_eq!(
            loss_edge(&half, &half).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        let gt = plane(1, 1, &[0.3]);
        let a = loss_edge(&plane(1, 1, &[0.3]), &gt).unwrap();
        let b = loss_edge(&plane(1, 1, &[0.7]), &gt).unwrap();
        assert!(a < b);
        let bin = plane(2, 1, &[1.0, 0.0]);
        assert!(loss_edge(&plane(2, 1, &[0.999999, 0.000001]), &bin).unwrap() < 1e-5);
        assert!(matches!(
            loss_edge(&half, &Plane::zeros(2, 2)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn silog_examples() {
        let gt = [1.0, 2.0, 5.0];
        assert_eq!(silog(&gt, &gt), 0.0);
        let scaled: Vec<f64> = gt.iter().map(|d| d * 3.7).collect();
        assert!(silog(&scaled, &gt) < 1e-15);
        // log errors {0, ln 2}
        let v = silog(&[1.0, 2.0], &[1.0, 1.0]);
        let l2 = std::f64::consts::LN_2;
        assert_relative_eq!(v, l2 * l2 / 4.0, epsilon = 1e-15);
        assert_relative_eq!(v, 0.1201, epsilon = 1e-4);
    }

    #[test]
    fn silog_rejects_nonpositive() {
        let mask = [plane(2, 1, &[1.0, 0.0]), Plane::zeros(2, 1)];
        let gt = [plane(2, 1, &[2.0, 0.0]), Plane::zeros(2, 1)];
        let pred = [plane(2, 1, &[0.0, 0.0]), Plane::zeros(2, 1)];
        assert!(matches!(
            loss_silog(&pred, &gt, &mask),
            Err(Error::NonPositiveDepth(0))
        ));
    }

    #[test]
    fn vp_examples() {
        let gt = VanishingPoints::from_normalized([
            normalize_vp(-3.0, 0.2),
            normalize_vp(2.0, 0.1),
            normalize_vp(0.0, 8.0),
        ]);
        assert_eq!(loss_vp(&gt, &gt), 0.0);
        assert_eq!(loss_vp(&gt.swapped_horizontal(), &gt), 0.0);

        // both gt horizontals sit 0.1 from both predicted horizontals
        let c = Vector3::new(0.2, 0.1, 0.4);
        let pred = VanishingPoints::from_normalized([
            c + Vector3::new(0.1, 0.0, 0.0),
            c - Vector3::new(0.1, 0.0, 0.0),
            gt.get(2),
        ]);
        let target = VanishingPoints::from_normalized([c, c, gt.get(2)]);
        assert_relative_eq!(loss_vp(&pred, &target), 0.2, epsilon = 1e-15);
        assert_eq!(
            loss_vp(&pred.swapped_horizontal(), &target),
            loss_vp(&pred, &target)
        );
    }
}
