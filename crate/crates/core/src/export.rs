//! Text exports of a 3D wireframe: Wavefront OBJ and an SVG line drawing.

use std::fmt::Write;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wireframe::{JunctionType, Wireframe};

fn points(wf: &Wireframe) -> Result<Vec<Vector3<f64>>> {
    wf.points3d()
        .ok_or_else(|| Error::InvalidWireframe("3D export needs a camera and a depth on every vertex".into()))
}

/// OBJ text with one `v` line per vertex (camera frame) and one `l` record
/// per edge (1-based indices).
pub fn to_obj(wf: &Wireframe) -> Result<String> {
    let pts = points(wf)?;
    let mut s = String::from("# wireframe: camera frame, x right, y down, z forward\n");
    for p in &pts {
        writeln!(s, "v {:.9} {:.9} {:.9}", p.x, p.y, p.z).unwrap();
    }
    let mut edges = wf.edges.clone();
    for e in &mut edges {
        e.sort_unstable();
    }
    edges.sort_unstable();
    for [a, b] in edges {
        writeln!(s, "l {} {}", a + 1, b + 1).unwrap();
    }
    Ok(s)
}

/// Viewpoint for [`to_svg`]: an orthographic camera orbiting the wireframe's
/// centroid. Azimuth turns about the camera's vertical axis, elevation tilts
/// the view downward; `(0, 0)` reproduces the input camera's orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvgView {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Output width and height in SVG units.
    pub size: u32,
    pub margin: f64,
    pub stroke_width: f64,
}

impl Default for SvgView {
    fn default() -> Self {
        Self {
            azimuth_deg: 30.0,
            elevation_deg: 20.0,
            size: 512,
            margin: 16.0,
            stroke_width: 1.5,
        }
    }
}

/// Orthographic SVG drawing of the lifted wireframe from `view`. C-junctions
/// are drawn as filled dots, T-junctions as open circles.
pub fn to_svg(wf: &Wireframe, view: &SvgView) -> Result<String> {
    if view.size == 0 || !(view.margin >= 0.0) || 2.0 * view.margin >= view.size as f64 {
        return Err(Error::InvalidParams(
            "svg size must exceed twice the margin".into(),
        ));
    }
    let pts = points(wf)?;
    let n = pts.len().max(1) as f64;
    let center = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), -view.elevation_deg.to_radians())
        * Rotation3::from_axis_angle(&Vector3::y_axis(), view.azimuth_deg.to_radians());
    let flat: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| {
            let q = rot * (p - center);
            [q.x, q.y]
        })
        .collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &flat {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let size = view.size as f64;
    let scale = if span > 0.0 {
        (size - 2.0 * view.margin) / span
    } else {
        1.0
    };
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let to_px = |p: [f64; 2]| {
        [
            size / 2.0 + (p[0] - mid[0]) * scale,
            size / 2.0 + (p[1] - mid[1]) * scale,
        ]
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        view.size
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<g stroke="black" stroke-width="{}" stroke-linecap="round">"#,
        view.stroke_width
    )
    .unwrap();
    for &[a, b] in &wf.edges {
        let (p, q) = (to_px(flat[a]), to_px(flat[b]));
        writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            p[0], p[1], q[0], q[1]
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    let r = 2.0 * view.stroke_width;
    for (v, p) in wf.vertices.iter().zip(&flat) {
        let p = to_px(*p);
        let style = match v.jtype {
            JunctionType::C => r#"fill="crimson""#,
            JunctionType::T => r#"fill="white" stroke="royalblue""#,
        };
        writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{r}" {style}/>"#,
            p[0], p[1]
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}
