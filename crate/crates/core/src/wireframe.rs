//! Junction/line graph shared by every pipeline stage.
//!
//! One type covers 2D, 2.5D and 3D wireframes: depths are optional per
//! vertex, and a wireframe with every depth present plus an attached camera
//! is a full 3D reconstruction.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraModel, VanishingPoints};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JunctionType {
    /// Corner: an actual intersection of physical edges (image-border clips included).
    C,
    /// Occlusion junction where a background line disappears behind a foreground one.
    T,
}

impl JunctionType {
    pub const ALL: [JunctionType; 2] = [JunctionType::C, JunctionType::T];

    pub fn index(self) -> usize {
        match self {
            JunctionType::C => 0,
            JunctionType::T => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub xy: [f64; 2],
    #[serde(rename = "type")]
    pub jtype: JunctionType,
    /// Camera-space z in relative units. For a T-junction this is the depth of
    /// the occluded background line at the junction.
    pub depth: Option<f64>,
    /// Detection confidence, present on predicted wireframes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Vertex {
    pub fn new(xy: [f64; 2], jtype: JunctionType, depth: Option<f64>) -> Self {
        Self {
            xy,
            jtype,
            depth,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wireframe {
    pub image_size: (u32, u32),
    pub vertices: Vec<Vertex>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vps: Option<VanishingPoints>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    VertexOutOfImage,
    NonPositiveDepth,
    SelfLoop,
    DuplicateEdge,
    EdgeIndex,
    TDegree,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::VertexOutOfImage => "vertex-out-of-image",
            Rule::NonPositiveDepth => "non-positive-depth",
            Rule::SelfLoop => "self-loop",
            Rule::DuplicateEdge => "duplicate-edge",
            Rule::EdgeIndex => "edge-index",
            Rule::TDegree => "T-degree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Offending vertex indices (or edge endpoints).
    pub indices: Vec<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.rule.name(), self.indices)
    }
}

impl Wireframe {
    pub fn new(image_size: (u32, u32)) -> Self {
        Self {
            image_size,
            vertices: Vec::new(),
            edges: Vec::new(),
            camera: None,
            vps: None,
        }
    }

    pub fn add_vertex(&mut self, v: Vertex) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.edges.push([a.min(b), a.max(b)]);
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &[a, b] in &self.edges {
            if a < deg.len() {
                deg[a] += 1;
            }
            if b < deg.len() && b != a {
                deg[b] += 1;
            }
        }
        deg
    }

    pub fn edge_length(&self, e: [usize; 2]) -> f64 {
        let a = self.vertices[e[0]].xy;
        let b = self.vertices[e[1]].xy;
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn count(&self, t: JunctionType) -> usize {
        self.vertices.iter().filter(|v| v.jtype == t).count()
    }

    pub fn has_all_depths(&self) -> bool {
        self.vertices.iter().all(|v| v.depth.is_some())
    }

    /// Camera-space 3D positions, when a camera and every depth are present.
    pub fn points3d(&self) -> Option<Vec<Vector3<f64>>> {
        let cam = self.camera.as_ref()?;
        self.vertices
            .iter()
            .map(|v| v.depth.map(|z| cam.back_project(v.xy, z)))
            .collect()
    }

    /// Edges as ordered `(min, max)` pairs, sorted lexicographically.
    pub fn canonicalize(&mut self) {
        for e in &mut self.edges {
            if e[0] > e[1] {
                e.swap(0, 1);
            }
        }
        self.edges.sort_unstable();
    }

    pub fn to_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.canonicalize();
        let mut s = serde_json::to_string_pretty(&c)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Lists every broken structural rule; an empty result means the wireframe is valid.
pub fn validate(wf: &Wireframe) -> Vec<Violation> {
    let mut out = Vec::new();
    let (w, h) = (wf.image_size.0 as f64, wf.image_size.1 as f64);
    let n = wf.vertices.len();

    for (i, v) in wf.vertices.iter().enumerate() {
        let [x, y] = v.xy;
        if !(x >= 0.0 && x < w && y >= 0.0 && y < h) {
            out.push(Violation {
                rule: Rule::VertexOutOfImage,
                indices: vec![i],
            });
        }
        if let Some(z) = v.depth {
            if !(z > 0.0) {
                out.push(Violation {
                    rule: Rule::NonPositiveDepth,
                    indices: vec![i],
                });
            }
        }
    }

    let mut seen = HashSet::new();
    for &[a, b] in &wf.edges {
        if a >= n || b >= n {
            out.push(Violation {
                rule: Rule::EdgeIndex,
                indices: vec![a, b],
            });
            continue;
        }
        if a == b {
            out.push(Violation {
                rule: Rule::SelfLoop,
                indices: vec![a, b],
            });
            continue;
        }
        if !seen.insert((a.min(b), a.max(b))) {
            out.push(Violation {
                rule: Rule::DuplicateEdge,
                indices: vec![a, b],
            });
        }
    }

    let deg = wf.degrees();
    for (i, v) in wf.vertices.iter().enumerate() {
        if v.jtype == JunctionType::T && deg[i] != 1 {
            out.push(Violation {
                rule: Rule::TDegree,
                indices: vec![i],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Vertex {
        Vertex::new([x, y], JunctionType::C, Some(2.0))
    }

    #[test]
    fn single_vertex_is_valid() {
        let mut wf = Wireframe::new((64, 64));
        wf.add_vertex(c(1.0, 1.0));
        assert!(validate(&wf).is_empty());
    }

    #[test]
    fn t_with_degree_two() {
        let mut wf = Wireframe::new((64, 64));
        let a = wf.add_vertex(c(1.0, 1.0));
        let b = wf.add_vertex(c(20.0, 1.0));
        let t = wf.add_vertex(Vertex::new([10.0, 10.0], JunctionType::T, Some(3.0)));
        wf.add_edge(a, t);
        wf.add_edge(t, b);
        let v = validate(&wf);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule.name(), "T-degree");
        assert_eq!(v[0].indices, vec![t]);
    }

    #[test]
    fn self_loop() {
        let mut wf = Wireframe::new((64, 64));
        for i in 0..4 {
            wf.add_vertex(c(i as f64, 0.0));
        }
        wf.edges.push([3, 3]);
        let v = validate(&wf);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule.name(), "self-loop");
    }

    #[test]
    fn duplicates_bounds_and_depth() {
        let mut wf = Wireframe::new((64, 64));
        let a = wf.add_vertex(c(1.0, 1.0));
        let b = wf.add_vertex(Vertex::new([64.0, 3.0], JunctionType::C, Some(-1.0)));
        wf.add_edge(a, b);
        wf.edges.push([b, a]);
        wf.edges.push([a, 9]);
        let rules: Vec<_> = validate(&wf).iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::VertexOutOfImage));
        assert!(rules.contains(&Rule::NonPositiveDepth));
        assert!(rules.contains(&Rule::DuplicateEdge));
        assert!(rules.contains(&Rule::EdgeIndex));
    }

    #[test]
    fn json_schema_shape() {
        let mut wf = Wireframe::new((512, 256));
        let a = wf.add_vertex(c(1.5, 2.0));
        let b = wf.add_vertex(Vertex::new([5.0, 6.0], JunctionType::T, None));
        wf.edges.push([b, a]);
        let s = wf.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["image_size"], serde_json::json!([512, 256]));
        assert_eq!(v["vertices"][1]["type"], "T");
        assert!(v["vertices"][1]["depth"].is_null());
        assert_eq!(v["edges"], serde_json::json!([[0, 1]]));
        assert!(v.get("camera").is_none());
        let back = Wireframe::from_json(&s).unwrap();
        assert_eq!(back.edges, vec![[0, 1]]);
        assert_eq!(back.to_json().unwrap(), s);
    }
}
