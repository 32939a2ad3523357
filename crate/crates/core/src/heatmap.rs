//! Stride-4 heatmap encoding of a wireframe and the `WFHM` tensor container.
//!
//! Heatmap cell `(x, y)` covers the image block `[4x, 4x+4) × [4y, 4y+4)`.
//! Distances for the line map are measured in cell units from cell centers.
//!
//! # WFHM layout
//!
//! All integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `WFHM` |
//! | 2     | `u16` version (1) |
//! | 2     | `u16` stride |
//! | 4     | `u32` image width W |
//! | 4     | `u32` image height H |
//! | 9·Hₛ·Wₛ·4 | `f32` planes, row-major: jmap C, jmap T, offset C x, offset C y, offset T x, offset T y, emap, jdepth C, jdepth T |
//! | 36    | `f32` 3×3 VP matrix, rows v1, v2, v3 |

use std::io::Write;
use std::path::Path;

use crate::camera::VanishingPoints;
use crate::error::{Error, Result};
use crate::geom;
use crate::wireframe::{JunctionType, Wireframe};

pub const STRIDE: u32 = 4;
pub const MAGIC: &[u8; 4] = b"WFHM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;
const PLANES: usize = 9;

/// A single-channel `f32` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, v: f32) -> Self {
        Self {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn transposed(&self) -> Plane {
        let mut out = Plane::zeros(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(y, x, self.get(x, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapBundle {
    pub image_size: (u32, u32),
    pub stride: u32,
    /// Junction probability per type (`[C, T]`).
    pub jmap: [Plane; 2],
    /// Sub-cell offset per type and axis: `offset[type][0]` is x, `[1]` is y.
    pub offset: [[Plane; 2]; 2],
    pub emap: Plane,
    /// Junction depth per type.
    pub jdepth: [Plane; 2],
    pub vps: VanishingPoints,
}

impl HeatmapBundle {
    pub fn zeros(image_size: (u32, u32), stride: u32, vps: VanishingPoints) -> Result<Self> {
        let (ws, hs) = grid_size(image_size, stride)?;
        let z = || Plane::zeros(ws, hs);
        Ok(Self {
            image_size,
            stride,
            jmap: [z(), z()],
            offset: [[z(), z()], [z(), z()]],
            emap: z(),
            jdepth: [z(), z()],
            vps,
        })
    }

    /// `(Wₛ, Hₛ)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.emap.width, self.emap.height)
    }

    fn planes(&self) -> [&Plane; PLANES] {
        [
            &self.jmap[0],
            &self.jmap[1],
            &self.offset[0][0],
            &self.offset[0][1],
            &self.offset[1][0],
            &self.offset[1][1],
            &self.emap,
            &self.jdepth[0],
            &self.jdepth[1],
        ]
    }

    fn planes_mut(&mut self) -> [&mut Plane; PLANES] {
        let [j0, j1] = &mut self.jmap;
        let [[o0x, o0y], [o1x, o1y]] = &mut self.offset;
        let [d0, d1] = &mut self.jdepth;
        [j0, j1, o0x, o0y, o1x, o1y, &mut self.emap, d0, d1]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (ws, hs) = self.grid();
        let mut out = Vec::with_capacity(HEADER_LEN + (PLANES * ws * hs + 9) * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.stride as u16).to_le_bytes());
        out.extend_from_slice(&self.image_size.0.to_le_bytes());
        out.extend_from_slice(&self.image_size.1.to_le_bytes());
        for p in self.planes() {
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for row in &self.vps.v {
            for &v in row {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedFile {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::MagicMismatch);
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::DimMismatch(format!("unsupported version {version}")));
        }
        let stride = u16_at(6) as u32;
        let (w, h) = (u32_at(8), u32_at(12));
        if stride == 0 || w % stride != 0 || h % stride != 0 {
            return Err(Error::DimMismatch(format!(
                "image {w}x{h} is not divisible by stride {stride}"
            )));
        }
        let (ws, hs) = ((w / stride) as usize, (h / stride) as usize);
        let expected = HEADER_LEN + (PLANES * ws * hs + 9) * 4;
        if bytes.len() != expected {
            return Err(Error::TruncatedFile {
                expected,
                actual: bytes.len(),
            });
        }
        let mut floats = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let mut vps = VanishingPoints { v: [[0.0; 3]; 3] };
        let mut bundle = HeatmapBundle::zeros((w, h), stride, vps)?;
        for p in bundle.planes_mut() {
            for v in p.data.iter_mut() {
                *v = floats.next().unwrap();
            }
        }
        for row in vps.v.iter_mut() {
            for v in row.iter_mut() {
                *v = floats.next().unwrap() as f64;
            }
        }
        bundle.vps = vps;
        Ok(bundle)
    }
}

fn grid_size(image_size: (u32, u32), stride: u32) -> Result<(usize, usize)> {
    let (w, h) = image_size;
    if stride == 0 || w % stride != 0 || h % stride != 0 {
        return Err(Error::Dimension {
            width: w,
            height: h,
            stride,
        });
    }
    Ok(((w / stride) as usize, (h / stride) as usize))
}

/// Largest `f32` strictly below 1.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Encodes a ground-truth wireframe into heatmaps at [`STRIDE`].
///
/// When two junctions of one type fall in the same cell, the one with the
/// smaller full-resolution y (then x) is kept.
pub fn encode(wf: &Wireframe, vps: &VanishingPoints) -> Result<HeatmapBundle> {
    let mut b = HeatmapBundle::zeros(wf.image_size, STRIDE, *vps)?;
    let (ws, hs) = b.grid();
    let s = STRIDE as f64;

    let mut order: Vec<usize> = (0..wf.vertices.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, c) = (&wf.vertices[i], &wf.vertices[j]);
        a.xy[1]
            .total_cmp(&c.xy[1])
            .then(a.xy[0].total_cmp(&c.xy[0]))
            .then(a.depth.unwrap_or(0.0).total_cmp(&c.depth.unwrap_or(0.0)))
    });
    for i in order {
        let v = &wf.vertices[i];
        let t = v.jtype.index();
        let (cx, cy) = ((v.xy[0] / s).floor(), (v.xy[1] / s).floor());
        if cx < 0.0 || cy < 0.0 || cx >= ws as f64 || cy >= hs as f64 {
            continue;
        }
        let (x, y) = (cx as usize, cy as usize);
        if b.jmap[t].get(x, y) == 1.0 {
            continue;
        }
        b.jmap[t].set(x, y, 1.0);
        let off = |v: f64, c: f64| ((v / s - c) as f32).clamp(0.0, BELOW_ONE);
        b.offset[t][0].set(x, y, off(v.xy[0], cx));
        b.offset[t][1].set(x, y, off(v.xy[1], cy));
        b.jdepth[t].set(x, y, v.depth.unwrap_or(0.0) as f32);
    }

    b.emap = render_edge_map(wf, STRIDE)?;
    Ok(b)
}

/// `Ê(p) = max_e (1 − dist(p, e))` over lines within one cell, else 0.
pub fn render_edge_map(wf: &Wireframe, stride: u32) -> Result<Plane> {
    let (ws, hs) = grid_size(wf.image_size, stride)?;
    let s = stride as f64;
    let mut e = Plane::zeros(ws, hs);
    for &[i, j] in &wf.edges {
        let a = wf.vertices[i].xy.map(|c| c / s);
        let b = wf.vertices[j].xy.map(|c| c / s);
        let lo = |k: usize, n: usize| ((a[k].min(b[k]) - 1.5).floor().max(0.0) as usize).min(n);
        let hi = |k: usize, n: usize| ((a[k].max(b[k]) + 1.5).ceil().max(0.0) as usize).min(n);
        for y in lo(1, hs)..hi(1, hs) {
            for x in lo(0, ws)..hi(0, ws) {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                let d = geom::segment_distance(c, a, b);
                if d < 1.0 {
                    let v = (1.0 - d) as f32;
                    if v > e.get(x, y) {
                        e.set(x, y, v);
                    }
                }
            }
        }
    }
    Ok(e)
}

/// Decoded junction position `stride · (p + O(p))` in full-resolution pixels.
pub fn decode_position(b: &HeatmapBundle, t: JunctionType, x: usize, y: usize) -> [f64; 2] {
    let s = b.stride as f64;
    let o = &b.offset[t.index()];
    [
        s * (x as f64 + o[0].get(x, y) as f64),
        s * (y as f64 + o[1].get(x, y) as f64),
    ]
}

pub fn write_tensor(bundle: &HeatmapBundle, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bundle.to_bytes())?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<HeatmapBundle> {
    HeatmapBundle::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::normalize_vp;
    use crate::wireframe::Vertex;

    fn vps() -> VanishingPoints {
        VanishingPoints::from_normalized([
            normalize_vp(-900.0, 200.0),
            normalize_vp(1300.0, 210.0),
            normalize_vp(260.0, 4000.0),
        ])
    }

    #[test]
    fn junction_cell_and_offset() {
        let mut wf = Wireframe::new((64, 64));
        wf.add_vertex(Vertex::new([10.0, 6.0], JunctionType::C, Some(3.0)));
        wf.add_vertex(Vertex::new([8.0, 8.0], JunctionType::T, Some(4.0)));
        let b = encode(&wf, &vps()).unwrap();
        assert_eq!(b.jmap[0].get(2, 1), 1.0);
        assert_eq!(b.offset[0][0].get(2, 1), 0.5);
        assert_eq!(b.offset[0][1].get(2, 1), 0.5);
        assert_eq!(b.jdepth[0].get(2, 1), 3.0);
        assert_eq!(b.jmap[1].get(2, 2), 1.0);
        assert_eq!(b.offset[1][0].get(2, 2), 0.0);
        assert_eq!(b.offset[1][1].get(2, 2), 0.0);
        assert_eq!(b.jmap[0].data.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn horizontal_line_through_cell_centers() {
        let mut wf = Wireframe::new((64, 64));
        // y = 4 * 3.5 lies on the centers of heatmap row 3; x spans cells 0.5..7.5
        let a = wf.add_vertex(Vertex::new([2.0, 14.0], JunctionType::C, Some(1.0)));
        let b = wf.add_vertex(Vertex::new([30.0, 14.0], JunctionType::C, Some(1.0)));
        wf.add_edge(a, b);
        let e = encode(&wf, &vps()).unwrap().emap;
        for x in 0..8 {
            assert_eq!(e.get(x, 3), 1.0);
            assert_eq!(e.get(x, 2), 0.0);
            assert_eq!(e.get(x, 4), 0.0);
        }
        // distance exactly one cell, then beyond
        assert_eq!(e.get(8, 3), 0.0);
        assert_eq!(e.get(9, 3), 0.0);
        assert_eq!(e.data.iter().filter(|&&v| v != 0.0).count(), 8);
    }

    #[test]
    fn collision_keeps_smaller_y() {
        let mut wf = Wireframe::new((64, 64));
        wf.add_vertex(Vertex::new([5.0, 7.5], JunctionType::C, Some(2.0)));
        wf.add_vertex(Vertex::new([6.5, 5.0], JunctionType::C, Some(9.0)));
        let b = encode(&wf, &vps()).unwrap();
        assert_eq!(b.jdepth[0].get(1, 1), 9.0);
        wf.vertices.reverse();
        assert_eq!(encode(&wf, &vps()).unwrap(), b);
    }

    #[test]
    fn dimension_error() {
        let wf = Wireframe::new((510, 512));
        assert!(matches!(encode(&wf, &vps()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn tensor_errors() {
        let mut wf = Wireframe::new((32, 16));
        wf.add_vertex(Vertex::new([10.0, 6.0], JunctionType::C, Some(3.0)));
        let bytes = encode(&wf, &vps()).unwrap().to_bytes();
        let back = HeatmapBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            HeatmapBundle::from_bytes(&bad),
            Err(Error::MagicMismatch)
        ));

        let mut bad = bytes.clone();
        bad[8..12].copy_from_slice(&30u32.to_le_bytes());
        assert!(matches!(
            HeatmapBundle::from_bytes(&bad),
            Err(Error::DimMismatch(_))
        ));

        let mut bad = bytes.clone();
        bad[8..12].copy_from_slice(&64u32.to_le_bytes());
        assert!(matches!(
            HeatmapBundle::from_bytes(&bad),
            Err(Error::TruncatedFile { .. })
        ));
        assert!(matches!(
            HeatmapBundle::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedFile { .. })
        ));
    }
}
