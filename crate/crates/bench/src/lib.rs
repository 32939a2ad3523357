//! Shared fixtures for the benchmarks in `benches/`.

use wireframe3d::heatmap::HeatmapBundle;
use wireframe3d::synth::{GroundTruth, SceneParams};
use wireframe3d::vectorize::VectorizeParams;
use wireframe3d::{encode, generate, project_gt, vectorize, Wireframe};

pub struct Fixture {
    pub gt: GroundTruth,
    pub bundle: HeatmapBundle,
    pub wireframe: Wireframe,
}

/// One synthetic sample carried through encoding and vectorization.
pub fn fixture(seed: u64, grid: (usize, usize)) -> Fixture {
    let scene = generate(seed, grid, &SceneParams::default()).expect("scene");
    let gt = project_gt(&scene).expect("projection");
    let bundle = encode(&gt.wireframe, &gt.vps).expect("encoding");
    let wireframe = vectorize(&bundle, &VectorizeParams::default()).expect("vectorization");
    Fixture {
        gt,
        bundle,
        wireframe,
    }
}
