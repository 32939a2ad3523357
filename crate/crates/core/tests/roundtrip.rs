use wireframe3d::lift::LiftParams;
use wireframe3d::{
    encode, evaluate_sample, generate, lift, project_gt, read_tensor, validate, vectorize, write_tensor,
    EvalParams, SceneParams, VectorizeParams, Wireframe,
};

#[test]
fn heatmaps_survive_the_file_format() {
    let gt = project_gt(&generate(3, (2, 2), &SceneParams::default()).unwrap()).unwrap();
    let bundle = encode(&gt.wireframe, &gt.vps).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.wfhm");
    write_tensor(&bundle, &path).unwrap();
    let back = read_tensor(&path).unwrap();
    assert_eq!(back.to_bytes(), bundle.to_bytes());
}

#[test]
fn vectorized_scores_survive_json() {
    let gt = project_gt(&generate(1, (2, 2), &SceneParams::default()).unwrap()).unwrap();
    let wf = vectorize(
        &encode(&gt.wireframe, &gt.vps).unwrap(),
        &VectorizeParams::default(),
    )
    .unwrap();
    assert!(wf.vertices.iter().all(|v| v.score.is_some()));
    let back = Wireframe::from_json(&wf.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), wf.to_json().unwrap());
    // ground truth carries no scores and writes none
    assert!(!gt.wireframe.to_json().unwrap().contains("\"score\""));
}

#[test]
fn encode_vectorize_lift_recovers_ground_truth() {
    for seed in 0..5 {
        let gt = project_gt(&generate(seed, (2, 2), &SceneParams::default()).unwrap()).unwrap();
        let bundle = encode(&gt.wireframe, &gt.vps).unwrap();
        let wf = vectorize(&bundle, &VectorizeParams::default()).unwrap();
        let lifted = lift(&wf, &bundle.vps, None, &LiftParams::default()).unwrap();
        assert!(validate(&lifted.wireframe).is_empty(), "seed {seed}");
        let r = evaluate_sample("s", &lifted.wireframe, &gt.wireframe, &EvalParams::default()).unwrap();
        assert!((r.ap_c - 1.0).abs() < 1e-12, "seed {seed}: {}", r.ap_c);
        assert!((r.ap_t - 1.0).abs() < 1e-12, "seed {seed}: {}", r.ap_t);
        assert!(r.silog.unwrap() < 1e-8, "seed {seed}: {:?}", r.silog);
        assert!(r.vp_err_deg.as_ref().unwrap().mean_deg < 1e-6, "seed {seed}");
    }
}
