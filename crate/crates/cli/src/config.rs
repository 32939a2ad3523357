use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use wireframe3d::lift::LiftParams;
use wireframe3d::loss::LossWeights;
use wireframe3d::{EvalParams, SceneParams, VectorizeParams};

/// Every tunable of the pipeline in one document. All keys are optional and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Block grid of generated scenes (rows, columns).
    pub grid: (usize, usize),
    pub scene: SceneParams,
    pub vectorize: VectorizeParams,
    pub lift: LiftParams,
    pub eval: EvalParams,
    pub loss: LossWeights,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: (2, 2),
            scene: SceneParams::default(),
            vectorize: VectorizeParams::default(),
            lift: LiftParams::default(),
            eval: EvalParams::default(),
            loss: LossWeights::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got {s:?}"))?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row count {r:?}"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column count {c:?}"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be >= 1".into());
    }
    Ok((r, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let mut c = PipelineConfig {
            grid: (1, 3),
            ..Default::default()
        };
        c.lift.lambda_r = 0.25;
        let s = c.to_canonical_json();
        let back: PipelineConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical_json(), s);
    }

    #[test]
    fn partial_documents_and_unknown_keys() {
        let c: PipelineConfig = serde_json::from_str(r#"{"vectorize": {"theta_e": 0.5}}"#).unwrap();
        assert_eq!(c.vectorize.theta_e, 0.5);
        assert_eq!(c.vectorize.theta_c, VectorizeParams::default().theta_c);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"vectorise": {}}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"lift": {"lambda": 1}}"#).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("2x3"), Ok((2, 3)));
        assert!(parse_grid("0x3").is_err());
        assert!(parse_grid("23").is_err());
    }
}
