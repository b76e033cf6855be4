//! Hyperparameter grids. Defaults are the grids the benchmark was designed
//! around; VCNet reuses the DRNet grid without strata.

use serde::{Deserialize, Serialize};

use super::EstimatorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGrid {
    pub trees: Vec<usize>,
    /// Maximal tree depth; `0` means unlimited.
    pub max_depth: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            trees: vec![100, 500],
            max_depth: vec![0, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetGrid {
    pub hidden_layers: Vec<usize>,
    pub width: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub steps: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for NetGrid {
    fn default() -> Self {
        Self {
            hidden_layers: vec![2],
            width: vec![32, 48],
            batch_size: vec![64, 128],
            steps: vec![1000, 2000],
            learning_rate: vec![0.01, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrNetGrid {
    pub strata: Vec<usize>,
    pub representation_layers: Vec<usize>,
    pub inference_layers: Vec<usize>,
    pub width: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub steps: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for DrNetGrid {
    fn default() -> Self {
        let net = NetGrid::default();
        Self {
            strata: vec![10],
            representation_layers: vec![2],
            inference_layers: vec![2],
            width: net.width,
            batch_size: net.batch_size,
            steps: net.steps,
            learning_rate: net.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VcNetGrid {
    pub body_layers: Vec<usize>,
    pub width: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub steps: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for VcNetGrid {
    fn default() -> Self {
        let dr = DrNetGrid::default();
        Self {
            body_layers: dr.representation_layers,
            width: dr.width,
            batch_size: dr.batch_size,
            steps: dr.steps,
            learning_rate: dr.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub forest: ForestGrid,
    pub mlp: NetGrid,
    pub drnet: DrNetGrid,
    pub vcnet: VcNetGrid,
}

impl Grids {
    /// One cheap configuration per method, for smoke tests and examples.
    pub fn smoke() -> Self {
        Self {
            forest: ForestGrid {
                trees: vec![20],
                max_depth: vec![8],
            },
            mlp: NetGrid {
                hidden_layers: vec![2],
                width: vec![16],
                batch_size: vec![32],
                steps: vec![200],
                learning_rate: vec![0.01],
            },
            drnet: DrNetGrid {
                strata: vec![5],
                representation_layers: vec![2],
                inference_layers: vec![2],
                width: vec![16],
                batch_size: vec![32],
                steps: vec![200],
                learning_rate: vec![0.01],
            },
            vcnet: VcNetGrid {
                body_layers: vec![2],
                width: vec![16],
                batch_size: vec![32],
                steps: vec![200],
                learning_rate: vec![0.01],
            },
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(EstimatorError::Configuration(format!("grid `{name}` is empty")))
            } else {
                Ok(())
            }
        };
        nonempty("forest.trees", self.forest.trees.len())?;
        nonempty("forest.max_depth", self.forest.max_depth.len())?;
        nonempty("mlp.width", self.mlp.width.len())?;
        nonempty("mlp.hidden_layers", self.mlp.hidden_layers.len())?;
        nonempty("drnet.strata", self.drnet.strata.len())?;
        nonempty("vcnet.width", self.vcnet.width.len())?;
        if self.forest.trees.contains(&0) {
            return Err(EstimatorError::Configuration("a forest needs at least one tree".into()));
        }
        if self.drnet.strata.iter().any(|&s| s < 1) {
            return Err(EstimatorError::Configuration("DRNet needs at least one stratum".into()));
        }
        Ok(())
    }
}

/// Cartesian product helper used by the network grids.
pub(crate) fn product4<A: Copy, B: Copy, C: Copy, D: Copy>(
    a: &[A],
    b: &[B],
    c: &[C],
    d: &[D],
) -> Vec<(A, B, C, D)> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * d.len());
    for &x in a {
        for &y in b {
            for &z in c {
                for &w in d {
                    out.push((x, y, z, w));
                }
            }
        }
    }
    out
}
