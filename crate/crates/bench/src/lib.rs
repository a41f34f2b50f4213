//! Fixtures shared by the criterion benches.

use clusterreg::pipeline::{self, PipelineConfig};
use clusterreg::synthetic::{generate, SyntheticSpec};
use clusterreg::{DesignMatrix, FeatureMatrix, Layout, Result};

/// Normalized clustering points and the training log design of a
/// default-sized synthetic panel.
pub struct Fixture {
    pub points: FeatureMatrix,
    pub design: DesignMatrix,
}

pub fn synthetic_fixture(seed: u64) -> Result<Fixture> {
    let data = generate(&SyntheticSpec::default_shape(seed))?;
    let dir = std::env::temp_dir().join(format!("clusterreg-bench-{}-{seed}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| clusterreg::Error::io(&dir, e))?;
    let path = dir.join("panel.csv");
    clusterreg::dataio::write_long(&data.panel, &path)?;
    let prepared = pipeline::prepare(&PipelineConfig::new(&path, Layout::Long));
    let _ = std::fs::remove_dir_all(&dir);
    let prepared = prepared?;
    Ok(Fixture {
        points: prepared.points,
        design: prepared.design.train,
    })
}
