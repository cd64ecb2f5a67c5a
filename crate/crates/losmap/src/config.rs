//! Pipeline configuration: a flat `key = value` text file covering the
//! meshing, field, reconstruction, and metric parameters. Unknown keys are
//! an error so typos cannot silently fall back to defaults.

use std::path::Path;

use crate::field::FieldParams;
use crate::mesh::GhprParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub ghpr: GhprParams,
    pub field: FieldParams,
    /// TSDF truncation τ; defaults to 1.5·l_vox when not set explicitly.
    pub tsdf_truncation: f64,
    /// Distance threshold τ_m for precision/recall cloud metrics.
    pub metric_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let field = FieldParams::default();
        PipelineConfig {
            ghpr: GhprParams::default(),
            field,
            tsdf_truncation: 1.5 * field.l_vox,
            metric_threshold: 0.2,
        }
    }
}

impl PipelineConfig {
    /// Parses the config text. Recognized keys: gamma, sector_angle, w_min,
    /// l_vox, update_radius, w_prev, w_new, tsdf_truncation,
    /// metric_threshold.
    pub fn parse_str(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut truncation_set = false;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line_no, "expected key = value"))?;
            let key = key.trim();
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad value for {key}")))?;
            match key {
                "gamma" => cfg.ghpr.gamma = value,
                "sector_angle" => cfg.ghpr.sector_angle = value,
                "w_min" => cfg.ghpr.w_min = value,
                "l_vox" => cfg.field.l_vox = value,
                "update_radius" => cfg.field.update_radius = value,
                "w_prev" => cfg.field.w_prev = value,
                "w_new" => cfg.field.w_new = value,
                "tsdf_truncation" => {
                    cfg.tsdf_truncation = value;
                    truncation_set = true;
                }
                "metric_threshold" => cfg.metric_threshold = value,
                other => {
                    return Err(Error::Config(format!(
                        "{}:{}: unknown key {other:?}",
                        path.display(),
                        line_no
                    )))
                }
            }
        }
        if !truncation_set {
            cfg.tsdf_truncation = 1.5 * cfg.field.l_vox;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, path)
    }

    pub fn validate(&mut self) -> Result<()> {
        // GhprParams::new re-checks and normalizes the sector angle.
        self.ghpr = GhprParams::new(self.ghpr.gamma, self.ghpr.sector_angle, self.ghpr.w_min)?;
        self.field.validate()?;
        if !(self.tsdf_truncation > 0.0) {
            return Err(Error::Config("tsdf_truncation must be positive".into()));
        }
        if !(self.metric_threshold > 0.0) {
            return Err(Error::Config("metric_threshold must be positive".into()));
        }
        Ok(())
    }
}
