//! Run configuration, read from a TOML file with strict key checking.

use std::path::{Path, PathBuf};

use hpa_core::dde::{CycleOptions, DimensionalParams, NondimParams, State, DEFAULT_INITIAL_STATE};
use hpa_core::koopman::{default_kreiss_options, KoopmanOptions, DEFAULT_RANK_TOL};
use hpa_core::numerics::{GridAxes, KreissOptions};
use hpa_core::{floquet, jacobian, koopman};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "HPA_OUTPUT_DIR";

/// Model parameters in exactly one of the two scalings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Dimensional(DimensionalParams),
    Nondimensional(NondimParams),
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::Dimensional(DimensionalParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_end: f64,
    pub step: f64,
    /// Constant initial history `(x, y)`.
    pub initial: [f64; 2],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            step: 1e-3,
            initial: [DEFAULT_INITIAL_STATE.x, DEFAULT_INITIAL_STATE.y],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobianConfig {
    /// Base times per period in `jacobian-sweep`.
    pub samples: usize,
    /// Base times of `jacobian-grid` as fractions of the period.
    pub phases: Vec<f64>,
    pub grid: GridAxes,
}

impl Default for JacobianConfig {
    fn default() -> Self {
        Self {
            samples: 200,
            phases: vec![0.0, 0.25, 0.5, 0.75],
            grid: jacobian::default_axes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetConfig {
    /// Kreiss threshold.
    pub c: f64,
    pub step: f64,
    pub grid: GridAxes,
    pub kreiss: KreissOptions,
    /// Also write the dense period-map matrix.
    pub dump_matrix: bool,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self {
            c: 1.01,
            step: 1e-3,
            grid: floquet::default_axes(),
            kreiss: KreissOptions {
                radial: 40,
                angular: 64,
                r_max: 11.01,
            },
            dump_matrix: false,
        }
    }
}

/// Delay embedding, sampling and dictionary settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub d: usize,
    pub samples_per_period: f64,
    pub box_x: [f64; 2],
    pub box_y: [f64; 2],
    pub n_init: usize,
    pub n_centers: usize,
    pub rank_tol: f64,
    pub step: f64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let k = KoopmanOptions::default();
        Self {
            d: k.d,
            samples_per_period: k.samples_per_period,
            box_x: k.box_x,
            box_y: k.box_y,
            n_init: k.n_init,
            n_centers: k.n_centers,
            rank_tol: DEFAULT_RANK_TOL,
            step: k.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KoopmanConfig {
    /// Kreiss threshold.
    pub c: f64,
    pub grid: GridAxes,
    pub kreiss: KreissOptions,
    /// Number of near-circle eigenfunctions to tabulate.
    pub fields: usize,
    /// Points per side of each eigenfunction field.
    pub field_n: usize,
    /// Snapshot cache: loaded when present, written otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

impl Default for KoopmanConfig {
    fn default() -> Self {
        Self {
            c: 1.05,
            grid: koopman::default_axes(),
            kreiss: default_kreiss_options(1.05),
            fields: 3,
            field_n: 101,
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub h: Vec<f64>,
    /// Base times per period for the jacobian target.
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            h: vec![4.0, 7.66, 12.0, 18.0, 23.0],
            samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Overlay {
    /// Imaginary axis for `sigma_min` grids, unit circle otherwise.
    Auto,
    Line,
    Circle,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Contour levels, strictly increasing and positive.
    pub levels: Vec<f64>,
    pub overlay: Overlay,
}

/// Six levels log-spaced from `10^-1.5` to `10^-0.25`.
pub fn default_levels() -> Vec<f64> {
    (0..6).map(|k| 10f64.powf(-1.5 + 0.25 * k as f64)).collect()
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            overlay: Overlay::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Replaces `h` of the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_override: Option<f64>,
    pub n_floquet: usize,
    pub model: ModelConfig,
    pub cycle: CycleOptions,
    pub simulate: SimulateConfig,
    pub jacobian: JacobianConfig,
    pub floquet: FloquetConfig,
    pub embedding: EmbeddingSection,
    pub koopman: KoopmanConfig,
    pub sweep: SweepConfig,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("output"),
            seed: 0,
            h_override: None,
            n_floquet: 50,
            model: ModelConfig::default(),
            cycle: CycleOptions::default(),
            simulate: SimulateConfig::default(),
            jacobian: JacobianConfig::default(),
            floquet: FloquetConfig::default(),
            embedding: EmbeddingSection::default(),
            koopman: KoopmanConfig::default(),
            sweep: SweepConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    /// SHA-256 of the canonical TOML form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(canon.to_toml().as_bytes()))
    }

    /// Nondimensional parameters with `h_override` applied.
    pub fn params(&self) -> Result<NondimParams, CliError> {
        let p = match &self.model {
            ModelConfig::Dimensional(d) => d.nondimensionalize()?,
            ModelConfig::Nondimensional(n) => *n,
        };
        let p = match self.h_override {
            Some(h) => p.with_h(h),
            None => p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn initial_state(&self) -> State {
        State::new(self.simulate.initial[0], self.simulate.initial[1])
    }

    pub fn koopman_options(&self) -> KoopmanOptions {
        let e = &self.embedding;
        KoopmanOptions {
            d: e.d,
            samples_per_period: e.samples_per_period,
            box_x: e.box_x,
            box_y: e.box_y,
            n_init: e.n_init,
            n_centers: e.n_centers,
            rank_tol: e.rank_tol,
            seed: self.seed,
            step: e.step,
        }
    }

    /// Output directory after the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if self.n_floquet < 2 {
            return Err(usage(format!("n_floquet must be at least 2, got {}", self.n_floquet)));
        }
        for (name, g) in [
            ("jacobian.grid", &self.jacobian.grid),
            ("floquet.grid", &self.floquet.grid),
            ("koopman.grid", &self.koopman.grid),
        ] {
            g.re.validate()
                .and(g.im.validate())
                .map_err(|e| usage(format!("{name}: {e}")))?;
        }
        if self.jacobian.phases.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(usage("jacobian.phases must lie in [0, 1]"));
        }
        if !(self.simulate.t_end > 0.0) {
            return Err(usage("simulate.t_end must be positive"));
        }
        for (name, c, k) in [
            ("floquet", self.floquet.c, &self.floquet.kreiss),
            ("koopman", self.koopman.c, &self.koopman.kreiss),
        ] {
            if !(c > 0.0) || !c.is_finite() {
                return Err(usage(format!("{name}.c must be positive")));
            }
            if k.radial < 16 || k.angular < 16 || !(k.r_max > c) {
                return Err(usage(format!(
                    "{name}.kreiss needs radial, angular >= 16 and r_max > c"
                )));
            }
        }
        if self.sweep.h.is_empty() {
            return Err(usage("sweep.h is empty"));
        }
        validate_levels(&self.render.levels)
    }
}

pub fn validate_levels(levels: &[f64]) -> Result<(), CliError> {
    if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(usage("contour levels must be positive and finite"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("contour levels must be strictly increasing"));
    }
    Ok(())
}
