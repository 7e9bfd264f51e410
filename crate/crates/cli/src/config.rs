//! Scenario configuration files.
//!
//! A scenario is one human-readable TOML file. Geometry (grid, Gaussian
//! centers and spreads, robot starts) is written in cell-index units and
//! scaled by the cell size when the runnable scenario is built; speeds are
//! m/s and times are seconds. Every omitted field takes a documented
//! default, so a minimal file needs only robots and target components.

use std::fmt;
use std::path::Path;

use mdcpp_core::assignment::LloydParams;
use mdcpp_core::engine::{
    RobotSpec, Scenario, SpeedModel, SpeedModelKind, SpeedProfile, Strategy,
};
use mdcpp_core::estimator::{sigma_grid, EstimatorParams};
use mdcpp_core::netsim::CommRange;
use mdcpp_core::world::{GaussianComponent, GridSpec, TargetSeeding};
use mdcpp_core::Point2;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(toml::de::Error),
    Invalid { field: String, reason: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read scenario file: {e}"),
            ConfigError::Parse(e) => write!(f, "scenario parse error: {e}"),
            ConfigError::Invalid { field, reason } => {
                write!(f, "invalid scenario: {field}: {reason}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError::Parse(e)
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub width_cells: usize,
    pub height_cells: usize,
    pub cell_size: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width_cells: 20,
            height_cells: 20,
            cell_size: 10.0,
            origin: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    /// Center in cell-index units.
    pub center: [f64; 2],
    /// Spread in cell-index units.
    pub sigma: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub id: u32,
    /// Start position in cell-index units.
    pub start: [f64; 2],
    pub v_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_det: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_int: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_noise_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedsConfig {
    #[serde(default = "default_speed_model")]
    pub model: String,
    #[serde(default = "default_jitter")]
    pub jitter: [f64; 2],
}

fn default_speed_model() -> String {
    "interpolated".into()
}

fn default_jitter() -> [f64; 2] {
    [0.5, 1.5]
}

impl Default for SpeedsConfig {
    fn default() -> Self {
        SpeedsConfig {
            model: default_speed_model(),
            jitter: default_jitter(),
        }
    }
}

/// Communication range: a number of meters, or the string "unlimited".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeConfig {
    Meters(f64),
    Word(String),
}

impl Default for RangeConfig {
    fn default() -> Self {
        RangeConfig::Word("unlimited".into())
    }
}

impl RangeConfig {
    pub fn to_comm_range(&self) -> Result<CommRange, ConfigError> {
        match self {
            RangeConfig::Meters(m) if *m > 0.0 => Ok(CommRange::Limited(*m)),
            RangeConfig::Meters(_) => Err(invalid(
                "communication.range",
                "must be positive meters or \"unlimited\"",
            )),
            RangeConfig::Word(w) if w == "unlimited" => Ok(CommRange::Unlimited),
            RangeConfig::Word(w) => Err(invalid(
                "communication.range",
                format!("unknown value {w:?}; use meters or \"unlimited\""),
            )),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text == "unlimited" {
            return Ok(RangeConfig::Word("unlimited".into()));
        }
        text.parse::<f64>()
            .map(RangeConfig::Meters)
            .map_err(|_| invalid("--comm-range", "expected meters or \"unlimited\""))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommunicationConfig {
    pub range: RangeConfig,
}

impl Default for CommunicationConfig {
    fn default() -> Self {
        CommunicationConfig {
            range: RangeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n0: usize,
    pub dt: f64,
    pub max_sim_time: f64,
    pub trajectory_interval: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n0: 2,
            dt: 1.0,
            max_sim_time: 1_000_000.0,
            trajectory_interval: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub theta: f64,
    pub k_max: usize,
    /// Exploration radius in cell widths.
    pub exploration_radius_cells: f64,
    /// Sigma search grid bounds and step, in cell widths.
    pub sigma_min_cells: f64,
    pub sigma_max_cells: f64,
    pub sigma_step_cells: f64,
    pub prior_density: f64,
    pub swd_projections: usize,
    pub swd_interval: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            theta: 0.6,
            k_max: 5,
            exploration_radius_cells: 5.0,
            sigma_min_cells: 2.5,
            sigma_max_cells: 5.0,
            sigma_step_cells: 0.1,
            prior_density: 0.0,
            swd_projections: 50,
            swd_interval: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetsConfig {
    /// "threshold" or "bernoulli".
    pub mode: String,
    pub threshold: f64,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        TargetsConfig {
            mode: "threshold".into(),
            threshold: 0.5,
        }
    }
}

/// A fully resolved scenario file. Serializing and re-parsing a loaded
/// config is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, rename = "gaussians")]
    pub gaussians: Vec<GaussianConfig>,
    #[serde(rename = "robots")]
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub speeds: SpeedsConfig,
    #[serde(default)]
    pub communication: CommunicationConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub targets: TargetsConfig,
}

impl ScenarioConfig {
    /// Parse a scenario from TOML text.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a scenario file; the file stem becomes the name when the file
    /// does not set one.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.name.is_none() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .or(Some("scenario".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    fn speed_model_kind(&self) -> Result<SpeedModelKind, ConfigError> {
        match self.speeds.model.as_str() {
            "interpolated" => Ok(SpeedModelKind::Interpolated),
            "three_speed" => Ok(SpeedModelKind::ThreeSpeed),
            other => Err(invalid(
                "speeds.model",
                format!("unknown model {other:?}; use \"interpolated\" or \"three_speed\""),
            )),
        }
    }

    /// Structural checks with named-field diagnostics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.robots.is_empty() {
            return Err(invalid("robots", "at least one robot is required"));
        }
        let mut ids: Vec<u32> = self.robots.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.robots.len() {
            return Err(invalid("robots.id", "robot ids must be unique"));
        }
        if self.grid.width_cells == 0 || self.grid.height_cells == 0 {
            return Err(invalid("grid", "grid dimensions must be positive"));
        }
        if !(self.grid.cell_size > 0.0) {
            return Err(invalid("grid.cell_size", "cell size must be positive"));
        }
        let kind = self.speed_model_kind()?;
        for (i, r) in self.robots.iter().enumerate() {
            let field = |suffix: &str| format!("robots[{i}].{suffix}");
            if !(r.v_max > 0.0) {
                return Err(invalid(field("v_max"), "must be positive"));
            }
            match kind {
                SpeedModelKind::Interpolated => {
                    let v_min = r
                        .v_min
                        .ok_or_else(|| invalid(field("v_min"), "required by the interpolated model"))?;
                    if !(v_min > 0.0 && v_min <= r.v_max) {
                        return Err(invalid(field("v_min"), "must satisfy 0 < v_min <= v_max"));
                    }
                }
                SpeedModelKind::ThreeSpeed => {
                    let v_det = r
                        .v_det
                        .ok_or_else(|| invalid(field("v_det"), "required by the three-speed model"))?;
                    let v_int = r
                        .v_int
                        .ok_or_else(|| invalid(field("v_int"), "required by the three-speed model"))?;
                    if !(v_int > 0.0 && v_int <= v_det && v_det <= r.v_max) {
                        return Err(invalid(
                            field("v_int"),
                            "must satisfy 0 < v_int <= v_det <= v_max",
                        ));
                    }
                }
            }
            if !(r.alpha > 0.0) {
                return Err(invalid(field("alpha"), "must be positive"));
            }
            if r.noise_sigma < 0.0 {
                return Err(invalid(field("noise_sigma"), "must be non-negative"));
            }
            let (x, y) = (r.start[0], r.start[1]);
            if x < 0.0
                || y < 0.0
                || x > self.grid.width_cells as f64
                || y > self.grid.height_cells as f64
            {
                return Err(invalid(
                    field("start"),
                    format!(
                        "({x}, {y}) outside the {}x{} cell grid",
                        self.grid.width_cells, self.grid.height_cells
                    ),
                ));
            }
        }
        for (i, g) in self.gaussians.iter().enumerate() {
            if !(g.sigma > 0.0) {
                return Err(invalid(format!("gaussians[{i}].sigma"), "must be positive"));
            }
            if !(g.amplitude > 0.0) {
                return Err(invalid(
                    format!("gaussians[{i}].amplitude"),
                    "must be positive",
                ));
            }
        }
        let [lo, hi] = self.speeds.jitter;
        if !(lo > 0.0 && lo <= hi) {
            return Err(invalid("speeds.jitter", "must satisfy 0 < lo <= hi"));
        }
        if self.simulation.n0 == 0 {
            return Err(invalid("simulation.n0", "must be at least 1"));
        }
        if !(self.simulation.dt > 0.0) {
            return Err(invalid("simulation.dt", "must be positive"));
        }
        let e = &self.estimator;
        if !(e.sigma_min_cells > 0.0
            && e.sigma_min_cells <= e.sigma_max_cells
            && e.sigma_step_cells > 0.0)
        {
            return Err(invalid("estimator.sigma_*", "need 0 < min <= max and step > 0"));
        }
        match self.targets.mode.as_str() {
            "threshold" | "bernoulli" => {}
            other => {
                return Err(invalid(
                    "targets.mode",
                    format!("unknown mode {other:?}; use \"threshold\" or \"bernoulli\""),
                ))
            }
        }
        self.communication.range.to_comm_range()?;
        if let Some(s) = &self.strategy {
            parse_strategy(s)?;
        }
        Ok(())
    }

    /// Build the runnable scenario plus the strategy. `seed` and `strategy`
    /// arguments override the file values.
    pub fn to_scenario(
        &self,
        seed_override: Option<u64>,
        strategy_override: Option<Strategy>,
        range_override: Option<CommRange>,
    ) -> Result<(Scenario, Strategy), ConfigError> {
        self.validate()?;
        let seed = seed_override
            .or(self.seed)
            .ok_or_else(|| invalid("seed", "a seed is required (file field or --seed)"))?;
        let strategy = match strategy_override {
            Some(s) => s,
            None => match &self.strategy {
                Some(s) => parse_strategy(s)?,
                None => Strategy::Mdcpp,
            },
        };
        let cell = self.grid.cell_size;
        let grid = GridSpec::with_origin(
            self.grid.width_cells,
            self.grid.height_cells,
            cell,
            Point2::new(self.grid.origin[0], self.grid.origin[1]),
        )
        .map_err(|e| invalid("grid", e.to_string()))?;
        let origin = grid.origin();

        let components: Vec<GaussianComponent> = self
            .gaussians
            .iter()
            .map(|g| {
                GaussianComponent::new(
                    Point2::new(origin.x + g.center[0] * cell, origin.y + g.center[1] * cell),
                    g.sigma * cell,
                    g.amplitude,
                )
                .map_err(|e| invalid("gaussians", e.to_string()))
            })
            .collect::<Result<_, _>>()?;

        let kind = self.speed_model_kind()?;
        let mut ordered = self.robots.clone();
        ordered.sort_by_key(|r| r.id);
        let robots: Vec<RobotSpec> = ordered
            .iter()
            .map(|r| {
                let profile = match kind {
                    SpeedModelKind::Interpolated => SpeedProfile::Interpolated {
                        v_max: r.v_max,
                        v_min: r.v_min.expect("validated"),
                    },
                    SpeedModelKind::ThreeSpeed => SpeedProfile::ThreeSpeed {
                        v_max: r.v_max,
                        v_det: r.v_det.expect("validated"),
                        v_int: r.v_int.expect("validated"),
                    },
                };
                RobotSpec {
                    start: Point2::new(
                        origin.x + r.start[0] * cell,
                        origin.y + r.start[1] * cell,
                    ),
                    profile,
                    alpha: r.alpha,
                    noise_sigma: r.noise_sigma,
                }
            })
            .collect();

        let comm_range = match range_override {
            Some(r) => r,
            None => self.communication.range.to_comm_range()?,
        };

        let e = &self.estimator;
        let estimator = EstimatorParams {
            theta: e.theta,
            k_max: e.k_max,
            exploration_radius: e.exploration_radius_cells * cell,
            sigma_grid: sigma_grid(
                e.sigma_min_cells * cell,
                e.sigma_max_cells * cell,
                e.sigma_step_cells * cell,
            ),
            prior_density: e.prior_density,
        };

        let target_seeding = match self.targets.mode.as_str() {
            "threshold" => TargetSeeding::DeterministicThreshold(self.targets.threshold),
            _ => TargetSeeding::Bernoulli,
        };

        let scenario = Scenario {
            grid,
            components,
            robots,
            speed_model: SpeedModel {
                kind,
                jitter: (self.speeds.jitter[0], self.speeds.jitter[1]),
            },
            comm_range,
            n0: self.simulation.n0,
            seed,
            estimator,
            target_seeding,
            dt: self.simulation.dt,
            max_sim_time: self.simulation.max_sim_time,
            swd_interval: e.swd_interval,
            swd_projections: e.swd_projections,
            trajectory_interval: self.simulation.trajectory_interval,
            lloyd: LloydParams::for_cell_size(cell),
        };
        scenario
            .validate()
            .map_err(|err| invalid("scenario", err.to_string()))?;
        Ok((scenario, strategy))
    }

    /// External robot ids in the engine's (sorted) order.
    pub fn robot_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.robots.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids
    }
}

pub fn parse_strategy(name: &str) -> Result<Strategy, ConfigError> {
    match name.to_ascii_lowercase().as_str() {
        "mdcpp" => Ok(Strategy::Mdcpp),
        "dynamic" => Ok(Strategy::DynamicNoPrediction),
        "sweeping" => Ok(Strategy::Sweeping),
        other => Err(invalid(
            "strategy",
            format!("unknown strategy {other:?}; use mdcpp, dynamic, or sweeping"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[robots]]
        id = 1
        start = [0.5, 0.5]
        v_max = 0.3
        v_min = 0.06

        [[gaussians]]
        center = [10.0, 10.0]
        sigma = 3.0
    "#;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.grid.width_cells, 20);
        assert_eq!(cfg.grid.cell_size, 10.0);
        assert_eq!(cfg.estimator.theta, 0.6);
        assert_eq!(cfg.simulation.n0, 2);
        assert_eq!(cfg.robots[0].alpha, 1.0);
        assert_eq!(cfg.robots[0].noise_sigma, 0.05);
        let (scenario, strategy) = cfg.to_scenario(Some(1), None, None).unwrap();
        assert_eq!(strategy, Strategy::Mdcpp);
        assert_eq!(scenario.grid.cell_count(), 400);
        // Cell-unit center scaled to meters.
        assert_eq!(scenario.components[0].center, Point2::new(100.0, 100.0));
        assert_eq!(scenario.components[0].sigma, 30.0);
        // Sigma grid spans 2.5..5.0 cells in steps of 0.1 cells.
        assert_eq!(scenario.estimator.sigma_grid.len(), 26);
        assert!((scenario.estimator.sigma_grid[0] - 25.0).abs() < 1e-9);
        assert!((scenario.estimator.sigma_grid[25] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let text = cfg.to_toml();
        let reloaded = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = r#"
            [[robots]]
            id = 1
            start = [0.5, 0.5]
            v_max = 0.3
            v_min = 0.06

            [[robots]]
            id = 1
            start = [1.5, 0.5]
            v_max = 0.3
            v_min = 0.06
        "#;
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("robots.id"), "{err}");
    }

    #[test]
    fn robot_outside_grid_is_rejected_by_name() {
        let text = r#"
            [[robots]]
            id = 1
            start = [25.0, 0.5]
            v_max = 0.3
            v_min = 0.06
        "#;
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("robots[0].start"), "{err}");
    }

    #[test]
    fn missing_profile_field_is_rejected() {
        let text = r#"
            [[robots]]
            id = 1
            start = [0.5, 0.5]
            v_max = 0.3
        "#;
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("v_min"), "{err}");
    }

    #[test]
    fn seed_is_mandatory_somewhere() {
        let cfg = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.to_scenario(None, None, None).is_err());
        assert!(cfg.to_scenario(Some(9), None, None).is_ok());
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ScenarioConfig::from_toml("robots = 3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("parse error"), "{msg}");
    }

    #[test]
    fn comm_range_forms() {
        assert_eq!(
            RangeConfig::parse("unlimited").unwrap().to_comm_range().unwrap(),
            CommRange::Unlimited
        );
        assert_eq!(
            RangeConfig::parse("25.5").unwrap().to_comm_range().unwrap(),
            CommRange::Limited(25.5)
        );
        assert!(RangeConfig::parse("sometimes").is_err());
    }

    #[test]
    fn strategy_names() {
        assert_eq!(parse_strategy("mdcpp").unwrap(), Strategy::Mdcpp);
        assert_eq!(parse_strategy("DYNAMIC").unwrap(), Strategy::DynamicNoPrediction);
        assert_eq!(parse_strategy("sweeping").unwrap(), Strategy::Sweeping);
        assert!(parse_strategy("zigzag").is_err());
    }
}
