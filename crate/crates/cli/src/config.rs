//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file is a valid configuration. Later assignments
//! override earlier ones, which is how command-line `--set` overrides apply.

use crate::CliError;
use dbmc::analysis::ThresholdObjective;
use dbmc::{
    slot_probabilities, snr_to_sigma, AbsorptionCheck, ArrivalModel, CodecId, Params, PriorSearch, Profile,
    TransitionMode,
};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Molecule count when none is configured.
pub const DEFAULT_N_M: u64 = dbmc::channel::DEFAULT_MOLECULES_PER_ONE;
pub const QUICK_INFO_BITS: usize = 20_000;
pub const QUICK_PARTICLES: u64 = 10_000;

/// Parameter varied by `sweep-scalar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarAxis {
    Molecules,
    Distance,
    Radius,
}

impl ScalarAxis {
    fn default_grid(self) -> Vec<f64> {
        match self {
            ScalarAxis::Molecules => vec![1e3, 2e3, 5e3, 1e4, 2e4, 5e4],
            ScalarAxis::Distance => vec![8e-5, 1e-4, 1.2e-4, 1.4e-4, 1.6e-4, 2e-4],
            ScalarAxis::Radius => vec![2e-5, 3e-5, 4e-5, 5e-5, 6e-5, 8e-5],
        }
    }
}

impl FromStr for ScalarAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "n_m" => Ok(ScalarAxis::Molecules),
            "distance" => Ok(ScalarAxis::Distance),
            "radius" => Ok(ScalarAxis::Radius),
            other => Err(CliError::Config(format!("unknown axis '{other}' (n_m, distance, radius)"))),
        }
    }
}

impl fmt::Display for ScalarAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarAxis::Molecules => "n_m",
            ScalarAxis::Distance => "distance",
            ScalarAxis::Radius => "radius",
        })
    }
}

/// Objective for `optimize-threshold`; `Auto` uses the closed form where one
/// exists and Monte Carlo otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveChoice {
    Auto,
    Fixed(ThresholdObjective),
}

impl ObjectiveChoice {
    pub fn for_codec(self, codec: CodecId) -> ThresholdObjective {
        match self {
            ObjectiveChoice::Fixed(o) => o,
            ObjectiveChoice::Auto => match codec {
                CodecId::Uncoded | CodecId::IsiMitigating421 => ThresholdObjective::AnalyticBer,
                _ => ThresholdObjective::McBer,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub diffusion_coeff: f64,
    pub receiver_radius: f64,
    pub distance: f64,
    /// `None` means twice the peak hitting time.
    pub slot_duration: Option<f64>,
    pub n_m: u64,
    /// Operating SNR for sweeps over something other than SNR.
    pub snr_db: f64,
    pub snr_grid: Vec<f64>,
    pub memory_grid: Vec<usize>,
    pub axis: ScalarAxis,
    /// `None` uses the axis default.
    pub scalar_grid: Option<Vec<f64>>,
    pub codecs: Vec<CodecId>,
    pub memory_length: usize,
    pub n_info_bits: usize,
    pub seed: u64,
    pub arrival_model: ArrivalModel,
    pub transition_mode: TransitionMode,
    /// `None` is the midpoint threshold `N_m (p1 + p2) / 2`.
    pub threshold: Option<f64>,
    pub prior: PriorSearch,
    pub objective: ObjectiveChoice,
    pub particles: u64,
    /// Walk step is `T_peak / particle_step_divisor`.
    pub particle_step_divisor: f64,
    pub particle_slots: usize,
    pub absorption: AbsorptionCheck,
    /// Scales the closed-form CDF in `validate-channel`; only for exercising
    /// the failure path.
    pub cdf_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = Params::reference();
        Self {
            diffusion_coeff: p.diffusion_coeff,
            receiver_radius: p.receiver_radius,
            distance: p.distance,
            slot_duration: None,
            n_m: DEFAULT_N_M,
            snr_db: 12.0,
            snr_grid: (0..=12).map(|k| 2.0 * k as f64).collect(),
            memory_grid: vec![1, 3, 5],
            axis: ScalarAxis::Molecules,
            scalar_grid: None,
            codecs: CodecId::ALL.to_vec(),
            memory_length: 1,
            n_info_bits: 1_000_000,
            seed: 1,
            arrival_model: ArrivalModel::default(),
            transition_mode: TransitionMode::default(),
            threshold: None,
            prior: PriorSearch::Uniform,
            objective: ObjectiveChoice::Auto,
            particles: 100_000,
            particle_step_divisor: 200.0,
            particle_slots: 10,
            absorption: AbsorptionCheck::default(),
            cdf_scale: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_model<T: FromStr<Err = dbmc::Error>>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let grid = if parts.len() == 3 {
        let (start, step, stop): (f64, f64, f64) = (parse(key, parts[0])?, parse(key, parts[1])?, parse(key, parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(CliError::Config(format!("{key}: bad range '{value}'")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + step * k as f64).collect()
    } else {
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse(key, s))
            .collect::<Result<Vec<f64>, _>>()?
    };
    check_grid(key, &grid)?;
    Ok(grid)
}

fn check_grid<T: PartialOrd + Copy>(key: &str, grid: &[T]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("{key}: grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Config(format!("{key}: grid must be strictly increasing")));
    }
    Ok(())
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn auto_or<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    /// Reads a configuration file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies one `key=value` assignment.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "diffusion_coeff" => self.diffusion_coeff = parse(key, value)?,
            "receiver_radius" => self.receiver_radius = parse(key, value)?,
            "distance" => self.distance = parse(key, value)?,
            "slot_duration" => self.slot_duration = parse_auto(key, value)?,
            "n_m" => self.n_m = parse(key, value)?,
            "snr_db" => self.snr_db = parse(key, value)?,
            "snr_grid" => self.snr_grid = parse_grid(key, value)?,
            "memory_grid" => {
                let grid = value.split(',').map(|s| parse(key, s.trim())).collect::<Result<Vec<usize>, _>>()?;
                check_grid(key, &grid)?;
                self.memory_grid = grid;
            }
            "axis" => self.axis = value.parse()?,
            "scalar_grid" => {
                self.scalar_grid = if value == "auto" { None } else { Some(parse_grid(key, value)?) }
            }
            "codecs" => {
                let codecs = if value == "all" {
                    CodecId::ALL.to_vec()
                } else {
                    value
                        .split(',')
                        .map(|s| parse_model::<CodecId>(key, s.trim()))
                        .collect::<Result<Vec<_>, _>>()?
                };
                if codecs.is_empty() {
                    return Err(CliError::Config("codecs: list is empty".into()));
                }
                self.codecs = codecs;
            }
            "memory_length" => self.memory_length = parse(key, value)?,
            "n_info_bits" => self.n_info_bits = parse::<f64>(key, value).and_then(|v| whole(key, v))? as usize,
            "seed" => self.seed = parse(key, value)?,
            "arrival_model" => self.arrival_model = parse_model(key, value)?,
            "transition_mode" => self.transition_mode = parse_model(key, value)?,
            "threshold" => self.threshold = parse_auto(key, value)?,
            "prior" => {
                self.prior = match value {
                    "uniform" => PriorSearch::Uniform,
                    "max-bernoulli" => PriorSearch::MaximizeBernoulli,
                    other => return Err(CliError::Config(format!("prior: unknown '{other}'"))),
                }
            }
            "objective" => {
                self.objective = match value {
                    "auto" => ObjectiveChoice::Auto,
                    "analytic" => ObjectiveChoice::Fixed(ThresholdObjective::AnalyticBer),
                    "mc" => ObjectiveChoice::Fixed(ThresholdObjective::McBer),
                    other => return Err(CliError::Config(format!("objective: unknown '{other}'"))),
                }
            }
            "particles" => self.particles = parse::<f64>(key, value).and_then(|v| whole(key, v))? as u64,
            "particle_step_divisor" => self.particle_step_divisor = parse(key, value)?,
            "particle_slots" => self.particle_slots = parse(key, value)?,
            "absorption" => self.absorption = parse_model(key, value)?,
            "cdf_scale" => self.cdf_scale = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let prior = match self.prior {
            PriorSearch::Uniform => "uniform",
            PriorSearch::MaximizeBernoulli => "max-bernoulli",
        };
        let objective = match self.objective {
            ObjectiveChoice::Auto => "auto",
            ObjectiveChoice::Fixed(ThresholdObjective::AnalyticBer) => "analytic",
            ObjectiveChoice::Fixed(ThresholdObjective::McBer) => "mc",
        };
        vec![
            ("diffusion_coeff", self.diffusion_coeff.to_string()),
            ("receiver_radius", self.receiver_radius.to_string()),
            ("distance", self.distance.to_string()),
            ("slot_duration", auto_or(&self.slot_duration)),
            ("n_m", self.n_m.to_string()),
            ("snr_db", self.snr_db.to_string()),
            ("snr_grid", join(&self.snr_grid)),
            ("memory_grid", join(&self.memory_grid)),
            ("axis", self.axis.to_string()),
            ("scalar_grid", self.scalar_grid.as_deref().map_or_else(|| "auto".into(), join)),
            ("codecs", join(&self.codecs)),
            ("memory_length", self.memory_length.to_string()),
            ("n_info_bits", self.n_info_bits.to_string()),
            ("seed", self.seed.to_string()),
            ("arrival_model", self.arrival_model.to_string()),
            ("transition_mode", self.transition_mode.to_string()),
            ("threshold", auto_or(&self.threshold)),
            ("prior", prior.to_string()),
            ("objective", objective.to_string()),
            ("particles", self.particles.to_string()),
            ("particle_step_divisor", self.particle_step_divisor.to_string()),
            ("particle_slots", self.particle_slots.to_string()),
            ("absorption", self.absorption.to_string()),
            ("cdf_scale", self.cdf_scale.to_string()),
        ]
    }

    /// Shrinks the Monte Carlo budgets for a fast pass.
    pub fn make_quick(&mut self) {
        self.n_info_bits = QUICK_INFO_BITS;
        self.particles = QUICK_PARTICLES;
    }

    pub fn scalar_values(&self) -> Vec<f64> {
        self.scalar_grid.clone().unwrap_or_else(|| self.axis.default_grid())
    }

    /// Channel parameters without counting noise, with the slot duration resolved.
    pub fn base_params(&self) -> Result<Params, CliError> {
        let mut p = Params::with_geometry(self.diffusion_coeff, self.receiver_radius, self.distance).with_molecules(self.n_m);
        if let Some(t) = self.slot_duration {
            p = p.with_slot_duration(t);
        }
        p.validate()?;
        Ok(p)
    }

    /// Slots of ISI the profile must cover.
    pub fn horizon(&self, memory_length: usize) -> usize {
        (memory_length + 1).max(2)
    }

    /// Parameters and profile at `snr_db` for memory length `memory_length`.
    pub fn channel_at(&self, snr_db: f64, memory_length: usize) -> Result<(Params, Profile), CliError> {
        let p = self.base_params()?;
        let prof = slot_probabilities(&p, self.horizon(memory_length))?;
        let sigma = snr_to_sigma(snr_db, &p, &prof);
        Ok((p.with_noise_sigma(sigma), prof))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.base_params()?;
        if self.n_info_bits == 0 {
            return Err(CliError::Config("n_info_bits must be positive".into()));
        }
        if self.particles == 0 {
            return Err(CliError::Config("particles must be positive".into()));
        }
        if !(self.particle_step_divisor > 0.0) {
            return Err(CliError::Config("particle_step_divisor must be positive".into()));
        }
        if self.particle_slots == 0 {
            return Err(CliError::Config("particle_slots must be positive".into()));
        }
        if !(self.cdf_scale > 0.0) {
            return Err(CliError::Config("cdf_scale must be positive".into()));
        }
        if self.memory_length > dbmc::analysis::MAX_ANALYTIC_MEMORY
            || self.memory_grid.iter().any(|&l| l > dbmc::analysis::MAX_ANALYTIC_MEMORY)
        {
            return Err(CliError::Config(format!(
                "memory lengths above {} are not supported",
                dbmc::analysis::MAX_ANALYTIC_MEMORY
            )));
        }
        Ok(())
    }
}

fn whole(key: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key}: expected a whole number, got {v}")))
    }
}
