//! Sweep manifests: a TOML document naming contexts, profiles, policy and
//! grid, resolved into one [`SweepSpec`] per context.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use vistacheck_core::criticality::{critical_values, GridSpec, VistaContext, VistaKind};
use vistacheck_core::dynamics::{presets, AdProfile};
use vistacheck_core::sim::PolicyKind;
use vistacheck_core::sweep::{validate_cases, SweepSpec};

pub const OUTPUT_DIR_ENV: &str = "VISTACHECK_OUTPUT_DIR";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    pub axis_max: Option<f64>,
    pub initial_step: Option<f64>,
    pub refine_step: Option<f64>,
    pub speeds: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub kinds: Vec<VistaKind>,
    #[serde(default = "default_preset")]
    pub preset: String,
    pub arriving_preset: Option<String>,
    /// Replaces the ego preset's capabilities when present.
    pub profile: Option<AdProfile>,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub vehicle_length: Option<f64>,
    #[serde(default = "default_true")]
    pub refine: bool,
    #[serde(default)]
    pub grid: GridOverride,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn default_preset() -> String {
    "apollo-like".into()
}

fn default_policy() -> PolicyKind {
    PolicyKind::WorstCaseSafe
}

fn default_true() -> bool {
    true
}

pub fn preset(name: &str) -> Result<AdProfile> {
    presets::by_name(name)
        .ok_or_else(|| anyhow!("unknown preset '{name}', expected one of {}", presets::NAMES.join(", ")))
}

pub fn parse_kind(s: &str) -> Result<VistaKind> {
    s.parse::<VistaKind>().map_err(|e| anyhow!("{e}"))
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Output directory: command-line flag, then environment, then manifest.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn threads(&self, flag: Option<usize>) -> Result<usize> {
        let n = flag.or(self.threads).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if n == 0 {
            bail!("threads must be at least 1");
        }
        Ok(n)
    }

    /// Resolves and validates one spec per context. Every case of the
    /// coarse grid is placed on the map once, so bad settings surface here
    /// rather than halfway through a sweep.
    pub fn resolve(&self) -> Result<Vec<SweepSpec>> {
        let ego = match &self.profile {
            Some(p) => p.clone(),
            None => preset(&self.preset)?,
        };
        let ego_name = if self.profile.is_some() { "custom".to_string() } else { self.preset.clone() };
        let arriving_name = self.arriving_preset.clone().unwrap_or_else(|| self.preset.clone());
        let arriving = match &self.arriving_preset {
            Some(name) => preset(name)?,
            None => ego.clone(),
        };
        ego.validate().context("profile")?;
        let kinds = if self.kinds.is_empty() { VistaKind::ALL.to_vec() } else { self.kinds.clone() };

        let mut specs = Vec::new();
        for kind in kinds {
            let mut spec =
                SweepSpec::standard(VistaContext::standard(kind), &ego_name, ego.clone(), self.policy.clone());
            spec.arriving_profile = arriving.clone();
            spec.arriving_profile_name = arriving_name.clone();
            spec.refine = self.refine;
            if let Some(dt) = self.dt {
                spec.dt = dt;
            }
            if let Some(t) = self.t_max {
                spec.t_max = t;
            }
            if let Some(l) = self.vehicle_length {
                spec.vehicle_length = l;
            }
            apply_grid(&mut spec.grid, &self.grid).with_context(|| format!("grid for {kind}"))?;
            check_spec(&spec).with_context(|| format!("context {kind}"))?;
            specs.push(spec);
        }
        Ok(specs)
    }
}

fn apply_grid(grid: &mut GridSpec, o: &GridOverride) -> Result<()> {
    if let Some(v) = o.axis_max {
        grid.axis_max = v;
    }
    if let Some(v) = o.initial_step {
        grid.initial_step = v;
    }
    if let Some(v) = o.refine_step {
        grid.refine_step = v;
    }
    if let Some(v) = &o.speeds {
        grid.speeds = v.clone();
    }
    if !(grid.axis_max >= 0.0) {
        bail!("axis_max must be non-negative");
    }
    if !(grid.initial_step > 0.0 && grid.refine_step > 0.0) {
        bail!("initial_step and refine_step must be positive");
    }
    if grid.refine_step > grid.initial_step {
        bail!("refine_step must not exceed initial_step");
    }
    if grid.speeds.is_empty() || grid.speeds.iter().any(|v| !(*v >= 0.0)) {
        bail!("speeds must be a non-empty list of non-negative values");
    }
    Ok(())
}

/// Everything that can go wrong before the first tick.
pub fn check_spec(spec: &SweepSpec) -> Result<()> {
    let cases = spec.coarse_cases()?;
    let first = cases.first().ok_or_else(|| anyhow!("grid is empty"))?;
    spec.scenario(first).validate()?;
    for &v_e in &spec.grid.speeds {
        critical_values(&spec.context, &spec.ego_profile, v_e)?;
    }
    validate_cases(spec, &cases)?;
    Ok(())
}
