//! Run configuration files.

use std::path::{Path, PathBuf};

use qreflect::experiments::{preset, Preset, ScenarioSpec};
use qreflect::params::{ParameterSet, Species, TrapConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Species and trap selection for `params` and `planewave`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametersSection {
    pub preset: Option<String>,
    pub species: Option<Species>,
    pub trap: Option<TrapConfig>,
    pub atoms: Option<f64>,
    pub n_c: Option<f64>,
}

/// Per-run resolution and timing overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub v: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub dx_max: Option<f64>,
    pub kh: Option<f64>,
    pub n_r: Option<usize>,
    pub atoms: Option<f64>,
    /// Relax every resolution knob by this factor.
    pub coarse: Option<f64>,
}

impl Overrides {
    /// Later values win.
    pub fn merge(&mut self, other: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(v, dt, t_end, dx_max, kh, n_r, atoms, coarse);
    }

    pub fn apply(&self, s: &mut ScenarioSpec) {
        if let Some(f) = self.coarse {
            *s = s.coarsened(f);
        }
        if let Some(v) = self.v {
            *s = s.with_velocity(v);
        }
        if let Some(dt) = self.dt {
            s.dt = dt;
        }
        if let Some(t) = self.t_end {
            s.t_end = t;
        }
        if let Some(dx) = self.dx_max {
            s.grid.dx_max = dx;
        }
        if let Some(kh) = self.kh {
            s.grid.kh = kh;
        }
        if let Some(n) = self.n_r {
            s.grid.n_r = n;
        }
        if let Some(n) = self.atoms {
            s.n_atoms = n;
        }
    }
}

/// One file fully determines a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario preset name.
    pub preset: Option<String>,
    /// Restrict a multi-family preset to one family label.
    pub family: Option<String>,
    /// Inline scenario; replaces the preset's families.
    pub scenario: Option<ScenarioSpec>,
    pub velocities: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub parameters: ParametersSection,
    #[serde(default)]
    pub overrides: Overrides,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Scenario families after presets and overrides.
    pub fn resolve(&self) -> Result<Preset, CliError> {
        let mut p = match (&self.scenario, &self.preset) {
            (Some(s), _) => Preset {
                name: s.name.clone(),
                families: vec![(None, s.clone())],
                velocities: vec![s.v],
            },
            (None, Some(name)) => preset(name)?,
            (None, None) => {
                return Err(CliError::Config(
                    "no scenario given: set 'preset' or an inline [scenario] table".into(),
                ))
            }
        };
        if let Some(f) = &self.family {
            p.families.retain(|(label, _)| label.as_deref() == Some(f.as_str()));
            if p.families.is_empty() {
                return Err(CliError::Config(format!("preset '{}' has no family '{f}'", p.name)));
            }
        }
        for (_, s) in p.families.iter_mut() {
            self.overrides.apply(s);
        }
        if let Some(vs) = &self.velocities {
            p.velocities = vs.clone();
        }
        if let Some(v) = self.overrides.v {
            p.velocities = vec![v];
        }
        Ok(p)
    }

    /// Species, trap and critical number for the parameter table.
    pub fn parameter_set(&self) -> Result<ParameterSet, CliError> {
        let sec = &self.parameters;
        let mut set = match &sec.preset {
            Some(name) => ParameterSet::preset(name)?,
            None if sec.species.is_some() && sec.trap.is_some() => ParameterSet {
                species: sec.species.clone().expect("checked"),
                trap: sec.trap.expect("checked"),
                n_c: None,
            },
            None => ParameterSet::preset("rb85-jila")?,
        };
        if let Some(s) = &sec.species {
            set.species = s.clone();
        }
        if let Some(t) = sec.trap {
            set.trap = t;
        }
        if sec.n_c.is_some() {
            set.n_c = sec.n_c;
        }
        Ok(set)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Resolved families echoed to `resolved_config.toml`.
#[derive(Debug, Serialize)]
pub struct Resolved<'a> {
    pub preset: &'a str,
    pub velocities_mps: &'a [f64],
    pub family: Vec<ResolvedFamily<'a>>,
}

#[derive(Debug, Serialize)]
pub struct ResolvedFamily<'a> {
    pub label: &'a str,
    pub scenario: &'a ScenarioSpec,
}

pub fn write_resolved(dir: &Path, p: &Preset) -> Result<(), CliError> {
    let r = Resolved {
        preset: &p.name,
        velocities_mps: &p.velocities,
        family: p
            .families
            .iter()
            .map(|(l, s)| ResolvedFamily {
                label: l.as_deref().unwrap_or(""),
                scenario: s,
            })
            .collect(),
    };
    let text = toml::to_string(&r).map_err(|e| CliError::Config(format!("serializing resolved config: {e}")))?;
    std::fs::write(dir.join("resolved_config.toml"), text)?;
    Ok(())
}
