//! Run configuration: sectioned TOML with defaults, file values and flag overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonMode, ComparisonState};
use crate::diagnostics::DiagnosticOptions;
use crate::error::{Error, Result};
use crate::evolution::RunSettings;
use crate::fields::MeridionalGrid;
use crate::initial_data::DataParameters;
use crate::kernel_lab::DEFAULT_QUAD_TOL;

/// Grid centred on `r0` with half-widths given in units of `λ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_z: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_r: 257,
            n_z: 257,
            half_width: 12.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self, data: &DataParameters) -> Result<Arc<MeridionalGrid>> {
        let h = self.half_width * data.lambda0;
        Ok(Arc::new(MeridionalGrid::centered(data.r0, h, h, self.n_r, self.n_z)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub quad_tol: f64,
    pub monte_carlo_samples: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            quad_tol: DEFAULT_QUAD_TOL,
            monte_carlo_samples: 200_000,
            seed: 20240611,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub q0: f64,
    pub c0: f64,
    pub c: f64,
    pub kappa: f64,
    pub mode: ComparisonMode,
    pub t_max: f64,
    pub rtol: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            q0: 1.0,
            c0: 1.0,
            c: 1.0,
            kappa: 1.0,
            mode: ComparisonMode::Reduced,
            t_max: 100.0,
            rtol: 1e-10,
        }
    }
}

impl ComparisonConfig {
    pub fn state(&self) -> Result<ComparisonState> {
        ComparisonState::new(self.q0, self.c0, self.c, self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("qel-output"),
        }
    }
}

/// Full resolved configuration of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataParameters,
    pub grid: GridConfig,
    pub run: RunSettings,
    pub diagnostics: DiagnosticOptions,
    pub kernel: KernelConfig,
    pub comparison: ComparisonConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Every settable key as `(section, key)`.
    pub fn keys(&self) -> Result<Vec<(String, String)>> {
        let value = toml::Value::try_from(self).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::new();
        if let toml::Value::Table(t) = value {
            for (section, inner) in t {
                if let toml::Value::Table(inner) = inner {
                    out.extend(inner.keys().map(|k| (section.clone(), k.clone())));
                }
            }
        }
        Ok(out)
    }

    /// Set one key from its textual value. `key` is either `section.key` or a bare
    /// key (dashes or underscores) that is unique across sections.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let (section, name) = match key.split_once('.') {
            Some((s, k)) => (s.to_string(), k.to_string()),
            None => {
                let hits: Vec<_> = self.keys()?.into_iter().filter(|(_, k)| *k == key).collect();
                match hits.as_slice() {
                    [(s, k)] => (s.clone(), k.clone()),
                    [] => return Err(Error::InvalidParameters(format!("unknown configuration key `{key}`"))),
                    _ => {
                        let options: Vec<String> = hits.iter().map(|(s, k)| format!("{s}.{k}")).collect();
                        return Err(Error::InvalidParameters(format!(
                            "ambiguous configuration key `{key}`; use one of {}",
                            options.join(", ")
                        )));
                    }
                }
            }
        };
        let mut value = toml::Value::try_from(&*self).map_err(|e| Error::Format(e.to_string()))?;
        let slot = value
            .get_mut(&section)
            .and_then(|s| s.get_mut(&name))
            .ok_or_else(|| Error::InvalidParameters(format!("unknown configuration key `{section}.{name}`")))?;
        *slot = parse_like(slot, raw)
            .ok_or_else(|| Error::InvalidParameters(format!("cannot parse `{raw}` for `{section}.{name}`")))?;
        *self = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Write the resolved configuration together with the code version and the command.
    pub fn write_manifest(&self, path: &Path, command: &str) -> Result<()> {
        let body = format!(
            "# run manifest\nversion = \"{}\"\ncommand = {}\n\n{}",
            env!("CARGO_PKG_VERSION"),
            toml::Value::String(command.to_string()),
            self.to_toml_string()?
        );
        std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

fn parse_like(template: &toml::Value, raw: &str) -> Option<toml::Value> {
    use toml::Value;
    Some(match template {
        Value::Integer(_) => Value::Integer(raw.parse().ok()?),
        Value::Float(_) => Value::Float(raw.parse().ok()?),
        Value::Boolean(_) => Value::Boolean(raw.parse().ok()?),
        Value::String(_) => Value::String(raw.to_string()),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn three_layer_precedence() {
        let file = "[data]\nlambda0 = 0.04\nkappa = 0.2\n[run]\nt_final = 0.5\n";
        let mut c = RunConfig::from_toml_str(file).unwrap();
        c.set("t-final", "0.25").unwrap();
        c.set("grid.n_r", "129").unwrap();
        assert_eq!(c.data.lambda0, 0.04);
        assert_eq!(c.data.kappa, 0.2);
        assert_eq!(c.run.t_final, 0.25);
        assert_eq!(c.grid.n_r, 129);
        // untouched keys keep their defaults
        assert_eq!(c.data.r0, DataParameters::default().r0);
        assert_eq!(c.run.dt, RunSettings::default().dt);
    }

    #[test]
    fn bad_keys_and_values() {
        let mut c = RunConfig::default();
        assert!(c.set("no-such-key", "1").is_err());
        assert!(c.set("t-final", "abc").is_err());
        assert!(c.set("mode", "sideways").is_err());
        c.set("mode", "coupled").unwrap();
        assert_eq!(c.comparison.mode, ComparisonMode::Coupled);
        assert!(RunConfig::from_toml_str("[data]\nbogus = 1\n").is_err());
    }
}
