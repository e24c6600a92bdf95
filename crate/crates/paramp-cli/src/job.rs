//! Fully resolved run descriptions built from the configuration file and flags.

use std::fs;

use paramp::collapse::{CollapseSpec, Phenomenology};
use paramp::interferometer::{Bath, ExperimentConfig, Method};
use paramp::lossmodel::default_kappa_grid;
use paramp::Error;
use serde::{Deserialize, Serialize};

use crate::cli::{Command, Common};

/// Layout of the TOML configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub kappa_grid: Option<Vec<f64>>,
    pub points: Option<usize>,
    pub experiment: Option<ExperimentConfig>,
    pub collapse: Option<CollapseSpec>,
    pub fit: Option<FitMesh>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMesh {
    /// Gamma * dt_twpa values; the amplifier duration is set to value / Gamma.
    pub gamma_dt_grid: Vec<f64>,
    /// Bath temperatures, K.
    pub temperature_grid: Vec<f64>,
}

/// One resolved run; serialised into the manifest so it can be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Job {
    SweepKappa {
        config: ExperimentConfig,
        kappas: Vec<f64>,
    },
    CollapseSweep {
        spec: CollapseSpec,
        kappas: Vec<f64>,
    },
    Pattern {
        config: ExperimentConfig,
        points: usize,
    },
    Correlations {
        config: ExperimentConfig,
    },
    FitF {
        config: ExperimentConfig,
        kappas: Vec<f64>,
        mesh: Option<FitMesh>,
    },
    CompareReduced {
        config: ExperimentConfig,
        kappas: Vec<f64>,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::SweepKappa { .. } => "sweep-kappa",
            Job::CollapseSweep { .. } => "collapse-sweep",
            Job::Pattern { .. } => "pattern",
            Job::Correlations { .. } => "correlations",
            Job::FitF { .. } => "fit-f",
            Job::CompareReduced { .. } => "compare-reduced",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::CollapseSweep { spec, .. } => Some(spec.seed),
            _ => None,
        }
    }
}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

/// Parses "0.1,0.2,0.3" or "start:step:stop" (inclusive of stop).
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let num = |t: &str| -> anyhow::Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| config_error(format!("grid entry {t:?} is not a number")))
    };
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(config_error(format!(
                "range grid {s:?} must be start:step:stop"
            )));
        }
        let (a, h, b) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(config_error(format!(
                "range grid {s:?} needs step > 0 and stop >= start"
            )));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        // snap to 12 decimals so 0.1:0.1:0.3 yields 0.3, not 0.30000000000000004
        (0..=n)
            .map(|k| ((a + k as f64 * h) * 1e12).round() / 1e12)
            .collect()
    } else {
        s.split(',')
            .map(num)
            .collect::<anyhow::Result<Vec<f64>>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(config_error(format!("grid {s:?} is empty or not finite")));
    }
    Ok(grid)
}

fn load_file(c: &Common) -> anyhow::Result<FileConfig> {
    match &c.config {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| config_error(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn experiment(c: &Common, file: &FileConfig) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = file
        .experiment
        .clone()
        .unwrap_or_else(|| ExperimentConfig::lossless(0.0));
    if let Some(m) = c.method {
        cfg.method = m;
    }
    if let Some(n) = c.cutoff {
        cfg.cutoff = Some(n);
    }
    if let Some(k) = c.kappa {
        cfg.kappa_up = k;
        cfg.kappa_low = k;
    }
    if c.gamma.is_some() || c.temp.is_some() {
        let base = cfg.bath.unwrap_or(Bath {
            gamma: 0.0,
            temperature: 0.0,
        });
        cfg.bath = Some(Bath {
            gamma: c.gamma.unwrap_or(base.gamma),
            temperature: c.temp.unwrap_or(base.temperature),
        });
    }
    if let Some(w) = c.omega_signal {
        cfg.omega_signal = w;
    }
    if let Some(w) = c.omega_idler {
        cfg.omega_idler = w;
    }
    if let Some(t) = c.dt_twpa {
        cfg.durations.twpa = t;
    }
    if let Some(t) = c.dt_component {
        cfg.durations.hybrid1 = t;
        cfg.durations.phase_shifter = t;
        cfg.durations.hybrid2 = t;
    }
    Ok(cfg)
}

fn kappas(c: &Common, file: &FileConfig, default: Vec<f64>) -> anyhow::Result<Vec<f64>> {
    if let Some(k) = c.kappa {
        return Ok(vec![k]);
    }
    if let Some(g) = &c.kappa_grid {
        return parse_grid(g);
    }
    Ok(file.kappa_grid.clone().unwrap_or(default))
}

fn range(a: f64, h: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| ((a + k as f64 * h) * 1e12).round() / 1e12)
        .collect()
}

fn no_collapse_flags(c: &Common, name: &str) -> anyhow::Result<()> {
    if c.eta.is_some() || c.collapse.is_some() || c.samples.is_some() || c.estimator.is_some() {
        return Err(config_error(format!(
            "collapse flags do not apply to {name}"
        )));
    }
    Ok(())
}

/// Resolves a subcommand and its flags into a job.
pub fn build(command: &Command) -> anyhow::Result<Job> {
    let (c, kind) = match command {
        Command::SweepKappa(c) => (c, "sweep-kappa"),
        Command::CollapseSweep(c) => (c, "collapse-sweep"),
        Command::Pattern(c) => (c, "pattern"),
        Command::Correlations(c) => (c, "correlations"),
        Command::FitF(c) => (c, "fit-f"),
        Command::CompareReduced(c) => (c, "compare-reduced"),
        Command::Rerun { .. } => unreachable!("rerun is resolved from its manifest"),
    };
    let file = load_file(c)?;
    let cfg = experiment(c, &file)?;
    let job = match kind {
        "sweep-kappa" => {
            no_collapse_flags(c, kind)?;
            Job::SweepKappa {
                kappas: kappas(c, &file, range(0.1, 0.1, 12))?,
                config: cfg,
            }
        }
        "collapse-sweep" => {
            let mut spec = file
                .collapse
                .clone()
                .unwrap_or_else(|| CollapseSpec::new(Phenomenology::Coherent, 1.0));
            if let Some(p) = c.collapse {
                spec.phenomenology = p;
            }
            if let Some(e) = c.eta {
                spec.eta = e;
            }
            if let Some(e) = c.estimator {
                spec.estimator = e;
            }
            if let Some(n) = c.samples {
                spec.samples = n;
            }
            if let Some(t) = c.tol {
                spec.tol = t;
            }
            if let Some(s) = c.seed.or(file.seed) {
                spec.seed = s;
            }
            if cfg.bath.is_some_and(|b| b.gamma > 0.0) {
                return Err(config_error(
                    "collapse sweeps model lossless amplifiers; remove the loss rate",
                ));
            }
            Job::CollapseSweep {
                kappas: kappas(c, &file, range(0.25, 0.25, 10))?,
                spec,
            }
        }
        "pattern" => {
            no_collapse_flags(c, kind)?;
            Job::Pattern {
                points: c.points.or(file.points).unwrap_or(73),
                config: cfg,
            }
        }
        "correlations" => {
            no_collapse_flags(c, kind)?;
            Job::Correlations { config: cfg }
        }
        "fit-f" => {
            no_collapse_flags(c, kind)?;
            let mesh = match (&c.gamma_dt_grid, &c.temp_grid) {
                (Some(g), Some(t)) => Some(FitMesh {
                    gamma_dt_grid: parse_grid(g)?,
                    temperature_grid: parse_grid(t)?,
                }),
                (None, None) => file.fit.clone(),
                _ => {
                    return Err(config_error(
                        "fit-f mesh needs both --gamma-dt-grid and --temp-grid",
                    ))
                }
            };
            if cfg.bath.map_or(true, |b| b.gamma <= 0.0) {
                return Err(config_error("fit-f needs a positive loss rate (--gamma)"));
            }
            Job::FitF {
                kappas: kappas(c, &file, default_kappa_grid())?,
                config: ExperimentConfig {
                    method: Method::Reduced,
                    ..cfg
                },
                mesh,
            }
        }
        "compare-reduced" => {
            no_collapse_flags(c, kind)?;
            let mut config = cfg;
            config.cutoff = Some(config.cutoff.unwrap_or(5));
            config.method = if config.bath.is_some_and(|b| b.gamma > 0.0) {
                Method::FullLindblad
            } else {
                Method::FullPure
            };
            // both methods share one truncation; tails are reported, not enforced
            config.tail_limit = 1.0;
            Job::CompareReduced {
                kappas: kappas(c, &file, range(0.1, 0.1, 4))?,
                config,
            }
        }
        _ => unreachable!(),
    };
    Ok(job)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_lists_and_ranges() {
        assert_eq!(parse_grid("0.1, 0.5").unwrap(), vec![0.1, 0.5]);
        assert_eq!(parse_grid("0.1:0.1:0.3").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_grid("1:1:1").unwrap(), vec![1.0]);
        for bad in ["", "a", "0:0:1", "1:0.1:0", "0:1", "inf"] {
            assert!(parse_grid(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn default_ranges_are_snapped() {
        assert_eq!(range(0.1, 0.1, 4), vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn job_round_trips_through_toml() {
        let job = Job::CollapseSweep {
            spec: CollapseSpec::new(Phenomenology::Number, 0.5),
            kappas: vec![0.3, 1.0],
        };
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            job: Job,
        }
        let text = toml::to_string(&Wrap { job: job.clone() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.job, job);
        assert_eq!(job.name(), "collapse-sweep");
    }
}
