//! Experiment configuration: TOML sections with strict keys, command-line
//! overrides, and resolution of every default into an explicit value.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::RunError;
use crate::dvr::{resolve_mass, DvrGrid, MassResolution};
use crate::mwls::{BasisFamily, BasisSpec};
use crate::qcore::{default_span, PhysicalSystem, Potential, HARTREE_TO_WAVENUMBER};

/// Lowest doublet quoted for the double well `0.007x⁴ − 0.01x²`, cm⁻¹.
pub const REFERENCE_DOUBLET: [f64; 2] = [-369.827, -313.918];
/// Candidate masses are accepted when they reproduce the doublet this
/// closely, cm⁻¹.
pub const MASS_MATCH_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Mwls,
    Dvr,
    Classical,
    Analytic,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Mwls => "mwls",
            Engine::Dvr => "dvr",
            Engine::Classical => "classical",
            Engine::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Harmonic,
    DoubleWell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisName {
    Monomial,
    Hermite,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    engine: Option<Engine>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    integration: RawIntegration,
    #[serde(default)]
    mwls: RawMwls,
    #[serde(default)]
    dvr: RawDvr,
    #[serde(default)]
    output: RawOutput,
    compare: Option<RawCompare>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    potential: Option<PotentialKind>,
    mass: Option<f64>,
    omega: Option<f64>,
    period: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    x0: Option<f64>,
    beta: Option<f64>,
    coherent: Option<bool>,
    n_particles: Option<usize>,
    span: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    dt0: Option<f64>,
    tol: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    t_end: Option<f64>,
    fixed_dt: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMwls {
    order: Option<usize>,
    n_neighbors: Option<usize>,
    basis: Option<BasisName>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDvr {
    n_points: Option<usize>,
    x_left: Option<f64>,
    x_right: Option<f64>,
    rk4_step: Option<f64>,
    mass_candidates: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    sample_interval: Option<f64>,
    snapshot_interval: Option<f64>,
    directory: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    against: Engine,
    window_start: Option<f64>,
    window_end: Option<f64>,
    highlight: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialConfig {
    Harmonic { omega: f64 },
    DoubleWell { a: f64, b: f64 },
}

/// How the particle mass was fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum MassSource {
    Explicit,
    Default,
    /// Chosen by matching the DVR doublet against [`REFERENCE_DOUBLET`].
    Resolved(MassResolution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub potential: PotentialConfig,
    pub mass: f64,
    pub mass_source: MassSource,
    pub x0: f64,
    pub beta: f64,
    pub coherent: bool,
    pub n_particles: usize,
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub dt0: f64,
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Disables step-size adaptation.
    pub fixed_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwlsConfig {
    pub order: usize,
    pub n_neighbors: usize,
    pub basis: BasisFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvrConfig {
    pub n_points: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub rk4_step: f64,
    pub mass_candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub sample_interval: f64,
    pub snapshot_interval: f64,
    pub directory: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub against: Engine,
    pub window_start: f64,
    pub window_end: f64,
    /// 1-based trajectory labels, counted from the left.
    pub highlight: Vec<usize>,
}

/// A configuration with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub engine: Engine,
    pub system: SystemConfig,
    pub integration: IntegrationConfig,
    pub mwls: MwlsConfig,
    pub dvr: DvrConfig,
    pub output: OutputConfig,
    pub compare: Option<CompareConfig>,
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, RunError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

/// Parses `section.key=value` (or `key=value` at the top level). The value is
/// read as a TOML literal, falling back to a bare string.
pub fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), RunError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not key=value")))?;
    let path: Vec<String> = path.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), RunError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{key}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Parses configuration text, applies overrides and resolves defaults.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, RunError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
    for spec in overrides {
        let (path, value) = parse_override(spec)?;
        apply_override(&mut table, &path, value)?;
    }
    let raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
    resolve(raw)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, RunError> {
    let name = raw.name.unwrap_or_else(|| "experiment".to_string());
    let engine = raw.engine.unwrap_or(Engine::Mwls);
    let s = raw.system;
    let kind = s.potential.unwrap_or(PotentialKind::Harmonic);
    let is_harmonic = kind == PotentialKind::Harmonic;

    let dvr = DvrConfig {
        n_points: s_or(raw.dvr.n_points, if is_harmonic { 400 } else { 200 }),
        x_left: raw.dvr.x_left.unwrap_or(if is_harmonic { -8.0 } else { -2.5 }),
        x_right: raw.dvr.x_right.unwrap_or(if is_harmonic { 8.0 } else { 2.5 }),
        rk4_step: positive("dvr.rk4_step", raw.dvr.rk4_step.unwrap_or(0.1))?,
        mass_candidates: raw.dvr.mass_candidates.unwrap_or_else(|| vec![1836.15, 2000.0]),
    };
    let grid = DvrGrid::new(dvr.n_points, dvr.x_left, dvr.x_right).map_err(|e| config_err(e.to_string()))?;

    let potential = match kind {
        PotentialKind::Harmonic => {
            if s.a.is_some() || s.b.is_some() {
                return Err(config_err("system.a/system.b apply to the double well only"));
            }
            let omega = match (s.omega, s.period) {
                (Some(_), Some(_)) => return Err(config_err("give system.omega or system.period, not both")),
                (Some(w), None) => positive("system.omega", w)?,
                (None, p) => std::f64::consts::TAU / positive("system.period", p.unwrap_or(888.57))?,
            };
            PotentialConfig::Harmonic { omega }
        }
        PotentialKind::DoubleWell => {
            if s.omega.is_some() || s.period.is_some() {
                return Err(config_err("system.omega/system.period apply to the harmonic well only"));
            }
            let b = s.b.unwrap_or(0.01);
            if !(b.is_finite() && b > 0.0) {
                return Err(config_err("system.b must be positive"));
            }
            PotentialConfig::DoubleWell {
                a: positive("system.a", s.a.unwrap_or(0.007))?,
                b,
            }
        }
    };

    let (mass, mass_source) = match (s.mass, &potential) {
        (Some(m), _) => (positive("system.mass", m)?, MassSource::Explicit),
        (None, PotentialConfig::Harmonic { .. }) => (2000.0, MassSource::Default),
        (None, PotentialConfig::DoubleWell { a, b }) => {
            for &m in &dvr.mass_candidates {
                positive("dvr.mass_candidates", m)?;
            }
            let pot = Potential::double_well(*a, *b).map_err(|e| config_err(e.to_string()))?;
            let res = resolve_mass(
                &grid,
                &pot,
                &dvr.mass_candidates,
                REFERENCE_DOUBLET,
                HARTREE_TO_WAVENUMBER,
                MASS_MATCH_TOLERANCE,
            )
            .map_err(|e| config_err(e.to_string()))?;
            (res.adopted_mass(), MassSource::Resolved(res))
        }
    };

    let coherent = s.coherent.unwrap_or(false);
    let beta = match (&potential, coherent, s.beta) {
        (_, true, Some(_)) => return Err(config_err("system.coherent fixes beta; drop system.beta")),
        (PotentialConfig::Harmonic { omega }, true, None) => mass * omega,
        (PotentialConfig::DoubleWell { .. }, true, None) => {
            return Err(config_err("system.coherent applies to the harmonic well only"))
        }
        (_, false, Some(b)) => positive("system.beta", b)?,
        (PotentialConfig::Harmonic { .. }, false, None) => 0.3,
        (PotentialConfig::DoubleWell { b, .. }, false, None) => (4.0 * b * mass).sqrt(),
    };
    let x0 = match (&potential, s.x0) {
        (_, Some(x)) => x,
        (PotentialConfig::Harmonic { .. }, None) => 3.0,
        (PotentialConfig::DoubleWell { a, b }, None) => (b / (2.0 * a)).sqrt(),
    };
    let n_particles = s_or(s.n_particles, 100);
    if n_particles < 2 {
        return Err(config_err("system.n_particles must be at least 2"));
    }
    let span = positive("system.span", s.span.unwrap_or_else(|| default_span(beta)))?;
    let system = SystemConfig {
        potential,
        mass,
        mass_source,
        x0,
        beta,
        coherent,
        n_particles,
        span,
    };

    let i = raw.integration;
    let default_t_end = match system.potential {
        PotentialConfig::Harmonic { omega } => std::f64::consts::TAU / omega,
        PotentialConfig::DoubleWell { .. } => 1000.0,
    };
    let integration = IntegrationConfig {
        dt0: positive("integration.dt0", i.dt0.unwrap_or(0.1))?,
        tol: positive("integration.tol", i.tol.unwrap_or(1e-6))?,
        dt_min: positive("integration.dt_min", i.dt_min.unwrap_or(1e-4))?,
        dt_max: positive("integration.dt_max", i.dt_max.unwrap_or(5.0))?,
        t_end: positive("integration.t_end", i.t_end.unwrap_or(default_t_end))?,
        fixed_dt: i.fixed_dt.map(|d| positive("integration.fixed_dt", d)).transpose()?,
    };
    if !(integration.dt_min <= integration.dt0 && integration.dt0 <= integration.dt_max) {
        return Err(config_err("integration needs dt_min <= dt0 <= dt_max"));
    }

    let order = s_or(raw.mwls.order, 4);
    let basis = match raw.mwls.basis.unwrap_or(BasisName::Hermite) {
        BasisName::Monomial => BasisFamily::Monomial,
        BasisName::Hermite => BasisFamily::Hermite,
    };
    let spec = BasisSpec::new(order, basis).map_err(|e| config_err(e.to_string()))?;
    let n_neighbors = s_or(raw.mwls.n_neighbors, spec.default_neighbors());
    if n_neighbors < order + 2 || n_neighbors >= n_particles {
        return Err(config_err(format!(
            "mwls.n_neighbors = {n_neighbors} must lie in [{}, {}]",
            order + 2,
            n_particles - 1
        )));
    }
    let mwls = MwlsConfig {
        order,
        n_neighbors,
        basis,
    };

    let output = OutputConfig {
        sample_interval: positive("output.sample_interval", raw.output.sample_interval.unwrap_or(5.0))?,
        snapshot_interval: positive("output.snapshot_interval", raw.output.snapshot_interval.unwrap_or(100.0))?,
        directory: raw
            .output
            .directory
            .unwrap_or_else(|| PathBuf::from("runs").join(&name)),
    };

    let compare = match raw.compare {
        None => None,
        Some(c) => {
            if c.against == engine {
                return Err(config_err("compare.against must differ from engine"));
            }
            let highlight = c.highlight.unwrap_or_else(|| vec![9, 38, 39, 50]);
            if let Some(bad) = highlight.iter().find(|&&k| k == 0 || k > n_particles) {
                return Err(config_err(format!("compare.highlight label {bad} out of 1..={n_particles}")));
            }
            let window_start = c.window_start.unwrap_or(0.0);
            let window_end = c.window_end.unwrap_or(integration.t_end);
            if !(window_end > window_start) {
                return Err(config_err("compare window is empty"));
            }
            Some(CompareConfig {
                against: c.against,
                window_start,
                window_end,
                highlight,
            })
        }
    };

    let wants_analytic =
        engine == Engine::Analytic || compare.as_ref().is_some_and(|c| c.against == Engine::Analytic);
    if wants_analytic && matches!(system.potential, PotentialConfig::Harmonic { .. }) && !system.coherent {
        return Err(config_err("the analytic engine needs system.coherent = true for the harmonic well"));
    }

    Ok(ExperimentConfig {
        name,
        engine,
        system,
        integration,
        mwls,
        dvr,
        output,
        compare,
    })
}

fn s_or(v: Option<usize>, default: usize) -> usize {
    v.unwrap_or(default)
}

impl ExperimentConfig {
    pub fn physical_system(&self) -> PhysicalSystem {
        PhysicalSystem::new(self.system.mass).expect("validated mass")
    }

    pub fn potential(&self) -> Potential {
        match self.system.potential {
            PotentialConfig::Harmonic { omega } => {
                Potential::harmonic(&self.physical_system(), omega, 0.0).expect("validated omega")
            }
            PotentialConfig::DoubleWell { a, b } => Potential::double_well(a, b).expect("validated a, b"),
        }
    }

    pub fn dvr_grid(&self) -> DvrGrid {
        DvrGrid::new(self.dvr.n_points, self.dvr.x_left, self.dvr.x_right).expect("validated grid")
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::new(self.mwls.order, self.mwls.basis).expect("validated basis")
    }

    pub fn is_double_well(&self) -> bool {
        matches!(self.system.potential, PotentialConfig::DoubleWell { .. })
    }

    /// Every resolved parameter as ordered `key = value` pairs.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("name", self.name.clone());
        put("engine", self.engine.name().into());
        let s = &self.system;
        match s.potential {
            PotentialConfig::Harmonic { omega } => {
                put("system.potential", "harmonic".into());
                put("system.omega", fmt(omega));
                put("system.period", fmt(std::f64::consts::TAU / omega));
            }
            PotentialConfig::DoubleWell { a, b } => {
                put("system.potential", "double-well".into());
                put("system.a", fmt(a));
                put("system.b", fmt(b));
            }
        }
        put("system.mass", fmt(s.mass));
        match &s.mass_source {
            MassSource::Explicit => put("system.mass_source", "explicit".into()),
            MassSource::Default => put("system.mass_source", "default".into()),
            MassSource::Resolved(r) => {
                put("system.mass_source", "resolved-from-doublet".into());
                put(
                    "mass_resolution.target_cm",
                    format!("{} {}", fmt(REFERENCE_DOUBLET[0]), fmt(REFERENCE_DOUBLET[1])),
                );
                put("mass_resolution.tolerance_cm", fmt(r.tolerance));
                put("mass_resolution.hartree_to_cm", fmt(HARTREE_TO_WAVENUMBER));
                for c in &r.candidates {
                    put(
                        &format!("mass_resolution.candidate.{}", c.mass),
                        format!(
                            "E+ = {:.3} cm-1, E- = {:.3} cm-1, max residual = {:.3} cm-1",
                            c.doublet[0], c.doublet[1], c.residual
                        ),
                    );
                }
                put("mass_resolution.adopted", fmt(r.adopted_mass()));
                put(
                    "mass_resolution.outcome",
                    if r.matched {
                        "matched within tolerance".into()
                    } else {
                        "no candidate within tolerance; nearest adopted, spectrum check limited to grid convergence"
                            .into()
                    },
                );
            }
        }
        put("system.x0", fmt(s.x0));
        put("system.beta", fmt(s.beta));
        put("system.coherent", s.coherent.to_string());
        put("system.n_particles", s.n_particles.to_string());
        put("system.span", fmt(s.span));
        put("system.trajectory_labels", "1-based, ordered left to right at t = 0".into());
        let i = &self.integration;
        put("integration.dt0", fmt(i.dt0));
        put("integration.tol", fmt(i.tol));
        put("integration.dt_min", fmt(i.dt_min));
        put("integration.dt_max", fmt(i.dt_max));
        put("integration.shrink", fmt(0.75));
        put("integration.grow", fmt(2.0));
        put("integration.t_end", fmt(i.t_end));
        put(
            "integration.fixed_dt",
            i.fixed_dt.map_or_else(|| "none".into(), fmt),
        );
        put("mwls.order", self.mwls.order.to_string());
        put("mwls.n_neighbors", self.mwls.n_neighbors.to_string());
        put(
            "mwls.basis",
            match self.mwls.basis {
                BasisFamily::Monomial => "monomial",
                BasisFamily::Hermite => "hermite",
            }
            .into(),
        );
        put("mwls.svd_cutoff", fmt(crate::mwls::SVD_RELATIVE_CUTOFF));
        put("mwls.edge_weight", fmt(crate::mwls::EDGE_WEIGHT));
        put("dvr.n_points", self.dvr.n_points.to_string());
        put("dvr.x_left", fmt(self.dvr.x_left));
        put("dvr.x_right", fmt(self.dvr.x_right));
        put("dvr.spacing", fmt(self.dvr_grid().spacing()));
        put("dvr.rk4_step", fmt(self.dvr.rk4_step));
        put("dvr.density_floor", fmt(crate::dvr::DENSITY_FLOOR));
        put(
            "dvr.mass_candidates",
            self.dvr
                .mass_candidates
                .iter()
                .map(|m| fmt(*m))
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("output.sample_interval", fmt(self.output.sample_interval));
        put("output.snapshot_interval", fmt(self.output.snapshot_interval));
        put("output.directory", self.output.directory.display().to_string());
        match &self.compare {
            None => put("compare.against", "none".into()),
            Some(c) => {
                put("compare.against", c.against.name().into());
                put("compare.window_start", fmt(c.window_start));
                put("compare.window_end", fmt(c.window_end));
                put(
                    "compare.highlight",
                    c.highlight.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
                );
            }
        }
        out
    }
}

/// Shortest round-trip representation.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}
