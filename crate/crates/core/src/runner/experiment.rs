//! Engine execution: turns a resolved configuration into trajectory
//! records, density snapshots and barrier series.

use std::path::{Path, PathBuf};

use super::compare::{compare_trajectories, ComparisonReport, TrajectorySet};
use super::config::{fmt, Engine, ExperimentConfig};
use super::output::{self, Manifest, PlotKind};
use super::RunError;
use crate::analytic::{effective_barrier, CoherentModel, TwoStateModel, REPORTED_BARRIER_WAVENUMBER};
use crate::dvr::{
    build_hamiltonian, eigensolve, evaluate_fbr, integrate_pilot_trajectories, DvrError, DvrEvolution, DvrState, PilotOptions,
    SpectralDecomposition,
};
use crate::lagrangian::{Dynamics, DynamicsError, MwlsSettings, StepController};
use crate::qcore::{init_gaussian_ensemble, Ensemble, HARTREE_TO_WAVENUMBER};
use num_complex::Complex64;

/// Per-element quantities at one sample time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub potential: Vec<f64>,
    pub action: Vec<f64>,
    pub log_jacobian: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Frame {
    fn with_capacity(t: f64, n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t,
            x: v(),
            v: v(),
            rho: v(),
            q: v(),
            potential: v(),
            action: v(),
            log_jacobian: v(),
            energy: v(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub frames: Vec<Frame>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn to_set(&self) -> TrajectorySet {
        TrajectorySet {
            times: self.times(),
            positions: self.frames.iter().map(|f| f.x.clone()).collect(),
        }
    }
}

/// `x, ρ, Q, V` on a spatial sample at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub potential: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSample {
    pub t: f64,
    /// `Q(0, t)`, hartree.
    pub q0: f64,
    /// `Q(0, t) + V_b`, cm⁻¹.
    pub v_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Crossing { t: f64, min_spacing: f64 },
    Stiffness { t: f64, dt: f64 },
    DegenerateFit { t: f64, reason: String },
    LeftBox { t: f64, label: usize },
}

impl Termination {
    pub fn is_physics_terminal(&self) -> bool {
        !matches!(self, Termination::Completed)
    }

    pub fn describe(&self) -> String {
        match self {
            Termination::Completed => "t_end reached".into(),
            Termination::Crossing { t, min_spacing } => {
                format!("crossing detected after t = {t:.6} (min spacing {min_spacing:.3e})")
            }
            Termination::Stiffness { t, dt } => format!("stiffness at t = {t:.6}: dt fell to {dt:.3e}"),
            Termination::DegenerateFit { t, reason } => format!("degenerate fit at t = {t:.6}: {reason}"),
            Termination::LeftBox { t, label } => format!("trajectory {label} left the box at t = {t:.6}"),
        }
    }
}

/// Everything one engine produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineRun {
    pub engine: Engine,
    pub record: TrajectoryRecord,
    pub snapshots: Vec<DensitySnapshot>,
    pub barrier: Vec<BarrierSample>,
    pub termination: Termination,
    /// Engine-specific diagnostics for the manifest.
    pub diagnostics: Vec<(String, String)>,
}

fn engine_err(e: impl std::fmt::Display) -> RunError {
    RunError::Engine(e.to_string())
}

/// Analytic `b²/4a` for double-well configurations, hartree.
pub fn barrier_height(cfg: &ExperimentConfig) -> Option<f64> {
    cfg.potential().double_well_barrier()
}

fn v_eff_wavenumber(q0: f64, vb: f64) -> f64 {
    effective_barrier(q0, vb) * HARTREE_TO_WAVENUMBER
}

pub fn initial_ensemble(cfg: &ExperimentConfig) -> Result<Ensemble, RunError> {
    let s = &cfg.system;
    init_gaussian_ensemble(cfg.physical_system(), cfg.potential(), s.x0, s.beta, s.n_particles, s.span)
        .map_err(|e| RunError::Config(e.to_string()))
}

/// Sample times `0, Δ, 2Δ, …` up to and including `t_end`.
fn sample_times(interval: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / interval + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| k as f64 * interval).collect();
    if t_end - ts[n] > 1e-9 * interval {
        ts.push(t_end);
    }
    ts
}

fn is_snapshot_time(t: f64, interval: f64) -> bool {
    let k = (t / interval).round();
    (t - k * interval).abs() <= 1e-9 * interval.max(1.0)
}

pub fn simulate(cfg: &ExperimentConfig, engine: Engine) -> Result<EngineRun, RunError> {
    match engine {
        Engine::Mwls => simulate_mwls(cfg, true),
        Engine::Classical => simulate_mwls(cfg, false),
        Engine::Dvr => simulate_dvr(cfg),
        Engine::Analytic => simulate_analytic(cfg),
    }
}

fn mwls_frame(state: &crate::lagrangian::HydroState) -> Frame {
    let ens = &state.ensemble;
    let mut f = Frame::with_capacity(ens.t, ens.len());
    for (i, e) in ens.elements.iter().enumerate() {
        f.x.push(e.x);
        f.v.push(e.v);
        f.rho.push(e.density());
        f.q.push(state.fields.q[i]);
        f.potential.push(ens.potential.value(e.x));
        f.action.push(e.action);
        f.log_jacobian.push(e.log_jacobian);
        f.energy.push(state.fields.energy[i]);
    }
    f
}

fn mwls_snapshot(state: &crate::lagrangian::HydroState) -> DensitySnapshot {
    let f = mwls_frame(state);
    DensitySnapshot {
        t: f.t,
        x: f.x,
        rho: f.rho,
        q: f.q,
        potential: f.potential,
    }
}

fn simulate_mwls(cfg: &ExperimentConfig, quantum: bool) -> Result<EngineRun, RunError> {
    let engine = if quantum { Engine::Mwls } else { Engine::Classical };
    let settings = MwlsSettings::new(cfg.basis(), cfg.mwls.n_neighbors, quantum).map_err(engine_err)?;
    let dynamics = Dynamics::new(settings);
    let ens = initial_ensemble(cfg)?;
    let g0: Vec<f64> = ens.elements.iter().map(|e| e.g).collect();
    let vb = barrier_height(cfg);
    let mut state = dynamics.prepare(ens).map_err(engine_err)?;
    let i = &cfg.integration;
    let mut ctrl = match i.fixed_dt {
        Some(dt) => StepController::fixed(dt),
        None => StepController {
            dt: i.dt0,
            tol: i.tol,
            dt_min: i.dt_min,
            dt_max: i.dt_max,
            ..StepController::default()
        },
    };
    ctrl.validate().map_err(engine_err)?;

    let barrier_at = |state: &crate::lagrangian::HydroState| -> Result<Option<BarrierSample>, RunError> {
        let Some(vb) = vb else { return Ok(None) };
        if !quantum {
            return Ok(None);
        }
        let q0 = dynamics
            .quantum_potential_at(&state.ensemble, 0.0)
            .map_err(engine_err)?;
        Ok(Some(BarrierSample {
            t: state.t(),
            q0,
            v_eff: v_eff_wavenumber(q0, vb),
        }))
    };

    let mut record = TrajectoryRecord::default();
    let mut snapshots = Vec::new();
    let mut barrier = Vec::new();
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let (mut dt_lo, mut dt_hi) = (f64::INFINITY, 0.0f64);
    let mut norm_dev = 0.0f64;
    let mut duality_dev = 0.0f64;
    let mut termination = Termination::Completed;

    let mut observe = |state: &crate::lagrangian::HydroState,
                       record: &mut TrajectoryRecord,
                       snapshots: &mut Vec<DensitySnapshot>,
                       barrier: &mut Vec<BarrierSample>|
     -> Result<(), RunError> {
        record.frames.push(mwls_frame(state));
        if is_snapshot_time(state.t(), cfg.output.snapshot_interval) {
            snapshots.push(mwls_snapshot(state));
        }
        if let Some(b) = barrier_at(state)? {
            barrier.push(b);
        }
        norm_dev = norm_dev.max((state.ensemble.norm() - 1.0).abs());
        for (e, g0) in state.ensemble.elements.iter().zip(&g0) {
            duality_dev = duality_dev.max((e.g + e.log_jacobian - g0).abs());
        }
        Ok(())
    };

    observe(&state, &mut record, &mut snapshots, &mut barrier)?;
    'samples: for &target in sample_times(cfg.output.sample_interval, i.t_end).iter().skip(1) {
        while state.t() < target - 1e-9 * target.max(1.0) {
            match dynamics.adaptive_step_limited(&state, &mut ctrl, target) {
                Ok((next, diag)) => {
                    if diag.crossing_detected {
                        termination = Termination::Crossing {
                            t: state.t(),
                            min_spacing: diag.min_spacing,
                        };
                        break 'samples;
                    }
                    if diag.accepted {
                        accepted += 1;
                    } else {
                        rejected += 1;
                    }
                    dt_lo = dt_lo.min(diag.dt_used);
                    dt_hi = dt_hi.max(diag.dt_used);
                    state = next;
                }
                Err(DynamicsError::Stiffness { t, dt }) => {
                    termination = Termination::Stiffness { t, dt };
                    break 'samples;
                }
                Err(DynamicsError::Crossing { t, min_spacing, .. }) => {
                    termination = Termination::Crossing { t, min_spacing };
                    break 'samples;
                }
                Err(DynamicsError::Fit(e)) => {
                    termination = Termination::DegenerateFit {
                        t: state.t(),
                        reason: e.to_string(),
                    };
                    break 'samples;
                }
                Err(e) => return Err(engine_err(e)),
            }
        }
        // snap to the nominal sample time to keep output times exact
        state.ensemble.t = target;
        observe(&state, &mut record, &mut snapshots, &mut barrier)?;
    }
    if termination.is_physics_terminal() && record.frames.last().is_some_and(|f| f.t < state.t()) {
        observe(&state, &mut record, &mut snapshots, &mut barrier)?;
    }

    let diagnostics = vec![
        ("steps.accepted".into(), accepted.to_string()),
        ("steps.rejected".into(), rejected.to_string()),
        ("steps.dt_smallest".into(), fmt_opt(dt_lo)),
        ("steps.dt_largest".into(), fmt_opt(dt_hi)),
        ("steps.final_dt".into(), fmt(ctrl.dt)),
        ("norm.max_deviation".into(), fmt(norm_dev)),
        ("duality.max_deviation".into(), fmt(duality_dev)),
        ("final.t".into(), fmt(state.t())),
        ("final.min_spacing".into(), fmt(state.ensemble.min_spacing())),
    ];
    Ok(EngineRun {
        engine,
        record,
        snapshots,
        barrier,
        termination,
        diagnostics,
    })
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        fmt(v)
    } else {
        "none".into()
    }
}

/// Spectral data shared by DVR-based engines.
pub struct DvrSetup {
    pub spectrum: SpectralDecomposition,
    pub evolution: DvrEvolution,
    pub initial: DvrState,
}

/// Diagonalizes the configured Hamiltonian and builds the initial packet
/// `ψ ∝ exp(−β(x − x0)²/2)`.
pub fn dvr_setup(cfg: &ExperimentConfig) -> DvrSetup {
    let grid = cfg.dvr_grid();
    let sys = cfg.physical_system();
    let spectrum = eigensolve(&build_hamiltonian(&grid, &cfg.potential(), &sys));
    let (x0, beta) = (cfg.system.x0, cfg.system.beta);
    let initial = DvrState::from_fn(grid, |x| Complex64::new((-0.5 * beta * (x - x0) * (x - x0)).exp(), 0.0));
    let evolution = DvrEvolution::new(&initial, &spectrum, sys);
    DvrSetup {
        spectrum,
        evolution,
        initial,
    }
}

/// Shape of the density between the two wells at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierRegionFeatures {
    pub t: f64,
    /// Number of interior local minima of `ρ` in the region.
    pub local_minima: usize,
    /// Deepest interior local minimum relative to the global maximum of `ρ`
    /// (1 if there is none).
    pub min_contrast: f64,
}

/// Inspects `ρ` on the DVR grid restricted to `[lo, hi]`.
pub fn barrier_region_features(state: &DvrState, lo: f64, hi: f64) -> BarrierRegionFeatures {
    let rho = state.density();
    let xs = state.grid.points();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    let mut local_minima = 0;
    let mut min_contrast = 1.0f64;
    for j in 1..rho.len() - 1 {
        if xs[j] < lo || xs[j] > hi {
            continue;
        }
        if rho[j] < rho[j - 1] && rho[j] < rho[j + 1] {
            local_minima += 1;
            min_contrast = min_contrast.min(rho[j] / peak);
        }
    }
    BarrierRegionFeatures {
        t: state.t,
        local_minima,
        min_contrast,
    }
}

fn simulate_dvr(cfg: &ExperimentConfig) -> Result<EngineRun, RunError> {
    let setup = dvr_setup(cfg);
    let ev = &setup.evolution;
    let sys = cfg.physical_system();
    let pot = cfg.potential();
    let xs0 = initial_ensemble(cfg)?.positions();
    let opts = PilotOptions {
        t_end: cfg.integration.t_end,
        dt_out: cfg.output.sample_interval,
        step: cfg.dvr.rk4_step,
    };
    let mut termination = Termination::Completed;
    let traj = match integrate_pilot_trajectories(ev, &xs0, &opts) {
        Ok(t) => Some(t),
        Err(DvrError::TrajectoryExited { index, t, .. }) => {
            termination = Termination::LeftBox { t, label: index + 1 };
            None
        }
        Err(e) => return Err(engine_err(e)),
    };
    let vb = barrier_height(cfg);
    let times = sample_times(cfg.output.sample_interval, cfg.integration.t_end);

    let mut record = TrajectoryRecord::default();
    let mut floor_hits = 0usize;
    if let Some(traj) = &traj {
        floor_hits = traj.floor_hits.iter().sum();
        let mut rho0: Vec<f64> = Vec::new();
        for (s, &t) in traj.times.iter().enumerate() {
            let mut f = Frame::with_capacity(t, xs0.len());
            let coeffs = ev.fbr_at(t);
            for (i, &x) in traj.positions[s].iter().enumerate() {
                let jet = evaluate_fbr(&ev.grid, &coeffs, x);
                let rho = jet.density();
                let q = jet.quantum_potential(&sys);
                let v = traj.velocities[s][i];
                let vx = pot.value(x);
                if s == 0 {
                    rho0.push(rho);
                }
                f.x.push(x);
                f.v.push(v);
                f.rho.push(rho);
                f.q.push(q);
                f.potential.push(vx);
                f.action.push(jet.psi.arg());
                f.log_jacobian.push((rho0[i] / rho).ln());
                f.energy.push(0.5 * sys.mass() * v * v + vx + q);
            }
            record.frames.push(f);
        }
    }

    let mut snapshots = Vec::new();
    let mut barrier = Vec::new();
    let mut features = Vec::new();
    let mut norm_dev = 0.0f64;
    let (lo, hi) = match pot.double_well_minimum() {
        Some(xm) => (-xm, xm),
        None => (cfg.dvr.x_left, cfg.dvr.x_right),
    };
    for &t in &times {
        let state = ev.state_at(t);
        norm_dev = norm_dev.max((state.norm() - 1.0).abs());
        if is_snapshot_time(t, cfg.output.snapshot_interval) {
            let coeffs = ev.fbr_at(t);
            let grid = state.grid;
            let mut snap = DensitySnapshot {
                t,
                x: grid.points(),
                rho: state.density(),
                q: Vec::with_capacity(grid.n_points()),
                potential: grid.points().iter().map(|&x| pot.value(x)).collect(),
            };
            for &x in &snap.x {
                snap.q.push(evaluate_fbr(&grid, &coeffs, x).quantum_potential(&sys));
            }
            snapshots.push(snap);
        }
        if let Some(vb) = vb {
            let q0 = ev.psi_jet(t, 0.0).map_err(engine_err)?.quantum_potential(&sys);
            barrier.push(BarrierSample {
                t,
                q0,
                v_eff: v_eff_wavenumber(q0, vb),
            });
            features.push(barrier_region_features(&state, lo, hi));
        }
    }

    let e = &setup.spectrum.eigenvalues;
    let mut diagnostics = vec![
        ("spectrum.e0_cm".to_string(), format!("{:.6}", e[0] * HARTREE_TO_WAVENUMBER)),
        ("spectrum.e1_cm".to_string(), format!("{:.6}", e[1] * HARTREE_TO_WAVENUMBER)),
        (
            "spectrum.half_splitting_cm".to_string(),
            format!("{:.6}", 0.5 * (e[1] - e[0]) * HARTREE_TO_WAVENUMBER),
        ),
        ("spectrum.active_modes".to_string(), ev.active_modes().to_string()),
        ("norm.max_deviation".to_string(), fmt(norm_dev)),
        ("pilot.density_floor_hits".to_string(), floor_hits.to_string()),
    ];
    if !features.is_empty() {
        let onset = features.iter().find(|f| f.local_minima > 0);
        let deepest = features
            .iter()
            .min_by(|a, b| a.min_contrast.total_cmp(&b.min_contrast))
            .expect("non-empty");
        diagnostics.push((
            "density.barrier_region".into(),
            format!("[{}, {}]", fmt(lo), fmt(hi)),
        ));
        diagnostics.push((
            "density.first_interior_minimum_t".into(),
            onset.map_or_else(|| "none".into(), |f| fmt(f.t)),
        ));
        diagnostics.push(("density.deepest_minimum_t".into(), fmt(deepest.t)));
        diagnostics.push(("density.deepest_minimum_contrast".into(), fmt(deepest.min_contrast)));
    }
    Ok(EngineRun {
        engine: Engine::Dvr,
        record,
        snapshots,
        barrier,
        termination,
        diagnostics,
    })
}

fn simulate_analytic(cfg: &ExperimentConfig) -> Result<EngineRun, RunError> {
    let times = sample_times(cfg.output.sample_interval, cfg.integration.t_end);
    let m = cfg.system.mass;
    let mut run = EngineRun {
        engine: Engine::Analytic,
        record: TrajectoryRecord::default(),
        snapshots: Vec::new(),
        barrier: Vec::new(),
        termination: Termination::Completed,
        diagnostics: Vec::new(),
    };
    match cfg.system.potential {
        super::config::PotentialConfig::Harmonic { omega } => {
            let model = CoherentModel::new(m, omega, cfg.system.x0).map_err(engine_err)?;
            let pot = cfg.potential();
            let xs0 = initial_ensemble(cfg)?.positions();
            let norm = (model.beta() / std::f64::consts::PI).sqrt();
            for &t in &times {
                let mut f = Frame::with_capacity(t, xs0.len());
                for &xs in &xs0 {
                    let x = model.trajectory(xs, t);
                    let (s, e) = model.action_energy(x, t);
                    f.x.push(x);
                    f.v.push(model.velocity(t));
                    f.rho.push(norm * model.density(x, t));
                    f.q.push(model.quantum_potential(x, t));
                    f.potential.push(pot.value(x));
                    f.action.push(s);
                    f.log_jacobian.push(0.0);
                    f.energy.push(e);
                }
                if is_snapshot_time(t, cfg.output.snapshot_interval) {
                    run.snapshots.push(DensitySnapshot {
                        t,
                        x: f.x.clone(),
                        rho: f.rho.clone(),
                        q: f.q.clone(),
                        potential: f.potential.clone(),
                    });
                }
                run.record.frames.push(f);
            }
            run.diagnostics.push(("model".into(), "coherent state".into()));
        }
        super::config::PotentialConfig::DoubleWell { .. } => {
            let setup = dvr_setup(cfg);
            let e = &setup.spectrum.eigenvalues;
            let model = TwoStateModel::from_double_well(&cfg.potential(), m, e[0], e[1]).map_err(engine_err)?;
            let vb = barrier_height(cfg).expect("double well");
            for &t in &times {
                let q0 = model.q_barrier(t);
                run.barrier.push(BarrierSample {
                    t,
                    q0,
                    v_eff: v_eff_wavenumber(q0, vb),
                });
            }
            let (lo, hi) = model.q_barrier_envelope();
            run.diagnostics.extend([
                ("model".to_string(), "two-state doublet".to_string()),
                ("two_state.omega0".to_string(), fmt(model.omega0)),
                ("two_state.omega_split".to_string(), fmt(model.omega_split)),
                (
                    "two_state.v_eff_envelope_cm".to_string(),
                    format!("{:.3} {:.3}", v_eff_wavenumber(lo, vb), v_eff_wavenumber(hi, vb)),
                ),
            ]);
        }
    }
    Ok(run)
}

/// What a finished run produced on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub primary: Termination,
    pub files: Vec<PathBuf>,
    pub comparison: Option<ComparisonReport>,
}

impl RunSummary {
    pub fn is_physics_terminal(&self) -> bool {
        self.primary.is_physics_terminal()
    }
}

fn engine_files(run: &EngineRun, dir: &Path, prefix: &str, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let mut emit = |kind: PlotKind, name: &str| -> Result<(), RunError> {
        let path = dir.join(format!("{prefix}{name}"));
        output::emit_plot_data(run, kind, &path)?;
        files.push(path);
        Ok(())
    };
    emit(PlotKind::Records, "records.dat")?;
    emit(PlotKind::Trajectories, "trajectories.dat")?;
    emit(PlotKind::DensitySnapshots, "density.dat")?;
    if !run.barrier.is_empty() {
        emit(PlotKind::BarrierSeries, "barrier.dat")?;
    }
    Ok(())
}

fn describe_run(manifest: &mut Manifest, prefix: &str, run: &EngineRun) {
    manifest.put(&format!("{prefix}termination"), run.termination.describe());
    match run.termination {
        Termination::Crossing { t, .. } => manifest.put(&format!("{prefix}crossing_onset"), fmt(t)),
        _ => manifest.put(&format!("{prefix}crossing_onset"), "none".into()),
    }
    for (k, v) in &run.diagnostics {
        manifest.put(&format!("{prefix}{k}"), v.clone());
    }
}

/// Runs the configured engine (and comparison, if requested), writing all
/// outputs and a manifest into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut manifest = Manifest::default();
    for (k, v) in cfg.manifest_entries() {
        manifest.put(&k, v);
    }
    if let Some(vb) = barrier_height(cfg) {
        let cm = vb * HARTREE_TO_WAVENUMBER;
        manifest.put("barrier.vb_analytic_hartree", fmt(vb));
        manifest.put("barrier.vb_analytic_cm", format!("{cm:.4}"));
        manifest.put("barrier.vb_reported_cm", fmt(REPORTED_BARRIER_WAVENUMBER));
        manifest.put(
            "barrier.vb_discrepancy_cm",
            format!("{:.4}", REPORTED_BARRIER_WAVENUMBER - cm),
        );
        manifest.put("barrier.v_eff_uses", "analytic b^2/4a".into());
    }

    let primary = simulate(cfg, cfg.engine)?;
    let mut files = Vec::new();
    engine_files(&primary, dir, "", &mut files)?;
    describe_run(&mut manifest, "result.", &primary);

    let mut comparison = None;
    if let Some(c) = &cfg.compare {
        let other = simulate(cfg, c.against)?;
        let prefix = format!("{}_", c.against.name());
        engine_files(&other, dir, &prefix, &mut files)?;
        describe_run(&mut manifest, &format!("reference.{}.", c.against.name()), &other);
        let report = compare_trajectories(
            &primary.record.to_set(),
            &other.record.to_set(),
            (c.window_start, c.window_end),
            &c.highlight,
        )?;
        let path = dir.join("comparison.dat");
        output::write_comparison(&report, &primary.record.to_set(), &other.record.to_set(), &path)?;
        files.push(path);
        for &k in &report.highlighted {
            if let Some(p) = report.pair(k) {
                manifest.put(
                    &format!("comparison.trajectory_{k}"),
                    format!(
                        "max {:.6e} at t = {:.3}, rms {:.6e}",
                        p.max_deviation, p.t_at_max, p.rms_deviation
                    ),
                );
            }
        }
        let worst = report
            .pairs
            .iter()
            .max_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation))
            .expect("non-empty");
        manifest.put(
            "comparison.worst",
            format!("trajectory {} max {:.6e}", worst.label, worst.max_deviation),
        );
        comparison = Some(report);
    }

    let path = dir.join("manifest.txt");
    manifest.write(&path)?;
    files.push(path);
    Ok(RunSummary {
        directory: dir.to_path_buf(),
        primary: primary.termination,
        files,
        comparison,
    })
}
