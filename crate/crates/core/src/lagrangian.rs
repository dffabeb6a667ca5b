//! Time evolution of a fluid-element ensemble.
//!
//! Each step is a kick–drift–kick velocity Verlet. Forces at the drifted
//! positions come from fresh MWLS fits of `g = ln ρ`; `g`, `log J` and the
//! action are advanced with the trapezoidal rule across the step. Because the
//! end-of-step divergence depends on the end-of-step velocity, which in turn
//! depends on the end-of-step density, the update is closed with one
//! predictor–corrector pass on the same fit operators.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::mwls::{
    quantum_force, quantum_potential, select_stencil, velocity_divergence, BasisSpec, FitError,
    FitResult, LocalFit,
};
use crate::qcore::Ensemble;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("trajectories {index} and {} crossed near t = {t} (spacing {min_spacing:e})", index + 1)]
    Crossing { t: f64, index: usize, min_spacing: f64 },
    #[error("time step underflow at t = {t}: dt = {dt:e} below the minimum")]
    Stiffness { t: f64, dt: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("invalid step controller: {0}")]
    InvalidController(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// How the fluid is differentiated and whether `Q` acts on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwlsSettings {
    pub basis: BasisSpec,
    pub n_neighbors: usize,
    /// `false` runs classical trajectories (`Q ≡ 0`); density is still
    /// transported as a passive field.
    pub quantum: bool,
}

impl MwlsSettings {
    pub fn new(basis: BasisSpec, n_neighbors: usize, quantum: bool) -> Result<Self, FitError> {
        if n_neighbors < basis.order() + 2 {
            return Err(FitError::InsufficientNeighbors {
                center: usize::MAX,
                neighbors: n_neighbors,
                order: basis.order() + 2,
            });
        }
        Ok(Self {
            basis,
            n_neighbors,
            quantum,
        })
    }
}

/// Per-element quantities derived from one set of fits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fields {
    pub q: Vec<f64>,
    pub accel: Vec<f64>,
    pub div_v: Vec<f64>,
    /// `L = ½mv² − V − Q`
    pub lagrangian: Vec<f64>,
    /// `E = ½mv² + V + Q`
    pub energy: Vec<f64>,
}

/// An ensemble together with the fields evaluated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroState {
    pub ensemble: Ensemble,
    pub fields: Fields,
}

impl HydroState {
    pub fn t(&self) -> f64 {
        self.ensemble.t
    }

    /// Energy `½mv² + V + Q` carried by element `i`.
    pub fn total_energy(&self, i: usize) -> f64 {
        self.fields.energy[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepController {
    pub dt: f64,
    pub tol: f64,
    pub shrink: f64,
    pub grow: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            dt: 0.1,
            tol: 1e-6,
            shrink: 0.75,
            grow: 2.0,
            dt_min: 1e-4,
            dt_max: 5.0,
        }
    }
}

impl StepController {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |s: &str| Err(DynamicsError::InvalidController(s.to_string()));
        if !(0.0 < self.shrink && self.shrink < 1.0 && self.grow > 1.0) {
            return bad("need 0 < shrink < 1 < grow");
        }
        if !(0.0 < self.dt_min && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return bad("need 0 < dt_min ≤ dt ≤ dt_max");
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    /// A controller that always takes `dt` and never adapts.
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt,
            tol: f64::INFINITY,
            shrink: 0.75,
            grow: 2.0,
            dt_min: dt,
            dt_max: dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub accepted: bool,
    pub max_rel_error: f64,
    pub dt_used: f64,
    pub crossing_detected: bool,
    pub min_spacing: f64,
}

/// The MWLS integrator.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics {
    pub settings: MwlsSettings,
}

/// Floors for the step-doubling error scales, in atomic units.
const SCALE_FLOOR_X: f64 = 1e-12;
const SCALE_FLOOR_V: f64 = 1e-10;
const SCALE_FLOOR_E: f64 = 1e-14;
const SCALE_FLOOR_RHO: f64 = 1e-300;

fn apply(ops: &[LocalFit], values: &[f64]) -> Result<Vec<FitResult>, FitError> {
    ops.iter().map(|op| op.fit_field(values)).collect()
}

impl Dynamics {
    pub fn new(settings: MwlsSettings) -> Self {
        Self { settings }
    }

    fn fit_operators(&self, ensemble: &Ensemble) -> Result<Vec<LocalFit>, FitError> {
        let xs = ensemble.positions();
        (0..xs.len())
            .into_par_iter()
            .map(|i| {
                let st = select_stencil(&xs, i, self.settings.n_neighbors)?;
                LocalFit::new(&st, &self.settings.basis)
            })
            .collect()
    }

    /// `(Q, −∂ₓQ)` per element from a log-density sample.
    fn quantum_terms(&self, ops: &[LocalFit], ensemble: &Ensemble, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>), FitError> {
        let n = g.len();
        if !self.settings.quantum {
            return Ok((vec![0.0; n], vec![0.0; n]));
        }
        let sys = ensemble.system;
        let jets = apply(ops, g)?;
        Ok(jets
            .iter()
            .map(|j| (quantum_potential(j, &sys), quantum_force(j, &sys)))
            .unzip())
    }

    fn accelerations(&self, ensemble: &Ensemble, qforce: &[f64]) -> Vec<f64> {
        let m = ensemble.system.mass();
        ensemble
            .elements
            .iter()
            .zip(qforce)
            .map(|(e, f)| (-ensemble.potential.gradient(e.x) + f) / m)
            .collect()
    }

    fn divergence(&self, ops: &[LocalFit], v: &[f64]) -> Result<Vec<f64>, FitError> {
        Ok(apply(ops, v)?.iter().map(velocity_divergence).collect())
    }

    fn assemble(&self, ensemble: &Ensemble, q: Vec<f64>, accel: Vec<f64>, div_v: Vec<f64>) -> Fields {
        let m = ensemble.system.mass();
        let (lagrangian, energy) = ensemble
            .elements
            .iter()
            .zip(&q)
            .map(|(e, &q)| {
                let kin = 0.5 * m * e.v * e.v;
                let v = ensemble.potential.value(e.x);
                (kin - v - q, kin + v + q)
            })
            .unzip();
        Fields {
            q,
            accel,
            div_v,
            lagrangian,
            energy,
        }
    }

    /// Evaluates every per-element field on a snapshot.
    pub fn evaluate(&self, ensemble: &Ensemble) -> Result<Fields, FitError> {
        let ops = self.fit_operators(ensemble)?;
        let g: Vec<f64> = ensemble.elements.iter().map(|e| e.g).collect();
        let v: Vec<f64> = ensemble.elements.iter().map(|e| e.v).collect();
        let (q, f) = self.quantum_terms(&ops, ensemble, &g)?;
        let accel = self.accelerations(ensemble, &f);
        let div_v = self.divergence(&ops, &v)?;
        Ok(self.assemble(ensemble, q, accel, div_v))
    }

    pub fn prepare(&self, ensemble: Ensemble) -> Result<HydroState, DynamicsError> {
        if let Some(index) = ensemble.first_crossing() {
            return Err(DynamicsError::Crossing {
                t: ensemble.t,
                index,
                min_spacing: ensemble.min_spacing(),
            });
        }
        let fields = self.evaluate(&ensemble)?;
        Ok(HydroState { ensemble, fields })
    }

    /// `a = (−∂ₓV − ∂ₓQ)/m` for every element.
    pub fn compute_accelerations(&self, ensemble: &Ensemble) -> Result<Vec<f64>, FitError> {
        let ops = self.fit_operators(ensemble)?;
        let g: Vec<f64> = ensemble.elements.iter().map(|e| e.g).collect();
        let (_, f) = self.quantum_terms(&ops, ensemble, &g)?;
        Ok(self.accelerations(ensemble, &f))
    }

    /// One velocity-Verlet step with trapezoidal transport of `g`, `log J`
    /// and the action.
    pub fn verlet_step(&self, state: &HydroState, dt: f64) -> Result<HydroState, DynamicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DynamicsError::InvalidStep(dt));
        }
        let start = &state.ensemble;
        let f0 = &state.fields;
        let n = start.len();

        let mut next = start.clone();
        let mut v_half = vec![0.0; n];
        for (i, e) in next.elements.iter_mut().enumerate() {
            v_half[i] = e.v + 0.5 * dt * f0.accel[i];
            e.x += v_half[i] * dt;
        }
        next.t = start.t + dt;
        if let Some(index) = next.first_crossing() {
            return Err(DynamicsError::Crossing {
                t: next.t,
                index,
                min_spacing: next.min_spacing(),
            });
        }

        let ops = self.fit_operators(&next)?;
        let g0: Vec<f64> = start.elements.iter().map(|e| e.g).collect();

        // predictor: explicit density, then the velocity it implies
        let g_pred: Vec<f64> = g0.iter().zip(&f0.div_v).map(|(g, d)| g - dt * d).collect();
        let (_, f_pred) = self.quantum_terms(&ops, &next, &g_pred)?;
        let a_pred = self.accelerations(&next, &f_pred);
        let v_pred: Vec<f64> = v_half.iter().zip(&a_pred).map(|(v, a)| v + 0.5 * dt * a).collect();
        let div_pred = self.divergence(&ops, &v_pred)?;

        // corrector: trapezoidal divergence
        for (i, e) in next.elements.iter_mut().enumerate() {
            let mean_div = 0.5 * (f0.div_v[i] + div_pred[i]);
            e.g = g0[i] - dt * mean_div;
            e.log_jacobian = start.elements[i].log_jacobian + dt * mean_div;
        }
        let g1: Vec<f64> = next.elements.iter().map(|e| e.g).collect();
        let (q1, f1) = self.quantum_terms(&ops, &next, &g1)?;
        let a1 = self.accelerations(&next, &f1);
        for (i, e) in next.elements.iter_mut().enumerate() {
            e.v = v_half[i] + 0.5 * dt * a1[i];
        }
        let v1: Vec<f64> = next.elements.iter().map(|e| e.v).collect();
        let div1 = self.divergence(&ops, &v1)?;
        let fields = self.assemble(&next, q1, a1, div1);
        for (i, e) in next.elements.iter_mut().enumerate() {
            e.action += 0.5 * dt * (f0.lagrangian[i] + fields.lagrangian[i]);
        }
        Ok(HydroState {
            ensemble: next,
            fields,
        })
    }

    fn step_error(&self, coarse: &HydroState, fine: &HydroState) -> f64 {
        fn rel(a: impl Iterator<Item = (f64, f64)>, floor: f64) -> f64 {
            let (mut diff, mut scale) = (0.0f64, floor);
            for (c, f) in a {
                diff = diff.max((c - f).abs());
                scale = scale.max(f.abs());
            }
            diff / scale
        }
        let c = &coarse.ensemble.elements;
        let f = &fine.ensemble.elements;
        let pairs = || c.iter().zip(f.iter());
        let ex = rel(pairs().map(|(a, b)| (a.x, b.x)), SCALE_FLOOR_X);
        let ev = rel(pairs().map(|(a, b)| (a.v, b.v)), SCALE_FLOOR_V);
        let ee = rel(
            coarse.fields.energy.iter().copied().zip(fine.fields.energy.iter().copied()),
            SCALE_FLOOR_E,
        );
        let mut err = ex.max(ev).max(ee);
        if self.settings.quantum {
            err = err.max(rel(pairs().map(|(a, b)| (a.density(), b.density())), SCALE_FLOOR_RHO));
        }
        err
    }

    /// One step-doubling cycle: a full step and two half steps from the same
    /// state. The two-half-step result is always adopted; the controller
    /// shrinks `dt` when the two disagree by more than `tol` and grows it
    /// otherwise.
    ///
    /// A crossing in the fine path that persists down to `dt_min` is
    /// reported through `crossing_detected`, with the input state returned
    /// unchanged.
    pub fn adaptive_step(
        &self,
        state: &HydroState,
        ctrl: &mut StepController,
    ) -> Result<(HydroState, StepDiagnostics), DynamicsError> {
        self.adaptive_step_limited(state, ctrl, f64::INFINITY)
    }

    /// As [`Dynamics::adaptive_step`], but never steps past `t_stop`.
    pub fn adaptive_step_limited(
        &self,
        state: &HydroState,
        ctrl: &mut StepController,
        t_stop: f64,
    ) -> Result<(HydroState, StepDiagnostics), DynamicsError> {
        loop {
            let remaining = t_stop - state.t();
            let clamped = remaining < ctrl.dt;
            let dt = if clamped { remaining } else { ctrl.dt };
            if !(dt > 0.0) {
                return Err(DynamicsError::InvalidStep(dt));
            }
            let fine = self
                .verlet_step(state, 0.5 * dt)
                .and_then(|h| self.verlet_step(&h, 0.5 * dt));
            let fine = match fine {
                Ok(s) => s,
                Err(DynamicsError::Crossing { min_spacing, .. }) => {
                    let smaller = ctrl.shrink * dt;
                    if smaller >= ctrl.dt_min {
                        ctrl.dt = smaller;
                        continue;
                    }
                    return Ok((
                        state.clone(),
                        StepDiagnostics {
                            accepted: false,
                            max_rel_error: f64::INFINITY,
                            dt_used: dt,
                            crossing_detected: true,
                            min_spacing,
                        },
                    ));
                }
                Err(e) => return Err(e),
            };
            let err = match self.verlet_step(state, dt) {
                Ok(coarse) => self.step_error(&coarse, &fine),
                Err(DynamicsError::Crossing { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let accepted = err <= ctrl.tol;
            if accepted {
                if !clamped {
                    ctrl.dt = (ctrl.grow * dt).min(ctrl.dt_max);
                }
            } else {
                let smaller = ctrl.shrink * dt;
                if smaller < ctrl.dt_min {
                    return Err(DynamicsError::Stiffness {
                        t: fine.t(),
                        dt: smaller,
                    });
                }
                ctrl.dt = smaller;
            }
            let min_spacing = fine.ensemble.min_spacing();
            return Ok((
                fine,
                StepDiagnostics {
                    accepted,
                    max_rel_error: err,
                    dt_used: dt,
                    crossing_detected: false,
                    min_spacing,
                },
            ));
        }
    }

    /// `Q` at an arbitrary point, by re-expanding the `g` fit of the element
    /// nearest `x`.
    pub fn quantum_potential_at(&self, ensemble: &Ensemble, x: f64) -> Result<f64, FitError> {
        let xs = ensemble.positions();
        let nearest = xs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
            .ok_or(FitError::EnsembleTooSmall {
                requested: self.settings.n_neighbors,
                available: 0,
            })?;
        let st = select_stencil(&xs, nearest, self.settings.n_neighbors)?;
        let op = LocalFit::new(&st, &self.settings.basis)?;
        let g: Vec<f64> = st.neighbors.iter().map(|&j| ensemble.elements[j].g).collect();
        let jet = op.fit(ensemble.elements[nearest].g, &g)?.shifted(x - xs[nearest]);
        Ok(quantum_potential(&jet, &ensemble.system))
    }
}

/// `Σ ρᵢ dxᵢ(0) e^{log Jᵢ}`
pub fn check_norm(ensemble: &Ensemble) -> f64 {
    ensemble.norm()
}

/// One sample of the quantities integrated along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub lagrangian: f64,
    pub div_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementHistory {
    pub g0: f64,
    pub action0: f64,
    pub dx0: f64,
    pub samples: Vec<PathSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub psi: Complex64,
    pub dx: f64,
}

/// Rebuilds `ψᵢ(t)` from the time history along one trajectory:
/// modulus `√ρᵢ(0)·exp(−½∫∇·v)`, phase `(∫L dτ + S(xᵢ,0))/ħ`, and the
/// stretched volume element `dxᵢ(0)·exp(∫∇·v)`.
pub fn reconstruct_wavefunction(history: &ElementHistory) -> Reconstruction {
    let (mut int_l, mut int_div) = (0.0, 0.0);
    for w in history.samples.windows(2) {
        let h = w[1].t - w[0].t;
        int_l += 0.5 * h * (w[0].lagrangian + w[1].lagrangian);
        int_div += 0.5 * h * (w[0].div_v + w[1].div_v);
    }
    let modulus = (0.5 * (history.g0 - int_div)).exp();
    let phase = (int_l + history.action0) / crate::qcore::HBAR;
    Reconstruction {
        psi: Complex64::from_polar(modulus, phase),
        dx: history.dx0 * int_div.exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mwls::BasisFamily;
    use crate::qcore::{init_gaussian_ensemble, FluidElement, PhysicalSystem, Potential};
    use approx::assert_relative_eq;

    fn settings(quantum: bool) -> MwlsSettings {
        let basis = BasisSpec::new(4, BasisFamily::Hermite).unwrap();
        MwlsSettings::new(basis, basis.default_neighbors(), quantum).unwrap()
    }

    fn lattice(n: usize, v: impl Fn(f64) -> f64, potential: Potential) -> Ensemble {
        let sys = PhysicalSystem::new(1.0).unwrap();
        let dx0 = 0.1;
        let elements = (0..n)
            .map(|i| {
                let x = -1.0 + i as f64 * dx0;
                FluidElement {
                    x,
                    v: v(x),
                    g: -(n as f64 * dx0).ln(),
                    action: 0.0,
                    log_jacobian: 0.0,
                    dx0,
                }
            })
            .collect();
        Ensemble {
            system: sys,
            potential,
            elements,
            t: 0.0,
        }
    }

    #[test]
    fn free_drift() {
        let dynamics = Dynamics::new(settings(false));
        let state = dynamics.prepare(lattice(20, |_| 0.3, Potential::Zero)).unwrap();
        let next = dynamics.verlet_step(&state, 0.5).unwrap();
        for (a, b) in state.ensemble.elements.iter().zip(&next.ensemble.elements) {
            assert_relative_eq!(b.x, a.x + 0.15, epsilon = 1e-14);
            assert_eq!(b.v, 0.3);
        }
        assert_relative_eq!(next.t(), 0.5);
    }

    #[test]
    fn linear_field_keeps_mass_per_element() {
        let c = 0.02;
        let dynamics = Dynamics::new(settings(false));
        let state = dynamics.prepare(lattice(20, |x| c * x, Potential::Zero)).unwrap();
        let dt = 0.1;
        let next = dynamics.verlet_step(&state, dt).unwrap();
        for (a, b) in state.ensemble.elements.iter().zip(&next.ensemble.elements) {
            assert_relative_eq!(a.g + a.log_jacobian, b.g + b.log_jacobian, epsilon = 1e-14);
            // trapezoid of c and the divergence c/(1 + c·dt) of the drifted field
            let mean = 0.5 * (c + c / (1.0 + c * dt));
            assert_relative_eq!(b.log_jacobian, mean * dt, max_relative = 1e-9);
            assert!((b.log_jacobian - (c * dt).ln_1p()).abs() < (c * dt).powi(3));
        }
        assert_relative_eq!(check_norm(&next.ensemble), check_norm(&state.ensemble), epsilon = 1e-13);
    }

    #[test]
    fn classical_harmonic_acceleration() {
        let sys = PhysicalSystem::new(1.0).unwrap();
        let omega = 0.3;
        let p = Potential::harmonic(&sys, omega, 0.0).unwrap();
        let ens = init_gaussian_ensemble(sys, p, 1.0, 2.0, 30, 3.0).unwrap();
        let a = Dynamics::new(settings(false)).compute_accelerations(&ens).unwrap();
        for (e, a) in ens.elements.iter().zip(a) {
            assert_relative_eq!(a, -omega * omega * e.x, epsilon = 1e-14);
        }
    }

    #[test]
    fn coherent_packet_has_uniform_acceleration() {
        let m = 2000.0;
        let omega = 2.0 * std::f64::consts::PI / 888.57;
        let sys = PhysicalSystem::new(m).unwrap();
        let p = Potential::harmonic(&sys, omega, 0.0).unwrap();
        let beta = m * omega;
        let ens = init_gaussian_ensemble(sys, p, 3.0, beta, 100, 6.0 / beta.sqrt()).unwrap();
        let a = Dynamics::new(settings(true)).compute_accelerations(&ens).unwrap();
        for a in a {
            assert_relative_eq!(a, -omega * omega * 3.0, max_relative = 1e-7);
        }
    }

    #[test]
    fn ground_state_stays_put() {
        let m = 2000.0;
        let omega = 2.0 * std::f64::consts::PI / 888.57;
        let sys = PhysicalSystem::new(m).unwrap();
        let p = Potential::harmonic(&sys, omega, 0.0).unwrap();
        let beta = m * omega;
        let ens = init_gaussian_ensemble(sys, p, 0.0, beta, 60, 6.0 / beta.sqrt()).unwrap();
        let dynamics = Dynamics::new(settings(true));
        let a = dynamics.compute_accelerations(&ens).unwrap();
        let scale = omega * omega * (3.0 / beta.sqrt());
        assert!(a.iter().all(|a| a.abs() < 1e-6 * scale));
        let state = dynamics.prepare(ens).unwrap();
        for i in 0..state.ensemble.len() {
            assert_relative_eq!(state.total_energy(i), 0.5 * omega, max_relative = 1e-8);
        }
    }

    #[test]
    fn constant_force_lets_dt_grow() {
        let p = Potential::Polynomial(vec![0.0, 0.05]);
        let dynamics = Dynamics::new(settings(false));
        let mut state = dynamics.prepare(lattice(20, |_| 0.0, p)).unwrap();
        let mut ctrl = StepController::default();
        for _ in 0..8 {
            let (s, diag) = dynamics.adaptive_step(&state, &mut ctrl).unwrap();
            assert!(diag.accepted, "error {}", diag.max_rel_error);
            state = s;
        }
        assert_eq!(ctrl.dt, ctrl.dt_max);
    }

    #[test]
    fn stiff_force_contracts_dt() {
        // harmonic with ω = 5: ωdt = 0.1 violates 1e-6 by a wide margin
        let sys = PhysicalSystem::new(1.0).unwrap();
        let p = Potential::harmonic(&sys, 5.0, 0.0).unwrap();
        let ens = init_gaussian_ensemble(sys, p, 1.0, 1.0, 20, 2.0).unwrap();
        let dynamics = Dynamics::new(settings(false));
        let mut state = dynamics.prepare(ens).unwrap();
        let mut ctrl = StepController {
            dt: 0.02,
            dt_min: 1e-8,
            ..StepController::default()
        };
        let mut dts = vec![];
        loop {
            let (s, diag) = dynamics.adaptive_step(&state, &mut ctrl).unwrap();
            state = s;
            dts.push(diag.dt_used);
            if diag.accepted {
                break;
            }
        }
        assert!(dts.len() > 3);
        for w in dts.windows(2) {
            assert_relative_eq!(w[1], 0.75 * w[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn stiffness_underflow_is_an_error() {
        let sys = PhysicalSystem::new(1.0).unwrap();
        let p = Potential::harmonic(&sys, 1.0, 0.0).unwrap();
        let ens = init_gaussian_ensemble(sys, p, 1.0, 1.0, 20, 2.0).unwrap();
        let dynamics = Dynamics::new(settings(false));
        let mut state = dynamics.prepare(ens).unwrap();
        let mut ctrl = StepController {
            dt: 0.1,
            tol: 1e-14,
            dt_min: 0.05,
            ..StepController::default()
        };
        let mut outcome = Ok(());
        for _ in 0..3 {
            match dynamics.adaptive_step(&state, &mut ctrl) {
                Ok((s, _)) => state = s,
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        assert!(matches!(outcome, Err(DynamicsError::Stiffness { .. })));
    }

    #[test]
    fn crossing_is_reported_by_verlet_step() {
        let dynamics = Dynamics::new(settings(false));
        let state = dynamics.prepare(lattice(20, |x| -x, Potential::Zero)).unwrap();
        let err = dynamics.verlet_step(&state, 1.5).unwrap_err();
        assert!(matches!(err, DynamicsError::Crossing { .. }));
    }

    #[test]
    fn controller_validation() {
        assert!(StepController::default().validate().is_ok());
        let bad = StepController {
            shrink: 1.2,
            ..StepController::default()
        };
        assert!(bad.validate().is_err());
        let bad = StepController {
            dt: 10.0,
            ..StepController::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reconstruction_at_time_zero() {
        let h = ElementHistory {
            g0: (0.25f64).ln(),
            action0: 0.7,
            dx0: 0.1,
            samples: vec![PathSample {
                t: 0.0,
                lagrangian: 3.0,
                div_v: 1.0,
            }],
        };
        let r = reconstruct_wavefunction(&h);
        assert_relative_eq!(r.psi.norm(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(r.psi.arg(), 0.7, epsilon = 1e-15);
        assert_eq!(r.dx, 0.1);
    }

    #[test]
    fn quantum_potential_at_barrier_extrapolates() {
        let m = 2000.0;
        let sys = PhysicalSystem::new(m).unwrap();
        let beta = 0.3;
        let ens = init_gaussian_ensemble(sys, Potential::Zero, 3.0, beta, 100, 6.0 / beta.sqrt()).unwrap();
        let q = Dynamics::new(settings(true)).quantum_potential_at(&ens, 0.0).unwrap();
        let exact = beta / (2.0 * m) * (1.0 - beta * 9.0);
        assert_relative_eq!(q, exact, max_relative = 1e-8);
    }
}
