//! Sine (Gauss–Tchebychev) discrete variable representation.
//!
//! Grid values `ψⱼ = ψ(xⱼ)` at `xⱼ = x_left + j·Δ/(N+1)` are the DVR; the
//! coefficients of the box eigenfunctions
//! `Tᵢ(x) = √(2/Δ)·sin(iπ(x − x_left)/Δ)` are the FBR. With the quadrature
//! weight `δ = Δ/(N+1)` the two are related by `c = √δ·U·ψ`, `U` the
//! symmetric, self-inverse sine transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::qcore::{PhysicalSystem, Potential, HARTREE_TO_WAVENUMBER, HBAR};

/// Pilot velocities are not trusted where `ρ < DENSITY_FLOOR·max ρ`.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Spectral components smaller than this fraction of the largest are
/// dropped from closed-form time evolution.
const ACTIVE_MODE_CUTOFF: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DvrError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("x = {x} lies outside the open box ({left}, {right})")]
    OutsideBox { x: f64, left: f64, right: f64 },
    #[error("trajectory {index} left the box at t = {t} (x = {x})")]
    TrajectoryExited { index: usize, t: f64, x: f64 },
    #[error("density below the floor at x = {x}")]
    BelowDensityFloor { x: f64 },
    #[error("state has {given} grid values, grid has {expected}")]
    SizeMismatch { given: usize, expected: usize },
    #[error("invalid integration parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvrGrid {
    n_points: usize,
    x_left: f64,
    x_right: f64,
}

impl DvrGrid {
    pub fn new(n_points: usize, x_left: f64, x_right: f64) -> Result<Self, DvrError> {
        if n_points == 0 {
            return Err(DvrError::InvalidGrid("need at least one point".into()));
        }
        if !(x_left.is_finite() && x_right.is_finite() && x_right > x_left) {
            return Err(DvrError::InvalidGrid(format!("bad box [{x_left}, {x_right}]")));
        }
        Ok(Self {
            n_points,
            x_left,
            x_right,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    /// Box width `Δ`.
    pub fn width(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Quadrature weight / grid spacing `Δ/(N+1)`.
    pub fn spacing(&self) -> f64 {
        self.width() / (self.n_points + 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.n_points).map(|j| self.x_left + j as f64 * h).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.x_left && x < self.x_right
    }
}

/// `Uᵢⱼ = √(2/(N+1))·sin(ijπ/(N+1))`, `i, j = 1..N`.
pub fn build_transform(n: usize) -> DMatrix<f64> {
    let scale = (2.0 / (n + 1) as f64).sqrt();
    let arg = std::f64::consts::PI / (n + 1) as f64;
    DMatrix::from_fn(n, n, |i, j| {
        // reduce ij mod 2(N+1) so the sine argument stays small
        let k = ((i + 1) * (j + 1)) % (2 * (n + 1));
        scale * (k as f64 * arg).sin()
    })
}

/// `H = Uᵀ·diag(ħ²kᵢ²/2m)·U + diag(V(xⱼ))`, `kᵢ = iπ/Δ`.
pub fn build_hamiltonian(grid: &DvrGrid, potential: &Potential, system: &PhysicalSystem) -> DMatrix<f64> {
    let n = grid.n_points();
    let u = build_transform(n);
    let kin = DVector::from_fn(n, |i, _| {
        let k = (i + 1) as f64 * std::f64::consts::PI / grid.width();
        HBAR * HBAR * k * k / (2.0 * system.mass())
    });
    let mut h = u.transpose() * DMatrix::from_diagonal(&kin) * &u;
    for (j, x) in grid.points().into_iter().enumerate() {
        h[(j, j)] += potential.value(x);
    }
    // symmetrize away round-off
    let ht = h.transpose();
    (h + ht) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Ascending, hartree.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the DVR eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues_wavenumber(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e * HARTREE_TO_WAVENUMBER).collect()
    }
}

/// Full symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn eigensolve(h: &DMatrix<f64>) -> SpectralDecomposition {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvrState {
    pub grid: DvrGrid,
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl DvrState {
    pub fn new(grid: DvrGrid, psi: Vec<Complex64>, t: f64) -> Result<Self, DvrError> {
        if psi.len() != grid.n_points() {
            return Err(DvrError::SizeMismatch {
                given: psi.len(),
                expected: grid.n_points(),
            });
        }
        Ok(Self { grid, psi, t })
    }

    /// Samples `f` on the grid and normalizes so that `Σ|ψⱼ|²δ = 1`.
    pub fn from_fn(grid: DvrGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let mut state = Self {
            psi: grid.points().into_iter().map(f).collect(),
            grid,
            t: 0.0,
        };
        let norm = state.norm().sqrt();
        state.psi.iter_mut().for_each(|p| *p /= norm);
        state
    }

    /// `Σ|ψⱼ|²·δ`
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|p| p.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p.norm_sqr()).collect()
    }

    /// FBR coefficients `c = √δ·U·ψ`.
    pub fn fbr(&self) -> Vec<Complex64> {
        let u = build_transform(self.grid.n_points());
        let s = self.grid.spacing().sqrt();
        (0..self.psi.len())
            .map(|i| {
                self.psi
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p * u[(i, j)])
                    .sum::<Complex64>()
                    * s
            })
            .collect()
    }
}

/// `ψ(t+dt) = Σₖ vₖ e^{−iEₖdt/ħ}(vₖ·ψ(t))`
pub fn propagate(state: &DvrState, decomposition: &SpectralDecomposition, dt: f64) -> DvrState {
    let v = &decomposition.eigenvectors;
    let n = state.psi.len();
    let proj: Vec<Complex64> = (0..n)
        .map(|k| {
            let c: Complex64 = (0..n).map(|j| state.psi[j] * v[(j, k)]).sum();
            c * Complex64::from_polar(1.0, -decomposition.eigenvalues[k] * dt / HBAR)
        })
        .collect();
    let psi = (0..n)
        .map(|j| (0..n).map(|k| proj[k] * v[(j, k)]).sum())
        .collect();
    DvrState {
        grid: state.grid,
        psi,
        t: state.t + dt,
    }
}

/// `ψ`, `∂ₓψ`, `∂ₓ²ψ` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiJet {
    pub psi: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

impl PsiJet {
    pub fn density(&self) -> f64 {
        self.psi.norm_sqr()
    }

    /// `(ħ/m)·Im(ψ*∂ₓψ)/|ψ|²`
    pub fn velocity(&self, system: &PhysicalSystem) -> f64 {
        HBAR / system.mass() * (self.psi.conj() * self.d1).im / self.density()
    }

    /// `Q = −(ħ²/2m)·∇²|ψ| / |ψ|`, via `g = ln ρ`.
    pub fn quantum_potential(&self, system: &PhysicalSystem) -> f64 {
        let rho = self.density();
        let rho1 = 2.0 * (self.psi.conj() * self.d1).re;
        let rho2 = 2.0 * (self.psi.conj() * self.d2).re + 2.0 * self.d1.norm_sqr();
        let g1 = rho1 / rho;
        let g2 = rho2 / rho - g1 * g1;
        -HBAR * HBAR / (4.0 * system.mass()) * (g2 + 0.5 * g1 * g1)
    }
}

/// `Σᵢ cᵢ Tᵢ(x)` and its first two derivatives. `x` is not range-checked;
/// outside the box the sum is the odd periodic continuation.
pub fn evaluate_fbr(grid: &DvrGrid, coeffs: &[Complex64], x: f64) -> PsiJet {
    let width = grid.width();
    let theta = std::f64::consts::PI * (x - grid.x_left) / width;
    let step = Complex64::from_polar(1.0, theta);
    let norm = (2.0 / width).sqrt();
    let kunit = std::f64::consts::PI / width;
    let mut rot = Complex64::new(1.0, 0.0);
    let mut jet = PsiJet {
        psi: Complex64::default(),
        d1: Complex64::default(),
        d2: Complex64::default(),
    };
    for (i, c) in coeffs.iter().enumerate() {
        rot *= step;
        let k = (i + 1) as f64 * kunit;
        // rot = cos(iθ) + i·sin(iθ)
        jet.psi += c * rot.im;
        jet.d1 += c * (k * rot.re);
        jet.d2 -= c * (k * k * rot.im);
    }
    jet.psi *= norm;
    jet.d1 *= norm;
    jet.d2 *= norm;
    jet
}

fn check_inside(grid: &DvrGrid, x: f64) -> Result<(), DvrError> {
    if grid.contains(x) {
        Ok(())
    } else {
        Err(DvrError::OutsideBox {
            x,
            left: grid.x_left,
            right: grid.x_right,
        })
    }
}

/// FBR interpolation of `ψ` (and derivatives) at an arbitrary point.
pub fn interpolate_psi(state: &DvrState, x: f64) -> Result<PsiJet, DvrError> {
    check_inside(&state.grid, x)?;
    Ok(evaluate_fbr(&state.grid, &state.fbr(), x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotVelocity {
    pub v: f64,
    pub density: f64,
}

/// `v = j/ρ` at `x`; fails below the density floor.
pub fn pilot_velocity(state: &DvrState, system: &PhysicalSystem, x: f64) -> Result<PilotVelocity, DvrError> {
    let jet = interpolate_psi(state, x)?;
    let rho_max = state.density().into_iter().fold(0.0, f64::max);
    if jet.density() < DENSITY_FLOOR * rho_max {
        return Err(DvrError::BelowDensityFloor { x });
    }
    Ok(PilotVelocity {
        v: jet.velocity(system),
        density: jet.density(),
    })
}

/// Closed-form `ψ(t)` from an initial state and the spectral decomposition.
#[derive(Debug, Clone)]
pub struct DvrEvolution {
    pub grid: DvrGrid,
    pub system: PhysicalSystem,
    t0: f64,
    energies: Vec<f64>,
    amplitudes: Vec<Complex64>,
    /// Eigenvectors of the active modes, `N × K` row-major.
    grid_modes: Vec<f64>,
    /// FBR images of the active modes, `N × K` row-major.
    fbr_modes: Vec<f64>,
}

impl DvrEvolution {
    pub fn new(initial: &DvrState, decomposition: &SpectralDecomposition, system: PhysicalSystem) -> Self {
        let v = &decomposition.eigenvectors;
        let n = initial.psi.len();
        let all: Vec<Complex64> = (0..n)
            .map(|k| (0..n).map(|j| initial.psi[j] * v[(j, k)]).sum())
            .collect();
        let peak = all.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let active: Vec<usize> = (0..n).filter(|&k| all[k].norm() > ACTIVE_MODE_CUTOFF * peak).collect();
        let kk = active.len();
        let u = build_transform(n);
        let s = initial.grid.spacing().sqrt();
        let mut grid_modes = vec![0.0; n * kk];
        let mut fbr_modes = vec![0.0; n * kk];
        for (a, &k) in active.iter().enumerate() {
            let col = v.column(k);
            let image = &u * col;
            for r in 0..n {
                grid_modes[r * kk + a] = col[r];
                fbr_modes[r * kk + a] = s * image[r];
            }
        }
        Self {
            grid: initial.grid,
            system,
            t0: initial.t,
            energies: active.iter().map(|&k| decomposition.eigenvalues[k]).collect(),
            amplitudes: active.iter().map(|&k| all[k]).collect(),
            grid_modes,
            fbr_modes,
        }
    }

    pub fn active_modes(&self) -> usize {
        self.energies.len()
    }

    fn phased(&self, t: f64) -> Vec<Complex64> {
        self.energies
            .iter()
            .zip(&self.amplitudes)
            .map(|(e, a)| a * Complex64::from_polar(1.0, -e * (t - self.t0) / HBAR))
            .collect()
    }

    fn contract(modes: &[f64], phased: &[Complex64]) -> Vec<Complex64> {
        let kk = phased.len();
        modes
            .chunks(kk.max(1))
            .map(|row| row.iter().zip(phased).map(|(m, p)| p * *m).sum())
            .collect()
    }

    pub fn fbr_at(&self, t: f64) -> Vec<Complex64> {
        Self::contract(&self.fbr_modes, &self.phased(t))
    }

    pub fn state_at(&self, t: f64) -> DvrState {
        DvrState {
            grid: self.grid,
            psi: Self::contract(&self.grid_modes, &self.phased(t)),
            t,
        }
    }

    pub fn psi_jet(&self, t: f64, x: f64) -> Result<PsiJet, DvrError> {
        check_inside(&self.grid, x)?;
        Ok(evaluate_fbr(&self.grid, &self.fbr_at(t), x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotOptions {
    pub t_end: f64,
    pub dt_out: f64,
    /// RK4 step.
    pub step: f64,
}

impl Default for PilotOptions {
    fn default() -> Self {
        Self {
            t_end: 1000.0,
            dt_out: 5.0,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotTrajectories {
    pub times: Vec<f64>,
    /// `positions[s][i]`: trajectory `i` at sample `s`.
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// Number of velocity evaluations that hit the density floor, per
    /// trajectory.
    pub floor_hits: Vec<usize>,
}

struct VelocityField<'a> {
    evolution: &'a DvrEvolution,
    last: Vec<f64>,
    floor_hits: Vec<usize>,
}

impl VelocityField<'_> {
    fn eval(&mut self, t: f64, xs: &[f64]) -> Result<Vec<f64>, DvrError> {
        let ev = self.evolution;
        let coeffs = ev.fbr_at(t);
        let rho_max = ev.state_at(t).density().into_iter().fold(0.0, f64::max);
        let mut out = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            if !ev.grid.contains(x) {
                return Err(DvrError::TrajectoryExited { index: i, t, x });
            }
            let jet = evaluate_fbr(&ev.grid, &coeffs, x);
            if jet.density() < DENSITY_FLOOR * rho_max {
                self.floor_hits[i] += 1;
                out.push(self.last[i]);
            } else {
                let v = jet.velocity(&ev.system);
                self.last[i] = v;
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Integrates `ẋ = v(x,t)` with classical RK4 from `evolution`'s initial
/// time, sampling every `dt_out`.
pub fn integrate_pilot_trajectories(
    evolution: &DvrEvolution,
    initial: &[f64],
    options: &PilotOptions,
) -> Result<PilotTrajectories, DvrError> {
    if !(options.step > 0.0 && options.dt_out > 0.0 && options.t_end >= evolution.t0) {
        return Err(DvrError::InvalidParameter(format!("{options:?}")));
    }
    for (index, &x) in initial.iter().enumerate() {
        if !evolution.grid.contains(x) {
            return Err(DvrError::TrajectoryExited {
                index,
                t: evolution.t0,
                x,
            });
        }
    }
    let n = initial.len();
    let mut field = VelocityField {
        evolution,
        last: vec![0.0; n],
        floor_hits: vec![0; n],
    };
    let mut t = evolution.t0;
    let mut xs = initial.to_vec();
    let mut out = PilotTrajectories {
        times: vec![t],
        positions: vec![xs.clone()],
        velocities: vec![field.eval(t, &xs)?],
        floor_hits: vec![],
    };
    let n_samples = ((options.t_end - evolution.t0) / options.dt_out + 1e-9).floor() as usize;
    for s in 1..=n_samples {
        let t_sample = evolution.t0 + s as f64 * options.dt_out;
        let substeps = ((t_sample - t) / options.step).ceil().max(1.0) as usize;
        let h = (t_sample - t) / substeps as f64;
        for _ in 0..substeps {
            let k1 = field.eval(t, &xs)?;
            let y: Vec<f64> = xs.iter().zip(&k1).map(|(x, k)| x + 0.5 * h * k).collect();
            let k2 = field.eval(t + 0.5 * h, &y)?;
            let y: Vec<f64> = xs.iter().zip(&k2).map(|(x, k)| x + 0.5 * h * k).collect();
            let k3 = field.eval(t + 0.5 * h, &y)?;
            let y: Vec<f64> = xs.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
            let k4 = field.eval(t + h, &y)?;
            for i in 0..n {
                xs[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        t = t_sample;
        out.times.push(t);
        out.velocities.push(field.eval(t, &xs)?);
        out.positions.push(xs.clone());
    }
    out.floor_hits = field.floor_hits;
    Ok(out)
}

/// Outcome of matching the lowest two eigenvalues against a target doublet
/// for a list of candidate masses.
#[derive(Debug, Clone, PartialEq)]
pub struct MassResolution {
    pub candidates: Vec<MassCandidate>,
    pub adopted: usize,
    /// Largest |ΔE| of the adopted mass is within the tolerance.
    pub matched: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassCandidate {
    pub mass: f64,
    /// Lowest two eigenvalues, cm⁻¹.
    pub doublet: [f64; 2],
    /// `max |E − target|`, cm⁻¹.
    pub residual: f64,
}

impl MassResolution {
    pub fn adopted_mass(&self) -> f64 {
        self.candidates[self.adopted].mass
    }
}

/// Diagonalizes the Hamiltonian for each candidate mass and adopts the one
/// whose lowest two eigenvalues (in cm⁻¹, converted with `wavenumber_per_hartree`)
/// lie closest to `target`.
pub fn resolve_mass(
    grid: &DvrGrid,
    potential: &Potential,
    masses: &[f64],
    target: [f64; 2],
    wavenumber_per_hartree: f64,
    tolerance: f64,
) -> Result<MassResolution, DvrError> {
    if masses.is_empty() {
        return Err(DvrError::InvalidParameter("no candidate masses".into()));
    }
    let mut candidates = Vec::with_capacity(masses.len());
    for &mass in masses {
        let system = PhysicalSystem::new(mass).map_err(|e| DvrError::InvalidParameter(e.to_string()))?;
        let spec = eigensolve(&build_hamiltonian(grid, potential, &system));
        let doublet = [
            spec.eigenvalues[0] * wavenumber_per_hartree,
            spec.eigenvalues[1] * wavenumber_per_hartree,
        ];
        let residual = (doublet[0] - target[0]).abs().max((doublet[1] - target[1]).abs());
        candidates.push(MassCandidate {
            mass,
            doublet,
            residual,
        });
    }
    let adopted = (0..candidates.len())
        .min_by(|&a, &b| candidates[a].residual.total_cmp(&candidates[b].residual))
        .unwrap_or(0);
    Ok(MassResolution {
        matched: candidates[adopted].residual <= tolerance,
        candidates,
        adopted,
        tolerance,
    })
}
