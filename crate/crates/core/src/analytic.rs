//! Closed-form reference solutions: the harmonic coherent state and the
//! two-state model of a symmetric double well.

use thiserror::Error;

use crate::qcore::{Potential, HBAR};

/// Barrier height quoted for the double well `0.007x⁴ − 0.01x²`, cm⁻¹.
/// The analytic `b²/4a` is 783.84 cm⁻¹; both are reported.
pub const REPORTED_BARRIER_WAVENUMBER: f64 = 786.24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn positive(name: &'static str, v: f64) -> Result<f64, AnalyticError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(AnalyticError::InvalidParameter {
            name,
            reason: format!("must be positive, got {v}"),
        })
    }
}

/// Gaussian of width `β = mω/ħ` released from `x0` in `½mω²x²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentModel {
    pub m: f64,
    pub omega: f64,
    pub x0: f64,
}

impl CoherentModel {
    pub fn new(m: f64, omega: f64, x0: f64) -> Result<Self, AnalyticError> {
        Ok(Self {
            m: positive("m", m)?,
            omega: positive("omega", omega)?,
            x0,
        })
    }

    pub fn beta(&self) -> f64 {
        self.m * self.omega / HBAR
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 * (self.omega * t).cos()
    }

    /// Unnormalized `exp(−mω(x − x0 cos ωt)²/ħ)`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let d = x - self.center(t);
        (-self.beta() * d * d).exp()
    }

    pub fn trajectory(&self, x_start: f64, t: f64) -> f64 {
        x_start + self.x0 * ((self.omega * t).cos() - 1.0)
    }

    /// The velocity field is uniform in space.
    pub fn velocity(&self, t: f64) -> f64 {
        -self.x0 * self.omega * (self.omega * t).sin()
    }

    /// `(S, E)` with `E = −∂ₜS = ½mv² + V + Q`, so that `∂ₓS = mv` and
    /// `dS/dt` along a trajectory is `½mv² − V − Q`.
    pub fn action_energy(&self, x: f64, t: f64) -> (f64, f64) {
        let (m, w, x0) = (self.m, self.omega, self.x0);
        let wt = w * t;
        let s = -0.5 * HBAR * w * t - m * w * x * x0 * wt.sin() + 0.25 * m * w * x0 * x0 * (2.0 * wt).sin();
        let e = 0.5 * HBAR * w + m * w * w * x * x0 * wt.cos() - 0.5 * m * w * w * x0 * x0 * (2.0 * wt).cos();
        (s, e)
    }

    /// `Q(x,t) = (β/2m)(1 − β(x − x_c)²)`
    pub fn quantum_potential(&self, x: f64, t: f64) -> f64 {
        let b = self.beta();
        let d = x - self.center(t);
        HBAR * HBAR * b / (2.0 * self.m) * (1.0 - b * d * d)
    }
}

/// Which well a localized Gaussian sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Symmetric double well reduced to the lowest doublet, with each well
/// approximated by a harmonic oscillator of frequency `omega0` centered at
/// `±x0`. `omega_split` is half the doublet splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateModel {
    pub m: f64,
    pub omega0: f64,
    pub omega_split: f64,
    pub x0: f64,
}

impl TwoStateModel {
    pub fn new(m: f64, omega0: f64, omega_split: f64, x0: f64) -> Result<Self, AnalyticError> {
        Ok(Self {
            m: positive("m", m)?,
            omega0: positive("omega0", omega0)?,
            omega_split: positive("omega_split", omega_split)?,
            x0,
        })
    }

    /// Builds the model for `ax⁴ − bx²` from its curvature at the minimum
    /// (`V″ = 4b`) and the doublet energies `e_plus < e_minus` (hartree).
    pub fn from_double_well(potential: &Potential, m: f64, e_plus: f64, e_minus: f64) -> Result<Self, AnalyticError> {
        let (Potential::DoubleWell { b, .. }, Some(x0)) = (potential, potential.double_well_minimum()) else {
            return Err(AnalyticError::InvalidParameter {
                name: "potential",
                reason: "needs a double well with b > 0".into(),
            });
        };
        let omega0 = (4.0 * b / positive("m", m)?).sqrt();
        Self::new(m, omega0, 0.5 * (e_minus - e_plus) / HBAR, x0)
    }

    /// Tunneling period: time for the density to move from one well to the
    /// other and back.
    pub fn tunneling_period(&self) -> f64 {
        std::f64::consts::PI / self.omega_split
    }

    /// `Q(0,t) = ħω₀/2 + ¼mω₀²x₀²(cos 4ω t − 3)` for a packet started in one
    /// well. Largest while localized, smallest at equal populations.
    pub fn q_barrier(&self, t: f64) -> f64 {
        let w0 = self.omega0;
        0.5 * HBAR * w0 + 0.25 * self.m * w0 * w0 * self.x0 * self.x0 * ((4.0 * self.omega_split * t).cos() - 3.0)
    }

    /// `(min, max)` of [`q_barrier`](Self::q_barrier) over all `t`.
    pub fn q_barrier_envelope(&self) -> (f64, f64) {
        let w0 = self.omega0;
        let k = self.m * w0 * w0 * self.x0 * self.x0;
        (0.5 * HBAR * w0 - k, 0.5 * HBAR * w0 - 0.5 * k)
    }

    /// `Q(x) ≈ ħω₀/2 − ½mω₀²(x − c)²` near the well centered at `c = ±x₀`.
    pub fn q_parabola(&self, x: f64, side: Side) -> f64 {
        let c = match side {
            Side::Left => -self.x0,
            Side::Right => self.x0,
        };
        let d = x - c;
        0.5 * HBAR * self.omega0 - 0.5 * self.m * self.omega0 * self.omega0 * d * d
    }
}

/// `V_eff = Q(0) + V_b`
pub fn effective_barrier(q0: f64, vb: f64) -> f64 {
    q0 + vb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::HARTREE_TO_WAVENUMBER;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn coherent() -> CoherentModel {
        CoherentModel::new(2000.0, 2.0 * PI / 888.57, 3.0).unwrap()
    }

    #[test]
    fn coherent_density_peak_follows_center() {
        let c = coherent();
        assert_relative_eq!(c.density(3.0, 0.0), 1.0);
        let half = PI / c.omega;
        assert_relative_eq!(c.density(-3.0, half), 1.0, epsilon = 1e-12);
        for t in [10.0, 123.4, 700.0] {
            let xc = c.center(t);
            assert!(c.density(xc, t) > c.density(xc + 1e-3, t));
            assert!(c.density(xc, t) > c.density(xc - 1e-3, t));
        }
    }

    #[test]
    fn coherent_trajectory_cases() {
        let c = coherent();
        assert_eq!(c.trajectory(2.5, 0.0), 2.5);
        assert_relative_eq!(c.trajectory(2.5, PI / c.omega), 2.5 - 6.0, epsilon = 1e-12);
        let xs: Vec<f64> = (0..1000).map(|k| c.trajectory(1.0, k as f64 * c.period() / 1000.0)).collect();
        let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
        let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!(0.5 * (hi + lo), 1.0 - 3.0, epsilon = 1e-4);
        assert_relative_eq!(0.5 * (hi - lo), 3.0, epsilon = 1e-4);
    }

    #[test]
    fn trajectory_integrates_the_velocity() {
        let c = coherent();
        // composite Simpson on v(t)
        let t_end = 0.73 * c.period();
        let n = 20_000;
        let h = t_end / n as f64;
        let mut sum = c.velocity(0.0) + c.velocity(t_end);
        for k in 1..n {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * c.velocity(k as f64 * h);
        }
        let x = 0.4 + sum * h / 3.0;
        assert!((x - c.trajectory(0.4, t_end)).abs() < 1e-10);
    }

    #[test]
    fn action_starts_at_zero_and_energy_is_minus_its_rate() {
        let c = coherent();
        for x in [-1.0, 0.0, 2.0, 4.5] {
            assert_eq!(c.action_energy(x, 0.0).0, 0.0);
            for t in [0.0, 50.0, 333.3] {
                let h = 1e-3;
                let ds = (c.action_energy(x, t + h).0 - c.action_energy(x, t - h).0) / (2.0 * h);
                assert!((ds + c.action_energy(x, t).1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn energy_is_kinetic_plus_potential_plus_quantum() {
        let c = coherent();
        for (x, t) in [(3.0, 0.0), (1.2, 100.0), (-2.0, 555.0)] {
            let v = c.velocity(t);
            let e = 0.5 * c.m * v * v + 0.5 * c.m * c.omega * c.omega * x * x + c.quantum_potential(x, t);
            assert_relative_eq!(c.action_energy(x, t).1, e, max_relative = 1e-12);
            let h = 1e-5;
            let dsdx = (c.action_energy(x + h, t).0 - c.action_energy(x - h, t).0) / (2.0 * h);
            assert_relative_eq!(dsdx, c.m * v, max_relative = 1e-6, epsilon = 1e-9);
        }
        // released at rest from x0: E = ħω/2 + ½mω²x0²
        let e0 = c.action_energy(3.0, 0.0).1;
        assert_relative_eq!(e0, 0.5 * c.omega + 0.5 * c.m * c.omega * c.omega * 9.0, max_relative = 1e-14);
    }

    #[test]
    fn centered_packet_energy_is_zero_point() {
        let c = CoherentModel::new(2000.0, 0.007, 0.0).unwrap();
        for (x, t) in [(0.0, 0.0), (0.3, 10.0), (-1.0, 1e4)] {
            assert_relative_eq!(c.action_energy(x, t).1, 0.0035, max_relative = 1e-14);
        }
    }

    fn double_well_model() -> TwoStateModel {
        let pot = Potential::double_well(0.007, 0.01).unwrap();
        TwoStateModel::from_double_well(
            &pot,
            2000.0,
            -369.827 / HARTREE_TO_WAVENUMBER,
            -313.918 / HARTREE_TO_WAVENUMBER,
        )
        .unwrap()
    }

    #[test]
    fn two_state_parameters() {
        let m = double_well_model();
        assert_relative_eq!(m.omega0, (0.04f64 / 2000.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(m.x0, (0.01f64 / 0.014).sqrt());
        assert_relative_eq!(m.omega_split * HARTREE_TO_WAVENUMBER, 27.9545, max_relative = 1e-12);
        assert!(m.omega_split < 0.1 * m.omega0);
        assert!(TwoStateModel::from_double_well(&Potential::Zero, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn q_barrier_cases() {
        let m = double_well_model();
        let k = m.m * m.omega0 * m.omega0 * m.x0 * m.x0;
        assert_relative_eq!(m.q_barrier(0.0), 0.5 * m.omega0 - 0.5 * k, max_relative = 1e-14);
        let quarter = PI / (4.0 * m.omega_split);
        assert_relative_eq!(m.q_barrier(quarter), 0.5 * m.omega0 - k, max_relative = 1e-14);
        let period = PI / (2.0 * m.omega_split);
        for t in [13.0, 400.0, 2500.0] {
            assert_relative_eq!(m.q_barrier(t), m.q_barrier(t + period), max_relative = 1e-10);
        }
        let (lo, hi) = m.q_barrier_envelope();
        assert_relative_eq!(lo, m.q_barrier(quarter));
        assert_relative_eq!(hi, m.q_barrier(0.0));
    }

    /// `ψ = cos(ωt)φ_R − i sin(ωt)φ_L`; returns `Q(0)` by finite differences
    /// of `√ρ`.
    fn two_state_q0_oracle(m: &TwoStateModel, t: f64) -> f64 {
        let b = m.m * m.omega0;
        let amp = |x: f64| {
            let r = (-0.5 * b * (x - m.x0) * (x - m.x0)).exp();
            let l = (-0.5 * b * (x + m.x0) * (x + m.x0)).exp();
            let (c, s) = ((m.omega_split * t).cos(), (m.omega_split * t).sin());
            ((c * r).powi(2) + (s * l).powi(2)).sqrt()
        };
        let h = 1e-4;
        let lap = (amp(h) - 2.0 * amp(0.0) + amp(-h)) / (h * h);
        -lap / (2.0 * m.m * amp(0.0))
    }

    #[test]
    fn q_barrier_matches_two_state_wavefunction() {
        let m = double_well_model();
        let k = m.m * m.omega0 * m.omega0 * m.x0 * m.x0;
        for t in [0.0, 300.0, 900.0, 1687.0, 2400.0] {
            let diff = (m.q_barrier(t) - two_state_q0_oracle(&m, t)).abs();
            assert!(diff < 1e-6 * k, "t = {t}: {diff}");
        }
    }

    #[test]
    fn q_barrier_extremes_follow_localization() {
        let m = double_well_model();
        let quarter = PI / (4.0 * m.omega_split);
        // full localization at t = 0, equal populations at ωt = π/4
        assert!(m.q_barrier(0.0) > m.q_barrier(quarter));
        let (lo, hi) = m.q_barrier_envelope();
        for k in 0..200 {
            let q = m.q_barrier(k as f64 * 37.0);
            assert!(q >= lo - 1e-15 && q <= hi + 1e-15);
        }
    }

    #[test]
    fn q_parabola_cases() {
        let m = double_well_model();
        assert_relative_eq!(m.q_parabola(m.x0, Side::Right), 0.5 * m.omega0);
        assert_relative_eq!(m.q_parabola(-m.x0, Side::Left), 0.5 * m.omega0);
        let h = 1e-4;
        let grad = (m.q_parabola(m.x0 + h, Side::Right) - m.q_parabola(m.x0 - h, Side::Right)) / (2.0 * h);
        assert!(grad.abs() < 1e-12);
        // curvature of V + Q vanishes at the well center
        let pot = Potential::double_well(0.007, 0.01).unwrap();
        let f = |x: f64| pot.value(x) + m.q_parabola(x, Side::Right);
        let curv = (f(m.x0 + h) - 2.0 * f(m.x0) + f(m.x0 - h)) / (h * h);
        assert!(curv.abs() < 1e-6 * 0.04);
    }

    #[test]
    fn effective_barrier_cases() {
        assert_eq!(effective_barrier(0.0, 0.0035), 0.0035);
        let pot = Potential::double_well(0.007, 0.01).unwrap();
        let vb = pot.double_well_barrier().unwrap();
        assert_relative_eq!(vb, 3.5714285714e-3, max_relative = 1e-10);
        assert_relative_eq!(vb * HARTREE_TO_WAVENUMBER, 783.84, epsilon = 0.01);
        assert!(REPORTED_BARRIER_WAVENUMBER - vb * HARTREE_TO_WAVENUMBER > 2.0);
    }
}
