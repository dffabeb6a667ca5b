//! Domain types shared by every engine: the physical system, model
//! potentials, Lagrangian fluid elements and the ensemble that carries them.
//!
//! Everything is in atomic units with ħ = 1.

use thiserror::Error;

/// Reduced Planck constant in atomic units.
pub const HBAR: f64 = 1.0;

/// Wavenumbers per hartree.
pub const HARTREE_TO_WAVENUMBER: f64 = 219_474.631_363_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> QcoreError {
    QcoreError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSystem {
    mass: f64,
}

impl PhysicalSystem {
    pub fn new(mass: f64) -> Result<Self, QcoreError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn hbar(&self) -> f64 {
        HBAR
    }
}

/// One-dimensional model potentials.
///
/// The harmonic variant stores the mass it was built for so that
/// `V(x) = ½ m ω² (x − center)²` can be evaluated without the system.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Harmonic { omega: f64, center: f64, mass: f64 },
    /// `V(x) = a x⁴ − b x²`
    DoubleWell { a: f64, b: f64 },
    /// `V(x) = Σ cₖ xᵏ`, coefficients in ascending powers.
    Polynomial(Vec<f64>),
    Zero,
}

impl Potential {
    pub fn harmonic(system: &PhysicalSystem, omega: f64, center: f64) -> Result<Self, QcoreError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        Ok(Potential::Harmonic {
            omega,
            center,
            mass: system.mass(),
        })
    }

    pub fn double_well(a: f64, b: f64) -> Result<Self, QcoreError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid("a", format!("must be positive, got {a}")));
        }
        if !b.is_finite() {
            return Err(invalid("b", "must be finite"));
        }
        Ok(Potential::DoubleWell { a, b })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Harmonic {
                omega,
                center,
                mass,
            } => {
                let d = x - center;
                0.5 * mass * omega * omega * d * d
            }
            Potential::DoubleWell { a, b } => {
                let x2 = x * x;
                a * x2 * x2 - b * x2
            }
            Potential::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Potential::Zero => 0.0,
        }
    }

    /// Analytic dV/dx.
    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            Potential::Harmonic {
                omega,
                center,
                mass,
            } => mass * omega * omega * (x - center),
            Potential::DoubleWell { a, b } => 4.0 * a * x * x * x - 2.0 * b * x,
            Potential::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
            Potential::Zero => 0.0,
        }
    }

    /// Position of the right-hand minimum of the double well, `√(b/2a)`.
    pub fn double_well_minimum(&self) -> Option<f64> {
        match self {
            Potential::DoubleWell { a, b } if *b > 0.0 => Some((b / (2.0 * a)).sqrt()),
            _ => None,
        }
    }

    /// Barrier height above the well bottom, `b²/4a` (hartree).
    pub fn double_well_barrier(&self) -> Option<f64> {
        match self {
            Potential::DoubleWell { a, b } if *b > 0.0 => Some(b * b / (4.0 * a)),
            _ => None,
        }
    }
}

/// Free-function form of [`Potential::value`].
pub fn potential_value(p: &Potential, x: f64) -> f64 {
    p.value(x)
}

/// Free-function form of [`Potential::gradient`].
pub fn potential_gradient(p: &Potential, x: f64) -> f64 {
    p.gradient(x)
}

/// A Lagrangian fluid element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidElement {
    pub x: f64,
    pub v: f64,
    /// Log-density, `ρ = e^g`.
    pub g: f64,
    /// Action accumulated along the trajectory plus the initial phase.
    pub action: f64,
    /// Log of the volume-element stretch, `dx(t) = dx(0)·e^{logJ}`.
    pub log_jacobian: f64,
    /// Initial volume element.
    pub dx0: f64,
}

impl FluidElement {
    pub fn density(&self) -> f64 {
        self.g.exp()
    }

    pub fn volume(&self) -> f64 {
        self.dx0 * self.log_jacobian.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub system: PhysicalSystem,
    pub potential: Potential,
    pub elements: Vec<FluidElement>,
    pub t: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.x).collect()
    }

    /// `Σ ρᵢ dxᵢ(t)`.
    pub fn norm(&self) -> f64 {
        self.elements.iter().map(|e| (e.g + e.log_jacobian).exp() * e.dx0).sum()
    }

    /// Smallest gap between neighbours; negative when a pair has swapped.
    pub fn min_spacing(&self) -> f64 {
        self.elements
            .windows(2)
            .map(|w| w[1].x - w[0].x)
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the left member of the first adjacent pair that is not
    /// strictly increasing.
    pub fn first_crossing(&self) -> Option<usize> {
        self.elements
            .windows(2)
            .position(|w| !(w[1].x > w[0].x))
    }

    pub fn is_strictly_ordered(&self) -> bool {
        self.first_crossing().is_none()
    }
}

/// Default initial span for a Gaussian `e^{−β(x−x₀)²}`: ±3 widths.
pub fn default_span(beta: f64) -> f64 {
    6.0 / beta.sqrt()
}

/// Evenly spaced ensemble sampling `ρ ∝ e^{−β(x−x₀)²}`, at rest, with zero
/// action, normalized so that `Σ ρᵢ dxᵢ = 1`.
pub fn init_gaussian_ensemble(
    system: PhysicalSystem,
    potential: Potential,
    x0: f64,
    beta: f64,
    n: usize,
    span: f64,
) -> Result<Ensemble, QcoreError> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 elements, got {n}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(invalid("span", format!("must be positive, got {span}")));
    }
    let dx0 = span / (n - 1) as f64;
    let left = x0 - 0.5 * span;
    let xs: Vec<f64> = (0..n).map(|i| left + i as f64 * dx0).collect();
    let raw: Vec<f64> = xs.iter().map(|&x| -beta * (x - x0) * (x - x0)).collect();
    // log-sum-exp keeps the shift finite even for very narrow packets
    let peak = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = raw.iter().map(|g| (g - peak).exp()).sum::<f64>() * dx0;
    let shift = peak + sum.ln();
    let elements = xs
        .iter()
        .zip(&raw)
        .map(|(&x, &g)| FluidElement {
            x,
            v: 0.0,
            g: g - shift,
            action: 0.0,
            log_jacobian: 0.0,
            dx0,
        })
        .collect();
    Ok(Ensemble {
        system,
        potential,
        elements,
        t: 0.0,
    })
}
