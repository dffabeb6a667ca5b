//! Moving weighted least squares on a scattered 1-D point cloud.
//!
//! Around each centre `x₀` the field is modelled as
//! `f(x) − f(x₀) = Σₖ aₖ pₖ(x − x₀)`, `k = 1..order`, so the fit passes
//! through the centre value exactly. The weighted overdetermined system is
//! solved with a truncated SVD pseudo-inverse and the coefficients are mapped
//! onto the derivative jet `f′(x₀), f″(x₀), …`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::qcore::PhysicalSystem;

/// Singular values below this fraction of the largest are discarded.
pub const SVD_RELATIVE_CUTOFF: f64 = 1e-10;

/// Weight given to the stencil point farthest from the centre.
pub const EDGE_WEIGHT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("polynomial order must be at least 2, got {0}")]
    OrderTooLow(usize),
    #[error("stencil of {requested} neighbours needs at least {} points, ensemble has {available}", requested + 1)]
    EnsembleTooSmall { requested: usize, available: usize },
    #[error("stencil around element {center} has {neighbors} neighbours, order {order} needs at least {order}")]
    InsufficientNeighbors {
        center: usize,
        neighbors: usize,
        order: usize,
    },
    #[error("weights need at least one non-zero offset")]
    ZeroOffsets,
    #[error("{given} values supplied for a stencil of {expected} neighbours")]
    LengthMismatch { given: usize, expected: usize },
    #[error("degenerate stencil geometry around element {center}: rank {rank} < {needed}")]
    DegenerateGeometry {
        center: usize,
        rank: usize,
        needed: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// `xᵏ/k!`: coefficients are the derivatives themselves.
    Monomial,
    /// Physicists' Hermite polynomials of `x/h`, shifted to vanish at 0.
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    order: usize,
    family: BasisFamily,
}

impl BasisSpec {
    pub fn new(order: usize, family: BasisFamily) -> Result<Self, FitError> {
        if order < 2 {
            return Err(FitError::OrderTooLow(order));
        }
        Ok(Self { order, family })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// `2·order + 2`
    pub fn default_neighbors(&self) -> usize {
        2 * self.order + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub offsets: Vec<f64>,
}

impl Stencil {
    /// Builds a stencil from explicit offsets (neighbour indices are
    /// `0..offsets.len()`).
    pub fn from_offsets(offsets: Vec<f64>) -> Self {
        Self {
            center: usize::MAX,
            neighbors: (0..offsets.len()).collect(),
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Picks the `n_neighbors` points nearest `positions[i]`, excluding `i`.
///
/// `positions` must be sorted ascending. Equidistant candidates resolve to
/// the lower index. Neighbour indices are returned in ascending order.
pub fn select_stencil(positions: &[f64], i: usize, n_neighbors: usize) -> Result<Stencil, FitError> {
    let n = positions.len();
    if n_neighbors == 0 || n_neighbors + 1 > n || i >= n {
        return Err(FitError::EnsembleTooSmall {
            requested: n_neighbors,
            available: n,
        });
    }
    let x0 = positions[i];
    let (mut lo, mut hi) = (i, i + 1);
    while hi - lo - 1 < n_neighbors {
        let take_left = match (lo > 0, hi < n) {
            (true, true) => (x0 - positions[lo - 1]).abs() <= (positions[hi] - x0).abs(),
            (true, false) => true,
            (false, true) => false,
            (false, false) => unreachable!("stencil larger than ensemble"),
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let neighbors: Vec<usize> = (lo..hi).filter(|&j| j != i).collect();
    let offsets = neighbors.iter().map(|&j| positions[j] - x0).collect();
    Ok(Stencil {
        center: i,
        neighbors,
        offsets,
    })
}

/// `ωⱼ = exp(−α rⱼ²)` with `α` chosen so the farthest point gets
/// [`EDGE_WEIGHT`].
pub fn gaussian_weights(offsets: &[f64]) -> Result<Vec<f64>, FitError> {
    let r_max = offsets.iter().fold(0.0f64, |m, o| m.max(o.abs()));
    if !(r_max > 0.0) {
        return Err(FitError::ZeroOffsets);
    }
    let alpha = -EDGE_WEIGHT.ln() / (r_max * r_max);
    Ok(offsets
        .iter()
        .map(|&o| {
            if o.abs() == r_max {
                EDGE_WEIGHT
            } else {
                (-alpha * o * o).exp()
            }
        })
        .collect())
}

/// Ascending-power coefficients of the physicists' Hermite polynomials
/// `H₀ … H_order`.
fn hermite_coefficients(order: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![1.0]];
    if order == 0 {
        return h;
    }
    h.push(vec![0.0, 2.0]);
    for n in 1..order {
        let mut next = vec![0.0; n + 2];
        for (p, &c) in h[n].iter().enumerate() {
            next[p + 1] += 2.0 * c;
        }
        for (p, &c) in h[n - 1].iter().enumerate() {
            next[p] -= 2.0 * n as f64 * c;
        }
        h.push(next);
    }
    h
}

fn polyval(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Derivative jet of a local fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `derivatives[k]` is the `(k+1)`-th derivative at the centre.
    pub derivatives: Vec<f64>,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    /// `σ_max/σ_min` of the weighted design matrix.
    pub condition: f64,
    pub rank: usize,
}

impl FitResult {
    /// `k`-th derivative (1-based); zero beyond the fitted order.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k >= 1, "derivative order is 1-based");
        self.derivatives.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Re-expands the fitted polynomial about `x₀ + shift`.
    pub fn shifted(&self, shift: f64) -> FitResult {
        let p = self.derivatives.len();
        let derivatives = (1..=p)
            .map(|j| {
                (j..=p)
                    .map(|k| self.derivatives[k - 1] * shift.powi((k - j) as i32) / factorial(k - j))
                    .sum()
            })
            .collect();
        FitResult {
            derivatives,
            ..self.clone()
        }
    }
}

/// Pseudo-inverse of the weighted design matrix for one stencil, reusable
/// across every field sampled on the same points.
#[derive(Debug, Clone)]
pub struct LocalFit {
    center: usize,
    neighbors: Vec<usize>,
    order: usize,
    weights: Vec<f64>,
    /// Weighted design matrix, `n × order`, row-major.
    design: Vec<f64>,
    /// Pseudo-inverse, `order × n`, row-major.
    pinv: Vec<f64>,
    /// Coefficient → derivative map, `order × order`, row-major.
    to_derivative: Vec<f64>,
    condition: f64,
    rank: usize,
}

impl LocalFit {
    pub fn new(stencil: &Stencil, basis: &BasisSpec) -> Result<Self, FitError> {
        let n = stencil.len();
        let p = basis.order;
        if n < p {
            return Err(FitError::InsufficientNeighbors {
                center: stencil.center,
                neighbors: n,
                order: p,
            });
        }
        let weights = gaussian_weights(&stencil.offsets)?;
        let h = stencil.offsets.iter().fold(0.0f64, |m, o| m.max(o.abs()));

        let mut to_derivative = vec![0.0; p * p];
        let mut design = DMatrix::<f64>::zeros(n, p);
        match basis.family {
            BasisFamily::Monomial => {
                for (j, (&s, &w)) in stencil.offsets.iter().zip(&weights).enumerate() {
                    let mut term = 1.0;
                    for k in 1..=p {
                        term *= s / k as f64;
                        design[(j, k - 1)] = w * term;
                    }
                }
                for k in 0..p {
                    to_derivative[k * p + k] = 1.0;
                }
            }
            BasisFamily::Hermite => {
                let herm = hermite_coefficients(p);
                for (j, (&s, &w)) in stencil.offsets.iter().zip(&weights).enumerate() {
                    let u = s / h;
                    for k in 1..=p {
                        design[(j, k - 1)] = w * (polyval(&herm[k], u) - herm[k][0]);
                    }
                }
                // d^m/ds^m Hₖ(s/h) at 0 = c_{k,m}·m!/h^m
                for m in 1..=p {
                    let scale = factorial(m) / h.powi(m as i32);
                    for k in m..=p {
                        to_derivative[(m - 1) * p + (k - 1)] = herm[k][m] * scale;
                    }
                }
            }
        }

        let svd = design.clone().svd(true, true);
        let sigma = &svd.singular_values;
        let s_max = sigma.iter().cloned().fold(0.0f64, f64::max);
        let s_min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        let cutoff = SVD_RELATIVE_CUTOFF * s_max;
        let rank = sigma.iter().filter(|&&s| s > cutoff).count();
        if rank < p {
            return Err(FitError::DegenerateGeometry {
                center: stencil.center,
                rank,
                needed: p,
            });
        }
        let u = svd.u.as_ref().expect("svd computed with u");
        let vt = svd.v_t.as_ref().expect("svd computed with v_t");
        let mut pinv = vec![0.0; p * n];
        for (q, &s) in sigma.iter().enumerate() {
            if s <= cutoff {
                continue;
            }
            let inv = 1.0 / s;
            for r in 0..p {
                let vr = vt[(q, r)] * inv;
                for j in 0..n {
                    pinv[r * n + j] += vr * u[(j, q)];
                }
            }
        }

        let mut design_rm = vec![0.0; n * p];
        for j in 0..n {
            for k in 0..p {
                design_rm[j * p + k] = design[(j, k)];
            }
        }

        Ok(Self {
            center: stencil.center,
            neighbors: stencil.neighbors.clone(),
            order: p,
            weights,
            design: design_rm,
            pinv,
            to_derivative,
            condition: if s_min > 0.0 { s_max / s_min } else { f64::INFINITY },
            rank,
        })
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fits `values` (neighbour samples, aligned with the stencil) given the
    /// value at the centre.
    pub fn fit(&self, center_value: f64, values: &[f64]) -> Result<FitResult, FitError> {
        let n = self.weights.len();
        let p = self.order;
        if values.len() != n {
            return Err(FitError::LengthMismatch {
                given: values.len(),
                expected: n,
            });
        }
        let rhs: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(&f, &w)| w * (f - center_value))
            .collect();
        let coeffs: Vec<f64> = (0..p)
            .map(|r| self.pinv[r * n..(r + 1) * n].iter().zip(&rhs).map(|(a, b)| a * b).sum())
            .collect();
        let chi2 = (0..n)
            .map(|j| {
                let model: f64 = self.design[j * p..(j + 1) * p]
                    .iter()
                    .zip(&coeffs)
                    .map(|(a, c)| a * c)
                    .sum();
                let r = rhs[j] - model;
                r * r
            })
            .sum();
        let derivatives = (0..p)
            .map(|m| {
                self.to_derivative[m * p..(m + 1) * p]
                    .iter()
                    .zip(&coeffs)
                    .map(|(d, c)| d * c)
                    .sum()
            })
            .collect();
        Ok(FitResult {
            derivatives,
            chi2,
            condition: self.condition,
            rank: self.rank,
        })
    }
}

impl LocalFit {
    /// Fits a field given on the whole ensemble, gathering the stencil
    /// samples by index.
    pub fn fit_field(&self, field: &[f64]) -> Result<FitResult, FitError> {
        let samples: Vec<f64> = self.neighbors.iter().map(|&j| field[j]).collect();
        self.fit(field[self.center], &samples)
    }
}

/// One-shot weighted fit of `values` sampled on `stencil`.
pub fn fit_local_polynomial(
    center_value: f64,
    values: &[f64],
    stencil: &Stencil,
    basis: &BasisSpec,
) -> Result<FitResult, FitError> {
    LocalFit::new(stencil, basis)?.fit(center_value, values)
}

/// `Q = −(ħ²/4m)(g″ + g′²/2)` from a jet of `g = ln ρ`.
pub fn quantum_potential(g_jet: &FitResult, system: &PhysicalSystem) -> f64 {
    let (g1, g2) = (g_jet.derivative(1), g_jet.derivative(2));
    -system.hbar().powi(2) / (4.0 * system.mass()) * (g2 + 0.5 * g1 * g1)
}

/// `−∂ₓQ = (ħ²/4m)(g‴ + g′g″)`. A second-order jet has `g‴ = 0`.
pub fn quantum_force(g_jet: &FitResult, system: &PhysicalSystem) -> f64 {
    let (g1, g2, g3) = (g_jet.derivative(1), g_jet.derivative(2), g_jet.derivative(3));
    system.hbar().powi(2) / (4.0 * system.mass()) * (g3 + g1 * g2)
}

/// `∇·v` from a jet fitted to the raw velocity field.
pub fn velocity_divergence(v_jet: &FitResult) -> f64 {
    v_jet.derivative(1)
}
