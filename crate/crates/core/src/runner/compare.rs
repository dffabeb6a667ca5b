//! Trajectory-set comparison: per-pair position deviations over a time
//! window, after resampling one set onto the other's sample times.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("pairing mismatch: {0}")]
    Pairing(String),
    #[error("no overlapping samples in window [{start}, {end}]")]
    NoOverlap { start: f64, end: f64 },
    #[error("malformed trajectory set: {0}")]
    Malformed(String),
}

/// Positions of a fixed set of trajectories at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub times: Vec<f64>,
    /// `positions[s][i]`: trajectory `i` at sample `s`.
    pub positions: Vec<Vec<f64>>,
}

impl TrajectorySet {
    pub fn new(times: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self, CompareError> {
        if times.len() != positions.len() {
            return Err(CompareError::Malformed(format!(
                "{} times but {} position rows",
                times.len(),
                positions.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CompareError::Malformed("times must increase strictly".into()));
        }
        if let Some(first) = positions.first() {
            if positions.iter().any(|row| row.len() != first.len()) {
                return Err(CompareError::Malformed("rows differ in length".into()));
            }
        }
        Ok(Self { times, positions })
    }

    pub fn n_trajectories(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        self.positions.iter().map(|row| row[i]).collect()
    }

    /// Linear interpolation of trajectory `i` at `t`; `None` outside the
    /// sampled range.
    pub fn position_at(&self, i: usize, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(self.positions[0][i]);
        }
        if k == self.times.len() {
            return Some(self.positions[k - 1][i]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Some((1.0 - w) * self.positions[k - 1][i] + w * self.positions[k][i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDeviation {
    /// 1-based label, counted from the left at t = 0.
    pub label: usize,
    pub max_deviation: f64,
    pub rms_deviation: f64,
    pub t_at_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub window: (f64, f64),
    /// Sample times of the first set used in the comparison.
    pub times: Vec<f64>,
    pub pairs: Vec<PairDeviation>,
    pub highlighted: Vec<usize>,
}

impl ComparisonReport {
    pub fn pair(&self, label: usize) -> Option<&PairDeviation> {
        self.pairs.iter().find(|p| p.label == label)
    }
}

/// Initial positions must agree to this absolute tolerance for two sets to
/// be paired index by index.
pub const PAIRING_TOLERANCE: f64 = 1e-9;

/// Compares `a` and `b` on `a`'s sample times inside `window`, resampling `b`
/// linearly.
pub fn compare_trajectories(
    a: &TrajectorySet,
    b: &TrajectorySet,
    window: (f64, f64),
    highlight: &[usize],
) -> Result<ComparisonReport, CompareError> {
    let n = a.n_trajectories();
    if n != b.n_trajectories() {
        return Err(CompareError::Pairing(format!(
            "{n} trajectories against {}",
            b.n_trajectories()
        )));
    }
    if let (Some(ra), Some(rb)) = (a.positions.first(), b.positions.first()) {
        if let Some(i) = (0..n).find(|&i| (ra[i] - rb[i]).abs() > PAIRING_TOLERANCE) {
            return Err(CompareError::Pairing(format!(
                "trajectory {} starts at {} and {}",
                i + 1,
                ra[i],
                rb[i]
            )));
        }
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (s, &t) in a.times.iter().enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        let resampled: Option<Vec<f64>> = (0..n).map(|i| b.position_at(i, t)).collect();
        if let Some(row) = resampled {
            times.push(t);
            rows.push((s, row));
        }
    }
    if times.is_empty() {
        return Err(CompareError::NoOverlap {
            start: window.0,
            end: window.1,
        });
    }
    let pairs = (0..n)
        .map(|i| {
            let mut dev = PairDeviation {
                label: i + 1,
                max_deviation: 0.0,
                rms_deviation: 0.0,
                t_at_max: times[0],
            };
            let mut sq = 0.0;
            for ((s, row), &t) in rows.iter().zip(&times) {
                let d = (a.positions[*s][i] - row[i]).abs();
                sq += d * d;
                if d > dev.max_deviation {
                    dev.max_deviation = d;
                    dev.t_at_max = t;
                }
            }
            dev.rms_deviation = (sq / times.len() as f64).sqrt();
            dev
        })
        .collect();
    Ok(ComparisonReport {
        window,
        times,
        pairs,
        highlighted: highlight.iter().copied().filter(|&k| k >= 1 && k <= n).collect(),
    })
}

/// Signed departure of trajectory `i` from straight-line motion across
/// `window`: `x(t) − x(t₀) − ẋ(t₀)(t − t₀)`, taken where its magnitude peaks.
/// `ẋ(t₀)` is a one-sided difference over the sample preceding `t₀`.
pub fn deflection(set: &TrajectorySet, i: usize, window: (f64, f64)) -> Option<f64> {
    let s0 = set.times.iter().position(|&t| t >= window.0)?;
    if s0 == 0 {
        return None;
    }
    let (t0, x0) = (set.times[s0], set.positions[s0][i]);
    let v0 = (x0 - set.positions[s0 - 1][i]) / (t0 - set.times[s0 - 1]);
    let mut best: Option<f64> = None;
    for s in s0..set.times.len() {
        let t = set.times[s];
        if t > window.1 {
            break;
        }
        let d = set.positions[s][i] - x0 - v0 * (t - t0);
        if best.is_none_or(|b| d.abs() > b.abs()) {
            best = Some(d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(f: impl Fn(usize, f64) -> f64, n: usize, times: &[f64]) -> TrajectorySet {
        TrajectorySet::new(
            times.to_vec(),
            times.iter().map(|&t| (0..n).map(|i| f(i, t)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_sets_have_zero_deviation() {
        let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let a = set(|i, t| i as f64 + (0.1 * t).sin(), 5, &times);
        let r = compare_trajectories(&a, &a, (0.0, 100.0), &[1, 9]).unwrap();
        assert!(r.pairs.iter().all(|p| p.max_deviation == 0.0 && p.rms_deviation == 0.0));
        assert_eq!(r.highlighted, vec![1]);
    }

    #[test]
    fn resampling_is_linear_in_time() {
        let a = set(|i, t| i as f64 + 0.5 * t, 3, &[0.0, 1.0, 2.0, 3.0]);
        let b = set(|i, t| i as f64 + 0.5 * t, 3, &[0.0, 0.5, 3.0]);
        let r = compare_trajectories(&a, &b, (0.0, 3.0), &[]).unwrap();
        assert!(r.pairs.iter().all(|p| p.max_deviation < 1e-14));
        assert_eq!(b.position_at(2, 1.75), Some(2.875));
        assert_eq!(b.position_at(2, 3.5), None);
    }

    #[test]
    fn window_restricts_samples() {
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let a = set(|_, t| t, 2, &times);
        let b = set(|i, t| if t > 5.0 { t + 1.0 + i as f64 } else { t }, 2, &times);
        let early = compare_trajectories(&a, &b, (0.0, 5.0), &[]).unwrap();
        assert_eq!(early.pair(2).unwrap().max_deviation, 0.0);
        let late = compare_trajectories(&a, &b, (0.0, 9.0), &[]).unwrap();
        assert_eq!(late.pair(2).unwrap().max_deviation, 2.0);
        assert_eq!(late.pair(2).unwrap().t_at_max, 6.0);
        assert!(matches!(
            compare_trajectories(&a, &b, (20.0, 30.0), &[]),
            Err(CompareError::NoOverlap { .. })
        ));
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let times = [0.0, 1.0];
        let a = set(|i, _| i as f64, 3, &times);
        let b = set(|i, _| i as f64, 4, &times);
        assert!(matches!(compare_trajectories(&a, &b, (0.0, 1.0), &[]), Err(CompareError::Pairing(_))));
        let c = set(|i, _| i as f64 + 0.1, 3, &times);
        assert!(matches!(compare_trajectories(&a, &c, (0.0, 1.0), &[]), Err(CompareError::Pairing(_))));
    }

    #[test]
    fn malformed_sets_are_rejected() {
        assert!(TrajectorySet::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(TrajectorySet::new(vec![0.0, 1.0], vec![vec![1.0]]).is_err());
        assert!(TrajectorySet::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn deflection_measures_departure_from_ballistic_motion() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let s = set(
            |i, t| {
                let kick = if t > 50.0 { (t - 50.0) * 0.01 } else { 0.0 };
                0.2 * t + if i == 0 { -kick } else { kick }
            },
            2,
            &times,
        );
        let d0 = deflection(&s, 0, (50.0, 100.0)).unwrap();
        let d1 = deflection(&s, 1, (50.0, 100.0)).unwrap();
        assert!((d0 + 0.5).abs() < 1e-12 && (d1 - 0.5).abs() < 1e-12);
        assert!(deflection(&s, 0, (0.0, 10.0)).is_none());
    }
}
