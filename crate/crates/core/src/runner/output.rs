//! Columnar text output: `#`-prefixed headers, space-delimited values,
//! blank lines between blocks.

use std::fmt::Write as _;
use std::path::Path;

use super::compare::{ComparisonReport, TrajectorySet};
use super::experiment::EngineRun;
use super::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Full per-element records, one block per sample time.
    Records,
    /// `t x_1 … x_n`
    Trajectories,
    /// Blocks of `x ρ Q V V+Q`.
    DensitySnapshots,
    /// `t Q(0) V_eff`
    BarrierSeries,
}

/// Ordered key/value pairs written as `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn put(&mut self, key: &str, value: String) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# qhydro run manifest\n");
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        write_file(path, &self.render())
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::io(path, e))
}

fn num(s: &mut String, v: f64) {
    let _ = write!(s, " {v:.12e}");
}

fn end_row(s: &mut String) {
    // drop the leading separator of the row
    let start = s.rfind('\n').map_or(0, |p| p + 1);
    if s[start..].starts_with(' ') {
        s.remove(start);
    }
    s.push('\n');
}

pub fn render_plot_data(run: &EngineRun, kind: PlotKind) -> String {
    let mut s = String::new();
    let engine = run.engine.name();
    match kind {
        PlotKind::Records => {
            let _ = writeln!(s, "# engine {engine}; one block per sample time");
            let _ = writeln!(
                s,
                "# index x[bohr] v[bohr/au] rho[1/bohr] Q[hartree] V[hartree] S[hbar] logJ E[hartree]"
            );
            for f in &run.record.frames {
                let _ = writeln!(s, "# t = {:.12e}", f.t);
                for i in 0..f.x.len() {
                    let _ = write!(s, "{}", i + 1);
                    for v in [
                        f.x[i],
                        f.v[i],
                        f.rho[i],
                        f.q[i],
                        f.potential[i],
                        f.action[i],
                        f.log_jacobian[i],
                        f.energy[i],
                    ] {
                        num(&mut s, v);
                    }
                    s.push('\n');
                }
                s.push('\n');
            }
        }
        PlotKind::Trajectories => {
            let n = run.record.frames.first().map_or(0, |f| f.x.len());
            let _ = writeln!(s, "# engine {engine}; positions in bohr, labels 1..{n} from the left at t = 0");
            let mut header = String::from("# t[au]");
            for i in 1..=n {
                let _ = write!(header, " x_{i}");
            }
            let _ = writeln!(s, "{header}");
            for f in &run.record.frames {
                num(&mut s, f.t);
                for &x in &f.x {
                    num(&mut s, x);
                }
                end_row(&mut s);
            }
        }
        PlotKind::DensitySnapshots => {
            let _ = writeln!(s, "# engine {engine}; one block per snapshot time");
            let _ = writeln!(s, "# x[bohr] rho[1/bohr] Q[hartree] V[hartree] V+Q[hartree]");
            for snap in &run.snapshots {
                let _ = writeln!(s, "# t = {:.12e}", snap.t);
                for j in 0..snap.x.len() {
                    for v in [
                        snap.x[j],
                        snap.rho[j],
                        snap.q[j],
                        snap.potential[j],
                        snap.potential[j] + snap.q[j],
                    ] {
                        num(&mut s, v);
                    }
                    end_row(&mut s);
                }
                s.push('\n');
            }
        }
        PlotKind::BarrierSeries => {
            let _ = writeln!(
                s,
                "# engine {engine}; effective barrier V_eff = Q(0) + V_b relative to the well bottom"
            );
            let _ = writeln!(s, "# t[au] Q0[hartree] V_eff[cm-1]");
            for b in &run.barrier {
                for v in [b.t, b.q0, b.v_eff] {
                    num(&mut s, v);
                }
                end_row(&mut s);
            }
        }
    }
    s
}

/// Writes one plot-ready file of the requested kind.
pub fn emit_plot_data(run: &EngineRun, kind: PlotKind, path: &Path) -> Result<(), RunError> {
    write_file(path, &render_plot_data(run, kind))
}

pub fn render_comparison(report: &ComparisonReport, a: &TrajectorySet, b: &TrajectorySet) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# trajectory deviations over t in [{}, {}]",
        report.window.0, report.window.1
    );
    let _ = writeln!(s, "# label max_dev[bohr] rms_dev[bohr] t_at_max[au]");
    for p in &report.pairs {
        let _ = write!(s, "{}", p.label);
        for v in [p.max_deviation, p.rms_deviation, p.t_at_max] {
            num(&mut s, v);
        }
        s.push('\n');
    }
    for &k in &report.highlighted {
        let _ = writeln!(s, "\n# trajectory {k}");
        let _ = writeln!(s, "# t[au] x_a[bohr] x_b[bohr]");
        for &t in &report.times {
            let (Some(xa), Some(xb)) = (a.position_at(k - 1, t), b.position_at(k - 1, t)) else {
                continue;
            };
            for v in [t, xa, xb] {
                num(&mut s, v);
            }
            end_row(&mut s);
        }
    }
    s
}

pub fn write_comparison(
    report: &ComparisonReport,
    a: &TrajectorySet,
    b: &TrajectorySet,
    path: &Path,
) -> Result<(), RunError> {
    write_file(path, &render_comparison(report, a, b))
}

/// Reads a trajectories file written by [`emit_plot_data`].
pub fn parse_trajectories(text: &str) -> Result<TrajectorySet, RunError> {
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let vals = vals.map_err(|e| RunError::Engine(format!("line {}: {e}", n + 1)))?;
        let (t, xs) = vals
            .split_first()
            .ok_or_else(|| RunError::Engine(format!("line {}: empty row", n + 1)))?;
        times.push(*t);
        rows.push(xs.to_vec());
    }
    Ok(TrajectorySet::new(times, rows)?)
}

pub fn read_trajectories(path: &Path) -> Result<TrajectorySet, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    parse_trajectories(&text)
}
