//! Built-in experiment configurations.

pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "harmonic-A",
        "m = 2000 Gaussian (x0 = 3, beta = 0.3) in a harmonic well, 10 periods",
        r#"
name = "harmonic-A"
engine = "mwls"

[system]
potential = "harmonic"
mass = 2000.0
period = 888.57
x0 = 3.0
beta = 0.3
n_particles = 100

[integration]
t_end = 8885.7
"#,
    ),
    (
        "harmonic-B",
        "as harmonic-A with m = 200, one period",
        r#"
name = "harmonic-B"
engine = "mwls"

[system]
potential = "harmonic"
mass = 200.0
period = 888.57
x0 = 3.0
beta = 0.3
n_particles = 100
"#,
    ),
    (
        "harmonic-C",
        "coherent state (beta = m omega), checked against the closed form",
        r#"
name = "harmonic-C"
engine = "mwls"

[system]
potential = "harmonic"
mass = 2000.0
period = 888.57
x0 = 3.0
coherent = true
n_particles = 100

[compare]
against = "analytic"
"#,
    ),
    (
        "harmonic-D",
        "classical trajectories (Q = 0) from the harmonic-A initial conditions",
        r#"
name = "harmonic-D"
engine = "classical"

[system]
potential = "harmonic"
mass = 2000.0
period = 888.57
x0 = 3.0
beta = 0.3
n_particles = 100
"#,
    ),
    (
        "doublewell-mwls",
        "0.007x^4 - 0.01x^2, packet in the right well, MWLS until crossing",
        r#"
name = "doublewell-mwls"
engine = "mwls"

[system]
potential = "double-well"
a = 0.007
b = 0.01
n_particles = 100

[integration]
t_end = 1000.0
"#,
    ),
    (
        "doublewell-dvr",
        "same double-well packet propagated on a sine DVR with pilot trajectories",
        r#"
name = "doublewell-dvr"
engine = "dvr"

[system]
potential = "double-well"
a = 0.007
b = 0.01
n_particles = 100

[integration]
t_end = 1000.0

[dvr]
n_points = 200
x_left = -2.5
x_right = 2.5
"#,
    ),
    (
        "doublewell-compare",
        "MWLS against DVR trajectories for the double well",
        r#"
name = "doublewell-compare"
engine = "mwls"

[system]
potential = "double-well"
a = 0.007
b = 0.01
n_particles = 100

[integration]
t_end = 1000.0

[compare]
against = "dvr"
highlight = [9, 38, 39, 50]
"#,
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _, _)| *n == name).map(|(_, _, text)| *text)
}
