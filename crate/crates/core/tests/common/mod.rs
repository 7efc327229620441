//! Reference computations shared by the integration tests. Nothing here
//! calls into the crate's right-hand side or integrators.

#![allow(dead_code)]

/// Closed-form single-rumor SIR field, stepped by forward Euler.
///
/// `x0` and each returned sample are `[s, ia, r]`; samples are taken every
/// `sample_every` steps, starting with the initial state.
pub fn sir_euler(x0: [f64; 3], beta: f64, gamma: f64, dt: f64, steps: u64, sample_every: u64) -> Vec<[f64; 3]> {
    let [mut s, mut i, mut r] = x0;
    let mut out = vec![[s, i, r]];
    for k in 1..=steps {
        let inf = beta * i * s;
        let rec = gamma * i;
        s -= dt * inf;
        i += dt * (inf - rec);
        r += dt * rec;
        if k % sample_every == 0 {
            out.push([s, i, r]);
        }
    }
    out
}

/// Richardson combination `2 f(h/2) - f(h)` of two Euler solutions,
/// cancelling the first-order error term.
pub fn sir_euler_extrapolated(
    x0: [f64; 3],
    beta: f64,
    gamma: f64,
    dt: f64,
    steps: u64,
    sample_every: u64,
) -> Vec<[f64; 3]> {
    let coarse = sir_euler(x0, beta, gamma, dt, steps, sample_every);
    let fine = sir_euler(x0, beta, gamma, dt / 2.0, 2 * steps, 2 * sample_every);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| [2.0 * f[0] - c[0], 2.0 * f[1] - c[1], 2.0 * f[2] - c[2]])
        .collect()
}

/// Composite trapezoid rule on arbitrary abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}
