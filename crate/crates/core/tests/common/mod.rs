//! Test-side oracles that share no code with the library: Gauss-Legendre
//! nodes by Newton iteration, a collapsed (Duffy) tensor rule on triangles
//! and the Aliev-Panfilov kinetics written out by hand.
#![allow(dead_code)]

pub type P = [f64; 2];

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// Integral over the triangle `t` of `f(x, lambda)` with `n x n` collapsed
/// Gauss points; exact for polynomials of degree `2n - 2`.
pub fn integrate_triangle(t: &[P; 3], n: usize, f: impl Fn(P, [f64; 3]) -> f64) -> f64 {
    let gl = gauss_legendre(n);
    let area2 = ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1])
        - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
        .abs();
    let mut sum = 0.0;
    for &(s, ws) in &gl {
        for &(r, wr) in &gl {
            let (l1, l2) = (s, r * (1.0 - s));
            let l0 = 1.0 - l1 - l2;
            let x = [
                l0 * t[0][0] + l1 * t[1][0] + l2 * t[2][0],
                l0 * t[0][1] + l1 * t[1][1] + l2 * t[2][1],
            ];
            sum += ws * wr * (1.0 - s) * f(x, [l0, l1, l2]);
        }
    }
    sum * area2
}

/// Gradients of the three barycentric coordinates, from the inverse of the
/// affine map's Jacobian.
pub fn barycentric_gradients(t: &[P; 3]) -> [P; 3] {
    let (a, b) = (
        [t[1][0] - t[0][0], t[1][1] - t[0][1]],
        [t[2][0] - t[0][0], t[2][1] - t[0][1]],
    );
    let det = a[0] * b[1] - a[1] * b[0];
    let g1 = [b[1] / det, -b[0] / det];
    let g2 = [-a[1] / det, a[0] / det];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

pub fn gradient(t: &[P; 3], values: [f64; 3]) -> P {
    let g = barycentric_gradients(t);
    [
        values[0] * g[0][0] + values[1] * g[1][0] + values[2] * g[2][0],
        values[0] * g[0][1] + values[1] * g[1][1] + values[2] * g[2][1],
    ]
}

pub const A: f64 = 8.0;
pub const THRESHOLD: f64 = 0.15;
pub const EPS: f64 = 0.2;

pub fn f(u: f64, w: f64) -> f64 {
    A * u * (u - THRESHOLD) * (u - 1.0) + u * w
}

pub fn g(u: f64, w: f64) -> f64 {
    EPS * (A * u * (u - 1.0 - THRESHOLD) + w)
}

/// `(f_u, f_w, g_u, g_w)`.
pub fn jacobian(u: f64, w: f64) -> (f64, f64, f64, f64) {
    (
        A * (3.0 * u * u - 2.0 * (1.0 + THRESHOLD) * u + THRESHOLD) + w,
        u,
        EPS * A * (2.0 * u - 1.0 - THRESHOLD),
        EPS,
    )
}

pub fn dist(a: P, b: P) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
