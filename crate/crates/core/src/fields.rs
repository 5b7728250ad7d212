//! Analytic initial data, forcings and manufactured solutions.

use std::f64::consts::PI;

use crate::mesh::Point;

/// `g(x) = x^2 (1 - x)^2` and its first four derivatives.
fn g(x: f64) -> [f64; 5] {
    let x2 = x * x;
    [
        x2 * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x2 + 4.0 * x2 * x,
        2.0 - 12.0 * x + 12.0 * x2,
        -12.0 + 24.0 * x,
        24.0,
    ]
}

/// Divergence-free polynomial velocity `u = (g(x) g'(y), -g'(x) g(y))`,
/// vanishing with its normal derivative on the unit square boundary.
pub fn mms_velocity(x: &Point) -> [f64; 3] {
    let (gx, gy) = (g(x[0]), g(x[1]));
    [gx[0] * gy[1], -gx[1] * gy[0], 0.0]
}

/// Gradient rows `grad[c] = grad u_c`.
pub fn mms_velocity_gradient(x: &Point) -> [[f64; 3]; 3] {
    let (gx, gy) = (g(x[0]), g(x[1]));
    [
        [gx[1] * gy[1], gx[0] * gy[2], 0.0],
        [-gx[2] * gy[0], -gx[1] * gy[1], 0.0],
        [0.0; 3],
    ]
}

/// Zero-mean pressure `x^3 + y^3 - 1/2`.
pub fn mms_pressure(x: &Point) -> f64 {
    x[0].powi(3) + x[1].powi(3) - 0.5
}

/// Body force making `(mms_velocity, mms_pressure)` a steady solution.
/// Without convection the `(u . grad) u` term is dropped.
pub fn mms_forcing(nu: f64, convection: bool, x: &Point) -> [f64; 3] {
    let (gx, gy) = (g(x[0]), g(x[1]));
    let lap = [
        gx[2] * gy[1] + gx[0] * gy[3],
        -gx[3] * gy[0] - gx[1] * gy[2],
    ];
    let grad_p = [3.0 * x[0] * x[0], 3.0 * x[1] * x[1]];
    let mut f = [0.0; 3];
    let u = mms_velocity(x);
    let du = mms_velocity_gradient(x);
    for c in 0..2 {
        f[c] = -nu * lap[c] + grad_p[c];
        if convection {
            f[c] += u[0] * du[c][0] + u[1] * du[c][1];
        }
    }
    f
}

/// Single-cell vortex on the unit square (3D: modulated by `sin(pi z)`).
pub fn vortex(dim: usize, x: &Point) -> [f64; 3] {
    let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
    let u = [
        sx * sx * (2.0 * PI * x[1]).sin(),
        -(2.0 * PI * x[0]).sin() * sy * sy,
        0.0,
    ];
    if dim == 3 {
        let sz = (PI * x[2]).sin();
        [u[0] * sz, u[1] * sz, 0.0]
    } else {
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Zero,
    Constant([f64; 3]),
    Manufactured { nu: f64, convection: bool },
}

impl Forcing {
    pub fn eval(&self, x: &Point) -> [f64; 3] {
        match *self {
            Forcing::Zero => [0.0; 3],
            Forcing::Constant(c) => c,
            Forcing::Manufactured { nu, convection } => mms_forcing(nu, convection, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    Zero,
    Vortex,
    Manufactured,
}

impl InitialCondition {
    pub fn eval(&self, dim: usize, x: &Point) -> [f64; 3] {
        match self {
            InitialCondition::Zero => [0.0; 3],
            InitialCondition::Vortex => vortex(dim, x),
            InitialCondition::Manufactured => mms_velocity(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&Point) -> f64>(f: F, x: &Point, d: usize) -> f64 {
        let e = 1e-5;
        let (mut a, mut b) = (*x, *x);
        a[d] += e;
        b[d] -= e;
        (f(&a) - f(&b)) / (2.0 * e)
    }

    #[test]
    fn manufactured_velocity_is_solenoidal_and_consistent() {
        for x in [[0.3, 0.7, 0.0], [0.11, 0.52, 0.0], [0.9, 0.25, 0.0]] {
            let du = mms_velocity_gradient(&x);
            assert!((du[0][0] + du[1][1]).abs() < 1e-15);
            for c in 0..2 {
                for d in 0..2 {
                    let num = fd(|y| mms_velocity(y)[c], &x, d);
                    assert!((num - du[c][d]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn manufactured_forcing_matches_finite_differences() {
        let nu = 0.3;
        let x = [0.37, 0.61, 0.0];
        let e = 1e-4;
        for c in 0..2 {
            let mut lap = 0.0;
            for d in 0..2 {
                let (mut a, mut b) = (x, x);
                a[d] += e;
                b[d] -= e;
                lap += (mms_velocity(&a)[c] - 2.0 * mms_velocity(&x)[c] + mms_velocity(&b)[c]) / (e * e);
            }
            let u = mms_velocity(&x);
            let conv: f64 = (0..2).map(|d| u[d] * fd(|y| mms_velocity(y)[c], &x, d)).sum();
            let gp = fd(mms_pressure, &x, c);
            let f = mms_forcing(nu, true, &x)[c];
            assert!((f - (-nu * lap + conv + gp)).abs() < 1e-6);
        }
    }

    #[test]
    fn vortex_vanishes_on_boundary() {
        for t in [0.0, 0.3, 0.8] {
            for x in [[0.0, t, 0.0], [1.0, t, 0.0], [t, 0.0, 0.0], [t, 1.0, 0.0]] {
                let v = vortex(2, &x);
                assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
            }
        }
    }
}
