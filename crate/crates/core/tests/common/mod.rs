#![allow(dead_code)]

use mmc_core::rng::unit;
use mmc_core::{CellField, GridSpec, PhaseState};

/// Deterministic stream of uniforms for building test data.
pub struct Draws {
    seed: u64,
    k: u64,
}

impl Draws {
    pub fn new(seed: u64) -> Self {
        Self { seed, k: 0 }
    }

    pub fn next(&mut self) -> f64 {
        self.k += 1;
        unit(self.seed, self.k)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    /// A point with all three phases at least `margin`.
    pub fn gibbs_point(&mut self, margin: f64) -> (f64, f64) {
        let a = self.uniform(margin, 1.0 - 2.0 * margin);
        let b = self.uniform(margin, 1.0 - margin - a);
        (a, b)
    }

    /// A state with every cell at least 0.05 inside the triangle.
    pub fn state(&mut self, n: usize, l: f64) -> PhaseState {
        let s = GridSpec::new(n, l).unwrap();
        let pts: Vec<(f64, f64)> = (0..n * n).map(|_| self.gibbs_point(0.05)).collect();
        PhaseState::new(
            CellField::from_vec(s, pts.iter().map(|p| p.0).collect()).unwrap(),
            CellField::from_vec(s, pts.iter().map(|p| p.1).collect()).unwrap(),
        )
        .unwrap()
    }
}

/// Central second-difference Hessian with step `h`.
pub fn fd_hessian<const D: usize>(f: impl Fn([f64; D]) -> f64, x: [f64; D], h: f64) -> [[f64; D]; D] {
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x;
        y[di] += si * h;
        y[dj] += sj * h;
        f(y)
    };
    let mut out = [[0.0; D]; D];
    for i in 0..D {
        out[i][i] = (at(i, 1.0, i, 0.0) - 2.0 * f(x) + at(i, -1.0, i, 0.0)) / (h * h);
        for j in 0..i {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn eig2(m: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0]).sqrt();
    [mean - r, mean + r]
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending, by the trigonometric formula.
pub fn eig3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let p2 = (0..3).map(|i| (m[i][i] - q).powi(2)).sum::<f64>() + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| (m[i][j] - if i == j { q } else { 0.0 }) / p));
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [lo, 3.0 * q - hi - lo, hi]
}
