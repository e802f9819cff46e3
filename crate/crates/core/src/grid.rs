//! Doubly periodic staggered grid: cell-centered and edge-centered fields,
//! the difference/average operator calculus, grid inner products and norms.
//!
//! Cells are indexed `0..N` along each axis with centers at `((i + 1/2) h, (j + 1/2) h)`.
//! The x-edge `(i + 1/2, j)` is stored in slot `(i, j)`, likewise for y-edges.
//! Storage is row-major in `(i, j)`: slot `i * N + j`.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    l: f64,
    h: f64,
}

impl GridSpec {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("N = {n} but at least 4 cells are required")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length {l} must be positive")));
        }
        Ok(Self { n, l, h: l / n as f64 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l(&self) -> f64 {
        self.l
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Cell-center coordinate along either axis.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn next(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn prev(&self, i: usize) -> usize {
        if i == 0 {
            self.n - 1
        } else {
            i - 1
        }
    }

    pub fn area(&self) -> f64 {
        self.l * self.l
    }

    /// The grid with half as many cells per axis, if it still has at least 4.
    pub fn coarsen(&self) -> Option<GridSpec> {
        if self.n % 2 == 0 && self.n / 2 >= 4 {
            GridSpec::new(self.n / 2, self.l).ok()
        } else {
            None
        }
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.n != other.n || self.l != other.l {
            return Err(Error::GridMismatch(format!(
                "N={} L={} vs N={} L={}",
                self.n, self.l, other.n, other.l
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Scalar field on cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self { spec, values: vec![c; spec.len()] }
    }

    pub fn from_vec(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                spec.n,
                spec.n
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = spec.n;
        let mut values = Vec::with_capacity(spec.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { spec, values }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Value at `(i, j)` with periodic extension.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.spec.n as isize;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        self.values[self.spec.idx(i, j)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.spec.idx(i, j);
        self.values[k] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> CellField {
        debug_assert_eq!(self.spec, other.spec);
        CellField {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> CellField {
        self.map(|v| a * v)
    }

    /// Sequential row-major sum.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Grid mean `(h^2 / L^2) sum(v)`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.spec.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn subtract_mean(&self) -> CellField {
        let m = self.mean();
        self.map(|v| v - m)
    }
}

impl Add for &CellField {
    type Output = CellField;
    fn add(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &CellField {
    type Output = CellField;
    fn sub(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&CellField> for f64 {
    type Output = CellField;
    fn mul(self, rhs: &CellField) -> CellField {
        rhs.scale(self)
    }
}

/// Scalar field on x- or y-edge centers.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    spec: GridSpec,
    axis: Axis,
    values: Vec<f64>,
}

impl EdgeField {
    pub fn constant(spec: GridSpec, axis: Axis, c: f64) -> Self {
        Self { spec, axis, values: vec![c; spec.len()] }
    }

    pub fn from_vec(spec: GridSpec, axis: Axis, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} edge values for a {}x{} grid",
                values.len(),
                spec.n,
                spec.n
            )));
        }
        Ok(Self { spec, axis, values })
    }

    pub fn from_fn(spec: GridSpec, axis: Axis, f: impl FnMut(usize, usize) -> f64) -> Self {
        let CellField { values, .. } = CellField::from_fn(spec, f);
        Self { spec, axis, values }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn axis(&self) -> Axis {
        self.axis
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> EdgeField {
        EdgeField { spec: self.spec, axis: self.axis, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &EdgeField, f: impl Fn(f64, f64) -> f64) -> EdgeField {
        debug_assert_eq!(self.spec, other.spec);
        debug_assert_eq!(self.axis, other.axis);
        EdgeField {
            spec: self.spec,
            axis: self.axis,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.spec.len() as f64
    }
}

/// Pair of x- and y-edge fields on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVectorField {
    pub fx: EdgeField,
    pub fy: EdgeField,
}

/// Positive edge weights for `div(D grad .)`.
pub type EdgeVectorWeights = EdgeVectorField;

impl EdgeVectorField {
    pub fn new(fx: EdgeField, fy: EdgeField) -> Result<Self> {
        if fx.axis != Axis::X || fy.axis != Axis::Y {
            return Err(Error::AxisMismatch { expected: Axis::X, found: fx.axis });
        }
        fx.spec.check_same(&fy.spec)?;
        Ok(Self { fx, fy })
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self { fx: EdgeField::constant(spec, Axis::X, c), fy: EdgeField::constant(spec, Axis::Y, c) }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.fx.spec
    }

    fn check_positive(&self) -> Result<()> {
        let m = self.fx.min().min(self.fy.min());
        if !(m > 0.0) {
            return Err(Error::Domain { what: "edge diffusion weight", value: m });
        }
        Ok(())
    }
}

/// `D_x` / `D_y`: forward difference from cells to edges.
pub fn cell_to_edge_diff(v: &CellField, axis: Axis) -> EdgeField {
    let s = v.spec;
    let inv_h = 1.0 / s.h;
    EdgeField::from_fn(s, axis, |i, j| match axis {
        Axis::X => (v.get(s.next(i), j) - v.get(i, j)) * inv_h,
        Axis::Y => (v.get(i, s.next(j)) - v.get(i, j)) * inv_h,
    })
}

/// `A_x` / `A_y`: average from cells to edges.
pub fn cell_to_edge_avg(v: &CellField, axis: Axis) -> EdgeField {
    let s = v.spec;
    EdgeField::from_fn(s, axis, |i, j| match axis {
        Axis::X => 0.5 * (v.get(s.next(i), j) + v.get(i, j)),
        Axis::Y => 0.5 * (v.get(i, s.next(j)) + v.get(i, j)),
    })
}

fn check_axis(f: &EdgeField, axis: Axis) -> Result<()> {
    if f.axis != axis {
        return Err(Error::AxisMismatch { expected: axis, found: f.axis });
    }
    Ok(())
}

/// `d_x` / `d_y`: backward difference from edges to cells.
pub fn edge_to_cell_diff(f: &EdgeField, axis: Axis) -> Result<CellField> {
    check_axis(f, axis)?;
    let s = f.spec;
    let inv_h = 1.0 / s.h;
    Ok(CellField::from_fn(s, |i, j| match axis {
        Axis::X => (f.get(i, j) - f.get(s.prev(i), j)) * inv_h,
        Axis::Y => (f.get(i, j) - f.get(i, s.prev(j))) * inv_h,
    }))
}

/// `a_x` / `a_y`: average from edges to cells.
pub fn edge_to_cell_avg(f: &EdgeField, axis: Axis) -> Result<CellField> {
    check_axis(f, axis)?;
    let s = f.spec;
    Ok(CellField::from_fn(s, |i, j| match axis {
        Axis::X => 0.5 * (f.get(i, j) + f.get(s.prev(i), j)),
        Axis::Y => 0.5 * (f.get(i, j) + f.get(i, s.prev(j))),
    }))
}

pub fn gradient(v: &CellField) -> EdgeVectorField {
    EdgeVectorField { fx: cell_to_edge_diff(v, Axis::X), fy: cell_to_edge_diff(v, Axis::Y) }
}

pub fn divergence(f: &EdgeVectorField) -> CellField {
    // Components are axis-tagged by construction.
    let dx = edge_to_cell_diff(&f.fx, Axis::X).expect("x component");
    let dy = edge_to_cell_diff(&f.fy, Axis::Y).expect("y component");
    &dx + &dy
}

/// Five-point periodic Laplacian.
pub fn laplacian(v: &CellField) -> CellField {
    let s = v.spec;
    let inv_h2 = 1.0 / (s.h * s.h);
    CellField::from_fn(s, |i, j| {
        let c = v.get(i, j);
        (v.get(s.next(i), j) + v.get(s.prev(i), j) + v.get(i, s.next(j)) + v.get(i, s.prev(j))
            - 4.0 * c)
            * inv_h2
    })
}

/// `div(D grad v)` with `D` given on edges.
pub fn weighted_laplacian(d: &EdgeVectorWeights, v: &CellField) -> Result<CellField> {
    d.spec().check_same(&v.spec)?;
    d.check_positive()?;
    Ok(weighted_laplacian_unchecked(d, v))
}

pub(crate) fn weighted_laplacian_unchecked(d: &EdgeVectorWeights, v: &CellField) -> CellField {
    let g = gradient(v);
    let flux = EdgeVectorField {
        fx: g.fx.zip_map(&d.fx, |a, b| a * b),
        fy: g.fy.zip_map(&d.fy, |a, b| a * b),
    };
    divergence(&flux)
}

/// Cell inner product `h^2 sum(v xi)`.
pub fn cell_inner(a: &CellField, b: &CellField) -> Result<f64> {
    a.spec.check_same(&b.spec)?;
    let h2 = a.spec.h * a.spec.h;
    Ok(h2 * a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>())
}

/// Edge inner product `[f, g]_x = <a_x(f g), 1>` (or the y analogue).
pub fn edge_inner(f: &EdgeField, g: &EdgeField) -> Result<f64> {
    f.spec.check_same(&g.spec)?;
    if f.axis != g.axis {
        return Err(Error::AxisMismatch { expected: f.axis, found: g.axis });
    }
    let prod = f.zip_map(g, |a, b| a * b);
    let avg = edge_to_cell_avg(&prod, f.axis)?;
    Ok(avg.spec.h * avg.spec.h * avg.sum())
}

pub fn vector_inner(f: &EdgeVectorField, g: &EdgeVectorField) -> Result<f64> {
    Ok(edge_inner(&f.fx, &g.fx)? + edge_inner(&f.fy, &g.fy)?)
}

/// `||v||_p` for `1 <= p < inf`.
pub fn norm_p(v: &CellField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent p = {p} must be >= 1")));
    }
    if p.is_infinite() {
        return Ok(norm_inf(v));
    }
    let h2 = v.spec.h * v.spec.h;
    let s: f64 = if p == 2.0 {
        v.values.iter().map(|x| x * x).sum()
    } else {
        v.values.iter().map(|x| x.abs().powf(p)).sum()
    };
    Ok((h2 * s).powf(1.0 / p))
}

pub fn norm2(v: &CellField) -> f64 {
    let h2 = v.spec.h * v.spec.h;
    (h2 * v.values.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn norm_inf(v: &CellField) -> f64 {
    v.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `||grad_h v||_2`.
pub fn grad_norm(v: &CellField) -> f64 {
    let g = gradient(v);
    vector_inner(&g, &g).expect("same grid").sqrt()
}

pub fn h1_norm(v: &CellField) -> f64 {
    (norm2(v).powi(2) + grad_norm(v).powi(2)).sqrt()
}

pub fn h2_norm(v: &CellField) -> f64 {
    (h1_norm(v).powi(2) + norm2(&laplacian(v)).powi(2)).sqrt()
}


#[cfg(test)]
mod tests {
    use super::testutil::TestRng;
    use super::*;
    use std::f64::consts::PI;

    fn spec(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(3, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        let s = spec(8, 2.0);
        assert_eq!(s.h(), 0.25);
        assert_eq!(s.h() * s.n() as f64, s.l());
        assert_eq!(s.coarsen().unwrap().n(), 4);
        assert!(spec(4, 1.0).coarsen().is_none());
    }

    #[test]
    fn periodic_extension() {
        let s = spec(4, 1.0);
        let v = CellField::from_fn(s, |i, j| (10 * i + j) as f64);
        assert_eq!(v.at(4, 1), v.at(0, 1));
        assert_eq!(v.at(-1, 5), v.at(3, 1));
    }

    #[test]
    fn diff_of_constant_is_zero() {
        let v = CellField::constant(spec(8, 3.0), 2.5);
        for axis in [Axis::X, Axis::Y] {
            assert!(cell_to_edge_diff(&v, axis).values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn diff_of_sawtooth_wraps() {
        let s = spec(4, 4.0);
        let v = CellField::from_fn(s, |i, _| i as f64 * s.h());
        let d = cell_to_edge_diff(&v, Axis::X);
        for j in 0..4 {
            for i in 0..3 {
                assert_eq!(d.get(i, j), 1.0);
            }
            assert_eq!(d.get(3, j), 1.0 - 4.0);
        }
        let g = gradient(&v);
        assert!(g.fy.values().iter().all(|&x| x == 0.0));
        assert_eq!(g.fx, d);
    }

    #[test]
    fn diff_of_fourier_mode() {
        let s = spec(16, 2.0);
        let l = s.l();
        let h = s.h();
        let v = CellField::from_fn(s, |i, _| (2.0 * PI * s.center(i) / l).cos());
        let d = cell_to_edge_diff(&v, Axis::X);
        for i in 0..16 {
            let x = s.center(i);
            let expect = -(2.0 / h) * (PI * h / l).sin() * (2.0 * PI * (x + h / 2.0) / l).sin();
            assert!((d.get(i, 3) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn averages() {
        let s = spec(8, 1.0);
        let c = CellField::constant(s, 0.7);
        assert!(cell_to_edge_avg(&c, Axis::Y).values().iter().all(|&x| (x - 0.7).abs() < 1e-15));
        let alt = CellField::from_fn(s, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        assert!(cell_to_edge_avg(&alt, Axis::X).values().iter().all(|&x| x == 0.0));

        let mut rng = TestRng::new(1);
        let pos = rng.cell(s, 1e-3, 1.0);
        assert!(cell_to_edge_avg(&pos, Axis::X).min() > 0.0);

        let f = rng.edge(s, Axis::X, -1.0, 1.0);
        let a = edge_to_cell_avg(&f, Axis::X).unwrap();
        assert!((a.mean() - f.mean()).abs() < 1e-15);
        let fnn = rng.edge(s, Axis::Y, 0.0, 1.0);
        assert!(edge_to_cell_avg(&fnn, Axis::Y).unwrap().min() >= 0.0);
        let ce = EdgeField::constant(s, Axis::X, 3.0);
        assert!(edge_to_cell_avg(&ce, Axis::X).unwrap().values().iter().all(|&x| x == 3.0));
    }

    #[test]
    fn edge_ops_reject_wrong_axis() {
        let s = spec(4, 1.0);
        let f = EdgeField::constant(s, Axis::X, 1.0);
        assert!(matches!(edge_to_cell_diff(&f, Axis::Y), Err(Error::AxisMismatch { .. })));
        assert!(edge_to_cell_avg(&f, Axis::Y).is_err());
        assert!(edge_to_cell_diff(&f, Axis::X).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn composition_is_second_difference() {
        let s = spec(8, 1.0);
        let mut rng = TestRng::new(2);
        let v = rng.cell(s, -1.0, 1.0);
        let dd = edge_to_cell_diff(&cell_to_edge_diff(&v, Axis::X), Axis::X).unwrap();
        let h2 = s.h() * s.h();
        for i in 0..8 {
            for j in 0..8 {
                let expect = (v.at(i as isize + 1, j as isize) - 2.0 * v.get(i, j)
                    + v.at(i as isize - 1, j as isize))
                    / h2;
                assert!((dd.get(i, j) - expect).abs() < 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn divergence_has_zero_mean() {
        let s = spec(8, 1.0);
        let mut rng = TestRng::new(3);
        let f = rng.edge_vec(s, -1.0, 1.0);
        let d = divergence(&f);
        let finf = f.fx.values().iter().chain(f.fy.values()).fold(0.0_f64, |m, x| m.max(x.abs()));
        // Divided by h: differences of O(1) values carry an extra 1/h factor.
        assert!(d.mean().abs() <= 1e-14 * finf / s.h());
        let z = EdgeVectorField::constant(s, 0.0);
        assert!(divergence(&z).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_cases() {
        let s = spec(4, 4.0);
        let delta = CellField::from_fn(s, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        let lap = laplacian(&delta);
        assert_eq!(lap.get(0, 0), -4.0);
        for (i, j) in [(1, 0), (3, 0), (0, 1), (0, 3)] {
            assert_eq!(lap.get(i, j), 1.0);
        }
        assert_eq!(lap.get(2, 2), 0.0);
        assert_eq!(lap.get(1, 1), 0.0);

        let s = spec(32, 3.0);
        for k in 1..4 {
            let v = CellField::from_fn(s, |i, _| (2.0 * PI * k as f64 * s.center(i) / s.l()).cos());
            let lap = laplacian(&v);
            let lam = -(4.0 / (s.h() * s.h())) * (PI * k as f64 * s.h() / s.l()).sin().powi(2);
            for (a, b) in lap.values().iter().zip(v.values()) {
                assert!((a - lam * b).abs() < 1e-11);
            }
        }
        assert!(laplacian(&CellField::constant(s, 5.0)).values().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn div_grad_is_laplacian() {
        let mut rng = TestRng::new(4);
        for n in [4, 8, 16] {
            let s = spec(n, 1.7);
            let v = rng.cell(s, -1.0, 1.0);
            let a = divergence(&gradient(&v));
            let b = laplacian(&v);
            let scale = norm_inf(&b);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn weighted_laplacian_cases() {
        let s = spec(8, 1.0);
        let mut rng = TestRng::new(5);
        let v = rng.cell(s, -1.0, 1.0);
        let one = EdgeVectorField::constant(s, 1.0);
        let a = weighted_laplacian(&one, &v).unwrap();
        let b = laplacian(&v);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-13 * norm_inf(&b));
        }
        let d = rng.edge_vec(s, 0.1, 2.0);
        let c = CellField::constant(s, 1.3);
        assert!(weighted_laplacian(&d, &c).unwrap().values().iter().all(|&x| x.abs() < 1e-13));
        let q = cell_inner(&v, &weighted_laplacian(&d, &v).unwrap()).unwrap();
        assert!(q <= 0.0);

        let bad = EdgeVectorField::constant(s, 0.0);
        assert!(matches!(weighted_laplacian(&bad, &v), Err(Error::Domain { .. })));
    }

    #[test]
    fn inner_products_and_norms() {
        for n in [4, 8, 16] {
            let s = spec(n, 2.5);
            let one = CellField::constant(s, 1.0);
            assert!((cell_inner(&one, &one).unwrap() - 6.25).abs() < 1e-13);
            assert!((norm_p(&one, 2.0).unwrap() - 2.5).abs() < 1e-14);
        }
        let s = spec(8, 1.0);
        let mut rng = TestRng::new(6);
        let a = rng.cell(s, -1.0, 1.0);
        let b = rng.cell(s, -1.0, 1.0);
        let c = rng.cell(s, -1.0, 1.0);
        assert_eq!(cell_inner(&a, &b).unwrap(), cell_inner(&b, &a).unwrap());
        let lin = cell_inner(&(&a + &(2.0 * &c)), &b).unwrap();
        let sep = cell_inner(&a, &b).unwrap() + 2.0 * cell_inner(&c, &b).unwrap();
        assert!((lin - sep).abs() < 1e-14);

        let f = rng.edge(s, Axis::X, -1.0, 1.0);
        assert!(edge_inner(&f, &f).unwrap() > 0.0);
        assert_eq!(edge_inner(&EdgeField::constant(s, Axis::X, 0.0), &EdgeField::constant(s, Axis::X, 0.0)).unwrap(), 0.0);
        let g = rng.edge(s, Axis::Y, -1.0, 1.0);
        assert!(edge_inner(&f, &g).is_err());

        let delta = CellField::from_fn(s, |i, j| if (i, j) == (2, 5) { 3.0 } else { 0.0 });
        assert_eq!(norm_inf(&delta), 3.0);
        assert_eq!(norm_p(&delta, f64::INFINITY).unwrap(), 3.0);
        assert!(norm_p(&delta, 0.5).is_err());
        let n1 = norm_p(&a, 1.0).unwrap();
        let direct: f64 = a.values().iter().map(|x| x.abs()).sum::<f64>() * s.h() * s.h();
        assert!((n1 - direct).abs() < 1e-14);

        // ||grad v||^2 = <v, -lap v>
        let gn2 = grad_norm(&a).powi(2);
        let ip = -cell_inner(&a, &laplacian(&a)).unwrap();
        assert!((gn2 - ip).abs() <= 1e-13 * ip.abs());
        assert!(h2_norm(&a) >= h1_norm(&a));
        assert!(h1_norm(&a) >= norm2(&a));
    }

    #[test]
    fn summation_by_parts() {
        let mut rng = TestRng::new(7);
        for n in [4, 8, 16] {
            let s = spec(n, 1.3);
            let psi = rng.cell(s, -1.0, 1.0);
            let f = rng.edge_vec(s, -1.0, 1.0);
            let lhs = cell_inner(&psi, &divergence(&f)).unwrap();
            let rhs = vector_inner(&gradient(&psi), &f).unwrap();
            let fnorm = vector_inner(&f, &f).unwrap().sqrt();
            assert!((lhs + rhs).abs() <= 1e-13 * norm2(&psi) * fnorm / s.h());

            let d = rng.edge_vec(s, 0.2, 1.5);
            let nu = rng.cell(s, -1.0, 1.0);
            let lhs = cell_inner(&psi, &weighted_laplacian(&d, &nu).unwrap()).unwrap();
            let g = gradient(&nu);
            let dg = EdgeVectorField { fx: g.fx.zip_map(&d.fx, |a, b| a * b), fy: g.fy.zip_map(&d.fy, |a, b| a * b) };
            let rhs = vector_inner(&gradient(&psi), &dg).unwrap();
            assert!((lhs + rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn operators_are_linear() {
        let s = spec(8, 1.0);
        let mut rng = TestRng::new(8);
        let a = rng.cell(s, -1.0, 1.0);
        let b = rng.cell(s, -1.0, 1.0);
        let comb = &(1.5 * &a) + &(-0.25 * &b);
        let lhs = laplacian(&comb);
        let rhs = &(1.5 * &laplacian(&a)) + &(-0.25 * &laplacian(&b));
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(laplacian(&a).mean().abs() < 1e-13);
    }
}
