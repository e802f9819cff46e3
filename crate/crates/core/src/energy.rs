//! Discrete Flory-Huggins-deGennes energy for the ternary MMC system, its
//! convex-concave split, and the variational derivatives of both parts.
//!
//! The phase pair `(phi1, phi2)` lives in the open Gibbs triangle; the third
//! phase is `phi3 = 1 - phi1 - phi2`. The convex part collects the ideal
//! entropy `S` and the deGennes gradient terms `eps_i^2 |grad phi_i|^2 / (36 phi_i)`;
//! the concave part is the (negated) mixing term `H`.

use crate::error::{Error, Result};
use crate::grid::{
    cell_inner, cell_to_edge_avg, cell_to_edge_diff, edge_to_cell_avg, edge_to_cell_diff, Axis,
    CellField, GridSpec,
};

/// Raw physical inputs, as read from a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub m0: f64,
    pub n0: f64,
    pub chi12: f64,
    pub chi13: f64,
    pub chi23: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub mob1: f64,
    pub mob2: f64,
}

impl Default for ModelSettings {
    /// Reference hydrogel parameters: `M0 = 0.16`, `N0 = 5.12`,
    /// `chi = (4, 10, 1.6)`, unit segment lengths and mobilities.
    fn default() -> Self {
        Self {
            m0: 0.16,
            n0: 5.12,
            chi12: 4.0,
            chi13: 10.0,
            chi23: 1.6,
            eps1: 1.0,
            eps2: 1.0,
            eps3: 1.0,
            mob1: 1.0,
            mob2: 1.0,
        }
    }
}

/// Validated model constants with the derived `alpha`, `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    settings: ModelSettings,
    alpha: f64,
    beta: f64,
}

impl ModelParams {
    pub fn new(settings: ModelSettings) -> Result<Self> {
        let s = &settings;
        let positive = [
            ("m0", s.m0),
            ("n0", s.n0),
            ("chi12", s.chi12),
            ("chi13", s.chi13),
            ("chi23", s.chi23),
            ("eps1", s.eps1),
            ("eps2", s.eps2),
            ("eps3", s.eps3),
            ("mob1", s.mob1),
            ("mob2", s.mob2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive and finite")));
            }
        }
        let disc = mixing_discriminant(s.chi12, s.chi13, s.chi23);
        if !(disc > 0.0) {
            return Err(Error::InvalidParams(format!(
                "4 chi13 chi23 - (chi12 - chi13 - chi23)^2 = {disc} must be positive for a concave mixing term"
            )));
        }
        Ok(Self::derive(settings))
    }

    fn derive(settings: ModelSettings) -> Self {
        let r = (settings.m0 / std::f64::consts::PI).sqrt();
        let alpha = std::f64::consts::PI * (r + settings.n0 / 2.0).powi(2);
        let beta = 2.0 * r + settings.n0;
        Self { settings, alpha, beta }
    }

    /// Constructs without the concavity check on the interaction parameters.
    /// Only for evaluating degenerate parameter sets in tests.
    #[doc(hidden)]
    pub fn new_unchecked(settings: ModelSettings) -> Self {
        Self::derive(settings)
    }

    pub fn reference() -> Self {
        Self::new(ModelSettings::default()).expect("reference parameters are valid")
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mobility(&self, c: Component) -> f64 {
        match c {
            Component::One => self.settings.mob1,
            Component::Two => self.settings.mob2,
        }
    }

    pub fn eps2(&self, c: Component) -> f64 {
        match c {
            Component::One => self.settings.eps1 * self.settings.eps1,
            Component::Two => self.settings.eps2 * self.settings.eps2,
        }
    }

    pub fn eps3_sq(&self) -> f64 {
        self.settings.eps3 * self.settings.eps3
    }

    /// The same model with the roles of components one and two exchanged.
    pub fn swapped(&self) -> Self {
        let s = self.settings;
        Self::derive(ModelSettings {
            m0: s.n0,
            n0: s.m0,
            chi13: s.chi23,
            chi23: s.chi13,
            eps1: s.eps2,
            eps2: s.eps1,
            mob1: s.mob2,
            mob2: s.mob1,
            ..s
        })
        .with_alpha_beta(self.beta, self.alpha)
    }

    fn with_alpha_beta(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }
}

fn mixing_discriminant(chi12: f64, chi13: f64, chi23: f64) -> f64 {
    4.0 * chi13 * chi23 - (chi12 - chi13 - chi23).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    One,
    Two,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::One, Component::Two];

    pub fn index(self) -> usize {
        match self {
            Component::One => 0,
            Component::Two => 1,
        }
    }
}

/// `(phi1, phi2)` with every cell inside the open Gibbs triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    phi1: CellField,
    phi2: CellField,
}

impl PhaseState {
    pub fn new(phi1: CellField, phi2: CellField) -> Result<Self> {
        if phi1.spec() != phi2.spec() {
            return Err(Error::GridMismatch("phase fields on different grids".into()));
        }
        check_gibbs(&phi1, &phi2)?;
        Ok(Self { phi1, phi2 })
    }

    pub fn constant(spec: GridSpec, c1: f64, c2: f64) -> Result<Self> {
        Self::new(CellField::constant(spec, c1), CellField::constant(spec, c2))
    }

    pub fn spec(&self) -> &GridSpec {
        self.phi1.spec()
    }

    pub fn phi1(&self) -> &CellField {
        &self.phi1
    }

    pub fn phi2(&self) -> &CellField {
        &self.phi2
    }

    pub fn phi(&self, c: Component) -> &CellField {
        match c {
            Component::One => &self.phi1,
            Component::Two => &self.phi2,
        }
    }

    /// `1 - phi1 - phi2`.
    pub fn phi3(&self) -> CellField {
        self.phi1.zip_map(&self.phi2, |a, b| 1.0 - a - b)
    }

    pub fn swapped(&self) -> PhaseState {
        PhaseState { phi1: self.phi2.clone(), phi2: self.phi1.clone() }
    }

    pub fn into_parts(self) -> (CellField, CellField) {
        (self.phi1, self.phi2)
    }
}

/// First cell (row-major) outside the open Gibbs triangle, as an error.
pub fn check_gibbs(phi1: &CellField, phi2: &CellField) -> Result<()> {
    let spec = *phi1.spec();
    for (k, (&a, &b)) in phi1.values().iter().zip(phi2.values()).enumerate() {
        if !in_gibbs(a, b) {
            return Err(Error::GibbsViolation { i: k / spec.n(), j: k % spec.n(), phi1: a, phi2: b });
        }
    }
    Ok(())
}

#[inline]
pub fn in_gibbs(a: f64, b: f64) -> bool {
    a > 0.0 && b > 0.0 && 1.0 - a - b > 0.0
}

/// deGennes coefficient `1 / (36 phi)`.
pub fn kappa(phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Domain { what: "kappa", value: phi });
    }
    Ok(1.0 / (36.0 * phi))
}

/// `-1 / (36 phi^2)`.
pub fn kappa_prime(phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Domain { what: "kappa'", value: phi });
    }
    Ok(-1.0 / (36.0 * phi * phi))
}

fn check_point(phi1: f64, phi2: f64) -> Result<()> {
    if !in_gibbs(phi1, phi2) {
        return Err(Error::GibbsViolation { i: 0, j: 0, phi1, phi2 });
    }
    Ok(())
}

/// Ideal-solution entropy density `S(phi1, phi2)`.
pub fn ideal_entropy(phi1: f64, phi2: f64, p: &ModelParams) -> Result<f64> {
    check_point(phi1, phi2)?;
    Ok(entropy_unchecked(phi1, phi2, p))
}

#[inline]
fn entropy_unchecked(phi1: f64, phi2: f64, p: &ModelParams) -> f64 {
    let s = &p.settings;
    let phi3 = 1.0 - phi1 - phi2;
    phi1 / s.m0 * (p.alpha * phi1 / s.m0).ln()
        + phi2 / s.n0 * (p.beta * phi2 / s.n0).ln()
        + phi3 * phi3.ln()
}

/// `(dS/dphi1, dS/dphi2)`.
pub fn ideal_entropy_grad(phi1: f64, phi2: f64, p: &ModelParams) -> Result<(f64, f64)> {
    check_point(phi1, phi2)?;
    Ok(entropy_grad_unchecked(phi1, phi2, p))
}

#[inline]
pub(crate) fn entropy_grad_unchecked(phi1: f64, phi2: f64, p: &ModelParams) -> (f64, f64) {
    let s = &p.settings;
    let l3 = (1.0 - phi1 - phi2).ln();
    (
        (p.alpha * phi1 / s.m0).ln() / s.m0 + 1.0 / s.m0 - l3 - 1.0,
        (p.beta * phi2 / s.n0).ln() / s.n0 + 1.0 / s.n0 - l3 - 1.0,
    )
}

/// Hessian of `S` as `(S11, S12, S22)`.
#[inline]
pub(crate) fn entropy_hess_unchecked(phi1: f64, phi2: f64, p: &ModelParams) -> (f64, f64, f64) {
    let inv3 = 1.0 / (1.0 - phi1 - phi2);
    (1.0 / (p.settings.m0 * phi1) + inv3, inv3, 1.0 / (p.settings.n0 * phi2) + inv3)
}

/// Mixing density `H(phi1, phi2)`.
pub fn mixing(phi1: f64, phi2: f64, p: &ModelParams) -> f64 {
    let s = &p.settings;
    let phi3 = 1.0 - phi1 - phi2;
    s.chi12 * phi1 * phi2 + s.chi13 * phi1 * phi3 + s.chi23 * phi2 * phi3
}

/// `(dH/dphi1, dH/dphi2)`.
#[inline]
pub fn mixing_grad(phi1: f64, phi2: f64, p: &ModelParams) -> (f64, f64) {
    let s = &p.settings;
    let c = s.chi12 - s.chi13 - s.chi23;
    (-2.0 * s.chi13 * phi1 + c * phi2 + s.chi13, -2.0 * s.chi23 * phi2 + c * phi1 + s.chi23)
}

/// `a_x(kappa(A_x v) (D_x v)^2) + a_y(kappa(A_y v) (D_y v)^2)`.
fn surface_density(v: &CellField) -> CellField {
    let mut out = CellField::zeros(*v.spec());
    for axis in [Axis::X, Axis::Y] {
        let a = cell_to_edge_avg(v, axis);
        let d = cell_to_edge_diff(v, axis);
        let e = a.zip_map(&d, |a, d| d * d / (36.0 * a));
        out = &out + &edge_to_cell_avg(&e, axis).expect("axis");
    }
    out
}

/// Variational derivative of `<surface_density(v), 1>`:
/// `a_x(kappa'(A_x v)(D_x v)^2) - 2 d_x(kappa(A_x v) D_x v)` plus the y terms.
fn surface_derivative(v: &CellField) -> CellField {
    let mut out = CellField::zeros(*v.spec());
    for axis in [Axis::X, Axis::Y] {
        let a = cell_to_edge_avg(v, axis);
        let d = cell_to_edge_diff(v, axis);
        let curv = a.zip_map(&d, |a, d| -d * d / (36.0 * a * a));
        let flux = a.zip_map(&d, |a, d| d / (36.0 * a));
        let q_avg = edge_to_cell_avg(&curv, axis).expect("axis");
        let q_div = edge_to_cell_diff(&flux, axis).expect("axis");
        out = &out + &q_avg.zip_map(&q_div, |x, y| x - 2.0 * y);
    }
    out
}

fn cell_total(v: &CellField) -> f64 {
    let one = CellField::constant(*v.spec(), 1.0);
    cell_inner(v, &one).expect("same grid")
}

/// Full discrete energy `G_h = <S + H, 1> + sum_i eps_i^2 <surface(phi_i), 1>`.
pub fn discrete_energy(state: &PhaseState, p: &ModelParams) -> Result<f64> {
    let sh = state.phi1.zip_map(&state.phi2, |a, b| entropy_unchecked(a, b, p) + mixing(a, b, p));
    Ok(cell_total(&sh) + gradient_energy(state, p))
}

fn gradient_energy(state: &PhaseState, p: &ModelParams) -> f64 {
    let phi3 = state.phi3();
    p.eps2(Component::One) * cell_total(&surface_density(&state.phi1))
        + p.eps2(Component::Two) * cell_total(&surface_density(&state.phi2))
        + p.eps3_sq() * cell_total(&surface_density(&phi3))
}

/// Convex part `G_{h,c}`: entropy plus all gradient terms.
pub fn convex_energy(state: &PhaseState, p: &ModelParams) -> Result<f64> {
    let s = state.phi1.zip_map(&state.phi2, |a, b| entropy_unchecked(a, b, p));
    Ok(cell_total(&s) + gradient_energy(state, p))
}

/// `G_{h,e} = -<H, 1>`, convex when the mixing term is concave.
pub fn concave_energy(state: &PhaseState, p: &ModelParams) -> Result<f64> {
    Ok(-concave_total(state.phi1(), state.phi2(), p))
}

fn concave_total(phi1: &CellField, phi2: &CellField, p: &ModelParams) -> f64 {
    cell_total(&phi1.zip_map(phi2, |a, b| mixing(a, b, p)))
}

/// `delta G_{h,c} / delta phi_which`, assembled term by term:
/// the entropy partial, the `eps_which^2` surface terms and the `eps_3^2`
/// terms in `1 - phi1 - phi2` with opposite sign.
pub fn dgc(state: &PhaseState, p: &ModelParams, which: Component) -> Result<CellField> {
    let q1 = state.phi1.zip_map(&state.phi2, |a, b| {
        let g = entropy_grad_unchecked(a, b, p);
        match which {
            Component::One => g.0,
            Component::Two => g.1,
        }
    });
    let own = surface_derivative(state.phi(which)).scale(p.eps2(which));
    let third = surface_derivative(&state.phi3()).scale(p.eps3_sq());
    Ok(&(&q1 + &own) - &third)
}

/// `delta G_{h,e} / delta phi_which = -dH/dphi_which`, evaluated pointwise.
pub fn dge(state: &PhaseState, p: &ModelParams, which: Component) -> CellField {
    dge_fields(state.phi1(), state.phi2(), p, which)
}

pub(crate) fn dge_fields(phi1: &CellField, phi2: &CellField, p: &ModelParams, which: Component) -> CellField {
    phi1.zip_map(phi2, |a, b| {
        let g = mixing_grad(a, b, p);
        -match which {
            Component::One => g.0,
            Component::Two => g.1,
        }
    })
}

/// `mu_which = dGc(next) - dGe(prev)`.
pub fn chemical_potential(
    next: &PhaseState,
    prev: &PhaseState,
    p: &ModelParams,
    which: Component,
) -> Result<CellField> {
    let c = dgc(next, p, which)?;
    Ok(&c - &dge(prev, p, which))
}

/// Edge kernels shared by the fused derivative evaluation and the local
/// Jacobians of the smoother. For an edge between the own cell value `u` and
/// neighbor value `v`, the edge energy is `kappa((u+v)/2) (v-u)^2 / h^2`.
pub(crate) mod kernels {
    /// Derivative of the edge energy with respect to the own-cell value.
    #[inline]
    pub fn edge_grad(u: f64, v: f64, inv_h2: f64) -> f64 {
        let a = 0.5 * (u + v);
        let d = v - u;
        let k = 1.0 / (36.0 * a);
        let kp = -k / a;
        inv_h2 * d * (0.5 * kp * d - 2.0 * k)
    }

    /// Second derivative of the edge energy with respect to the own-cell value.
    #[inline]
    pub fn edge_hess(u: f64, v: f64, inv_h2: f64) -> f64 {
        let a = 0.5 * (u + v);
        let d = v - u;
        let k = 1.0 / (36.0 * a);
        let kp = -k / a;
        let kpp = -2.0 * kp / a;
        inv_h2 * (0.25 * kpp * d * d - 2.0 * kp * d + 2.0 * k)
    }

    /// Mixed second derivative of the edge energy in the two end values.
    #[inline]
    pub fn edge_cross(u: f64, v: f64, inv_h2: f64) -> f64 {
        let a = 0.5 * (u + v);
        let d = v - u;
        let k = 1.0 / (36.0 * a);
        let kpp = 2.0 * k / (a * a);
        inv_h2 * (0.25 * kpp * d * d - 2.0 * k)
    }
}

/// `dGc` for both components from the edge kernels in a single pass.
/// Agrees with [`dgc`] to roundoff; used inside the nonlinear solver.
pub(crate) fn dgc_fused(phi1: &[f64], phi2: &[f64], spec: &GridSpec, p: &ModelParams, out1: &mut [f64], out2: &mut [f64]) {
    use kernels::edge_grad;
    let n = spec.n();
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let e1 = p.eps2(Component::One);
    let e2 = p.eps2(Component::Two);
    let e3 = p.eps3_sq();
    for i in 0..n {
        let (ip, im) = (spec.next(i), spec.prev(i));
        for j in 0..n {
            let (jp, jm) = (spec.next(j), spec.prev(j));
            let k = spec.idx(i, j);
            let (a, b) = (phi1[k], phi2[k]);
            let c = 1.0 - a - b;
            let (s1, s2) = entropy_grad_unchecked(a, b, p);
            let mut g1 = 0.0;
            let mut g2 = 0.0;
            let mut g3 = 0.0;
            for m in [spec.idx(ip, j), spec.idx(im, j), spec.idx(i, jp), spec.idx(i, jm)] {
                let (na, nb) = (phi1[m], phi2[m]);
                g1 += edge_grad(a, na, inv_h2);
                g2 += edge_grad(b, nb, inv_h2);
                g3 += edge_grad(c, 1.0 - na - nb, inv_h2);
            }
            out1[k] = s1 + e1 * g1 - e3 * g3;
            out2[k] = s2 + e2 * g2 - e3 * g3;
        }
    }
}
