//! Surfaces given by a height function or a parametrization, and their local
//! differential geometry computed from jets.
#![allow(non_snake_case)]

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Jet, Var, MAX_ORDER};

/// Relative threshold on `H^2 - K` below which a point counts as umbilic.
pub const UMBILIC_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("point ({u}, {v}) lies outside the chart domain")]
    OutOfDomain { u: f64, v: f64 },
    #[error("parametrization is singular at ({u}, {v})")]
    Singular { u: f64, v: f64 },
    #[error("umbilic point at ({u}, {v}): principal directions undefined")]
    UmbilicPoint { u: f64, v: f64 },
    #[error("requested jet order {0} is too high")]
    OrderTooHigh(usize),
}

/// Closed rectangle `[u0, u1] x [v0, v1]` in the chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Domain {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl Domain {
    pub fn new(u0: f64, u1: f64, v0: f64, v1: f64) -> Self {
        Domain { u: [u0, u1], v: [v0, v1] }
    }

    pub fn square(r: f64) -> Self {
        Self::new(-r, r, -r, r)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u[0] && u <= self.u[1] && v >= self.v[0] && v <= self.v[1]
    }

    pub fn width(&self) -> f64 {
        self.u[1] - self.u[0]
    }

    pub fn height(&self) -> f64 {
        self.v[1] - self.v[0]
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceKind {
    Monge { h: Expr },
    Parametric { x: Expr, y: Expr, z: Expr },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub domain: Domain,
    pub lambda: f64,
}

impl Surface {
    pub fn monge(h: &str, domain: Domain) -> Result<Self, ExprError> {
        Ok(Surface { kind: SurfaceKind::Monge { h: Expr::parse(h)? }, domain, lambda: 0.0 })
    }

    pub fn parametric(x: &str, y: &str, z: &str, domain: Domain) -> Result<Self, ExprError> {
        Ok(Surface {
            kind: SurfaceKind::Parametric { x: Expr::parse(x)?, y: Expr::parse(y)?, z: Expr::parse(z)? },
            domain,
            lambda: 0.0,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Surface { lambda, ..self.clone() }
    }

    pub fn depends_on_lambda(&self) -> bool {
        match &self.kind {
            SurfaceKind::Monge { h } => h.uses_lambda(),
            SurfaceKind::Parametric { x, y, z } => x.uses_lambda() || y.uses_lambda() || z.uses_lambda(),
        }
    }

    /// Jets of the three coordinate functions at `(u, v)`.
    pub fn alpha(&self, u: f64, v: f64, order: usize) -> Result<[Jet; 3], GeomError> {
        if order > MAX_ORDER {
            return Err(GeomError::OrderTooHigh(order));
        }
        let l = self.lambda;
        Ok(match &self.kind {
            SurfaceKind::Monge { h } => {
                [Jet::variable(order, u, Var::U), Jet::variable(order, v, Var::V), h.jet(u, v, l, order)?]
            }
            SurfaceKind::Parametric { x, y, z } => {
                [x.jet(u, v, l, order)?, y.jet(u, v, l, order)?, z.jet(u, v, l, order)?]
            }
        })
    }

    pub fn point(&self, u: f64, v: f64) -> Result<[f64; 3], GeomError> {
        let l = self.lambda;
        Ok(match &self.kind {
            SurfaceKind::Monge { h } => [u, v, h.eval(u, v, l)?],
            SurfaceKind::Parametric { x, y, z } => [x.eval(u, v, l)?, y.eval(u, v, l)?, z.eval(u, v, l)?],
        })
    }

    /// Fundamental-form jets of order `order` (the parametrization is
    /// expanded to `order + 2`).
    pub fn form_jets(&self, u: f64, v: f64, order: usize) -> Result<FormJets, GeomError> {
        if order + 2 > MAX_ORDER {
            return Err(GeomError::OrderTooHigh(order));
        }
        let a = self.alpha(u, v, order + 2)?;
        let au: [Jet; 3] = std::array::from_fn(|i| a[i].du().truncate(order));
        let av: [Jet; 3] = std::array::from_fn(|i| a[i].dv().truncate(order));
        let auu: [Jet; 3] = std::array::from_fn(|i| a[i].du().du());
        let auv: [Jet; 3] = std::array::from_fn(|i| a[i].du().dv());
        let avv: [Jet; 3] = std::array::from_fn(|i| a[i].dv().dv());
        let nu = cross_jet(&au, &av);
        let E = dot_jet(&au, &au);
        let F = dot_jet(&au, &av);
        let G = dot_jet(&av, &av);
        let et = dot_jet(&auu, &nu);
        let ft = dot_jet(&auv, &nu);
        let gt = dot_jet(&avv, &nu);
        let W2 = E * G - F * F;
        if !(W2.value() > 0.0) {
            return Err(GeomError::Singular { u, v });
        }
        let W = W2.sqrt()?;
        let winv = W.recip()?;
        Ok(FormJets {
            E,
            F,
            G,
            e: et * winv,
            f: ft * winv,
            g: gt * winv,
            W,
            L: F * gt - G * ft,
            M: E * gt - G * et,
            N: E * ft - F * et,
        })
    }

    pub fn fundamental_forms(&self, u: f64, v: f64) -> Result<FundamentalForms, GeomError> {
        let j = self.form_jets(u, v, 0)?;
        Ok(FundamentalForms {
            E: j.E.value(),
            F: j.F.value(),
            G: j.G.value(),
            e: j.e.value(),
            f: j.f.value(),
            g: j.g.value(),
        })
    }

    pub fn curvature(&self, u: f64, v: f64) -> Result<CurvatureData, GeomError> {
        Ok(self.fundamental_forms(u, v)?.curvature())
    }

    pub fn tau_coefficients(&self, u: f64, v: f64) -> Result<TauCoefficients, GeomError> {
        Ok(self.fundamental_forms(u, v)?.tau())
    }

    /// Scaled `(L, M, N)` (no square roots), as plain values.
    pub fn scaled_tau(&self, u: f64, v: f64) -> Result<[f64; 3], GeomError> {
        let j = self.form_jets(u, v, 0)?;
        Ok([j.L.value(), j.M.value(), j.N.value()])
    }

    pub fn principal_directions(&self, u: f64, v: f64) -> Result<PrincipalDirections, GeomError> {
        self.fundamental_forms(u, v)?.principal_directions(UMBILIC_TOL).ok_or(GeomError::UmbilicPoint { u, v })
    }

    pub fn gauss_map(&self, u: f64, v: f64) -> Result<[f64; 3], GeomError> {
        let a = self.alpha(u, v, 1)?;
        let au = [a[0].partial(1, 0), a[1].partial(1, 0), a[2].partial(1, 0)];
        let av = [a[0].partial(0, 1), a[1].partial(0, 1), a[2].partial(0, 1)];
        let n = cross(&au, &av);
        let l = norm(&n);
        if l == 0.0 {
            return Err(GeomError::Singular { u, v });
        }
        Ok([n[0] / l, n[1] / l, n[2] / l])
    }

    pub fn geodesic_torsion(&self, u: f64, v: f64, dir: [f64; 2]) -> Result<f64, GeomError> {
        Ok(self.fundamental_forms(u, v)?.geodesic_torsion(dir))
    }
}

/// Jets of the fundamental forms and of the scaled coefficients
/// `L = F g~ - G f~`, `M = E g~ - G e~`, `N = E f~ - F e~`, where
/// `e~ = e W` etc. For a height function these are exactly the polynomial
/// coefficients of the curvature-line equation.
#[derive(Clone, Copy, Debug)]
pub struct FormJets {
    pub E: Jet,
    pub F: Jet,
    pub G: Jet,
    pub e: Jet,
    pub f: Jet,
    pub g: Jet,
    pub W: Jet,
    pub L: Jet,
    pub M: Jet,
    pub N: Jet,
}

impl FormJets {
    /// Mean and Gaussian curvature as jets.
    pub fn mean_gauss(&self) -> Result<(Jet, Jet), GeomError> {
        let det = self.E * self.G - self.F * self.F;
        let dinv = det.recip()?;
        let K = (self.e * self.g - self.f * self.f) * dinv;
        let H = (self.e * self.G - (self.f * self.F).scale(2.0) + self.g * self.E) * dinv.scale(0.5);
        Ok((H, K))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalForms {
    pub E: f64,
    pub F: f64,
    pub G: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureData {
    /// Minimal principal curvature.
    pub k1: f64,
    /// Maximal principal curvature.
    pub k2: f64,
    pub H: f64,
    pub K: f64,
}

/// Coefficients of `Lc dv^2 + Mc du dv + Nc du^2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauCoefficients {
    pub L: f64,
    pub M: f64,
    pub N: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalDirections {
    pub k1: f64,
    pub k2: f64,
    /// Direction of minimal curvature, unit length in the first form.
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl PrincipalDirections {
    pub fn dir(&self, f: Foliation) -> [f64; 2] {
        match f {
            Foliation::Min => self.min,
            Foliation::Max => self.max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Foliation {
    Min,
    Max,
}

impl Foliation {
    pub fn other(self) -> Self {
        match self {
            Foliation::Min => Foliation::Max,
            Foliation::Max => Foliation::Min,
        }
    }
}

impl FundamentalForms {
    pub fn det(&self) -> f64 {
        self.E * self.G - self.F * self.F
    }

    pub fn first(&self, w: [f64; 2]) -> f64 {
        self.E * w[0] * w[0] + 2.0 * self.F * w[0] * w[1] + self.G * w[1] * w[1]
    }

    pub fn second(&self, w: [f64; 2]) -> f64 {
        self.e * w[0] * w[0] + 2.0 * self.f * w[0] * w[1] + self.g * w[1] * w[1]
    }

    pub fn inner(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.E * a[0] * b[0] + self.F * (a[0] * b[1] + a[1] * b[0]) + self.G * a[1] * b[1]
    }

    pub fn normal_curvature(&self, w: [f64; 2]) -> f64 {
        self.second(w) / self.first(w)
    }

    pub fn tau(&self) -> TauCoefficients {
        TauCoefficients {
            L: self.F * self.g - self.G * self.f,
            M: self.E * self.g - self.G * self.e,
            N: self.E * self.f - self.F * self.e,
        }
    }

    /// Shape operator `I^{-1} II` as a row-major 2x2 matrix.
    fn shape(&self) -> [[f64; 2]; 2] {
        let d = self.det();
        [
            [(self.G * self.e - self.F * self.f) / d, (self.G * self.f - self.F * self.g) / d],
            [(self.E * self.f - self.F * self.e) / d, (self.E * self.g - self.F * self.f) / d],
        ]
    }

    /// `H` and `H^2 - K`, the latter evaluated from the traceless part of
    /// the shape operator to avoid cancellation near umbilics.
    fn mean_and_disc(&self) -> (f64, f64, [[f64; 2]; 2]) {
        let s = self.shape();
        let h = 0.5 * (s[0][0] + s[1][1]);
        let half = 0.5 * (s[0][0] - s[1][1]);
        (h, (half * half + s[0][1] * s[1][0]).max(0.0), s)
    }

    pub fn curvature(&self) -> CurvatureData {
        let (h, disc, _) = self.mean_and_disc();
        let r = disc.sqrt();
        CurvatureData { k1: h - r, k2: h + r, H: h, K: (self.e * self.g - self.f * self.f) / self.det() }
    }

    pub fn is_umbilic(&self, tol: f64) -> bool {
        let (h, disc, _) = self.mean_and_disc();
        disc < tol * (h * h).max(1.0)
    }

    /// `None` at an umbilic.
    pub fn principal_directions(&self, tol: f64) -> Option<PrincipalDirections> {
        let (h, disc, s) = self.mean_and_disc();
        if disc < tol * (h * h).max(1.0) {
            return None;
        }
        let r = disc.sqrt();
        let half = 0.5 * (s[0][0] - s[1][1]);
        let eig = |k_off: f64| {
            // rows of S - kI with k = H + k_off
            let r1 = [half - k_off, s[0][1]];
            let r2 = [s[1][0], -half - k_off];
            let row = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
            let w = [-row[1], row[0]];
            let n = self.first(w).sqrt();
            [w[0] / n, w[1] / n]
        };
        Some(PrincipalDirections { k1: h - r, k2: h + r, min: eig(-r), max: eig(r) })
    }

    pub fn geodesic_torsion(&self, dir: [f64; 2]) -> f64 {
        let t = self.tau();
        let (du, dv) = (dir[0], dir[1]);
        (t.L * dv * dv + t.M * du * dv + t.N * du * du) / (self.first(dir) * self.det().sqrt())
    }
}

pub(crate) fn dot_jet(a: &[Jet; 3], b: &[Jet; 3]) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross_jet(a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monge(h: &str) -> Surface {
        Surface::monge(h, Domain::square(1.0)).unwrap()
    }

    #[test]
    fn paraboloid_forms_at_origin() {
        let s = monge("u^2/2 + 2*v^2/2");
        let ff = s.fundamental_forms(0.0, 0.0).unwrap();
        assert_eq!((ff.E, ff.F, ff.G, ff.e, ff.f, ff.g), (1.0, 0.0, 1.0, 1.0, 0.0, 2.0));
        let c = ff.curvature();
        assert_eq!((c.k1, c.k2, c.H, c.K), (1.0, 2.0, 1.5, 2.0));
    }

    #[test]
    fn scaled_tau_matches_height_formulas() {
        let s = monge("0.3*u^3 + u*v^2 - 0.2*v^3 + u^2/2 + 0.7*v^2");
        let (u, v) = (0.21, -0.13);
        let hu = 0.9 * u * u + v * v + u;
        let hv = 2.0 * u * v - 0.6 * v * v + 1.4 * v;
        let huu = 1.8 * u + 1.0;
        let huv = 2.0 * v;
        let hvv = 2.0 * u - 1.2 * v + 1.4;
        let [l, m, n] = s.scaled_tau(u, v).unwrap();
        assert!((l - (hu * hv * hvv - (1.0 + hv * hv) * huv)).abs() < 1e-14);
        assert!((m - ((1.0 + hu * hu) * hvv - (1.0 + hv * hv) * huu)).abs() < 1e-14);
        assert!((n - ((1.0 + hu * hu) * huv - hu * hv * huu)).abs() < 1e-14);
    }

    #[test]
    fn sphere_is_umbilic() {
        let s = monge("1 - sqrt(1 - u^2 - v^2)");
        assert!(matches!(s.principal_directions(0.2, 0.1), Err(GeomError::UmbilicPoint { .. })));
    }

    #[test]
    fn gauss_map_of_plane() {
        let s = monge("u");
        let n = s.gauss_map(0.0, 0.0).unwrap();
        let r = 0.5f64.sqrt();
        assert!((n[0] + r).abs() < 1e-15 && n[1] == 0.0 && (n[2] - r).abs() < 1e-15);
    }

    #[test]
    fn directions_are_orthonormal_in_first_form() {
        let s = monge("sin(u)*cos(v) + 0.3*u*v");
        let ff = s.fundamental_forms(0.4, -0.2).unwrap();
        let d = ff.principal_directions(UMBILIC_TOL).unwrap();
        assert!(ff.inner(d.min, d.max).abs() < 1e-12);
        assert!((ff.first(d.min) - 1.0).abs() < 1e-12);
        assert!((ff.normal_curvature(d.min) - d.k1).abs() < 1e-12);
        assert!((ff.normal_curvature(d.max) - d.k2).abs() < 1e-12);
    }
}
