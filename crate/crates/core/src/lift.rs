//! The lifted line field on the surface `T(u, v, p) = L p^2 + M p + N = 0`
//! over the projectivized tangent bundle, its singular points over an
//! umbilic and the separatrices they emit.
//!
//! Chart `P` uses `p = dv/du` with local coordinates `(u, v, p)`; chart `Q`
//! uses `q = du/dv` with local coordinates `(v, u, q)`. In either chart the
//! field is `(T_s, s T_s, -(T_x1 + s T_x2))`.

use nalgebra::Matrix3;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Jet;
use crate::foliation::{PrincipalCurve, Termination};
use crate::geometry::{Foliation, GeomError, Surface};
use crate::ode::{Adaptive, StepError};
use crate::umbilic::NormalizedJet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("no singular points found over ({u}, {v})")]
    NoSingularities { u: f64, v: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum Chart {
    P,
    Q,
}

impl Chart {
    pub fn other(self) -> Self {
        match self {
            Chart::P => Chart::Q,
            Chart::Q => Chart::P,
        }
    }
}

/// A point of the lifted surface in one of the two charts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LiftPoint {
    pub u: f64,
    pub v: f64,
    /// `dv/du` in chart `P`, `du/dv` in chart `Q`.
    pub slope: f64,
    pub chart: Chart,
}

impl LiftPoint {
    pub fn local(&self) -> [f64; 3] {
        match self.chart {
            Chart::P => [self.u, self.v, self.slope],
            Chart::Q => [self.v, self.u, self.slope],
        }
    }

    pub fn from_local(chart: Chart, y: [f64; 3]) -> Self {
        match chart {
            Chart::P => LiftPoint { u: y[0], v: y[1], slope: y[2], chart },
            Chart::Q => LiftPoint { u: y[1], v: y[0], slope: y[2], chart },
        }
    }

    /// Tangent direction `(du, dv)` represented by the slope.
    pub fn direction(&self) -> [f64; 2] {
        match self.chart {
            Chart::P => [1.0, self.slope],
            Chart::Q => [self.slope, 1.0],
        }
    }

    /// Angle of the tangent direction in `[0, pi)`.
    pub fn angle(&self) -> f64 {
        let d = self.direction();
        d[1].atan2(d[0]).rem_euclid(std::f64::consts::PI)
    }

    pub fn from_angle(u: f64, v: f64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        if c.abs() >= s.abs() {
            LiftPoint { u, v, slope: s / c, chart: Chart::P }
        } else {
            LiftPoint { u, v, slope: c / s, chart: Chart::Q }
        }
    }

    pub fn uv(&self) -> [f64; 2] {
        [self.u, self.v]
    }
}

/// Value, gradient and Hessian of `T` in local chart coordinates.
#[derive(Clone, Copy, Debug)]
pub struct TDerivs {
    pub t: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

fn t_derivs(s: &Surface, pt: &LiftPoint, order: usize) -> Result<TDerivs, GeomError> {
    let j = s.form_jets(pt.u, pt.v, order)?;
    // (A2, A1, A0) with T = A2 s^2 + A1 s + A0; jets differentiate in (u, v)
    let (a2, a1, a0) = match pt.chart {
        Chart::P => (j.L, j.M, j.N),
        Chart::Q => (j.N, j.M, j.L),
    };
    let sl = pt.slope;
    let comb = |f: &dyn Fn(&Jet) -> f64| f(&a2) * sl * sl + f(&a1) * sl + f(&a0);
    let comb_s = |f: &dyn Fn(&Jet) -> f64| 2.0 * f(&a2) * sl + f(&a1);
    // partial with respect to local x1, x2
    let d = |i: usize, k: usize| -> (usize, usize) {
        match pt.chart {
            Chart::P => (i, k),
            Chart::Q => (k, i),
        }
    };
    let p = |i: usize, k: usize| {
        let (a, b) = d(i, k);
        move |x: &Jet| x.partial(a, b)
    };
    let t = comb(&p(0, 0));
    let grad = [comb(&p(1, 0)), comb(&p(0, 1)), comb_s(&p(0, 0))];
    let mut hess = [[0.0; 3]; 3];
    if order >= 2 {
        hess[0][0] = comb(&p(2, 0));
        hess[0][1] = comb(&p(1, 1));
        hess[1][1] = comb(&p(0, 2));
        hess[0][2] = comb_s(&p(1, 0));
        hess[1][2] = comb_s(&p(0, 1));
        hess[2][2] = 2.0 * a2.value();
        hess[1][0] = hess[0][1];
        hess[2][0] = hess[0][2];
        hess[2][1] = hess[1][2];
    }
    Ok(TDerivs { t, grad, hess })
}

/// Lifted field in local coordinates.
pub fn lifted_field(s: &Surface, pt: &LiftPoint) -> Result<[f64; 3], GeomError> {
    let d = t_derivs(s, pt, 1)?;
    Ok(field_from(&d, pt.slope))
}

fn field_from(d: &TDerivs, sl: f64) -> [f64; 3] {
    [d.grad[2], sl * d.grad[2], -(d.grad[0] + sl * d.grad[1])]
}

/// Value of `T` at a lifted point.
pub fn t_value(s: &Surface, pt: &LiftPoint) -> Result<f64, GeomError> {
    Ok(t_derivs(s, pt, 0)?.t)
}

/// Jacobian of the lifted field in local coordinates.
pub fn lifted_jacobian(s: &Surface, pt: &LiftPoint) -> Result<[[f64; 3]; 3], GeomError> {
    let d = t_derivs(s, pt, 2)?;
    Ok(jacobian_from(&d, pt.slope))
}

fn jacobian_from(d: &TDerivs, sl: f64) -> [[f64; 3]; 3] {
    let h = &d.hess;
    [
        [h[2][0], h[2][1], h[2][2]],
        [sl * h[2][0], sl * h[2][1], d.grad[2] + sl * h[2][2]],
        [-(h[0][0] + sl * h[0][1]), -(h[0][1] + sl * h[1][1]), -(h[0][2] + d.grad[1] + sl * h[1][2])],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind")]
pub enum SingularityKind {
    Saddle,
    Node,
    Focus,
    SaddleNode { center_along_projective_line: bool },
    /// `grad T = 0`: the lifted surface has a cone point here.
    ConicMorse { hessian_det: f64 },
    Degenerate,
}

/// Linearization of the lifted field at a singular point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LcSingularity {
    pub point: LiftPoint,
    /// Angle of the tangent direction in the chart, in `[0, pi)`.
    pub angle: f64,
    pub multiplicity: usize,
    pub kind: SingularityKind,
    /// Eigenvalues as `[re, im]`: restricted to the lifted surface at
    /// regular points, of the full Jacobian at cone points.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Restricted 2x2 matrix in the basis (transversal, fiber).
    pub restricted: Option<[[f64; 2]; 2]>,
    pub jacobian: [[f64; 3]; 3],
    /// Real eigen-directions in local coordinates, paired with eigenvalues.
    pub directions: Vec<([f64; 3], f64)>,
    /// Quadratic coefficient of the center dynamics at a saddle-node.
    pub center_coefficient: Option<f64>,
}

impl LcSingularity {
    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().filter(|e| e[1] == 0.0).map(|e| e[0]).collect()
    }
}

/// Classify and linearize the lifted field at a point (assumed singular).
pub fn lc_linearize(s: &Surface, pt: LiftPoint) -> Result<LcSingularity, GeomError> {
    let d = t_derivs(s, &pt, 2)?;
    let jac = jacobian_from(&d, pt.slope);
    let jscale = jac.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let gn = norm3(&d.grad);
    let mut out = LcSingularity {
        point: pt,
        angle: pt.angle(),
        multiplicity: 1,
        kind: SingularityKind::Degenerate,
        eigenvalues: Vec::new(),
        restricted: None,
        jacobian: jac,
        directions: Vec::new(),
        center_coefficient: None,
    };
    if gn < 1e-8 * jscale {
        let h = Matrix3::from_fn(|i, k| d.hess[i][k]);
        let det = h.determinant();
        let jm = Matrix3::from_fn(|i, k| jac[i][k]);
        let ev = jm.complex_eigenvalues();
        out.eigenvalues = ev.iter().map(|z| [z.re, if z.im.abs() < 1e-12 * jscale { 0.0 } else { z.im }]).collect();
        out.eigenvalues.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for e in out.real_eigenvalues() {
            if e.abs() > 1e-8 * jscale {
                if let Some(w) = null_vector(&jac, e) {
                    out.directions.push((w, e));
                }
            }
        }
        out.kind = SingularityKind::ConicMorse { hessian_det: det };
        return Ok(out);
    }
    // orthonormal basis of the tangent plane: fiber axis and a transversal
    let n = [d.grad[0] / gn, d.grad[1] / gn, d.grad[2] / gn];
    let fiber = normalize3(&sub3(&[0.0, 0.0, 1.0], &scale3(&n, n[2])));
    let cand = if n[0].abs() < n[1].abs() { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = {
        let mut w = sub3(&cand, &scale3(&n, dot3(&cand, &n)));
        w = sub3(&w, &scale3(&fiber, dot3(&w, &fiber)));
        normalize3(&w)
    };
    let basis = [t1, fiber];
    let mut r = [[0.0; 2]; 2];
    for (i, bi) in basis.iter().enumerate() {
        for (k, bk) in basis.iter().enumerate() {
            r[i][k] = dot3(bi, &matvec3(&jac, bk));
        }
    }
    out.restricted = Some(r);
    let tr = r[0][0] + r[1][1];
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    let disc = tr * tr - 4.0 * det;
    let rscale = r.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    if disc < -1e-14 * rscale * rscale {
        let im = (-disc).sqrt() / 2.0;
        out.eigenvalues = vec![[tr / 2.0, -im], [tr / 2.0, im]];
        out.kind = SingularityKind::Focus;
        return Ok(out);
    }
    let sq = disc.max(0.0).sqrt();
    let l1 = if tr >= 0.0 { (tr + sq) / 2.0 } else { (tr - sq) / 2.0 };
    let l2 = if l1 != 0.0 { det / l1 } else { 0.0 };
    let mut lams = [l1, l2];
    lams.sort_by(f64::total_cmp);
    out.eigenvalues = lams.iter().map(|&l| [l, 0.0]).collect();
    let zero_tol = 1e-7 * jscale;
    let vec_for = |l: f64| -> [f64; 3] {
        let w = null_vector2(&r, l);
        normalize3(&add3(&scale3(&basis[0], w[0]), &scale3(&basis[1], w[1])))
    };
    for &l in &lams {
        out.directions.push((vec_for(l), l));
    }
    let zeros = lams.iter().filter(|l| l.abs() < zero_tol).count();
    out.kind = match zeros {
        2 => SingularityKind::Degenerate,
        1 => {
            let mut center = out.directions.iter().find(|(_, l)| l.abs() < zero_tol).unwrap().0;
            let along = dot3(&center, &fiber).abs() > 0.99;
            // orient along +slope on the fiber, along +x1 otherwise
            if (along && center[2] < 0.0) || (!along && center[0] < 0.0) {
                center = scale3(&center, -1.0);
                for (d, l) in out.directions.iter_mut() {
                    if l.abs() < zero_tol {
                        *d = center;
                    }
                }
            }
            out.center_coefficient = Some(center_coefficient(s, &pt, &center, &basis, &r)?);
            SingularityKind::SaddleNode { center_along_projective_line: along }
        }
        _ if lams[0] * lams[1] < 0.0 => SingularityKind::Saddle,
        _ => SingularityKind::Node,
    };
    Ok(out)
}

/// Coefficient `q` of `x' = q x^2` for the center coordinate `x` along
/// `dir`, from the field restricted to the lifted surface in the tangent
/// basis `basis` and the restricted matrix `r`.
fn center_coefficient(
    s: &Surface,
    pt: &LiftPoint,
    dir: &[f64; 3],
    basis: &[[f64; 3]; 2],
    r: &[[f64; 2]; 2],
) -> Result<f64, GeomError> {
    let y0 = pt.local();
    let h = 1e-4;
    let mut q2 = [0.0; 2];
    for sign in [1.0, -1.0] {
        let y = add3(&y0, &scale3(dir, sign * h));
        let mut q = LiftPoint::from_local(pt.chart, y);
        project(s, &mut q)?;
        let f = lifted_field(s, &q)?;
        q2[0] += dot3(&f, &basis[0]);
        q2[1] += dot3(&f, &basis[1]);
    }
    let q2 = [q2[0] / (2.0 * h * h), q2[1] / (2.0 * h * h)];
    let rt = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
    let l = null_vector2(&rt, 0.0);
    let c = [dot3(dir, &basis[0]), dot3(dir, &basis[1])];
    Ok((l[0] * q2[0] + l[1] * q2[1]) / (l[0] * c[0] + l[1] * c[1]))
}

/// Newton projection of a point onto `T = 0` along the gradient.
pub fn project(s: &Surface, pt: &mut LiftPoint) -> Result<(), GeomError> {
    for _ in 0..3 {
        let d = t_derivs(s, pt, 0)?;
        let g2 = dot3(&d.grad, &d.grad);
        if g2 < 1e-20 || d.t == 0.0 {
            break;
        }
        let y = pt.local();
        let y = sub3(&y, &scale3(&d.grad, d.t / g2));
        *pt = LiftPoint::from_local(pt.chart, y);
        if d.t.abs() < 1e-15 {
            break;
        }
    }
    Ok(())
}

/// Real zeros of the fiber component of the field over `(u0, v0)`,
/// returned as angles in `[0, pi)` with multiplicities.
fn fiber_roots(s: &Surface, u0: f64, v0: f64) -> Result<Vec<(f64, usize)>, GeomError> {
    let j = s.form_jets(u0, v0, 1)?;
    let (lu, lv) = (j.L.partial(1, 0), j.L.partial(0, 1));
    let (mu, mv) = (j.M.partial(1, 0), j.M.partial(0, 1));
    let (nu, nv) = (j.N.partial(1, 0), j.N.partial(0, 1));
    // c3 sin^3 + c2 sin^2 cos + c1 sin cos^2 + c0 cos^3
    let co = [nu, mu + nv, lu + mv, lv];
    let scale = co.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(Vec::new());
    }
    let f = |phi: f64| {
        let (sn, cs) = phi.sin_cos();
        co[0] * cs.powi(3) + co[1] * sn * cs * cs + co[2] * sn * sn * cs + co[3] * sn.powi(3)
    };
    const N: usize = 1440;
    let pi = std::f64::consts::PI;
    let grid: Vec<f64> = (0..=N).map(|i| pi * i as f64 / N as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut roots: Vec<f64> = Vec::new();
    let bisect = |mut lo: f64, mut hi: f64| {
        let mut flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 || hi - lo < 1e-16 {
                return mid;
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        0.5 * (lo + hi)
    };
    for i in 0..N {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
        } else if vals[i] * vals[i + 1] < 0.0 {
            roots.push(bisect(grid[i], grid[i + 1]));
        }
    }
    // touching zeros (double roots) show up as small local minima of |f|
    for i in 0..N {
        let (a, b, c) = (vals[(i + N - 1) % N].abs(), vals[i].abs(), vals[i + 1].abs());
        if b <= a && b <= c && b < 1e-3 * scale {
            let (mut lo, mut hi) = (grid[i] - pi / N as f64, grid[i] + pi / N as f64);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(m1).abs() < f(m2).abs() {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let x = 0.5 * (lo + hi);
            if f(x).abs() < 1e-9 * scale {
                roots.push(x.rem_euclid(pi));
            }
        }
    }
    let mut out: Vec<(f64, usize)> = Vec::new();
    roots.sort_by(f64::total_cmp);
    for r in roots {
        let close = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(pi);
            d.min(pi - d) < 1e-5
        };
        if !out.iter().any(|(x, _)| close(*x, r)) {
            out.push((r, 1));
        }
    }
    // multiplicity from the derivative of f at each root
    for (r, m) in out.iter_mut() {
        let h = 1e-6;
        let d1 = (f(*r + h) - f(*r - h)) / (2.0 * h);
        if d1.abs() < 1e-6 * scale {
            *m = 2;
        }
    }
    Ok(out)
}

/// Singular points of the lifted field over the umbilic `(u0, v0)`.
pub fn lc_singularities_at(s: &Surface, u0: f64, v0: f64) -> Result<Vec<LcSingularity>, LiftError> {
    let roots = fiber_roots(s, u0, v0)?;
    if roots.is_empty() {
        return Err(LiftError::NoSingularities { u: u0, v: v0 });
    }
    let mut out = Vec::new();
    for (phi, mult) in roots {
        let mut pt = LiftPoint::from_angle(u0, v0, phi);
        polish_slope(s, &mut pt)?;
        let mut sing = lc_linearize(s, pt)?;
        sing.multiplicity = mult;
        out.push(sing);
    }
    Ok(out)
}

/// Newton on the fiber component of the field with respect to the slope.
fn polish_slope(s: &Surface, pt: &mut LiftPoint) -> Result<(), GeomError> {
    for _ in 0..20 {
        let d = t_derivs(s, pt, 2)?;
        let f = -(d.grad[0] + pt.slope * d.grad[1]);
        let df = -(d.hess[0][2] + d.grad[1] + pt.slope * d.hess[1][2]);
        if df.abs() < 1e-10 {
            break;
        }
        let step = f / df;
        pt.slope -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    Ok(())
}

/// Singular points of the lift of the polynomial normal form at its origin.
pub fn lc_singularities(jet: &NormalizedJet) -> Result<Vec<LcSingularity>, LiftError> {
    let s = model_surface(jet)?;
    lc_singularities_at(&s, 0.0, 0.0)
}

/// Polynomial surface realizing a normalized jet.
pub fn model_surface(jet: &NormalizedJet) -> Result<Surface, GeomError> {
    Ok(Surface::monge(&jet.height_expr(), crate::geometry::Domain::square(1.0))?)
}

/// Real roots of `p (b p^2 - c p + a - 2b)`: slopes of the singular points
/// over the origin of the normal form (chart `P`).
pub fn normal_form_slopes(jet: &NormalizedJet) -> Vec<(f64, usize)> {
    let (a, b, c) = (jet.a, jet.b, jet.c);
    let mut out = vec![(0.0, 1)];
    if b == 0.0 {
        if c != 0.0 {
            out.push(((a - 2.0 * b) / c, 1));
        }
        return out;
    }
    let disc = c * c - 4.0 * b * (a - 2.0 * b);
    let scale = c * c + (4.0 * b * (a - 2.0 * b)).abs();
    if disc.abs() <= 1e-12 * scale.max(1.0) {
        out.push((c / (2.0 * b), 2));
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        out.push(((c - sq) / (2.0 * b), 1));
        out.push(((c + sq) / (2.0 * b), 1));
    }
    // merge a root coinciding with p = 0
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for (p, m) in out {
        if let Some(e) = merged.iter_mut().find(|(q, _)| (q - p).abs() < 1e-12) {
            e.1 += m;
        } else {
            merged.push((p, m));
        }
    }
    merged.sort_by(|x, y| x.0.total_cmp(&y.0));
    merged
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SeparatrixRole {
    /// From a hyperbolic saddle of a Darbouxian umbilic.
    Saddle,
    /// Lemon/monstar transition: no neighbouring line shares its tangent.
    Isolated,
    NonIsolated,
    /// From a cone point of the lifted surface.
    Conic,
    /// Center branch on the hyperbolic side of a saddle-node.
    Hyperbolic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Separatrix {
    pub curve: PrincipalCurve,
    pub role: SeparatrixRole,
    /// Angle of the emanating direction at the umbilic, in `[0, pi)`.
    pub angle: f64,
    pub seed_offset: f64,
    /// Whether the traced curve came back within the re-entry radius of
    /// the umbilic after leaving it.
    pub reentered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceOptions {
    /// Maximal step in lifted arclength.
    pub step: f64,
    /// Maximal length of the projected curve in surface arclength.
    pub max_len: f64,
    /// Offset of the seed from the singular point.
    pub seed_offset: f64,
    pub tol: f64,
    /// Distance at which a returning curve counts as re-entering.
    pub reentry_radius: f64,
    /// Stop when the curve gets this close to any of these chart points.
    pub stop_points: Vec<[f64; 2]>,
    pub stop_radius: f64,
    /// Stop once the curve leaves this ball (center, radius).
    pub exit_ball: Option<([f64; 2], f64)>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: 0.01,
            max_len: 1.0,
            seed_offset: 1e-5,
            tol: 1e-10,
            reentry_radius: 1e-3,
            stop_points: Vec::new(),
            stop_radius: 1e-6,
            exit_ball: None,
        }
    }
}

/// Result of following the lifted field.
#[derive(Clone, Debug)]
pub struct LiftTrace {
    pub points: Vec<LiftPoint>,
    /// Surface arclength at each point.
    pub arclength: Vec<f64>,
    pub length: f64,
    pub termination: Termination,
    pub min_return_distance: f64,
    /// Whether the trace stopped by leaving the exit ball.
    pub exited: bool,
    /// Largest `|T|` seen after a step and before projection.
    pub max_residual: f64,
}

/// Follow the arclength-normalized lifted field from `start` with time sign
/// `sigma`, projecting back onto `T = 0` after every step and switching
/// charts when the slope grows past 2.
pub fn integrate_lift(
    s: &Surface,
    start: LiftPoint,
    sigma: f64,
    opts: &TraceOptions,
    center: Option<[f64; 2]>,
) -> LiftTrace {
    let mut pt = start;
    let mut sigma = sigma;
    let mut points = vec![pt];
    let mut arclength = vec![0.0];
    let mut length = 0.0;
    let mut exited = false;
    let mut max_residual = 0.0f64;
    let mut ctl = Adaptive::new(opts.step * 0.1, opts.tol, opts.step);
    let mut left = false;
    let mut min_ret = f64::INFINITY;
    let dist = |p: &LiftPoint, c: [f64; 2]| (p.u - c[0]).hypot(p.v - c[1]);
    let max_steps = 50_000;
    let termination = 'run: {
        for _ in 0..max_steps {
            let chart = pt.chart;
            let mut f = |y: &[f64; 3]| -> Result<[f64; 3], GeomError> {
                let q = LiftPoint::from_local(chart, *y);
                let v = lifted_field(s, &q)?;
                let n = norm3(&v);
                if n == 0.0 || !n.is_finite() {
                    return Err(GeomError::UmbilicPoint { u: q.u, v: q.v });
                }
                Ok(scale3(&v, sigma / n))
            };
            let y0 = pt.local();
            let (y1, _h) = match ctl.advance(&mut f, &y0) {
                Ok(r) => r,
                Err(StepError::Field(GeomError::UmbilicPoint { .. })) => break 'run Termination::UmbilicHit,
                Err(_) => break 'run Termination::DomainExit,
            };
            let mut next = LiftPoint::from_local(chart, y1);
            if let Ok(t) = t_value(s, &next) {
                max_residual = max_residual.max(t.abs());
            }
            if project(s, &mut next).is_err() {
                break 'run Termination::DomainExit;
            }
            let ds = match s.fundamental_forms(pt.u, pt.v) {
                Ok(ff) => ff.first([next.u - pt.u, next.v - pt.v]).max(0.0).sqrt(),
                Err(_) => break 'run Termination::DomainExit,
            };
            if !s.domain.contains(next.u, next.v) {
                points.push(next);
                arclength.push(length + ds);
                length += ds;
                break 'run Termination::DomainExit;
            }
            length += ds;
            // the projection stops moving when the curve runs into another umbilic
            if points.len() > 200 && dist(&next, points[points.len() - 200].uv()) < 1e-8 {
                points.truncate(points.len() - 199);
                arclength.truncate(points.len());
                length = *arclength.last().unwrap();
                break 'run Termination::UmbilicHit;
            }
            if next.slope.abs() > 2.0 {
                // change chart, keeping the orientation of motion
                let old_v = match lifted_field(s, &next) {
                    Ok(v) => scale3(&v, sigma),
                    Err(_) => break 'run Termination::DomainExit,
                };
                let sl = next.slope;
                let new = LiftPoint { slope: 1.0 / sl, chart: chart.other(), ..next };
                let mapped = [old_v[1], old_v[0], -old_v[2] / (sl * sl)];
                if let Ok(nv) = lifted_field(s, &new) {
                    sigma = if dot3(&nv, &mapped) < 0.0 { -1.0 } else { 1.0 };
                }
                next = new;
                ctl.h = ctl.h.min(opts.step * 0.1);
            }
            pt = next;
            points.push(pt);
            arclength.push(length);
            if let Some((c, r)) = opts.exit_ball {
                if dist(&pt, c) > r {
                    exited = true;
                    break 'run Termination::MaxLength;
                }
            }
            if let Some(c) = center {
                let r = dist(&pt, c);
                if r > 10.0 * opts.reentry_radius.max(opts.seed_offset) {
                    left = true;
                }
                if left {
                    min_ret = min_ret.min(r);
                    if r < opts.stop_radius.max(1e-9) {
                        break 'run Termination::UmbilicHit;
                    }
                }
            }
            if opts.stop_points.iter().any(|&c| dist(&pt, c) < opts.stop_radius) {
                break 'run Termination::UmbilicHit;
            }
            if length >= opts.max_len {
                break 'run Termination::MaxLength;
            }
        }
        Termination::MaxLength
    };
    LiftTrace { points, arclength, length, termination, min_return_distance: min_ret, exited, max_residual }
}

/// Trace all separatrices of the umbilic at `(u0, v0)`.
pub fn trace_separatrices(s: &Surface, u0: f64, v0: f64, opts: &TraceOptions) -> Result<Vec<Separatrix>, LiftError> {
    let sings = lc_singularities_at(s, u0, v0)?;
    let mut out = Vec::new();
    let has_sn_on_fiber = sings
        .iter()
        .any(|x| matches!(x.kind, SingularityKind::SaddleNode { center_along_projective_line: true }));
    for sing in &sings {
        let fiber = [0.0, 0.0, 1.0];
        let transversal = |d: &[f64; 3]| dot3(d, &fiber).abs() < 0.99;
        let mut seeds: Vec<([f64; 3], SeparatrixRole)> = Vec::new();
        match sing.kind {
            SingularityKind::Saddle => {
                let role = if has_sn_on_fiber { SeparatrixRole::Isolated } else { SeparatrixRole::Saddle };
                for (d, _) in sing.directions.iter().filter(|(d, _)| transversal(d)) {
                    seeds.push((*d, role));
                    seeds.push((scale3(d, -1.0), role));
                }
            }
            SingularityKind::SaddleNode { center_along_projective_line: true } => {
                for (d, l) in sing.directions.iter() {
                    if l.abs() > 0.0 && transversal(d) && !is_zero_eig(sing, *l) {
                        seeds.push((*d, SeparatrixRole::NonIsolated));
                        seeds.push((scale3(d, -1.0), SeparatrixRole::NonIsolated));
                    }
                }
            }
            SingularityKind::SaddleNode { center_along_projective_line: false } => {
                let strong = sing.directions.iter().find(|(_, l)| !is_zero_eig(sing, *l)).map(|x| x.1);
                let center = sing.directions.iter().find(|(_, l)| is_zero_eig(sing, *l)).map(|x| x.0);
                if let (Some(mu), Some(c), Some(q)) = (strong, center, sing.center_coefficient) {
                    // hyperbolic side: center flow has the opposite stability to the strong direction
                    let side = if mu < 0.0 { q.signum() } else { -q.signum() };
                    seeds.push((scale3(&c, side), SeparatrixRole::Hyperbolic));
                }
            }
            SingularityKind::ConicMorse { .. } => {
                for (d, _) in sing.directions.iter().filter(|(d, _)| transversal(d)) {
                    seeds.push((*d, SeparatrixRole::Conic));
                    seeds.push((scale3(d, -1.0), SeparatrixRole::Conic));
                }
            }
            _ => {}
        }
        for (dir, role) in seeds {
            let y = add3(&sing.point.local(), &scale3(&dir, opts.seed_offset));
            let mut start = LiftPoint::from_local(sing.point.chart, y);
            if !matches!(sing.kind, SingularityKind::ConicMorse { .. }) {
                project(s, &mut start)?;
            }
            let f0 = lifted_field(s, &start)?;
            let sigma = if dot3(&f0, &dir) >= 0.0 { 1.0 } else { -1.0 };
            let tr = integrate_lift(s, start, sigma, opts, Some([u0, v0]));
            let pts: Vec<[f64; 2]> = tr.points.iter().map(|p| p.uv()).collect();
            let foliation = tag_foliation(s, &tr.points, [u0, v0])?;
            out.push(Separatrix {
                curve: PrincipalCurve {
                    foliation,
                    points: pts,
                    arclength: tr.arclength,
                    termination: tr.termination,
                    lifted: true,
                },
                role,
                angle: sing.angle,
                seed_offset: opts.seed_offset,
                reentered: tr.min_return_distance < opts.reentry_radius,
            });
        }
    }
    Ok(out)
}

fn is_zero_eig(sing: &LcSingularity, l: f64) -> bool {
    let jscale = sing.jacobian.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    l.abs() < 1e-7 * jscale
}

/// Decide the foliation of a lifted curve from the normal curvature of its
/// tangent, halfway out to its farthest point from the umbilic.
pub fn tag_foliation(s: &Surface, pts: &[LiftPoint], center: [f64; 2]) -> Result<Foliation, GeomError> {
    let d = |a: &LiftPoint| (a.u - center[0]).hypot(a.v - center[1]);
    let rmax = pts.iter().map(d).fold(0.0, f64::max);
    let far = pts.iter().find(|p| d(p) >= 0.5 * rmax).copied().unwrap_or(pts[0]);
    let ff = s.fundamental_forms(far.u, far.v)?;
    let k = ff.curvature();
    let kn = ff.normal_curvature(far.direction());
    Ok(if (kn - k.k1).abs() <= (kn - k.k2).abs() { Foliation::Min } else { Foliation::Max })
}

fn null_vector(m: &[[f64; 3]; 3], l: f64) -> Option<[f64; 3]> {
    let a: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| m[i][k] - if i == k { l } else { 0.0 }));
    // the largest cross product of two rows spans the null space
    let c = [cross3(&a[0], &a[1]), cross3(&a[0], &a[2]), cross3(&a[1], &a[2])];
    let best = c.iter().max_by(|x, y| norm3(x).total_cmp(&norm3(y)))?;
    let n = norm3(best);
    (n > 0.0).then(|| scale3(best, 1.0 / n))
}

fn null_vector2(r: &[[f64; 2]; 2], l: f64) -> [f64; 2] {
    let r1 = [r[0][0] - l, r[0][1]];
    let r2 = [r[1][0], r[1][1] - l];
    let row = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
    if row[0] == 0.0 && row[1] == 0.0 {
        return [1.0, 0.0];
    }
    [-row[1], row[0]]
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize3(a: &[f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    scale3(a, 1.0 / n)
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    crate::geometry::cross(a, b)
}

fn matvec3(m: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    [dot3(&m[0], x), dot3(&m[1], x), dot3(&m[2], x)]
}
