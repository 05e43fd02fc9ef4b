//! Locating umbilic points, reducing them to the cubic normal form and
//! classifying them (Darbouxian types and codimension-one transitions).
#![allow(non_snake_case)]

use log::debug;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Jet, Var};
use crate::geometry::{cross, norm, GeomError, Surface};

/// Default tolerance of the classification decision tree.
pub const CLASSIFY_TOL: f64 = 1e-9;
const MERGE_RADIUS: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UmbilicError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("umbilics are not isolated: {fraction:.0}% of grid nodes satisfy the umbilic equations")]
    NonIsolatedUmbilics { fraction: f64 },
    #[error("point ({u}, {v}) is not umbilic (residual {residual:e})")]
    NotUmbilic { u: f64, v: f64, residual: f64 },
    #[error("flat umbilic at ({u}, {v}): the normal form is degenerate")]
    FlatUmbilic { u: f64, v: f64 },
    #[error("Newton iteration did not converge from ({u}, {v})")]
    NonConvergence { u: f64, v: f64 },
}

/// Coefficients of the local height function of an umbilic in its normal
/// frame:
/// `h = k/2 (u^2+v^2) + a/6 u^3 + b/2 u v^2 + c/6 v^3
///      + A/24 u^4 + B/6 u^3 v + C/4 u^2 v^2 + D/6 u v^3 + E/24 v^4 + ...`
/// with the `u^2 v` term rotated away and `b >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NormalizedJet {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub A: f64,
    pub B: f64,
    pub C: f64,
    pub D: f64,
    pub E: f64,
    /// Rotation angle (radians) applied to the tangent frame.
    pub theta: f64,
    /// Whether `u -> -u` was applied to make `b` non-negative.
    pub reflected: bool,
    /// Rows: first and second tangent axes and the unit normal.
    pub frame: [[f64; 3]; 3],
    pub origin: [f64; 3],
}

impl NormalizedJet {
    /// Jet carrying only the coefficients, in a trivial frame.
    pub fn from_coefficients(k: f64, cubic: [f64; 3], quartic: [f64; 5]) -> Self {
        NormalizedJet {
            k,
            a: cubic[0],
            b: cubic[1],
            c: cubic[2],
            A: quartic[0],
            B: quartic[1],
            C: quartic[2],
            D: quartic[3],
            E: quartic[4],
            theta: 0.0,
            reflected: false,
            frame: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            origin: [0.0; 3],
        }
    }

    /// The polynomial height function as an expression string.
    pub fn height_expr(&self) -> String {
        format!(
            "{:?}*(u^2 + v^2)/2 + {:?}*u^3/6 + {:?}*u*v^2/2 + {:?}*v^3/6 + {:?}*u^4/24 + {:?}*u^3*v/6 + {:?}*u^2*v^2/4 + {:?}*u*v^3/6 + {:?}*v^4/24",
            self.k, self.a, self.b, self.c, self.A, self.B, self.C, self.D, self.E
        )
    }

    /// `(c / 2b)^2 - a/b + 2`; negative on the lemon side of the
    /// lemon/monstar transition.
    pub fn d12_functional(&self) -> f64 {
        let r = self.c / (2.0 * self.b);
        r * r - self.a / self.b + 2.0
    }

    /// `b (C - A + 2 k^3) - c B`.
    pub fn chi(&self) -> f64 {
        self.b * (self.C - self.A + 2.0 * self.k.powi(3)) - self.c * self.B
    }

    /// `-[(c/2b)^2 - a/b + 2]`.
    pub fn delta(&self) -> f64 {
        -self.d12_functional()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum UmbilicClass {
    D1,
    D2,
    D3,
    #[serde(rename = "D12_case1")]
    D12Case1,
    #[serde(rename = "D12_case2")]
    D12Case2,
    D123,
    Degenerate,
}

impl UmbilicClass {
    pub fn name(self) -> &'static str {
        match self {
            UmbilicClass::D1 => "D1",
            UmbilicClass::D2 => "D2",
            UmbilicClass::D3 => "D3",
            UmbilicClass::D12Case1 => "D12_case1",
            UmbilicClass::D12Case2 => "D12_case2",
            UmbilicClass::D123 => "D123",
            UmbilicClass::Degenerate => "Degenerate",
        }
    }

    pub fn is_darbouxian(self) -> bool {
        matches!(self, UmbilicClass::D1 | UmbilicClass::D2 | UmbilicClass::D3)
    }

    /// Index of the principal line fields, when defined.
    pub fn index(self) -> Option<f64> {
        match self {
            UmbilicClass::D1 | UmbilicClass::D2 | UmbilicClass::D12Case1 | UmbilicClass::D12Case2 => Some(0.5),
            UmbilicClass::D3 => Some(-0.5),
            _ => None,
        }
    }

    /// Expected number of separatrices per principal foliation.
    pub fn separatrix_count(self) -> Option<usize> {
        match self {
            UmbilicClass::D1 => Some(1),
            UmbilicClass::D2 => Some(2),
            UmbilicClass::D3 => Some(3),
            UmbilicClass::D12Case1 | UmbilicClass::D12Case2 => Some(2),
            _ => None,
        }
    }
}

impl std::fmt::Display for UmbilicClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Classification {
    pub class: UmbilicClass,
    /// Set for a lemon/monstar transition on the tangency stratum `a = 2b`.
    pub tangent_stratum: bool,
    pub delta: f64,
    pub chi: f64,
}

/// Classify a normalized jet. `tol` is the absolute tolerance on the
/// scale-normalized invariants.
pub fn classify(j: &NormalizedJet, tol: f64) -> Classification {
    let (a, b, c) = (j.a, j.b, j.c);
    let scale = 1f64.max(a.abs()).max(b.abs()).max(c.abs());
    let chi = j.chi();
    let mk = |class, tangent_stratum, delta| Classification { class, tangent_stratum, delta, chi };
    if b.abs() < tol * scale {
        return mk(UmbilicClass::Degenerate, false, f64::NAN);
    }
    let delta = j.delta();
    if (b - a).abs() < tol * scale {
        let class = if chi.abs() > tol { UmbilicClass::D123 } else { UmbilicClass::Degenerate };
        return mk(class, false, delta);
    }
    if delta.abs() <= tol {
        let class = if b * (a - b) > 0.0 { UmbilicClass::D12Case1 } else { UmbilicClass::Degenerate };
        return mk(class, false, delta);
    }
    let ratio = a / b;
    if (ratio - 2.0).abs() <= tol && c != 0.0 {
        return mk(UmbilicClass::D12Case2, true, delta);
    }
    let class = if delta > 0.0 {
        UmbilicClass::D1
    } else if ratio > 1.0 {
        UmbilicClass::D2
    } else {
        UmbilicClass::D3
    };
    mk(class, false, delta)
}

/// Reduce the surface at an umbilic to its cubic normal form.
pub fn monge_normal_form(s: &Surface, u0: f64, v0: f64) -> Result<NormalizedJet, UmbilicError> {
    let alpha = s.alpha(u0, v0, 4)?;
    let o = [alpha[0].value(), alpha[1].value(), alpha[2].value()];
    let au = [alpha[0].partial(1, 0), alpha[1].partial(1, 0), alpha[2].partial(1, 0)];
    let av = [alpha[0].partial(0, 1), alpha[1].partial(0, 1), alpha[2].partial(0, 1)];
    let nv = cross(&au, &av);
    let nn = norm(&nv);
    if nn == 0.0 {
        return Err(GeomError::Singular { u: u0, v: v0 }.into());
    }
    let n = nv.map(|x| x / nn);
    let lu = norm(&au);
    let e1 = au.map(|x| x / lu);
    let e2 = cross(&n, &e1);

    let d: [Jet; 3] = std::array::from_fn(|i| alpha[i].add_scalar(-o[i]));
    let proj = |w: &[f64; 3]| d[0].scale(w[0]) + d[1].scale(w[1]) + d[2].scale(w[2]);
    let (X, Y, Z) = (proj(&e1), proj(&e2), proj(&n));

    // invert (s, t) -> (X, Y) as jets in the new variables (x, y)
    let m = [[X.partial(1, 0), X.partial(0, 1)], [Y.partial(1, 0), Y.partial(0, 1)]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let x = Jet::variable(4, 0.0, Var::U);
    let y = Jet::variable(4, 0.0, Var::V);
    let mut g1 = x.scale(inv[0][0]) + y.scale(inv[0][1]);
    let mut g2 = x.scale(inv[1][0]) + y.scale(inv[1][1]);
    for _ in 0..5 {
        let rx = x - X.compose(&g1, &g2);
        let ry = y - Y.compose(&g1, &g2);
        g1 = g1 + rx.scale(inv[0][0]) + ry.scale(inv[0][1]);
        g2 = g2 + rx.scale(inv[1][0]) + ry.scale(inv[1][1]);
    }
    let h = Z.compose(&g1, &g2);

    let k = 0.5 * (h.partial(2, 0) + h.partial(0, 2));
    let residual = (h.partial(2, 0) - h.partial(0, 2)).abs().max(h.partial(1, 1).abs());
    if residual > 1e-6 * k.abs().max(1.0) {
        return Err(UmbilicError::NotUmbilic { u: u0, v: v0, residual });
    }

    let cubic = [h.partial(3, 0), h.partial(2, 1), h.partial(1, 2), h.partial(0, 3)];
    let theta = rotation_killing_bprime(&cubic);
    let (sn, cs) = theta.sin_cos();
    let big_u = Jet::variable(4, 0.0, Var::U);
    let big_v = Jet::variable(4, 0.0, Var::V);
    let hr = h.compose(&(big_u.scale(cs) - big_v.scale(sn)), &(big_u.scale(sn) + big_v.scale(cs)));

    let mut j = NormalizedJet {
        k,
        a: hr.partial(3, 0),
        b: hr.partial(1, 2),
        c: hr.partial(0, 3),
        A: hr.partial(4, 0),
        B: hr.partial(3, 1),
        C: hr.partial(2, 2),
        D: hr.partial(1, 3),
        E: hr.partial(0, 4),
        theta,
        reflected: false,
        frame: [
            std::array::from_fn(|i| cs * e1[i] + sn * e2[i]),
            std::array::from_fn(|i| -sn * e1[i] + cs * e2[i]),
            n,
        ],
        origin: o,
    };
    if j.b < 0.0 {
        j.a = -j.a;
        j.b = -j.b;
        j.B = -j.B;
        j.D = -j.D;
        j.frame[0] = j.frame[0].map(|x| -x);
        j.reflected = true;
    }
    let cubic_size = j.a.abs().max(j.b.abs()).max(j.c.abs());
    if j.k.abs() < 1e-10 && cubic_size < 1e-10 {
        return Err(UmbilicError::FlatUmbilic { u: u0, v: v0 });
    }
    Ok(j)
}

/// `d^3/dU^2 dV` of the cubic part after rotating by `theta`.
fn bprime(c: &[f64; 4], theta: f64) -> f64 {
    let (s, co) = theta.sin_cos();
    let p = [co, s];
    let r = [-s, co];
    c[0] * p[0] * p[0] * r[0]
        + c[1] * (p[0] * p[0] * r[1] + 2.0 * p[0] * p[1] * r[0])
        + c[2] * (2.0 * p[0] * p[1] * r[1] + p[1] * p[1] * r[0])
        + c[3] * p[1] * p[1] * r[1]
}

/// `delta` of the cubic after rotating by `theta`, `-inf` when `b`
/// vanishes there.
fn rotated_delta(c: &[f64; 4], theta: f64) -> f64 {
    let (s, co) = theta.sin_cos();
    let (p, r) = ([co, s], [-s, co]);
    let a = c[0] * p[0].powi(3) + 3.0 * c[1] * p[0] * p[0] * p[1] + 3.0 * c[2] * p[0] * p[1] * p[1] + c[3] * p[1].powi(3);
    let b = c[0] * p[0] * r[0] * r[0]
        + c[1] * (2.0 * p[0] * r[0] * r[1] + p[1] * r[0] * r[0])
        + c[2] * (p[0] * r[1] * r[1] + 2.0 * p[1] * r[0] * r[1])
        + c[3] * p[1] * r[1] * r[1];
    let cc = c[0] * r[0].powi(3) + 3.0 * c[1] * r[0] * r[0] * r[1] + 3.0 * c[2] * r[0] * r[1] * r[1] + c[3] * r[1].powi(3);
    let scale = a.abs().max(b.abs()).max(cc.abs());
    if b.abs() <= 1e-12 * scale {
        return f64::NEG_INFINITY;
    }
    let q = cc / (2.0 * b);
    a / b - q * q - 2.0
}

/// Angle in `(-pi/2, pi/2]` that removes the `u^2 v` term. Of the up to
/// three such frames the one with the largest `delta` is taken, which does
/// not depend on the chart; ties go to the smallest angle.
fn rotation_killing_bprime(c: &[f64; 4]) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    const N: usize = 2048;
    let f = |t: f64| bprime(c, t);
    let mut roots = Vec::new();
    let grid: Vec<f64> = (0..=N).map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / N as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    for i in 0..N {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
        } else if vals[i] * vals[i + 1] < 0.0 {
            let (mut lo, mut hi, mut flo) = (grid[i], grid[i + 1], vals[i]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 || hi - lo < 1e-16 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm * flo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if vals[N] == 0.0 {
        roots.push(grid[N]);
    }
    if bprime(c, 0.0) == 0.0 && !roots.contains(&0.0) {
        roots.push(0.0);
    }
    let scored: Vec<(f64, f64)> = roots.iter().map(|&t| (t, rotated_delta(c, t))).collect();
    let best = scored.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    scored
        .iter()
        .filter(|(_, d)| *d == best || (best.is_finite() && (d - best).abs() <= 1e-9 * best.abs().max(1.0)))
        .map(|x| x.0)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0)
}

/// Residual `(M, N)` and its Jacobian at a chart point.
fn mn_system(s: &Surface, u: f64, v: f64) -> Result<([f64; 2], [[f64; 2]; 2]), GeomError> {
    let j = s.form_jets(u, v, 1)?;
    Ok((
        [j.M.value(), j.N.value()],
        [[j.M.partial(1, 0), j.M.partial(0, 1)], [j.N.partial(1, 0), j.N.partial(0, 1)]],
    ))
}

/// Damped Newton on `M = N = 0` from a seed.
pub fn refine_umbilic(s: &Surface, u0: f64, v0: f64) -> Result<[f64; 2], UmbilicError> {
    let mut p = [u0, v0];
    let fail = UmbilicError::NonConvergence { u: u0, v: v0 };
    let (mut f, mut jac) = mn_system(s, p[0], p[1])?;
    let mut fnorm = f[0].hypot(f[1]);
    for _ in 0..NEWTON_MAX_ITER {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(fail);
        }
        let dx = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let q = [p[0] + t * dx[0], p[1] + t * dx[1]];
            if let Ok((fq, jq)) = mn_system(s, q[0], q[1]) {
                let nq = fq[0].hypot(fq[1]);
                if nq < fnorm || nq == 0.0 {
                    p = q;
                    f = fq;
                    jac = jq;
                    fnorm = nq;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        let step = t * dx[0].hypot(dx[1]);
        if fnorm < 1e-14 || (accepted && step < 1e-15 * (1.0 + p[0].hypot(p[1]))) {
            break;
        }
        if !accepted {
            break;
        }
    }
    let scale = jac[0][0].abs().max(jac[0][1].abs()).max(jac[1][0].abs()).max(jac[1][1].abs()).max(1.0);
    if fnorm < 1e-10 * scale {
        Ok(p)
    } else {
        Err(fail)
    }
}

/// All isolated umbilics in the surface domain.
pub fn find_umbilics(s: &Surface, grid: usize) -> Result<Vec<[f64; 2]>, UmbilicError> {
    let n = grid.max(2);
    let dom = s.domain;
    let node = |i: usize, j: usize| {
        (dom.u[0] + dom.width() * i as f64 / n as f64, dom.v[0] + dom.height() * j as f64 / n as f64)
    };
    let mut vals = vec![None; (n + 1) * (n + 1)];
    let mut tiny = 0usize;
    let mut valid = 0usize;
    let mut first_err = None;
    for i in 0..=n {
        for j in 0..=n {
            let (u, v) = node(i, j);
            let jets = s.form_jets(u, v, 0);
            if let Err(e) = &jets {
                first_err.get_or_insert_with(|| e.clone());
            }
            if let Ok(jets) = jets {
                let (m, nn) = (jets.M.value(), jets.N.value());
                let scale = (jets.E.value() + jets.G.value())
                    * (jets.e.value().abs() + jets.f.value().abs() + jets.g.value().abs())
                    * jets.W.value();
                valid += 1;
                if m.abs() + nn.abs() <= 1e-9 * scale.max(1e-300) {
                    tiny += 1;
                }
                vals[i * (n + 1) + j] = Some([m, nn]);
            }
        }
    }
    if let (0, Some(e)) = (valid, first_err) {
        return Err(e.into());
    }
    if valid > 0 && tiny * 2 > valid {
        return Err(UmbilicError::NonIsolatedUmbilics { fraction: 100.0 * tiny as f64 / valid as f64 });
    }
    let changes = |c: [[f64; 2]; 4], k: usize| {
        let lo = c.iter().any(|x| x[k] <= 0.0);
        let hi = c.iter().any(|x| x[k] >= 0.0);
        lo && hi
    };
    let mut found: Vec<[f64; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)].map(|(a, b)| vals[a * (n + 1) + b]);
            let Some(c) = corners.iter().copied().collect::<Option<Vec<_>>>() else { continue };
            let c = [c[0], c[1], c[2], c[3]];
            if !(changes(c, 0) && changes(c, 1)) {
                continue;
            }
            let (u0, v0) = node(i, j);
            let seed = [u0 + 0.5 * dom.width() / n as f64, v0 + 0.5 * dom.height() / n as f64];
            match refine_umbilic(s, seed[0], seed[1]) {
                Ok(p) if dom.contains(p[0], p[1]) => {
                    if !found.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < MERGE_RADIUS) {
                        found.push(p);
                    }
                }
                Ok(p) => debug!("umbilic seed ({}, {}) converged outside the domain to {:?}", seed[0], seed[1], p),
                Err(e) => debug!("dropping umbilic seed ({}, {}): {e}", seed[0], seed[1]),
            }
        }
    }
    found.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(found)
}

/// Umbilic with its normal form and type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct UmbilicRecord {
    pub position: [f64; 2],
    pub jet: NormalizedJet,
    pub classification: Classification,
}

pub fn analyze_umbilic(s: &Surface, p: [f64; 2], tol: f64) -> Result<UmbilicRecord, UmbilicError> {
    let jet = monge_normal_form(s, p[0], p[1])?;
    Ok(UmbilicRecord { position: p, jet, classification: classify(&jet, tol) })
}

/// Signed distance to the lemon/monstar stratum; negative on the lemon side.
pub fn bif_functional_d12(j: &NormalizedJet) -> f64 {
    j.d12_functional()
}

/// Discriminant of the umbilic equations near a fold: restrict one equation
/// to the zero curve of the other and evaluate at its critical point.
/// Positive means no umbilics nearby, negative means two.
pub fn bif_functional_d123(s: &Surface, u0: f64, v0: f64) -> Result<f64, UmbilicError> {
    let (_, jac) = mn_system(s, u0, v0)?;
    // solve equation `row` for variable `col`, where that partial is largest
    let mut best = (0, 0, 0.0);
    for (r, row) in jac.iter().enumerate() {
        for (c, x) in row.iter().enumerate() {
            if x.abs() > best.2 {
                best = (r, c, x.abs());
            }
        }
    }
    let (row, col, _) = best;
    let fail = UmbilicError::NonConvergence { u: u0, v: v0 };
    let pt = |t: f64, w: f64| if col == 1 { (u0 + t, w) } else { (w, v0 + t) };
    let mut w_guess = if col == 1 { v0 } else { u0 };
    // m(t): the other equation along the zero curve of the first
    let mut along = |t: f64| -> Result<f64, UmbilicError> {
        let mut w = w_guess;
        for _ in 0..NEWTON_MAX_ITER {
            let (x, y) = pt(t, w);
            let (f, j) = mn_system(s, x, y)?;
            let dw = f[row] / j[row][col];
            w -= dw;
            if dw.abs() < 1e-15 * (1.0 + w.abs()) {
                break;
            }
        }
        let (x, y) = pt(t, w);
        let (f, _) = mn_system(s, x, y)?;
        if f[row].abs() > 1e-11 {
            return Err(fail.clone());
        }
        w_guess = w;
        Ok(f[1 - row])
    };
    let h = 1e-4;
    let mut t = 0.0;
    for _ in 0..NEWTON_MAX_ITER {
        let (mm, m0, mp) = (along(t - h)?, along(t)?, along(t + h)?);
        let d1 = (mp - mm) / (2.0 * h);
        let d2 = (mp - 2.0 * m0 + mm) / (h * h);
        if d2 == 0.0 {
            return Err(fail);
        }
        let dt = -d1 / d2;
        t += dt;
        if dt.abs() < 1e-12 {
            break;
        }
    }
    let (mm, m0, mp) = (along(t - h)?, along(t)?, along(t + h)?);
    let d2 = (mp - 2.0 * m0 + mm) / (h * h);
    Ok(m0 * d2.signum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    fn jet(a: f64, b: f64, c: f64) -> NormalizedJet {
        NormalizedJet::from_coefficients(1.0, [a, b, c], [0.0; 5])
    }

    #[test]
    fn darbouxian_examples() {
        assert_eq!(classify(&jet(-1.0, 1.0, 0.0), CLASSIFY_TOL).class, UmbilicClass::D3);
        assert_eq!(classify(&jet(1.5, 1.0, 0.0), CLASSIFY_TOL).class, UmbilicClass::D2);
        assert_eq!(classify(&jet(3.0, 1.0, 0.0), CLASSIFY_TOL).class, UmbilicClass::D1);
    }

    #[test]
    fn transitions() {
        let c = classify(&jet(3.0, 1.0, 2.0), CLASSIFY_TOL);
        assert_eq!(c.class, UmbilicClass::D12Case1);
        let c = classify(&jet(2.0, 1.0, 1.0), CLASSIFY_TOL);
        assert_eq!(c.class, UmbilicClass::D12Case2);
        assert!(c.tangent_stratum);
        let j = NormalizedJet::from_coefficients(1.0, [1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(classify(&j, CLASSIFY_TOL).class, UmbilicClass::D123);
        assert_eq!(classify(&jet(1.0, 0.0, 1.0), CLASSIFY_TOL).class, UmbilicClass::Degenerate);
    }

    #[test]
    fn cubic_normal_form_of_polynomial() {
        let s = Surface::monge("(u^2+v^2)/2 + 3*u^3/6 + u*v^2/2 + 2*v^3/6", Domain::square(0.5)).unwrap();
        let j = monge_normal_form(&s, 0.0, 0.0).unwrap();
        assert_eq!(j.theta, 0.0);
        assert!((j.k - 1.0).abs() < 1e-14);
        assert!((j.a - 3.0).abs() < 1e-13 && (j.b - 1.0).abs() < 1e-13 && (j.c - 2.0).abs() < 1e-13);
    }

    #[test]
    fn negative_b_is_reflected() {
        // monkey saddle: all three frames tie, so theta = 0 is kept
        let s = Surface::monge("(u^2+v^2)/2 + u^3/6 - u*v^2/2", Domain::square(0.5)).unwrap();
        let j = monge_normal_form(&s, 0.0, 0.0).unwrap();
        assert_eq!(j.theta, 0.0);
        assert!(j.reflected);
        assert!((j.a + 1.0).abs() < 1e-13 && (j.b - 1.0).abs() < 1e-13 && j.c.abs() < 1e-13);
    }

    #[test]
    fn non_umbilic_point_is_rejected() {
        let s = Surface::monge("u^2/2 + v^2", Domain::square(0.5)).unwrap();
        assert!(matches!(monge_normal_form(&s, 0.0, 0.0), Err(UmbilicError::NotUmbilic { .. })));
    }

    #[test]
    fn frame_choice_ignores_the_chart() {
        // node frame of a D2 cubic: u^3 * 1.5 + 3 u v^2 in third derivatives
        let c = [1.5, 0.0, 1.0, 0.0];
        let t = rotation_killing_bprime(&c);
        assert_eq!(t, 0.0);
        for k in 0..12 {
            let phi = -1.4 + 0.25 * k as f64;
            let rc = rotate_cubic(&c, phi);
            let t = rotation_killing_bprime(&rc);
            assert!(bprime(&rc, t).abs() < 1e-12);
            assert!((rotated_delta(&rc, t) + 0.5).abs() < 1e-10, "phi {phi}: {}", rotated_delta(&rc, t));
        }
    }

    /// Third derivatives of the cubic part in coordinates rotated by `phi`.
    fn rotate_cubic(c: &[f64; 4], phi: f64) -> [f64; 4] {
        let f = |x: f64, y: f64| c[0] * x * x * x / 6.0 + c[1] * x * x * y / 2.0 + c[2] * x * y * y / 2.0 + c[3] * y * y * y / 6.0;
        let (s, co) = phi.sin_cos();
        let g = |x: f64, y: f64| f(co * x - s * y, s * x + co * y);
        // exact for cubics: solve from four samples
        let (g10, g01, g11, g1m) = (g(1.0, 0.0), g(0.0, 1.0), g(1.0, 1.0), g(1.0, -1.0));
        let e0 = g10 * 6.0;
        let e3 = g01 * 6.0;
        // g(1,1) = e0/6 + e1/2 + e2/2 + e3/6, g(1,-1) = e0/6 - e1/2 + e2/2 - e3/6
        let sum = g11 + g1m - e0 / 3.0;
        let diff = g11 - g1m - e3 / 3.0;
        [e0, diff, sum, e3]
    }

    #[test]
    fn tangent_stratum_frame_is_not_preferred() {
        // (2, 1, 1) has a double root at 0 and a lemon/monstar frame at pi/4
        let c = [2.0, 0.0, 1.0, 1.0];
        let t = rotation_killing_bprime(&c);
        assert!((t - std::f64::consts::FRAC_PI_4).abs() < 1e-9, "{t}");
        assert!(rotated_delta(&c, t).abs() < 1e-9);
    }
}
