//! Principal lines, principal cycles, return maps and the hyperbolicity
//! integrals of a cycle.
#![allow(non_snake_case)]

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dot, Domain, Foliation, GeomError, Surface, UMBILIC_TOL};
use crate::lift::{self, Chart, LiftPoint, TraceOptions};
use crate::ode::{dopri_step, Adaptive, StepError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoliationError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("start point ({u}, {v}) is umbilic")]
    UmbilicStart { u: f64, v: f64 },
    #[error("curve left the domain before returning to the section")]
    NoReturn,
    #[error("cycle passes through an umbilic")]
    UmbilicOnCycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DomainExit,
    UmbilicHit,
    Closed,
    MaxLength,
    StepFailure,
}

/// A principal line as a polyline in the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PrincipalCurve {
    pub foliation: Foliation,
    /// Chart points `(u, v)`.
    pub points: Vec<[f64; 2]>,
    /// Surface arclength at each point.
    pub arclength: Vec<f64>,
    pub termination: Termination,
    /// Whether part of the curve was followed on the lifted surface.
    pub lifted: bool,
}

impl PrincipalCurve {
    pub fn length(&self) -> f64 {
        self.arclength.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LineOptions {
    /// Largest step in surface arclength.
    pub step: f64,
    pub max_len: f64,
    pub tol: f64,
    /// Radius (chart units) around known umbilics inside which the lifted
    /// field is followed instead.
    pub r_lift: f64,
    pub umbilics: Vec<[f64; 2]>,
    /// Closure tolerance in embedding distance.
    pub close_tol: f64,
}

impl Default for LineOptions {
    fn default() -> Self {
        LineOptions {
            step: 0.02,
            max_len: 5.0,
            tol: 1e-10,
            r_lift: 10.0 * UMBILIC_TOL.sqrt(),
            umbilics: Vec::new(),
            close_tol: 1e-7,
        }
    }
}

/// Unit (first fundamental form) principal direction, oriented along `prev`.
pub fn principal_dir(s: &Surface, x: [f64; 2], f: Foliation, prev: Option<[f64; 2]>) -> Result<[f64; 2], GeomError> {
    let d = s.principal_directions(x[0], x[1])?.dir(f);
    Ok(match prev {
        Some(p) if d[0] * p[0] + d[1] * p[1] < 0.0 => [-d[0], -d[1]],
        _ => d,
    })
}

fn embed_tangent(s: &Surface, x: [f64; 2], w: [f64; 2]) -> Result<([f64; 3], [f64; 3]), GeomError> {
    let a = s.alpha(x[0], x[1], 1)?;
    let p = [a[0].value(), a[1].value(), a[2].value()];
    let t: [f64; 3] = std::array::from_fn(|i| a[i].partial(1, 0) * w[0] + a[i].partial(0, 1) * w[1]);
    Ok((p, t))
}

/// Integrate a principal line from `start`.
pub fn integrate_line(
    s: &Surface,
    start: [f64; 2],
    foliation: Foliation,
    sense: f64,
    opts: &LineOptions,
) -> Result<PrincipalCurve, FoliationError> {
    let d0 = match s.principal_directions(start[0], start[1]) {
        Ok(d) => d.dir(foliation),
        Err(GeomError::UmbilicPoint { u, v }) => return Err(FoliationError::UmbilicStart { u, v }),
        Err(e) => return Err(e.into()),
    };
    let mut prev = [d0[0] * sense, d0[1] * sense];
    let (p0, t0) = embed_tangent(s, start, prev)?;
    let mut x = start;
    let mut pts = vec![x];
    let mut arc = vec![0.0];
    let mut len = 0.0;
    let mut lifted = false;
    let mut ctl = Adaptive::new(opts.step * 0.1, opts.tol, opts.step);
    let mut far = false;
    let mut phi_prev = 0.0;
    let near_umbilic = |x: [f64; 2]| opts.umbilics.iter().copied().find(|c| (x[0] - c[0]).hypot(x[1] - c[1]) < opts.r_lift);
    let section = |x: [f64; 2]| -> Result<(f64, f64), GeomError> {
        let p = s.point(x[0], x[1])?;
        let d = [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]];
        Ok((dot(&d, &t0), dot(&d, &d).sqrt()))
    };
    let termination = 'run: loop {
        if len >= opts.max_len {
            break 'run Termination::MaxLength;
        }
        if let Some(c) = near_umbilic(x) {
            lifted = true;
            match lift_through(s, x, prev, c, opts, opts.max_len - len) {
                Ok(seg) => {
                    for (p, l) in seg.points.iter().zip(seg.arclength.iter()) {
                        pts.push(*p);
                        arc.push(len + l);
                    }
                    len += seg.length;
                    x = *pts.last().unwrap();
                    match seg.exit_dir {
                        Some(d) => {
                            prev = d;
                            ctl.h = opts.step * 0.01;
                            continue;
                        }
                        None => break 'run seg.termination,
                    }
                }
                Err(_) => break 'run Termination::StepFailure,
            }
        }
        let p = prev;
        let mut f = |y: &[f64; 2]| principal_dir(s, *y, foliation, Some(p));
        let (y, h) = match ctl.advance(&mut f, &x) {
            Ok(r) => r,
            Err(StepError::Underflow(_)) => break 'run Termination::StepFailure,
            Err(StepError::Field(GeomError::UmbilicPoint { .. })) => break 'run Termination::UmbilicHit,
            Err(StepError::Field(_)) => break 'run Termination::DomainExit,
        };
        if !s.domain.contains(y[0], y[1]) {
            break 'run Termination::DomainExit;
        }
        prev = match principal_dir(s, y, foliation, Some(prev)) {
            Ok(d) => d,
            Err(GeomError::UmbilicPoint { .. }) => {
                pts.push(y);
                arc.push(len + h);
                break 'run Termination::UmbilicHit;
            }
            Err(_) => break 'run Termination::DomainExit,
        };
        let (phi, dist) = section(y).map_err(FoliationError::Geom)?;
        if dist > 5.0 * opts.step {
            far = true;
        }
        if far && phi_prev < 0.0 && phi >= 0.0 && dist < 10.0 * opts.step {
            // crossed the plane through the start: check for closure
            let hit = refine_crossing(s, x, prev, foliation, h, |z| section(z).map(|r| r.0))?;
            let (_, dclose) = section(hit.0)?;
            let (_, tcur) = embed_tangent(s, hit.0, principal_dir(s, hit.0, foliation, Some(prev))?)?;
            let align = dot(&tcur, &t0) / (dot(&tcur, &tcur) * dot(&t0, &t0)).sqrt();
            if dclose < opts.close_tol && align.abs() > 1.0 - 1e-8 {
                pts.push(start);
                arc.push(len + hit.1);
                break 'run Termination::Closed;
            }
        }
        phi_prev = phi;
        len += h;
        x = y;
        pts.push(x);
        arc.push(len);
    };
    Ok(PrincipalCurve { foliation, points: pts, arclength: arc, termination, lifted })
}

struct LiftSegment {
    points: Vec<[f64; 2]>,
    arclength: Vec<f64>,
    length: f64,
    termination: Termination,
    exit_dir: Option<[f64; 2]>,
}

/// Follow the lifted field through the small ball around an umbilic.
fn lift_through(
    s: &Surface,
    x: [f64; 2],
    dir: [f64; 2],
    center: [f64; 2],
    opts: &LineOptions,
    budget: f64,
) -> Result<LiftSegment, GeomError> {
    let mut lp = LiftPoint::from_angle(x[0], x[1], dir[1].atan2(dir[0]));
    lift::project(s, &mut lp)?;
    let f = lift::lifted_field(s, &lp)?;
    let proj = |f: &[f64; 3], c: Chart| match c {
        Chart::P => [f[0], f[1]],
        Chart::Q => [f[1], f[0]],
    };
    let v = proj(&f, lp.chart);
    let sigma = if v[0] * dir[0] + v[1] * dir[1] >= 0.0 { 1.0 } else { -1.0 };
    let topts = TraceOptions {
        step: (opts.r_lift * 0.2).min(opts.step),
        max_len: budget,
        seed_offset: 0.0,
        tol: opts.tol,
        reentry_radius: 0.0,
        stop_points: vec![center],
        stop_radius: opts.r_lift * 1e-3,
        exit_ball: Some((center, 2.0 * opts.r_lift)),
    };
    let tr = lift::integrate_lift(s, lp, sigma, &topts, None);
    let n = tr.points.len();
    let points: Vec<[f64; 2]> = tr.points.iter().skip(1).map(|p| p.uv()).collect();
    let arc: Vec<f64> = tr.arclength.iter().skip(1).copied().collect();
    let exit_dir = if tr.exited && n >= 2 {
        let a = tr.points[n - 2];
        let b = tr.points[n - 1];
        let w = [b.u - a.u, b.v - a.v];
        let ff = s.fundamental_forms(b.u, b.v)?;
        let nrm = ff.first(w).sqrt();
        (nrm > 0.0).then(|| [w[0] / nrm, w[1] / nrm])
    } else {
        None
    };
    Ok(LiftSegment { points, arclength: arc, length: tr.length, termination: tr.termination, exit_dir })
}

/// Re-step from `x` with a step chosen so that `phi` vanishes.
fn refine_crossing(
    s: &Surface,
    x: [f64; 2],
    prev: [f64; 2],
    f: Foliation,
    h: f64,
    phi: impl Fn([f64; 2]) -> Result<f64, GeomError>,
) -> Result<([f64; 2], f64), GeomError> {
    let mut field = |y: &[f64; 2]| principal_dir(s, *y, f, Some(prev));
    let mut at = |t: f64| -> Result<([f64; 2], f64), GeomError> {
        let y = if t == 0.0 { x } else { dopri_step(&mut field, &x, t)?.0 };
        Ok((y, phi(y)?))
    };
    let (mut a, mut fa) = (0.0, at(0.0)?.1);
    let (mut b, mut fb) = (h, at(h)?.1);
    let mut best = at(h)?.0;
    for _ in 0..60 {
        let t = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
        let t = if t <= a.min(b) || t >= a.max(b) { 0.5 * (a + b) } else { t };
        let (y, ft) = at(t)?;
        best = y;
        if ft.abs() < 1e-15 || (b - a).abs() < 1e-15 {
            return Ok((y, t));
        }
        if (ft < 0.0) == (fa < 0.0) {
            a = t;
            fa = ft;
        } else {
            b = t;
            fb = ft;
        }
    }
    Ok((best, 0.5 * (a + b)))
}

/// Transversal section through a base point: the plane through the
/// embedded base point orthogonal to the curve.
#[derive(Clone, Copy, Debug)]
struct Section {
    o: [f64; 2],
    p0: [f64; 3],
    t3: [f64; 3],
    d3: [f64; 3],
    t0: [f64; 2],
    d0: [f64; 2],
}

impl Section {
    /// `hint` picks the sense of the curve through `o`.
    fn new(s: &Surface, o: [f64; 2], f: Foliation, hint: Option<[f64; 2]>) -> Result<Self, FoliationError> {
        let pd = match s.principal_directions(o[0], o[1]) {
            Ok(d) => d,
            Err(GeomError::UmbilicPoint { u, v }) => return Err(FoliationError::UmbilicStart { u, v }),
            Err(e) => return Err(e.into()),
        };
        let mut t0 = pd.dir(f);
        if hint.is_some_and(|h| h[0] * t0[0] + h[1] * t0[1] < 0.0) {
            t0 = [-t0[0], -t0[1]];
        }
        let d0 = pd.dir(f.other());
        let (p0, t3) = embed_tangent(s, o, t0)?;
        let (_, d3) = embed_tangent(s, o, d0)?;
        let n = dot(&d3, &d3).sqrt();
        Ok(Section { o, p0, t3, d3: d3.map(|x| x / n), t0, d0 })
    }

    fn phi(&self, s: &Surface, x: [f64; 2]) -> Result<f64, GeomError> {
        let p = s.point(x[0], x[1])?;
        Ok((p[0] - self.p0[0]) * self.t3[0] + (p[1] - self.p0[1]) * self.t3[1] + (p[2] - self.p0[2]) * self.t3[2])
    }

    fn coord(&self, s: &Surface, x: [f64; 2]) -> Result<f64, GeomError> {
        let p = s.point(x[0], x[1])?;
        Ok((p[0] - self.p0[0]) * self.d3[0] + (p[1] - self.p0[1]) * self.d3[1] + (p[2] - self.p0[2]) * self.d3[2])
    }

    fn dist(&self, s: &Surface, x: [f64; 2]) -> Result<f64, GeomError> {
        let p = s.point(x[0], x[1])?;
        Ok(((p[0] - self.p0[0]).powi(2) + (p[1] - self.p0[1]).powi(2) + (p[2] - self.p0[2]).powi(2)).sqrt())
    }

    /// Point of the section at parameter `s`.
    fn point_at(&self, surf: &Surface, sp: f64) -> Result<[f64; 2], GeomError> {
        let base = [self.o[0] + sp * self.d0[0], self.o[1] + sp * self.d0[1]];
        let mut t = 0.0;
        for _ in 0..30 {
            let x = [base[0] + t * self.t0[0], base[1] + t * self.t0[1]];
            let f = self.phi(surf, x)?;
            let (_, tt) = embed_tangent(surf, x, self.t0)?;
            let df = dot(&tt, &self.t3);
            let dt = f / df;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        Ok([base[0] + t * self.t0[0], base[1] + t * self.t0[1]])
    }
}

/// State along a cycle: position and the three running integrals.
type CycleState = [f64; 5];

/// Value and gradient of `H` and of `r = sqrt(H^2 - K)`. The gap is taken
/// from the discriminant of `T`, which keeps its relative accuracy close
/// to umbilics.
fn gap_derivs(s: &Surface, x: [f64; 2]) -> Result<(f64, [f64; 2], f64, [f64; 2]), GeomError> {
    let j = s.form_jets(x[0], x[1], 1)?;
    let (H, _) = j.mean_gauss()?;
    let w2 = j.W * j.W;
    let disc = j.M * j.M - (j.L * j.N).scale(4.0);
    if !(disc.value() > 0.0) {
        return Err(GeomError::UmbilicPoint { u: x[0], v: x[1] });
    }
    let r = disc.sqrt()? * (w2 * w2 * w2).recip()?.sqrt()?.scale(0.5);
    Ok((H.value(), [H.partial(1, 0), H.partial(0, 1)], r.value(), [r.partial(1, 0), r.partial(0, 1)]))
}

/// Rates of the three loop integrals for a displacement `d` in the chart.
fn integral_rates(s: &Surface, x: [f64; 2], d: [f64; 2]) -> Result<[f64; 3], GeomError> {
    let (_, gh, r, gr) = gap_derivs(s, x)?;
    let dh = gh[0] * d[0] + gh[1] * d[1];
    let dr = gr[0] * d[0] + gr[1] * d[1];
    Ok([(dh - dr) / (2.0 * r), (dh + dr) / (2.0 * r), dh / r])
}

fn integrand(s: &Surface, y: &CycleState, f: Foliation, prev: [f64; 2]) -> Result<CycleState, GeomError> {
    let x = [y[0], y[1]];
    let d = principal_dir(s, x, f, Some(prev))?;
    let [a1, a2, b] = integral_rates(s, x, d)?;
    Ok([d[0], d[1], a1, a2, b])
}

struct Passage {
    state: CycleState,
    exit_dir: [f64; 2],
    points: Vec<[f64; 2]>,
    arclength: Vec<f64>,
    length: f64,
}

/// Carry a cycle state through the ball of radius `2 r_lift` around an
/// umbilic by integrating the lifted field, which stays regular over the
/// umbilic. The integrals are augmented to the lifted state.
fn lifted_passage(
    s: &Surface,
    y: CycleState,
    dir: [f64; 2],
    center: [f64; 2],
    opts: &CycleOptions,
) -> Result<Passage, FoliationError> {
    let mut lp = LiftPoint::from_angle(y[0], y[1], dir[1].atan2(dir[0]));
    lift::project(s, &mut lp)?;
    let uv_rate = |v: &[f64; 3], c: Chart| match c {
        Chart::P => [v[0], v[1]],
        Chart::Q => [v[1], v[0]],
    };
    let v0 = lift::lifted_field(s, &lp)?;
    let w0 = uv_rate(&v0, lp.chart);
    let mut sigma = if w0[0] * dir[0] + w0[1] * dir[1] >= 0.0 { 1.0 } else { -1.0 };
    // only the `dH / r` integral is integrated here: the other two differ
    // from its half by the exact differential `d ln r / 2`
    let r_in = gap_derivs(s, [y[0], y[1]])?.2;
    let mut ib = y[4];
    let mut points = Vec::new();
    let mut arclength = Vec::new();
    let mut length = 0.0;
    // the loop integrals are noisy on the fiber and do not feed back
    let mut ctl = Adaptive { control: 3, ..Adaptive::new(opts.r_lift * 0.1, opts.tol, 0.05) };
    let mut anchor = lp;
    for step in 0..50_000 {
        // a passage that stops moving has run into a singular point of the lift
        if step % 500 == 499 {
            let (a, b) = (anchor.uv(), lp.uv());
            if anchor.chart == lp.chart && (a[0] - b[0]).hypot(a[1] - b[1]) + (anchor.slope - lp.slope).abs() < 1e-9 {
                return Err(FoliationError::UmbilicOnCycle);
            }
            anchor = lp;
        }
        let chart = lp.chart;
        let sg = sigma;
        let mut field = |z: &[f64; 4]| -> Result<[f64; 4], GeomError> {
            let q = LiftPoint::from_local(chart, [z[0], z[1], z[2]]);
            let v = lift::lifted_field(s, &q)?;
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(GeomError::UmbilicPoint { u: q.u, v: q.v });
            }
            let v = v.map(|c| c * sg / n);
            let [_, _, b] = integral_rates(s, q.uv(), uv_rate(&v, chart))?;
            Ok([v[0], v[1], v[2], b])
        };
        let l = lp.local();
        let z0 = [l[0], l[1], l[2], ib];
        let (z1, _) = match ctl.advance(&mut field, &z0) {
            Ok(r) => r,
            Err(StepError::Field(GeomError::UmbilicPoint { .. })) => return Err(FoliationError::UmbilicOnCycle),
            Err(_) => return Err(FoliationError::NoReturn),
        };
        ib = z1[3];
        let mut next = LiftPoint::from_local(chart, [z1[0], z1[1], z1[2]]);
        lift::project(s, &mut next)?;
        if !s.domain.contains(next.u, next.v) {
            return Err(FoliationError::NoReturn);
        }
        let ds = s.fundamental_forms(lp.u, lp.v)?.first([next.u - lp.u, next.v - lp.v]).max(0.0).sqrt();
        length += ds;
        if next.slope.abs() > 2.0 {
            let old = lift::lifted_field(s, &next)?.map(|c| c * sigma);
            let sl = next.slope;
            let new = LiftPoint { slope: 1.0 / sl, chart: chart.other(), ..next };
            let mapped = [old[1], old[0], -old[2] / (sl * sl)];
            let nv = lift::lifted_field(s, &new)?;
            sigma = if nv[0] * mapped[0] + nv[1] * mapped[1] + nv[2] * mapped[2] < 0.0 { -1.0 } else { 1.0 };
            next = new;
            ctl.h = ctl.h.min(opts.r_lift * 0.1);
        }
        lp = next;
        points.push(lp.uv());
        arclength.push(length);
        let v = lift::lifted_field(s, &lp)?;
        if (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() < 1e-9 {
            return Err(FoliationError::UmbilicOnCycle);
        }
        if (lp.u - center[0]).hypot(lp.v - center[1]) > 2.0 * opts.r_lift {
            let v = lift::lifted_field(s, &lp)?.map(|c| c * sigma);
            let w = uv_rate(&v, lp.chart);
            let nrm = s.fundamental_forms(lp.u, lp.v)?.first(w).sqrt();
            if !(nrm > 0.0) {
                return Err(FoliationError::UmbilicOnCycle);
            }
            let dlog = (gap_derivs(s, lp.uv())?.2 / r_in).ln();
            let db = ib - y[4];
            let state = [lp.u, lp.v, y[2] + 0.5 * (db - dlog), y[3] + 0.5 * (db + dlog), ib];
            return Ok(Passage { state, exit_dir: [w[0] / nrm, w[1] / nrm], points, arclength, length });
        }
    }
    Err(FoliationError::UmbilicOnCycle)
}

struct Return {
    coord: f64,
    state: CycleState,
    curve: Vec<[f64; 2]>,
    arclength: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleOptions {
    /// Seeds per side of the seed grid.
    pub seed_grid: usize,
    pub step: f64,
    /// Longest curve followed while looking for a return.
    pub max_len: f64,
    pub tol: f64,
    /// Half-width of the transversal used for return-map samples.
    pub halfwidth: f64,
    /// Keep this far (chart units) from these points.
    pub umbilics: Vec<[f64; 2]>,
    pub r_lift: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            seed_grid: 3,
            step: 0.02,
            max_len: 20.0,
            tol: 1e-11,
            halfwidth: 1e-3,
            umbilics: Vec::new(),
            r_lift: 10.0 * UMBILIC_TOL.sqrt(),
        }
    }
}

/// Flow from `x0` along the foliation until the first return to `sec`.
fn first_return(
    s: &Surface,
    sec: &Section,
    x0: [f64; 2],
    f: Foliation,
    opts: &CycleOptions,
    keep_curve: bool,
    either_sign: bool,
) -> Result<Return, FoliationError> {
    let mut prev = principal_dir(s, x0, f, Some(sec.t0))?;
    let mut y: CycleState = [x0[0], x0[1], 0.0, 0.0, 0.0];
    let mut ctl = Adaptive::new(opts.step * 0.1, opts.tol, opts.step);
    let mut len = 0.0;
    let mut curve = vec![x0];
    let mut arc = vec![0.0];
    let mut phi_prev = sec.phi(s, x0)?;
    let mut far = false;
    let scale = s.domain.diameter();
    while len < opts.max_len {
        let p = prev;
        let mut field = |z: &CycleState| integrand(s, z, f, p);
        let (yn, h) = match ctl.advance(&mut field, &y) {
            Ok(r) => r,
            Err(StepError::Field(GeomError::UmbilicPoint { .. })) => return Err(FoliationError::UmbilicOnCycle),
            Err(_) => return Err(FoliationError::NoReturn),
        };
        let xn = [yn[0], yn[1]];
        if !s.domain.contains(xn[0], xn[1]) {
            return Err(FoliationError::NoReturn);
        }
        if let Some(c) = opts.umbilics.iter().copied().find(|c| (xn[0] - c[0]).hypot(xn[1] - c[1]) < opts.r_lift) {
            let d = principal_dir(s, xn, f, Some(prev)).unwrap_or(prev);
            let pass = lifted_passage(s, yn, d, c, opts)?;
            if keep_curve {
                curve.push(xn);
                arc.push(len + h);
                curve.extend(pass.points.iter().copied());
                arc.extend(pass.arclength.iter().map(|a| len + h + a));
            }
            len += h + pass.length;
            y = pass.state;
            prev = pass.exit_dir;
            phi_prev = sec.phi(s, [y[0], y[1]])?;
            ctl.h = opts.step * 0.01;
            continue;
        }
        let phi = sec.phi(s, xn)?;
        let dist = sec.dist(s, xn)?;
        if dist > 0.02 * scale {
            far = true;
        }
        let crossed = (phi_prev < 0.0 && phi >= 0.0) || (either_sign && phi_prev > 0.0 && phi <= 0.0);
        if far && crossed && dist < 0.02 * scale {
            // refine the crossing by re-stepping the full state
            let mut g = |z: &CycleState| integrand(s, z, f, p);
            let mut at = |t: f64| -> Result<(CycleState, f64), FoliationError> {
                let z = dopri_step(&mut g, &y, t)?.0;
                Ok((z, sec.phi(s, [z[0], z[1]])?))
            };
            let (mut a, mut fa) = (0.0, phi_prev);
            let (mut b, mut fb) = (h, phi);
            let mut best = yn;
            let mut tbest = h;
            for _ in 0..80 {
                let t = if fb != fa { b - fb * (b - a) / (fb - fa) } else { 0.5 * (a + b) };
                let t = if t <= a || t >= b { 0.5 * (a + b) } else { t };
                let (z, ft) = at(t)?;
                best = z;
                tbest = t;
                if ft.abs() < 1e-16 || b - a < 1e-16 {
                    break;
                }
                if (ft < 0.0) == (fa < 0.0) {
                    a = t;
                    fa = ft;
                } else {
                    b = t;
                    fb = ft;
                }
            }
            let pt = [best[0], best[1]];
            if keep_curve {
                curve.push(pt);
                arc.push(len + tbest);
            }
            return Ok(Return { coord: sec.coord(s, pt)?, state: best, curve, arclength: arc });
        }
        phi_prev = phi;
        prev = principal_dir(s, xn, f, Some(prev))?;
        y = yn;
        len += h;
        if keep_curve {
            curve.push(xn);
            arc.push(len);
        }
    }
    Err(FoliationError::NoReturn)
}

/// A closed principal line with its return-map derivative and the
/// hyperbolicity integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleRecord {
    pub curve: PrincipalCurve,
    pub base_point: [f64; 2],
    /// Loop integral of `dH / sqrt(H^2 - K)`.
    pub integral_b: f64,
    /// Loop integral of `dk1 / (k2 - k1)`.
    pub integral_a1: f64,
    /// Loop integral of `dk2 / (k2 - k1)`.
    pub integral_a2: f64,
    pub pi_prime: f64,
    pub hyperbolic: bool,
    /// Whether the return-map test and the integral test agree.
    pub consistent: bool,
    pub length: f64,
}

impl CycleRecord {
    /// Chart direction of travel at the base point.
    pub fn direction(&self) -> [f64; 2] {
        let p = &self.curve.points;
        match p.len() {
            0 | 1 => [0.0, 0.0],
            _ => [p[1][0] - p[0][0], p[1][1] - p[0][1]],
        }
    }
}

/// Threshold on `|pi' - 1|` for calling a cycle hyperbolic.
pub const HYPERBOLIC_TOL: f64 = 1e-4;

fn cycle_from_base(
    s: &Surface,
    o: [f64; 2],
    dir: [f64; 2],
    f: Foliation,
    opts: &CycleOptions,
) -> Result<CycleRecord, FoliationError> {
    let sec = Section::new(s, o, f, Some(dir))?;
    let ret = first_return(s, &sec, o, f, opts, true, false)?;
    let h = opts.halfwidth.min(1e-4);
    let xp = sec.point_at(s, h)?;
    let xm = sec.point_at(s, -h)?;
    let rp = first_return(s, &sec, xp, f, opts, false, false)?;
    let rm = first_return(s, &sec, xm, f, opts, false, false)?;
    let pi_prime = (rp.coord - rm.coord) / (sec.coord(s, xp)? - sec.coord(s, xm)?);
    let [_, _, a1, a2, b] = ret.state;
    let hyp_pi = (pi_prime - 1.0).abs() > HYPERBOLIC_TOL;
    let hyp_int = b.abs() > 2.0 * HYPERBOLIC_TOL;
    let length = ret.arclength.last().copied().unwrap_or(0.0);
    Ok(CycleRecord {
        curve: PrincipalCurve {
            foliation: f,
            points: ret.curve,
            arclength: ret.arclength,
            termination: Termination::Closed,
            lifted: false,
        },
        base_point: o,
        integral_b: b,
        integral_a1: a1,
        integral_a2: a2,
        pi_prime,
        hyperbolic: hyp_int,
        consistent: hyp_pi == hyp_int,
        length,
    })
}

/// Samples `(s, pi(s))` of the return map on the section through the base
/// point of `cycle`, in embedding arclength along the section.
pub fn return_map(
    s: &Surface,
    base: [f64; 2],
    f: Foliation,
    halfwidth: f64,
    samples: usize,
    opts: &CycleOptions,
) -> Result<Vec<(f64, f64)>, FoliationError> {
    let sec = Section::new(s, base, f, None)?;
    let n = samples.max(9);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let sp = -halfwidth + 2.0 * halfwidth * i as f64 / (n - 1) as f64;
        let x = if sp == 0.0 { base } else { sec.point_at(s, sp)? };
        let r = first_return(s, &sec, x, f, opts, false, false)?;
        out.push((sec.coord(s, x)?, r.coord));
    }
    Ok(out)
}

/// Fixed point of the return map near `seed`, by secant iteration.
/// Both senses are tried, since a cycle that repels in one sense attracts
/// in the other. Returns the base point and the sense that converged.
fn refine_cycle(
    s: &Surface,
    seed: [f64; 2],
    f: Foliation,
    opts: &CycleOptions,
) -> Result<([f64; 2], [f64; 2]), FoliationError> {
    let sec = Section::new(s, seed, f, None)?;
    match refine_cycle_sense(s, seed, &sec, f, opts) {
        Ok(o) => Ok((o, sec.t0)),
        Err(FoliationError::Geom(e)) => Err(e.into()),
        Err(_) => {
            let back = Section::new(s, seed, f, Some([-sec.t0[0], -sec.t0[1]]))?;
            let o = refine_cycle_sense(s, seed, &back, f, opts)?;
            Ok((o, back.t0))
        }
    }
}

fn refine_cycle_sense(
    s: &Surface,
    seed: [f64; 2],
    sec: &Section,
    f: Foliation,
    opts: &CycleOptions,
) -> Result<[f64; 2], FoliationError> {
    let disp = |sp: f64| -> Result<f64, FoliationError> {
        let x = if sp == 0.0 { seed } else { sec.point_at(s, sp)? };
        let r = first_return(s, sec, x, f, opts, false, false)?;
        Ok(r.coord - sec.coord(s, x)?)
    };
    let mut s0 = 0.0;
    let mut f0 = disp(s0)?;
    if f0.abs() < 1e-12 {
        return Ok(seed);
    }
    // the returned point is a better guess for attracting cycles
    let mut s1 = f0;
    let mut f1 = disp(s1)?;
    for _ in 0..40 {
        if f1.abs() < 1e-12 || f1 == f0 {
            break;
        }
        let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = disp(s1)?;
    }
    if f1.abs() > 1e-9 {
        return Err(FoliationError::NoReturn);
    }
    Ok(sec.point_at(s, s1)?)
}

/// All distinct principal cycles found by shooting from a seed grid.
pub fn find_cycles(s: &Surface, region: Domain, f: Foliation, opts: &CycleOptions) -> Vec<CycleRecord> {
    let n = opts.seed_grid.max(1);
    let mut out: Vec<CycleRecord> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let u = region.u[0] + region.width() * (i as f64 + 0.5) / n as f64;
            let v = region.v[0] + region.height() * (j as f64 + 0.5) / n as f64;
            let Ok((o, d)) = refine_cycle(s, [u, v], f, opts) else { continue };
            if out.iter().any(|c| cycle_separation(s, c, o, opts).map(|d| d < 1e-6).unwrap_or(false)) {
                continue;
            }
            if let Ok(c) = cycle_from_base(s, o, d, f, opts) {
                out.push(c);
            }
        }
    }
    out
}

/// First principal cycle found from the seed grid, if any.
pub fn find_cycle(s: &Surface, region: Domain, f: Foliation, opts: &CycleOptions) -> Option<CycleRecord> {
    let n = opts.seed_grid.max(1);
    for i in 0..n {
        for j in 0..n {
            let u = region.u[0] + region.width() * (i as f64 + 0.5) / n as f64;
            let v = region.v[0] + region.height() * (j as f64 + 0.5) / n as f64;
            if let Ok((o, d)) = refine_cycle(s, [u, v], f, opts) {
                if let Ok(c) = cycle_from_base(s, o, d, f, opts) {
                    return Some(c);
                }
            }
        }
    }
    None
}

/// Refine a cycle from a single seed point.
pub fn cycle_through(s: &Surface, seed: [f64; 2], f: Foliation, opts: &CycleOptions) -> Result<CycleRecord, FoliationError> {
    let (o, d) = refine_cycle(s, seed, f, opts)?;
    cycle_from_base(s, o, d, f, opts)
}

/// Distance, along the section through `c`'s base point, at which the line
/// through `x` crosses it.
pub fn cycle_separation(s: &Surface, c: &CycleRecord, x: [f64; 2], opts: &CycleOptions) -> Result<f64, FoliationError> {
    let sec = Section::new(s, c.base_point, c.curve.foliation, Some(c.direction()))?;
    let phi = sec.phi(s, x)?;
    if phi.abs() < 1e-14 {
        return Ok(sec.coord(s, x)?.abs());
    }
    let r = first_return(s, &sec, x, c.curve.foliation, &CycleOptions { max_len: 2.0 * c.length + 1.0, ..opts.clone() }, false, true)?;
    Ok(r.coord.abs())
}

/// Loop integrals along an already closed curve, by re-integration from
/// its first point.
pub fn hyperbolicity_integrals(s: &Surface, c: &CycleRecord, opts: &CycleOptions) -> Result<(f64, f64, f64), FoliationError> {
    let sec = Section::new(s, c.base_point, c.curve.foliation, Some(c.direction()))?;
    let r = first_return(s, &sec, c.base_point, c.curve.foliation, opts, false, false)?;
    Ok((r.state[4], r.state[2], r.state[3]))
}
