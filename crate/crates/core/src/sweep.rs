//! One-parameter families: continuation of umbilic branches in `(u, v,
//! lambda)`, localization of codimension-one events and detection of
//! principal cycles born from separatrix loops.

use log::debug;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foliation::{cycle_through, CycleOptions, CycleRecord, FoliationError};
use crate::geometry::{Domain, Foliation, GeomError, Surface};
use crate::lift::{trace_separatrices, TraceOptions};
use crate::umbilic::{
    analyze_umbilic, bif_functional_d123, classify, find_umbilics, monge_normal_form, refine_umbilic, UmbilicClass,
    UmbilicError, CLASSIFY_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Umbilic(#[from] UmbilicError),
    #[error("seed ({u}, {v}) is not an umbilic at lambda = {lambda}")]
    NotUmbilicSeed { lambda: f64, u: f64, v: f64 },
}

/// Tolerance on `|lambda - lambda*|` when localizing events.
pub const EVENT_TOL: f64 = 1e-8;
/// Events closer than this to either end of the range are not classified.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BranchSample {
    pub lambda: f64,
    pub position: [f64; 2],
    pub class: UmbilicClass,
    pub b12: f64,
    pub delta: f64,
    /// `a - 2b` of the normal form; vanishes on the tangency stratum.
    pub a_minus_2b: f64,
    /// `d lambda / ds` of the unit branch tangent.
    pub dlambda_ds: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct UmbilicBranch {
    pub samples: Vec<BranchSample>,
    /// Parameter values at which the branch turns back in `lambda`.
    pub fold_points: Vec<f64>,
    /// Set when the corrector failed before the branch left the range.
    pub lost: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type")]
pub enum EventKind {
    D12Transition { from: UmbilicClass, to: UmbilicClass },
    D123Fold { branches_merged: usize },
    CycleBirth { foliation: Foliation, side: Side },
    BoundaryTruncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Witness {
    /// Functional values on either side of the event.
    pub bracket: Option<[f64; 2]>,
    /// Derivative of the functional with respect to lambda at the event.
    pub dfunctional: Option<f64>,
    /// Umbilic counts in a neighbourhood, below and above the event.
    pub counts: Option<[usize; 2]>,
    /// Labels of the two branch ends meeting at a fold.
    pub fold_labels: Option<[UmbilicClass; 2]>,
    /// Second derivative of lambda along the branch at a fold.
    pub d2lambda_ds2: Option<f64>,
    /// Class found when re-classifying at the event.
    pub verified_class: Option<UmbilicClass>,
    /// Set on the tangency stratum `a = 2b`.
    pub tangent_stratum: bool,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub lambda_star: f64,
    pub location: [f64; 2],
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ContinuationOptions {
    pub ds: f64,
    pub max_steps: usize,
    /// Step used for the finite difference in lambda.
    pub dlambda: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { ds: 0.01, max_steps: 5000, dlambda: 1e-6 }
    }
}

type P3 = [f64; 3];

/// `(M, N)` and its 2x3 Jacobian in `(u, v, lambda)`.
fn system(family: &Surface, x: &P3, dl: f64) -> Result<([f64; 2], [[f64; 3]; 2]), GeomError> {
    let s = family.with_lambda(x[2]);
    let j = s.form_jets(x[0], x[1], 1)?;
    let f = [j.M.value(), j.N.value()];
    let mut jac = [[j.M.partial(1, 0), j.M.partial(0, 1), 0.0], [j.N.partial(1, 0), j.N.partial(0, 1), 0.0]];
    if family.depends_on_lambda() {
        let jp = family.with_lambda(x[2] + dl).form_jets(x[0], x[1], 0)?;
        let jm = family.with_lambda(x[2] - dl).form_jets(x[0], x[1], 0)?;
        jac[0][2] = (jp.M.value() - jm.M.value()) / (2.0 * dl);
        jac[1][2] = (jp.N.value() - jm.N.value()) / (2.0 * dl);
    }
    Ok((f, jac))
}

fn cross(a: &P3, b: &P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit_tangent(jac: &[[f64; 3]; 2], prev: Option<&P3>) -> Option<P3> {
    let t = cross(&jac[0], &jac[1]);
    let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    let mut t = t.map(|x| x / n);
    let flip = match prev {
        Some(p) => t[0] * p[0] + t[1] * p[1] + t[2] * p[2] < 0.0,
        None => t[2] < 0.0,
    };
    if flip {
        t = t.map(|x| -x);
    }
    Some(t)
}

fn solve3(a: [[f64; 3]; 3], b: P3) -> Option<P3> {
    let m = nalgebra::Matrix3::from_fn(|i, k| a[i][k]);
    let x = m.lu().solve(&nalgebra::Vector3::new(b[0], b[1], b[2]))?;
    Some([x[0], x[1], x[2]])
}

/// Newton corrector on `F = 0` and `t . (x - xp) = 0`.
fn correct(family: &Surface, xp: P3, t: &P3, dl: f64) -> Option<P3> {
    let mut x = xp;
    for _ in 0..30 {
        let (f, j) = system(family, &x, dl).ok()?;
        let g = t[0] * (x[0] - xp[0]) + t[1] * (x[1] - xp[1]) + t[2] * (x[2] - xp[2]);
        let a = [j[0], j[1], *t];
        let dx = solve3(a, [-f[0], -f[1], -g])?;
        for k in 0..3 {
            x[k] += dx[k];
        }
        let step = dx[0].abs() + dx[1].abs() + dx[2].abs();
        if step < 1e-14 * (1.0 + x[0].abs() + x[1].abs() + x[2].abs()) {
            let (f, _) = system(family, &x, dl).ok()?;
            return (f[0].abs() + f[1].abs() < 1e-10).then_some(x);
        }
    }
    let (f, _) = system(family, &x, dl).ok()?;
    (f[0].abs() + f[1].abs() < 1e-10).then_some(x)
}

/// Newton at fixed lambda.
fn correct_at_lambda(family: &Surface, guess: [f64; 2], lambda: f64) -> Option<[f64; 2]> {
    refine_umbilic(&family.with_lambda(lambda), guess[0], guess[1]).ok()
}

fn sample_at(family: &Surface, x: &P3, tangent: &P3, s: f64) -> BranchSample {
    let surf = family.with_lambda(x[2]);
    let (class, b12, delta, am2b) = match monge_normal_form(&surf, x[0], x[1]) {
        Ok(j) => (classify(&j, CLASSIFY_TOL).class, j.d12_functional(), j.delta(), j.a - 2.0 * j.b),
        Err(_) => (UmbilicClass::Degenerate, f64::NAN, f64::NAN, f64::NAN),
    };
    BranchSample { lambda: x[2], position: [x[0], x[1]], class, b12, delta, a_minus_2b: am2b, dlambda_ds: tangent[2], s }
}

/// Follow the umbilic through `seed = (lambda, u, v)` across `range` by
/// pseudo-arclength continuation, in both directions from the seed.
pub fn continue_branch(
    family: &Surface,
    seed: [f64; 3],
    range: [f64; 2],
    opts: &ContinuationOptions,
) -> Result<UmbilicBranch, SweepError> {
    let [l0, u0, v0] = seed;
    let p = refine_umbilic(&family.with_lambda(l0), u0, v0)
        .map_err(|_| SweepError::NotUmbilicSeed { lambda: l0, u: u0, v: v0 })?;
    let x0 = [p[0], p[1], l0];
    let (_, j0) = system(family, &x0, opts.dlambda)?;
    let Some(t0) = unit_tangent(&j0, None) else {
        return Err(SweepError::NotUmbilicSeed { lambda: l0, u: u0, v: v0 });
    };
    let mut lost = false;
    let mut halves = Vec::new();
    for dir in [1.0, -1.0] {
        let t = t0.map(|x| x * dir);
        let (pts, l) = march(family, x0, t, range, opts);
        lost |= l;
        halves.push(pts);
    }
    let mut back = halves.pop().unwrap();
    let fwd = halves.pop().unwrap();
    back.reverse();
    back.pop();
    let mut pts: Vec<(P3, P3)> = back.into_iter().map(|(x, t)| (x, t.map(|c| -c))).collect();
    pts.extend(fwd);
    // orient so that lambda increases at the first sample
    if pts.len() >= 2 && pts[1].0[2] < pts[0].0[2] {
        pts.reverse();
        for p in pts.iter_mut() {
            p.1 = p.1.map(|c| -c);
        }
    }
    let mut s = 0.0;
    let mut samples = Vec::with_capacity(pts.len());
    for (i, (x, t)) in pts.iter().enumerate() {
        if i > 0 {
            let y = pts[i - 1].0;
            s += ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        }
        samples.push(sample_at(family, x, t, s));
    }
    let mut fold_points = Vec::new();
    for w in samples.windows(2) {
        if w[0].dlambda_ds * w[1].dlambda_ds < 0.0 {
            fold_points.push(0.5 * (w[0].lambda + w[1].lambda));
        }
    }
    Ok(UmbilicBranch { samples, fold_points, lost })
}

fn march(family: &Surface, x0: P3, t0: P3, range: [f64; 2], opts: &ContinuationOptions) -> (Vec<(P3, P3)>, bool) {
    let mut out = vec![(x0, t0)];
    let (mut x, mut t) = (x0, t0);
    let mut h = opts.ds;
    let dom = family.domain;
    for _ in 0..opts.max_steps {
        let xp = [x[0] + h * t[0], x[1] + h * t[1], x[2] + h * t[2]];
        let Some(mut xn) = correct(family, xp, &t, opts.dlambda) else {
            h *= 0.5;
            if h < opts.ds * 1e-4 {
                return (out, true);
            }
            continue;
        };
        let Ok((_, jn)) = system(family, &xn, opts.dlambda) else { return (out, true) };
        let Some(mut tn) = unit_tangent(&jn, Some(&t)) else { return (out, true) };
        // clip to the range end with a fixed-lambda solve
        let end = if xn[2] > range[1] {
            Some(range[1])
        } else if xn[2] < range[0] {
            Some(range[0])
        } else {
            None
        };
        if let Some(le) = end {
            let f = (le - x[2]) / (xn[2] - x[2]);
            let guess = [x[0] + f * (xn[0] - x[0]), x[1] + f * (xn[1] - x[1])];
            if let Some(p) = correct_at_lambda(family, guess, le) {
                xn = [p[0], p[1], le];
                if let Ok((_, j)) = system(family, &xn, opts.dlambda) {
                    tn = unit_tangent(&j, Some(&t)).unwrap_or(tn);
                }
                out.push((xn, tn));
            }
            return (out, false);
        }
        if !dom.contains(xn[0], xn[1]) {
            return (out, false);
        }
        out.push((xn, tn));
        // back at the seed: the branch is closed
        if out.len() > 3 && (xn[0] - x0[0]).abs() + (xn[1] - x0[1]).abs() + (xn[2] - x0[2]).abs() < 0.5 * opts.ds {
            return (out, false);
        }
        x = xn;
        t = tn;
        h = (h * 1.5).min(opts.ds);
    }
    (out, false)
}

fn d12_at(family: &Surface, lambda: f64, guess: [f64; 2]) -> Option<([f64; 2], f64, f64)> {
    let p = correct_at_lambda(family, guess, lambda)?;
    let j = monge_normal_form(&family.with_lambda(lambda), p[0], p[1]).ok()?;
    Some((p, j.d12_functional(), j.a - 2.0 * j.b))
}

/// Bisect a sign change of `g(lambda)` along a branch piece without folds.
fn bisect_lambda(
    family: &Surface,
    a: &BranchSample,
    b: &BranchSample,
    pick: impl Fn(f64, f64) -> f64,
) -> Option<(f64, [f64; 2])> {
    let (mut la, mut lb) = (a.lambda, b.lambda);
    let (mut pa, mut pb) = (a.position, b.position);
    let ga = pick(a.b12, a.a_minus_2b);
    for _ in 0..200 {
        if (lb - la).abs() < EVENT_TOL * 0.1 {
            break;
        }
        let lm = 0.5 * (la + lb);
        let guess = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let (pm, b12, am) = d12_at(family, lm, guess)?;
        let gm = pick(b12, am);
        if (gm < 0.0) == (ga < 0.0) {
            la = lm;
            pa = pm;
        } else {
            lb = lm;
            pb = pm;
        }
    }
    let lm = 0.5 * (la + lb);
    let p = correct_at_lambda(family, [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])], lm)?;
    Some((lm, p))
}

fn near_boundary(l: f64, range: [f64; 2]) -> bool {
    (l - range[0]).abs() < BOUNDARY_MARGIN || (l - range[1]).abs() < BOUNDARY_MARGIN
}

/// Localize the events along a branch.
pub fn detect_events(branch: &UmbilicBranch, family: &Surface, range: [f64; 2]) -> Vec<BifurcationEvent> {
    let mut out = Vec::new();
    let smp = &branch.samples;
    for i in 1..smp.len() {
        let (a, b) = (&smp[i - 1], &smp[i]);
        let fold_between = a.dlambda_ds * b.dlambda_ds < 0.0;
        if fold_between {
            out.push(fold_event(branch, family, i, range));
            continue;
        }
        // collision of p = 0 with another root: the tangency stratum, where
        // the functional is not a transversal witness
        if a.a_minus_2b.is_finite() && b.a_minus_2b.is_finite() && a.a_minus_2b * b.a_minus_2b < 0.0 {
            out.push(d12_event(family, a, b, range, true));
        } else if a.b12.is_finite() && b.b12.is_finite() && a.b12 * b.b12 < 0.0 {
            out.push(d12_event(family, a, b, range, false));
        }
    }
    out.sort_by(|x, y| x.lambda_star.total_cmp(&y.lambda_star));
    out
}

fn d12_event(family: &Surface, a: &BranchSample, b: &BranchSample, range: [f64; 2], tangent: bool) -> BifurcationEvent {
    let pick = move |b12: f64, am: f64| if tangent { am } else { b12 };
    let Some((ls, p)) = bisect_lambda(family, a, b, pick) else {
        return BifurcationEvent {
            kind: EventKind::D12Transition { from: a.class, to: b.class },
            lambda_star: 0.5 * (a.lambda + b.lambda),
            location: a.position,
            witness: Witness { flagged: true, tangent_stratum: tangent, ..Default::default() },
        };
    };
    if near_boundary(ls, range) {
        return BifurcationEvent { kind: EventKind::BoundaryTruncated, lambda_star: ls, location: p, witness: Witness::default() };
    }
    let h = 1e-4 * (1.0 + ls.abs());
    let side = |l: f64| d12_at(family, l, p);
    let (below, above) = (side(ls - h), side(ls + h));
    let mut w = Witness { tangent_stratum: tangent, ..Default::default() };
    if let (Some(bl), Some(ab)) = (below, above) {
        let (gl, ga) = (pick(bl.1, bl.2), pick(ab.1, ab.2));
        w.bracket = Some([gl, ga]);
        w.dfunctional = Some((ga - gl) / (2.0 * h));
    }
    let verify = monge_normal_form(&family.with_lambda(ls), p[0], p[1]).map(|j| classify(&j, 1e-6).class);
    w.verified_class = verify.ok();
    let expected = if tangent { UmbilicClass::D12Case2 } else { UmbilicClass::D12Case1 };
    w.flagged = w.verified_class != Some(expected);
    let label = |l: f64| {
        correct_at_lambda(family, p, l)
            .and_then(|q| analyze_umbilic(&family.with_lambda(l), q, CLASSIFY_TOL).ok())
            .map(|r| r.classification.class)
            .unwrap_or(UmbilicClass::Degenerate)
    };
    let (from, to) = (label(ls - 10.0 * h), label(ls + 10.0 * h));
    BifurcationEvent { kind: EventKind::D12Transition { from, to }, lambda_star: ls, location: p, witness: w }
}

/// Refine the turning point of lambda along the branch between samples
/// `i - 1` and `i`.
fn fold_event(branch: &UmbilicBranch, family: &Surface, i: usize, range: [f64; 2]) -> BifurcationEvent {
    let smp = &branch.samples;
    let (a, b) = (&smp[i - 1], &smp[i]);
    let dl = 1e-6;
    // extended system: M = N = 0 and det d(M, N)/d(u, v) = 0
    let g = |x: &P3| -> Option<P3> {
        let (f, j) = system(family, x, dl).ok()?;
        Some([f[0], f[1], j[0][0] * j[1][1] - j[0][1] * j[1][0]])
    };
    let mut x = [0.5 * (a.position[0] + b.position[0]), 0.5 * (a.position[1] + b.position[1]), 0.5 * (a.lambda + b.lambda)];
    let mut ok = false;
    for _ in 0..50 {
        let Some(f) = g(&x) else { break };
        let h = 1e-7;
        let mut jac = [[0.0; 3]; 3];
        let mut bad = false;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (Some(fp), Some(fm)) = (g(&xp), g(&xm)) else {
                bad = true;
                break;
            };
            for r in 0..3 {
                jac[r][k] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        if bad {
            break;
        }
        let Some(dx) = solve3(jac, [-f[0], -f[1], -f[2]]) else { break };
        for k in 0..3 {
            x[k] += dx[k];
        }
        if dx.iter().map(|d| d.abs()).sum::<f64>() < 1e-13 {
            ok = true;
            break;
        }
    }
    let loc = [x[0], x[1]];
    let ls = x[2];
    if near_boundary(ls, range) {
        return BifurcationEvent { kind: EventKind::BoundaryTruncated, lambda_star: ls, location: loc, witness: Witness::default() };
    }
    let mut w = Witness { flagged: !ok, ..Default::default() };
    // curvature of lambda(s) from the samples around the fold
    let lo = i.saturating_sub(2);
    let hi = (i + 1).min(smp.len() - 1);
    if hi > lo + 1 {
        let ds = smp[hi].s - smp[lo].s;
        w.d2lambda_ds2 = Some((smp[hi].dlambda_ds - smp[lo].dlambda_ds) / ds);
    }
    // nearest Darbouxian label on each side of the fold
    let is_d23 = |c: &UmbilicClass| matches!(c, UmbilicClass::D2 | UmbilicClass::D3);
    let before = smp[i.saturating_sub(10)..i].iter().rev().map(|s| s.class).find(is_d23);
    let after = smp[i..(i + 10).min(smp.len())].iter().map(|s| s.class).find(is_d23);
    w.fold_labels = Some([before.unwrap_or(UmbilicClass::Degenerate), after.unwrap_or(UmbilicClass::Degenerate)]);
    // umbilic counts in a fixed window on both sides, and the functional
    let r = 0.5 * smp.iter().map(|s| (s.position[0] - loc[0]).hypot(s.position[1] - loc[1])).fold(f64::INFINITY, f64::min).max(0.05);
    let window = Domain::new(loc[0] - r, loc[0] + r, loc[1] - r, loc[1] + r);
    let off = 1e-4 * (1.0 + ls.abs());
    let count = |l: f64| {
        let mut s = family.with_lambda(l);
        s.domain = window;
        find_umbilics(&s, 40).map(|v| v.len()).unwrap_or(usize::MAX)
    };
    w.counts = Some([count(ls - off), count(ls + off)]);
    let fb = |l: f64| bif_functional_d123(&family.with_lambda(l), loc[0], loc[1]).ok();
    if let (Some(bl), Some(ba)) = (fb(ls - off), fb(ls + off)) {
        w.bracket = Some([bl, ba]);
        w.dfunctional = Some((ba - bl) / (2.0 * off));
    }
    w.verified_class = monge_normal_form(&family.with_lambda(ls), loc[0], loc[1]).ok().map(|j| classify(&j, 1e-6).class);
    BifurcationEvent { kind: EventKind::D123Fold { branches_merged: 2 }, lambda_star: ls, location: loc, witness: w }
}

/// One probe of a cycle-birth search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleProbe {
    pub lambda: f64,
    pub side: Side,
    pub cycles: Vec<CycleRecord>,
    /// Hausdorff distance (chart units) between the found cycle and the loop.
    pub loop_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleBirth {
    /// Loop separatrix at the event, if one was certified.
    pub loop_points: Option<Vec<[f64; 2]>>,
    pub foliation: Option<Foliation>,
    pub probes: Vec<CycleProbe>,
    pub event: Option<BifurcationEvent>,
    /// Set when cycles were found on both sides, or not at all although a
    /// loop was certified.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CycleBirthOptions {
    pub trace: TraceOptions,
    pub cycle: CycleOptions,
    /// Seeds placed along the loop.
    pub seeds: usize,
}

impl Default for CycleBirthOptions {
    fn default() -> Self {
        CycleBirthOptions {
            trace: TraceOptions { max_len: 8.0, step: 0.02, stop_radius: 1e-9, ..TraceOptions::default() },
            cycle: CycleOptions::default(),
            seeds: 3,
        }
    }
}

/// Hausdorff distance between two polylines, sampled at their vertices.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let one = |x: &[[f64; 2]], y: &[[f64; 2]]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Look for principal cycles born from a separatrix loop at `event`, on
/// both sides of it at the given offsets.
pub fn detect_cycle_birth(
    family: &Surface,
    event: &BifurcationEvent,
    probe_offsets: &[f64],
    opts: &CycleBirthOptions,
) -> Result<CycleBirth, SweepError> {
    let ls = event.lambda_star;
    let at = family.with_lambda(ls);
    let p = event.location;
    let seps = trace_separatrices(&at, p[0], p[1], &opts.trace).map_err(|e| match e {
        crate::lift::LiftError::Geom(g) => SweepError::Geom(g),
        crate::lift::LiftError::NoSingularities { u, v } => SweepError::NotUmbilicSeed { lambda: ls, u, v },
    })?;
    // at a numerically located event the saddle-node may already have split,
    // so the re-entry itself is the certificate, whatever the role
    let Some(lp) = seps.iter().find(|s| s.reentered) else {
        debug!("no separatrix loop at lambda = {ls}");
        return Ok(CycleBirth { loop_points: None, foliation: None, probes: Vec::new(), event: None, flagged: false });
    };
    let foliation = lp.curve.foliation;
    let pts = lp.curve.points.clone();
    let total = lp.curve.length();
    let seeds: Vec<[f64; 2]> = (1..=opts.seeds.max(1))
        .map(|k| {
            let target = total * k as f64 / (opts.seeds.max(1) + 1) as f64;
            let i = lp.curve.arclength.iter().position(|&s| s >= target).unwrap_or(pts.len() / 2);
            pts[i]
        })
        .collect();
    let mut probes = Vec::new();
    for &off in probe_offsets {
        for (side, l) in [(Side::Below, ls - off.abs()), (Side::Above, ls + off.abs())] {
            let s = family.with_lambda(l);
            let mut co = opts.cycle.clone();
            co.umbilics = find_umbilics(&s, 40).unwrap_or_default();
            let mut cycles: Vec<CycleRecord> = Vec::new();
            for seed in &seeds {
                match cycle_through(&s, *seed, foliation, &co) {
                    Ok(c) => {
                        let dup = cycles.iter().any(|d| {
                            crate::foliation::cycle_separation(&s, d, c.base_point, &co).map(|x| x < 1e-6).unwrap_or(false)
                        });
                        if !dup {
                            cycles.push(c);
                        }
                    }
                    Err(FoliationError::Geom(e)) => return Err(e.into()),
                    Err(e) => debug!("no cycle from {seed:?} at lambda = {l}: {e}"),
                }
            }
            let loop_distance = cycles.first().map(|c| hausdorff(&c.curve.points, &pts));
            probes.push(CycleProbe { lambda: l, side, cycles, loop_distance });
        }
    }
    let below = probes.iter().any(|p| p.side == Side::Below && !p.cycles.is_empty());
    let above = probes.iter().any(|p| p.side == Side::Above && !p.cycles.is_empty());
    let event = match (below, above) {
        (true, false) | (false, true) => Some(BifurcationEvent {
            kind: EventKind::CycleBirth { foliation, side: if below { Side::Below } else { Side::Above } },
            lambda_star: ls,
            location: p,
            witness: Witness::default(),
        }),
        _ => None,
    };
    let flagged = event.is_none();
    Ok(CycleBirth { loop_points: Some(pts), foliation: Some(foliation), probes, event, flagged })
}
