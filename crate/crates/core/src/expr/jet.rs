//! Truncated bivariate Taylor series ("jets") up to total order four.
//!
//! Coefficients are stored as normalized Taylor coefficients `c[i][j]` of
//! `x^i y^j`, packed by total degree. Partial derivatives are recovered as
//! `c[i][j] * i! * j!`.

use std::ops::{Add, Mul, Neg, Sub};

use super::ExprError;

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 4;
const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;
const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[inline]
fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Which jet variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    order: u8,
    c: [f64; LEN],
}

impl Jet {
    pub fn constant(order: usize, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; LEN];
        c[0] = value;
        Jet { order: order as u8, c }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(order, 0.0)
    }

    /// The jet of the coordinate function `x` (or `y`) centred at `at`.
    pub fn variable(order: usize, at: f64, var: Var) -> Self {
        let mut j = Self::constant(order, at);
        if order >= 1 {
            match var {
                Var::U => j.c[idx(1, 0)] = 1.0,
                Var::V => j.c[idx(0, 1)] = 1.0,
            }
        }
        j
    }

    /// Build a jet from normalized Taylor coefficients, `coef(i, j)` being
    /// the coefficient of `x^i y^j`.
    pub fn from_taylor(order: usize, coef: impl Fn(usize, usize) -> f64) -> Self {
        let mut j = Self::zero(order);
        for d in 0..=order {
            for jj in 0..=d {
                j.c[idx(d - jj, jj)] = coef(d - jj, jj);
            }
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Normalized Taylor coefficient of `x^i y^j`; zero beyond the order.
    pub fn taylor(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order() {
            0.0
        } else {
            self.c[idx(i, j)]
        }
    }

    /// Mixed partial derivative `d^(i+j) / du^i dv^j` at the centre.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.taylor(i, j) * FACT[i.min(4)] * FACT[j.min(4)]
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        let mut out = Self::zero(order);
        let n = idx(0, order) + 1;
        out.c[..n].copy_from_slice(&self.c[..n]);
        out
    }

    /// Partial derivative as a jet; the order drops by one.
    pub fn derivative(&self, var: Var) -> Self {
        let n = self.order();
        if n == 0 {
            return Self::zero(0);
        }
        let mut out = Self::zero(n - 1);
        for d in 0..n {
            for j in 0..=d {
                let i = d - j;
                out.c[idx(i, j)] = match var {
                    Var::U => (i + 1) as f64 * self.c[idx(i + 1, j)],
                    Var::V => (j + 1) as f64 * self.c[idx(i, j + 1)],
                };
            }
        }
        out
    }

    pub fn du(&self) -> Self {
        self.derivative(Var::U)
    }

    pub fn dv(&self) -> Self {
        self.derivative(Var::V)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.c.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = *self;
        out.c[0] += s;
        out
    }

    /// Evaluate the truncated polynomial at offset `(x, y)` from the centre.
    pub fn eval_offset(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for d in 0..=self.order() {
            for j in 0..=d {
                let i = d - j;
                s += self.c[idx(i, j)] * x.powi(i as i32) * y.powi(j as i32);
            }
        }
        s
    }

    /// `f(self)` given `f^(k)(self.value())` for `k = 0..=order`.
    pub fn compose_univariate(&self, derivs: &[f64; MAX_ORDER + 1]) -> Self {
        let n = self.order();
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(n, derivs[0]);
        let mut pow = Self::constant(n, 1.0);
        for (k, dk) in derivs.iter().enumerate().take(n + 1).skip(1) {
            pow = pow * delta;
            out = out + pow.scale(dk / FACT[k]);
        }
        out
    }

    /// Substitute the offsets `x = a - a(0)`, `y = b - b(0)` into this
    /// polynomial; the result is centred where `a` and `b` are.
    pub fn compose(&self, a: &Jet, b: &Jet) -> Self {
        let n = self.order().min(a.order()).min(b.order());
        let (mut a, mut b) = (*a, *b);
        a.c[0] = 0.0;
        b.c[0] = 0.0;
        let mut apow = vec![Self::constant(n, 1.0)];
        let mut bpow = vec![Self::constant(n, 1.0)];
        for k in 1..=n {
            apow.push(apow[k - 1] * a);
            bpow.push(bpow[k - 1] * b);
        }
        let mut out = Self::zero(n);
        for d in 0..=n {
            for j in 0..=d {
                let i = d - j;
                let cij = self.c[idx(i, j)];
                if cij != 0.0 {
                    out = out + (apow[i] * bpow[j]).scale(cij);
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Self, ExprError> {
        let x = self.value();
        if x == 0.0 || !x.is_finite() {
            return Err(ExprError::Domain(format!("division by a quantity vanishing at the point ({x})")));
        }
        let r = 1.0 / x;
        Ok(self.compose_univariate(&[r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4), 24.0 * r.powi(5)]))
    }

    pub fn div(&self, other: &Jet) -> Result<Self, ExprError> {
        Ok(*self * other.recip()?)
    }

    pub fn powi(&self, n: i32) -> Result<Self, ExprError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut base = *self;
        let mut acc = Self::constant(self.order(), 1.0);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        Ok(acc)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose_univariate(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose_univariate(&[c, -s, -c, s, c])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose_univariate(&[e; 5])
    }

    pub fn ln(&self) -> Result<Self, ExprError> {
        let x = self.value();
        if !(x > 0.0) {
            return Err(ExprError::Domain(format!("ln of non-positive value {x}")));
        }
        let r = 1.0 / x;
        Ok(self.compose_univariate(&[x.ln(), r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4)]))
    }

    pub fn sqrt(&self) -> Result<Self, ExprError> {
        let x = self.value();
        if !(x > 0.0) {
            return Err(ExprError::Domain(format!("sqrt of non-positive value {x}")));
        }
        let s = x.sqrt();
        let r = 1.0 / x;
        Ok(self.compose_univariate(&[
            s,
            0.5 * s * r,
            -0.25 * s * r * r,
            0.375 * s * r.powi(3),
            -0.9375 * s * r.powi(4),
        ]))
    }

    pub fn atan(&self) -> Self {
        let x = self.value();
        let q = 1.0 / (1.0 + x * x);
        self.compose_univariate(&[
            x.atan(),
            q,
            -2.0 * x * q * q,
            (6.0 * x * x - 2.0) * q.powi(3),
            24.0 * x * (1.0 - x * x) * q.powi(4),
        ])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let n = self.order().min(rhs.order());
        let mut out = Jet::zero(n);
        for k in 0..=idx(0, n) {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.order().min(rhs.order());
        let mut out = Jet::zero(n);
        for d1 in 0..=n {
            for j1 in 0..=d1 {
                let a = self.c[idx(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=(n - d1) {
                    for j2 in 0..=d2 {
                        out.c[idx(d1 - j1 + d2 - j2, j1 + j2)] += a * rhs.c[idx(d2 - j2, j2)];
                    }
                }
            }
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(order: usize) -> Jet {
        // 1 + 2x - y + 3xy + x^2 y
        Jet::from_taylor(order, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 0) => 2.0,
            (0, 1) => -1.0,
            (1, 1) => 3.0,
            (2, 1) => 1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn partials_from_taylor() {
        let p = poly(4);
        assert_eq!(p.partial(2, 1), 2.0);
        assert_eq!(p.partial(1, 1), 3.0);
        assert_eq!(p.partial(3, 0), 0.0);
    }

    #[test]
    fn derivative_lowers_order() {
        let p = poly(3);
        let d = p.du();
        assert_eq!(d.order(), 2);
        assert_eq!(d.value(), 2.0);
        assert_eq!(d.partial(0, 1), 3.0);
        assert_eq!(d.partial(1, 1), 2.0);
    }

    #[test]
    fn product_truncates_to_smaller_order() {
        let x = Jet::variable(4, 0.0, Var::U);
        let y = Jet::variable(2, 0.0, Var::V);
        let p = x * x * y;
        assert_eq!(p.order(), 2);
        assert_eq!(p.taylor(2, 1), 0.0);
    }

    #[test]
    fn recip_of_vanishing_is_domain_error() {
        let x = Jet::variable(3, 0.0, Var::U);
        assert!(matches!(x.recip(), Err(ExprError::Domain(_))));
    }

    #[test]
    fn exp_ln_roundtrip() {
        let x = Jet::variable(4, 0.3, Var::U) + Jet::variable(4, 0.0, Var::V).scale(0.5);
        let r = x.exp().ln().unwrap();
        for d in 0..=4 {
            for j in 0..=d {
                assert!((r.taylor(d - j, j) - x.taylor(d - j, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn compose_matches_direct_substitution() {
        // p(a, b) with a = x + y, b = x - y against evaluating at an offset
        let p = poly(4);
        let x = Jet::variable(4, 0.0, Var::U);
        let y = Jet::variable(4, 0.0, Var::V);
        let q = p.compose(&(x + y), &(x - y));
        let (s, t) = (0.013, -0.021);
        let direct = p.eval_offset(s + t, s - t);
        assert!((q.eval_offset(s, t) - direct).abs() < 1e-15);
    }
}
