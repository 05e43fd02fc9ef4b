//! Dormand-Prince 5(4) for small autonomous systems with fixed dimension.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError<E> {
    #[error("step size underflow (h = {0:e})")]
    Underflow(f64),
    #[error(transparent)]
    Field(E),
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between fifth and embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One explicit step; returns the fifth-order solution and the local error
/// vector.
pub fn dopri_step<const N: usize, E>(
    f: &mut impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
    y: &[f64; N],
    h: f64,
) -> Result<([f64; N], [f64; N]), E> {
    let k1 = f(y)?;
    let k2 = f(&comb(y, h, &[(A21, &k1)]))?;
    let k3 = f(&comb(y, h, &[(A31, &k1), (A32, &k2)]))?;
    let k4 = f(&comb(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&comb(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&comb(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y5 = comb(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y5)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok((y5, err))
}

/// Adaptive step-size controller.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Only the first `control` components enter the error norm.
    pub control: usize,
}

impl Adaptive {
    pub fn new(h: f64, tol: f64, h_max: f64) -> Self {
        Adaptive { h, rtol: tol, atol: tol, h_min: 1e-14, h_max, control: usize::MAX }
    }

    /// Take one accepted step, shrinking on rejection. Returns the new state
    /// and the step actually used. Field errors (e.g. leaving the domain of
    /// the expression) halve the step until `h_min` is reached.
    pub fn advance<const N: usize, E>(
        &mut self,
        f: &mut impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
        y: &[f64; N],
    ) -> Result<([f64; N], f64), StepError<E>> {
        loop {
            let h = self.h.min(self.h_max);
            if h.abs() < self.h_min {
                return Err(StepError::Underflow(h));
            }
            match dopri_step(f, y, h) {
                Ok((yn, err)) => {
                    let mut en: f64 = 0.0;
                    for i in 0..N.min(self.control) {
                        let sc = self.atol + self.rtol * y[i].abs().max(yn[i].abs());
                        en = en.max((err[i] / sc).abs());
                    }
                    if !en.is_finite() {
                        self.h = h * 0.25;
                        continue;
                    }
                    let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                    if en <= 1.0 {
                        self.h = h * fac;
                        return Ok((yn, h));
                    }
                    self.h = h * fac.min(0.9);
                }
                Err(e) => {
                    let next = h * 0.5;
                    if next.abs() < self.h_min {
                        return Err(StepError::Field(e));
                    }
                    self.h = next;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn harmonic_oscillator_period() {
        let mut f = |y: &[f64; 2]| -> Result<[f64; 2], Infallible> { Ok([y[1], -y[0]]) };
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let mut ctl = Adaptive::new(0.1, 1e-11, 0.5);
        let period = 2.0 * std::f64::consts::PI;
        while t < period {
            ctl.h_max = (period - t).max(1e-12);
            let (yn, h) = ctl.advance(&mut f, &y).unwrap();
            y = yn;
            t += h;
        }
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence() {
        let mut f = |y: &[f64; 1]| -> Result<[f64; 1], Infallible> { Ok([y[0]]) };
        let run = |h: f64, f: &mut dyn FnMut(&[f64; 1]) -> Result<[f64; 1], Infallible>| {
            let mut y = [1.0];
            let n = (1.0 / h).round() as usize;
            let mut g = |y: &[f64; 1]| f(y);
            for _ in 0..n {
                y = dopri_step(&mut g, &y, h).unwrap().0;
            }
            (y[0] - 1f64.exp()).abs()
        };
        let e1 = run(0.1, &mut f);
        let e2 = run(0.05, &mut f);
        let rate = (e1 / e2).log2();
        assert!(rate > 4.7 && rate < 5.5, "rate {rate}");
    }
}
