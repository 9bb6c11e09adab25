//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e}) within {intervals} intervals")]
    NoConvergence {
        tolerance: f64,
        estimate: f64,
        intervals: usize,
    },
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self { abs, ..Self::default() }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite(x))
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// `∫_a^b f(x) dx` over a finite interval.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadratureError> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let mut segments = vec![gk15(&mut f, a, b)?];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(value);
        }
        if segments.len() >= tol.max_intervals {
            return Err(QuadratureError::NoConvergence {
                tolerance: target,
                estimate: error,
                intervals: segments.len(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(QuadratureError::NoConvergence {
                tolerance: target,
                estimate: error,
                intervals: segments.len() + 1,
            });
        }
        segments.push(gk15(&mut f, s.a, mid)?);
        segments.push(gk15(&mut f, mid, s.b)?);
    }
}

/// `∫_0^∞ f(x) dx` through `x = tan θ`.
pub fn integrate_half_line(mut f: impl FnMut(f64) -> f64, tol: Tolerance) -> Result<f64, QuadratureError> {
    integrate(
        |theta| {
            let c = theta.cos();
            if c <= 0.0 {
                return 0.0;
            }
            let x = theta.tan();
            let y = f(x) / (c * c);
            if y.is_finite() {
                y
            } else {
                0.0
            }
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        tol,
    )
}

/// `∫_{-∞}^{∞} f(x) dx`.
pub fn integrate_line(mut f: impl FnMut(f64) -> f64, tol: Tolerance) -> Result<f64, QuadratureError> {
    let half = Tolerance { abs: tol.abs / 2.0, ..tol };
    Ok(integrate_half_line(&mut f, half)? + integrate_half_line(|x| f(-x), half)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, 64.0 / 6.0 - 4.0, epsilon = 1e-13);
    }

    #[test]
    fn lorentzian_on_the_line() {
        let v = integrate_line(|x| 1.0 / (1.0 + x * x), Tolerance::abs(1e-11)).unwrap();
        assert_relative_eq!(v, PI, epsilon = 1e-10);
    }

    #[test]
    fn reversed_bounds() {
        let v = integrate(|x| x * x, 1.0, -2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, -3.0, epsilon = 1e-13);
    }

    #[test]
    fn kink_is_resolved() {
        let v = integrate(|x: f64| (x - 0.3).abs(), -1.0, 1.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, 0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7, epsilon = 1e-9);
    }

    #[test]
    fn reports_failure() {
        let tight = Tolerance { abs: 1e-30, rel: 0.0, max_intervals: 4 };
        assert!(matches!(
            integrate(|x: f64| x.sqrt(), 0.0, 1.0, tight),
            Err(QuadratureError::NoConvergence { .. })
        ));
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, Tolerance::default()),
            Err(QuadratureError::NonFinite(_))
        ));
    }
}
