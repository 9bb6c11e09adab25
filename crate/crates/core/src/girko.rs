//! Solutions of random linear systems `B z = b − X u`.
//!
//! For `(A, b)` drawn from a rotationally invariant ensemble the solution
//! `z` has the universal `m`-dimensional Cauchy density of width
//! `β = √(1 + uᵀu)`. For i.i.d. stable entries (exponents 1 and 2 only)
//! each component follows the ratio law `p(ζ; α, β)` evaluated here by
//! quadrature.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densities::{self, CauchyParams};
use crate::ensembles::{self, with_resampling, EnsembleError, RadialLaw};
use crate::matcore::{self, RealMatrix};
use crate::quadrature::{self, QuadratureError, Tolerance};
use crate::rng::RngStream;
use crate::special::normal_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystemSpec {
    pub m: usize,
    pub n: usize,
    pub u: Vec<f64>,
    pub radial: RadialLaw,
}

impl LinearSystemSpec {
    pub fn new(m: usize, u: Vec<f64>, radial: RadialLaw) -> Self {
        Self { m, n: u.len(), u, radial }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.m == 0 {
            return Err(EnsembleError::InvalidSpec("m must be at least 1".into()));
        }
        if self.u.len() != self.n {
            return Err(EnsembleError::InvalidSpec(format!(
                "u has {} entries but n = {}",
                self.u.len(),
                self.n
            )));
        }
        if self.u.iter().any(|x| !x.is_finite()) {
            return Err(EnsembleError::InvalidSpec("u must be finite".into()));
        }
        self.radial.validate()
    }
}

/// Stable exponents with elementary densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StableExponent {
    /// `α = 1`, Cauchy.
    One,
    /// `α = 2`, Gaussian.
    Two,
}

impl StableExponent {
    pub fn value(self) -> f64 {
        match self {
            StableExponent::One => 1.0,
            StableExponent::Two => 2.0,
        }
    }
}

impl TryFrom<u8> for StableExponent {
    type Error = String;
    fn try_from(a: u8) -> Result<Self, String> {
        match a {
            1 => Ok(StableExponent::One),
            2 => Ok(StableExponent::Two),
            _ => Err(format!("stable exponent must be 1 or 2, got {a}")),
        }
    }
}

impl From<StableExponent> for u8 {
    fn from(a: StableExponent) -> u8 {
        a.value() as u8
    }
}

/// Symmetric stable law with characteristic function `exp(−c|t|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    pub alpha: StableExponent,
    pub c: f64,
}

impl StableLaw {
    /// `c = ½` makes the Gaussian member unit-variance.
    pub const DEFAULT_SCALE: f64 = 0.5;

    pub fn new(alpha: StableExponent) -> Self {
        Self { alpha, c: Self::DEFAULT_SCALE }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.c > 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(EnsembleError::InvalidLaw(format!("stable scale must be positive, got {}", self.c)))
        }
    }

    /// Density `ρ(x; α)`.
    pub fn pdf(&self, x: f64) -> f64 {
        match self.alpha {
            // variance 2c
            StableExponent::Two => (-x * x / (4.0 * self.c)).exp() / (4.0 * PI * self.c).sqrt(),
            StableExponent::One => self.c / (PI * (x * x + self.c * self.c)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.alpha {
            StableExponent::Two => normal_cdf(x / (2.0 * self.c).sqrt()),
            StableExponent::One => densities::cauchy_cdf(x, &CauchyParams::centered(self.c)),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self.alpha {
            StableExponent::Two => {
                let g: f64 = StandardNormal.sample(rng);
                (2.0 * self.c).sqrt() * g
            }
            StableExponent::One => self.c * (PI * (rng.next_open01() - 0.5)).tan(),
        }
    }
}

/// `β = √(1 + uᵀu)`.
pub fn beta_euclidean(u: &[f64]) -> f64 {
    (1.0 + u.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `β = (1 + Σ|u_p|^α)^{1/α}` for `α ∈ (0, 2]`.
pub fn beta_alpha(u: &[f64], alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha <= 2.0, "stable exponent must lie in (0, 2]");
    (1.0 + u.iter().map(|x| x.abs().powf(alpha)).sum::<f64>()).powf(1.0 / alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDraw {
    pub z: Vec<f64>,
    pub resamples: u32,
}

fn solve_system(a: &RealMatrix, b: &[f64], u: &[f64]) -> Result<Vec<f64>, EnsembleError> {
    let m = a.rows();
    let lhs = a.select_columns(&(0..m).collect::<Vec<_>>());
    let rhs = RealMatrix::from_fn(m, 1, |i, _| {
        b[i] - u.iter().enumerate().map(|(p, up)| a[(i, m + p)] * up).sum::<f64>()
    });
    Ok(matcore::solve_multi(&lhs, &rhs)?.into_vec())
}

/// Draws `(A, b)` from the rotationally invariant ensemble and returns the
/// solution of `B z = b − X u`.
pub fn sample_solution(spec: &LinearSystemSpec, rng: &mut RngStream) -> Result<SolutionDraw, EnsembleError> {
    spec.validate()?;
    let (z, resamples) = with_resampling(|| {
        let (a, b) = ensembles::sample_system(spec.m, spec.n, &spec.radial, rng)?;
        solve_system(&a, &b, &spec.u)
    })?;
    Ok(SolutionDraw { z, resamples })
}

/// Same system with i.i.d. stable entries in `A` and `b`.
pub fn sample_stable_system(
    m: usize,
    u: &[f64],
    law: &StableLaw,
    rng: &mut RngStream,
) -> Result<SolutionDraw, EnsembleError> {
    law.validate()?;
    if m == 0 {
        return Err(EnsembleError::InvalidSpec("m must be at least 1".into()));
    }
    let n = u.len();
    let (z, resamples) = with_resampling(|| {
        let a = RealMatrix::from_fn(m, m + n, |_, _| law.sample(rng));
        let b: Vec<f64> = (0..m).map(|_| law.sample(rng)).collect();
        solve_system(&a, &b, u)
    })?;
    Ok(SolutionDraw { z, resamples })
}

/// `ln P(z; u)`: the `m`-dimensional Cauchy law of width `β = √(1 + uᵀu)`.
pub fn girko_logdensity(z: &[f64], u: &[f64]) -> f64 {
    densities::log_mdim_cauchy(z, beta_euclidean(u))
}

/// Density of `z_i / z_j`: `1 / (π (1 + r²))`.
pub fn ratio_logdensity(r: f64) -> f64 {
    -PI.ln() - (1.0 + r * r).ln()
}

fn stable_tolerance() -> Tolerance {
    Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 4000 }
}

/// `∫_0^∞ g(r) dr` through `r = e^t`, split where `ρ(r)` and `ρ(rζ/β)`
/// change scale so the plateaus between them are resolved.
fn radial_integral(g: impl Fn(f64) -> f64, law: &StableLaw, ratio: f64) -> Result<f64, QuadratureError> {
    let width = match law.alpha {
        StableExponent::One => law.c,
        StableExponent::Two => (2.0 * law.c).sqrt(),
    };
    let a = width.ln();
    let b = (width / ratio.abs()).ln();
    let (lo, hi) = (a.min(b), a.max(b));
    let mut knots = vec![lo - 50.0, lo];
    if hi > lo {
        knots.push(hi);
    }
    knots.push(hi + 60.0);
    let tol = stable_tolerance();
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += quadrature::integrate(
            |t| {
                let r = t.exp();
                r * g(r)
            },
            w[0],
            w[1],
            tol,
        )?;
    }
    Ok(total)
}

/// `p(ζ; α, β) = (2/β) ∫_0^∞ r ρ(rζ/β) ρ(r) dr`. Diverges at `ζ = 0` for
/// `α = 1`.
pub fn girko_stable_density(zeta: f64, law: &StableLaw, beta: f64) -> Result<f64, QuadratureError> {
    if zeta == 0.0 {
        return Ok(match law.alpha {
            StableExponent::One => f64::INFINITY,
            StableExponent::Two => 4.0 * law.c * law.pdf(0.0).powi(2) / beta,
        });
    }
    let ratio = zeta / beta;
    radial_integral(|r| r * law.pdf(r * ratio) * law.pdf(r), law, ratio).map(|v| 2.0 / beta * v)
}

/// CDF of `p(·; α, β)`: integrating the density in `ζ` under the `r`
/// integral gives `2 ∫_0^∞ ρ(r; α) F(rζ/β; α) dr`.
pub fn girko_stable_cdf(zeta: f64, law: &StableLaw, beta: f64) -> Result<f64, QuadratureError> {
    if zeta == 0.0 {
        return Ok(0.5);
    }
    if zeta.is_infinite() {
        return Ok(if zeta > 0.0 { 1.0 } else { 0.0 });
    }
    let ratio = zeta / beta;
    radial_integral(|r| law.pdf(r) * law.cdf(r * ratio), law, ratio).map(|v| (2.0 * v).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beta_values() {
        assert_eq!(beta_euclidean(&[]), 1.0);
        assert_relative_eq!(beta_euclidean(&[0.75]), 1.25, epsilon = 1e-15);
        assert_eq!(beta_euclidean(&[1.0, 1.0, 1.0]), 2.0);
        assert_relative_eq!(beta_alpha(&[0.75], 2.0), 1.25, epsilon = 1e-15);
        assert_eq!(beta_alpha(&[1.0, 1.0], 1.0), 3.0);
        for a in [0.3, 1.0, 1.7, 2.0] {
            assert_eq!(beta_alpha(&[0.0, 0.0], a), 1.0);
        }
    }

    #[test]
    fn girko_density_examples() {
        for x in [-4.0, 0.0, 0.3, 12.0] {
            assert_relative_eq!(
                girko_logdensity(&[x], &[]),
                densities::cauchy_logpdf(x, &CauchyParams::standard()),
                epsilon = 1e-14
            );
        }
        let c = 1.0 / (2.0 * PI);
        assert_relative_eq!(
            girko_logdensity(&[0.0, 0.0], &[0.75]),
            (c / (1.25f64 * 1.25)).ln(),
            epsilon = 1e-14
        );
        let (cs, sn) = (0.4f64.cos(), 0.4f64.sin());
        let z = [1.3, -0.4];
        let rz = [cs * z[0] - sn * z[1], sn * z[0] + cs * z[1]];
        assert_relative_eq!(girko_logdensity(&z, &[2.0]), girko_logdensity(&rz, &[2.0]), epsilon = 1e-13);
    }

    #[test]
    fn ratio_density() {
        assert_relative_eq!(ratio_logdensity(0.0), -PI.ln(), epsilon = 1e-15);
        assert_eq!(ratio_logdensity(2.3), ratio_logdensity(-2.3));
    }

    #[test]
    fn gaussian_stable_density_at_origin() {
        let law = StableLaw::new(StableExponent::Two);
        assert_relative_eq!(girko_stable_density(0.0, &law, 1.0).unwrap(), 1.0 / PI, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_stable_density_is_cauchy() {
        let law = StableLaw::new(StableExponent::Two);
        for beta in [0.5, 1.0, 1.25, 3.0] {
            for k in 0..10 {
                let zeta = -6.0 + 1.3 * k as f64;
                let quad = girko_stable_density(zeta, &law, beta).unwrap();
                let exact = densities::cauchy_logpdf(zeta, &CauchyParams::centered(beta)).exp();
                assert!((quad - exact).abs() < 1e-8, "beta {beta} zeta {zeta}: {quad} vs {exact}");
            }
        }
    }

    #[test]
    fn cauchy_stable_density_normalizes() {
        let law = StableLaw::new(StableExponent::One);
        let total = quadrature::integrate_line(
            |z| girko_stable_density(z, &law, 1.0).unwrap(),
            Tolerance { abs: 1e-8, rel: 1e-10, max_intervals: 2000 },
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn cauchy_ratio_matches_closed_form() {
        // The ratio of two independent standard Cauchy variables has density
        // ln(ζ²) / (π² (ζ² − 1)).
        let law = StableLaw { alpha: StableExponent::One, c: 1.0 };
        for zeta in [0.1f64, 0.5, 2.0, 7.0] {
            let exact = (zeta * zeta).ln() / (PI * PI * (zeta * zeta - 1.0));
            assert_relative_eq!(girko_stable_density(zeta, &law, 1.0).unwrap(), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn cdf_is_integral_of_density() {
        for alpha in [StableExponent::One, StableExponent::Two] {
            let law = StableLaw::new(alpha);
            for (zeta, beta) in [(-3.0, 1.0), (0.7, 2.0), (5.0, 1.25)] {
                let direct = 0.5
                    + quadrature::integrate(
                        |t| girko_stable_density(t, &law, beta).unwrap(),
                        0.0,
                        zeta,
                        Tolerance::abs(1e-11),
                    )
                    .unwrap();
                assert_relative_eq!(girko_stable_cdf(zeta, &law, beta).unwrap(), direct, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn stable_sampler_scale() {
        // α = 2, c = ½ gives unit-variance normals; α = 1 gives Cauchy(c).
        let mut rng = RngStream::new(31, 0);
        let g: Vec<f64> = (0..20_000).map(|_| StableLaw::new(StableExponent::Two).sample(&mut rng)).collect();
        assert!(crate::stats::ks_one_sample(&g, normal_cdf).unwrap().p_value > 1e-3);
        let law = StableLaw { alpha: StableExponent::One, c: 2.0 };
        let c: Vec<f64> = (0..20_000).map(|_| law.sample(&mut rng)).collect();
        assert!(crate::stats::ks_one_sample(&c, |x| law.cdf(x)).unwrap().p_value > 1e-3);
    }

    #[test]
    fn solution_solves_system() {
        let spec = LinearSystemSpec::new(3, vec![0.5, -1.0], RadialLaw::UniformBall { radius: 1.0 });
        let mut rng = RngStream::new(32, 0);
        let mut replay = rng.clone();
        let d = sample_solution(&spec, &mut rng).unwrap();
        let (a, b) = ensembles::sample_system(3, 2, &spec.radial, &mut replay).unwrap();
        for i in 0..3 {
            let lhs: f64 = (0..3).map(|j| a[(i, j)] * d.z[j]).sum();
            let rhs = b[i] - a[(i, 3)] * 0.5 + a[(i, 4)];
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = LinearSystemSpec::new(2, vec![1.0], RadialLaw::Gaussian);
        spec.n = 2;
        assert!(matches!(spec.validate(), Err(EnsembleError::InvalidSpec(_))));
        assert!(StableExponent::try_from(3).is_err());
        let bad = StableLaw { alpha: StableExponent::One, c: 0.0 };
        assert!(sample_stable_system(1, &[], &bad, &mut RngStream::new(0, 0)).is_err());
    }
}
