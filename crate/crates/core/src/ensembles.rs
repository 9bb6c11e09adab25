//! Rotationally invariant matrix ensembles `G(A) = f(tr A A†)`.
//!
//! A draw is `A = r · v` with `v` uniform on the unit sphere of the full
//! real dimension and `r` drawn from the radial law, which realizes any
//! density depending on `tr A A†` alone.

use num_complex::Complex64;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::{self, ComplexMatrix, MatError, Matrix, RealMatrix, Scalar};
use crate::rng::{draw_stream, label_hash, RngStream};
use crate::stats::{self, McEstimate, StatsError};

/// Consecutive near-singular draws tolerated before giving up.
pub const MAX_CONSECUTIVE_REJECTIONS: u32 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid radial law: {0}")]
    InvalidLaw(String),
    #[error("invalid ensemble: {0}")]
    InvalidSpec(String),
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("{attempts} consecutive near-singular draws of B; the ensemble looks degenerate")]
    ResampleLimit { attempts: u32 },
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Law of the Frobenius radius `r = ‖A‖_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum RadialLaw {
    /// i.i.d. standard normal real components; `r²` is chi-square.
    Gaussian,
    /// Point mass at `r0`.
    FixedShell { r0: f64 },
    /// Uniform in the ball of the given radius.
    UniformBall { radius: f64 },
    /// `r1` with probability `weight`, else `r2`.
    TwoShell { r1: f64, r2: f64, weight: f64 },
}

impl RadialLaw {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(EnsembleError::InvalidLaw(format!("{name} must be positive and finite, got {x}")))
            }
        };
        match *self {
            RadialLaw::Gaussian => Ok(()),
            RadialLaw::FixedShell { r0 } => positive("r0", r0),
            RadialLaw::UniformBall { radius } => positive("radius", radius),
            RadialLaw::TwoShell { r1, r2, weight } => {
                positive("r1", r1)?;
                positive("r2", r2)?;
                if weight > 0.0 && weight < 1.0 {
                    Ok(())
                } else {
                    Err(EnsembleError::InvalidLaw(format!("weight must lie in (0, 1), got {weight}")))
                }
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match *self {
            RadialLaw::Gaussian => "gaussian".into(),
            RadialLaw::FixedShell { r0 } => format!("fixed-shell({r0})"),
            RadialLaw::UniformBall { radius } => format!("uniform-ball({radius})"),
            RadialLaw::TwoShell { r1, r2, weight } => format!("two-shell({r1},{r2},{weight})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub m: usize,
    pub n: usize,
    pub field: Field,
    pub radial: RadialLaw,
}

impl EnsembleSpec {
    pub fn real(m: usize, n: usize, radial: RadialLaw) -> Self {
        Self { m, n, field: Field::Real, radial }
    }

    pub fn complex(m: usize, n: usize, radial: RadialLaw) -> Self {
        Self { m, n, field: Field::Complex, radial }
    }

    /// Total number of real degrees of freedom in `A`.
    pub fn real_dimension(&self) -> usize {
        let entries = self.m * (self.m + self.n);
        match self.field {
            Field::Real => entries,
            Field::Complex => 2 * entries,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.m == 0 {
            return Err(EnsembleError::InvalidSpec("m must be at least 1".into()));
        }
        self.radial.validate()
    }
}

/// Which columns of `A` form `B` (1-based, in order). The remaining columns
/// form `X` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionSpec {
    b_columns: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(b_columns: Vec<usize>, m: usize, n: usize) -> Result<Self, EnsembleError> {
        let p = Self { b_columns };
        p.check(m, n)?;
        Ok(p)
    }

    /// The first `m` columns.
    pub fn leading(m: usize) -> Self {
        Self { b_columns: (1..=m).collect() }
    }

    pub fn b_columns(&self) -> &[usize] {
        &self.b_columns
    }

    pub fn check(&self, m: usize, n: usize) -> Result<(), EnsembleError> {
        if self.b_columns.len() != m {
            return Err(EnsembleError::BadPartition(format!(
                "expected {m} column indices, got {}",
                self.b_columns.len()
            )));
        }
        let mut seen = vec![false; m + n];
        for &c in &self.b_columns {
            if c == 0 || c > m + n {
                return Err(EnsembleError::BadPartition(format!("column {c} outside [1, {}]", m + n)));
            }
            if std::mem::replace(&mut seen[c - 1], true) {
                return Err(EnsembleError::BadPartition(format!("column {c} repeated")));
            }
        }
        Ok(())
    }

    /// 0-based indices of the `X` columns, ascending.
    fn x_columns(&self, total: usize) -> Vec<usize> {
        (1..=total)
            .filter(|c| !self.b_columns.contains(c))
            .map(|c| c - 1)
            .collect()
    }
}

/// A sampled matrix of either field.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl EnsembleMatrix {
    pub fn rows(&self) -> usize {
        match self {
            EnsembleMatrix::Real(a) => a.rows(),
            EnsembleMatrix::Complex(a) => a.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            EnsembleMatrix::Real(a) => a.cols(),
            EnsembleMatrix::Complex(a) => a.cols(),
        }
    }

    pub fn frobenius_sqr(&self) -> f64 {
        match self {
            EnsembleMatrix::Real(a) => a.frobenius_sqr(),
            EnsembleMatrix::Complex(a) => a.frobenius_sqr(),
        }
    }

    /// `log det(1 + Z Z†)`.
    pub fn log_det_gram(&self) -> Result<f64, MatError> {
        match self {
            EnsembleMatrix::Real(z) => matcore::spd_logdet(&z.identity_plus_gram()),
            EnsembleMatrix::Complex(z) => matcore::spd_logdet(&z.identity_plus_gram()),
        }
    }

    pub fn as_real(&self) -> Option<&RealMatrix> {
        match self {
            EnsembleMatrix::Real(a) => Some(a),
            EnsembleMatrix::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&ComplexMatrix> {
        match self {
            EnsembleMatrix::Complex(a) => Some(a),
            EnsembleMatrix::Real(_) => None,
        }
    }
}

/// Uniform direction on the unit sphere in `d` dimensions (a normalized
/// Gaussian vector).
pub fn sample_unit_direction(d: usize, rng: &mut RngStream) -> Vec<f64> {
    assert!(d >= 1, "direction needs d >= 1");
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Radius `r = ‖A‖_F` under `law` in `d` real dimensions.
pub fn sample_radius(law: &RadialLaw, d: usize, rng: &mut RngStream) -> Result<f64, EnsembleError> {
    law.validate()?;
    if d == 0 {
        return Err(EnsembleError::InvalidSpec("dimension must be at least 1".into()));
    }
    Ok(match *law {
        RadialLaw::Gaussian => {
            let chi2 = ChiSquared::new(d as f64).expect("d >= 1");
            chi2.sample(rng).sqrt()
        }
        RadialLaw::FixedShell { r0 } => r0,
        RadialLaw::UniformBall { radius } => radius * rng.next_open01().powf(1.0 / d as f64),
        RadialLaw::TwoShell { r1, r2, weight } => {
            if rng.next_f64() < weight {
                r1
            } else {
                r2
            }
        }
    })
}

/// `d` real components of a rotationally invariant vector. The Gaussian law
/// returns the normal vector directly, which is the same law as radius times
/// its own direction.
fn sample_components(law: &RadialLaw, d: usize, rng: &mut RngStream) -> Result<Vec<f64>, EnsembleError> {
    law.validate()?;
    if let RadialLaw::Gaussian = law {
        return Ok((0..d).map(|_| StandardNormal.sample(rng)).collect());
    }
    let v = sample_unit_direction(d, rng);
    let r = sample_radius(law, d, rng)?;
    Ok(v.into_iter().map(|x| r * x).collect())
}

pub fn sample_real_matrix(m: usize, cols: usize, law: &RadialLaw, rng: &mut RngStream) -> Result<RealMatrix, EnsembleError> {
    let flat = sample_components(law, m * cols, rng)?;
    Ok(RealMatrix::from_vec(m, cols, flat)?)
}

pub fn sample_complex_matrix(
    m: usize,
    cols: usize,
    law: &RadialLaw,
    rng: &mut RngStream,
) -> Result<ComplexMatrix, EnsembleError> {
    let flat = sample_components(law, 2 * m * cols, rng)?;
    let entries = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok(ComplexMatrix::from_vec(m, cols, entries)?)
}

/// Draws `A`, an `m × (m+n)` matrix of the requested field.
pub fn sample_matrix(spec: &EnsembleSpec, rng: &mut RngStream) -> Result<EnsembleMatrix, EnsembleError> {
    spec.validate()?;
    let cols = spec.m + spec.n;
    Ok(match spec.field {
        Field::Real => EnsembleMatrix::Real(sample_real_matrix(spec.m, cols, &spec.radial, rng)?),
        Field::Complex => EnsembleMatrix::Complex(sample_complex_matrix(spec.m, cols, &spec.radial, rng)?),
    })
}

/// Splits `A` into `(B, X)`.
pub fn partition<T: Scalar>(a: &Matrix<T>, p: &PartitionSpec) -> Result<(Matrix<T>, Matrix<T>), EnsembleError> {
    let m = a.rows();
    if a.cols() < m {
        return Err(EnsembleError::BadPartition(format!(
            "A has {} columns, fewer than its {m} rows",
            a.cols()
        )));
    }
    p.check(m, a.cols() - m)?;
    let b_idx: Vec<usize> = p.b_columns.iter().map(|c| c - 1).collect();
    let x_idx = p.x_columns(a.cols());
    Ok((a.select_columns(&b_idx), a.select_columns(&x_idx)))
}

/// A draw of `Z = B⁻¹X` and the number of rejected near-singular `B`s
/// that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDraw {
    pub z: EnsembleMatrix,
    pub resamples: u32,
}

/// Retries `attempt` while it reports a singular or near-singular matrix.
pub(crate) fn with_resampling<R>(
    mut attempt: impl FnMut() -> Result<R, EnsembleError>,
) -> Result<(R, u32), EnsembleError> {
    let mut rejected = 0;
    loop {
        match attempt() {
            Ok(r) => return Ok((r, rejected)),
            Err(EnsembleError::Mat(MatError::NearSingular { .. } | MatError::SingularMatrix { .. })) => {
                rejected += 1;
                if rejected >= MAX_CONSECUTIVE_REJECTIONS {
                    return Err(EnsembleError::ResampleLimit { attempts: rejected });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn solve_partitioned<T: Scalar>(a: &Matrix<T>, p: &PartitionSpec) -> Result<Matrix<T>, EnsembleError> {
    let (b, x) = partition(a, p)?;
    Ok(matcore::solve_multi(&b, &x)?)
}

/// Draws `Z = B⁻¹X`, redrawing `A` whenever `B` is near-singular.
pub fn sample_z(spec: &EnsembleSpec, p: &PartitionSpec, rng: &mut RngStream) -> Result<ZDraw, EnsembleError> {
    spec.validate()?;
    if spec.n == 0 {
        return Err(EnsembleError::InvalidSpec("Z = B⁻¹X needs n >= 1".into()));
    }
    p.check(spec.m, spec.n)?;
    let (z, resamples) = with_resampling(|| {
        Ok(match sample_matrix(spec, rng)? {
            EnsembleMatrix::Real(a) => EnsembleMatrix::Real(solve_partitioned(&a, p)?),
            EnsembleMatrix::Complex(a) => EnsembleMatrix::Complex(solve_partitioned(&a, p)?),
        })
    })?;
    Ok(ZDraw { z, resamples })
}

/// Draws the augmented system `(A, b)`, `A` of size `m × (m+n)`, with
/// `tr AᵀA + bᵀb` following the radial law in dimension `m(m+n+1)`.
pub fn sample_system(
    m: usize,
    n: usize,
    law: &RadialLaw,
    rng: &mut RngStream,
) -> Result<(RealMatrix, Vec<f64>), EnsembleError> {
    if m == 0 {
        return Err(EnsembleError::InvalidSpec("m must be at least 1".into()));
    }
    let cols = m + n;
    let mut flat = sample_components(law, m * (cols + 1), rng)?;
    let b = flat.split_off(m * cols);
    Ok((RealMatrix::from_vec(m, cols, flat)?, b))
}

/// Monte Carlo estimate of `∫ dB e^{−tr BBᵀ} |det B|ⁿ = π^{m²/2} E|det G|ⁿ`,
/// `G` with i.i.d. `N(0, ½)` entries.
pub fn gaussian_det_moment(m: usize, n: usize, samples: usize, seed: u64) -> Result<McEstimate, StatsError> {
    let arm = label_hash(&format!("gaussian-det-moment/{m}/{n}"));
    let log_front = (m * m) as f64 / 2.0 * std::f64::consts::PI.ln();
    let values: Vec<f64> = (0..samples)
        .map(|i| {
            let mut rng = draw_stream(seed, arm, i as u64);
            let g = RealMatrix::from_fn(m, m, |_, _| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x * std::f64::consts::FRAC_1_SQRT_2
            });
            (log_front + n as f64 * matcore::log_abs_det(&g).log_abs).exp()
        })
        .collect();
    stats::mc_mean(&values)
}
