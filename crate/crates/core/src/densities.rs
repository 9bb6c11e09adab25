//! Closed-form densities and exact normalization constants.
//!
//! Gamma products are always evaluated as sums of `ln Γ`, so everything
//! stays finite well past the dimensions the samplers can reach.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::{self, ComplexMatrix, MatError, RealMatrix};
use crate::special::{ln_gamma, sum_ln_gamma};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Surface area `S_d = 2π^{d/2} / Γ(d/2)` of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    log_sphere_area(d).exp()
}

pub fn log_sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere dimension must be positive");
    let h = d as f64 / 2.0;
    2f64.ln() + h * PI.ln() - ln_gamma(h)
}

/// `ln ∫ dZ det(1 + ZZᵀ)^{−(m+n)/2}` over real `m × n` matrices:
/// `(mn/2) ln π + Σ_{j=1}^n [ln Γ(j/2) − ln Γ((m+j)/2)]`.
pub fn log_selberg_z_integral(m: usize, n: usize) -> f64 {
    let half = |k: usize| k as f64 / 2.0;
    (m * n) as f64 / 2.0 * PI.ln() + sum_ln_gamma((1..=n).map(half))
        - sum_ln_gamma((1..=n).map(|j| half(m + j)))
}

pub fn selberg_z_integral(m: usize, n: usize) -> f64 {
    log_selberg_z_integral(m, n).exp()
}

/// `ln C_c` for the complex law `C_c / det(1 + ZZ†)^{m+n}`:
/// `C_c = π^{−mn} Π_{j=1}^m Γ(n+j) / Γ(j)`.
///
/// This is `π^{−mn} E|det B|^{2n}` for `B` with i.i.d. standard complex
/// normal entries, using `|det B|² = Π Gamma(j, 1)` from the QR
/// decomposition of a complex Ginibre matrix.
fn log_complex_constant_direct(m: usize, n: usize) -> f64 {
    -((m * n) as f64) * PI.ln() + sum_ln_gamma((1..=m).map(|j| (n + j) as f64))
        - sum_ln_gamma((1..=m).map(|j| j as f64))
}

const TABLE_MAX: usize = 32;

struct NormalizationTable {
    real: Vec<f64>,
    complex: Vec<f64>,
}

fn table() -> &'static NormalizationTable {
    static TABLE: OnceLock<NormalizationTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut real = Vec::with_capacity(TABLE_MAX * TABLE_MAX);
        let mut complex = Vec::with_capacity(TABLE_MAX * TABLE_MAX);
        for m in 1..=TABLE_MAX {
            for n in 1..=TABLE_MAX {
                real.push(-log_selberg_z_integral(m, n));
                complex.push(log_complex_constant_direct(m, n));
            }
        }
        NormalizationTable { real, complex }
    })
}

fn table_index(m: usize, n: usize) -> Option<usize> {
    (m >= 1 && n >= 1 && m <= TABLE_MAX && n <= TABLE_MAX).then(|| (m - 1) * TABLE_MAX + (n - 1))
}

/// `ln C` for the real universal law `C / det(1 + ZZᵀ)^{(m+n)/2}`.
pub fn log_universal_real_constant(m: usize, n: usize) -> f64 {
    match table_index(m, n) {
        Some(k) => table().real[k],
        None => -log_selberg_z_integral(m, n),
    }
}

/// `ln C_c` for the complex universal law.
pub fn log_universal_complex_constant(m: usize, n: usize) -> f64 {
    match table_index(m, n) {
        Some(k) => table().complex[k],
        None => log_complex_constant_direct(m, n),
    }
}

/// `ln P(Z)` of the real universal law for an `m × n` matrix `Z`.
pub fn log_universal_real(z: &RealMatrix) -> f64 {
    let (m, n) = (z.rows(), z.cols());
    let logdet = matcore::spd_logdet(&z.identity_plus_gram()).unwrap_or(f64::INFINITY);
    log_universal_real_constant(m, n) - (m + n) as f64 / 2.0 * logdet
}

/// `ln P(Z)` of the complex universal law, a density with respect to
/// `Π d Re Z_ip d Im Z_ip`.
pub fn log_universal_complex(z: &ComplexMatrix) -> f64 {
    let (m, n) = (z.rows(), z.cols());
    let logdet = matcore::spd_logdet(&z.identity_plus_gram()).unwrap_or(f64::INFINITY);
    log_universal_complex_constant(m, n) - (m + n) as f64 * logdet
}

/// Parameters of the matrix-variate t-distribution over `m × n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TDistParams {
    /// Location, `m × n`.
    pub location: RealMatrix,
    /// Row scale, `m × m` SPD.
    pub sigma: RealMatrix,
    /// Column scale, `n × n` SPD.
    pub omega: RealMatrix,
    pub q: f64,
}

impl TDistParams {
    /// `M = 0, Σ = I, Ω = I, q = 1`: the universal law.
    pub fn universal(m: usize, n: usize) -> Self {
        Self {
            location: RealMatrix::zeros(m, n),
            sigma: RealMatrix::identity(m),
            omega: RealMatrix::identity(n),
            q: 1.0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.location.rows(), self.location.cols())
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let (m, n) = self.dims();
        if (self.sigma.rows(), self.sigma.cols()) != (m, m) || (self.omega.rows(), self.omega.cols()) != (n, n) {
            return Err(DensityError::InvalidParams(format!(
                "location is {m}x{n}, so Sigma must be {m}x{m} and Omega {n}x{n}"
            )));
        }
        if self.q <= 0.0 || !self.q.is_finite() {
            return Err(DensityError::InvalidParams(format!("q must be positive, got {}", self.q)));
        }
        for (name, s) in [("Sigma", &self.sigma), ("Omega", &self.omega)] {
            let asym = (0..s.rows())
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .map(|(i, j)| (s[(i, j)] - s[(j, i)]).abs())
                .fold(0.0, f64::max);
            if asym > 1e-12 * s.max_abs().max(1.0) {
                return Err(DensityError::InvalidParams(format!("{name} is not symmetric")));
            }
        }
        Ok(())
    }
}

/// `ln D`, the matrix-variate t normalization
/// `D = π^{−mn/2} Π_{j=1}^n Γ((m+n+q−j)/2) / Γ((n+q−j)/2)`.
pub fn log_matrix_t_constant(m: usize, n: usize, q: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    -(mf * nf) / 2.0 * PI.ln() + sum_ln_gamma((1..=n).map(|j| (mf + nf + q - j as f64) / 2.0))
        - sum_ln_gamma((1..=n).map(|j| (nf + q - j as f64) / 2.0))
}

/// `ln` of the matrix-variate t density at `Z`.
///
/// With `Σ = LLᵀ` and `Ω = KKᵀ`, the determinant
/// `det(1 + Σ⁻¹(Z−M)Ω⁻¹(Z−M)ᵀ)` equals `det(1 + WWᵀ)` for
/// `W = L⁻¹(Z−M)K⁻ᵀ`, which is SPD and goes through Cholesky.
pub fn log_matrix_t(z: &RealMatrix, params: &TDistParams) -> Result<f64, DensityError> {
    params.validate()?;
    let (m, n) = params.dims();
    if (z.rows(), z.cols()) != (m, n) {
        return Err(DensityError::InvalidParams(format!(
            "Z is {}x{}, parameters are for {m}x{n}",
            z.rows(),
            z.cols()
        )));
    }
    let l = matcore::cholesky(&params.sigma)?;
    let k = matcore::cholesky(&params.omega)?;
    let log_det_sigma = 2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>();
    let log_det_omega = 2.0 * (0..n).map(|i| k[(i, i)].ln()).sum::<f64>();
    let y = z.sub(&params.location);
    // W = L⁻¹ Y K⁻ᵀ  ⇔  Wᵀ = K⁻¹ (L⁻¹ Y)ᵀ
    let w = matcore::solve_lower(&k, &matcore::solve_lower(&l, &y).transpose()).transpose();
    let log_det_core = matcore::spd_logdet(&w.identity_plus_gram())?;
    Ok(log_matrix_t_constant(m, n, params.q)
        - n as f64 / 2.0 * log_det_sigma
        - m as f64 / 2.0 * log_det_omega
        - (m as f64 + n as f64 + params.q - 1.0) / 2.0 * log_det_core)
}

/// `ln ∫ dB e^{−tr BBᵀ} |det B|ⁿ = (m²/2) ln π + Σ_{j=1}^n [ln Γ((m+j)/2) − ln Γ(j/2)]`.
pub fn log_gaussian_detn_integral(m: usize, n: usize) -> f64 {
    let half = |k: usize| k as f64 / 2.0;
    (m * m) as f64 / 2.0 * PI.ln() + sum_ln_gamma((1..=n).map(|j| half(m + j))) - sum_ln_gamma((1..=n).map(half))
}

pub fn gaussian_detn_integral(m: usize, n: usize) -> f64 {
    log_gaussian_detn_integral(m, n).exp()
}

/// `ln Π_{j=1}^a Γ((b+j)/2) / Γ(j/2)`.
fn log_half_gamma_ratio(a: usize, b: usize) -> f64 {
    sum_ln_gamma((1..=a).map(|j| (b + j) as f64 / 2.0)) - sum_ln_gamma((1..=a).map(|j| j as f64 / 2.0))
}

/// `|ln Π_{j=1}^m Γ((n+j)/2)/Γ(j/2) − ln Π_{j=1}^n Γ((m+j)/2)/Γ(j/2)|`,
/// zero in exact arithmetic.
pub fn gamma_identity_residual(m: usize, n: usize) -> f64 {
    if m == n {
        return 0.0;
    }
    (log_half_gamma_ratio(m, n) - log_half_gamma_ratio(n, m)).abs()
}

/// `ln V_m`, `V_m = π^{m(m+1)/2} / (2^m Π_{j=1}^m Γ(1+j/2) Γ(j/2))`, the
/// volume of `O(m) × O(m)` in the singular value decomposition of `dB`.
pub fn log_ortho_volume(m: usize) -> f64 {
    let mf = m as f64;
    mf * (mf + 1.0) / 2.0 * PI.ln()
        - mf * 2f64.ln()
        - sum_ln_gamma((1..=m).flat_map(|j| [1.0 + j as f64 / 2.0, j as f64 / 2.0]))
}

pub fn ortho_volume(m: usize) -> f64 {
    log_ortho_volume(m).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyParams {
    pub location: f64,
    pub width: f64,
}

impl CauchyParams {
    pub fn standard() -> Self {
        Self { location: 0.0, width: 1.0 }
    }

    pub fn centered(width: f64) -> Self {
        Self { location: 0.0, width }
    }
}

pub fn cauchy_logpdf(x: f64, p: &CauchyParams) -> f64 {
    let t = x - p.location;
    p.width.ln() - PI.ln() - (t * t + p.width * p.width).ln()
}

pub fn cauchy_cdf(x: f64, p: &CauchyParams) -> f64 {
    let t = (x - p.location) / p.width;
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    0.5 + t.atan() / PI
}

/// `ln` of the `m`-dimensional Cauchy density `C β / (β² + zᵀz)^{(m+1)/2}`
/// with `C = 2 / S_{m+1}`.
pub fn log_mdim_cauchy(z: &[f64], beta: f64) -> f64 {
    let m = z.len();
    let r2: f64 = z.iter().map(|x| x * x).sum();
    2f64.ln() - log_sphere_area(m + 1) + beta.ln() - (m as f64 + 1.0) / 2.0 * (beta * beta + r2).ln()
}
