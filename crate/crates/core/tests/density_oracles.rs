//! Closed-form densities checked against independent quadrature and Monte
//! Carlo.

use std::f64::consts::PI;

use num_complex::Complex64;
use rmtlab::densities::{self, CauchyParams, TDistParams};
use rmtlab::ensembles::{self, RadialLaw};
use rmtlab::girko;
use rmtlab::matcore::{self, ComplexMatrix, RealMatrix};
use rmtlab::quadrature::{integrate, integrate_half_line, integrate_line, Tolerance};
use rmtlab::rng::RngStream;
use rmtlab::stats;

fn tight() -> Tolerance {
    Tolerance { abs: 1e-11, rel: 1e-11, max_intervals: 4000 }
}

fn col(v: &[f64]) -> RealMatrix {
    RealMatrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
}

fn row(v: &[f64]) -> RealMatrix {
    RealMatrix::from_vec(1, v.len(), v.to_vec()).unwrap()
}

#[test]
fn real_law_normalizes_by_quadrature() {
    let one = integrate_line(|z| densities::log_universal_real(&col(&[z])).exp(), tight()).unwrap();
    assert!((one - 1.0).abs() < 1e-8, "(1,1): {one}");
    // (2,1) and (1,2) depend on |z| only: polar coordinates in the plane.
    for mk in [col as fn(&[f64]) -> RealMatrix, row] {
        let total = 2.0 * PI * integrate_half_line(|r| r * densities::log_universal_real(&mk(&[r, 0.0])).exp(), tight()).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
    // The raw integrals are π and 2π.
    assert!((densities::selberg_z_integral(1, 1) - PI).abs() < 1e-14);
    assert!((densities::selberg_z_integral(2, 1) - 2.0 * PI).abs() < 1e-13);
    assert!((densities::selberg_z_integral(1, 2) - 2.0 * PI).abs() < 1e-13);
}

#[test]
fn real_law_single_row_normalizes() {
    let s4 = densities::sphere_area(4);
    let total = s4 * integrate_half_line(|r| r.powi(3) * densities::log_universal_real(&row(&[r, 0.0, 0.0, 0.0])).exp(), tight()).unwrap();
    assert!((total - 1.0).abs() < 1e-8, "(1,4): {total}");
}

#[test]
fn complex_law_normalizes_by_quadrature() {
    let p = |z: ComplexMatrix| densities::log_universal_complex(&z).exp();
    let cz = |m: usize, n: usize, r: f64| {
        let mut data = vec![Complex64::new(0.0, 0.0); m * n];
        data[0] = Complex64::new(r, 0.0);
        ComplexMatrix::from_vec(m, n, data).unwrap()
    };
    // (1,1): the plane; (2,1) and (1,2): ℝ⁴.
    let t11 = 2.0 * PI * integrate_half_line(|r| r * p(cz(1, 1, r)), tight()).unwrap();
    assert!((t11 - 1.0).abs() < 1e-8, "{t11}");
    for (m, n) in [(2, 1), (1, 2)] {
        let t = densities::sphere_area(4) * integrate_half_line(|r| r.powi(3) * p(cz(m, n, r)), tight()).unwrap();
        assert!((t - 1.0).abs() < 1e-8, "({m},{n}): {t}");
    }
    assert!((densities::log_universal_complex_constant(1, 1).exp() - 1.0 / PI).abs() < 1e-15);
    assert!((densities::log_universal_complex_constant(2, 1).exp() - 2.0 / (PI * PI)).abs() < 1e-15);
}

#[test]
fn complex_constant_matches_ginibre_moment() {
    // π^{mn} C_c = E|det B|^{2n} for B with i.i.d. standard complex normal
    // entries (E|b|² = 1).
    for (m, n, seed) in [(2usize, 1usize, 1u64), (2, 2, 2), (3, 1, 3)] {
        let exact = (densities::log_universal_complex_constant(m, n) + (m * n) as f64 * PI.ln()).exp();
        let mut rng = RngStream::new(seed, 77);
        let values: Vec<f64> = (0..100_000)
            .map(|_| {
                let b = ensembles::sample_complex_matrix(m, m, &RadialLaw::Gaussian, &mut rng).unwrap();
                // components are N(0, 1), so E|b|² = 2
                let b = b.scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
                (2.0 * n as f64 * matcore::log_abs_det(&b).log_abs).exp()
            })
            .collect();
        let est = stats::mc_mean(&values).unwrap();
        assert!(est.agrees_with(exact, 4.0), "({m},{n}): {est:?} vs {exact}");
    }
}

#[test]
fn matrix_t_normalizes() {
    let mut p = TDistParams::universal(1, 1);
    p.location = RealMatrix::from_rows(&[[0.3]]);
    p.sigma = RealMatrix::from_rows(&[[2.0]]);
    p.omega = RealMatrix::from_rows(&[[0.5]]);
    p.q = 2.0;
    let t = integrate_line(|z| densities::log_matrix_t(&RealMatrix::from_rows(&[[z]]), &p).unwrap().exp(), tight()).unwrap();
    assert!((t - 1.0).abs() < 1e-8, "{t}");

    // 2 × 1 with correlated Σ: nested quadrature over the plane.
    let mut p = TDistParams::universal(2, 1);
    p.location = RealMatrix::from_rows(&[[0.5], [-1.0]]);
    p.sigma = RealMatrix::from_rows(&[[2.0, 0.6], [0.6, 1.0]]);
    p.omega = RealMatrix::from_rows(&[[1.5]]);
    p.q = 2.0;
    let tol = Tolerance { abs: 1e-10, rel: 1e-10, max_intervals: 4000 };
    let t = integrate_line(
        |x| integrate_line(|y| densities::log_matrix_t(&col(&[x, y]), &p).unwrap().exp(), tol).unwrap(),
        tol,
    )
    .unwrap();
    assert!((t - 1.0).abs() < 1e-6, "{t}");
}

#[test]
fn matrix_t_q1_is_universal_law() {
    let p = TDistParams::universal(2, 3);
    let z = RealMatrix::from_rows(&[[0.3, -1.2, 2.0], [0.7, 0.1, -0.4]]);
    let a = densities::log_matrix_t(&z, &p).unwrap();
    let b = densities::log_universal_real(&z);
    assert!((a - b).abs() < 1e-12);
}

fn rotation(n: usize, i: usize, j: usize, theta: f64) -> RealMatrix {
    let mut r = RealMatrix::identity(n).into_vec();
    let (c, s) = (theta.cos(), theta.sin());
    r[i * n + i] = c;
    r[j * n + j] = c;
    r[i * n + j] = -s;
    r[j * n + i] = s;
    RealMatrix::from_vec(n, n, r).unwrap()
}

fn random_orthogonal(n: usize, rng: &mut RngStream) -> RealMatrix {
    let mut q = RealMatrix::identity(n);
    for _ in 0..3 {
        for i in 0..n {
            for j in i + 1..n {
                q = q.matmul(&rotation(n, i, j, 2.0 * PI * rng.next_f64()));
            }
        }
    }
    q
}

#[test]
fn universal_law_is_orthogonally_invariant() {
    let mut rng = RngStream::new(5, 0);
    for (m, n) in [(2, 2), (3, 2), (2, 4)] {
        for _ in 0..20 {
            let z = RealMatrix::from_fn(m, n, |_, _| 4.0 * rng.next_f64() - 2.0);
            let o1 = random_orthogonal(m, &mut rng);
            let o2 = random_orthogonal(n, &mut rng);
            let rz = o1.matmul(&z).matmul(&o2);
            let (a, b) = (densities::log_universal_real(&z), densities::log_universal_real(&rz));
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }
}

#[test]
fn universal_law_depends_on_singular_values_only() {
    let z = RealMatrix::from_rows(&[[1.0, 0.5, -0.3], [0.2, -2.0, 0.8]]);
    let s = matcore::singular_values(&z).unwrap();
    let d = RealMatrix::from_rows(&[[s[0], 0.0, 0.0], [0.0, s[1], 0.0]]);
    assert!((densities::log_universal_real(&z) - densities::log_universal_real(&d)).abs() < 1e-12);
    let log_c = densities::log_universal_real_constant(2, 3);
    let direct = log_c - 2.5 * s.iter().map(|w| (w * w).ln_1p()).sum::<f64>();
    assert!((densities::log_universal_real(&z) - direct).abs() < 1e-12);
}

#[test]
fn ortho_volume_footnote() {
    // (2π)^{m²/2} = V_m ∫ dω |Δ(ω²)| e^{−Σω²/2}.
    let tol = Tolerance { abs: 1e-10, rel: 1e-12, max_intervals: 4000 };
    let i1 = integrate_line(|w| (-0.5 * w * w).exp(), tol).unwrap();
    assert!((densities::ortho_volume(1) * i1 - (2.0 * PI).sqrt()).abs() < 1e-10);
    let i2 = integrate_line(
        |x| {
            let mut f = |y: f64| (x * x - y * y).abs() * (-0.5 * (x * x + y * y)).exp();
            // kinks at y = ±x
            let a = x.abs();
            if a == 0.0 {
                return integrate_line(&mut f, tol).unwrap();
            }
            2.0 * (integrate(&mut f, 0.0, a, tol).unwrap() + integrate_half_line(|t| f(a + t), tol).unwrap())
        },
        tol,
    )
    .unwrap();
    assert!((i2 - 8.0).abs() < 1e-8, "{i2}");
    assert!((densities::ortho_volume(2) * i2 - 4.0 * PI * PI).abs() < 1e-7);
    assert!((densities::ortho_volume(2) - PI * PI / 2.0).abs() < 1e-13);
}

#[test]
fn normalization_and_gamma_identities_on_grid() {
    for m in 1..=12 {
        for n in 1..=12 {
            let prod = densities::log_universal_real_constant(m, n) + densities::log_selberg_z_integral(m, n);
            assert!(prod.abs() < 1e-12, "({m},{n}): {prod}");
            assert!(densities::gamma_identity_residual(m, n) < 1e-10);
        }
    }
}

#[test]
fn gaussian_det_integral_by_monte_carlo() {
    for m in 1..=3 {
        for n in 1..=3 {
            let est = ensembles::gaussian_det_moment(m, n, 40_000, 11).unwrap();
            let exact = densities::gaussian_detn_integral(m, n);
            assert!(est.agrees_with(exact, 4.0), "({m},{n}): {est:?} vs {exact}");
        }
    }
    // m = 1: ∫ e^{−x²}|x|ⁿ dx = Γ((n+1)/2).
    for n in 1..=6 {
        let g = statrs::function::gamma::gamma((n as f64 + 1.0) / 2.0);
        assert!((densities::gaussian_detn_integral(1, n) - g).abs() < 1e-12 * g);
    }
}

#[test]
fn mdim_cauchy_constant_by_radial_quadrature() {
    for m in 1..=6 {
        let sm = densities::sphere_area(m);
        let t = sm * integrate_half_line(|r| r.powi(m as i32 - 1) * densities::log_mdim_cauchy(&{
            let mut z = vec![0.0; m];
            z[0] = r;
            z
        }, 1.7).exp(), tight()).unwrap();
        assert!((t - 1.0).abs() < 1e-8, "m={m}: {t}");
        let c = (densities::log_mdim_cauchy(&vec![0.0; m], 1.0)).exp();
        assert!((c - 2.0 / densities::sphere_area(m + 1)).abs() < 1e-14);
    }
}

#[test]
fn girko_density_marginalizes_to_cauchy() {
    let u = [0.75, -0.2];
    let beta = girko::beta_euclidean(&u);
    for z1 in [-3.0, 0.0, 0.4, 5.0] {
        let exact = densities::cauchy_logpdf(z1, &CauchyParams::centered(beta)).exp();
        let m2 = integrate_line(|z2| girko::girko_logdensity(&[z1, z2], &u).exp(), tight()).unwrap();
        assert!((m2 - exact).abs() < 1e-9, "m=2 z1={z1}: {m2} vs {exact}");
        let m3 = 2.0 * PI * integrate_half_line(|r| r * girko::girko_logdensity(&[z1, r, 0.0], &u).exp(), tight()).unwrap();
        assert!((m3 - exact).abs() < 1e-9, "m=3 z1={z1}: {m3} vs {exact}");
    }
}

#[test]
fn ratio_law_by_quadrature() {
    // z1/z2 for (z1, z2) ~ 2-d Cauchy(β): ∫ |z2| P(r z2, z2) dz2.
    for beta in [1.0, 1.25, 3.0] {
        for r in [-2.0, 0.0, 0.5, 4.0] {
            let q = 2.0 * integrate_half_line(|t| t * densities::log_mdim_cauchy(&[r * t, t], beta).exp(), tight()).unwrap();
            assert!((q - girko::ratio_logdensity(r).exp()).abs() < 1e-9);
        }
    }
}
