//! Matérn covariance functions and Gram matrices.
//!
//! Smoothness is restricted to half-integer ν = n + 1/2 (exact closed forms,
//! polynomial × exponential) and integer ν (modified Bessel K_n path). Both
//! families use the √(2ν)-scaled argument convention
//!
//! ```text
//! k(r) = σ² · 2^{1−ν}/Γ(ν) · (√(2ν)·r/λ)^ν · K_ν(√(2ν)·r/λ)
//! ```
//!
//! so ν = 1/2 is exactly σ²·exp(−r/λ). Other real ν is rejected: a general
//! real-order K_ν is not needed for any supported configuration.

pub mod bessel;
mod profile;

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Matérn kernel hyperparameters.
///
/// Immutable after construction; all evaluation methods are pure, so values
/// can be shared freely across threads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaternParams {
    nu: f64,
    lengthscale: f64,
    variance: f64,
    form: NuForm,
}

/// Which exact evaluation family a supported ν falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NuForm {
    /// ν = n + 1/2.
    HalfInteger(u32),
    /// ν = n, n ≥ 1.
    Integer(u32),
}

impl MaternParams {
    /// Validates ν > 0 (half-integer or integer), λ > 0, σ² > 0.
    pub fn new(nu: f64, lengthscale: f64, variance: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "nu",
                message: format!("must be positive, got {nu}"),
            });
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lengthscale",
                message: format!("must be positive and finite, got {lengthscale}"),
            });
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "variance",
                message: format!("must be positive and finite, got {variance}"),
            });
        }
        let two_nu = 2.0 * nu;
        let rounded = two_nu.round();
        if (two_nu - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::UnsupportedSmoothness { nu });
        }
        let twice = rounded as u64;
        let form = if twice % 2 == 1 {
            NuForm::HalfInteger(((twice - 1) / 2) as u32)
        } else {
            NuForm::Integer((twice / 2) as u32)
        };
        Ok(MaternParams {
            nu,
            lengthscale,
            variance,
            form,
        })
    }

    /// Default smoothness for a D-dimensional problem: ν = 4 + (D+1)/2.
    pub fn default_nu(dim: usize) -> f64 {
        4.0 + (dim as f64 + 1.0) / 2.0
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Smoothness condition ν > 4 + D/2 under which the optimiser's
    /// confidence bounds are calibrated; rougher kernels still run (useful
    /// for ablations) but callers should warn.
    pub fn is_theory_smooth(&self, dim: usize) -> bool {
        self.nu > 4.0 + dim as f64 / 2.0
    }

    /// Kernel value as a function of Euclidean distance r ≥ 0.
    ///
    /// Half-integer ν uses the closed form; integer ν the Bessel-K path.
    /// r = 0 is an explicit branch returning σ² (the formula is 0·∞ there).
    pub fn kernel_of_distance(&self, r: f64) -> f64 {
        debug_assert!(!(r < 0.0));
        if r == 0.0 {
            return self.variance;
        }
        let z = (2.0 * self.nu).sqrt() * r / self.lengthscale;
        match self.form {
            NuForm::HalfInteger(n) => self.variance * half_integer_closed_form(n, z),
            NuForm::Integer(n) => self.variance * integer_bessel_form(n, z),
        }
    }

    /// Reference evaluation through the modified-Bessel representation
    /// directly: σ²·2^{1−ν}/Γ(ν)·z^ν·K_ν(z). For half-integer ν this routes
    /// through the K_{1/2} seed and upward recurrence instead of the closed
    /// form, giving an algebraically independent cross-check path.
    pub fn kernel_of_distance_bessel(&self, r: f64) -> f64 {
        debug_assert!(!(r < 0.0));
        if r == 0.0 {
            return self.variance;
        }
        let z = (2.0 * self.nu).sqrt() * r / self.lengthscale;
        let k_nu = match self.form {
            NuForm::HalfInteger(n) => bessel::bessel_k_half(n, z),
            NuForm::Integer(n) => bessel::bessel_k_int(n, z),
        };
        let gamma_nu = match self.form {
            NuForm::HalfInteger(n) => gamma_half_integer(n),
            NuForm::Integer(n) => factorial(n - 1),
        };
        self.variance * 2.0_f64.powf(1.0 - self.nu) / gamma_nu * z.powf(self.nu) * k_nu
    }
}

/// k(z)/σ² for ν = n + 1/2:
/// e^{−z}·(n!/(2n)!)·Σ_{i=0}^{n} (n+i)!/(i!(n−i)!)·(2z)^{n−i}.
fn half_integer_closed_form(n: u32, z: f64) -> f64 {
    let x = 2.0 * z;
    // Horner over descending powers of 2z; coefficients are exact integers.
    let mut poly = 0.0;
    for i in 0..=n {
        let c = (factorial_u128(n + i) / (factorial_u128(i) * factorial_u128(n - i))) as f64;
        poly = poly * x + c;
    }
    (-z).exp() * poly * factorial(n) / factorial(2 * n)
}

/// k(z)/σ² for integer ν = n: 2^{1−n}/(n−1)!·z^n·K_n(z), through the
/// Chebyshev-accelerated profile (the Bessel series is too slow for batched
/// posterior sweeps).
fn integer_bessel_form(n: u32, z: f64) -> f64 {
    profile::integer_profile(n, z)
}

/// Γ(n + 1/2) = √π·(2n−1)!!/2^n; both factors are exact in f64 for n ≤ 15.
fn gamma_half_integer(n: u32) -> f64 {
    let mut double_fact = 1.0;
    let mut k = 1;
    while k < 2 * n {
        double_fact *= f64::from(k);
        k += 2;
    }
    std::f64::consts::PI.sqrt() * double_fact / 2.0_f64.powi(n as i32)
}

fn factorial(n: u32) -> f64 {
    factorial_u128(n) as f64
}

fn factorial_u128(n: u32) -> u128 {
    (1..=u128::from(n)).product::<u128>().max(1)
}

/// Euclidean distance; symmetric in its arguments bit-for-bit.
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Kernel value k(x, x'); dimension-checked entry point.
pub fn matern(params: &MaternParams, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(params.kernel_of_distance(distance(x, y)))
}

/// Gram matrix K[i][j] = k(x_i, x_j). Exactly symmetric (each off-diagonal
/// entry is computed once and mirrored) with σ² on the diagonal. An empty
/// point list yields the 0×0 matrix.
pub fn gram(params: &MaternParams, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if let Some(first) = points.first() {
        for p in points {
            if p.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: p.len(),
                });
            }
        }
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.variance();
        for j in (i + 1)..n {
            let v = params.kernel_of_distance(distance(&points[i], &points[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nu: f64, lam: f64, s2: f64) -> MaternParams {
        MaternParams::new(nu, lam, s2).unwrap()
    }

    #[test]
    fn rejects_unsupported_smoothness() {
        assert!(matches!(
            MaternParams::new(0.7, 1.0, 1.0),
            Err(Error::UnsupportedSmoothness { .. })
        ));
        assert!(MaternParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(MaternParams::new(0.5, 0.0, 1.0).is_err());
        assert!(MaternParams::new(0.5, 1.0, -2.0).is_err());
        assert!(MaternParams::new(5.5, 0.3, 1.0).is_ok());
        assert!(MaternParams::new(6.0, 0.3, 1.0).is_ok());
    }

    #[test]
    fn zero_distance_is_variance() {
        for nu in [0.5, 1.0, 2.5, 6.0] {
            let p = params(nu, 0.7, 3.25);
            assert_eq!(p.kernel_of_distance(0.0), 3.25);
            let x = vec![0.2, 0.9];
            assert_eq!(matern(&p, &x, &x).unwrap(), 3.25);
        }
    }

    #[test]
    fn exponential_kernel_closed_form() {
        // ν = 1/2 is σ²·exp(−r/λ).
        let p = params(0.5, 1.0, 1.0);
        let got = p.kernel_of_distance(1.0);
        assert!((got - 0.3678794411714423).abs() < 1e-15);
    }

    #[test]
    fn matches_high_precision_references() {
        // Reference values computed with mpmath at 60 decimal digits.
        let sqrt3 = 0.3464101615137755;
        let cases: &[(f64, f64, f64, f64, f64)] = &[
            (0.5, 1.0, 1.0, 1.0, 0.3678794411714423215955),
            (2.5, 1.0, 1.0, 1.0, 0.5239941088318203105927),
            (5.5, sqrt3, 1.0, 0.25, 0.7366071730503290989955),
            (6.0, sqrt3, 1.0, 0.25, 0.7395898514282872623605),
            (6.0, 0.2, 2.0, 0.05, 1.926722020625782111406),
            (6.0, 0.2, 2.0, 1.5, 4.019157386822580370812e-7),
            (1.0, 0.7, 0.5, 0.3, 0.3894296473821397821135),
            (3.0, 1.3, 1.5, 2.0, 0.4096296845489213408884),
        ];
        for &(nu, lam, s2, r, want) in cases {
            let p = params(nu, lam, s2);
            let got = p.kernel_of_distance(r);
            let rel = (got - want).abs() / want;
            assert!(rel < 1e-12, "nu={nu} r={r}: got {got}, want {want}, rel {rel:e}");
            let via_bessel = p.kernel_of_distance_bessel(r);
            let rel_b = (via_bessel - want).abs() / want;
            assert!(rel_b < 1e-11, "bessel path nu={nu} r={r}: rel {rel_b:e}");
        }
    }

    #[test]
    fn spec_value_nu_five_halves() {
        // (1+√5+5/3)·e^{−√5} for ν=5/2, σ²=1, λ=1, r=1.
        let p = params(2.5, 1.0, 1.0);
        let want = (1.0 + 5.0_f64.sqrt() + 5.0 / 3.0) * (-(5.0_f64.sqrt())).exp();
        assert!((p.kernel_of_distance(1.0) - want).abs() < 1e-14);
    }

    #[test]
    fn closed_form_and_bessel_path_agree() {
        for half_n in 0..=5u32 {
            let nu = half_n as f64 + 0.5;
            let p = params(nu, 0.37, 1.7);
            for i in 0..200 {
                let r = 1e-6 + (10.0 * 0.37 - 1e-6) * i as f64 / 199.0;
                let a = p.kernel_of_distance(r);
                let b = p.kernel_of_distance_bessel(r);
                let rel = (a - b).abs() / a.abs().max(1e-300);
                assert!(rel < 1e-8, "nu={nu} r={r}: rel {rel:e}");
            }
        }
    }

    #[test]
    fn monotone_decay_in_distance() {
        for nu in [0.5, 1.0, 3.5, 6.0] {
            let p = params(nu, 0.4, 1.0);
            let mut prev = p.kernel_of_distance(0.0);
            for i in 1..400 {
                let r = i as f64 * 0.01;
                let v = p.kernel_of_distance(r);
                assert!(v <= prev, "nu={nu}: k({r}) rose");
                assert!(v > 0.0, "nu={nu}: k({r}) not strictly positive");
                prev = v;
            }
        }
    }

    #[test]
    fn symmetry_is_bit_exact() {
        let p = params(6.0, 0.3, 1.0);
        let x = vec![0.123456789, 0.9, 0.314159];
        let y = vec![0.987654321, 0.1, 0.2718281828];
        assert_eq!(
            matern(&p, &x, &y).unwrap().to_bits(),
            matern(&p, &y, &x).unwrap().to_bits()
        );
    }

    #[test]
    fn gram_shape_and_duplicates() {
        let p = params(2.5, 1.0, 2.0);
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(gram(&p, &empty).unwrap().nrows(), 0);

        let single = vec![vec![0.5]];
        let g = gram(&p, &single).unwrap();
        assert_eq!(g.nrows(), 1);
        assert_eq!(g[(0, 0)], 2.0);

        // Duplicated point: rank-1 matrix of σ².
        let dup = vec![vec![0.25, 0.5], vec![0.25, 0.5]];
        let g = gram(&p, &dup).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g[(i, j)], 2.0);
            }
        }
    }

    #[test]
    fn gram_dimension_mismatch() {
        let p = params(2.5, 1.0, 1.0);
        let pts = vec![vec![0.1, 0.2], vec![0.3]];
        assert!(matches!(
            gram(&p, &pts),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_positive_semidefinite_small() {
        // 5 seeded points in [0,1]³, ν=5/2: min eigenvalue ≥ −1e−10·σ².
        let p = params(2.5, 0.5, 1.0);
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| next()).collect()).collect();
        let g = gram(&p, &pts).unwrap();
        let eig = g.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "min eigenvalue {min:e}");
    }

    #[test]
    fn default_nu_matches_dimension_rule() {
        assert_eq!(MaternParams::default_nu(3), 6.0);
        assert_eq!(MaternParams::default_nu(2), 5.5);
        assert_eq!(MaternParams::default_nu(4), 6.5);
        let p = params(6.0, 0.3, 1.0);
        assert!(p.is_theory_smooth(3));
        assert!(!p.is_theory_smooth(4));
    }
}
