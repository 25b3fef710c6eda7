//! Fast evaluation of the integer-order Matérn radial profile
//! φ_n(z) = 2^{1−n}/(n−1)!·z^n·K_n(z).
//!
//! Half-integer smoothness has a closed form, but integer orders go through
//! the double-double Bessel series, which costs a few thousand flops per call
//! and dominates batched posterior sweeps (the dimension-default smoothness
//! 4 + (D+1)/2 is an integer in odd dimensions). This module fits each order
//! once with piecewise Chebyshev polynomials over the series region and then
//! evaluates in ~100 flops; above the series/asymptotic crossover the
//! large-argument expansion is already cheap and is used directly.
//!
//! Segments halve geometrically toward zero because φ_n's only finite
//! singularity is its z^{2n}·ln z term at the origin: on a segment [h/2, h]
//! the singularity sits at a fixed relative distance, so Chebyshev
//! convergence stays geometric, and on the innermost segment [0, h_min] the
//! term's own magnitude (≲ h_min^{2n}·|ln h_min|) caps the error. Tables are
//! built from the double-double series itself, so the fast path inherits its
//! accuracy; `fast_profile_matches_series` pins the agreement at 1e-12.

use std::sync::OnceLock;

use super::bessel;

/// Upper end of the tabulated region; beyond it `bessel_k_int` switches to
/// the asymptotic expansion and needs no acceleration.
const Z_MAX: f64 = bessel::SERIES_ASYMPTOTIC_CROSSOVER;

/// Geometric segments [Z_MAX/2^{i+1}, Z_MAX/2^i]; the last runs down to 0.
const SEGMENTS: usize = 10;

/// Chebyshev coefficients per segment (polynomial degree N_COEFF − 1).
const N_COEFF: usize = 27;

/// Largest order tabulated; higher orders fall back to the series. The
/// dimension-default smoothness stays in single digits, so anything above
/// this is exotic enough that speed no longer matters.
const MAX_ORDER: usize = 16;

struct ChebTable {
    /// `coeffs[i][k]` is the T_k coefficient on segment i.
    coeffs: [[f64; N_COEFF]; SEGMENTS],
}

static TABLES: [OnceLock<ChebTable>; MAX_ORDER + 1] =
    [const { OnceLock::new() }; MAX_ORDER + 1];

/// φ_n(z) for integer order n ≥ 1 and z > 0. Exact same definition as
/// `reference_profile`; tabulated orders 2..=16 evaluate through Chebyshev
/// polynomials inside the series region.
pub fn integer_profile(n: u32, z: f64) -> f64 {
    if z > Z_MAX || n < 2 || n as usize > MAX_ORDER {
        return reference_profile(n, z);
    }
    let table = TABLES[n as usize].get_or_init(|| build_table(n));
    let mut i = (Z_MAX / z).log2() as usize;
    if i >= SEGMENTS {
        i = SEGMENTS - 1;
    }
    let hi = Z_MAX * 0.5f64.powi(i as i32);
    let lo = if i == SEGMENTS - 1 { 0.0 } else { 0.5 * hi };
    let x = (2.0 * z - lo - hi) / (hi - lo);
    clenshaw(&table.coeffs[i], x)
}

/// φ_n(z) straight through the Bessel machinery: series below the crossover,
/// asymptotic expansion above it.
pub fn reference_profile(n: u32, z: f64) -> f64 {
    2.0_f64.powi(1 - n as i32) / factorial(n - 1) * z.powi(n as i32)
        * bessel::bessel_k_int(n, z)
}

fn factorial(n: u32) -> f64 {
    (1..=u128::from(n)).product::<u128>().max(1) as f64
}

fn build_table(n: u32) -> ChebTable {
    let mut coeffs = [[0.0; N_COEFF]; SEGMENTS];
    for (i, seg) in coeffs.iter_mut().enumerate() {
        let hi = Z_MAX * 0.5f64.powi(i as i32);
        let lo = if i == SEGMENTS - 1 { 0.0 } else { 0.5 * hi };
        *seg = fit_segment(n, lo, hi);
    }
    ChebTable { coeffs }
}

/// Chebyshev coefficients of φ_n on [lo, hi] from the Gauss–Chebyshev nodes
/// (all interior, so z = 0 is never evaluated).
fn fit_segment(n: u32, lo: f64, hi: f64) -> [f64; N_COEFF] {
    let mut values = [0.0; N_COEFF];
    for (j, v) in values.iter_mut().enumerate() {
        let theta = std::f64::consts::PI * (j as f64 + 0.5) / N_COEFF as f64;
        let x = theta.cos();
        let z = 0.5 * ((hi - lo) * x + hi + lo);
        *v = reference_profile(n, z);
    }
    let mut coeffs = [0.0; N_COEFF];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / N_COEFF as f64;
            acc += v * (k as f64 * theta).cos();
        }
        *c = 2.0 * acc / N_COEFF as f64;
    }
    coeffs
}

/// Σ'_{k} c_k·T_k(x) with the usual halved c_0.
fn clenshaw(c: &[f64; N_COEFF], x: f64) -> f64 {
    let two_x = 2.0 * x;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for k in (1..N_COEFF).rev() {
        let t = c[k] + two_x * b1 - b2;
        b2 = b1;
        b1 = t;
    }
    0.5 * c[0] + x * b1 - b2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_profile_matches_series() {
        // Dense linear sweep plus log-spaced points pushing into the
        // innermost segment, for every order the optimizers can reach.
        let mut zs: Vec<f64> = (0..4000)
            .map(|k| Z_MAX * (k as f64 + 0.5) / 4000.0)
            .collect();
        let mut z = Z_MAX;
        while z > 1e-9 {
            zs.push(z);
            z *= 0.7;
        }
        for n in [2u32, 3, 5, 6, 8, 12, 16] {
            let mut worst = 0.0f64;
            for &z in &zs {
                let fast = integer_profile(n, z);
                let slow = reference_profile(n, z);
                let rel = (fast - slow).abs() / slow.abs().max(1e-300);
                worst = worst.max(rel);
            }
            assert!(worst <= 1e-12, "order {n}: worst rel {worst:e}");
        }
    }

    #[test]
    fn untabulated_orders_fall_through_exactly() {
        for &(n, z) in &[(1u32, 0.5), (1, 12.0), (17, 3.0), (6, 14.0), (6, 80.0)] {
            assert_eq!(integer_profile(n, z), reference_profile(n, z));
        }
    }

    #[test]
    fn profile_is_a_correlation_shape() {
        // φ_n(0+) → 1 and decreases toward 0; spot-check monotone decay.
        for n in [2u32, 6] {
            let near_zero = integer_profile(n, 1e-8);
            assert!((near_zero - 1.0).abs() < 1e-10, "φ_{n}(0+) = {near_zero}");
            let mut prev = near_zero;
            for k in 1..100 {
                let v = integer_profile(n, 0.13 * k as f64);
                assert!(v < prev, "not decreasing at z = {}", 0.13 * k as f64);
                prev = v;
            }
        }
    }
}
