//! Modified Bessel functions of the second kind, K_n(z), for the integer and
//! half-integer orders the Matérn kernel needs.
//!
//! K₀ and K₁ are evaluated by the ascending series (A&S 9.6.13/9.6.11) below
//! `SERIES_ASYMPTOTIC_CROSSOVER` and by the large-argument expansion
//! (A&S 9.7.2) above it. The series suffers catastrophic cancellation between
//! its logarithmic and power parts (relative error grows like ε·e^{2z}), so it
//! is accumulated in double-double arithmetic; plain f64 would lose eight
//! digits by z = 13. Higher integer orders use the upward recurrence
//! K_{n+1}(z) = K_{n-1}(z) + (2n/z)·K_n(z), which is stable for K because the
//! values grow with order and all terms share a sign.
//!
//! Half-integer orders are exact finite expressions seeded by
//! K_{1/2}(z) = √(π/(2z))·e^{-z} and the same recurrence.

use std::f64::consts::PI;

/// Largest z handled by the double-double series; above it the asymptotic
/// expansion's optimally truncated error is below 1e-12 relative.
pub const SERIES_ASYMPTOTIC_CROSSOVER: f64 = 13.0;

const MAX_SERIES_TERMS: usize = 120;

/// Euler–Mascheroni constant as a double-double pair
/// (0.57721566490153286060651209008240243104...).
const EULER_GAMMA: Dd = Dd {
    hi: 0.5772156649015329,
    lo: -4.942915152430645e-18,
};

/// ln 2 as a double-double pair.
const LN_2: Dd = Dd {
    hi: 0.6931471805599453,
    lo: 2.3190468138462996e-17,
};

/// Modified Bessel function of the second kind, K₀(z), z > 0.
pub fn bessel_k0(z: f64) -> f64 {
    debug_assert!(!(z <= 0.0));
    if z <= SERIES_ASYMPTOTIC_CROSSOVER {
        k0_series(z)
    } else {
        k_asymptotic(0, z)
    }
}

/// Modified Bessel function of the second kind, K₁(z), z > 0.
pub fn bessel_k1(z: f64) -> f64 {
    debug_assert!(!(z <= 0.0));
    if z <= SERIES_ASYMPTOTIC_CROSSOVER {
        k1_series(z)
    } else {
        k_asymptotic(1, z)
    }
}

/// K_n(z) for integer order n ≥ 0, z > 0.
pub fn bessel_k_int(n: u32, z: f64) -> f64 {
    match n {
        0 => bessel_k0(z),
        1 => bessel_k1(z),
        _ => recurrence_up(bessel_k0(z), bessel_k1(z), 1, n, z),
    }
}

/// K_{n+1/2}(z) for n ≥ 0, z > 0, from the exact K_{1/2} seed.
pub fn bessel_k_half(n: u32, z: f64) -> f64 {
    debug_assert!(!(z <= 0.0));
    let k_half = (PI / (2.0 * z)).sqrt() * (-z).exp();
    if n == 0 {
        return k_half;
    }
    let k_three_half = k_half * (1.0 + 1.0 / z);
    if n == 1 {
        return k_three_half;
    }
    // Recurrence over half-integer orders: K_{v+1} = K_{v-1} + (2v/z)·K_v
    // starting at v = 3/2.
    let mut km1 = k_half;
    let mut k = k_three_half;
    let mut v = 1.5;
    for _ in 1..n {
        let kp1 = km1 + (2.0 * v / z) * k;
        km1 = k;
        k = kp1;
        v += 1.0;
    }
    k
}

fn recurrence_up(k_nm1: f64, k_n: f64, n_start: u32, n_target: u32, z: f64) -> f64 {
    let mut km1 = k_nm1;
    let mut k = k_n;
    for n in n_start..n_target {
        let kp1 = km1 + (2.0 * f64::from(n) / z) * k;
        km1 = k;
        k = kp1;
    }
    k
}

/// K₀(z) = −(ln(z/2)+γ)·I₀(z) + Σ_{k≥1} h_k·(z²/4)^k/(k!)², h_k = Σ_{i≤k} 1/i.
fn k0_series(z: f64) -> f64 {
    let q = two_prod(z, z).scale(0.25);
    let c = dd_ln(0.5 * z).add(EULER_GAMMA);

    let mut term = Dd::from(1.0); // (z²/4)^k / (k!)²
    let mut i0 = Dd::from(1.0);
    let mut harmonic = Dd::from(0.0);
    let mut hsum = Dd::from(0.0);
    for k in 1..=MAX_SERIES_TERMS {
        let kf = k as f64;
        term = term.mul(q).div_f64(kf * kf);
        harmonic = harmonic.add(dd_recip(kf));
        i0 = i0.add(term);
        hsum = hsum.add(harmonic.mul(term));
        if term.hi < i0.hi * 1e-35 {
            break;
        }
    }
    hsum.sub(c.mul(i0)).to_f64()
}

/// K₁(z) = 1/z + (ln(z/2)+γ)·I₁(z) − (z/4)·Σ_{k≥0}(h_k+h_{k+1})·(z²/4)^k/(k!(k+1)!).
fn k1_series(z: f64) -> f64 {
    let q = two_prod(z, z).scale(0.25);
    let c = dd_ln(0.5 * z).add(EULER_GAMMA);

    let mut term = Dd::from(1.0); // (z²/4)^k / (k!·(k+1)!)
    let mut i1_sum = term; // I₁(z)·2/z
    let mut harmonic = Dd::from(0.0); // h_k
    let mut harmonic_next = Dd::from(1.0); // h_{k+1}
    let mut coeff_sum = harmonic_next.mul(term); // Σ (h_k + h_{k+1})·term_k
    for k in 1..=MAX_SERIES_TERMS {
        let kf = k as f64;
        term = term.mul(q).div_f64(kf * (kf + 1.0));
        harmonic = harmonic.add(dd_recip(kf));
        harmonic_next = harmonic_next.add(dd_recip(kf + 1.0));
        i1_sum = i1_sum.add(term);
        coeff_sum = coeff_sum.add(harmonic.add(harmonic_next).mul(term));
        if term.hi < i1_sum.hi * 1e-35 {
            break;
        }
    }
    let inv_z = dd_recip(z);
    let log_part = c.mul(i1_sum).scale(0.5 * z);
    let power_part = coeff_sum.scale(0.25 * z);
    inv_z.add(log_part).sub(power_part).to_f64()
}

/// Optimally truncated large-argument expansion (A&S 9.7.2):
/// K_n(z) ≈ √(π/(2z))·e^{−z}·Σ_k a_k, a_k = a_{k−1}·(4n²−(2k−1)²)/(8kz).
fn k_asymptotic(n: u32, z: f64) -> f64 {
    let mu = 4.0 * f64::from(n) * f64::from(n);
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut prev_abs = f64::INFINITY;
    for k in 1..=60 {
        let kf = k as f64;
        let factor = (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * z);
        term *= factor;
        if term.abs() >= prev_abs {
            break; // divergence onset: stop at the smallest term
        }
        sum += term;
        prev_abs = term.abs();
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

// ---------------------------------------------------------------------------
// Double-double arithmetic: an unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2,
// giving ~32 significant digits. Only the handful of operations the K series
// need are implemented.

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

/// Error-free sum: hi + lo = a + b exactly.
fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

/// Error-free sum assuming |a| ≥ |b|.
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

/// Error-free product via fused multiply-add.
fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: f64::mul_add(a, b, -p),
    }
}

/// 1/d to double-double accuracy.
fn dd_recip(d: f64) -> Dd {
    let q = 1.0 / d;
    let r = f64::mul_add(-q, d, 1.0) / d;
    quick_two_sum(q, r)
}

impl Dd {
    fn from(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        quick_two_sum(s.hi, s.lo + self.lo + o.lo)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    /// Multiply by an exact power of two (or any f64 where two_prod suffices).
    fn scale(self, s: f64) -> Dd {
        let p = two_prod(self.hi, s);
        quick_two_sum(p.hi, p.lo + self.lo * s)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let r = self.sub(two_prod(q1, d));
        let q2 = (r.hi + r.lo) / d;
        quick_two_sum(q1, q2)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// exp(x) to double-double accuracy via 2^k reduction and Taylor series.
fn dd_exp(x: Dd) -> Dd {
    let k = (x.hi / LN_2.hi).round();
    let t = x.sub(LN_2.scale(k));
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for j in 1..40 {
        term = term.mul(t).div_f64(f64::from(j));
        sum = sum.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
    }
    let scale = 2.0_f64.powi(k as i32);
    Dd {
        hi: sum.hi * scale,
        lo: sum.lo * scale,
    }
}

/// ln(a) to double-double accuracy: one Newton step r ← r₀ + (a·e^{−r₀} − 1)
/// − (a·e^{−r₀} − 1)²/2 squares the f64 seed's error away.
fn dd_ln(a: f64) -> Dd {
    debug_assert!(!(a <= 0.0));
    let r0 = a.ln();
    let delta = dd_exp(Dd::from(-r0)).scale(a).add(Dd::from(-1.0));
    let correction = delta.sub(delta.mul(delta).scale(0.5));
    Dd::from(r0).add(correction)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 60 decimal digits.
    const K0_REFS: &[(f64, f64)] = &[
        (1e-6, 13.93144207362641941344),
        (0.01, 4.721244730161094965136),
        (0.5, 0.9244190712276658617819),
        (1.0, 0.4210244382407083333356),
        (2.0, 0.1138938727495334356527),
        (5.0, 0.003691098334042594274735),
        (9.5, 3.005788495793433538403e-5),
        (13.0, 7.784543861420496320822e-7),
        (13.5, 4.634841671408217536572e-7),
        (20.0, 5.741237815336524292717e-10),
        (50.0, 3.410167749789495513921e-23),
        (200.0, 1.22568197977653345166e-88),
    ];

    const K1_REFS: &[(f64, f64)] = &[
        (1e-6, 999999.9999927842789632),
        (0.01, 99.97389411829624764304),
        (0.5, 1.656441120003300893696),
        (1.0, 0.6019072301972345747375),
        (2.0, 0.1398658818165224272846),
        (5.0, 0.004044613445452164208365),
        (9.5, 3.160203411042674560859e-5),
        (13.0, 8.078588412202347331819e-7),
        (13.5, 4.803535332788456136558e-7),
        (20.0, 5.88305796955703817765e-10),
        (50.0, 3.444102226717555612592e-23),
        (200.0, 1.228742373472985812045e-88),
    ];

    fn assert_rel(got: f64, want: f64, tol: f64, ctx: &str) {
        let rel = (got - want).abs() / want.abs();
        assert!(rel <= tol, "{ctx}: got {got:e}, want {want:e}, rel {rel:e}");
    }

    #[test]
    fn k0_matches_references() {
        for &(z, want) in K0_REFS {
            assert_rel(bessel_k0(z), want, 5e-13, &format!("K0({z})"));
        }
    }

    #[test]
    fn k1_matches_references() {
        for &(z, want) in K1_REFS {
            assert_rel(bessel_k1(z), want, 5e-13, &format!("K1({z})"));
        }
    }

    #[test]
    fn integer_orders_match_references() {
        let refs: &[(u32, f64, f64)] = &[
            (2, 1e-6, 1999999999999.5),
            (2, 0.5, 7.550183551240869436568),
            (2, 2.0, 0.2537597545660558629373),
            (2, 13.0, 9.027403617143934371871e-7),
            (3, 0.01, 7999900.001249882545677),
            (3, 1.0, 7.10126282473794450598),
            (3, 20.0, 7.148966692015483799747e-10),
            (6, 1e-6, 3.839999999999808e39),
            (6, 0.5, 242711.8346198382718167),
            (6, 2.0, 49.35116143039429553651),
            (6, 9.5, 1.748562851740573629833e-4),
            (6, 13.5, 1.651011791098672754833e-6),
            (6, 50.0, 4.868720702537540376085e-23),
            (8, 1.0, 622552.1229586677746407),
            (8, 13.0, 7.889110803315876111567e-6),
            (8, 200.0, 1.437748788045320486123e-88),
        ];
        for &(n, z, want) in refs {
            assert_rel(bessel_k_int(n, z), want, 1e-12, &format!("K{n}({z})"));
        }
    }

    #[test]
    fn half_integer_orders_match_references() {
        let refs: &[(u32, f64, f64)] = &[
            (0, 0.5, 1.075047603499920238723),
            (0, 2.0, 0.119937771968061447368),
            (0, 10.0, 1.799347809370517960812e-5),
            (1, 0.5, 3.225142810499760716168),
            (1, 2.0, 0.1799066579520921710521),
            (1, 10.0, 1.979282590307569756893e-5),
            (2, 0.5, 20.42590446649848453573),
            (2, 2.0, 0.3897977588961997039461),
            (5, 0.5, 52861.16571169457805824),
            (5, 2.0, 21.09030758950880513562),
            (5, 10.0, 7.330453007985021646448e-5),
        ];
        for &(n, z, want) in refs {
            assert_rel(
                bessel_k_half(n, z),
                want,
                1e-13,
                &format!("K{}+1/2({z})", n),
            );
        }
    }

    #[test]
    fn series_asymptotic_seam_is_smooth() {
        // No jump across the crossover: compare both regimes just inside
        // their shared validity band.
        for n in [0u32, 1] {
            let f = if n == 0 { bessel_k0 } else { bessel_k1 };
            let below = f(12.999999999);
            let above = f(13.000000001);
            let rel = (below - above).abs() / below.abs();
            assert!(rel < 1e-8, "K{n} seam jump {rel:e}");
        }
    }

    #[test]
    fn dd_ln_agrees_with_references() {
        // ln(2) from the series constant; ln(10) from mpmath.
        let l2 = dd_ln(2.0);
        assert!((l2.hi - LN_2.hi).abs() < 1e-16 && (l2.lo - LN_2.lo).abs() < 1e-30);
        let l10 = dd_ln(10.0);
        assert_rel(l10.hi, 2.302585092994046, 1e-15, "ln 10");
    }
}
