//! Gamma function, Bessel functions of the first kind of real order ν ≥ 0,
//! their derivatives, and their positive zeros.
//!
//! Evaluation strategy: the defining power series up to the crossover
//! abscissa x = 12, and a large-argument (Hankel) expansion beyond it with
//! adaptive optimal truncation. Zeros are bracketed from two-sided bounds
//! on j_{ν,k}, then bisected and polished by Newton steps.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Crossover between the power series and the large-argument expansion.
pub const SERIES_CROSSOVER: f64 = 12.0;

const SQRT_2PI: f64 = 2.5066282746310002;
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Order of a Bessel function of the first kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::Domain(format!("Bessel order must be finite and >= 0, got {nu}")));
        }
        Ok(Self(nu))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Gamma function for positive arguments (Lanczos approximation, g = 7).
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    SQRT_2PI * t.powf(z + 0.5) * (-t).exp() * acc
}

/// J_ν(x) by the defining power series. Reliable for x up to the crossover;
/// beyond it, alternating-term cancellation erodes the result.
pub fn bessel_j_series(order: BesselOrder, x: f64) -> f64 {
    let nu = order.get();
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let q = half * half;
    let mut term = half.powf(nu) / gamma_unchecked(nu + 1.0);
    let mut sum = term;
    let mut scale = sum.abs();
    for k in 0..400usize {
        let kf = k as f64;
        term *= -q / ((kf + 1.0) * (kf + 1.0 + nu));
        sum += term;
        scale = scale.max(sum.abs());
        if term.abs() <= 1e-18 * (scale + term.abs()) {
            break;
        }
    }
    sum
}

/// J_ν(x) by the Hankel large-argument expansion, adaptively truncated at
/// the smallest term. Accurate once x exceeds the crossover.
pub fn bessel_j_asymptotic(order: BesselOrder, x: f64) -> f64 {
    let nu = order.get();
    let mu = 4.0 * nu * nu;
    let chi = x - (0.5 * nu + 0.25) * PI;
    // u_j = A_j / x^j with A_j = Π_{i<=j} (μ - (2i-1)^2) / (j! 8^j)
    let mut u = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut prev = f64::INFINITY;
    for j in 1..60usize {
        let jf = j as f64;
        u *= (mu - (2.0 * jf - 1.0).powi(2)) / (8.0 * jf * x);
        if u.abs() > prev && j > 8 {
            break; // optimal truncation: terms started to diverge
        }
        prev = u.abs();
        // signs: P = u0 - u2 + u4 - ..., Q = u1 - u3 + u5 - ...
        let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if j % 2 == 0 {
            p += sign * u;
        } else {
            q += sign * u;
        }
        if u.abs() < 1e-18 * (p.abs() + q.abs()) {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Bessel function of the first kind J_ν(x), x ≥ 0.
pub fn bessel_j(order: BesselOrder, x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j requires x >= 0, got {x}")));
    }
    if x <= SERIES_CROSSOVER {
        Ok(bessel_j_series(order, x))
    } else {
        Ok(bessel_j_asymptotic(order, x))
    }
}

/// Derivative J'_ν(x) via the exact recurrences
/// `J'_ν = J_{ν-1} - (ν/x) J_ν` (ν ≥ 1) and `J'_ν = (ν/x) J_ν - J_{ν+1}`.
pub fn bessel_j_prime(order: BesselOrder, x: f64) -> Result<f64> {
    let nu = order.get();
    if x < 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j_prime requires x > 0, got {x}")));
    }
    if x == 0.0 {
        return match nu {
            n if n < 1.0 => Err(Error::Domain(
                "bessel_j_prime is singular at x = 0 for order < 1".into(),
            )),
            n if n == 1.0 => Ok(0.5),
            _ => Ok(0.0),
        };
    }
    if nu >= 1.0 {
        let jm = bessel_j(BesselOrder(nu - 1.0), x)?;
        let j = bessel_j(order, x)?;
        Ok(jm - nu / x * j)
    } else {
        let j = bessel_j(order, x)?;
        let jp = bessel_j(BesselOrder(nu + 1.0), x)?;
        Ok(nu / x * j - jp)
    }
}

/// Two-sided bracket for the k-th positive zero j_{ν,k}.
///
/// For ν ∈ [0, 1/2]: (k + ν/2 - 1/4)π ≤ j_{ν,k} ≤ (k + ν/4 - 1/8)π,
/// and the two bounds swap roles for ν ≥ 1/2.
#[derive(Debug, Clone, Copy)]
pub struct ZeroBracket {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
}

impl ZeroBracket {
    pub fn for_order(order: BesselOrder, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("zero index k must be >= 1".into()));
        }
        let nu = order.get();
        let kf = k as f64;
        let a = (kf + 0.5 * nu - 0.25) * PI;
        let b = (kf + 0.25 * nu - 0.125) * PI;
        let (lower, upper) = if nu <= 0.5 { (a, b) } else { (b, a) };
        Ok(Self { k, lower, upper })
    }
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisect `[lo, hi]` (with a sign change) to width 1e-4, then Newton-polish
/// to residual 1e-12.
fn refine_zero(order: BesselOrder, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut flo = bessel_j(order, lo)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = bessel_j(order, hi)?;
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::Numerical(format!(
            "no sign change in bracket [{lo}, {hi}] for order {}",
            order.get()
        )));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        let fm = bessel_j(order, mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm * flo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..60 {
        let f = bessel_j(order, x)?;
        if f.abs() <= 1e-12 {
            return Ok(x);
        }
        let fp = bessel_j_prime(order, x)?;
        if fp == 0.0 {
            break;
        }
        let step = f / fp;
        let mut next = x - step;
        if next <= lo || next >= hi {
            next = 0.5 * (lo + hi); // fall back toward the bracket
        }
        if bessel_j(order, next)? * flo < 0.0 {
            hi = next;
        } else {
            lo = next;
        }
        if (next - x).abs() <= 1e-13 * x.abs() && f.abs() <= 1e-10 {
            return Ok(next);
        }
        x = next;
    }
    let f = bessel_j(order, x)?;
    if f.abs() <= 1e-9 {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "Newton refinement stalled at x = {x}, residual {f:.3e}, order {}",
            order.get()
        )))
    }
}

/// First `k_max` positive zeros of J_ν, strictly increasing.
///
/// For ν ≤ 1/2 each paper bracket isolates its zero. For ν > 1/2 brackets
/// can contain several zeros, so zeros are located sequentially using the
/// nonincreasing-spacing property (consecutive gaps > π).
pub fn bessel_zeros(order: BesselOrder, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Ok(Vec::new());
    }
    let nu = order.get();
    if (nu - 0.5).abs() < 1e-14 {
        // J_{1/2} ∝ sin: zeros exactly at kπ
        return Ok((1..=k_max).map(|k| k as f64 * PI).collect());
    }
    let mut zeros = Vec::with_capacity(k_max);
    if nu < 0.5 {
        for k in 1..=k_max {
            let br = ZeroBracket::for_order(order, k)?;
            zeros.push(refine_zero(order, br.lower, br.upper)?);
        }
        return Ok(zeros);
    }
    // ν > 1/2: scan forward for each sign change
    let mut start = ZeroBracket::for_order(order, 1)?.lower;
    let step = 0.25 * PI;
    for k in 1..=k_max {
        // hard upper bound from the bracket, padded 5%
        let cap = ZeroBracket::for_order(order, k)?.upper * 1.05;
        let mut a = start;
        let mut fa = bessel_j(order, a)?;
        // nudge off an exact or near zero at the scan start
        if fa.abs() < 1e-13 {
            a += 1e-6;
            fa = bessel_j(order, a)?;
        }
        let mut found = None;
        let mut b = a;
        for _ in 0..10_000 {
            b += step;
            let fb = bessel_j(order, b)?;
            if sign_of(fa) != sign_of(fb) {
                found = Some((a, b));
                break;
            }
            a = b;
            fa = fb;
            if a > cap {
                break;
            }
        }
        let (lo, hi) = found.ok_or_else(|| {
            Error::Numerical(format!(
                "zero {k} of J_{nu} not found scanning up to {cap:.6} (start {start:.6})"
            ))
        })?;
        let z = refine_zero(order, lo, hi)?;
        zeros.push(z);
        // next zero lies at least (almost) π further along
        start = z + 0.999 * PI;
    }
    Ok(zeros)
}

/// The k-th positive zero j_{ν,k}.
pub fn bessel_zero(order: BesselOrder, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("zero index k must be >= 1".into()));
    }
    let nu = order.get();
    if nu < 0.5 || (nu - 0.5).abs() < 1e-14 {
        Ok(bessel_zeros(order, k)?[k - 1])
    } else {
        // sequential scan needs the previous zeros
        Ok(*bessel_zeros(order, k)?.last().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    /// Oracle: Γ(x) from the defining integral by adaptive quadrature.
    fn gamma_integral_oracle(x: f64) -> f64 {
        let upper = (8.0 * x).max(80.0);
        quad::integrate(|t| t.powf(x - 1.0) * (-t).exp(), 1e-300, upper, 1e-13, 1e-290)
            .expect("gamma oracle quadrature")
    }

    /// Oracle: first zero of J_0 by plain bisection on the power series.
    fn j0_first_zero_bisection_oracle() -> f64 {
        let nu = BesselOrder::new(0.0).unwrap();
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bessel_j_series(nu, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gamma_trivial_values() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 24.0 * 1e-13);
    }

    #[test]
    fn gamma_half_matches_integral_oracle() {
        let oracle = gamma_integral_oracle(0.5);
        assert!((oracle - PI.sqrt()).abs() < 1e-10); // sanity on the oracle itself
        let v = gamma(0.5).unwrap();
        assert!(((v - oracle) / oracle).abs() < 1e-12, "Γ(1/2) = {v} vs oracle {oracle}");
    }

    #[test]
    fn gamma_relative_error_on_range() {
        for &x in &[0.5, 0.75, 1.0, 1.5, 2.5, 3.7, 5.0, 8.0, 13.0, 21.0, 34.0, 50.0] {
            let v = gamma(x).unwrap();
            let o = gamma_integral_oracle(x);
            assert!(
                ((v - o) / o).abs() < 1e-12,
                "x = {x}: gamma {v:e} vs oracle {o:e}"
            );
        }
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
    }

    #[test]
    fn bessel_j_at_zero_argument() {
        let j0 = BesselOrder::new(0.0).unwrap();
        let j1 = BesselOrder::new(1.0).unwrap();
        assert_eq!(bessel_j(j0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(j1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // J_{1/2}(x) = sqrt(2/(πx)) sin x
        let nu = BesselOrder::new(0.5).unwrap();
        for &x in &[0.3, 1.0, PI / 2.0, 4.0, 11.0, 14.0, 60.0, 300.0] {
            let exact = (2.0 / (PI * x)).sqrt() * x.sin();
            let v = bessel_j(nu, x).unwrap();
            assert!(
                (v - exact).abs() < 1e-12 + 1e-11 * exact.abs(),
                "x = {x}: {v} vs {exact}"
            );
        }
        let v = bessel_j(nu, PI / 2.0).unwrap();
        assert!((v - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn bessel_first_zero_of_j0() {
        let oracle = j0_first_zero_bisection_oracle();
        let nu = BesselOrder::new(0.0).unwrap();
        assert!(bessel_j(nu, oracle).unwrap().abs() <= 1e-10);
        let z = bessel_zero(nu, 1).unwrap();
        assert!((z - oracle).abs() < 1e-10, "zero {z} vs oracle {oracle}");
    }

    #[test]
    fn crossover_continuity() {
        for &nu in &[0.0, 0.5, 1.0] {
            let order = BesselOrder::new(nu).unwrap();
            let s = bessel_j_series(order, SERIES_CROSSOVER);
            let a = bessel_j_asymptotic(order, SERIES_CROSSOVER);
            assert!(
                (s - a).abs() <= 1e-9,
                "ν = {nu}: series {s:e} vs asymptotic {a:e}"
            );
        }
    }

    #[test]
    fn prime_matches_central_difference() {
        let h = 1e-6;
        for &(nu, x) in &[(0.0, 1.0), (0.3, 2.2), (1.0, 5.0), (2.5, 17.0), (0.5, PI)] {
            let order = BesselOrder::new(nu).unwrap();
            let fd = (bessel_j(order, x + h).unwrap() - bessel_j(order, x - h).unwrap()) / (2.0 * h);
            let v = bessel_j_prime(order, x).unwrap();
            assert!((v - fd).abs() < 1e-8, "ν = {nu}, x = {x}: {v} vs fd {fd}");
        }
        // J'_0 = -J_1, checked at x = 1
        let v = bessel_j_prime(BesselOrder::new(0.0).unwrap(), 1.0).unwrap();
        let j1 = bessel_j(BesselOrder::new(1.0).unwrap(), 1.0).unwrap();
        assert!((v + j1).abs() < 1e-13);
        assert!((v + 0.4400505857449335).abs() < 1e-10);
    }

    #[test]
    fn prime_half_order_closed_form_at_pi() {
        // d/dx [sqrt(2/(πx)) sin x] at x = π: sin π = 0, so J'_{1/2}(π) = -sqrt(2/π²)·...
        let x = PI;
        let exact = (2.0 / (PI * x)).sqrt() * x.cos() - 0.5 * (2.0 / (PI * x * x * x)).sqrt() * x.sin();
        let v = bessel_j_prime(BesselOrder::new(0.5).unwrap(), x).unwrap();
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn prime_domain_error_at_zero_small_order() {
        assert!(bessel_j_prime(BesselOrder::new(0.3).unwrap(), 0.0).is_err());
        assert_eq!(bessel_j_prime(BesselOrder::new(1.0).unwrap(), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn half_order_zeros_are_k_pi() {
        let nu = BesselOrder::new(0.5).unwrap();
        assert!((bessel_zero(nu, 3).unwrap() - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zeros_within_paper_brackets_nu_03() {
        let order = BesselOrder::new(0.3).unwrap();
        let zeros = bessel_zeros(order, 50).unwrap();
        for (i, &z) in zeros.iter().enumerate() {
            let br = ZeroBracket::for_order(order, i + 1).unwrap();
            assert!(
                br.lower <= z && z <= br.upper,
                "k = {}: {z} outside [{}, {}]",
                i + 1,
                br.lower,
                br.upper
            );
        }
    }

    #[test]
    fn zero_simplicity_across_orders() {
        for &nu in &[0.0, 0.25, 1.0 / 3.0, 0.5, 1.0] {
            let order = BesselOrder::new(nu).unwrap();
            let zeros = bessel_zeros(order, 200).unwrap();
            for &z in &zeros {
                let d = bessel_j_prime(order, z).unwrap().abs();
                assert!(d >= 1e-8, "ν = {nu}: |J'({z})| = {d:e}");
            }
        }
    }

    #[test]
    fn spacing_monotonicity() {
        // ν in [0, 1/2]: gaps nondecreasing toward π; ν >= 1/2: nonincreasing
        for &nu in &[0.0, 0.3] {
            let zeros = bessel_zeros(BesselOrder::new(nu).unwrap(), 120).unwrap();
            let mut prev_gap = 0.0;
            for w in zeros.windows(2) {
                let gap = w[1] - w[0];
                assert!(gap >= prev_gap - 1e-9, "ν = {nu}: gap decreased");
                prev_gap = gap;
            }
            assert!((prev_gap - PI).abs() < 1e-3);
        }
        for &nu in &[1.0, 9.0] {
            let zeros = bessel_zeros(BesselOrder::new(nu).unwrap(), 120).unwrap();
            let mut prev_gap = f64::INFINITY;
            for w in zeros.windows(2) {
                let gap = w[1] - w[0];
                assert!(gap <= prev_gap + 1e-9, "ν = {nu}: gap increased");
                assert!(gap > PI - 1e-9);
                prev_gap = gap;
            }
        }
    }

    #[test]
    fn high_order_zeros_against_integral_oracle() {
        // For integer order, J_n(x) = (1/π) ∫_0^π cos(x sin θ - nθ) dθ.
        // The located zeros of J_9 must be zeros of that integral too.
        let order = BesselOrder::new(9.0).unwrap();
        let zeros = bessel_zeros(order, 6).unwrap();
        let oracle = |x: f64| {
            quad::integrate(|th| (x * th.sin() - 9.0 * th).cos(), 0.0, PI, 1e-12, 1e-13)
                .unwrap()
                / PI
        };
        for (i, &z) in zeros.iter().enumerate() {
            // value vanishes and the slope there is of normal size, so z is
            // within ~1e-9 of the oracle's zero
            let v = oracle(z);
            let slope = (oracle(z + 1e-6) - oracle(z - 1e-6)) / 2e-6;
            assert!(
                (v / slope).abs() < 1e-9,
                "k = {}: oracle offset {:e}",
                i + 1,
                v / slope
            );
            let br = ZeroBracket::for_order(order, i + 1).unwrap();
            assert!(br.lower <= z && z <= br.upper, "k = {} bracket", i + 1);
        }
    }

    #[test]
    fn weighted_orthogonality_of_scaled_bessel() {
        // ∫_0^1 x^{1-α} J_ν(j_k x^κ) J_ν(j_m x^κ) dx = δ_{km} J'_ν(j_k)² / (2κ),
        // checked via the substitution x = s^{1/κ}.
        for &alpha in &[0.5, 1.5] {
            let nu_val = (1.0 - alpha as f64).abs() / (2.0 - alpha);
            let kappa = (2.0 - alpha) / 2.0;
            let order = BesselOrder::new(nu_val).unwrap();
            let zeros = bessel_zeros(order, 4).unwrap();
            for k in 0..4 {
                for m in 0..=k {
                    let v = quad::integrate(
                        |s| {
                            s * bessel_j(order, zeros[k] * s).unwrap()
                                * bessel_j(order, zeros[m] * s).unwrap()
                        },
                        0.0,
                        1.0,
                        1e-11,
                        1e-13,
                    )
                    .unwrap()
                        / kappa;
                    if k == m {
                        let jp = bessel_j_prime(order, zeros[k]).unwrap();
                        let exact = jp * jp / (2.0 * kappa);
                        assert!((v - exact).abs() < 1e-8, "diag k = {k}: {v} vs {exact}");
                    } else {
                        assert!(v.abs() < 1e-8, "offdiag ({k}, {m}): {v}");
                    }
                }
            }
        }
    }
}
