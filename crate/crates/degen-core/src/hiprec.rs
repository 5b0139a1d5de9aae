//! High-precision evaluation of restriction-Gram spectra.
//!
//! Everything is built on the gamma-free series
//! `Ĵ_ν(x) = Σ_k (-1)^k x^{2k} / (4^k k! (ν+1)_k)`, which shares its zeros
//! with J_ν. The normalized eigenfunction on (0, 1) becomes
//! `φ_i(y) = √(2κ)/|Ĵ'_ν(j_i)| · y^c · Ĵ_ν(j_i y^κ)` with
//! `c = max(1-α, 0)`, removing every gamma factor and boundary-singular
//! power from the pipeline.

use crate::bigfloat::Big;
use crate::special::{bessel_zeros, BesselOrder};
use crate::spectrum::DegeneracyExponent;
use crate::{Error, Result};
use rayon::prelude::*;

/// Series evaluator for one order ν with cached term reciprocals
/// 1 / (4 (k+1) (k+1+ν)).
struct HatSeries {
    recips: Vec<Big>,
    nu: f64,
}

const MAX_TERMS: usize = 420;

impl HatSeries {
    fn new(nu: f64) -> Self {
        let nu_big = Big::from_f64(nu);
        let recips = (0..MAX_TERMS)
            .map(|k| {
                let kp1 = Big::from_u64(k as u64 + 1);
                kp1.mul(kp1.add(nu_big)).mul_i64(4).recip()
            })
            .collect();
        Self { recips, nu }
    }

    /// Ĵ_ν(x) and its derivative Ĵ'_ν(x).
    fn eval_with_derivative(&self, x: Big) -> (Big, Big) {
        let x2 = x.mul(x);
        let mut term = Big::from_u64(1);
        let mut sum = term;
        let mut dsum = Big::ZERO; // Σ 2k x^{2k-1} coef: assembled as (d/dx)
        let mut peak_exp = sum_exp(&sum);
        let x_recip = if x.is_zero() { Big::ZERO } else { x.recip() };
        for (k, r) in self.recips.iter().enumerate() {
            term = term.mul(x2).mul(*r).neg();
            sum = sum.add(term);
            // derivative term: 2(k+1) x^{2(k+1)-1} · coef_{k+1}
            let dterm = term.mul_i64(2 * (k as i64 + 1)).mul(x_recip);
            dsum = dsum.add(dterm);
            peak_exp = peak_exp.max(sum_exp(&term));
            if sum_exp(&term) < peak_exp - 64 * 11 {
                break;
            }
        }
        (sum, dsum)
    }

    fn eval(&self, x: Big) -> Big {
        let x2 = x.mul(x);
        let mut term = Big::from_u64(1);
        let mut sum = term;
        let mut peak_exp = sum_exp(&sum);
        for r in self.recips.iter() {
            term = term.mul(x2).mul(*r).neg();
            sum = sum.add(term);
            peak_exp = peak_exp.max(sum_exp(&term));
            if sum_exp(&term) < peak_exp - 64 * 11 {
                break;
            }
        }
        sum
    }
}

fn sum_exp(b: &Big) -> i64 {
    if b.is_zero() {
        i64::MIN / 2
    } else {
        b.exp_bits()
    }
}

/// High-precision positive zeros of Ĵ_ν (same as of J_ν), refined from the
/// double-precision seeds by Newton steps.
fn zeros_hiprec(series: &HatSeries, count: usize) -> Result<Vec<Big>> {
    let seeds = bessel_zeros(BesselOrder::new(series.nu)?, count)?;
    Ok(seeds
        .into_iter()
        .map(|seed| {
            let mut x = Big::from_f64(seed);
            for _ in 0..4 {
                let (f, df) = series.eval_with_derivative(x);
                x = x.sub(f.div(df));
            }
            x
        })
        .collect())
}

/// 32-point Gauss-Legendre nodes and weights on [-1, 1] at high precision.
fn gauss_legendre_32() -> Vec<(Big, Big)> {
    let n = 32usize;
    // f64 seeds by Newton from the Chebyshev-like initial guess
    let legendre = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };
    let legendre_big = |x: Big| -> (Big, Big) {
        let one = Big::from_u64(1);
        let (mut p0, mut p1) = (one, x);
        for k in 2..=n {
            let a = Big::from_u64(2 * k as u64 - 1);
            let b = Big::from_u64(k as u64 - 1);
            let inv_k = Big::from_u64(k as u64).recip();
            let p2 = a.mul(x).mul(p1).sub(b.mul(p0)).mul(inv_k);
            p0 = p1;
            p1 = p2;
        }
        let dp = Big::from_u64(n as u64)
            .mul(x.mul(p1).sub(p0))
            .mul(x.mul(x).sub(one).recip());
        (p1, dp)
    };
    (1..=n / 2)
        .flat_map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            for _ in 0..20 {
                let (p, dp) = legendre(x);
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let mut xb = Big::from_f64(x);
            for _ in 0..4 {
                let (p, dp) = legendre_big(xb);
                xb = xb.sub(p.div(dp));
            }
            let (_, dp) = legendre_big(xb);
            let one = Big::from_u64(1);
            let w = Big::from_u64(2).div(one.sub(xb.mul(xb)).mul(dp).mul(dp));
            // symmetric pair (nodes come out positive here)
            [(xb.neg(), w), (xb, w)]
        })
        .collect()
}

/// One diagnostic point: J, λ_J, σ_min (0 when it underflows f64) and
/// -log σ_min.
#[derive(Debug, Clone, Copy)]
pub struct SigmaPoint {
    pub j: usize,
    pub lambda_j: f64,
    pub sigma_min: f64,
    pub minus_log_sigma_min: f64,
}

/// Smallest eigenvalues of the leading restriction-Gram blocks
/// G_J = (∫_ω φ_i φ_j dy)_{i,j ≤ J} for each requested J, computed entirely
/// in ~190-digit arithmetic.
pub fn window_gram_sigma(alpha: f64, omega: (f64, f64), j_list: &[usize]) -> Result<Vec<SigmaPoint>> {
    let (a, b) = omega;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::Domain(format!("window ({a}, {b}) must satisfy 0 <= a < b <= 1")));
    }
    if j_list.is_empty() || j_list.windows(2).any(|w| w[0] >= w[1]) || j_list[0] == 0 {
        return Err(Error::Domain("J list must be nonempty, positive, increasing".into()));
    }
    let exp = DegeneracyExponent::new(alpha)?;
    let j_max = *j_list.last().unwrap();
    let kappa = exp.kappa();
    let c_pow = (1.0 - alpha).max(0.0);
    let series = HatSeries::new(exp.nu());
    let zeros = zeros_hiprec(&series, j_max)?;
    let lambdas: Vec<f64> =
        zeros.iter().map(|z| (kappa * z.to_f64()).powi(2)).collect();

    // normalization: ∫_0^1 φ_raw² dy = Ĵ'(j_i)²/(2κ) with φ_raw = y^c Ĵ(j y^κ)
    let scale: Vec<Big> = zeros
        .iter()
        .map(|&z| {
            let (_, dj) = series.eval_with_derivative(z);
            Big::from_f64(2.0 * kappa).sqrt().div(dj.abs())
        })
        .collect();

    // composite Gauss-Legendre on (a, b): panel phase kept near one radian
    let phase_rate = zeros[j_max - 1].to_f64() * kappa * a.max(1e-6).powf(kappa - 1.0);
    let panels = (((b - a) * phase_rate / 1.2).ceil() as usize).max(8);
    let gl = gauss_legendre_32();
    let half = Big::from_f64((b - a) / (2.0 * panels as f64));
    // per-node values of every normalized eigenfunction
    let node_data: Vec<(Big, Vec<Big>)> = (0..panels)
        .into_par_iter()
        .flat_map_iter(|p| {
            let x0 = a + (b - a) * p as f64 / panels as f64;
            let center = Big::from_f64(x0).add(half);
            gl.iter()
                .map(|&(xi, wi)| {
                    let y = center.add(half.mul(xi));
                    let ln_y = y.ln();
                    let y_kappa = ln_y.mul(Big::from_f64(kappa)).exp();
                    let weight_fac = if c_pow == 0.0 {
                        Big::from_u64(1)
                    } else {
                        ln_y.mul(Big::from_f64(2.0 * c_pow)).exp()
                    };
                    let w = wi.mul(half).mul(weight_fac);
                    let vals: Vec<Big> = zeros
                        .iter()
                        .zip(scale.iter())
                        .map(|(&z, &s)| series.eval(z.mul(y_kappa)).mul(s))
                        .collect();
                    (w, vals)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    // assemble the full Gram once
    let mut gram = vec![Big::ZERO; j_max * j_max];
    for (w, vals) in &node_data {
        for i in 0..j_max {
            let wv = w.mul(vals[i]);
            for j in 0..=i {
                gram[i * j_max + j] = gram[i * j_max + j].add(wv.mul(vals[j]));
            }
        }
    }
    for i in 0..j_max {
        for j in i + 1..j_max {
            gram[i * j_max + j] = gram[j * j_max + i];
        }
    }

    let points: Vec<SigmaPoint> = j_list
        .par_iter()
        .map(|&jn| {
            let mut sub = vec![Big::ZERO; jn * jn];
            for i in 0..jn {
                for j in 0..jn {
                    sub[i * jn + j] = gram[i * j_max + j];
                }
            }
            let eigs = jacobi_eigenvalues(&mut sub, jn);
            let sigma = eigs
                .into_iter()
                .min_by(|x, y| {
                    x.to_f64()
                        .partial_cmp(&y.to_f64())
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| {
                            if x.gt_mag(y) {
                                std::cmp::Ordering::Greater
                            } else {
                                std::cmp::Ordering::Less
                            }
                        })
                })
                .unwrap_or(Big::ZERO);
            let minus_log = if sigma.is_zero() || sigma.to_f64() < 0.0 {
                f64::INFINITY
            } else {
                -sigma.ln().to_f64()
            };
            SigmaPoint {
                j: jn,
                lambda_j: lambdas[jn - 1],
                sigma_min: sigma.to_f64().max(0.0),
                minus_log_sigma_min: minus_log,
            }
        })
        .collect();
    Ok(points)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.
fn jacobi_eigenvalues(mat: &mut [Big], n: usize) -> Vec<Big> {
    if n == 1 {
        return vec![mat[0]];
    }
    let idx = |i: usize, j: usize| i * n + j;
    let one = Big::from_u64(1);
    let half = Big::from_f64(0.5);
    for _sweep in 0..60 {
        // largest off-diagonal magnitude, exponent-based
        let mut off_exp = i64::MIN / 2;
        let mut diag_exp = i64::MIN / 2;
        for i in 0..n {
            diag_exp = diag_exp.max(sum_exp(&mat[idx(i, i)]));
            for j in 0..i {
                off_exp = off_exp.max(sum_exp(&mat[idx(i, j)]));
            }
        }
        if off_exp < diag_exp - 64 * 10 - 40 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = mat[idx(p, q)];
                if apq.is_zero() || sum_exp(&apq) < diag_exp - 64 * 10 - 60 {
                    continue;
                }
                let app = mat[idx(p, p)];
                let aqq = mat[idx(q, q)];
                let tau = aqq.sub(app).mul(half).mul(apq.recip());
                // t = sign(τ)/(|τ| + sqrt(1+τ²))
                let t_abs = tau.abs().add(one.add(tau.mul(tau)).sqrt()).recip();
                let t = if tau.to_f64() < 0.0 { t_abs.neg() } else { t_abs };
                let c = one.add(t.mul(t)).sqrt().recip();
                let s = t.mul(c);
                // update rows/columns p and q
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = mat[idx(k, p)];
                    let akq = mat[idx(k, q)];
                    let new_kp = c.mul(akp).sub(s.mul(akq));
                    let new_kq = s.mul(akp).add(c.mul(akq));
                    mat[idx(k, p)] = new_kp;
                    mat[idx(p, k)] = new_kp;
                    mat[idx(k, q)] = new_kq;
                    mat[idx(q, k)] = new_kq;
                }
                let t_apq = t.mul(apq);
                mat[idx(p, p)] = app.sub(t_apq);
                mat[idx(q, q)] = aqq.add(t_apq);
                mat[idx(p, q)] = Big::ZERO;
                mat[idx(q, p)] = Big::ZERO;
            }
        }
    }
    (0..n).map(|i| mat[idx(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre_32();
        // ∫_{-1}^{1} x^62 dx = 2/63, the highest degree a 32-point rule nails
        let mut acc = Big::ZERO;
        for &(x, w) in &gl {
            acc = acc.add(w.mul(x.abs().powf(62.0)));
        }
        let exact = 2.0 / 63.0;
        assert!(
            ((acc.to_f64() - exact) / exact).abs() < 1e-12,
            "got {}",
            acc.to_f64()
        );
        let wsum: f64 = gl.iter().map(|&(_, w)| w.to_f64()).sum();
        assert!((wsum - 2.0).abs() < 1e-25);
    }

    #[test]
    fn hat_series_matches_f64_bessel() {
        // Ĵ_ν(x) = J_ν(x) Γ(ν+1) (2/x)^ν
        let nu = 1.0 / 3.0;
        let series = HatSeries::new(nu);
        let order = BesselOrder::new(nu).unwrap();
        for &x in &[0.5, 2.0, 7.0, 11.5] {
            let j = crate::special::bessel_j(order, x).unwrap();
            let gamma = crate::special::gamma(nu + 1.0).unwrap();
            let expect = j * gamma * (2.0 / x).powf(nu);
            let got = series.eval(Big::from_f64(x)).to_f64();
            assert!(
                ((got - expect) / expect).abs() < 1e-16 + 1e-12,
                "x = {x}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn hiprec_zeros_match_f64() {
        let series = HatSeries::new(0.5);
        let zeros = zeros_hiprec(&series, 3).unwrap();
        for (k, z) in zeros.iter().enumerate() {
            let expect = (k + 1) as f64 * std::f64::consts::PI;
            assert!((z.to_f64() - expect).abs() < 1e-16 * expect);
        }
    }

    #[test]
    fn jacobi_small_matrix() {
        // eigenvalues of [[2, 1], [1, 2]] are 1 and 3
        let mut m = vec![
            Big::from_u64(2),
            Big::from_u64(1),
            Big::from_u64(1),
            Big::from_u64(2),
        ];
        let mut eigs: Vec<f64> = jacobi_eigenvalues(&mut m, 2).iter().map(|e| e.to_f64()).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eigs[0] - 1.0).abs() < 1e-14);
        assert!((eigs[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn full_window_gram_is_identity_hiprec() {
        let pts = window_gram_sigma(0.5, (0.0, 1.0), &[1, 3, 5]).unwrap();
        for p in &pts {
            assert!((p.sigma_min - 1.0).abs() < 1e-10, "J = {}: {}", p.j, p.sigma_min);
        }
    }

    #[test]
    fn matches_f64_gram_in_measurable_range() {
        // compare against the double-precision restriction Gram at small J
        let basis = crate::solver1d::Basis1d::new(
            DegeneracyExponent::new(0.5).unwrap(),
            8,
        )
        .unwrap();
        let f64_gram = crate::lr2d::restriction_gram(&basis, (0.3, 0.7), 8).unwrap();
        let pts = window_gram_sigma(0.5, (0.3, 0.7), &[4, 8]).unwrap();
        // J = 4 σ_min is ~1e-4: both paths must agree well
        let sub = f64_gram.matrix.view((0, 0), (4, 4)).into_owned();
        let sig4 = sub
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(
            ((pts[0].sigma_min - sig4) / sig4).abs() < 1e-6,
            "hiprec {} vs f64 {}",
            pts[0].sigma_min,
            sig4
        );
    }
}
