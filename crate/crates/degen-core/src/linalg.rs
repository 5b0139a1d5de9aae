//! Dense complex linear algebra helpers: matrix exponential, eigenvalues of
//! small matrices, Jordan structure, spectral projectors, rank decisions and
//! equilibrated solves with iterative refinement.

use crate::{CMatrix, Error, Result, C64};

const PADE13_B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371920351148152;

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling-and-squaring with a degree-13 Padé
/// approximant.
pub fn matrix_exp(a: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), a.ncols(), "matrix_exp requires a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * C64::new(0.5f64.powi(s), 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |i: usize| C64::new(PADE13_B[i], 0.0);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .expect("Padé denominator is singular; matrix norm too extreme");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Characteristic polynomial coefficients (monic, ascending order:
/// c[0] + c[1] λ + ... + λ^n) by the Faddeev-LeVerrier recursion.
fn char_poly(a: &CMatrix) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let mut m = CMatrix::identity(n, n);
    for k in 1..=n {
        let am = a * &m;
        let c = -am.trace() / C64::new(k as f64, 0.0);
        coeffs[n - k] = c;
        m = am + CMatrix::identity(n, n) * c;
    }
    coeffs
}

fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// All eigenvalues of a small complex matrix (n ≤ ~10).
///
/// Closed forms for n ≤ 2, Durand-Kerner simultaneous iteration on the
/// characteristic polynomial otherwise.
pub fn eigenvalues(a: &CMatrix) -> Vec<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    match n {
        0 => Vec::new(),
        1 => vec![a[(0, 0)]],
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let disc = (tr * tr - det * C64::new(4.0, 0.0)).sqrt();
            vec![(tr + disc) * 0.5, (tr - disc) * 0.5]
        }
        _ => {
            let coeffs = char_poly(a);
            durand_kerner(&coeffs)
        }
    }
}

fn durand_kerner(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    // radius bound on the roots
    let radius = 1.0
        + coeffs[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..n)
        .map(|i| seed.powu(i as u32 + 1) * C64::new(radius, 0.0) * 0.5)
        .collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // perturb coincident iterates
                z[i] += C64::new(1e-8 * radius, 1e-8 * radius);
                continue;
            }
            let step = poly_eval(coeffs, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    z
}

/// Cluster eigenvalues that agree within `tol`, returning
/// `(representative, algebraic multiplicity)` pairs.
pub fn cluster_eigenvalues(eigs: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for &e in eigs {
        if let Some((c, m)) = clusters
            .iter_mut()
            .find(|(c, _)| (*c - e).norm() <= tol * (1.0 + c.norm().max(e.norm())))
        {
            // running mean keeps the representative centered
            *c = (*c * C64::new(*m as f64, 0.0) + e) / C64::new((*m + 1) as f64, 0.0);
            *m += 1;
        } else {
            clusters.push((e, 1));
        }
    }
    clusters
}

/// Numerical rank by singular values above `tol_rel * σ_max`.
pub fn svd_rank(m: &CMatrix, tol_rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Spectral condition number σ_max / σ_min.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Jordan data of one eigenvalue cluster.
#[derive(Debug, Clone)]
pub struct JordanBlockInfo {
    pub eigenvalue: C64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Maximal Jordan chain length for this eigenvalue.
    pub chain: usize,
}

/// Eigenvalue clusters of `a` with geometric multiplicities and maximal
/// chain lengths, clustering eigenvalues within `tol`.
pub fn jordan_structure(a: &CMatrix, tol: f64) -> Vec<JordanBlockInfo> {
    let n = a.nrows();
    let eigs = eigenvalues(a);
    let clusters = cluster_eigenvalues(&eigs, tol);
    let id = CMatrix::identity(n, n);
    clusters
        .into_iter()
        .map(|(mu, alg)| {
            if alg == 1 {
                return JordanBlockInfo { eigenvalue: mu, algebraic: 1, geometric: 1, chain: 1 };
            }
            let shifted = a - &id * mu;
            let mut power = shifted.clone();
            let mut prev_rank = svd_rank(&power, 1e-10);
            let geometric = n - prev_rank;
            let mut chain = 1;
            for _ in 1..alg {
                power = &power * &shifted;
                let r = svd_rank(&power, 1e-10);
                if r == prev_rank {
                    break;
                }
                prev_rank = r;
                chain += 1;
            }
            JordanBlockInfo { eigenvalue: mu, algebraic: alg, geometric, chain }
        })
        .collect()
}

/// Spectral projectors onto the generalized eigenspaces of `a`, one per
/// cluster, via Hermite interpolation of the indicator function.
///
/// Returns matrices `P_l` with `Σ P_l = I` and `P_l P_j = δ_{lj} P_l`.
pub fn spectral_projectors(a: &CMatrix, blocks: &[JordanBlockInfo]) -> Vec<CMatrix> {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    blocks
        .iter()
        .enumerate()
        .map(|(l, bl)| {
            if blocks.len() == 1 {
                return id.clone();
            }
            // g_l(z) = Π_{j≠l} (z - a_j)^{m_j} as ascending coefficients
            let mut g = vec![C64::new(1.0, 0.0)];
            for (j, bj) in blocks.iter().enumerate() {
                if j == l {
                    continue;
                }
                for _ in 0..bj.algebraic {
                    let mut next = vec![C64::new(0.0, 0.0); g.len() + 1];
                    for (i, &c) in g.iter().enumerate() {
                        next[i + 1] += c;
                        next[i] -= c * bj.eigenvalue;
                    }
                    g = next;
                }
            }
            // Taylor coefficients of g_l around a_l by repeated synthetic division
            let order = bl.algebraic;
            let mut taylor = Vec::with_capacity(order);
            let mut poly = g.clone();
            for _ in 0..order {
                // divide poly by (z - a_l): remainder is the next coefficient
                let mut rem = C64::new(0.0, 0.0);
                for c in poly.iter_mut().rev() {
                    let tmp = *c;
                    *c = rem;
                    rem = rem * bl.eigenvalue + tmp;
                }
                taylor.push(rem);
                poly.pop();
                if poly.is_empty() {
                    break;
                }
            }
            while taylor.len() < order {
                taylor.push(C64::new(0.0, 0.0));
            }
            // power-series inverse of g_l at a_l, truncated to `order` terms
            let g0 = taylor[0];
            let mut inv = vec![C64::new(0.0, 0.0); order];
            inv[0] = C64::new(1.0, 0.0) / g0;
            for k in 1..order {
                let mut s = C64::new(0.0, 0.0);
                for i in 1..=k {
                    s += taylor.get(i).copied().unwrap_or_else(|| C64::new(0.0, 0.0)) * inv[k - i];
                }
                inv[k] = -s / g0;
            }
            // P_l = g_l(A) · Σ_k inv[k] (A - a_l I)^k
            let mut g_of_a = id.clone();
            for (j, bj) in blocks.iter().enumerate() {
                if j == l {
                    continue;
                }
                let factor = a - &id * bj.eigenvalue;
                for _ in 0..bj.algebraic {
                    g_of_a = &g_of_a * &factor;
                }
            }
            let nmat = a - &id * bl.eigenvalue;
            let mut h_of_a = CMatrix::zeros(n, n);
            let mut npow = id.clone();
            for c in inv.iter().take(order) {
                h_of_a += &npow * *c;
                npow = &npow * &nmat;
            }
            &g_of_a * &h_of_a
        })
        .collect()
}

/// Solve `G X = B` via an equilibrated full-pivot LU with iterative
/// refinement. Returns `(X, condition estimate of the equilibrated matrix)`.
pub fn solve_refined(g: &CMatrix, b: &CMatrix) -> Result<(CMatrix, f64)> {
    let n = g.nrows();
    if n != g.ncols() || b.nrows() != n {
        return Err(Error::Domain("solve_refined: dimension mismatch".into()));
    }
    // symmetric diagonal equilibration
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = g[(i, i)].norm();
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let gs = CMatrix::from_fn(n, n, |i, j| g[(i, j)] * C64::new(d[i] * d[j], 0.0));
    let cond = condition_number(&gs);
    let lu = gs.clone().full_piv_lu();
    let solve_scaled = |rhs: &CMatrix| -> Result<CMatrix> {
        // G X = R  <=>  (D G D) (D^{-1} X) = D R
        let rs = CMatrix::from_fn(n, rhs.ncols(), |i, j| rhs[(i, j)] * C64::new(d[i], 0.0));
        let ys = lu
            .solve(&rs)
            .ok_or_else(|| Error::Numerical("singular Gram matrix".into()))?;
        Ok(CMatrix::from_fn(n, rhs.ncols(), |i, j| {
            ys[(i, j)] * C64::new(d[i], 0.0)
        }))
    };
    let mut x = solve_scaled(b)?;
    let mut best_res = f64::INFINITY;
    for _ in 0..4 {
        let r = b - g * &x;
        let res = one_norm(&r);
        if !res.is_finite() || res >= best_res {
            break;
        }
        best_res = res;
        if res == 0.0 {
            break;
        }
        let dx = solve_scaled(&r)?;
        x += dx;
    }
    Ok((x, cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: usize, cols: usize, vals: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(
            rows,
            cols,
            &vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn exp_of_diagonal() {
        let a = cm(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let e = matrix_exp(&a);
        assert!((e[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-14);
        assert!((e[(1, 1)].re - 2.0f64.exp()).abs() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn exp_of_jordan_block() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        let a = cm(2, 2, &[-0.7, 1.0, 0.0, -0.7]);
        let e = matrix_exp(&a);
        let ea = (-0.7f64).exp();
        assert!((e[(0, 0)].re - ea).abs() < 1e-14);
        assert!((e[(0, 1)].re - ea).abs() < 1e-14);
        assert!((e[(1, 1)].re - ea).abs() < 1e-14);
    }

    #[test]
    fn exp_of_stiff_diagonal_uses_scaling() {
        let a = cm(1, 1, &[-1400.0]);
        let e = matrix_exp(&a);
        assert!(e[(0, 0)].re.abs() < 1e-300);
        let b = cm(1, 1, &[30.0]);
        let eb = matrix_exp(&b);
        assert!(((eb[(0, 0)].re - 30f64.exp()) / 30f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn exp_rotation_is_unitary() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, 2.0),
                C64::new(0.0, 2.0),
                C64::new(0.0, 0.0),
            ],
        );
        let e = matrix_exp(&a);
        // exp of i·2·σ_x: cos(2) I + i sin(2) σ_x
        assert!((e[(0, 0)].re - 2.0f64.cos()).abs() < 1e-13);
        assert!((e[(0, 1)].im - 2.0f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn eigenvalues_of_companion_like() {
        let a = cm(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, -3.0]);
        let mut eigs = eigenvalues(&a);
        eigs.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((eigs[0].re + 3.0).abs() < 1e-8);
        assert!((eigs[1].re - 2.0).abs() < 1e-6);
        assert!((eigs[2].re - 2.0).abs() < 1e-6);
    }

    #[test]
    fn jordan_structure_detects_chain() {
        let a = cm(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let bl = jordan_structure(&a, 1e-8);
        assert_eq!(bl.len(), 1);
        assert_eq!(bl[0].algebraic, 2);
        assert_eq!(bl[0].geometric, 1);
        assert_eq!(bl[0].chain, 2);

        let d = cm(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let bl = jordan_structure(&d, 1e-8);
        assert_eq!(bl.len(), 2);
        assert!(bl.iter().all(|b| b.chain == 1));
    }

    #[test]
    fn projectors_partition_identity() {
        let a = cm(3, 3, &[2.0, 1.0, 0.3, 0.0, 2.0, 0.0, 0.0, 0.2, -3.0]);
        let blocks = jordan_structure(&a, 1e-6);
        let ps = spectral_projectors(&a, &blocks);
        let mut sum = CMatrix::zeros(3, 3);
        for p in &ps {
            sum += p;
        }
        assert!((&sum - CMatrix::identity(3, 3)).norm() < 1e-8);
        for (i, p) in ps.iter().enumerate() {
            assert!((p * p - p).norm() < 1e-7, "projector {i} not idempotent");
        }
    }

    #[test]
    fn refined_solve_reaches_residual_floor() {
        // The achievable residual of G X - I in f64 is of order eps·cond.
        let n = 8;
        let g = CMatrix::from_fn(n, n, |i, j| {
            C64::new(1.0 / ((i + 1) as f64 + (j + 1) as f64), 0.0)
        });
        let (x, cond) = solve_refined(&g, &CMatrix::identity(n, n)).unwrap();
        let res = (&g * &x - CMatrix::identity(n, n)).norm();
        assert!(cond > 1e6, "Hilbert-like matrix should be ill-conditioned");
        assert!(res < 50.0 * f64::EPSILON * cond, "residual {res} vs cond {cond:e}");

        let w = CMatrix::from_fn(n, n, |i, j| {
            C64::new(if i == j { 3.0 } else { 0.0 }, 0.0) + C64::new(0.1, 0.05 * (i + j) as f64)
        });
        let (x, _) = solve_refined(&w, &CMatrix::identity(n, n)).unwrap();
        let res = (&w * &x - CMatrix::identity(n, n)).norm();
        assert!(res < 1e-13, "well-conditioned residual {res}");
    }
}
