//! Biorthogonal families of generalized exponentials t^σ e^{-Λt} on (0, T)
//! and moment-method synthesis of 1-d null controls.
//!
//! The family biorthogonal to {f_i} inside span{f_i} is obtained from the
//! inverse of the Gram matrix G_{ij} = ∫_0^T f_i conj(f_j) dt; it is the
//! minimal-L²-norm biorthogonal family. Clustered exponents make G
//! exponentially ill-conditioned, so construction is refused above a
//! conditioning cap instead of silently losing precision.

use crate::dd::{Dd, DdMatrix, Ddc};
use crate::kalman::{check_controllability, CoupledSystem};
use crate::linalg::{
    condition_number, jordan_structure, matrix_exp, solve_refined, spectral_projectors,
};
use crate::solver1d::{norm_hm1_1d, Basis1d, ModalState1d, SampledControl};
use crate::{CMatrix, CVector, Error, Result, C64};

/// ∫_0^T t^a e^{-Λ_a t} · t^b e^{-conj(Λ_b) t} dt via the stable power
/// recurrence I_p = (p I_{p-1} - T^p e^{-sT}) / s with s = Λ_a + conj(Λ_b).
pub fn gram_entry(lambda_a: C64, a: usize, lambda_b: C64, b: usize, t_final: f64) -> Result<C64> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Domain("gram_entry needs a finite horizon T > 0".into()));
    }
    let s = lambda_a + lambda_b.conj();
    Ok(exp_power_integral(s, a + b, t_final))
}

/// I_p(s, T) = ∫_0^T t^p e^{-st} dt.
fn exp_power_integral(s: C64, p: usize, t: f64) -> C64 {
    if s.norm() * t < 1e-12 {
        // s ≈ 0: plain monomial integral with first-order correction
        let base = t.powi(p as i32 + 1) / (p as f64 + 1.0);
        return C64::new(base, 0.0) * (C64::new(1.0, 0.0) - s * t * (p as f64 + 1.0) / (p as f64 + 2.0));
    }
    let emst = (-s * t).exp();
    let mut ip = (C64::new(1.0, 0.0) - emst) / s;
    let mut tp = 1.0;
    for q in 1..=p {
        tp *= t;
        ip = (ip * q as f64 - emst * tp) / s;
    }
    ip
}

/// Moment system: generalized exponents with Jordan power budgets, a time
/// horizon, and per-channel targets for every (node, power) pair.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    /// (Λ, max_power) pairs; exponents pairwise distinct with Re Λ > 0.
    pub nodes: Vec<(C64, usize)>,
    pub t_horizon: f64,
    /// Targets, one row per flattened (node, power), one column per control
    /// channel: rhs[(i, q)] = ⟨g_q, t^σ e^{-Λ t}⟩.
    pub rhs: CMatrix,
}

impl MomentSystem {
    pub fn new(nodes: Vec<(C64, usize)>, t_horizon: f64, rhs: CMatrix) -> Result<Self> {
        if t_horizon <= 0.0 {
            return Err(Error::Domain("moment horizon must be positive".into()));
        }
        for (i, &(li, pi)) in nodes.iter().enumerate() {
            if pi == 0 {
                return Err(Error::Domain("node powers must be >= 1".into()));
            }
            if li.re <= 0.0 {
                return Err(Error::Domain(format!(
                    "moment node {i} has nonpositive real part {li}"
                )));
            }
            for &(lj, _) in nodes.iter().take(i) {
                if (li - lj).norm() <= 1e-9 {
                    return Err(Error::Domain(format!("moment nodes collide at {li}")));
                }
            }
        }
        let total: usize = nodes.iter().map(|&(_, p)| p).sum();
        if rhs.nrows() != total {
            return Err(Error::Domain("rhs length must equal the number of moments".into()));
        }
        Ok(Self { nodes, t_horizon, rhs })
    }

    /// Flattened basis: (Λ_i, σ) for σ = 0..max_power_i.
    pub fn flattened(&self) -> Vec<(C64, usize)> {
        self.nodes
            .iter()
            .flat_map(|&(l, p)| (0..p).map(move |s| (l, s)))
            .collect()
    }
}

/// Minimal-norm biorthogonal family expressed in the exponential basis.
#[derive(Debug, Clone)]
pub struct BiorthoFamily {
    /// Row i holds the coefficients of Ψ_i: Ψ_i = Σ_k coefficients[(i, k)] f_k.
    pub coefficients: CMatrix,
    pub gram: CMatrix,
    /// Condition estimate of the equilibrated Gram.
    pub cond_estimate: f64,
    /// ‖G · coefficientsᵀ - I‖_max, evaluated in the solver's precision.
    pub residual: f64,
    /// Flattened (Λ, power) basis labels.
    pub basis: Vec<(C64, usize)>,
    pub t_horizon: f64,
    /// Double-double inverse Gram (layout (k, i) = (G^{-1})_{ki}) when all
    /// exponents are real; carries the extra digits that downstream control
    /// evaluation needs.
    pub inverse_dd: Option<DdMatrix>,
}

impl BiorthoFamily {
    /// Evaluate Ψ_i at time t.
    pub fn psi_eval(&self, i: usize, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &(l, s)) in self.basis.iter().enumerate() {
            acc += self.coefficients[(i, k)] * C64::new(t.powi(s as i32), 0.0) * (-l * t).exp();
        }
        acc
    }

    /// ‖Ψ_i‖_{L²(0,T)}, exact through the Gram.
    pub fn psi_norm(&self, i: usize) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.basis.len() {
            for kp in 0..self.basis.len() {
                acc += self.coefficients[(i, k)]
                    * self.coefficients[(i, kp)].conj()
                    * self.gram[(k, kp)];
            }
        }
        acc.re.max(0.0).sqrt()
    }
}

/// Assemble the Gram of the flattened exponential family.
pub fn build_gram(nodes: &[(C64, usize)], t_final: f64) -> Result<CMatrix> {
    let basis: Vec<(C64, usize)> = nodes
        .iter()
        .flat_map(|&(l, p)| (0..p).map(move |s| (l, s)))
        .collect();
    let n = basis.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = gram_entry(basis[i].0, basis[i].1, basis[j].0, basis[j].1, t_final)?;
        }
    }
    Ok(g)
}

/// Double-double Gram of a real-exponent family.
fn build_gram_dd(nodes: &[(f64, usize)], t_final: f64) -> DdMatrix {
    let basis: Vec<(f64, usize)> = nodes
        .iter()
        .flat_map(|&(l, p)| (0..p).map(move |s| (l, s)))
        .collect();
    let n = basis.len();
    let t = Dd::from_f64(t_final);
    let mut g = DdMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = Dd::from_f64(basis[i].0).add(Dd::from_f64(basis[j].0));
            let p = basis[i].1 + basis[j].1;
            // I_p = (p I_{p-1} - T^p e^{-sT}) / s
            let emst = s.neg().mul(t).exp();
            let mut ip = Dd::ONE.sub(emst).div(s);
            let mut tp = Dd::ONE;
            for q in 1..=p {
                tp = tp.mul(t);
                ip = ip.mul_f64(q as f64).sub(emst.mul(tp)).div(s);
            }
            g[(i, j)] = ip;
            g[(j, i)] = ip;
        }
    }
    g
}

/// Precision of the Gram solve: double-double for real exponents, plain
/// f64 with refinement otherwise.
fn solver_epsilon(real_nodes: bool) -> f64 {
    if real_nodes {
        1e-28
    } else {
        f64::EPSILON
    }
}

/// Build the minimal-norm biorthogonal family.
///
/// Construction is refused when the equilibrated Gram condition exceeds
/// `cond_cap` or when the solver's precision cannot reach the 1e-8
/// biorthogonality residual required of accepted outputs; the refusal names
/// the largest admissible leading truncation.
pub fn build_biortho(ms: &MomentSystem, cond_cap: f64) -> Result<BiorthoFamily> {
    if cond_cap <= 1.0 {
        return Err(Error::Domain("conditioning cap must exceed 1".into()));
    }
    let basis = ms.flattened();
    let g = build_gram(&ms.nodes, ms.t_horizon)?;
    let n = basis.len();
    let real_nodes = ms.nodes.iter().all(|(l, _)| l.im.abs() <= 1e-14 * (1.0 + l.re.abs()));
    let effective_cap = cond_cap.min(1e-8 / solver_epsilon(real_nodes));
    let equilibrated_cond = |m: &CMatrix| {
        let nn = m.nrows();
        let d: Vec<f64> = (0..nn)
            .map(|i| {
                let v = m[(i, i)].norm();
                if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
            })
            .collect();
        let gs = CMatrix::from_fn(nn, nn, |i, j| m[(i, j)] * C64::new(d[i] * d[j], 0.0));
        condition_number(&gs)
    };
    if real_nodes {
        // Conditioning must be measured in the solver's own precision: an
        // f64 SVD saturates near cond ~ 1e15 (σ_min below roundoff reads as
        // zero), while the dd solve stays meaningful far beyond. Use the
        // equilibrated one-norm condition from the computed inverse.
        let nodes_r: Vec<(f64, usize)> = ms.nodes.iter().map(|&(l, p)| (l.re, p)).collect();
        let solve_dd = |trunc: usize| -> Option<(DdMatrix, DdMatrix, f64, f64)> {
            let g_dd = {
                let full = build_gram_dd(&nodes_r, ms.t_horizon);
                if trunc == n {
                    full
                } else {
                    let mut sub = DdMatrix::zeros(trunc, trunc);
                    for i in 0..trunc {
                        for j in 0..trunc {
                            sub[(i, j)] = full[(i, j)];
                        }
                    }
                    sub
                }
            };
            let inv = g_dd.solve(&DdMatrix::identity(trunc))?;
            // equilibrated one-norm condition: D G D and D^{-1} X D^{-1}
            let nn = trunc;
            let d: Vec<f64> = (0..nn)
                .map(|i| {
                    let v = g_dd[(i, i)].to_f64();
                    if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
                })
                .collect();
            let mut gs_norm = 0.0f64;
            let mut xs_norm = 0.0f64;
            for j in 0..nn {
                let mut cg = 0.0;
                let mut cx = 0.0;
                for i in 0..nn {
                    cg += (g_dd[(i, j)].to_f64() * d[i] * d[j]).abs();
                    cx += (inv[(i, j)].to_f64() / (d[i] * d[j])).abs();
                }
                gs_norm = gs_norm.max(cg);
                xs_norm = xs_norm.max(cx);
            }
            let cond = gs_norm * xs_norm;
            let residual = g_dd.identity_residual(&inv);
            Some((g_dd, inv, cond, residual))
        };
        let (_, inv_dd, cond, residual) = solve_dd(n)
            .ok_or_else(|| Error::Numerical("singular Gram matrix".into()))?;
        if !cond.is_finite() || cond > effective_cap || residual > 1e-8 {
            let mut admissible = 0;
            for trunc in (1..n).rev() {
                if let Some((_, _, c, r)) = solve_dd(trunc) {
                    if c <= effective_cap && r <= 1e-8 {
                        admissible = trunc;
                        break;
                    }
                }
            }
            return Err(Error::Conditioning { cond, cap: effective_cap, admissible });
        }
        let coefficients =
            CMatrix::from_fn(n, n, |i, k| C64::new(inv_dd[(k, i)].to_f64(), 0.0));
        Ok(BiorthoFamily {
            coefficients,
            gram: g,
            cond_estimate: cond,
            residual,
            basis,
            t_horizon: ms.t_horizon,
            inverse_dd: Some(inv_dd),
        })
    } else {
        let cond = equilibrated_cond(&g);
        if !cond.is_finite() || cond > effective_cap {
            let mut admissible = 0;
            for trunc in (1..n).rev() {
                let sub = g.view((0, 0), (trunc, trunc)).into_owned();
                if equilibrated_cond(&sub) <= effective_cap {
                    admissible = trunc;
                    break;
                }
            }
            return Err(Error::Conditioning { cond, cap: effective_cap, admissible });
        }
        let (inv, _) = solve_refined(&g, &CMatrix::identity(n, n))?;
        let residual = (&g * &inv - CMatrix::identity(n, n))
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if residual > 1e-8 {
            return Err(Error::Conditioning { cond, cap: effective_cap, admissible: 0 });
        }
        // rows give Ψ_i = Σ_k C_{ik} f_k with ⟨Ψ_i, f_j⟩ = Σ_k C_{ik} G_{kj}
        let coefficients = inv.transpose();
        Ok(BiorthoFamily {
            coefficients,
            gram: g,
            cond_estimate: cond,
            residual,
            basis,
            t_horizon: ms.t_horizon,
            inverse_dd: None,
        })
    }
}

/// Decomposition e^{A_eff s} B = Σ_{l,σ} s^σ e^{a_l s} W_{l,σ} over the
/// eigenvalue clusters a_l of A_eff (W includes the 1/σ! factor).
struct ExpDecomposition {
    /// Per cluster: (a_l, τ_l, [W_{l,0}, …, W_{l,τ_l-1}]).
    clusters: Vec<(C64, usize, Vec<CMatrix>)>,
}

fn exp_decomposition(sys: &CoupledSystem) -> ExpDecomposition {
    let a = sys.a_eff();
    let n = sys.states();
    let blocks = jordan_structure(a, 1e-8);
    let projectors = spectral_projectors(a, &blocks);
    let id = CMatrix::identity(n, n);
    let clusters = blocks
        .iter()
        .zip(projectors.iter())
        .map(|(bl, p)| {
            let nil = (a - &id * bl.eigenvalue) * p;
            let mut ws = Vec::with_capacity(bl.chain);
            let mut pow = p.clone();
            let mut fact = 1.0;
            for s in 0..bl.chain {
                if s > 0 {
                    pow = &nil * &pow;
                    fact *= s as f64;
                }
                ws.push(&pow * sys.control_matrix() / C64::new(fact, 0.0));
            }
            (bl.eigenvalue, bl.chain, ws)
        })
        .collect();
    ExpDecomposition { clusters }
}

/// Moment nodes for modes k = 1..K: Λ_{k,l} = λ_k - μ_l with μ_l = conj(a_l)
/// the eigenvalues of A_eff*, each carrying the chain length τ_l.
pub fn moment_nodes(sys: &CoupledSystem, lambdas: &[f64], k_modes: usize) -> Result<Vec<(C64, usize, usize, usize)>> {
    let decomp = exp_decomposition(sys);
    let mut nodes = Vec::new(); // (Λ, power, k, l)
    for k in 0..k_modes {
        for (l, (a_l, tau, _)) in decomp.clusters.iter().enumerate() {
            let node = C64::new(lambdas[k], 0.0) - a_l.conj();
            nodes.push((node, *tau, k, l));
        }
    }
    for (i, &(li, ..)) in nodes.iter().enumerate() {
        if li.re <= 0.0 {
            return Err(Error::Domain(format!(
                "moment exponent {li} has nonpositive real part; shift the coupling matrix"
            )));
        }
        for &(lj, ..) in nodes.iter().take(i) {
            if (li - lj).norm() <= 1e-9 {
                return Err(Error::Numerical(
                    "colliding moment exponents; the Kalman condition excludes this for \
                     single-channel systems, refusing synthesis"
                        .into(),
                ));
            }
        }
    }
    Ok(nodes)
}

/// Moment targets driving every retained mode of `w0` to zero at T.
///
/// For each spatial mode k the vector condition
/// `Σ_{l,σ} W_{l,σ} m_{k,l,σ} = -e^{(-λ_k I + A_eff)T} c_k / o_k`
/// is solved for the per-channel moments m; the trace reciprocal 1/o_k is
/// exactly the weight prescribed by the boundary observation.
pub fn moment_rhs(
    sys: &CoupledSystem,
    lambdas: &[f64],
    traces: &[f64],
    w0: &ModalState1d,
    t_final: f64,
) -> Result<CMatrix> {
    let n = sys.states();
    let mcount = sys.controls();
    let k_modes = w0.len();
    let decomp = exp_decomposition(sys);
    let n_powers: usize = decomp.clusters.iter().map(|c| c.1).sum();
    // W_stack: n x (m * Σ τ_l), columns grouped per (l, σ)
    let mut w_stack = CMatrix::zeros(n, mcount * n_powers);
    {
        let mut col = 0;
        for (_, tau, ws) in &decomp.clusters {
            for s in 0..*tau {
                w_stack.view_mut((0, col * mcount), (n, mcount)).copy_from(&ws[s]);
                col += 1;
            }
        }
    }
    let id = CMatrix::identity(n, n);
    let svd = w_stack.clone().svd(true, true);
    let mut rhs = CMatrix::zeros(k_modes * n_powers, mcount);
    for k in 0..k_modes {
        if traces[k] <= 0.0 {
            return Err(Error::Numerical(format!("nonpositive observation trace at mode {}", k + 1)));
        }
        let m_k = sys.a_eff() - &id * C64::new(lambdas[k], 0.0);
        let target = matrix_exp(&(&m_k * C64::new(t_final, 0.0))) * &w0.coeffs[k]
            * C64::new(-1.0 / traces[k], 0.0);
        // minimal-norm solve W_stack · m = target (square and invertible for
        // single-channel controllable systems)
        let tm = CMatrix::from_fn(n, 1, |r, _| target[r]);
        let sol = svd
            .solve(&tm, 1e-12)
            .map_err(|e| Error::Numerical(format!("moment target solve failed: {e}")))?;
        for (row_l, _sigma, col) in flat_power_indices(&decomp) {
            for q in 0..mcount {
                rhs[(k * n_powers + row_l, q)] = sol[(col * mcount + q, 0)];
            }
        }
    }
    Ok(rhs)
}

/// Index helper: flattened (cluster, power) -> (row offset within a mode,
/// sigma, column group).
fn flat_power_indices(decomp: &ExpDecomposition) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut row = 0;
    let mut col = 0;
    for (_, tau, _) in &decomp.clusters {
        for s in 0..*tau {
            out.push((row, s, col));
            row += 1;
            col += 1;
        }
    }
    out
}

/// Diagnostics accompanying a synthesized control.
#[derive(Debug, Clone)]
pub struct SynthesisDiagnostics {
    pub l2_norm: f64,
    pub cond: f64,
    pub residual: f64,
    /// Free-decay bound e^{-λ_{K+1} T} on untargeted modes.
    pub tail_bound: f64,
    pub nodes: usize,
}

/// Options for [`synthesize_control`].
#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub cond_cap: f64,
    pub min_samples: usize,
    pub rank_tol: f64,
    /// Skip the Kalman gate (used by the 2-d loop, which checks once).
    pub skip_controllability_check: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { cond_cap: 1e18, min_samples: 1025, rank_tol: 1e-9, skip_controllability_check: false }
    }
}

/// Synthesize the null control for the retained modes from explicit spectral
/// data (eigenvalues and observation traces). Returns the sampled control
/// and diagnostics; the modal state driven by it has all retained modes
/// zeroed up to the biorthogonality residual.
pub fn synthesize_control_shifted(
    sys: &CoupledSystem,
    lambdas: &[f64],
    traces: &[f64],
    w0: &ModalState1d,
    t_final: f64,
    opts: &SynthesisOptions,
) -> Result<(SampledControl, SynthesisDiagnostics)> {
    let k_modes = w0.len();
    if k_modes == 0 || lambdas.len() < k_modes {
        return Err(Error::Domain("need eigenvalues for every retained mode".into()));
    }
    if !opts.skip_controllability_check {
        let verdict = check_controllability(sys, lambdas, k_modes, opts.rank_tol)?;
        if !verdict.overall {
            let (at, rank) = verdict.first_failure.unwrap_or((0, 0));
            return Err(Error::Controllability(format!(
                "Kalman rank condition fails at k = {at} (rank {rank} < {}), synthesis refused",
                sys.states() * at
            )));
        }
    }
    let nodes4 = moment_nodes(sys, lambdas, k_modes)?;
    let nodes: Vec<(C64, usize)> = nodes4.iter().map(|&(l, p, _, _)| (l, p)).collect();
    let rhs = moment_rhs(sys, lambdas, traces, w0, t_final)?;
    let ms = MomentSystem::new(nodes, t_final, rhs)?;
    let family = build_biortho(&ms, opts.cond_cap)?;

    // g_q = Σ_i rhs[i][q] Ψ_i satisfies ⟨g_q, f_i⟩ = rhs_i; then
    // h(t) = -g(T - t) nulls the retained modes under the forward solver's
    // sign convention. In the exponential basis the coefficients of g are
    // β = G^{-1} rhs, carried in double-double where available: the β are
    // huge and nearly cancelling, so f64 evaluation would lose the layer.
    let basis_len = family.basis.len();
    let mcount = sys.controls();
    let beta_dd: Vec<Vec<Ddc>> = match &family.inverse_dd {
        Some(inv) => (0..basis_len)
            .map(|k| {
                (0..mcount)
                    .map(|q| {
                        let mut acc = Ddc::ZERO;
                        for i in 0..basis_len {
                            acc = acc.add(Ddc::from_c64(ms.rhs[(i, q)]).mul_dd(inv[(k, i)]));
                        }
                        acc
                    })
                    .collect()
            })
            .collect(),
        None => (0..basis_len)
            .map(|k| {
                (0..mcount)
                    .map(|q| {
                        let mut acc = C64::new(0.0, 0.0);
                        for i in 0..basis_len {
                            acc += family.coefficients[(i, k)] * ms.rhs[(i, q)];
                        }
                        Ddc::from_c64(acc)
                    })
                    .collect()
            })
            .collect(),
    };
    let beta = CMatrix::from_fn(basis_len, mcount, |k, q| beta_dd[k][q].to_c64());
    // exact L² norm of g through the Gram
    let mut norm_sq = 0.0;
    for q in 0..mcount {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..basis_len {
            for kp in 0..basis_len {
                acc += beta[(k, q)] * beta[(kp, q)].conj() * family.gram[(k, kp)];
            }
        }
        norm_sq += acc.re.max(0.0);
    }
    let real_nodes = family.inverse_dd.is_some();
    let eval_g = |s: f64| -> CVector {
        let mut v = vec![Ddc::ZERO; mcount];
        if real_nodes {
            let s_dd = Dd::from_f64(s);
            for (k, &(l, p)) in family.basis.iter().enumerate() {
                let mut f = Dd::from_f64(-l.re).mul(s_dd).exp();
                for _ in 0..p {
                    f = f.mul(s_dd);
                }
                for q in 0..mcount {
                    v[q] = v[q].add(beta_dd[k][q].mul_dd(f));
                }
            }
        } else {
            for (k, &(l, p)) in family.basis.iter().enumerate() {
                let f = Ddc::from_c64(C64::new(s.powi(p as i32), 0.0) * (-l * s).exp());
                for q in 0..mcount {
                    v[q] = v[q].add(beta_dd[k][q].mul(f));
                }
            }
        }
        CVector::from_fn(mcount, |q, _| v[q].to_c64())
    };
    // Sampling density: the control has a boundary layer of width ~1/Λ_max
    // (at s = 0, i.e. t = T after reversal) whose cubic-interpolation error
    // is measured empirically at interval midpoints and refined until the
    // induced modal residual stays below 1e-9 relative.
    let lam_max = nodes4.iter().map(|&(l, _, _, _)| l.re).fold(0.0, f64::max);
    let hm1_weight = traces
        .iter()
        .zip(lambdas.iter())
        .take(k_modes)
        .map(|(&o, &l)| o * o / (l * l * l))
        .sum::<f64>()
        .sqrt();
    let w0_scale = w0
        .coeffs
        .iter()
        .zip(lambdas.iter())
        .map(|(c, &l)| c.norm_squared() / l)
        .sum::<f64>()
        .sqrt();
    // 100x margin below the 1e-6 end-to-end contract
    let tol_abs = 1e-8 * w0_scale.max(1e-300) / hm1_weight.max(1e-300);
    let mut samples = opts
        .min_samples
        .max((20.0 * lam_max * t_final).ceil() as usize + 1)
        .max(2);
    // fast grid evaluation of g by running products of e^{-λ Δs}
    let grid_eval = |s_count: usize| -> Vec<CVector> {
        let ds = t_final / (s_count - 1) as f64;
        let mut out = vec![vec![Ddc::ZERO; mcount]; s_count];
        if real_nodes {
            for (k, &(l, p)) in family.basis.iter().enumerate() {
                let factor = Dd::from_f64(-l.re * ds).exp();
                let mut run = Dd::ONE;
                for (i, row) in out.iter_mut().enumerate() {
                    if run.hi == 0.0 {
                        break;
                    }
                    let mut f = run;
                    if p > 0 {
                        let s_dd = Dd::from_f64(i as f64 * ds);
                        for _ in 0..p {
                            f = f.mul(s_dd);
                        }
                    }
                    for q in 0..mcount {
                        row[q] = row[q].add(beta_dd[k][q].mul_dd(f));
                    }
                    run = run.mul(factor);
                }
            }
        } else {
            for (i, row) in out.iter_mut().enumerate() {
                let s = i as f64 * ds;
                for (k, &(l, p)) in family.basis.iter().enumerate() {
                    let f = Ddc::from_c64(C64::new(s.powi(p as i32), 0.0) * (-l * s).exp());
                    for q in 0..mcount {
                        row[q] = row[q].add(beta_dd[k][q].mul(f));
                    }
                }
            }
        }
        out.into_iter()
            .map(|row| CVector::from_fn(mcount, |q, _| row[q].to_c64()))
            .collect()
    };
    let values: Vec<CVector> = loop {
        let g_samples = grid_eval(samples);
        let probe = SampledControl::new(t_final, g_samples.clone())?;
        let dt = probe.dt;
        // midpoints of the layer intervals plus a coarse stride elsewhere
        let mut err: f64 = 0.0;
        let layer = 256.min(samples - 1);
        let mut check = |i: usize| {
            let t_mid = (i as f64 + 0.5) * dt;
            let e = (probe.eval(t_mid) - eval_g(t_mid)).norm();
            if e > err {
                err = e;
            }
        };
        for i in 0..layer {
            check(i);
        }
        let stride = ((samples - 1) / 61).max(1);
        let mut i = layer;
        while i < samples - 1 {
            check(i);
            i += stride;
        }
        if err <= tol_abs || samples >= 400_000 || w0_scale == 0.0 {
            // h(t_i) = -g(T - t_i): the reversed, negated sample set
            break g_samples.into_iter().rev().map(|v| -v).collect();
        }
        samples *= 2;
    };
    let control = SampledControl::new(t_final, values)?;
    let tail_bound = if lambdas.len() > k_modes {
        (-lambdas[k_modes] * t_final).exp()
    } else {
        0.0
    };
    let diag = SynthesisDiagnostics {
        l2_norm: norm_sq.sqrt(),
        cond: family.cond_estimate,
        residual: family.residual,
        tail_bound,
        nodes: basis_len,
    };
    Ok((control, diag))
}

/// Null-control synthesis in the 1-d basis (boundary control at x = 0).
pub fn synthesize_control(
    basis: &Basis1d,
    sys: &CoupledSystem,
    w0: &ModalState1d,
    k_modes: usize,
    t_final: f64,
    opts: &SynthesisOptions,
) -> Result<(SampledControl, SynthesisDiagnostics)> {
    if k_modes > basis.len() || k_modes > w0.len() {
        return Err(Error::Domain("k_modes exceeds available data".into()));
    }
    let lambdas = basis.eigenvalues();
    let traces: Vec<f64> = basis.modes.iter().map(|m| m.obs_trace).collect();
    let truncated = ModalState1d::new(w0.coeffs[..k_modes].to_vec());
    synthesize_control_shifted(sys, &lambdas, &traces, &truncated, t_final, opts)
}

/// One point of the control-cost curve.
#[derive(Debug, Clone, Copy)]
pub struct CostPoint {
    pub t_horizon: f64,
    /// None records a conditioning refusal (a gap, not a failure).
    pub control_norm: Option<f64>,
}

/// Control norms for a fixed initial state across horizons.
pub fn cost_curve(
    basis: &Basis1d,
    sys: &CoupledSystem,
    w0: &ModalState1d,
    k_modes: usize,
    horizons: &[f64],
    opts: &SynthesisOptions,
) -> Result<Vec<CostPoint>> {
    use rayon::prelude::*;
    if horizons.iter().any(|&t| t <= 0.0) {
        return Err(Error::Domain("cost curve horizons must be positive".into()));
    }
    horizons
        .par_iter()
        .map(|&t| {
            match synthesize_control(basis, sys, w0, k_modes, t, opts) {
                Ok((_, diag)) => Ok(CostPoint { t_horizon: t, control_norm: Some(diag.l2_norm) }),
                Err(Error::Conditioning { .. }) => {
                    Ok(CostPoint { t_horizon: t, control_norm: None })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// H^{-1} ratio of the retained modes after applying a control, relative to
/// the initial state: the end-to-end verification quantity.
pub fn retained_mode_ratio(
    basis: &Basis1d,
    w0: &ModalState1d,
    w_final: &ModalState1d,
    k_modes: usize,
) -> f64 {
    let w0n = norm_hm1_1d(basis, w0);
    let truncated = ModalState1d::new(w_final.coeffs[..k_modes].to_vec());
    if w0n == 0.0 {
        return 0.0;
    }
    norm_hm1_1d(basis, &truncated) / w0n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::solver1d::modal_forward;
    use crate::spectrum::DegeneracyExponent;

    #[test]
    fn gram_entry_closed_forms() {
        // a = b = 0, real Λ: (1 - e^{-2λT})/(2λ)
        let lam = C64::new(1.7, 0.0);
        let t = 0.8;
        let v = gram_entry(lam, 0, lam, 0, t).unwrap();
        let exact = (1.0 - (-2.0 * 1.7 * t).exp()) / (2.0 * 1.7);
        assert!((v.re - exact).abs() < 1e-14 && v.im.abs() < 1e-15);

        // a = 1, b = 0: (1/s²)(1 - e^{-sT}(1 + sT))
        let la = C64::new(0.9, 0.4);
        let lb = C64::new(1.3, -0.2);
        let s = la + lb.conj();
        let v = gram_entry(la, 1, lb, 0, t).unwrap();
        let exact = (C64::new(1.0, 0.0) - (-s * t).exp() * (C64::new(1.0, 0.0) + s * t)) / (s * s);
        assert!((v - exact).norm() < 1e-13, "{v} vs {exact}");

        // large T: ∫ e^{-2t} → 1/2
        let v = gram_entry(C64::new(1.0, 0.0), 0, C64::new(1.0, 0.0), 0, 40.0).unwrap();
        assert!((v.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gram_entry_matches_quadrature() {
        let la = C64::new(2.0, 1.0);
        let lb = C64::new(3.0, -0.5);
        let t = 0.7;
        for (a, b) in [(0usize, 0usize), (1, 0), (2, 1), (0, 3)] {
            let v = gram_entry(la, a, lb, b, t).unwrap();
            let q = quad::integrate_complex(
                |s| {
                    C64::new(s.powi((a + b) as i32), 0.0) * (-(la + lb.conj()) * s).exp()
                },
                0.0,
                t,
                1e-13,
                1e-15,
            )
            .unwrap();
            assert!((v - q).norm() < 1e-12, "({a},{b}): {v} vs {q}");
        }
    }

    #[test]
    fn single_node_biortho_closed_form() {
        // Ψ(t) = e^{-λt} · 2λ/(1 - e^{-2λT})
        let lam = 2.5;
        let t = 1.2;
        let ms = MomentSystem::new(
            vec![(C64::new(lam, 0.0), 1)],
            t,
            CMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
        )
        .unwrap();
        let fam = build_biortho(&ms, 1e12).unwrap();
        let scale = 2.0 * lam / (1.0 - (-2.0 * lam * t).exp());
        for &s in &[0.0, 0.3, 1.0] {
            let expect = (-lam * s).exp() * scale;
            assert!((fam.psi_eval(0, s).re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_node_biortho_is_orthogonal() {
        let t = 1.0;
        let l1 = C64::new(1.0, 0.0);
        let l2 = C64::new(4.0, 0.0);
        let ms = MomentSystem::new(
            vec![(l1, 1), (l2, 1)],
            t,
            CMatrix::identity(2, 2),
        )
        .unwrap();
        let fam = build_biortho(&ms, 1e12).unwrap();
        assert!(fam.residual <= 1e-12, "residual {}", fam.residual);
        // ⟨Ψ_0, e^{-λ₂ t}⟩ = 0 by quadrature
        let ip = quad::integrate_complex(
            |s| fam.psi_eval(0, s) * (-(l2) * s).exp().conj(),
            0.0,
            t,
            1e-12,
            1e-14,
        )
        .unwrap();
        assert!(ip.norm() < 1e-12, "cross moment {ip}");
        let ip0 = quad::integrate_complex(
            |s| fam.psi_eval(0, s) * (-(l1) * s).exp().conj(),
            0.0,
            t,
            1e-12,
            1e-14,
        )
        .unwrap();
        assert!((ip0 - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn biortho_rejects_collisions_and_bad_caps() {
        let t = 1.0;
        assert!(MomentSystem::new(
            vec![(C64::new(1.0, 0.0), 1), (C64::new(1.0, 0.0), 1)],
            t,
            CMatrix::identity(2, 2),
        )
        .is_err());
        let ms = MomentSystem::new(
            vec![(C64::new(1.0, 0.0), 1)],
            t,
            CMatrix::identity(1, 1),
        )
        .unwrap();
        assert!(build_biortho(&ms, 0.5).is_err());
    }

    #[test]
    fn conditioning_refusal_names_truncation() {
        // tightly clustered nodes blow the cap; the error names a usable prefix
        let nodes: Vec<(C64, usize)> = (0..14)
            .map(|k| (C64::new(100.0 + 0.01 * k as f64, 0.0), 1))
            .collect();
        let ms = MomentSystem::new(nodes, 1.0, CMatrix::identity(14, 14)).unwrap();
        match build_biortho(&ms, 1e10) {
            Err(Error::Conditioning { admissible, .. }) => {
                assert!(admissible >= 1 && admissible < 14, "admissible = {admissible}");
            }
            other => panic!("expected conditioning refusal, got {other:?}"),
        }
    }

    #[test]
    fn minimality_against_kkt_oracle() {
        // Minimal-norm biorthogonality over a LARGER basis (3 nodes + 3 extra
        // exponentials) must coincide with the Gram-inverse family on the
        // original span and cannot have smaller norm.
        let t = 1.0;
        let nodes = [C64::new(1.0, 0.0), C64::new(3.0, 0.0), C64::new(7.0, 0.0)];
        let ms = MomentSystem::new(
            nodes.iter().map(|&l| (l, 1)).collect(),
            t,
            CMatrix::identity(3, 3),
        )
        .unwrap();
        let fam = build_biortho(&ms, 1e12).unwrap();
        // extended basis adds exponents not in the constraint set
        let ext: Vec<C64> = vec![
            nodes[0], nodes[1], nodes[2],
            C64::new(2.0, 0.0), C64::new(5.0, 0.0), C64::new(11.0, 0.0),
        ];
        let ne = ext.len();
        let mut ge = CMatrix::zeros(ne, ne);
        for i in 0..ne {
            for j in 0..ne {
                ge[(i, j)] = gram_entry(ext[i], 0, ext[j], 0, t).unwrap();
            }
        }
        // constraints: ⟨ψ, f_j⟩ = δ_{0j} for the three original nodes;
        // KKT for min ψ*G ψ: G c = Σ μ_j g_j with g_j the j-th constraint row
        // ⇒ c = G^{-1} E μ, E*G^{-1}... solve the bordered system directly.
        let rows = 3;
        let mut kkt = CMatrix::zeros(ne + rows, ne + rows);
        kkt.view_mut((0, 0), (ne, ne)).copy_from(&ge);
        for j in 0..rows {
            for i in 0..ne {
                // constraint j: Σ_i c_i ⟨f_i, f_j⟩ = δ_{0j}
                kkt[(ne + j, i)] = ge[(j, i)].conj(); // ⟨f_i, f_j⟩ = G_{ij}
                kkt[(i, ne + j)] = ge[(i, j)];
            }
        }
        let mut rhs = CMatrix::zeros(ne + rows, 1);
        rhs[(ne, 0)] = C64::new(1.0, 0.0);
        let sol = kkt.full_piv_lu().solve(&rhs).expect("KKT solvable");
        // the multiplier part reproduces the optimum: norm² = Re Σ c_i* (G c)_i
        let c = sol.view((0, 0), (ne, 1)).into_owned();
        let gc = &ge * &c;
        let opt_norm_sq: f64 = (0..ne).map(|i| (c[(i, 0)].conj() * gc[(i, 0)]).re).sum();
        let fam_norm = fam.psi_norm(0);
        assert!(
            opt_norm_sq.sqrt() >= fam_norm - 1e-9,
            "QP oracle found smaller norm: {} vs {}",
            opt_norm_sq.sqrt(),
            fam_norm
        );
        assert!(
            (opt_norm_sq.sqrt() - fam_norm).abs() < 1e-8,
            "optimum should coincide with the Gram family: {} vs {}",
            opt_norm_sq.sqrt(),
            fam_norm
        );
    }

    #[test]
    fn moment_rhs_scalar_single_mode() {
        // n = 1, A = 0: rhs_k = -e^{-λ_k T} c_k / o_k
        let exp = DegeneracyExponent::new(0.0).unwrap();
        let basis = Basis1d::new(exp, 3).unwrap();
        let sys = CoupledSystem::scalar();
        let w0 = ModalState1d::new(
            [1.0, -0.5, 0.25]
                .iter()
                .map(|&v| CVector::from_element(1, C64::new(v, 0.0)))
                .collect(),
        );
        let t = 0.4;
        let lambdas = basis.eigenvalues();
        let traces: Vec<f64> = basis.modes.iter().map(|m| m.obs_trace).collect();
        let rhs = moment_rhs(&sys, &lambdas, &traces, &w0, t).unwrap();
        for k in 0..3 {
            let expect = -(-lambdas[k] * t).exp() * w0.coeffs[k][0].re / traces[k];
            assert!(
                (rhs[(k, 0)].re - expect).abs() < 1e-12 * expect.abs().max(1e-12),
                "k = {k}"
            );
        }
        // linearity: doubling w0 doubles the targets
        let w2 = ModalState1d::new(w0.coeffs.iter().map(|c| c * C64::new(2.0, 0.0)).collect());
        let rhs2 = moment_rhs(&sys, &lambdas, &traces, &w2, t).unwrap();
        for k in 0..3 {
            assert!((rhs2[(k, 0)] - rhs[(k, 0)] * C64::new(2.0, 0.0)).norm() < 1e-13);
        }
        // zero state gives zero targets
        let rhs0 = moment_rhs(&sys, &lambdas, &traces, &ModalState1d::zero(3, 1), t).unwrap();
        assert!(rhs0.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn synthesized_control_nulls_scalar_modes() {
        let exp = DegeneracyExponent::new(0.0).unwrap();
        let basis = Basis1d::new(exp, 8).unwrap();
        let sys = CoupledSystem::scalar();
        let w0 = ModalState1d::single_mode(8, 1, CVector::from_element(1, C64::new(1.0, 0.0)));
        let t = 0.5;
        let opts = SynthesisOptions::default();
        let (h, diag) = synthesize_control(&basis, &sys, &w0, 8, t, &opts).unwrap();
        assert!(diag.residual < 1e-8, "residual {}", diag.residual);
        let w_t = modal_forward(&basis, &sys, &w0, Some(&h), t).unwrap();
        let ratio = retained_mode_ratio(&basis, &w0, &w_t, 8);
        assert!(ratio <= 1e-6, "retained-mode ratio {ratio:e}");
    }

    #[test]
    fn strong_regime_control_through_flux() {
        let exp = DegeneracyExponent::new(1.5).unwrap();
        let basis = Basis1d::new(exp, 8).unwrap();
        let sys = CoupledSystem::scalar();
        let w0 = ModalState1d::new(
            (0..8)
                .map(|k| CVector::from_element(1, C64::new(1.0 / (k + 1) as f64, 0.0)))
                .collect(),
        );
        let t = 0.5;
        let (h, _) = synthesize_control(&basis, &sys, &w0, 8, t, &SynthesisOptions::default())
            .unwrap();
        let w_t = modal_forward(&basis, &sys, &w0, Some(&h), t).unwrap();
        let ratio = retained_mode_ratio(&basis, &w0, &w_t, 8);
        assert!(ratio <= 1e-6, "retained-mode ratio {ratio:e}");
    }

    #[test]
    fn zero_state_zero_control() {
        let exp = DegeneracyExponent::new(0.5).unwrap();
        let basis = Basis1d::new(exp, 4).unwrap();
        let sys = CoupledSystem::scalar();
        let w0 = ModalState1d::zero(4, 1);
        let (h, diag) =
            synthesize_control(&basis, &sys, &w0, 4, 0.5, &SynthesisOptions::default()).unwrap();
        assert!(diag.l2_norm < 1e-14);
        assert!(h.values.iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn synthesis_refused_without_kalman() {
        let a = CMatrix::zeros(2, 2);
        let b = CMatrix::from_row_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let sys = CoupledSystem::new(a, b, 0.0).unwrap();
        let exp = DegeneracyExponent::new(0.5).unwrap();
        let basis = Basis1d::new(exp, 4).unwrap();
        let w0 = ModalState1d::zero(4, 2);
        match synthesize_control(&basis, &sys, &w0, 4, 0.5, &SynthesisOptions::default()) {
            Err(Error::Controllability(_)) => {}
            other => panic!("expected controllability refusal, got {other:?}"),
        }
    }

    #[test]
    fn cost_decreases_with_time() {
        let exp = DegeneracyExponent::new(0.0).unwrap();
        let basis = Basis1d::new(exp, 6).unwrap();
        let sys = CoupledSystem::scalar();
        let w0 = ModalState1d::new(
            (0..6).map(|_| CVector::from_element(1, C64::new(1.0, 0.0))).collect(),
        );
        let pts = cost_curve(
            &basis,
            &sys,
            &w0,
            6,
            &[0.25, 0.5, 1.0],
            &SynthesisOptions::default(),
        )
        .unwrap();
        let n25 = pts[0].control_norm.unwrap();
        let n50 = pts[1].control_norm.unwrap();
        let n100 = pts[2].control_norm.unwrap();
        assert!(n25 > n50 && n50 > n100, "{n25} > {n50} > {n100} violated");
        // doubling the state doubles every norm
        let w2 = ModalState1d::new(w0.coeffs.iter().map(|c| c * C64::new(2.0, 0.0)).collect());
        let pts2 =
            cost_curve(&basis, &sys, &w2, 6, &[0.5], &SynthesisOptions::default()).unwrap();
        assert!((pts2[0].control_norm.unwrap() / n50 - 2.0).abs() < 1e-9);
    }
}
