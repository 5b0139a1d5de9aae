//! Forward and adjoint solution of the 1-d coupled degenerate system in the
//! eigenbasis (variation of constants per mode), modal norms, and an
//! independent finite-volume oracle with boundary-data lifting.
//!
//! Sign convention: the controlled modal dynamics are
//!
//! ```text
//! c_k(T) = e^{(-λ_k I + A)T} c_k(0) - o_k ∫_0^T e^{(-λ_k I + A)(T-t)} B h(t) dt,
//! ```
//!
//! fixed by the transposition identity
//! `⟨w(T), v_T⟩ - ⟨w_0, v(0)⟩ = -∫ (h, B*(obs v)) dt`. Equivalently, the
//! boundary datum seen by the PDE is `-B h(t)` in the weak (Dirichlet)
//! regime and `+B h(t)` for the flux in the strong regime; the oracle below
//! applies exactly that lifting so both solvers agree path-wise.

use crate::kalman::CoupledSystem;
use crate::linalg::matrix_exp;
use crate::mesh::{BoundaryInput, Fd1dSolver, GradedMesh};
use crate::spectrum::{eigenfunction_eval_mode, modes, DegeneracyExponent, Regime, SpectralMode};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Precomputed spectral basis for one exponent: the first K modes.
#[derive(Debug, Clone)]
pub struct Basis1d {
    pub exp: DegeneracyExponent,
    pub modes: Vec<SpectralMode>,
}

impl Basis1d {
    pub fn new(exp: DegeneracyExponent, k_max: usize) -> Result<Self> {
        Ok(Self { exp, modes: modes(&exp, k_max)? })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Sample Σ_k c_k φ_k on the given abscissae (componentwise vectors).
    pub fn sample(&self, coeffs: &[CVector], xs: &[f64]) -> Result<Vec<CVector>> {
        let n = coeffs.first().map(|c| c.len()).unwrap_or(1);
        let mut out = vec![CVector::zeros(n); xs.len()];
        for (m, c) in self.modes.iter().zip(coeffs.iter()) {
            for (v, &x) in out.iter_mut().zip(xs.iter()) {
                let phi = eigenfunction_eval_mode(&self.exp, m, x)?;
                *v += c * C64::new(phi, 0.0);
            }
        }
        Ok(out)
    }
}

/// Modal state: duality coefficients c_k = ⟨w, φ_{α,k}⟩ ∈ ℂⁿ, k = 1..K.
#[derive(Debug, Clone)]
pub struct ModalState1d {
    pub coeffs: Vec<CVector>,
}

impl ModalState1d {
    pub fn new(coeffs: Vec<CVector>) -> Self {
        Self { coeffs }
    }

    pub fn zero(k: usize, n: usize) -> Self {
        Self { coeffs: vec![CVector::zeros(n); k] }
    }

    /// Single excited mode (1-based) with the given component vector.
    pub fn single_mode(k_modes: usize, k: usize, v: CVector) -> Self {
        let n = v.len();
        let mut coeffs = vec![CVector::zeros(n); k_modes];
        coeffs[k - 1] = v;
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Control samples on a uniform grid over [0, T], values in ℂᵐ.
#[derive(Debug, Clone)]
pub struct SampledControl {
    pub dt: f64,
    pub values: Vec<CVector>,
}

impl SampledControl {
    pub fn new(t_final: f64, values: Vec<CVector>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("control needs at least two samples".into()));
        }
        if t_final <= 0.0 {
            return Err(Error::Domain("control horizon must be positive".into()));
        }
        Ok(Self { dt: t_final / (values.len() - 1) as f64, values })
    }

    pub fn zero(t_final: f64, m: usize, samples: usize) -> Self {
        Self { dt: t_final / (samples - 1) as f64, values: vec![CVector::zeros(m); samples] }
    }

    pub fn t_final(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn channels(&self) -> usize {
        self.values.first().map(|v| v.len()).unwrap_or(0)
    }

    /// Slope at a sample node in grid units: central differences inside,
    /// second-order one-sided stencils at the two ends.
    fn node_slope(&self, i: usize) -> CVector {
        let n = self.values.len();
        let v = &self.values;
        if n == 2 {
            return &v[1] - &v[0];
        }
        if i == 0 {
            (&v[1] * C64::new(4.0, 0.0) - &v[2] - &v[0] * C64::new(3.0, 0.0)) * C64::new(0.5, 0.0)
        } else if i == n - 1 {
            (&v[n - 1] * C64::new(3.0, 0.0) - &v[n - 2] * C64::new(4.0, 0.0) + &v[n - 3])
                * C64::new(0.5, 0.0)
        } else {
            (&v[i + 1] - &v[i - 1]) * C64::new(0.5, 0.0)
        }
    }

    /// Piecewise-cubic Hermite interpolation between samples.
    pub fn eval(&self, t: f64) -> CVector {
        let n = self.values.len();
        let m = self.channels();
        let s = (t / self.dt).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let u = s - i as f64;
        let p1 = &self.values[i];
        let p2 = &self.values[i + 1];
        let m1 = self.node_slope(i);
        let m2 = self.node_slope(i + 1);
        let mut out = CVector::zeros(m);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        out += p1 * C64::new(h00, 0.0);
        out += &m1 * C64::new(h10, 0.0);
        out += p2 * C64::new(h01, 0.0);
        out += &m2 * C64::new(h11, 0.0);
        out
    }

    /// Discrete L²(0, T) norm by per-interval Gauss quadrature of the
    /// interpolant.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() - 1 {
            let t0 = i as f64 * self.dt;
            for (xi, w) in gauss6() {
                let v = self.eval(t0 + xi * self.dt);
                acc += w * self.dt * v.norm_squared();
            }
        }
        acc.sqrt()
    }
}

/// 6-point Gauss-Legendre rule on [0, 1] as (node, weight) pairs.
pub(crate) fn gauss6() -> [(f64, f64); 6] {
    [
        (0.033765242898423986, 0.0856622461895852),
        (0.16939530676686776, 0.18038078652406930),
        (0.38069040695840155, 0.23395696728634552),
        (0.6193095930415985, 0.23395696728634552),
        (0.8306046932331322, 0.18038078652406930),
        (0.9662347571015760, 0.0856622461895852),
    ]
}

/// Forward map: evolve the modal state over [0, T] under control `h`.
pub fn modal_forward(
    basis: &Basis1d,
    sys: &CoupledSystem,
    w0: &ModalState1d,
    h: Option<&SampledControl>,
    t_final: f64,
) -> Result<ModalState1d> {
    let lambdas = basis.eigenvalues();
    let traces: Vec<f64> = basis.modes.iter().map(|m| m.obs_trace).collect();
    modal_forward_shifted(&lambdas, &traces, sys, w0, h, t_final)
}

/// Forward map with explicit eigenvalues and observation traces, so the 2-d
/// controller can fold the transverse eigenvalue shift into λ.
pub fn modal_forward_shifted(
    lambdas: &[f64],
    traces: &[f64],
    sys: &CoupledSystem,
    w0: &ModalState1d,
    h: Option<&SampledControl>,
    t_final: f64,
) -> Result<ModalState1d> {
    if t_final <= 0.0 {
        return Err(Error::Domain("T must be positive".into()));
    }
    if w0.len() > lambdas.len() {
        return Err(Error::Domain("state has more modes than the basis".into()));
    }
    if let Some(ctrl) = h {
        if ctrl.values.len() < 2 {
            return Err(Error::Domain("control grid must not be empty for T > 0".into()));
        }
        if (ctrl.t_final() - t_final).abs() > 1e-9 * t_final {
            return Err(Error::Domain("control grid does not cover [0, T]".into()));
        }
        if ctrl.channels() != sys.controls() {
            return Err(Error::Domain("control channel count mismatch".into()));
        }
    }
    let n = sys.states();
    let id = CMatrix::identity(n, n);
    // B h(τ) at every per-interval Gauss node, shared across modes
    let bh_nodes: Option<Vec<CVector>> = h.map(|ctrl| {
        let dt = ctrl.dt;
        let steps = ctrl.values.len() - 1;
        let mut cache = Vec::with_capacity(steps * 6);
        for i in 0..steps {
            let t0 = i as f64 * dt;
            for (xi, _) in gauss6() {
                cache.push(sys.control_matrix() * ctrl.eval(t0 + xi * dt));
            }
        }
        cache
    });
    let mut out = Vec::with_capacity(w0.len());
    for (k, c0) in w0.coeffs.iter().enumerate() {
        let m_k = sys.a_eff() - &id * C64::new(lambdas[k], 0.0);
        let mut c = matrix_exp(&(&m_k * C64::new(t_final, 0.0))) * c0;
        if let (Some(ctrl), Some(cache)) = (h, &bh_nodes) {
            let dt = ctrl.dt;
            let steps = ctrl.values.len() - 1;
            let e_step = matrix_exp(&(&m_k * C64::new(dt, 0.0)));
            // per-node propagators e^{M dt (1 - ξ)} for the local integrals
            let e_nodes: Vec<CMatrix> = gauss6()
                .iter()
                .map(|(xi, _)| matrix_exp(&(&m_k * C64::new(dt * (1.0 - xi), 0.0))))
                .collect();
            let mut node_acc = vec![CVector::zeros(n); 6];
            for i in 0..steps {
                for (q, na) in node_acc.iter_mut().enumerate() {
                    let w = gauss6()[q].1;
                    *na = &e_step * (na as &CVector);
                    *na += &cache[i * 6 + q] * C64::new(w * dt, 0.0);
                }
            }
            // fold node accumulators through their fixed propagators
            let mut acc = CVector::zeros(n);
            for (q, na) in node_acc.iter().enumerate() {
                acc += &e_nodes[q] * na;
            }
            c -= acc * C64::new(traces[k], 0.0);
        }
        out.push(c);
    }
    Ok(ModalState1d::new(out))
}

/// Adjoint observation trajectory on a uniform grid of `samples` points:
/// `obs(t) = Σ_k B* e^{(-λ_k I + A*)(T - t)} o_k v_{T,k}`.
pub fn adjoint_solve(
    basis: &Basis1d,
    sys: &CoupledSystem,
    v_t: &ModalState1d,
    t_final: f64,
    samples: usize,
) -> Result<Vec<CVector>> {
    if t_final <= 0.0 || samples < 2 {
        return Err(Error::Domain("need T > 0 and at least 2 samples".into()));
    }
    let n = sys.states();
    let mcount = sys.controls();
    let id = CMatrix::identity(n, n);
    let dt = t_final / (samples - 1) as f64;
    let b_star = sys.control_matrix().adjoint();
    let mut obs = vec![CVector::zeros(mcount); samples];
    for (mode, vtk) in basis.modes.iter().zip(v_t.coeffs.iter()) {
        let m_star = sys.a_eff().adjoint() - &id * C64::new(mode.eigenvalue, 0.0);
        let e_step = matrix_exp(&(&m_star * C64::new(dt, 0.0)));
        // y(t_s) = e^{M*(T - t_s)} (o_k v_{T,k}), computed backwards from t = T
        let mut y = vtk * C64::new(mode.obs_trace, 0.0);
        for s in (0..samples).rev() {
            obs[s] += &b_star * &y;
            if s > 0 {
                y = &e_step * y;
            }
        }
    }
    Ok(obs)
}

/// ⟨w, v⟩ duality pairing of modal coefficient sets (second argument
/// conjugated).
pub fn duality_pairing(w: &ModalState1d, v: &ModalState1d) -> C64 {
    w.coeffs
        .iter()
        .zip(v.coeffs.iter())
        .map(|(a, b)| {
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..a.len().min(b.len()) {
                dot += a[i] * b[i].conj();
            }
            dot
        })
        .sum()
}

/// ∫_0^T (h(t), obs(t)) dt with both factors sampled on the same grid,
/// integrated by per-interval Gauss quadrature of the cubic interpolants.
pub fn control_observation_pairing(h: &SampledControl, obs: &[CVector]) -> Result<C64> {
    if obs.len() != h.values.len() {
        return Err(Error::Domain("pairing requires matching grids".into()));
    }
    let obs_interp = SampledControl { dt: h.dt, values: obs.to_vec() };
    let dt = h.dt;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..h.values.len() - 1 {
        let t0 = i as f64 * dt;
        for (xi, w) in gauss6() {
            let t = t0 + xi * dt;
            let hv = h.eval(t);
            let ov = obs_interp.eval(t);
            let mut dot = C64::new(0.0, 0.0);
            for c in 0..hv.len() {
                dot += hv[c] * ov[c].conj();
            }
            acc += dot * C64::new(w * dt, 0.0);
        }
    }
    Ok(acc)
}

/// H¹_{α,0} norm: √(Σ λ_k |c_k|²).
pub fn norm_h1_1d(basis: &Basis1d, state: &ModalState1d) -> f64 {
    state
        .coeffs
        .iter()
        .zip(basis.modes.iter())
        .map(|(c, m)| m.eigenvalue * c.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// H^{-1}_α norm: √(Σ |c_k|²/λ_k).
pub fn norm_hm1_1d(basis: &Basis1d, state: &ModalState1d) -> f64 {
    state
        .coeffs
        .iter()
        .zip(basis.modes.iter())
        .map(|(c, m)| c.norm_squared() / m.eigenvalue)
        .sum::<f64>()
        .sqrt()
}

/// L² norm: √(Σ |c_k|²).
pub fn norm_l2_1d(state: &ModalState1d) -> f64 {
    state.coeffs.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
}

/// Independent finite-volume oracle for the forward problem. `w0_mesh` holds
/// cell values; the control enters through the regime's boundary datum with
/// the sign convention of [`modal_forward`].
pub fn fd_forward_oracle(
    exp: &DegeneracyExponent,
    sys: &CoupledSystem,
    mesh: &GradedMesh,
    w0_mesh: &[CVector],
    h: Option<&SampledControl>,
    t_final: f64,
    steps: usize,
) -> Result<Vec<CVector>> {
    if mesh.cells() < 500 {
        return Err(Error::Domain("forward oracle needs at least 500 cells".into()));
    }
    let solver = Fd1dSolver::new(mesh, exp, sys.a_eff().clone());
    match h {
        None => solver.run(w0_mesh, BoundaryInput::Free, t_final, steps),
        Some(ctrl) => {
            let b = sys.control_matrix().clone();
            let sign = match exp.regime() {
                Regime::Weak => C64::new(-1.0, 0.0),
                Regime::Strong => C64::new(1.0, 0.0),
            };
            let datum = move |t: f64| -> CVector { (&b * ctrl.eval(t)) * sign };
            solver.run(w0_mesh, BoundaryInput::Control(&datum), t_final, steps)
        }
    }
}
