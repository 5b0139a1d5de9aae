//! Spectral data of the 1-d degenerate operator `∂_x(x^α ∂_x ·)` on (0, 1):
//! eigenvalues λ_{α,k} = κ² j_{ν,k}², normalized eigenfunctions, boundary
//! observation traces, gap checks, the counting function, and an
//! independent graded-mesh Sturm-Liouville oracle.

use crate::mesh::{tridiag_smallest_eigenvalues, GradedMesh};
use crate::special::{bessel_j, bessel_j_prime, bessel_zeros, gamma, BesselOrder};
use crate::{Error, Result};

/// Boundary regime at the degenerate end x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// α < 1: Dirichlet condition at 0 is admissible.
    Weak,
    /// α ≥ 1: only the weighted-flux (Neumann-type) condition is admissible.
    Strong,
}

/// Degeneracy exponent α ∈ [0, 2) with its derived Bessel order
/// ν = |1-α|/(2-α) and scale κ = (2-α)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracyExponent {
    alpha: f64,
    nu: f64,
    kappa: f64,
    regime: Regime,
}

impl DegeneracyExponent {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || !(0.0..2.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 2), got {alpha}")));
        }
        let nu = (1.0 - alpha).abs() / (2.0 - alpha);
        let kappa = (2.0 - alpha) / 2.0;
        let regime = if alpha < 1.0 { Regime::Weak } else { Regime::Strong };
        Ok(Self { alpha, nu, kappa, regime })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn order(&self) -> BesselOrder {
        BesselOrder::new(self.nu).expect("nu >= 0 by construction")
    }
}

/// One eigenmode: zero, eigenvalue, eigenfunction normalization and the
/// boundary observation trace ((x^α φ')(0) in the weak regime, φ(0) in the
/// strong one).
#[derive(Debug, Clone, Copy)]
pub struct SpectralMode {
    pub k: usize,
    pub zero: f64,
    pub eigenvalue: f64,
    pub norm_factor: f64,
    pub obs_trace: f64,
}

fn mode_from_zero(exp: &DegeneracyExponent, k: usize, zero: f64) -> Result<SpectralMode> {
    let order = exp.order();
    let jp = bessel_j_prime(order, zero)?.abs();
    if jp < 1e-14 {
        return Err(Error::Numerical(format!(
            "derivative underflow at zero {k}: |J'| = {jp:e}"
        )));
    }
    let eigenvalue = exp.kappa * exp.kappa * zero * zero;
    let norm_factor = (2.0 - exp.alpha).sqrt() / jp;
    let prefactor = match exp.regime {
        Regime::Weak => (1.0 - exp.alpha) * (2.0 - exp.alpha).sqrt(),
        Regime::Strong => (2.0 * exp.kappa).sqrt(),
    };
    let obs_trace = prefactor * zero.powf(exp.nu)
        / (2f64.powf(exp.nu) * gamma(exp.nu + 1.0)? * jp);
    Ok(SpectralMode { k, zero, eigenvalue, norm_factor, obs_trace })
}

/// The k-th spectral mode.
pub fn mode(exp: &DegeneracyExponent, k: usize) -> Result<SpectralMode> {
    if k == 0 {
        return Err(Error::Domain("mode index k must be >= 1".into()));
    }
    let zeros = bessel_zeros(exp.order(), k)?;
    mode_from_zero(exp, k, zeros[k - 1])
}

/// The first `k_max` spectral modes (one zero scan, strictly increasing
/// eigenvalues).
pub fn modes(exp: &DegeneracyExponent, k_max: usize) -> Result<Vec<SpectralMode>> {
    let zeros = bessel_zeros(exp.order(), k_max)?;
    zeros
        .iter()
        .enumerate()
        .map(|(i, &z)| mode_from_zero(exp, i + 1, z))
        .collect()
}

/// Normalized eigenfunction value
/// φ_{α,k}(x) = √(2-α)/|J'_ν(j_k)| · x^{(1-α)/2} · J_ν(j_k x^κ), 0 < x ≤ 1.
pub fn eigenfunction_eval(exp: &DegeneracyExponent, k: usize, x: f64) -> Result<f64> {
    let m = mode(exp, k)?;
    eigenfunction_eval_mode(exp, &m, x)
}

/// Same as [`eigenfunction_eval`] with a precomputed mode.
pub fn eigenfunction_eval_mode(exp: &DegeneracyExponent, m: &SpectralMode, x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Domain(format!("eigenfunction argument must be in (0, 1], got {x}")));
    }
    let j = bessel_j(exp.order(), m.zero * x.powf(exp.kappa))?;
    Ok(m.norm_factor * x.powf(0.5 * (1.0 - exp.alpha)) * j)
}

/// One violation of the two-sided gap bounds.
#[derive(Debug, Clone, Copy)]
pub struct GapViolation {
    pub k: usize,
    pub m: usize,
    pub gap: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub rho1: f64,
    pub rho2: f64,
    pub violations: Vec<GapViolation>,
}

/// Check ρ₁|k²-m²| ≤ |λ_k - λ_m| ≤ ρ₂|k²-m²| for all 1 ≤ m < k ≤ K with
/// ρ₁ = π²κ²/4 and ρ₂ = 2π²κ².
pub fn gap_check(exp: &DegeneracyExponent, k_max: usize) -> Result<GapReport> {
    if k_max < 2 {
        return Err(Error::Domain("gap check needs K >= 2".into()));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let rho1 = pi2 * exp.kappa * exp.kappa / 4.0;
    let rho2 = 2.0 * pi2 * exp.kappa * exp.kappa;
    let ms = modes(exp, k_max)?;
    let mut violations = Vec::new();
    for k in 2..=k_max {
        for m in 1..k {
            let gap = ms[k - 1].eigenvalue - ms[m - 1].eigenvalue;
            let scale = (k * k - m * m) as f64;
            let lower_bound = rho1 * scale;
            let upper_bound = rho2 * scale;
            if gap < lower_bound * (1.0 - 1e-12) || gap > upper_bound * (1.0 + 1e-12) {
                violations.push(GapViolation { k, m, gap, lower_bound, upper_bound });
            }
        }
    }
    Ok(GapReport { rho1, rho2, violations })
}

/// Counting function #{k : |Λ_k| ≤ r} for a nondecreasing modulus sequence.
pub fn counting_function(moduli: &[f64], r: f64) -> usize {
    moduli.partition_point(|&m| m <= r)
}

/// Independent oracle: first `k` eigenvalues of the finite-volume
/// discretization of `-(x^α u')'` on the graded mesh, ascending.
pub fn sturm_liouville_fd_oracle(
    exp: &DegeneracyExponent,
    k: usize,
    mesh_size: usize,
) -> Result<Vec<f64>> {
    if mesh_size < 200 {
        return Err(Error::Domain("oracle mesh must have at least 200 cells".into()));
    }
    let mesh = GradedMesh::new(exp.alpha, mesh_size)?;
    let (diag, off) = mesh.stiffness(exp.regime);
    tridiag_smallest_eigenvalues(&diag, &off, &mesh.widths, k)
}
