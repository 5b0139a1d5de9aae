//! Graded-mesh finite-volume discretization of `∂_x(x^α ∂_x ·)` on (0, 1).
//!
//! Faces sit at x_i = (i/M)^{2/(2-α)} so that the substitution coordinate is
//! uniformly resolved at the degenerate end. Fluxes use exact resistance
//! integrals of x^{-α}, which keeps the scheme conservative and well defined
//! up to the degenerate face.

use crate::spectrum::{DegeneracyExponent, Regime};
use crate::{CMatrix, CVector, Error, Result, C64};

#[derive(Debug, Clone)]
pub struct GradedMesh {
    pub alpha: f64,
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// resistances[0]: degenerate boundary to first center (the strong
    /// regime never uses it); resistances[i] for 1..M-1: center i to center
    /// i+1; resistances[M]: last center to x = 1.
    pub resistances: Vec<f64>,
}

fn resistance(alpha: f64, a: f64, b: f64) -> f64 {
    debug_assert!(b > a && a >= 0.0);
    if (alpha - 1.0).abs() < 1e-12 {
        if a == 0.0 {
            f64::INFINITY
        } else {
            (b / a).ln()
        }
    } else {
        let p = 1.0 - alpha;
        (b.powf(p) - a.powf(p)) / p
    }
}

impl GradedMesh {
    pub fn new(alpha: f64, m: usize) -> Result<Self> {
        if !(0.0..2.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 2), got {alpha}")));
        }
        if m < 10 {
            return Err(Error::Domain("mesh needs at least 10 cells".into()));
        }
        let grading = 2.0 / (2.0 - alpha);
        let faces: Vec<f64> = (0..=m).map(|i| (i as f64 / m as f64).powf(grading)).collect();
        let centers: Vec<f64> = (0..m).map(|i| 0.5 * (faces[i] + faces[i + 1])).collect();
        let widths: Vec<f64> = (0..m).map(|i| faces[i + 1] - faces[i]).collect();
        let mut resistances = Vec::with_capacity(m + 1);
        resistances.push(resistance(alpha, 0.0, centers[0]));
        for i in 0..m - 1 {
            resistances.push(resistance(alpha, centers[i], centers[i + 1]));
        }
        resistances.push(resistance(alpha, centers[m - 1], 1.0));
        Ok(Self { alpha, faces, centers, widths, resistances })
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    /// L² norm of a scalar cell function.
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.widths).map(|(x, h)| x * x * h).sum::<f64>().sqrt()
    }

    /// L² norm of a vector-valued cell function.
    pub fn l2_norm_vec(&self, v: &[CVector]) -> f64 {
        v.iter()
            .zip(&self.widths)
            .map(|(x, h)| x.norm_squared() * h)
            .sum::<f64>()
            .sqrt()
    }

    /// Stiffness tridiagonal (diag, offdiag) of `-(x^α u')'` under the
    /// regime's homogeneous boundary conditions. The eigenproblem reads
    /// K u = λ W u with W = diag(widths).
    pub fn stiffness(&self, regime: Regime) -> (Vec<f64>, Vec<f64>) {
        let m = self.cells();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for i in 0..m {
            let left = if i == 0 {
                match regime {
                    Regime::Weak => 1.0 / self.resistances[0],
                    Regime::Strong => 0.0, // zero flux at the degenerate face
                }
            } else {
                1.0 / self.resistances[i]
            };
            let right = 1.0 / self.resistances[i + 1];
            diag[i] = left + right;
            if i + 1 < m {
                off[i] = -1.0 / self.resistances[i + 1];
            }
        }
        (diag, off)
    }
}

/// Count of eigenvalues of the pencil (K, W) strictly below `shift`, by the
/// Sturm sequence of the shifted LDLᵀ factorization.
fn sturm_count(diag: &[f64], off: &[f64], weights: &[f64], shift: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut d = diag[0] - shift * weights[0];
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let mut denom = d;
        if denom == 0.0 {
            denom = 1e-300;
        }
        d = (diag[i] - shift * weights[i]) - off[i - 1] * off[i - 1] / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// First `k` eigenvalues of K u = λ W u, ascending, by Sturm bisection.
pub fn tridiag_smallest_eigenvalues(
    diag: &[f64],
    off: &[f64],
    weights: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let n = diag.len();
    if k > n {
        return Err(Error::Domain("requested more eigenvalues than matrix size".into()));
    }
    let mut upper: f64 = 0.0;
    for i in 0..n {
        let mut radius = diag[i].abs();
        if i > 0 {
            radius += off[i - 1].abs();
        }
        if i < n - 1 {
            radius += off[i].abs();
        }
        upper = upper.max(radius / weights[i]);
    }
    let mut out = Vec::with_capacity(k);
    for idx in 1..=k {
        let mut lo = 0.0;
        let mut hi = upper;
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, weights, mid) >= idx {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// Boundary datum at the degenerate face: the state value there in the weak
/// regime, the prescribed flux in the strong one.
pub enum BoundaryInput<'a> {
    Free,
    Control(&'a dyn Fn(f64) -> CVector),
}

/// Crank-Nicolson finite-volume solver for
/// `∂_t w = ∂_x(x^α ∂_x w) + A_eff w` with boundary input at x = 0 and a
/// homogeneous Dirichlet condition at x = 1.
pub struct Fd1dSolver<'a> {
    pub mesh: &'a GradedMesh,
    pub regime: Regime,
    pub a_eff: CMatrix,
    pub n: usize,
}

struct BlockThomas {
    /// LU factors of the modified diagonal blocks.
    factors: Vec<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>,
    upper: Vec<C64>,
    lower: Vec<C64>,
    n: usize,
}

impl BlockThomas {
    /// Factor the block tridiagonal matrix with diagonal blocks `diag[i]`
    /// and scalar-times-identity off-diagonal couplings.
    fn factor(diag: Vec<CMatrix>, lower: Vec<C64>, upper: Vec<C64>) -> Result<Self> {
        let n = diag[0].nrows();
        let m = diag.len();
        let mut factors = Vec::with_capacity(m);
        let mut prev_inv: Option<CMatrix> = None;
        for (i, mut d) in diag.into_iter().enumerate() {
            if i > 0 {
                let coupling = lower[i - 1] * upper[i - 1];
                d -= prev_inv.as_ref().unwrap() * coupling;
            }
            let lu = d.clone().lu();
            let inv = lu
                .solve(&CMatrix::identity(n, n))
                .ok_or_else(|| Error::Numerical("singular Crank-Nicolson block".into()))?;
            prev_inv = Some(inv);
            factors.push(lu);
        }
        Ok(Self { factors, upper, lower, n })
    }

    fn solve(&self, rhs: &mut [CVector]) -> Result<()> {
        let m = rhs.len();
        let n = self.n;
        let solve_one = |lu: &nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
                         v: &CVector|
         -> Result<CVector> {
            let mat = CMatrix::from_fn(n, 1, |r, _| v[r]);
            let sol = lu
                .solve(&mat)
                .ok_or_else(|| Error::Numerical("singular Crank-Nicolson block".into()))?;
            Ok(CVector::from_fn(n, |r, _| sol[(r, 0)]))
        };
        // forward elimination
        for i in 1..m {
            let prev = solve_one(&self.factors[i - 1], &rhs[i - 1])?;
            let li = self.lower[i - 1];
            for r in 0..n {
                rhs[i][r] -= li * prev[r];
            }
        }
        // back substitution
        let last = m - 1;
        rhs[last] = solve_one(&self.factors[last], &rhs[last])?;
        for i in (0..last).rev() {
            let ui = self.upper[i];
            for r in 0..n {
                let corr = ui * rhs[i + 1][r];
                rhs[i][r] -= corr;
            }
            rhs[i] = solve_one(&self.factors[i], &rhs[i])?;
        }
        Ok(())
    }
}

impl<'a> Fd1dSolver<'a> {
    pub fn new(mesh: &'a GradedMesh, exp: &DegeneracyExponent, a_eff: CMatrix) -> Self {
        let n = a_eff.nrows();
        Self { mesh, regime: exp.regime(), a_eff, n }
    }

    /// March `w0` from t = 0 to t = T in `steps` Crank-Nicolson steps.
    pub fn run(
        &self,
        w0: &[CVector],
        boundary: BoundaryInput,
        t_final: f64,
        steps: usize,
    ) -> Result<Vec<CVector>> {
        let m = self.mesh.cells();
        let n = self.n;
        if w0.len() != m {
            return Err(Error::Domain("initial data does not match mesh".into()));
        }
        if steps == 0 || t_final <= 0.0 {
            return Err(Error::Domain("need steps >= 1 and T > 0".into()));
        }
        let dt = t_final / steps as f64;
        let half = 0.5 * dt;
        let (diag_k, off_k) = self.mesh.stiffness(self.regime);
        let h = &self.mesh.widths;
        let id = CMatrix::identity(n, n);

        let implicit_diag: Vec<CMatrix> = (0..m)
            .map(|i| {
                &id * C64::new(1.0 + half * diag_k[i] / h[i], 0.0)
                    - &self.a_eff * C64::new(half, 0.0)
            })
            .collect();
        let lower: Vec<C64> = (1..m).map(|i| C64::new(half * off_k[i - 1] / h[i], 0.0)).collect();
        let upper: Vec<C64> = (0..m - 1).map(|i| C64::new(half * off_k[i] / h[i], 0.0)).collect();
        let thomas = BlockThomas::factor(implicit_diag, lower, upper)?;

        let mut w: Vec<CVector> = w0.to_vec();
        let mut rhs: Vec<CVector> = vec![CVector::zeros(n); m];
        for s in 0..steps {
            let t0 = s as f64 * dt;
            let t1 = t0 + dt;
            for i in 0..m {
                let mut acc = &w[i] * C64::new(1.0 - half * diag_k[i] / h[i], 0.0);
                if i > 0 {
                    acc -= &w[i - 1] * C64::new(half * off_k[i - 1] / h[i], 0.0);
                }
                if i + 1 < m {
                    acc -= &w[i + 1] * C64::new(half * off_k[i] / h[i], 0.0);
                }
                acc += &self.a_eff * &w[i] * C64::new(half, 0.0);
                rhs[i] = acc;
            }
            if let BoundaryInput::Control(f) = &boundary {
                let avg = (f(t0) + f(t1)) * C64::new(0.5, 0.0);
                match self.regime {
                    Regime::Weak => {
                        // Dirichlet value through the boundary resistance
                        let c = dt / (self.mesh.resistances[0] * h[0]);
                        rhs[0] += &avg * C64::new(c, 0.0);
                    }
                    Regime::Strong => {
                        // prescribed diffusive flux F_0: cell balance gets -F_0/h_0
                        let c = -dt / h[0];
                        rhs[0] += &avg * C64::new(c, 0.0);
                    }
                }
            }
            thomas.solve(&mut rhs)?;
            std::mem::swap(&mut w, &mut rhs);
            if w.iter().any(|v| v.iter().any(|x| !x.re.is_finite() || !x.im.is_finite())) {
                return Err(Error::Numerical(format!("non-finite state at step {s}")));
            }
        }
        Ok(w)
    }
}
