//! TOML experiment configurations.
//!
//! Matrices are row-major nested arrays; complex entries are given by an
//! optional `*_im` companion array. Initial data is either explicit modal
//! coefficients or a seeded pseudo-random state.

use degen_core::kalman::CoupledSystem;
use degen_core::lr2d::ModalState2d;
use degen_core::solver1d::ModalState1d;
use degen_core::{CMatrix, CVector, Error, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub a_im: Option<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub b_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub mu_shift: f64,
}

impl SystemConfig {
    pub fn build(&self) -> Result<CoupledSystem, Error> {
        let n = self.a.len();
        if n == 0 || self.a.iter().any(|r| r.len() != n) {
            return Err(Error::Config("system.a must be square".into()));
        }
        let m = self.b.first().map(|r| r.len()).unwrap_or(0);
        if self.b.len() != n || self.b.iter().any(|r| r.len() != m) || m == 0 {
            return Err(Error::Config("system.b must be n x m".into()));
        }
        let imag = |src: &Option<Vec<Vec<f64>>>, i: usize, j: usize| -> f64 {
            src.as_ref().and_then(|rows| rows.get(i)).and_then(|r| r.get(j)).copied().unwrap_or(0.0)
        };
        let a = CMatrix::from_fn(n, n, |i, j| C64::new(self.a[i][j], imag(&self.a_im, i, j)));
        let b = CMatrix::from_fn(n, m, |i, j| C64::new(self.b[i][j], imag(&self.b_im, i, j)));
        CoupledSystem::new(a, b, self.mu_shift)
    }
}

/// Initial state: explicit per-mode coefficients or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// coeffs[k][component], real parts.
    #[serde(default)]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub coeffs_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub random: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { coeffs: None, coeffs_im: None, random: true, seed: 1, amplitude: 1.0 }
    }
}

/// splitmix64 stream in [-1, 1], deterministic across platforms.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z as f64 / u64::MAX as f64) * 2.0 - 1.0
    }
}

impl InitialConfig {
    pub fn build_1d(&self, k_modes: usize, n: usize, seed_override: Option<u64>) -> Result<ModalState1d, Error> {
        if let Some(rows) = &self.coeffs {
            if rows.len() != k_modes || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!(
                    "initial.coeffs must be {k_modes} rows of {n} entries"
                )));
            }
            let imag = |i: usize, j: usize| -> f64 {
                self.coeffs_im
                    .as_ref()
                    .and_then(|rows| rows.get(i))
                    .and_then(|r| r.get(j))
                    .copied()
                    .unwrap_or(0.0)
            };
            return Ok(ModalState1d::new(
                (0..k_modes)
                    .map(|k| {
                        CVector::from_fn(n, |c, _| {
                            C64::new(rows[k][c] * self.amplitude, imag(k, c) * self.amplitude)
                        })
                    })
                    .collect(),
            ));
        }
        if !self.random {
            return Err(Error::Config("initial data needs coeffs or random = true".into()));
        }
        let mut rng = SplitMix(seed_override.unwrap_or(self.seed));
        Ok(ModalState1d::new(
            (0..k_modes)
                .map(|_| CVector::from_fn(n, |_, _| C64::new(rng.next_f64() * self.amplitude, 0.0)))
                .collect(),
        ))
    }

    pub fn build_2d(
        &self,
        k_modes: usize,
        j_modes: usize,
        n: usize,
        seed_override: Option<u64>,
    ) -> Result<ModalState2d, Error> {
        if let Some(rows) = &self.coeffs {
            // rows are (k major, j minor) with n entries each
            if rows.len() != k_modes * j_modes || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!(
                    "initial.coeffs must be {} rows of {n} entries (k-major)",
                    k_modes * j_modes
                )));
            }
            let imag = |i: usize, c: usize| -> f64 {
                self.coeffs_im
                    .as_ref()
                    .and_then(|r| r.get(i))
                    .and_then(|r| r.get(c))
                    .copied()
                    .unwrap_or(0.0)
            };
            let mut u = ModalState2d::zero(k_modes, j_modes, n);
            for k in 0..k_modes {
                for j in 0..j_modes {
                    let row = k * j_modes + j;
                    u.coeffs[k][j] = CVector::from_fn(n, |c, _| {
                        C64::new(rows[row][c] * self.amplitude, imag(row, c) * self.amplitude)
                    });
                }
            }
            return Ok(u);
        }
        if !self.random {
            return Err(Error::Config("initial data needs coeffs or random = true".into()));
        }
        let mut rng = SplitMix(seed_override.unwrap_or(self.seed));
        let mut u = ModalState2d::zero(k_modes, j_modes, n);
        for k in 0..k_modes {
            for j in 0..j_modes {
                u.coeffs[k][j] =
                    CVector::from_fn(n, |_, _| C64::new(rng.next_f64() * self.amplitude, 0.0));
            }
        }
        Ok(u)
    }
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub alpha: f64,
    pub k_max: usize,
    #[serde(default = "default_mesh")]
    pub oracle_mesh: usize,
    /// Modes compared against the finite-volume oracle (they dominate the
    /// run time).
    #[serde(default = "default_oracle_modes")]
    pub oracle_modes: usize,
}

fn default_mesh() -> usize {
    4000
}

fn default_oracle_modes() -> usize {
    5
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub alpha: f64,
    pub k_max: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanConfig {
    pub alpha: f64,
    pub k_max: usize,
    pub system: SystemConfig,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_rank_tol() -> f64 {
    1e-9
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Control1dConfig {
    pub alpha: f64,
    pub k_modes: usize,
    pub t_horizon: f64,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
    /// Mesh size for the verification run of the finite-volume oracle
    /// (0 disables it).
    #[serde(default)]
    pub oracle_mesh: usize,
}

fn default_cond_cap() -> f64 {
    1e18
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCurveConfig {
    pub alpha: f64,
    pub k_modes: usize,
    pub t_list: Vec<f64>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralIneqConfig {
    pub alpha_y: f64,
    pub omega: [f64; 2],
    pub j_max: usize,
    #[serde(default)]
    pub j_list: Option<Vec<usize>>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Control2dConfig {
    pub alpha: [f64; 2],
    pub k_modes: usize,
    pub j_modes: usize,
    pub t_horizon: f64,
    pub rho: f64,
    #[serde(default)]
    pub beta: Option<usize>,
    #[serde(default = "default_k_stop")]
    pub k_stop: usize,
    pub omega: [f64; 2],
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
    /// Time samples per step and y samples across ω in the field dump.
    #[serde(default = "default_field_t")]
    pub field_time_samples: usize,
    #[serde(default = "default_field_y")]
    pub field_y_samples: usize,
}

fn default_k_stop() -> usize {
    6
}

fn default_field_t() -> usize {
    64
}

fn default_field_y() -> usize {
    33
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
