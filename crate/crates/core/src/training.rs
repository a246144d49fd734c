//! RIS training-state families and the stacked training matrix.
//!
//! A training plan holds one RIS state fixed for `M_t` consecutive slots
//! while the transmitter cycles through the columns of its pilot matrix, then
//! moves to the next state. Stacking the per-slot rows gives `Z̃`, whose Gram
//! matrix factors as `M_t (Ψ̃Ψ̃ᴴ)* ⊗ I`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{kron_row, SystemConfig};

/// Which family the RIS training states are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainingFamily {
    Canonical,
    Dft,
    Hadamard,
    QuantizedDft {
        phase_count: usize,
    },
    /// Caller-supplied states.
    Custom,
}

impl TrainingFamily {
    pub fn name(&self) -> String {
        match self {
            TrainingFamily::Canonical => "canonical".into(),
            TrainingFamily::Dft => "dft".into(),
            TrainingFamily::Hadamard => "hadamard".into(),
            TrainingFamily::QuantizedDft { phase_count } => format!("qdft{phase_count}"),
            TrainingFamily::Custom => "custom".into(),
        }
    }
}

impl std::str::FromStr for TrainingFamily {
    type Err = Error;

    /// Parses the names produced by [`TrainingFamily::name`], except `custom`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(TrainingFamily::Canonical),
            "dft" => Ok(TrainingFamily::Dft),
            "hadamard" => Ok(TrainingFamily::Hadamard),
            _ => s
                .strip_prefix("qdft")
                .and_then(|l| l.parse().ok())
                .map(|phase_count| TrainingFamily::QuantizedDft { phase_count })
                .ok_or_else(|| {
                    Error::invalid(
                        "family",
                        format!("unknown training family `{s}` (expected canonical, dft, hadamard or qdft<L>)"),
                    )
                }),
        }
    }
}

/// `I_N`: one active element per state.
pub fn canonical_states(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Columns of the `N`-point DFT matrix.
pub fn dft_states(n: usize) -> CMatrix {
    linalg::dft_matrix(n)
}

/// Sylvester-construction Hadamard matrix. `n` must be a power of two.
pub fn hadamard_states(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::UnsupportedSize {
            size: n,
            reason: "N must be a power of 2",
        });
    }
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < n {
        let k = h.nrows();
        let mut next = DMatrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    Ok(h)
}

/// DFT states with each phase snapped to the nearest of `phase_count`
/// uniform levels `{2πk/L}`. Ties go to the smaller level index.
pub fn quantized_dft_states(n: usize, phase_count: usize) -> Result<CMatrix> {
    quantize_phases(&dft_states(n), phase_count)
}

fn quantize_phases(m: &CMatrix, phase_count: usize) -> Result<CMatrix> {
    if phase_count < 2 {
        return Err(Error::invalid(
            "phase_count",
            format!("need at least 2 phase levels, got {phase_count}"),
        ));
    }
    let levels: Vec<Complex64> = (0..phase_count)
        .map(|k| linalg::unit_phase(-2.0 * PI * k as f64 / phase_count as f64))
        .collect();
    Ok(m.map(|target| {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, level) in levels.iter().enumerate() {
            let d = (level - target).norm();
            // strict improvement beyond rounding noise; equal distances keep the lower index
            if d < best_dist - 1e-12 {
                best = k;
                best_dist = d;
            }
        }
        levels[best]
    }))
}

/// Unit-modulus pilot matrix (the `M_t`-point DFT), so `X Xᴴ = M_t I`.
pub fn pilot_matrix(tx_antennas: usize) -> CMatrix {
    linalg::dft_matrix(tx_antennas)
}

/// Pilots and RIS states for one training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pilots: CMatrix,
    states: CMatrix,
    family: TrainingFamily,
    direct_path: bool,
}

impl TrainingPlan {
    /// The family's default plan: `N` states without a direct path, `N + 1`
    /// states with one.
    ///
    /// With a direct path the extended matrix `Ψ̃ = [1ᵀ; Ψ]` is the
    /// `(N+1)`-point DFT (or Hadamard) matrix for the orthogonal families, and
    /// `[[1, 1ᵀ], [0, I_N]]` (an all-off state followed by `I_N`) for canonical.
    pub fn new(family: TrainingFamily, cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.ris_elements;
        let states = if cfg.direct_path {
            match family {
                TrainingFamily::Canonical => {
                    let mut s = CMatrix::zeros(n, n + 1);
                    s.columns_mut(1, n).copy_from(&canonical_states(n));
                    s
                }
                TrainingFamily::Dft => dft_states(n + 1).rows(1, n).into_owned(),
                TrainingFamily::Hadamard => {
                    let h = hadamard_states(n + 1).map_err(|_| Error::UnsupportedSize {
                        size: n + 1,
                        reason: "N+1 must be a power of 2 for Hadamard training with a direct path",
                    })?;
                    real_to_complex(&h).rows(1, n).into_owned()
                }
                TrainingFamily::QuantizedDft { phase_count } => {
                    quantized_dft_states(n + 1, phase_count)?.rows(1, n).into_owned()
                }
                TrainingFamily::Custom => {
                    return Err(Error::invalid("family", "use TrainingPlan::custom for custom states"))
                }
            }
        } else {
            match family {
                TrainingFamily::Canonical => canonical_states(n),
                TrainingFamily::Dft => dft_states(n),
                TrainingFamily::Hadamard => real_to_complex(&hadamard_states(n)?),
                TrainingFamily::QuantizedDft { phase_count } => quantized_dft_states(n, phase_count)?,
                TrainingFamily::Custom => {
                    return Err(Error::invalid("family", "use TrainingPlan::custom for custom states"))
                }
            }
        };
        Ok(TrainingPlan {
            pilots: pilot_matrix(cfg.tx_antennas),
            states,
            family,
            direct_path: cfg.direct_path,
        })
    }

    /// Arbitrary pilots (`M_t × P`) and states (`N × S`).
    pub fn custom(pilots: CMatrix, states: CMatrix, direct_path: bool) -> Result<Self> {
        if let Some(z) = states.iter().find(|z| z.norm() > 1.0 + 1e-12) {
            return Err(Error::invalid(
                "states",
                format!("passive coefficient magnitude {} exceeds 1", z.norm()),
            ));
        }
        Ok(TrainingPlan {
            pilots,
            states,
            family: TrainingFamily::Custom,
            direct_path,
        })
    }

    pub fn pilots(&self) -> &CMatrix {
        &self.pilots
    }

    /// `N × S` state matrix `Ψ`.
    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn family(&self) -> TrainingFamily {
        self.family
    }

    pub fn direct_path(&self) -> bool {
        self.direct_path
    }

    pub fn num_states(&self) -> usize {
        self.states.ncols()
    }

    /// Total slot count `J` (pilots per state × states).
    pub fn slots(&self) -> usize {
        self.pilots.ncols() * self.states.ncols()
    }

    /// Coefficients multiplying the estimated columns of `H_c`: `[1ᵀ; Ψ]`
    /// with a direct path, `Ψ` otherwise.
    pub fn coefficient_matrix(&self) -> CMatrix {
        if self.direct_path {
            let (n, s) = self.states.shape();
            let mut ext = CMatrix::zeros(n + 1, s);
            ext.row_mut(0).fill(Complex64::new(1.0, 0.0));
            ext.rows_mut(1, n).copy_from(&self.states);
            ext
        } else {
            self.states.clone()
        }
    }

    /// Closed-form `Z̃ᴴZ̃ = (Ψ̃Ψ̃ᴴ)* ⊗ (XXᴴ)* ⊗ I_{M_r}`, which equals
    /// `M_t (Ψ̃Ψ̃ᴴ)* ⊗ I` for the default unit-modulus pilots.
    pub fn gram_closed_form(&self, rx_antennas: usize) -> CMatrix {
        let coeff = self.coefficient_matrix();
        let psi_gram = (&coeff * coeff.adjoint()).conjugate();
        let pilot_gram = (&self.pilots * self.pilots.adjoint()).conjugate();
        linalg::kron(
            &linalg::kron(&psi_gram, &pilot_gram),
            &CMatrix::identity(rx_antennas, rx_antennas),
        )
    }

    fn check(&self, cfg: &SystemConfig) -> Result<()> {
        if self.direct_path != cfg.direct_path {
            return Err(Error::invalid("direct_path", "plan and configuration disagree"));
        }
        crate::error::check_dims("pilots", (cfg.tx_antennas, self.pilots.ncols()), self.pilots.shape())?;
        crate::error::check_dims("states", (cfg.ris_elements, self.states.ncols()), self.states.shape())
    }
}

fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Stacks `Z_j` for every slot, state-major (each state held for all pilots).
/// Result is `J·M_r × M_rM_t(N+1)` with a direct path, `J·M_r × M_rM_tN`
/// without.
pub fn stack_training(plan: &TrainingPlan, cfg: &SystemConfig) -> Result<CMatrix> {
    plan.check(cfg)?;
    let required = cfg.tx_antennas * cfg.estimated_columns();
    if plan.slots() < required {
        return Err(Error::InsufficientSlots {
            slots: plan.slots(),
            required,
        });
    }
    let m_r = cfg.rx_antennas;
    let coeff = plan.coefficient_matrix();
    let mut z = CMatrix::zeros(plan.slots() * m_r, cfg.target_len());
    let mut row = 0;
    for s in 0..coeff.ncols() {
        let state = coeff.column(s);
        for p in 0..plan.pilots.ncols() {
            let block = kron_row(state.as_slice(), plan.pilots.column(p).as_slice(), m_r);
            z.rows_mut(row, m_r).copy_from(&block);
            row += m_r;
        }
    }
    Ok(z)
}

/// Off-diagonal energy of `ΨΨᴴ` relative to its diagonal; zero for
/// orthogonal families.
pub fn non_orthogonality(states: &CMatrix) -> f64 {
    let g = states * states.adjoint();
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            if i == j {
                diag += g[(i, j)].norm_sqr();
            } else {
                off += g[(i, j)].norm_sqr();
            }
        }
    }
    off / diag
}
