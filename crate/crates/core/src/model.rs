//! Narrowband RIS system model.
//!
//! The received signal through an `N`-element surface is
//! `y = √ρ (H_d + H diag(ψ) G) x + w`. Stacking the direct channel and the
//! per-element cascaded channels as columns of `H_c = [vec(H_d)  Gᵀ ⋄ H]`
//! gives the equivalent linear form `y = √ρ (ψ̃ᵀ ⊗ xᵀ ⊗ I) vec(H_c) + w` with
//! `ψ̃ = [1; ψ]`, which is what the estimators work with.

use num_complex::Complex64;

use crate::error::{check_dims, Error, Result};
use crate::linalg::{self, CMatrix, CVector};

/// Array sizes and power for one point-to-point link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub ris_elements: usize,
    /// Average transmit power, linear scale. Noise variance is 1.
    pub rho: f64,
    pub direct_path: bool,
    pub seed: u64,
}

impl SystemConfig {
    pub fn new(
        tx_antennas: usize,
        rx_antennas: usize,
        ris_elements: usize,
        rho: f64,
        direct_path: bool,
        seed: u64,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            tx_antennas,
            rx_antennas,
            ris_elements,
            rho,
            direct_path,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tx_antennas", self.tx_antennas),
            ("rx_antennas", self.rx_antennas),
            ("ris_elements", self.ris_elements),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(
                "rho",
                format!("must be positive and finite, got {}", self.rho),
            ));
        }
        Ok(())
    }

    /// Number of columns of `H_c` that are estimated: `N + 1` with a direct
    /// path, `N` without.
    pub fn estimated_columns(&self) -> usize {
        self.ris_elements + usize::from(self.direct_path)
    }

    /// Length of the estimation target.
    pub fn target_len(&self) -> usize {
        self.rx_antennas * self.tx_antennas * self.estimated_columns()
    }
}

/// The channel triple `(H_d, G, H)` for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandChannelSet {
    direct: CMatrix,
    tx_ris: CMatrix,
    ris_rx: CMatrix,
}

impl NarrowbandChannelSet {
    /// `direct` is `M_r × M_t`, `tx_ris` (G) is `N × M_t`, `ris_rx` (H) is `M_r × N`.
    pub fn new(direct: CMatrix, tx_ris: CMatrix, ris_rx: CMatrix) -> Result<Self> {
        let (m_r, m_t) = direct.shape();
        let n = tx_ris.nrows();
        check_dims("G", (n, m_t), tx_ris.shape())?;
        check_dims("H", (m_r, n), ris_rx.shape())?;
        if m_r == 0 || m_t == 0 || n == 0 {
            return Err(Error::invalid("channels", "all dimensions must be at least 1"));
        }
        for (name, m) in [("H_d", &direct), ("G", &tx_ris), ("H", &ris_rx)] {
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid(name, "entries must be finite"));
            }
        }
        Ok(NarrowbandChannelSet { direct, tx_ris, ris_rx })
    }

    /// Channel set with `H_d = 0`.
    pub fn without_direct(tx_ris: CMatrix, ris_rx: CMatrix) -> Result<Self> {
        let direct = CMatrix::zeros(ris_rx.nrows(), tx_ris.ncols());
        Self::new(direct, tx_ris, ris_rx)
    }

    pub fn direct(&self) -> &CMatrix {
        &self.direct
    }

    pub fn tx_ris(&self) -> &CMatrix {
        &self.tx_ris
    }

    pub fn ris_rx(&self) -> &CMatrix {
        &self.ris_rx
    }

    pub fn tx_antennas(&self) -> usize {
        self.direct.ncols()
    }

    pub fn rx_antennas(&self) -> usize {
        self.direct.nrows()
    }

    pub fn ris_elements(&self) -> usize {
        self.tx_ris.nrows()
    }

    /// Checks the set against a configuration's array sizes.
    pub fn check_config(&self, cfg: &SystemConfig) -> Result<()> {
        check_dims("H_d", (cfg.rx_antennas, cfg.tx_antennas), self.direct.shape())?;
        check_dims("G", (cfg.ris_elements, cfg.tx_antennas), self.tx_ris.shape())?;
        check_dims("H", (cfg.rx_antennas, cfg.ris_elements), self.ris_rx.shape())
    }

    /// End-to-end matrix `H_d + H diag(ψ) G`.
    pub fn effective(&self, state: &RisState) -> Result<CMatrix> {
        check_dims("psi", (self.ris_elements(), 1), (state.len(), 1))?;
        let mut scaled = self.tx_ris.clone();
        for (mut row, &p) in scaled.row_iter_mut().zip(state.coefficients().iter()) {
            row *= p;
        }
        Ok(&self.direct + &self.ris_rx * scaled)
    }
}

/// Reflection coefficients of a passive surface, `|ψ_i| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    psi: CVector,
}

const PASSIVE_SLACK: f64 = 1e-12;

impl RisState {
    pub fn new(psi: CVector) -> Result<Self> {
        if let Some(z) = psi.iter().find(|z| z.norm() > 1.0 + PASSIVE_SLACK) {
            return Err(Error::invalid(
                "psi",
                format!("passive coefficient magnitude {} exceeds 1", z.norm()),
            ));
        }
        Ok(RisState { psi })
    }

    pub fn from_slice(psi: &[Complex64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(psi))
    }

    /// All elements switched off.
    pub fn off(n: usize) -> Self {
        RisState { psi: CVector::zeros(n) }
    }

    pub fn coefficients(&self) -> &CVector {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Combined direct-plus-cascaded channel `H_c` (`M_rM_t × (N+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    matrix: CMatrix,
    tx_antennas: usize,
    rx_antennas: usize,
}

impl CascadedChannel {
    pub fn from_matrix(matrix: CMatrix, tx_antennas: usize, rx_antennas: usize) -> Result<Self> {
        if matrix.nrows() != tx_antennas * rx_antennas || matrix.ncols() < 1 {
            return Err(Error::DimensionMismatch {
                operand: "H_c",
                expected: (tx_antennas * rx_antennas, matrix.ncols().max(1)),
                found: matrix.shape(),
            });
        }
        Ok(CascadedChannel {
            matrix,
            tx_antennas,
            rx_antennas,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `h_c = vec(H_c)`.
    pub fn vector(&self) -> CVector {
        linalg::vec(&self.matrix)
    }

    /// `vec` of the reflected columns only (column 0 dropped), the target when
    /// no direct path is present.
    pub fn reflected_vector(&self) -> CVector {
        let cols = self.matrix.ncols() - 1;
        linalg::vec(&self.matrix.columns(1, cols).into_owned())
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    pub fn ris_elements(&self) -> usize {
        self.matrix.ncols() - 1
    }
}

/// `H_c = [vec(H_d)  Gᵀ ⋄ H]`.
pub fn build_cascaded(channels: &NarrowbandChannelSet) -> Result<CascadedChannel> {
    let (m_r, m_t) = (channels.rx_antennas(), channels.tx_antennas());
    let n = channels.ris_elements();
    let reflected = linalg::khatri_rao(&channels.tx_ris.transpose(), &channels.ris_rx)?;
    let mut matrix = CMatrix::zeros(m_r * m_t, n + 1);
    matrix.set_column(0, &linalg::vec(&channels.direct));
    matrix.columns_mut(1, n).copy_from(&reflected);
    CascadedChannel::from_matrix(matrix, m_t, m_r)
}

/// `ψ̃ = [1; ψ]`.
pub fn extended_state(state: &RisState) -> CVector {
    let mut out = CVector::zeros(state.len() + 1);
    out[0] = Complex64::new(1.0, 0.0);
    out.rows_mut(1, state.len()).copy_from(state.coefficients());
    out
}

/// Received vector in matrix form, `√ρ (H_d + H diag(ψ) G) x + w`.
pub fn rx_matrix_form(
    channels: &NarrowbandChannelSet,
    state: &RisState,
    x: &CVector,
    noise: &CVector,
    rho: f64,
) -> Result<CVector> {
    check_dims("x", (channels.tx_antennas(), 1), (x.len(), 1))?;
    check_dims("noise", (channels.rx_antennas(), 1), (noise.len(), 1))?;
    let h = channels.effective(state)?;
    Ok(h * x * Complex64::from(rho.sqrt()) + noise)
}

/// Received vector in Kronecker form, `√ρ (ψ̃ᵀ ⊗ xᵀ ⊗ I) h_c + w`.
pub fn rx_vectorized(
    cascaded: &CascadedChannel,
    state: &RisState,
    x: &CVector,
    noise: &CVector,
    rho: f64,
) -> Result<CVector> {
    check_dims("psi", (cascaded.ris_elements(), 1), (state.len(), 1))?;
    check_dims("x", (cascaded.tx_antennas(), 1), (x.len(), 1))?;
    check_dims("noise", (cascaded.rx_antennas(), 1), (noise.len(), 1))?;
    let z = training_row(x, state, cascaded.rx_antennas());
    Ok(z * cascaded.vector() * Complex64::from(rho.sqrt()) + noise)
}

/// Per-slot measurement matrix `Z_j = ψ̃ᵀ ⊗ xᵀ ⊗ I_{M_r}`.
pub fn training_row(x: &CVector, state: &RisState, rx_antennas: usize) -> CMatrix {
    kron_row(extended_state(state).as_slice(), x.as_slice(), rx_antennas)
}

/// `coeffsᵀ ⊗ xᵀ ⊗ I_{m_r}` built directly, without intermediate products.
pub(crate) fn kron_row(coeffs: &[Complex64], x: &[Complex64], rx_antennas: usize) -> CMatrix {
    let block = x.len() * rx_antennas;
    let mut z = CMatrix::zeros(rx_antennas, coeffs.len() * block);
    for (s, &cs) in coeffs.iter().enumerate() {
        for (t, &xt) in x.iter().enumerate() {
            let v = cs * xt;
            for r in 0..rx_antennas {
                z[(r, s * block + t * rx_antennas + r)] = v;
            }
        }
    }
    z
}
