use num_complex::Complex64;

use super::SparseProblem;
use crate::error::{check_dims, Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Largest dense measurement matrix, in complex entries, that will be
/// materialized (256 MiB).
pub const DEFAULT_DENSE_BUDGET: usize = 1 << 24;

/// A linear map `λ ↦ Kλ` with its adjoint.
pub trait SensingOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, lambda: &CVector) -> CVector;
    fn apply_adjoint(&self, r: &CVector) -> CVector;
    fn column(&self, idx: usize) -> CVector;
    fn column_norms(&self) -> Vec<f64>;
}

/// One training slot: RIS factor `c = (Ã₂ᵀ ⋄ B̃₁ᴴ)ψ` and terminal factor
/// `E = (xᵀÃ₁*) ⊗ B̃₂`, so that `K(x, ψ)λ = E Λ c` with `Λ` the `GH × GH`
/// unvec of `λ`.
#[derive(Debug, Clone)]
struct Slot {
    c: CVector,
    e: CMatrix,
}

/// The stacked measurement operator, applied through its Kronecker structure.
#[derive(Debug, Clone)]
pub struct StructuredOperator {
    slots: Vec<Slot>,
    block: usize,
    rx_antennas: usize,
}

fn slot(x: &CVector, psi: &CVector, problem: &SparseProblem) -> Result<Slot> {
    check_dims("psi", (problem.ris_elements(), 1), (psi.len(), 1))?;
    Ok(Slot {
        c: problem.ris_factor() * psi,
        e: problem.terminal_factor(x)?,
    })
}

/// Stacks the measurement rows of `J` pilot/state pairs.
pub fn stack_sparse(pilots: &[CVector], states: &[CVector], problem: &SparseProblem) -> Result<StructuredOperator> {
    if pilots.is_empty() {
        return Err(Error::invalid("J", "at least one training slot is required"));
    }
    if pilots.len() != states.len() {
        return Err(Error::DimensionMismatch {
            operand: "states",
            expected: (pilots.len(), 1),
            found: (states.len(), 1),
        });
    }
    let slots = pilots
        .iter()
        .zip(states)
        .map(|(x, psi)| slot(x, psi, problem))
        .collect::<Result<Vec<_>>>()?;
    Ok(StructuredOperator {
        slots,
        block: problem.block(),
        rx_antennas: problem.rx_antennas(),
    })
}

fn check_budget(rows: usize, cols: usize, budget: usize) -> Result<()> {
    let required = rows.saturating_mul(cols);
    if required > budget {
        Err(Error::MemoryBudget { required, budget })
    } else {
        Ok(())
    }
}

/// Dense `K(x, ψ) = ((Ã₂ᵀ ⋄ B̃₁ᴴ)ψ)ᵀ ⊗ ((xᵀ ⊗ I)(Ã₁* ⊗ B̃₂))`, refused when it
/// would exceed `budget` entries.
pub fn measurement_row(x: &CVector, psi: &CVector, problem: &SparseProblem, budget: usize) -> Result<CMatrix> {
    check_budget(problem.rx_antennas(), problem.lambda_len(), budget)?;
    let s = slot(x, psi, problem)?;
    let c_row = CMatrix::from_row_slice(1, s.c.len(), s.c.as_slice());
    Ok(crate::linalg::kron(&c_row, &s.e))
}

impl StructuredOperator {
    pub fn slots(&self) -> usize {
        self.slots.len()
    }

    /// Materializes `K`, subject to `budget`.
    pub fn to_dense(&self, budget: usize) -> Result<DenseOperator> {
        check_budget(self.nrows(), self.ncols(), budget)?;
        let mut k = CMatrix::zeros(self.nrows(), self.ncols());
        for (s, slot) in self.slots.iter().enumerate() {
            let rows = s * self.rx_antennas;
            for (j, cj) in slot.c.iter().enumerate() {
                let block = slot.e.clone() * *cj;
                k.view_mut((rows, j * self.block), (self.rx_antennas, self.block))
                    .copy_from(&block);
            }
        }
        Ok(DenseOperator { k })
    }
}

impl SensingOperator for StructuredOperator {
    fn nrows(&self) -> usize {
        self.slots.len() * self.rx_antennas
    }

    fn ncols(&self) -> usize {
        self.block * self.block
    }

    fn apply(&self, lambda: &CVector) -> CVector {
        assert_eq!(lambda.len(), self.ncols(), "lambda length");
        let b = self.block;
        let mut out = CVector::zeros(self.nrows());
        for (s, slot) in self.slots.iter().enumerate() {
            // Λc, accumulated column by column of Λ
            let mut lc = CVector::zeros(b);
            for (j, cj) in slot.c.iter().enumerate() {
                let col = &lambda.as_slice()[j * b..(j + 1) * b];
                if col.iter().all(|v| *v == Complex64::default()) {
                    continue;
                }
                for (acc, v) in lc.iter_mut().zip(col) {
                    *acc += v * cj;
                }
            }
            let y = &slot.e * lc;
            out.rows_mut(s * self.rx_antennas, self.rx_antennas).copy_from(&y);
        }
        out
    }

    fn apply_adjoint(&self, r: &CVector) -> CVector {
        assert_eq!(r.len(), self.nrows(), "residual length");
        let b = self.block;
        let mut out = CVector::zeros(self.ncols());
        for (s, slot) in self.slots.iter().enumerate() {
            let er = slot.e.ad_mul(&r.rows(s * self.rx_antennas, self.rx_antennas));
            for (j, cj) in slot.c.iter().enumerate() {
                let cj = cj.conj();
                let dst = &mut out.as_mut_slice()[j * b..(j + 1) * b];
                for (acc, v) in dst.iter_mut().zip(er.iter()) {
                    *acc += v * cj;
                }
            }
        }
        out
    }

    fn column(&self, idx: usize) -> CVector {
        let (j, i) = (idx / self.block, idx % self.block);
        let mut out = CVector::zeros(self.nrows());
        for (s, slot) in self.slots.iter().enumerate() {
            let col = slot.e.column(i) * slot.c[j];
            out.rows_mut(s * self.rx_antennas, self.rx_antennas).copy_from(&col);
        }
        out
    }

    fn column_norms(&self) -> Vec<f64> {
        let b = self.block;
        let mut sq = vec![0.0; b * b];
        for slot in &self.slots {
            let e_sq: Vec<f64> = slot.e.column_iter().map(|c| c.norm_squared()).collect();
            for (j, cj) in slot.c.iter().enumerate() {
                let w = cj.norm_sqr();
                for (i, e) in e_sq.iter().enumerate() {
                    sq[j * b + i] += w * e;
                }
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }
}

/// A materialized measurement matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    k: CMatrix,
}

impl DenseOperator {
    pub fn new(k: CMatrix) -> Self {
        DenseOperator { k }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.k
    }
}

impl SensingOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.k.nrows()
    }

    fn ncols(&self) -> usize {
        self.k.ncols()
    }

    fn apply(&self, lambda: &CVector) -> CVector {
        &self.k * lambda
    }

    fn apply_adjoint(&self, r: &CVector) -> CVector {
        self.k.ad_mul(r)
    }

    fn column(&self, idx: usize) -> CVector {
        self.k.column(idx).into_owned()
    }

    fn column_norms(&self) -> Vec<f64> {
        self.k.column_iter().map(|c| c.norm()).collect()
    }
}
