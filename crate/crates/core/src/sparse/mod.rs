//! Compressive estimation of few-path (geometric) channels.
//!
//! Both hops are expanded on angular dictionaries, `G ≈ Ã₂ Λ_g Ã₁ᴴ` and
//! `H ≈ B̃₂ Λ_h B̃₁ᴴ`, and the unknown is `λ = vec(Λ_gᵀ ⊗ Λ_h)` of length
//! `(GH)²` with `LP` nonzeros. Entry `a·GH + b` of `λ` pairs a RIS-side index
//! `a = g₂·H + h₁` with a terminal-side index `b = g₁·H + h₂`.
//!
//! The product `Λ_gᵀ ⊗ Λ_h` only enters the observations through the RIS
//! factor `Ã₂ᵀ ⋄ B̃₁ᴴ`, whose rows depend on the difference of the two RIS
//! spatial frequencies. Atoms with equal factors are indistinguishable from
//! any training; [`SparseProblem::canonical_atom`] maps each atom to the lowest
//! index of its class and supports are compared class-wise.

mod operator;
mod solvers;

pub use operator::{
    measurement_row, stack_sparse, DenseOperator, SensingOperator, StructuredOperator, DEFAULT_DENSE_BUDGET,
};
pub use solvers::{omp, subspace_pursuit, SparseEstimate};

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{gen_geometric, steering_vector_sin, GeometricParams};
use crate::error::{Error, Result};
use crate::linalg::{khatri_rao, kron, CMatrix, CVector};
use crate::rng::complex_normal_vector;

/// Unit-norm ULA steering vectors on a grid uniform in `sin φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: CMatrix,
    grid_angles: Vec<f64>,
}

/// `sin φ` of grid point `g` out of `grid`: `2(g − ⌊G/2⌋)/G`, covering
/// `[−1, 1)` with broadside always on the grid.
pub fn grid_sin(g: usize, grid: usize) -> f64 {
    2.0 * (g as f64 - (grid / 2) as f64) / grid as f64
}

pub fn build_dictionary(array_size: usize, grid: usize) -> Result<Dictionary> {
    if grid == 0 {
        return Err(Error::invalid("grid_size", "must be at least 1"));
    }
    if array_size == 0 {
        return Err(Error::invalid("array_size", "must be at least 1"));
    }
    let norm = Complex64::from((array_size as f64).sqrt());
    let mut atoms = CMatrix::zeros(array_size, grid);
    for g in 0..grid {
        atoms.set_column(g, &(steering_vector_sin(array_size, grid_sin(g, grid)) / norm));
    }
    let grid_angles = (0..grid).map(|g| grid_sin(g, grid).asin()).collect();
    Ok(Dictionary { atoms, grid_angles })
}

impl Dictionary {
    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn grid_angles(&self) -> &[f64] {
        &self.grid_angles
    }

    pub fn array_size(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn grid_size(&self) -> usize {
        self.atoms.ncols()
    }
}

/// Dictionaries of one sparse estimation problem (no direct path).
#[derive(Debug, Clone)]
pub struct SparseProblem {
    tx: Dictionary,
    ris_in: Dictionary,
    ris_out: Dictionary,
    rx: Dictionary,
    ris_factor: CMatrix,
    ris_class: Vec<usize>,
    tx_class: Vec<usize>,
    rx_class: Vec<usize>,
}

const CLASS_TOL: f64 = 1e-12;

/// For every column, the lowest index of a column equal to it.
fn column_classes(m: &CMatrix) -> Vec<usize> {
    let mut class: Vec<usize> = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let rep = (0..j)
            .filter(|&k| class[k] == k)
            .find(|&k| (m.column(j) - m.column(k)).camax() <= CLASS_TOL)
            .unwrap_or(j);
        class.push(rep);
    }
    class
}

impl SparseProblem {
    /// Dictionaries for `M_t` transmit antennas, `N` RIS elements and `M_r`
    /// receive antennas, with `G` grid points on the transmitter–RIS hop and
    /// `H` on the RIS–receiver hop.
    pub fn new(tx_antennas: usize, ris_elements: usize, rx_antennas: usize, g: usize, h: usize) -> Result<Self> {
        let tx = build_dictionary(tx_antennas, g)?;
        let ris_in = build_dictionary(ris_elements, g)?;
        let ris_out = build_dictionary(ris_elements, h)?;
        let rx = build_dictionary(rx_antennas, h)?;
        let ris_factor = khatri_rao(&ris_in.atoms.transpose(), &ris_out.atoms.adjoint())?;
        let ris_class = column_classes(&ris_factor.transpose());
        let tx_class = column_classes(&tx.atoms);
        let rx_class = column_classes(&rx.atoms);
        Ok(SparseProblem {
            tx,
            ris_in,
            ris_out,
            rx,
            ris_factor,
            ris_class,
            tx_class,
            rx_class,
        })
    }

    pub fn tx(&self) -> &Dictionary {
        &self.tx
    }

    pub fn ris_in(&self) -> &Dictionary {
        &self.ris_in
    }

    pub fn ris_out(&self) -> &Dictionary {
        &self.ris_out
    }

    pub fn rx(&self) -> &Dictionary {
        &self.rx
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx.array_size()
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx.array_size()
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_in.array_size()
    }

    /// `GH`, the side length of `Λ_gᵀ ⊗ Λ_h`.
    pub fn block(&self) -> usize {
        self.tx.grid_size() * self.rx.grid_size()
    }

    pub fn lambda_len(&self) -> usize {
        self.block() * self.block()
    }

    /// `Ã₂ᵀ ⋄ B̃₁ᴴ`, of size `GH × N`.
    pub fn ris_factor(&self) -> &CMatrix {
        &self.ris_factor
    }

    /// `(xᵀ ⊗ I)(Ã₁* ⊗ B̃₂) = (xᵀÃ₁*) ⊗ B̃₂`, of size `M_r × GH`.
    pub fn terminal_factor(&self, x: &CVector) -> Result<CMatrix> {
        crate::error::check_dims("x", (self.tx_antennas(), 1), (x.len(), 1))?;
        let row = x.transpose() * self.tx.atoms.conjugate();
        let row = CMatrix::from_row_slice(1, row.len(), row.as_slice());
        Ok(kron(&row, &self.rx.atoms))
    }

    /// Splits a `λ` index into its (RIS-side, terminal-side) pair.
    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx / self.block(), idx % self.block())
    }

    /// Lowest index of an atom whose measurement column is identical to
    /// atom `idx` under every pilot and RIS state.
    pub fn canonical_atom(&self, idx: usize) -> usize {
        let h = self.rx.grid_size();
        let (j, i) = self.split_index(idx);
        let (g1, h2) = (i / h, i % h);
        let i = self.tx_class[g1] * h + self.rx_class[h2];
        self.ris_class[j] * self.block() + i
    }

    pub fn support_classes(&self, support: &[usize]) -> BTreeSet<usize> {
        support.iter().map(|&i| self.canonical_atom(i)).collect()
    }

    pub fn same_support(&self, a: &[usize], b: &[usize]) -> bool {
        self.support_classes(a) == self.support_classes(b)
    }
}

/// A channel realization for sparse-recovery experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChannel {
    /// `G`, transmitter to RIS (`N × M_t`).
    pub tx_ris: CMatrix,
    /// `H`, RIS to receiver (`M_r × N`).
    pub ris_rx: CMatrix,
    /// Ground-truth `λ` when every path lies on the grid.
    pub lambda: Option<CVector>,
    pub support: Vec<usize>,
}

impl SparseChannel {
    /// `L` transmitter–RIS paths and `P` RIS–receiver paths with CN(0,1) gains
    /// on grid angles. Departure and arrival grid indices are distinct within
    /// each hop.
    pub fn on_grid<R: Rng + ?Sized>(problem: &SparseProblem, l: usize, p: usize, rng: &mut R) -> Result<Self> {
        Self::generate(problem, l, p, 0.0, rng)
    }

    /// As [`SparseChannel::on_grid`] with every spatial frequency shifted by
    /// `offset` grid cells, so that no path lies on the grid for
    /// `offset = 0.5`.
    pub fn off_grid<R: Rng + ?Sized>(
        problem: &SparseProblem,
        l: usize,
        p: usize,
        offset: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::generate(problem, l, p, offset, rng)
    }

    fn generate<R: Rng + ?Sized>(
        problem: &SparseProblem,
        l: usize,
        p: usize,
        offset: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let g = problem.tx.grid_size();
        let h = problem.rx.grid_size();
        if l == 0 || l > g {
            return Err(Error::invalid("L", format!("need 1 ≤ L ≤ G = {g}, got {l}")));
        }
        if p == 0 || p > h {
            return Err(Error::invalid("P", format!("need 1 ≤ P ≤ H = {h}, got {p}")));
        }
        let g1: Vec<usize> = sample(rng, g, l).into_vec();
        let g2: Vec<usize> = sample(rng, g, l).into_vec();
        let alpha = complex_normal_vector(l, rng);
        let h1: Vec<usize> = sample(rng, h, p).into_vec();
        let h2: Vec<usize> = sample(rng, h, p).into_vec();
        let beta = complex_normal_vector(p, rng);

        let angle = |idx: usize, grid: usize| {
            let s = grid_sin(idx, grid) + 2.0 * offset / grid as f64;
            // the array response is 2-periodic in sin φ
            let wrapped = (s + 1.0).rem_euclid(2.0) - 1.0;
            wrapped.asin()
        };
        let tx_ris = gen_geometric(
            &GeometricParams::new(
                alpha.clone(),
                g1.iter().map(|&i| angle(i, g)).collect(),
                g2.iter().map(|&i| angle(i, g)).collect(),
            )?,
            problem.ris_elements(),
            problem.tx_antennas(),
        );
        let ris_rx = gen_geometric(
            &GeometricParams::new(
                beta.clone(),
                h1.iter().map(|&i| angle(i, h)).collect(),
                h2.iter().map(|&i| angle(i, h)).collect(),
            )?,
            problem.rx_antennas(),
            problem.ris_elements(),
        );

        let mut support = Vec::with_capacity(l * p);
        let lambda = if offset == 0.0 {
            let n = problem.ris_elements() as f64;
            let scale_g = (n * problem.tx_antennas() as f64).sqrt();
            let scale_h = (n * problem.rx_antennas() as f64).sqrt();
            let mut lambda = CVector::zeros(problem.lambda_len());
            for a in 0..l {
                for b in 0..p {
                    let idx = (g2[a] * h + h1[b]) * problem.block() + g1[a] * h + h2[b];
                    lambda[idx] = alpha[a] * beta[b] * Complex64::from(scale_g * scale_h);
                    support.push(idx);
                }
            }
            support.sort_unstable();
            Some(lambda)
        } else {
            None
        };
        Ok(SparseChannel {
            tx_ris,
            ris_rx,
            lambda,
            support,
        })
    }

    /// The reflected part of the cascaded channel, `Gᵀ ⋄ H` (`M_tM_r × N`).
    pub fn cascaded(&self) -> CMatrix {
        khatri_rao(&self.tx_ris.transpose(), &self.ris_rx).expect("consistent channel dimensions")
    }
}

/// `(Ã₁* ⊗ B̃₂) Λ (Ã₂ᵀ ⋄ B̃₁ᴴ)`: column `n` is `vec(H̄)` for `ψ = e_n`, so the
/// result is the cascaded channel `Gᵀ ⋄ H` implied by `λ`.
pub fn reconstruct_cascaded(lambda: &CVector, problem: &SparseProblem) -> Result<CMatrix> {
    crate::error::check_dims("lambda", (problem.lambda_len(), 1), (lambda.len(), 1))?;
    let block = problem.block();
    let d = problem.ris_factor();
    let mut lambda_d = CMatrix::zeros(block, problem.ris_elements());
    for (idx, v) in lambda.iter().enumerate() {
        if *v == Complex64::default() {
            continue;
        }
        let (j, i) = problem.split_index(idx);
        for n in 0..d.ncols() {
            lambda_d[(i, n)] += v * d[(j, n)];
        }
    }
    let outer = kron(&problem.tx.atoms.conjugate(), &problem.rx.atoms);
    Ok(outer * lambda_d)
}

/// `H̄ = H diag(ψ) G` implied by `λ` (`M_r × M_t`).
pub fn reconstruct_channel(lambda: &CVector, problem: &SparseProblem, psi: &CVector) -> Result<CMatrix> {
    crate::error::check_dims("psi", (problem.ris_elements(), 1), (psi.len(), 1))?;
    let v = reconstruct_cascaded(lambda, problem)? * psi;
    Ok(CMatrix::from_column_slice(
        problem.rx_antennas(),
        problem.tx_antennas(),
        v.as_slice(),
    ))
}

/// `‖est − truth‖² / ‖truth‖²`.
pub fn nmse(estimate: &CMatrix, truth: &CMatrix) -> f64 {
    (estimate - truth).norm_squared() / truth.norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseAlgorithm {
    Omp,
    Sp,
}

impl SparseAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            SparseAlgorithm::Omp => "omp",
            SparseAlgorithm::Sp => "sp",
        }
    }
}

pub const DEFAULT_BUDGET_CONSTANT: f64 = 4.0;

/// Training slots for recovering an `LP`-sparse `λ`:
/// `⌈c·LP·ln(GH)/M_r⌉` for OMP and `⌈c·LP·ln(GH/√(LP))/M_r⌉` for SP, at
/// least one.
pub fn pilot_budget(
    l: usize,
    p: usize,
    g: usize,
    h: usize,
    rx_antennas: usize,
    algorithm: SparseAlgorithm,
    constant: f64,
) -> Result<usize> {
    for (name, v) in [("L", l), ("P", p), ("G", g), ("H", h), ("M_r", rx_antennas)] {
        if v == 0 {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    if !(constant.is_finite() && constant > 0.0) {
        return Err(Error::invalid(
            "budget_constant",
            format!("must be positive, got {constant}"),
        ));
    }
    let lp = (l * p) as f64;
    let gh = (g * h) as f64;
    let log_term = match algorithm {
        SparseAlgorithm::Omp => gh.ln(),
        SparseAlgorithm::Sp => (gh / lp.sqrt()).ln(),
    };
    let slots = (constant * lp * log_term / rx_antennas as f64).ceil();
    Ok((slots as usize).max(1))
}
