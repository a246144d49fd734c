use num_complex::Complex64;

use super::SensingOperator;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, CMatrix, CVector};

/// Recovered coefficients and the selected atoms (sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub lambda: CVector,
    pub support: Vec<usize>,
}

/// Correlations within this factor of the maximum count as ties.
const TIE_RTOL: f64 = 1e-10;
/// Residuals below this fraction of `‖y‖` are treated as zero.
const RESIDUAL_FLOOR: f64 = 1e-12;
/// Atoms whose normalized inner product with a chosen atom exceeds this are
/// duplicates of it.
const COLLINEAR: f64 = 1.0 - 1e-9;
const SP_MAX_ITERATIONS: usize = 50;
const SP_STALL_RTOL: f64 = 1e-8;

fn check_sparsity(op: &dyn SensingOperator, y: &CVector, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("sparsity", "must be at least 1"));
    }
    if k > op.nrows() {
        return Err(Error::invalid(
            "sparsity",
            format!("{k} exceeds the {} measurements", op.nrows()),
        ));
    }
    crate::error::check_dims("y", (op.nrows(), 1), (y.len(), 1))
}

fn submatrix(op: &dyn SensingOperator, support: &[usize]) -> CMatrix {
    let cols: Vec<CVector> = support.iter().map(|&i| op.column(i)).collect();
    CMatrix::from_columns(&cols)
}

fn scatter(len: usize, support: &[usize], coeffs: &CVector) -> CVector {
    let mut out = CVector::zeros(len);
    for (&i, c) in support.iter().zip(coeffs.iter()) {
        out[i] = *c;
    }
    out
}

fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v / Complex64::from(n)
    } else {
        v
    }
}

/// Picks up to `count` atoms in decreasing order of `score`, lowest index
/// first among near-ties, skipping atoms in `exclude` and atoms collinear with
/// anything already chosen or excluded.
fn select(op: &dyn SensingOperator, score: &[f64], count: usize, exclude: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..score.len()).filter(|&i| score[i] > 0.0).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    // regroup near-ties so the lowest index wins
    let mut ranked = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let top = score[order[start]];
        let mut end = start + 1;
        while end < order.len() && score[order[end]] >= top * (1.0 - TIE_RTOL) {
            end += 1;
        }
        let mut group = order[start..end].to_vec();
        group.sort_unstable();
        ranked.extend(group);
        start = end;
    }

    let mut taken: Vec<CVector> = exclude.iter().map(|&i| normalized(op.column(i))).collect();
    let mut chosen = Vec::with_capacity(count);
    for i in ranked {
        if chosen.len() == count {
            break;
        }
        if exclude.contains(&i) {
            continue;
        }
        let col = normalized(op.column(i));
        if taken.iter().any(|t| t.dotc(&col).norm() > COLLINEAR) {
            continue;
        }
        taken.push(col);
        chosen.push(i);
    }
    chosen
}

fn correlations(op: &dyn SensingOperator, r: &CVector, norms: &[f64]) -> Vec<f64> {
    op.apply_adjoint(r)
        .iter()
        .zip(norms)
        .map(|(v, &n)| if n > 0.0 { v.norm() / n } else { 0.0 })
        .collect()
}

fn fit(op: &dyn SensingOperator, y: &CVector, support: &[usize]) -> (CVector, CVector) {
    let a = submatrix(op, support);
    let coeffs = least_squares(&a, y);
    let residual = y - a * &coeffs;
    (coeffs, residual)
}

/// Orthogonal matching pursuit: `k` greedy selections by normalized
/// correlation with the residual, each followed by a least-squares refit.
/// Stops early once the residual vanishes.
pub fn omp(op: &dyn SensingOperator, y: &CVector, k: usize) -> Result<SparseEstimate> {
    check_sparsity(op, y, k)?;
    let norms = op.column_norms();
    let floor = RESIDUAL_FLOOR * y.norm();
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut coeffs = CVector::zeros(0);
    let mut residual = y.clone();
    while support.len() < k && residual.norm() > floor {
        let score = correlations(op, &residual, &norms);
        let next = select(op, &score, 1, &support);
        let Some(&atom) = next.first() else { break };
        support.push(atom);
        (coeffs, residual) = fit(op, y, &support);
    }
    Ok(finish(op.ncols(), support, coeffs))
}

fn finish(len: usize, support: Vec<usize>, coeffs: CVector) -> SparseEstimate {
    let lambda = scatter(len, &support, &coeffs);
    let mut support = support;
    support.sort_unstable();
    SparseEstimate { lambda, support }
}

/// Subspace pursuit: start from the `k` best-correlated atoms, then
/// repeatedly merge `k` more, refit, prune back to the `k` largest
/// coefficients and refit, until the residual stops decreasing by more than
/// a `1e-8` fraction or 50 iterations pass.
pub fn subspace_pursuit(op: &dyn SensingOperator, y: &CVector, k: usize) -> Result<SparseEstimate> {
    check_sparsity(op, y, k)?;
    let norms = op.column_norms();
    let floor = RESIDUAL_FLOOR * y.norm();
    if y.norm() == 0.0 {
        return Ok(finish(op.ncols(), Vec::new(), CVector::zeros(0)));
    }

    let mut support = select(op, &correlations(op, y, &norms), k, &[]);
    let (mut coeffs, mut residual) = fit(op, y, &support);
    for _ in 0..SP_MAX_ITERATIONS {
        if residual.norm() <= floor {
            break;
        }
        let extra = select(op, &correlations(op, &residual, &norms), k, &support);
        if extra.is_empty() {
            break;
        }
        let mut merged = support.clone();
        merged.extend(extra);
        let (merged_coeffs, _) = fit(op, y, &merged);
        let magnitude: Vec<f64> = merged
            .iter()
            .zip(merged_coeffs.iter())
            .map(|(&i, c)| c.norm() * norms[i])
            .collect();
        let mut order: Vec<usize> = (0..merged.len()).collect();
        order.sort_by(|&a, &b| magnitude[b].total_cmp(&magnitude[a]).then(merged[a].cmp(&merged[b])));
        let candidate: Vec<usize> = order.iter().take(k).map(|&p| merged[p]).collect();
        let (cand_coeffs, cand_residual) = fit(op, y, &candidate);
        if cand_residual.norm() >= residual.norm() * (1.0 - SP_STALL_RTOL) {
            break;
        }
        support = candidate;
        coeffs = cand_coeffs;
        residual = cand_residual;
    }
    Ok(finish(op.ncols(), support, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, unit_modulus_vector};
    use crate::sparse::{stack_sparse, SparseChannel, SparseProblem};

    fn instance(
        l: usize,
        p: usize,
        j: usize,
        seed: u64,
    ) -> (SparseProblem, impl SensingOperator, SparseChannel, CVector) {
        let problem = SparseProblem::new(4, 8, 4, 8, 8).unwrap();
        let mut rng = seeded(seed);
        let ch = SparseChannel::on_grid(&problem, l, p, &mut rng).unwrap();
        let xs: Vec<_> = (0..j).map(|_| unit_modulus_vector(4, &mut rng)).collect();
        let psis: Vec<_> = (0..j).map(|_| unit_modulus_vector(8, &mut rng)).collect();
        let op = stack_sparse(&xs, &psis, &problem).unwrap();
        let y = op.apply(ch.lambda.as_ref().unwrap());
        (problem, op, ch, y)
    }

    #[test]
    fn zero_observation_gives_empty_support() {
        let (_, op, _, y) = instance(1, 1, 5, 0);
        let zero = CVector::zeros(y.len());
        for est in [omp(&op, &zero, 3).unwrap(), subspace_pursuit(&op, &zero, 3).unwrap()] {
            assert!(est.support.is_empty());
            assert!(est.lambda.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn sparsity_bounds() {
        let (_, op, _, y) = instance(1, 1, 2, 0);
        assert!(omp(&op, &y, 0).is_err());
        assert!(omp(&op, &y, 9).is_err());
        assert!(subspace_pursuit(&op, &y, 9).is_err());
    }

    #[test]
    fn single_path_recovered_exactly() {
        for seed in 0..20 {
            let (problem, op, ch, y) = instance(1, 1, 5, seed);
            for est in [omp(&op, &y, 1).unwrap(), subspace_pursuit(&op, &y, 1).unwrap()] {
                assert!(problem.same_support(&est.support, &ch.support), "seed {seed}");
                let truth = ch.lambda.as_ref().unwrap()[ch.support[0]];
                let got = est.lambda[est.support[0]];
                assert!((got - truth).norm() <= 1e-8 * truth.norm().max(1.0), "seed {seed}");
            }
        }
    }

    #[test]
    fn lowest_index_wins_ties() {
        // duplicate columns: every atom of a one-element RIS with one antenna
        // at each end has the same column
        let problem = SparseProblem::new(1, 1, 1, 2, 2).unwrap();
        let one = CVector::from_element(1, Complex64::from(1.0));
        let op = stack_sparse(std::slice::from_ref(&one), std::slice::from_ref(&one), &problem).unwrap();
        let y = op.column(7);
        let est = omp(&op, &y, 1).unwrap();
        assert_eq!(est.support, vec![0]);
    }
}
