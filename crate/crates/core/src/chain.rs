//! Finite reversible Markov chains and their spectral decomposition.
//!
//! A [`TransitionMatrix`] is only ever built through [`validate_chain`], so
//! every value of that type is row-stochastic, irreducible, aperiodic and
//! reversible with respect to its (strictly positive) stationary law.
//!
//! Eigen-indices are 0-based throughout the crate: index 0 is the trivial
//! eigenvalue 1 and indices `1..d` are the nontrivial part of the spectrum,
//! sorted in descending order.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Detailed balance tolerance, relative to the largest probability flow.
pub const REVERSIBILITY_TOL: f64 = 1e-10;
/// Tolerance on `||pi P - pi||_inf` and on `sum(pi) = 1`.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// Validated row-stochastic reversible chain together with its stationary law.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
    pi: DVector<f64>,
    pi_min: f64,
    // nonzero entries of each row, used for mat-vecs and sampling
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    pub fn d(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    /// Nonzero `(column, probability)` pairs of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `P v`, i.e. the conditional expectation of `v` one step ahead.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.d(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, p)| p * v[j]).sum::<f64>()),
        )
    }

    /// `mu^T P`, the law of the next state when the current one has law `mu`.
    pub fn step_distribution(&self, mu: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.d());
        for (i, row) in self.rows.iter().enumerate() {
            let m = mu[i];
            if m == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += m * p;
            }
        }
        out
    }
}

/// Validate `p` (and `pi`, when supplied) and build a [`TransitionMatrix`].
///
/// When `pi` is `None` it is computed with [`stationary_distribution`].
pub fn validate_chain(p: DMatrix<f64>, pi: Option<DVector<f64>>) -> Result<TransitionMatrix> {
    let d = p.nrows();
    if d < 2 || p.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "transition matrix must be square with d >= 2, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("transition matrix has non-finite entries".into()));
    }
    for i in 0..d {
        let row = p.row(i);
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }

    check_irreducible(&p)?;

    let pi = match pi {
        Some(pi) => {
            if pi.len() != d {
                return Err(Error::InvalidInput(format!("pi has length {}, expected {d}", pi.len())));
            }
            if pi.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("pi has non-finite entries".into()));
            }
            pi
        }
        None => stationary_distribution(&p)?,
    };
    if let Some((index, &value)) = pi.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::NonPositivePi { index, value });
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > STATIONARITY_TOL {
        return Err(Error::InvalidInput(format!("pi sums to {total}, not 1")));
    }

    check_detailed_balance(&p, &pi)?;

    let residual = (p.tr_mul(&pi) - &pi).amax();
    if residual > STATIONARITY_TOL {
        return Err(Error::NoConvergence { residual });
    }

    check_aperiodic(&p)?;

    let rows = (0..d)
        .map(|i| {
            (0..d)
                .filter_map(|j| {
                    let x = p[(i, j)];
                    (x > 0.0).then_some((j, x))
                })
                .collect()
        })
        .collect();
    let pi_min = pi.min();
    Ok(TransitionMatrix { p, pi, pi_min, rows })
}

fn check_irreducible(p: &DMatrix<f64>) -> Result<()> {
    let d = p.nrows();
    let reached = |forward: bool| {
        let mut seen = vec![false; d];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..d {
                let x = if forward { p[(i, j)] } else { p[(j, i)] };
                if x > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    for forward in [true, false] {
        if let Some(missing) = reached(forward).iter().position(|&s| !s) {
            return Err(Error::Reducible(format!(
                "state {missing} and state 0 do not communicate"
            )));
        }
    }
    Ok(())
}

fn check_detailed_balance(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<()> {
    let d = p.nrows();
    let mut max_flow = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            max_flow = max_flow.max(pi[i] * p[(i, j)]);
        }
    }
    let tol = REVERSIBILITY_TOL * max_flow;
    for i in 0..d {
        for j in (i + 1)..d {
            let violation = (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs();
            if violation > tol {
                return Err(Error::NotReversible { i, j, violation });
            }
        }
    }
    Ok(())
}

// A reversible irreducible chain has period 1 or 2; period 2 happens exactly
// when no state holds and the transition graph is bipartite.
fn check_aperiodic(p: &DMatrix<f64>) -> Result<()> {
    let d = p.nrows();
    if (0..d).any(|i| p[(i, i)] > 0.0) {
        return Ok(());
    }
    let mut colour = vec![u8::MAX; d];
    colour[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..d {
            if p[(i, j)] > 0.0 {
                if colour[j] == u8::MAX {
                    colour[j] = 1 - colour[i];
                    queue.push_back(j);
                } else if colour[j] == colour[i] {
                    return Ok(());
                }
            }
        }
    }
    Err(Error::Periodic)
}

/// Stationary distribution of an irreducible row-stochastic matrix.
///
/// Solves `pi (P - I) = 0` with `sum(pi) = 1` by LU factorisation and then
/// checks the residual.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = p.nrows();
    if d == 0 || p.ncols() != d {
        return Err(Error::InvalidInput("transition matrix must be square".into()));
    }
    let mut system = p.transpose() - DMatrix::<f64>::identity(d, d);
    system.row_mut(d - 1).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(d);
    rhs[d - 1] = 1.0;
    let pi = system.lu().solve(&rhs).ok_or(Error::NoConvergence {
        residual: f64::INFINITY,
    })?;
    let residual = (p.tr_mul(&pi) - &pi).amax();
    if !residual.is_finite() || residual > STATIONARITY_TOL {
        return Err(Error::NoConvergence { residual });
    }
    Ok(pi)
}

/// Eigen-system of a reversible chain written in biorthogonal form
/// `P = 1 pi^T + sum_{j>=1} lambda_j h_j q_j^T`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    // columns are h_j (right eigenvectors, unit norm in L2(pi))
    right: DMatrix<f64>,
    // columns are q_j (left eigenvectors)
    left: DMatrix<f64>,
    pi: DVector<f64>,
    pi_min: f64,
    pub lambda_star: f64,
    pub lambda_0: f64,
    pub gamma_star: f64,
    pub gamma_0: f64,
}

impl SpectralDecomposition {
    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in descending order; entry 0 is the trivial eigenvalue.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn right_vector(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.right.column(j)
    }

    pub fn left_vector(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.left.column(j)
    }

    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    /// `q_j^T f` for every eigen-index.
    pub fn projections(&self, f: &[f64]) -> Vec<f64> {
        let f = DVector::from_column_slice(f);
        (self.left.tr_mul(&f)).iter().copied().collect()
    }

    /// `||P - 1 pi^T - sum_{j>=1} lambda_j h_j q_j^T||_inf` (entrywise max).
    pub fn reconstruction_error(&self, chain: &TransitionMatrix) -> f64 {
        let d = self.d();
        let mut scaled = self.right.columns(1, d - 1).clone_owned();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.eigenvalues[k + 1];
        }
        let mut rebuilt = &scaled * self.left.columns(1, d - 1).transpose();
        for i in 0..d {
            for k in 0..d {
                rebuilt[(i, k)] += self.pi[k];
            }
        }
        (chain.matrix() - rebuilt).amax()
    }

    /// `max_{j,k>=1} |q_j^T h_k - [j == k]|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let d = self.d();
        let gram = self.left.columns(1, d - 1).tr_mul(&self.right.columns(1, d - 1));
        (gram - DMatrix::<f64>::identity(d - 1, d - 1)).amax()
    }
}

/// Decompose the symmetrised matrix `A = D P D^{-1}`, `D = diag(sqrt(pi))`.
pub fn spectral_decompose(chain: &TransitionMatrix) -> Result<SpectralDecomposition> {
    let d = chain.d();
    let sqrt_pi = chain.pi().map(f64::sqrt);
    let p = chain.matrix();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = sqrt_pi[i] * p[(i, j)] / sqrt_pi[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;

    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 1_000_000)
        .ok_or_else(|| Error::EigensolverFailure(format!("no convergence for d = {d}")))?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));

    let mut eigenvalues = Vec::with_capacity(d);
    let mut right = DMatrix::<f64>::zeros(d, d);
    let mut left = DMatrix::<f64>::zeros(d, d);
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[k]);
        let mut gamma = eig.eigenvectors.column(k).clone_owned();
        // fix the sign so the first non-negligible coordinate is positive
        let scale = gamma.amax();
        if let Some(first) = gamma.iter().find(|x| x.abs() > 1e-8 * scale) {
            if *first < 0.0 {
                gamma.neg_mut();
            }
        }
        for i in 0..d {
            right[(i, slot)] = gamma[i] / sqrt_pi[i];
            left[(i, slot)] = gamma[i] * sqrt_pi[i];
        }
    }
    eigenvalues[0] = eigenvalues[0].min(1.0);

    let lambda_2 = eigenvalues[1];
    let lambda_d = eigenvalues[d - 1];
    let lambda_star = lambda_2.max(lambda_d.abs());
    let lambda_0 = lambda_2.max(0.0);
    Ok(SpectralDecomposition {
        eigenvalues,
        right,
        left,
        pi: chain.pi().clone(),
        pi_min: chain.pi_min(),
        lambda_star,
        lambda_0,
        gamma_star: 1.0 - lambda_star,
        gamma_0: 1.0 - lambda_0,
    })
}

/// On-disk chain format: `{"d": int, "P": [row-major d*d], "pi": optional [d]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub d: usize,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_chain(chain: &TransitionMatrix) -> Self {
        let d = chain.d();
        let p = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| chain.matrix()[(i, j)])
            .collect();
        ChainFile {
            d,
            p,
            pi: Some(chain.pi().iter().copied().collect()),
        }
    }

    pub fn into_chain(self) -> Result<TransitionMatrix> {
        if self.p.len() != self.d * self.d {
            return Err(Error::InvalidInput(format!(
                "P has {} entries, expected d*d = {}",
                self.p.len(),
                self.d * self.d
            )));
        }
        let p = DMatrix::from_row_slice(self.d, self.d, &self.p);
        validate_chain(p, self.pi.map(DVector::from_vec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state(p: f64) -> TransitionMatrix {
        validate_chain(DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p]), None).unwrap()
    }

    fn lazy_cycle4() -> TransitionMatrix {
        let mut p = DMatrix::zeros(4, 4);
        for u in 0..4 {
            p[(u, u)] = 0.5;
            p[(u, (u + 1) % 4)] = 0.25;
            p[(u, (u + 3) % 4)] = 0.25;
        }
        validate_chain(p, None).unwrap()
    }

    #[test]
    fn symmetric_two_state_has_uniform_pi() {
        let c = two_state(0.3);
        assert_abs_diff_eq!(c.pi()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.pi_min(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn lazy_cycle_is_uniform() {
        let c = lazy_cycle4();
        for &x in c.pi().iter() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn asymmetric_two_state_pi() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let pi = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn claimed_pi_violating_detailed_balance_is_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.9, 0.1]);
        let err = validate_chain(p, Some(DVector::from_vec(vec![0.5, 0.5]))).unwrap_err();
        assert!(matches!(err, Error::NotReversible { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_rows_absorbing_states_and_periodicity() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(matches!(
            validate_chain(bad, None),
            Err(Error::NotStochastic { row: 0, .. })
        ));

        let absorbing = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert!(matches!(validate_chain(absorbing, None), Err(Error::Reducible(_))));

        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(validate_chain(flip, None), Err(Error::Periodic)));

        let zero_pi = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let err = validate_chain(zero_pi, Some(DVector::from_vec(vec![1.0, 0.0]))).unwrap_err();
        assert!(matches!(err, Error::NonPositivePi { index: 1, .. }));
    }

    #[test]
    fn two_state_decomposition_by_hand() {
        let c = two_state(0.3);
        let s = spectral_decompose(&c).unwrap();
        assert_abs_diff_eq!(s.eigenvalue(0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalue(1), 0.4, epsilon = 1e-14);
        let h = s.right_vector(1);
        let q = s.left_vector(1);
        // sign fixed so the first coordinate is positive
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_star, 0.6, epsilon = 1e-14);
    }

    #[test]
    fn lazy_cycle4_spectrum() {
        let s = spectral_decompose(&lazy_cycle4()).unwrap();
        let expected = [1.0, 0.5, 0.5, 0.0];
        for (a, b) in s.eigenvalues().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(s.reconstruction_error(&lazy_cycle4()) < 1e-12);
        assert!(s.biorthogonality_error() < 1e-12);
    }

    #[test]
    fn rank_one_chain_has_zero_nontrivial_spectrum() {
        let pi = [0.2, 0.3, 0.5];
        let p = DMatrix::from_fn(3, 3, |_, j| pi[j]);
        let c = validate_chain(p, None).unwrap();
        let s = spectral_decompose(&c).unwrap();
        for &l in &s.eigenvalues()[1..] {
            assert!(l.abs() < 1e-12);
        }
        assert_abs_diff_eq!(s.gamma_0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_star, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_file_round_trip() {
        let c = lazy_cycle4();
        let json = serde_json::to_string(&ChainFile::from_chain(&c)).unwrap();
        let back: ChainFile = serde_json::from_str(&json).unwrap();
        let c2 = back.into_chain().unwrap();
        assert_eq!(c.matrix(), c2.matrix());
    }
}
