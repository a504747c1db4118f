//! Enhanced Empirical Cubature Method: greedy selection of basis-matrix rows
//! so that a strictly positive weight vector reproduces the exact integrals
//! `b = U^T W`, with support for a caller-supplied initial candidate set.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{check_weights, LsState};
use crate::Result;

/// Default threshold of ineffective iterations before the candidate set is
/// enlarged with the complement.
pub const DEFAULT_FAILURE_THRESHOLD: usize = 10;

/// Default row-norm floor below which candidate points are discarded.
pub const DEFAULT_LOW_NORM_FLOOR: f64 = 1e-6;

/// Hard cap on greedy iterations, as a multiple of the number of points.
const MAX_ITERATIONS_PER_POINT: usize = 100;

/// Relative exactness demanded of a completed selection:
/// `|| U(E,:)^T w - b || <= tol * ||b||`.
const ECM_EXACTNESS_TOL: f64 = 1e-9;

/// Inputs of the greedy selection.
///
/// The selection is posed for a columnwise-orthonormal basis (that is what
/// guarantees feasibility over the full pool and `card(E) = m` termination),
/// and the pipelines always supply one; the greedy loop itself only needs
/// full column rank, so orthonormality is reported, not enforced, which keeps
/// function-space-orthonormal sample matrices usable directly. The basis is
/// expected to be augmented so that `U^T W != 0`; see
/// [`crate::linalg::augment_with_constant`].
#[derive(Debug, Clone)]
pub struct EcmInput {
    basis: DMatrix<f64>,
    full_weights: DVector<f64>,
    initial_candidates: Option<Vec<usize>>,
    failure_threshold: usize,
    low_norm_floor: f64,
}

impl EcmInput {
    pub fn new(basis: DMatrix<f64>, full_weights: DVector<f64>) -> Result<Self> {
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "ECM basis" });
        }
        check_weights(&full_weights)?;
        if full_weights.len() != basis.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "weight vector length {} does not match {} basis rows",
                full_weights.len(),
                basis.nrows()
            )));
        }
        if basis.ncols() > basis.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "basis has more columns ({}) than rows ({})",
                basis.ncols(),
                basis.nrows()
            )));
        }
        Ok(EcmInput {
            basis,
            full_weights,
            initial_candidates: None,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            low_norm_floor: DEFAULT_LOW_NORM_FLOOR,
        })
    }

    /// Largest deviation of `U^T U` from the identity; zero-ish for the
    /// SVD-produced bases the pipelines feed in.
    pub fn orthonormality_deviation(&self) -> f64 {
        let m = self.basis.ncols();
        (self.basis.transpose() * &self.basis - DMatrix::identity(m, m)).amax()
    }

    /// Restricts the initial candidate pool to the given point indices
    /// (0-based). Out-of-range indices are rejected.
    pub fn with_initial_candidates(mut self, candidates: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = candidates.iter().find(|&&i| i >= self.basis.nrows()) {
            return Err(Error::ShapeMismatch(format!(
                "candidate index {bad} out of range for {} points",
                self.basis.nrows()
            )));
        }
        let mut sorted = candidates;
        sorted.sort_unstable();
        sorted.dedup();
        self.initial_candidates = Some(sorted);
        Ok(self)
    }

    pub fn with_failure_threshold(mut self, threshold: usize) -> Self {
        self.failure_threshold = threshold;
        self
    }

    pub fn with_low_norm_floor(mut self, floor: f64) -> Self {
        self.low_norm_floor = floor;
        self
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn full_weights(&self) -> &DVector<f64> {
        &self.full_weights
    }
}

/// Result of a greedy selection run.
#[derive(Debug, Clone)]
pub struct EcmOutput {
    /// Selected point indices (0-based), in selection order.
    pub indices: Vec<usize>,
    /// Strictly positive weights, aligned with `indices`.
    pub weights: DVector<f64>,
    /// `|| U(E,:)^T w - U^T W ||_2` at termination.
    pub residual_norm: f64,
    /// Greedy iterations performed.
    pub iterations: usize,
    /// Whether the candidate pool had to be enlarged with the complement set.
    pub enlarged: bool,
    /// `card(E & y0)`: how many selected points came from the initial set.
    pub overlap_with_candidates: usize,
}

/// Runs the greedy row selection.
///
/// Each iteration picks the candidate row most positively parallel to the
/// current residual (ties resolve to the highest index), re-solves the
/// unconstrained least squares on the selected rows, purges rows whose weight
/// is not strictly positive, and counts ineffective iterations; past the
/// failure threshold the candidate pool is enlarged with the complement set.
pub fn ecm_select(input: &EcmInput) -> Result<EcmOutput> {
    let u = &input.basis;
    let w = &input.full_weights;
    let points = u.nrows();
    let target = u.ncols();
    if target == 0 {
        return Ok(EcmOutput {
            indices: Vec::new(),
            weights: DVector::zeros(0),
            residual_norm: 0.0,
            iterations: 0,
            enlarged: false,
            overlap_with_candidates: 0,
        });
    }

    let row_norms: Vec<f64> = (0..points).map(|g| u.row(g).norm()).collect();
    // Parallelism score of row g against the residual r:
    // (U(g,:) . r) / ||U(g,:)||.
    let score = |g: usize, r: &DVector<f64>| -> f64 {
        let mut dot = 0.0;
        for c in 0..target {
            dot += u[(g, c)] * r[c];
        }
        dot / row_norms[g]
    };

    let usable = |g: usize| row_norms[g] > input.low_norm_floor;
    let mut active = vec![false; points];
    let mut complement = vec![false; points];
    match &input.initial_candidates {
        None => {
            for g in 0..points {
                active[g] = usable(g);
            }
        }
        Some(initial) => {
            for &g in initial {
                active[g] = usable(g);
            }
            for g in 0..points {
                complement[g] = !active[g] && initial.binary_search(&g).is_err() && usable(g);
            }
        }
    }
    let initial_set = input.initial_candidates.clone().unwrap_or_default();

    let b = u.transpose() * w;
    let selection_residual = |ls: &Option<LsState>| -> DVector<f64> {
        let mut r = b.clone();
        if let Some(state) = ls {
            for (&id, &wt) in state.selected_rows().iter().zip(state.weights().iter()) {
                r -= u.row(id).transpose() * wt;
            }
        }
        r
    };

    let mut residual = b.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(target);
    let mut ls: Option<LsState> = None;
    let mut failed_iterations = 0usize;
    // Ineffective iterations are counted against the largest card(E) reached
    // so far. Counting against the previous iteration misses two-cycles where
    // one point is added and then purged together with another, which keeps
    // the selection bouncing without ever triggering enlargement.
    let mut high_water = 0usize;
    let mut iterations = 0usize;
    let mut enlarged = false;
    let max_iterations = MAX_ITERATIONS_PER_POINT * points.max(1);

    loop {
        if selected.len() == target {
            // Completion gate: the rank-one updated state does not get to
            // decide the final rule. Re-solve the selected block directly;
            // purge weights the fresh solve flags as nonpositive, and if the
            // block cannot reproduce b, retract the most recent commitment.
            iterations += 1;
            let rows: Vec<DVector<f64>> =
                selected.iter().map(|&g| u.row(g).transpose()).collect();
            match LsState::from_rows(selected.clone(), rows, &b) {
                Ok(mut fresh) => {
                    let negatives: Vec<usize> = fresh
                        .selected_rows()
                        .iter()
                        .zip(fresh.weights().iter())
                        .filter(|(_, &wt)| wt <= 0.0)
                        .map(|(&id, _)| id)
                        .collect();
                    if negatives.is_empty() {
                        let reached = selection_residual(&Some(fresh.clone()));
                        if reached.norm() <= ECM_EXACTNESS_TOL * b.norm() {
                            ls = Some(fresh);
                            residual = reached;
                            break;
                        }
                        // Degenerate block: drop the newest point for good.
                        let last = *selected.last().expect("nonempty selection");
                        fresh.remove_rows(&[last], &b)?;
                        selected.pop();
                        ls = if fresh.is_empty() { None } else { Some(fresh) };
                    } else {
                        fresh.remove_rows(&negatives, &b)?;
                        selected.retain(|id| !negatives.contains(id));
                        for id in negatives {
                            active[id] = true;
                        }
                        ls = if fresh.is_empty() { None } else { Some(fresh) };
                    }
                }
                Err(_) => {
                    // Singular block: retract newest points until it factors.
                    selected.pop();
                    ls = loop {
                        if selected.is_empty() {
                            break None;
                        }
                        let rows: Vec<DVector<f64>> =
                            selected.iter().map(|&g| u.row(g).transpose()).collect();
                        match LsState::from_rows(selected.clone(), rows, &b) {
                            Ok(state) => break Some(state),
                            Err(_) => {
                                selected.pop();
                            }
                        }
                    };
                }
            }
            failed_iterations += 1;
            residual = selection_residual(&ls);
            continue;
        }

        let pool_empty = !active.iter().any(|&a| a);
        if failed_iterations > input.failure_threshold || pool_empty {
            if complement.iter().any(|&c| c) {
                for g in 0..points {
                    if complement[g] {
                        active[g] = true;
                        complement[g] = false;
                    }
                }
                enlarged = true;
            } else if pool_empty {
                return Err(Error::NoConvergence {
                    iterations,
                    selected: selected.len(),
                    target,
                });
            }
        }
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                selected: selected.len(),
                target,
            });
        }

        // Most positively parallel candidate; ties go to the highest index.
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for g in 0..points {
            if active[g] {
                let s = score(g, &residual);
                if s >= best {
                    best = s;
                    pick = Some(g);
                }
            }
        }
        let pick = pick.expect("pool verified nonempty above");
        active[pick] = false;

        let added = match ls.as_mut() {
            None => match LsState::new(pick, u.row(pick).transpose(), &b) {
                Ok(state) => {
                    ls = Some(state);
                    true
                }
                Err(Error::ZeroRow) => false,
                Err(e) => return Err(e),
            },
            Some(state) => match state.add_row(pick, u.row(pick).transpose(), &b) {
                Ok(()) => true,
                // Numerically dependent row: drop it for this pass.
                Err(Error::SingularGram) => false,
                Err(e) => return Err(e),
            },
        };
        if added {
            selected.push(pick);
            let state = ls.as_mut().expect("state exists after add");
            // Purge weights that are not strictly positive; the indices return
            // to the candidate pool and may be re-selected later.
            let negatives: Vec<usize> = state
                .selected_rows()
                .iter()
                .zip(state.weights().iter())
                .filter(|(_, &wt)| wt <= 0.0)
                .map(|(&id, _)| id)
                .collect();
            if !negatives.is_empty() {
                let removal = state.remove_rows(&negatives, &b);
                let emptied = state.is_empty();
                match removal {
                    Ok(()) => {
                        selected.retain(|id| !negatives.contains(id));
                        for id in negatives {
                            active[id] = true;
                        }
                        if emptied {
                            ls = None;
                        }
                    }
                    // A drifted state can refuse the removal; restart the
                    // selection from the current residual instead of failing.
                    Err(Error::SingularGram) => {
                        for &id in &selected {
                            active[id] = true;
                        }
                        selected.clear();
                        ls = None;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        if selected.len() > high_water {
            high_water = selected.len();
            failed_iterations = 0;
        } else {
            failed_iterations += 1;
        }

        residual = selection_residual(&ls);
    }

    let state = ls.expect("target > 0 implies selection");
    debug_assert_eq!(state.selected_rows(), selected.as_slice());
    let weights = state.weights().clone();
    let residual_norm = residual.norm();
    let overlap = selected
        .iter()
        .filter(|id| initial_set.binary_search(id).is_ok())
        .count();

    Ok(EcmOutput {
        indices: selected,
        weights,
        residual_norm,
        iterations,
        enlarged,
        overlap_with_candidates: overlap,
    })
}

/// Decides whether `b` lies in the conical hull of the given rows, by solving
/// a nonnegative least-squares feasibility problem (Lawson-Hanson active set)
/// to relative residual 1e-9. Diagnostic utility, independent of the greedy
/// selection path.
pub fn conical_hull_feasible(basis_rows: &DMatrix<f64>, b: &DVector<f64>) -> bool {
    let m = basis_rows.ncols();
    assert_eq!(m, b.len(), "row dimension must match b");
    let n = basis_rows.nrows();
    if b.norm() == 0.0 {
        return true;
    }
    if n == 0 {
        return false;
    }
    // Columns of `a` are the candidate rays.
    let a = basis_rows.transpose();

    let mut passive: Vec<usize> = Vec::new();
    let mut coeff = DVector::<f64>::zeros(n);
    let mut residual = b.clone();
    let tol = 1e-12 * b.norm();

    for _outer in 0..(3 * n + 10) {
        let dual = a.transpose() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive.contains(&j) && dual[j] > tol {
                if best.map_or(true, |(_, v)| dual[j] > v) {
                    best = Some((j, dual[j]));
                }
            }
        }
        let Some((enter, _)) = best else { break };
        passive.push(enter);

        loop {
            let sub = a.select_columns(passive.iter());
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-13)
                .expect("least-squares solve");
            if z_sub.iter().all(|&z| z > tol) {
                coeff.fill(0.0);
                for (pos, &j) in passive.iter().enumerate() {
                    coeff[j] = z_sub[pos];
                }
                break;
            }
            // Step toward z until the first coefficient hits zero.
            let mut alpha = f64::INFINITY;
            for (pos, &j) in passive.iter().enumerate() {
                if z_sub[pos] <= tol {
                    let denom = coeff[j] - z_sub[pos];
                    if denom > 0.0 {
                        alpha = alpha.min(coeff[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (pos, &j) in passive.iter().enumerate() {
                coeff[j] += alpha * (z_sub[pos] - coeff[j]);
            }
            passive.retain(|&j| coeff[j] > tol);
            if passive.is_empty() {
                break;
            }
        }
        residual = b - &a * &coeff;
        if residual.norm() <= 1e-9 * b.norm() {
            return true;
        }
    }
    residual.norm() <= 1e-9 * b.norm()
}
