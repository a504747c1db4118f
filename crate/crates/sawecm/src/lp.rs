//! l1-convexified cubature: assembles the block-diagonal standard-form linear
//! program `min 1^T z  s.t.  diag(U^(1)^T, ..., U^(k)^T) z = b,  z >= 0` and
//! solves it with a two-phase revised simplex, so the returned solution is
//! always a vertex (basic feasible) solution.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::saw::{prepare_bases, AdaptiveRule, SawOptions, SubspaceFamily};
use crate::Result;

/// Default floor separating a selected point from numerical zero when reading
/// the support off an optimal LP solution.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-10;

/// Blocks whose integral vector is smaller than this are rejected outright;
/// the LP would admit the zero solution and the caller should augment.
const RHS_FLOOR: f64 = 1e-14;

/// Reduced-cost threshold for optimality; independent of the rhs scale.
const RC_TOL: f64 = 1e-9;

/// Pivot-element threshold in the ratio test.
const PIVOT_TOL: f64 = 1e-9;

/// Phase-1 objective above this is declared infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;

/// Refactorize the basis inverse from scratch this often.
const REFACTOR_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest eligible index; guarantees termination on degenerate problems.
    Bland,
    /// Most negative reduced cost; ties resolve to the highest index.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// The assembled standard-form program. All variables are bounded below by
/// zero; there are no other bounds.
#[derive(Debug, Clone)]
pub struct StandardFormLp {
    /// All-ones objective, length `k * M`.
    pub cost: DVector<f64>,
    /// Block-diagonal constraint matrix: block (i, i) is `U^(i)^T`.
    pub constraint_matrix: DMatrix<f64>,
    /// Stacked per-subspace integral vectors, length `sum m_i`.
    pub rhs: DVector<f64>,
    /// Number of integration points `M`.
    pub point_count: usize,
    /// Constraint rows contributed by each subspace (`m_i`).
    pub block_rows: Vec<usize>,
    /// Per-point weight rescaling for weighted-basis assemblies.
    weight_scale: Option<DVector<f64>>,
}

/// A (possibly partial) solution of the standard-form program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Nonnegative variable values, length `k * M`; clamped at zero.
    pub values: DVector<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub pivot_count: usize,
}

/// Builds the block-diagonal program from the family, using the same basis
/// preparation (SVD plus augmentation policy) as the greedy pipeline.
pub fn assemble_lp(family: &SubspaceFamily, options: &SawOptions) -> Result<StandardFormLp> {
    let prepared = prepare_bases(family, options)?;
    let points = family.point_count();
    let k = family.subspace_count();

    let block_rows: Vec<usize> = prepared.bases.iter().map(|b| b.ncols()).collect();
    let total_rows: usize = block_rows.iter().sum();
    let mut constraint_matrix = DMatrix::zeros(total_rows, k * points);
    let mut rhs = DVector::zeros(total_rows);

    let mut row_at = 0;
    for (i, basis) in prepared.bases.iter().enumerate() {
        let b_i = basis.transpose() * &prepared.ecm_weights;
        if b_i.norm() < RHS_FLOOR {
            return Err(Error::ZeroRhs { subspace: i });
        }
        constraint_matrix
            .view_mut((row_at, i * points), (basis.ncols(), points))
            .copy_from(&basis.transpose());
        rhs.rows_mut(row_at, basis.ncols()).copy_from(&b_i);
        row_at += basis.ncols();
    }

    Ok(StandardFormLp {
        cost: DVector::from_element(k * points, 1.0),
        constraint_matrix,
        rhs,
        point_count: points,
        block_rows,
        weight_scale: prepared.weight_scale,
    })
}

struct SimplexState {
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// Basic variable per row; artificials are indices >= n.
    basis: Vec<usize>,
    basis_inverse: DMatrix<f64>,
    basic_values: DVector<f64>,
    n: usize,
    pivots: usize,
    since_refactor: usize,
}

impl SimplexState {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.a.nrows());
            e[j - self.n] = 1.0;
            e
        }
    }

    fn refactorize(&mut self) -> Result<()> {
        let p = self.a.nrows();
        let mut basis_cols = DMatrix::zeros(p, p);
        for (pos, &j) in self.basis.iter().enumerate() {
            basis_cols.set_column(pos, &self.column(j));
        }
        self.basis_inverse = basis_cols
            .try_inverse()
            .ok_or_else(|| Error::ShapeMismatch("basis matrix singular on refactor".into()))?;
        self.basic_values = &self.basis_inverse * &self.b;
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, entering: usize, leaving_pos: usize, direction: &DVector<f64>) {
        let p = self.a.nrows();
        let d_piv = direction[leaving_pos];
        let theta = self.basic_values[leaving_pos] / d_piv;
        for i in 0..p {
            if i != leaving_pos {
                self.basic_values[i] -= theta * direction[i];
                if self.basic_values[i].abs() < 1e-14 {
                    self.basic_values[i] = self.basic_values[i].max(0.0);
                }
            }
        }
        self.basic_values[leaving_pos] = theta;
        // Eta update of the inverse.
        let pivot_row = self.basis_inverse.row(leaving_pos).into_owned();
        for i in 0..p {
            if i != leaving_pos {
                let f = direction[i] / d_piv;
                if f != 0.0 {
                    for c in 0..p {
                        self.basis_inverse[(i, c)] -= f * pivot_row[c];
                    }
                }
            }
        }
        self.basis_inverse.row_mut(leaving_pos).copy_from(&(pivot_row / d_piv));
        self.basis[leaving_pos] = entering;
        self.pivots += 1;
        self.since_refactor += 1;
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// One simplex phase: minimizes `cost` over the current state. `allowed`
/// bounds the entering-variable indices (artificials are excluded in phase 2).
fn run_phase(
    state: &mut SimplexState,
    cost: &DVector<f64>,
    allowed: usize,
    rule: PivotRule,
    max_pivots: usize,
) -> Result<PhaseOutcome> {
    loop {
        if state.pivots >= max_pivots {
            return Ok(PhaseOutcome::IterationLimit);
        }
        if state.since_refactor >= REFACTOR_PERIOD {
            state.refactorize()?;
        }
        let mut cost_basic = DVector::zeros(state.basis.len());
        for (pos, &j) in state.basis.iter().enumerate() {
            cost_basic[pos] = cost[j];
        }
        let y = state.basis_inverse.transpose() * cost_basic;

        let in_basis = |j: usize| state.basis.contains(&j);
        let reduced = |j: usize| cost[j] - y.dot(&state.column(j));
        let entering = match rule {
            PivotRule::Bland => (0..allowed).find(|&j| !in_basis(j) && reduced(j) < -RC_TOL),
            PivotRule::Dantzig => {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..allowed {
                    if in_basis(j) {
                        continue;
                    }
                    let rc = reduced(j);
                    if rc < -RC_TOL && best.map_or(true, |(_, v)| rc <= v) {
                        best = Some((j, rc));
                    }
                }
                best.map(|(j, _)| j)
            }
        };
        let Some(entering) = entering else {
            return Ok(PhaseOutcome::Optimal);
        };

        let direction = &state.basis_inverse * state.column(entering);
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..direction.len() {
            if direction[i] > PIVOT_TOL {
                let ratio = state.basic_values[i].max(0.0) / direction[i];
                let better = match leaving {
                    None => true,
                    Some((pos, best)) => {
                        ratio < best || (ratio == best && state.basis[i] < state.basis[pos])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((leaving_pos, _)) = leaving else {
            return Ok(PhaseOutcome::Unbounded);
        };
        state.pivot(entering, leaving_pos, &direction);
    }
}

/// Solves the program with a two-phase revised simplex. Phase 1 minimizes the
/// sum of artificial variables; zero-level artificials are pivoted out (or
/// their redundant rows dropped) before phase 2 minimizes the true objective.
pub fn solve_simplex(lp: &StandardFormLp, rule: PivotRule) -> LpSolution {
    let n = lp.cost.len();
    let max_pivots = 50 * n;

    let mut a = lp.constraint_matrix.clone();
    let mut b = lp.rhs.clone();
    for i in 0..b.len() {
        if b[i] < 0.0 {
            b[i] = -b[i];
            let mut row = a.row_mut(i);
            row.neg_mut();
        }
    }
    let p = a.nrows();

    let mut state = SimplexState {
        a,
        b: b.clone(),
        basis: (n..n + p).collect(),
        basis_inverse: DMatrix::identity(p, p),
        basic_values: b,
        n,
        pivots: 0,
        since_refactor: 0,
    };

    let finish = |state: &SimplexState, status: LpStatus| -> LpSolution {
        let mut values = DVector::zeros(n);
        for (pos, &j) in state.basis.iter().enumerate() {
            if j < n {
                values[j] = state.basic_values[pos].max(0.0);
            }
        }
        let objective = lp.cost.dot(&values);
        LpSolution {
            values,
            objective,
            status,
            pivot_count: state.pivots,
        }
    };

    // Phase 1.
    let mut phase1_cost = DVector::zeros(n + p);
    for j in n..n + p {
        phase1_cost[j] = 1.0;
    }
    match run_phase(&mut state, &phase1_cost, n + p, rule, max_pivots) {
        Err(_) => return finish(&state, LpStatus::IterationLimit),
        Ok(PhaseOutcome::IterationLimit) => return finish(&state, LpStatus::IterationLimit),
        Ok(PhaseOutcome::Unbounded) => unreachable!("phase-1 objective is bounded below"),
        Ok(PhaseOutcome::Optimal) => {}
    }
    let infeasibility: f64 = state
        .basis
        .iter()
        .zip(state.basic_values.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return finish(&state, LpStatus::Infeasible);
    }

    // Drive zero-level artificials out of the basis; drop redundant rows.
    loop {
        let Some(pos) = state.basis.iter().position(|&j| j >= n) else {
            break;
        };
        let row = state.basis_inverse.row(pos).into_owned();
        let mut replacement = None;
        for j in 0..n {
            if !state.basis.contains(&j) {
                let coef = row.dot(&state.a.column(j).transpose());
                if coef.abs() > 1e-7 {
                    replacement = Some(j);
                    break;
                }
            }
        }
        match replacement {
            Some(j) => {
                let direction = &state.basis_inverse * state.column(j);
                state.pivot(j, pos, &direction);
            }
            None => {
                // Redundant constraint: remove the row and refactorize.
                state.a = state.a.clone().remove_row(pos);
                state.b = state.b.clone().remove_row(pos);
                state.basis.remove(pos);
                if state.refactorize().is_err() {
                    return finish(&state, LpStatus::IterationLimit);
                }
            }
        }
    }

    // Phase 2 over the original variables only.
    match run_phase(&mut state, &lp.cost, n, rule, max_pivots) {
        Err(_) => finish(&state, LpStatus::IterationLimit),
        Ok(PhaseOutcome::IterationLimit) => finish(&state, LpStatus::IterationLimit),
        Ok(PhaseOutcome::Unbounded) => finish(&state, LpStatus::Unbounded),
        Ok(PhaseOutcome::Optimal) => finish(&state, LpStatus::Optimal),
    }
}

/// Reads the shared index set and per-subspace weights off an optimal vertex
/// solution: `E = { g : sum_i z^(i)_g > zero_floor }`, with each subspace's
/// weights restricted to `E`.
pub fn extract_rule(
    solution: &LpSolution,
    lp: &StandardFormLp,
    zero_floor: f64,
) -> Result<AdaptiveRule> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::NotOptimal {
            status: solution.status,
        });
    }
    let points = lp.point_count;
    let k = lp.block_rows.len();
    assert_eq!(solution.values.len(), k * points);

    let mut support_mass = vec![0.0_f64; points];
    for i in 0..k {
        for g in 0..points {
            support_mass[g] += solution.values[i * points + g];
        }
    }
    let indices: Vec<usize> = (0..points).filter(|&g| support_mass[g] > zero_floor).collect();

    let mut per_subspace_weights = Vec::with_capacity(k);
    for i in 0..k {
        let weights = DVector::from_fn(indices.len(), |pos, _| {
            let g = indices[pos];
            let raw = solution.values[i * points + g];
            match &lp.weight_scale {
                None => raw,
                Some(scale) => raw * scale[g],
            }
        });
        per_subspace_weights.push(weights);
    }

    let m_max = lp.block_rows.iter().copied().max().unwrap_or(0);
    Ok(AdaptiveRule {
        indices,
        per_subspace_weights,
        per_subspace_mode_counts: lp.block_rows.clone(),
        m_max,
        visit_order: (0..k).collect(),
    })
}
