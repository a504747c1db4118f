//! Subspace-adaptive weights cubature: sequentially runs the enhanced greedy
//! selection over a family of subspace bases, accumulating one shared point
//! set and assembling a nonnegative weight vector per subspace.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ecm::{ecm_select, EcmInput, EcmOutput};
use crate::error::Error;
use crate::linalg::{augment_with_vector, check_weights, truncated_svd, weighted_svd};
use crate::Result;

/// Relative size of `U^T W` below which the cubature problem counts as
/// ill-posed and the basis gets the constant-function column appended.
const ZERO_RHS_TOL: f64 = 1e-10;

/// Order in which the subspaces are visited by the sequential selection.
#[derive(Debug, Clone, PartialEq)]
pub enum VisitOrder {
    /// 1..k as given.
    Natural,
    /// Seeded random permutation, for ordering-sensitivity studies.
    SeededRandom(u64),
    /// Explicit permutation of 0..k.
    Explicit(Vec<usize>),
}

/// When to append the constant-function column to a subspace basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentPolicy {
    /// Augment only when `U^T W` is numerically zero, i.e. when the zero-weight
    /// rule would be feasible and the problem ill-posed.
    Auto,
    /// Always augment (skipping bases that already span constants); the rule
    /// then also integrates the domain volume exactly.
    Always,
    /// Never augment.
    Never,
}

/// Inner product used to orthonormalize the subspace bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMode {
    /// Plain SVD; bases orthonormal in the Euclidean sense.
    Euclidean,
    /// Row-weighted SVD; bases orthonormal in the discrete L2(Omega) sense.
    WeightedL2,
}

/// Knobs of the greedy pipeline.
#[derive(Debug, Clone)]
pub struct SawOptions {
    pub failure_threshold: usize,
    pub low_norm_floor: f64,
    pub augment: AugmentPolicy,
    pub basis_mode: BasisMode,
}

impl Default for SawOptions {
    fn default() -> Self {
        SawOptions {
            failure_threshold: crate::ecm::DEFAULT_FAILURE_THRESHOLD,
            low_norm_floor: crate::ecm::DEFAULT_LOW_NORM_FLOOR,
            augment: AugmentPolicy::Auto,
            basis_mode: BasisMode::Euclidean,
        }
    }
}

/// A family of integrand subspaces sharing one spatial discretization: `k`
/// sample matrices with a common row count `M`, the strictly positive
/// full-order weights, the SVD truncation tolerance used to extract bases,
/// and the visit order of the sequential selection.
#[derive(Debug, Clone)]
pub struct SubspaceFamily {
    pub sample_matrices: Vec<DMatrix<f64>>,
    pub full_weights: DVector<f64>,
    pub svd_tolerance: f64,
    pub ordering: VisitOrder,
}

impl SubspaceFamily {
    pub fn new(sample_matrices: Vec<DMatrix<f64>>, full_weights: DVector<f64>) -> Result<Self> {
        if sample_matrices.is_empty() {
            return Err(Error::ShapeMismatch("family needs at least one subspace".into()));
        }
        let points = full_weights.len();
        for (i, a) in sample_matrices.iter().enumerate() {
            if a.nrows() != points {
                return Err(Error::ShapeMismatch(format!(
                    "subspace {i} has {} rows, expected {points}",
                    a.nrows()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { context: "sample matrix" }.for_subspace(i));
            }
        }
        check_weights(&full_weights)?;
        Ok(SubspaceFamily {
            sample_matrices,
            full_weights,
            svd_tolerance: 0.0,
            ordering: VisitOrder::Natural,
        })
    }

    pub fn with_svd_tolerance(mut self, tolerance: f64) -> Self {
        self.svd_tolerance = tolerance;
        self
    }

    pub fn with_ordering(mut self, ordering: VisitOrder) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn subspace_count(&self) -> usize {
        self.sample_matrices.len()
    }

    pub fn point_count(&self) -> usize {
        self.full_weights.len()
    }
}

/// A shared-point cubature rule with per-subspace weights.
#[derive(Debug, Clone)]
pub struct AdaptiveRule {
    /// Shared selected point indices, 0-based, strictly increasing.
    pub indices: Vec<usize>,
    /// One weight vector per subspace (subspace order, not visit order), each
    /// of length `indices.len()`; entries are nonnegative, inactive positions
    /// are exactly zero.
    pub per_subspace_weights: Vec<DVector<f64>>,
    /// Basis column counts per subspace, after augmentation.
    pub per_subspace_mode_counts: Vec<usize>,
    /// Lower bound on the shared point count: `max_i m_i`.
    pub m_max: usize,
    /// The visit permutation the rule was produced with.
    pub visit_order: Vec<usize>,
}

impl AdaptiveRule {
    pub fn card(&self) -> usize {
        self.indices.len()
    }

    pub fn subspace_count(&self) -> usize {
        self.per_subspace_weights.len()
    }
}

/// Per-subspace bases plus the vector the selection integrates against
/// (the full weights, or their square root in weighted mode).
pub(crate) struct PreparedBases {
    pub bases: Vec<DMatrix<f64>>,
    pub ecm_weights: DVector<f64>,
    /// Per-point scale applied to selection weights to recover rule weights.
    pub weight_scale: Option<DVector<f64>>,
}

pub(crate) fn prepare_bases(family: &SubspaceFamily, options: &SawOptions) -> Result<PreparedBases> {
    let w = &family.full_weights;
    let (ecm_weights, augment_target, weight_scale) = match options.basis_mode {
        BasisMode::Euclidean => (
            w.clone(),
            DVector::from_element(w.len(), 1.0),
            None,
        ),
        BasisMode::WeightedL2 => {
            let sqrt_w = w.map(f64::sqrt);
            (sqrt_w.clone(), sqrt_w.clone(), Some(sqrt_w))
        }
    };

    let mut bases = Vec::with_capacity(family.subspace_count());
    for (i, a) in family.sample_matrices.iter().enumerate() {
        let svd = match options.basis_mode {
            BasisMode::Euclidean => truncated_svd(a, family.svd_tolerance),
            BasisMode::WeightedL2 => weighted_svd(a, w, family.svd_tolerance),
        }
        .map_err(|e| e.for_subspace(i))?;
        let basis = svd.left;
        let needed = match options.augment {
            AugmentPolicy::Never => false,
            AugmentPolicy::Always => true,
            AugmentPolicy::Auto => {
                (basis.transpose() * &ecm_weights).norm() <= ZERO_RHS_TOL * ecm_weights.norm()
            }
        };
        let basis = if needed {
            match augment_with_vector(&basis, &augment_target) {
                Ok(augmented) => augmented,
                Err(Error::AlreadyContained { .. }) => basis,
                Err(e) => return Err(e.for_subspace(i)),
            }
        } else {
            basis
        };
        bases.push(basis);
    }
    Ok(PreparedBases {
        bases,
        ecm_weights,
        weight_scale,
    })
}

fn seeded_permutation(k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    perm
}

fn resolve_order(ordering: &VisitOrder, k: usize) -> Result<Vec<usize>> {
    match ordering {
        VisitOrder::Natural => Ok((0..k).collect()),
        VisitOrder::SeededRandom(seed) => Ok(seeded_permutation(k, *seed)),
        VisitOrder::Explicit(perm) => {
            let mut seen = vec![false; k];
            if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true)) {
                return Err(Error::ShapeMismatch(format!(
                    "explicit ordering is not a permutation of 0..{k}"
                )));
            }
            Ok(perm.clone())
        }
    }
}

fn ecm_input(
    basis: DMatrix<f64>,
    prepared: &PreparedBases,
    options: &SawOptions,
    candidates: Option<&[usize]>,
) -> Result<EcmInput> {
    let mut input = EcmInput::new(basis, prepared.ecm_weights.clone())?
        .with_failure_threshold(options.failure_threshold)
        .with_low_norm_floor(options.low_norm_floor);
    if let Some(y0) = candidates {
        input = input.with_initial_candidates(y0.to_vec())?;
    }
    Ok(input)
}

/// Rescales selection weights into rule weights (weighted mode only).
fn rule_weights(out: &EcmOutput, prepared: &PreparedBases) -> DVector<f64> {
    match &prepared.weight_scale {
        None => out.weights.clone(),
        Some(scale) => DVector::from_fn(out.weights.len(), |p, _| {
            out.weights[p] * scale[out.indices[p]]
        }),
    }
}

/// Runs the sequential subspace-adaptive selection over the family.
///
/// Each visited subspace is solved by the enhanced greedy selection with the
/// accumulated point set as initial candidates; the union of the per-subspace
/// selections becomes the shared point set, and each subspace's weights are
/// scattered into a `card(E)`-length vector with exact zeros at inactive
/// positions.
pub fn saw_ecm(family: &SubspaceFamily, options: &SawOptions) -> Result<AdaptiveRule> {
    let k = family.subspace_count();
    let prepared = prepare_bases(family, options)?;
    let order = resolve_order(&family.ordering, k)?;

    let mut accumulated: Vec<usize> = Vec::new();
    let mut selections: Vec<Option<EcmOutput>> = vec![None; k];
    for &j in &order {
        let candidates = if accumulated.is_empty() {
            None
        } else {
            Some(accumulated.as_slice())
        };
        let input = ecm_input(prepared.bases[j].clone(), &prepared, options, candidates)
            .map_err(|e| e.for_subspace(j))?;
        let out = ecm_select(&input).map_err(|e| e.for_subspace(j))?;
        for &id in &out.indices {
            if let Err(pos) = accumulated.binary_search(&id) {
                accumulated.insert(pos, id);
            }
        }
        selections[j] = Some(out);
    }

    let indices = accumulated;
    let mut per_subspace_weights = Vec::with_capacity(k);
    for j in 0..k {
        let out = selections[j].take().expect("every subspace visited");
        let weights = rule_weights(&out, &prepared);
        let mut scattered = DVector::zeros(indices.len());
        for (pos_in_sel, &id) in out.indices.iter().enumerate() {
            let pos = indices.binary_search(&id).expect("selected index in union");
            scattered[pos] = weights[pos_in_sel];
        }
        per_subspace_weights.push(scattered);
    }

    let per_subspace_mode_counts: Vec<usize> = prepared.bases.iter().map(|b| b.ncols()).collect();
    let m_max = per_subspace_mode_counts.iter().copied().max().unwrap_or(0);
    Ok(AdaptiveRule {
        indices,
        per_subspace_weights,
        per_subspace_mode_counts,
        m_max,
        visit_order: order,
    })
}

/// Dimension of the sum of all subspace spans (`m_all`): the rank of the
/// column-concatenation of the prepared bases.
pub fn global_dimension(family: &SubspaceFamily, options: &SawOptions) -> Result<usize> {
    let prepared = prepare_bases(family, options)?;
    Ok(truncated_svd(&concat_columns(&prepared.bases), 0.0)?.rank())
}

fn concat_columns(bases: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = bases[0].nrows();
    let cols = bases.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in bases {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Single-rule baseline: one greedy run on an orthonormal basis of the global
/// subspace (the sum of all subspace spans). The same weights serve every
/// subspace.
pub fn global_ecm(family: &SubspaceFamily, options: &SawOptions) -> Result<AdaptiveRule> {
    let k = family.subspace_count();
    let prepared = prepare_bases(family, options)?;
    let global_basis = truncated_svd(&concat_columns(&prepared.bases), 0.0)?.left;
    let input = ecm_input(global_basis.clone(), &prepared, options, None)?;
    let out = ecm_select(&input)?;
    let weights = rule_weights(&out, &prepared);

    let mut indices: Vec<usize> = out.indices.clone();
    indices.sort_unstable();
    let mut shared = DVector::zeros(indices.len());
    for (pos_in_sel, &id) in out.indices.iter().enumerate() {
        let pos = indices.binary_search(&id).expect("index in own union");
        shared[pos] = weights[pos_in_sel];
    }
    Ok(AdaptiveRule {
        indices,
        per_subspace_weights: vec![shared; k],
        per_subspace_mode_counts: prepared.bases.iter().map(|b| b.ncols()).collect(),
        m_max: global_basis.ncols(),
        visit_order: (0..k).collect(),
    })
}

/// Baseline for comparison plots: one independent full-pool greedy run per
/// subspace. Callers take the union of the returned index sets.
pub fn independent_baseline(
    family: &SubspaceFamily,
    options: &SawOptions,
) -> Result<Vec<EcmOutput>> {
    let prepared = prepare_bases(family, options)?;
    let mut outputs = Vec::with_capacity(prepared.bases.len());
    for (j, basis) in prepared.bases.iter().enumerate() {
        let input = ecm_input(basis.clone(), &prepared, options, None).map_err(|e| e.for_subspace(j))?;
        let mut out = ecm_select(&input).map_err(|e| e.for_subspace(j))?;
        out.weights = rule_weights(&out, &prepared);
        outputs.push(out);
    }
    Ok(outputs)
}

/// Assembles the independent-baseline outputs into an [`AdaptiveRule`] over
/// the union of their index sets.
pub fn independent_rule(family: &SubspaceFamily, options: &SawOptions) -> Result<AdaptiveRule> {
    let outputs = independent_baseline(family, options)?;
    let mut indices: Vec<usize> = Vec::new();
    for out in &outputs {
        for &id in &out.indices {
            if let Err(pos) = indices.binary_search(&id) {
                indices.insert(pos, id);
            }
        }
    }
    let mut per_subspace_weights = Vec::with_capacity(outputs.len());
    let mut mode_counts = Vec::with_capacity(outputs.len());
    for out in &outputs {
        let mut scattered = DVector::zeros(indices.len());
        for (pos_in_sel, &id) in out.indices.iter().enumerate() {
            let pos = indices.binary_search(&id).expect("index in union");
            scattered[pos] = out.weights[pos_in_sel];
        }
        mode_counts.push(out.indices.len());
        per_subspace_weights.push(scattered);
    }
    let m_max = mode_counts.iter().copied().max().unwrap_or(0);
    Ok(AdaptiveRule {
        indices,
        per_subspace_weights,
        per_subspace_mode_counts: mode_counts,
        m_max,
        visit_order: (0..family.subspace_count()).collect(),
    })
}
