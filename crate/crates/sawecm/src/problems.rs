//! Benchmark families and data assembly: Gauss rules, polynomial subspace
//! families, snapshot windowing into overlapping clusters, a synthetic
//! snapshot manifold for local-basis studies, and rule error metrics.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::linalg::truncated_svd;
use crate::saw::{AdaptiveRule, SubspaceFamily};
use crate::Result;

/// Quadratic term of the synthetic integrand nonlinearity; kept mild so the
/// per-cluster integrand dimension stays near `n^2`.
const NONLINEARITY_GAIN: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { start: f64, end: f64 },
    /// ECSW-style element aggregation: unit weights, one row per element.
    ElementAggregated,
}

/// A full-order integration rule: point positions and strictly positive
/// weights (Gauss weight times Jacobian for interval domains).
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub points: DVector<f64>,
    pub weights: DVector<f64>,
    pub domain: Domain,
}

impl QuadratureGrid {
    /// Unit-weight grid for element-aggregated (mesh-sampling) problems.
    pub fn element_aggregated(element_count: usize) -> Self {
        QuadratureGrid {
            points: DVector::from_fn(element_count, |e, _| e as f64 + 1.0),
            weights: DVector::from_element(element_count, 1.0),
            domain: Domain::ElementAggregated,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() == 0
    }
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = t;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (t * p - p_prev) / (t * t - 1.0);
    (p, dp)
}

/// n-point Gauss-Legendre rule mapped onto the given interval; exact for
/// polynomials of degree <= 2n - 1. Nodes come out in ascending order and
/// symmetric pairs are bitwise mirrored.
pub fn gauss_legendre(n: usize, domain: (f64, f64)) -> QuadratureGrid {
    assert!(n >= 1, "a quadrature rule needs at least one point");
    let (start, end) = domain;
    assert!(end > start, "empty interval");

    let mut nodes = vec![0.0_f64; n];
    let mut weights = vec![0.0_f64; n];
    let half_count = n.div_ceil(2);
    for i in 0..half_count {
        let odd_center = n % 2 == 1 && i == half_count - 1;
        let mut t = if odd_center {
            0.0
        } else {
            (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos()
        };
        if !odd_center {
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, t);
                let step = p / dp;
                t -= step;
                if step.abs() <= 1e-15 * t.abs().max(1.0) {
                    break;
                }
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // i-th largest root; mirror onto the left half.
        nodes[n - 1 - i] = t;
        nodes[i] = -t;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }

    let half_width = 0.5 * (end - start);
    let mid = 0.5 * (start + end);
    QuadratureGrid {
        points: DVector::from_fn(n, |g, _| mid + half_width * nodes[g]),
        weights: DVector::from_fn(n, |g, _| half_width * weights[g]),
        domain: Domain::Interval { start, end },
    }
}

/// One single-column sample matrix per monomial degree: `A^(mu)(g, 0) = x_g^mu`.
pub fn monomial_family(grid: &QuadratureGrid, degrees: &[u32]) -> SubspaceFamily {
    let matrices = degrees
        .iter()
        .map(|&mu| DMatrix::from_fn(grid.len(), 1, |g, _| grid.points[g].powi(mu as i32)))
        .collect();
    SubspaceFamily::new(matrices, grid.weights.clone()).expect("well-formed monomial family")
}

/// One two-column sample matrix `[1 | x^mu]` per degree; the degree-0 block
/// has rank one (duplicate constant columns).
pub fn vector_monomial_family(grid: &QuadratureGrid, degrees: &[u32]) -> SubspaceFamily {
    let matrices = degrees
        .iter()
        .map(|&mu| {
            DMatrix::from_fn(grid.len(), 2, |g, j| {
                if j == 0 {
                    1.0
                } else {
                    grid.points[g].powi(mu as i32)
                }
            })
        })
        .collect();
    SubspaceFamily::new(matrices, grid.weights.clone()).expect("well-formed vector family")
}

/// Snapshot-index windows grouping a trajectory into overlapping clusters.
#[derive(Debug, Clone)]
pub struct ClusterWindowing {
    pub snapshot_count: usize,
    /// Snapshots borrowed from each neighboring cluster.
    pub overlap: usize,
    /// 0-based snapshot indices per cluster; contiguous and covering.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterWindowing {
    /// Sliding windows of `window_size` advancing one snapshot at a time:
    /// `{0,1,2}, {1,2,3}, ...` for the default size 3, giving `P - 2` clusters
    /// in which consecutive windows share all but one snapshot.
    pub fn sliding(snapshot_count: usize, window_size: usize) -> Self {
        assert!(window_size >= 1 && window_size <= snapshot_count);
        let clusters = (0..=snapshot_count - window_size)
            .map(|start| (start..start + window_size).collect())
            .collect();
        ClusterWindowing {
            snapshot_count,
            overlap: (window_size - 1) / 2,
            clusters,
        }
    }

    /// Splits the trajectory into `cluster_count` balanced contiguous cores
    /// and extends each core by `overlap` snapshots into its neighbors. With
    /// `cluster_count = P - 2` and overlap 1 this reproduces the consecutive
    /// triples of [`ClusterWindowing::sliding`] with window 3.
    pub fn balanced(snapshot_count: usize, cluster_count: usize, overlap: usize) -> Self {
        assert!(cluster_count >= 1 && cluster_count <= snapshot_count);
        let base = snapshot_count / cluster_count;
        let remainder = snapshot_count % cluster_count;
        // Distribute the remainder symmetrically from the outside in, so the
        // maximal-cluster-count case degenerates to sliding triples.
        let front_extra = remainder.div_ceil(2);
        let back_extra = remainder - front_extra;
        let mut sizes = vec![base; cluster_count];
        for i in 0..front_extra {
            sizes[i] += 1;
        }
        for i in 0..back_extra {
            sizes[cluster_count - 1 - i] += 1;
        }

        let mut clusters = Vec::with_capacity(cluster_count);
        let mut start = 0usize;
        for &size in &sizes {
            let lo = start.saturating_sub(overlap);
            let hi = (start + size + overlap).min(snapshot_count);
            clusters.push((lo..hi).collect());
            start += size;
        }
        ClusterWindowing {
            snapshot_count,
            overlap,
            clusters,
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

/// Parameter path of the synthetic snapshot family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldMode {
    /// A Gaussian bump whose center, width and amplitude follow a seeded
    /// piecewise-affine trajectory: an intrinsic-dimension-1 discrete curve.
    TravellingBump,
    /// Constant parameters: every snapshot is identical.
    Frozen,
}

/// Generates `steps` snapshots of a smooth nonlinear family evaluated at the
/// given spatial points.
pub fn synthetic_manifold(
    points: &DVector<f64>,
    steps: usize,
    mode: ManifoldMode,
    seed: u64,
) -> Vec<DVector<f64>> {
    assert!(steps >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;

    let segments = 6;
    let waypoints: Vec<[f64; 3]> = (0..=segments)
        .map(|_| {
            [
                0.15 + 0.70 * unit(),  // center
                0.04 + 0.08 * unit(),  // width
                0.80 + 0.40 * unit(),  // amplitude
            ]
        })
        .collect();

    let theta = |t: f64| -> [f64; 3] {
        match mode {
            ManifoldMode::Frozen => waypoints[0],
            ManifoldMode::TravellingBump => {
                let scaled = t * segments as f64;
                let seg = (scaled.floor() as usize).min(segments - 1);
                let local = scaled - seg as f64;
                let a = waypoints[seg];
                let b = waypoints[seg + 1];
                [
                    a[0] + local * (b[0] - a[0]),
                    a[1] + local * (b[1] - a[1]),
                    a[2] + local * (b[2] - a[2]),
                ]
            }
        }
    };

    (0..steps)
        .map(|p| {
            let t = if steps == 1 {
                0.0
            } else {
                p as f64 / (steps - 1) as f64
            };
            let [center, width, amplitude] = theta(t);
            DVector::from_fn(points.len(), |g, _| {
                let z = (points[g] - center) / width;
                amplitude * (-0.5 * z * z).exp()
            })
        })
        .collect()
}

/// Mildly nonlinear response applied to the projected state.
fn nonlinearity(u: f64) -> f64 {
    u * (1.0 + NONLINEARITY_GAIN * u)
}

/// Builds the per-cluster integrand sample matrices.
///
/// For each cluster: a local displacement basis `Phi` (truncated SVD of the
/// window's snapshots at `displacement_svd_tol`), the window snapshots
/// projected onto it, and one integrand column per (snapshot, mode) pair,
/// `A[g, (p, j)] = Phi[g, j] * nl(projected_p[g])`, giving the documented
/// `M x (P_i * n_i)` shape.
pub fn integrand_matrices(
    snapshots: &[DVector<f64>],
    windowing: &ClusterWindowing,
    displacement_svd_tol: f64,
    grid: &QuadratureGrid,
) -> Result<SubspaceFamily> {
    let points = grid.len();
    if snapshots.len() != windowing.snapshot_count {
        return Err(Error::ShapeMismatch(format!(
            "{} snapshots but windowing covers {}",
            snapshots.len(),
            windowing.snapshot_count
        )));
    }
    for d in snapshots {
        if d.len() != points {
            return Err(Error::ShapeMismatch(format!(
                "snapshot length {} does not match {} grid points",
                d.len(),
                points
            )));
        }
    }

    let mut matrices = Vec::with_capacity(windowing.cluster_count());
    for (w, window) in windowing.clusters.iter().enumerate() {
        let mut stacked = DMatrix::zeros(points, window.len());
        for (col, &p) in window.iter().enumerate() {
            stacked.set_column(col, &snapshots[p]);
        }
        let svd = match truncated_svd(&stacked, displacement_svd_tol) {
            Ok(svd) => svd,
            Err(Error::ZeroMatrix) => return Err(Error::DegenerateWindow { window: w }),
            Err(e) => return Err(e),
        };
        let phi = svd.left;
        let modes = phi.ncols();

        let mut a = DMatrix::zeros(points, window.len() * modes);
        for (p_local, &p) in window.iter().enumerate() {
            let projected = &phi * (phi.transpose() * &snapshots[p]);
            for j in 0..modes {
                let col = DVector::from_fn(points, |g, _| phi[(g, j)] * nonlinearity(projected[g]));
                a.set_column(p_local * modes + j, &col);
            }
        }
        matrices.push(a);
    }
    SubspaceFamily::new(matrices, grid.weights.clone())
}

/// Residuals of a rule against the family it was built from.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// `||A^(i)(E,:)^T w^(i) - A^(i)^T W|| / ||A^(i)^T W||` per subspace,
    /// with 0/0 reported as 0.
    pub per_subspace_relative_residual: Vec<f64>,
    pub max_residual: f64,
    /// Frobenius-relative snapshot reconstruction error of the displacement
    /// stage, where a pipeline computes one.
    pub snapshot_reconstruction_error: Option<f64>,
}

/// Evaluates the per-subspace integration residuals of a rule.
pub fn evaluate_rule(rule: &AdaptiveRule, family: &SubspaceFamily) -> ErrorReport {
    assert_eq!(
        rule.subspace_count(),
        family.subspace_count(),
        "rule and family disagree on subspace count"
    );
    let w = &family.full_weights;
    let mut residuals = Vec::with_capacity(family.subspace_count());
    for (i, a) in family.sample_matrices.iter().enumerate() {
        let exact = a.transpose() * w;
        let weights = &rule.per_subspace_weights[i];
        assert_eq!(weights.len(), rule.indices.len());
        let mut reduced = DVector::zeros(a.ncols());
        for (pos, &g) in rule.indices.iter().enumerate() {
            assert!(g < a.nrows(), "rule index out of range");
            reduced += a.row(g).transpose() * weights[pos];
        }
        let err = (&reduced - &exact).norm();
        let scale = exact.norm();
        let rel = if scale == 0.0 {
            if err == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            err / scale
        };
        residuals.push(rel);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    ErrorReport {
        per_subspace_relative_residual: residuals,
        max_residual,
        snapshot_reconstruction_error: None,
    }
}

/// Frobenius-relative error of reconstructing the snapshots from the
/// per-cluster displacement bases (each snapshot through its own cluster's
/// basis; overlapping snapshots through the first cluster containing them).
pub fn snapshot_reconstruction_error(
    snapshots: &[DVector<f64>],
    windowing: &ClusterWindowing,
    displacement_svd_tol: f64,
) -> Result<f64> {
    let mut err_sq = 0.0;
    let mut norm_sq = 0.0;
    let mut seen = vec![false; snapshots.len()];
    for (w, window) in windowing.clusters.iter().enumerate() {
        let points = snapshots[0].len();
        let mut stacked = DMatrix::zeros(points, window.len());
        for (col, &p) in window.iter().enumerate() {
            stacked.set_column(col, &snapshots[p]);
        }
        let phi = match truncated_svd(&stacked, displacement_svd_tol) {
            Ok(svd) => svd.left,
            Err(Error::ZeroMatrix) => return Err(Error::DegenerateWindow { window: w }),
            Err(e) => return Err(e),
        };
        for &p in window {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            let projected = &phi * (phi.transpose() * &snapshots[p]);
            err_sq += (&snapshots[p] - projected).norm_squared();
            norm_sq += snapshots[p].norm_squared();
        }
    }
    Ok((err_sq / norm_sq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saw::{saw_ecm, SawOptions};

    #[test]
    fn three_point_rule_matches_closed_form() {
        let grid = gauss_legendre(3, (-1.0, 1.0));
        let expected_nodes = [-(0.6_f64).sqrt(), 0.0, (0.6_f64).sqrt()];
        let expected_weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        for g in 0..3 {
            assert!((grid.points[g] - expected_nodes[g]).abs() < 1e-14);
            assert!((grid.weights[g] - expected_weights[g]).abs() < 1e-14);
        }
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let grid = gauss_legendre(1, (0.0, 1.0));
        assert!((grid.points[0] - 0.5).abs() < 1e-15);
        assert!((grid.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nodes_are_exactly_symmetric() {
        for n in [2usize, 5, 6, 20, 51] {
            let grid = gauss_legendre(n, (-1.0, 1.0));
            for i in 0..n / 2 {
                assert_eq!(grid.points[i], -grid.points[n - 1 - i], "n = {n}");
                assert_eq!(grid.weights[i], grid.weights[n - 1 - i], "n = {n}");
            }
            let total: f64 = grid.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_of_exactness_boundary() {
        for n in [1usize, 2, 3, 5, 8, 20] {
            let grid = gauss_legendre(n, (0.0, 1.0));
            for j in 0..=(2 * n - 1) {
                let quad: f64 = (0..n)
                    .map(|g| grid.weights[g] * grid.points[g].powi(j as i32))
                    .sum();
                let exact = 1.0 / (j as f64 + 1.0);
                assert!(
                    (quad - exact).abs() <= 1e-13 * exact.max(1.0),
                    "n = {n}, degree {j}: {quad} vs {exact}"
                );
            }
            // One degree past the boundary the rule must miss. For large n the
            // mathematical error decays past f64 resolution, so the strictness
            // check only makes sense at moderate sizes.
            if n <= 8 {
                let j = 2 * n;
                let quad: f64 = (0..n)
                    .map(|g| grid.weights[g] * grid.points[g].powi(j as i32))
                    .sum();
                let exact = 1.0 / (j as f64 + 1.0);
                assert!(
                    (quad - exact).abs() > 1e-13 * exact,
                    "n = {n} unexpectedly exact at degree {j}"
                );
            }
        }
    }

    #[test]
    fn interval_weights_sum_to_length() {
        let grid = gauss_legendre(20, (0.25, 0.75));
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monomial_family_shapes_and_integrals() {
        let grid = gauss_legendre(3, (0.0, 1.0));
        let family = monomial_family(&grid, &[0, 2]);
        assert_eq!(family.subspace_count(), 2);
        assert_eq!(family.sample_matrices[0].ncols(), 1);
        assert!(family.sample_matrices[0].iter().all(|&v| v == 1.0));
        let b = family.sample_matrices[1].transpose() * &family.full_weights;
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn vector_family_rank_structure() {
        let grid = gauss_legendre(50, (0.0, 1.0));
        let degrees: Vec<u32> = (0..20).collect();
        let family = vector_monomial_family(&grid, &degrees);
        let rank0 = truncated_svd(&family.sample_matrices[0], 0.0).unwrap().rank();
        assert_eq!(rank0, 1);
        for i in 1..20 {
            let rank = truncated_svd(&family.sample_matrices[i], 0.0).unwrap().rank();
            assert_eq!(rank, 2, "subspace {i}");
        }
    }

    #[test]
    fn sliding_triples_window_shape() {
        let w = ClusterWindowing::sliding(10, 3);
        assert_eq!(w.cluster_count(), 8);
        assert_eq!(w.clusters[0], vec![0, 1, 2]);
        assert_eq!(w.clusters[7], vec![7, 8, 9]);
        // Adjacent triples share two snapshots.
        for i in 1..w.cluster_count() {
            let shared = w.clusters[i]
                .iter()
                .filter(|p| w.clusters[i - 1].contains(p))
                .count();
            assert_eq!(shared, 2);
        }
        // Union covers everything.
        let mut covered = [false; 10];
        for c in &w.clusters {
            for &p in c {
                covered[p] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn balanced_maximal_matches_sliding_triples() {
        let p = 40;
        let balanced = ClusterWindowing::balanced(p, p - 2, 1);
        let sliding = ClusterWindowing::sliding(p, 3);
        assert_eq!(balanced.clusters, sliding.clusters);
    }

    #[test]
    fn balanced_covers_and_overlaps() {
        for k in [1usize, 5, 25, 100] {
            let w = ClusterWindowing::balanced(400, k, 1);
            assert_eq!(w.cluster_count(), k);
            let mut covered = vec![false; 400];
            for c in &w.clusters {
                for &p in c {
                    covered[p] = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "k = {k}");
            for i in 1..k {
                let shared = w.clusters[i]
                    .iter()
                    .filter(|p| w.clusters[i - 1].contains(p))
                    .count();
                assert_eq!(shared, 2 * w.overlap, "k = {k}, boundary {i}");
            }
        }
    }

    #[test]
    fn frozen_trajectory_gives_identical_rank_one_windows() {
        let grid = gauss_legendre(30, (0.0, 1.0));
        let snaps = synthetic_manifold(&grid.points, 3, ManifoldMode::Frozen, 1);
        assert_eq!(snaps.len(), 3);
        assert_eq!(snaps[0], snaps[1]);
        assert_eq!(snaps[1], snaps[2]);
        let windowing = ClusterWindowing::sliding(3, 3);
        let family = integrand_matrices(&snaps, &windowing, 0.0, &grid).unwrap();
        assert_eq!(family.subspace_count(), 1);
        // n_i = 1, so the matrix has P_i = 3 identical column blocks.
        let a = &family.sample_matrices[0];
        assert_eq!(a.ncols(), 3);
        assert!((a.column(0) - a.column(1)).amax() < 1e-14);
        assert!((a.column(1) - a.column(2)).amax() < 1e-14);
    }

    #[test]
    fn rank_two_window_yields_two_modes() {
        // Three collinear snapshots: d3 = 2 d2 - d1 spans a 2-dimensional space.
        let grid = gauss_legendre(25, (0.0, 1.0));
        let d1 = DVector::from_fn(25, |g, _| (grid.points[g] * 3.0).sin());
        let d2 = DVector::from_fn(25, |g, _| (grid.points[g] * 3.0).sin() + grid.points[g]);
        let d3 = &d2 * 2.0 - &d1;
        let snaps = vec![d1, d2, d3];
        let windowing = ClusterWindowing::sliding(3, 3);
        let family = integrand_matrices(&snaps, &windowing, 0.0, &grid).unwrap();
        // Columns per cluster: P_i * n_i = 3 * 2.
        assert_eq!(family.sample_matrices[0].ncols(), 6);
    }

    #[test]
    fn integrand_column_counts_follow_window_times_modes() {
        let grid = gauss_legendre(40, (0.0, 1.0));
        let snaps = synthetic_manifold(&grid.points, 12, ManifoldMode::TravellingBump, 7);
        let windowing = ClusterWindowing::sliding(12, 3);
        let family = integrand_matrices(&snaps, &windowing, 0.0, &grid).unwrap();
        for (i, a) in family.sample_matrices.iter().enumerate() {
            let window = &windowing.clusters[i];
            let mut stacked = DMatrix::zeros(40, window.len());
            for (col, &p) in window.iter().enumerate() {
                stacked.set_column(col, &snaps[p]);
            }
            let modes = truncated_svd(&stacked, 0.0).unwrap().rank();
            assert_eq!(a.ncols(), window.len() * modes, "cluster {i}");
        }
    }

    #[test]
    fn degenerate_window_is_reported() {
        let grid = gauss_legendre(10, (0.0, 1.0));
        let snaps = vec![DVector::zeros(10); 3];
        let windowing = ClusterWindowing::sliding(3, 3);
        assert!(matches!(
            integrand_matrices(&snaps, &windowing, 0.0, &grid),
            Err(Error::DegenerateWindow { window: 0 })
        ));
    }

    #[test]
    fn full_rule_reports_zero_residuals() {
        let grid = gauss_legendre(20, (0.0, 1.0));
        let family = monomial_family(&grid, &[0, 1, 2, 3]);
        let full = AdaptiveRule {
            indices: (0..20).collect(),
            per_subspace_weights: vec![grid.weights.clone(); 4],
            per_subspace_mode_counts: vec![1; 4],
            m_max: 1,
            visit_order: (0..4).collect(),
        };
        let report = evaluate_rule(&full, &family);
        assert!(report.max_residual <= 1e-13);
    }

    #[test]
    fn zero_over_zero_residual_reports_zero() {
        // A family whose integral vanishes exactly, integrated by zero
        // weights: both sides of the ratio are zero, reported as residual 0.
        let odd = SubspaceFamily::new(
            vec![DMatrix::from_column_slice(2, 1, &[1.0, -1.0])],
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let exact = odd.sample_matrices[0].transpose() * &odd.full_weights;
        assert_eq!(exact[0], 0.0);
        let rule = AdaptiveRule {
            indices: vec![1],
            per_subspace_weights: vec![DVector::zeros(1)],
            per_subspace_mode_counts: vec![1],
            m_max: 1,
            visit_order: vec![0],
        };
        let report = evaluate_rule(&rule, &odd);
        assert_eq!(report.per_subspace_relative_residual[0], 0.0);
    }

    #[test]
    fn zero_weight_rule_has_unit_residual() {
        let grid = gauss_legendre(20, (0.0, 1.0));
        let family = monomial_family(&grid, &[2]);
        let rule = AdaptiveRule {
            indices: vec![0],
            per_subspace_weights: vec![DVector::zeros(1)],
            per_subspace_mode_counts: vec![1],
            m_max: 1,
            visit_order: vec![0],
        };
        let report = evaluate_rule(&rule, &family);
        assert!((report.max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_rule_on_scalar_family_evaluates_clean() {
        let grid = gauss_legendre(20, (0.0, 1.0));
        let family = monomial_family(&grid, &[0, 1, 2, 3, 4, 5]);
        let rule = saw_ecm(&family, &SawOptions::default()).unwrap();
        let report = evaluate_rule(&rule, &family);
        assert!(report.max_residual <= 1e-10);
    }

    #[test]
    fn element_aggregated_grid_is_unit_weighted() {
        let grid = QuadratureGrid::element_aggregated(7);
        assert_eq!(grid.domain, Domain::ElementAggregated);
        assert!(grid.weights.iter().all(|&w| w == 1.0));
        assert_eq!(grid.len(), 7);
    }
}
