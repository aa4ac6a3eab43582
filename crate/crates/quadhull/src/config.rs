use serde::{Deserialize, Serialize};

/// Numeric tolerances and size caps, threaded through every module.
///
/// Nothing in the pipeline hard-codes a tolerance at a call site; instance
/// files may override individual fields.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Symmetry check tolerance for quadratic matrices.
    pub sym_tol: f64,
    /// Relative threshold below which an eigenvalue counts as zero.
    pub eig_tol: f64,
    /// Relative threshold below which a transformed linear coefficient counts as zero.
    pub lin_tol: f64,
    /// Absolute-ish snap: |g| below this (scaled by data size) becomes exactly 0.
    pub zero_snap: f64,
    /// Polytope slack tolerance: implicit equalities, redundancy, feasibility.
    pub feas_tol: f64,
    /// Target accuracy of the interior-point solver.
    pub solver_tol: f64,
    /// Iteration cap of the interior-point solver.
    pub solver_max_iters: usize,
    /// Active-constraint / vertex coincidence tolerance in vertex enumeration.
    pub vertex_tol: f64,
    /// Dimension cap for vertex and edge enumeration.
    pub dim_cap: usize,
    /// Leaf budget for the hull recursion.
    pub max_leaves: usize,
    /// Depth budget for the hull recursion; `None` means the ambient dimension.
    pub max_depth: Option<usize>,
    /// Rotate the pure-linear block into a single coordinate before classifying.
    pub aggregate_linear: bool,
    /// Cross-check empty recursion children against the sampling oracle.
    pub check_empty_children: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sym_tol: 1e-8,
            eig_tol: 1e-9,
            lin_tol: 1e-9,
            zero_snap: 1e-12,
            feas_tol: 1e-7,
            solver_tol: 1e-8,
            solver_max_iters: 200,
            vertex_tol: 1e-8,
            dim_cap: 8,
            max_leaves: 5000,
            max_depth: None,
            aggregate_linear: false,
            check_empty_children: false,
        }
    }
}
