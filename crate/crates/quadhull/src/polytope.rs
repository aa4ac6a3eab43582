//! Polyhedral computation over inequality and vertex representations:
//! boundedness, affine hull, redundancy removal, Chebyshev centers, and
//! vertex/edge enumeration by incremental halfspace insertion.

use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::conicsolve::{self, ConeProblem, SolveStatus};
use crate::config::Config;
use crate::densela::{dot, norm2, norm_inf, Mat};
use crate::error::{Error, Result};

/// Polytope in inequality form `{ x | A x <= b }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HPolytope {
    pub a: Mat,
    pub b: Vec<f64>,
}

impl HPolytope {
    pub fn new(a: Mat, b: Vec<f64>) -> Self {
        assert_eq!(a.rows(), b.len(), "HPolytope shape mismatch");
        HPolytope { a, b }
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn bounding(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        assert_eq!(n, hi.len());
        let mut rows = Vec::with_capacity(2 * n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.push(r);
            b.push(hi[i]);
            let mut r = vec![0.0; n];
            r[i] = -1.0;
            rows.push(r);
            b.push(-lo[i]);
        }
        HPolytope { a: Mat::from_rows(&rows), b }
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.rows()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let ax = self.a.matvec(x);
        ax.iter().zip(&self.b).all(|(v, b)| *v <= b + tol)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ax = self.a.matvec(x);
        ax.iter().zip(&self.b).fold(0.0f64, |m, (v, b)| m.max(v - b))
    }

    /// Appends a row `a x <= b`.
    pub fn with_row(&self, row: &[f64], rhs: f64) -> HPolytope {
        let mut rows: Vec<Vec<f64>> = (0..self.a.rows()).map(|i| self.a.row_vec(i)).collect();
        rows.push(row.to_vec());
        let mut b = self.b.clone();
        b.push(rhs);
        HPolytope { a: Mat::from_rows(&rows), b }
    }
}

/// Polytope in vertex form, with the 1-face (edge) structure when known.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VPolytope {
    pub vertices: Vec<Vec<f64>>,
    pub adjacency: Vec<(usize, usize)>,
}

pub enum LpOutcome {
    /// (optimal value, optimizer)
    Optimal(f64, Vec<f64>),
    Unbounded,
    Infeasible,
}

/// Maximizes `c . x` over `p`.
pub fn lp_max(p: &HPolytope, c: &[f64], cfg: &Config) -> Result<LpOutcome> {
    let n = p.dim();
    assert_eq!(c.len(), n);
    if n == 0 {
        // zero-dimensional: the single empty point, feasible iff all b >= 0
        return if p.b.iter().all(|&b| b >= -cfg.feas_tol) {
            Ok(LpOutcome::Optimal(0.0, Vec::new()))
        } else {
            Ok(LpOutcome::Infeasible)
        };
    }
    let mut prob = ConeProblem::new(n, c.iter().map(|v| -v).collect());
    prob.ineq_lhs = p.a.clone();
    prob.ineq_rhs = p.b.clone();
    let sol = conicsolve::solve(&prob, cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => Ok(LpOutcome::Optimal(-sol.objective, sol.x)),
        SolveStatus::Unbounded => Ok(LpOutcome::Unbounded),
        SolveStatus::Infeasible => Ok(LpOutcome::Infeasible),
        SolveStatus::NumericFailure => Err(Error::SolverFailure(format!(
            "LP did not converge (residuals {:.2e}/{:.2e}/{:.2e})",
            sol.primal_residual, sol.dual_residual, sol.gap_residual
        ))),
    }
}

/// True iff the recession cone of `p` is trivial; empty `p` is an error.
pub fn is_bounded(p: &HPolytope, cfg: &Config) -> Result<bool> {
    let n = p.dim();
    if n == 0 {
        return if p.b.iter().all(|&b| b >= -cfg.feas_tol) {
            Ok(true)
        } else {
            Err(Error::Infeasible("empty polytope".into()))
        };
    }
    let mut probe = vec![0.0; n];
    for i in 0..n {
        for sign in [1.0, -1.0] {
            probe[i] = sign;
            match lp_max(p, &probe, cfg)? {
                LpOutcome::Unbounded => return Ok(false),
                LpOutcome::Infeasible => {
                    return Err(Error::Infeasible("empty polytope".into()))
                }
                LpOutcome::Optimal(..) => {}
            }
            probe[i] = 0.0;
        }
    }
    Ok(true)
}

/// Componentwise extremes of `p`; requires bounded nonempty `p`.
pub fn bounding_box(p: &HPolytope, cfg: &Config) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.dim();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut probe = vec![0.0; n];
    for i in 0..n {
        probe[i] = 1.0;
        match lp_max(p, &probe, cfg)? {
            LpOutcome::Optimal(v, _) => hi[i] = v,
            LpOutcome::Unbounded => return Err(Error::UnboundedPolytope),
            LpOutcome::Infeasible => return Err(Error::Infeasible("empty polytope".into())),
        }
        probe[i] = -1.0;
        match lp_max(p, &probe, cfg)? {
            LpOutcome::Optimal(v, _) => lo[i] = -v,
            LpOutcome::Unbounded => return Err(Error::UnboundedPolytope),
            LpOutcome::Infeasible => return Err(Error::Infeasible("empty polytope".into())),
        }
        probe[i] = 0.0;
    }
    Ok((lo, hi))
}

/// Chebyshev center of a full-dimensional bounded polytope.
///
/// Returns the center; errors with an internal-inconsistency signal when the
/// inscribed radius is below tolerance (the polytope is not full-dimensional).
pub fn interior_point(p: &HPolytope, cfg: &Config) -> Result<Vec<f64>> {
    let (center, radius) = chebyshev(p, cfg)?;
    if radius <= cfg.feas_tol {
        return Err(Error::Internal(format!(
            "interior_point: inscribed radius {radius:.3e} is not positive; polytope not full-dimensional"
        )));
    }
    Ok(center)
}

/// (center, radius) of the largest inscribed ball.
pub fn chebyshev(p: &HPolytope, cfg: &Config) -> Result<(Vec<f64>, f64)> {
    let n = p.dim();
    let m = p.num_rows();
    if n == 0 {
        return Err(Error::InvalidInput("chebyshev center of 0-dimensional polytope".into()));
    }
    // variables (x, r): maximize r subject to a_i x + ||a_i|| r <= b_i
    let mut obj = vec![0.0; n + 1];
    obj[n] = -1.0;
    let mut prob = ConeProblem::new(n + 1, obj);
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = p.a.row_vec(i);
        row.push(norm2(p.a.row(i)));
        rows.push(row);
    }
    prob.ineq_lhs = Mat::from_rows(&rows);
    prob.ineq_rhs = p.b.clone();
    let sol = conicsolve::solve(&prob, cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => Ok((sol.x[..n].to_vec(), sol.x[n])),
        SolveStatus::Infeasible => Err(Error::Infeasible("empty polytope".into())),
        SolveStatus::Unbounded => Err(Error::UnboundedPolytope),
        SolveStatus::NumericFailure => {
            Err(Error::SolverFailure("chebyshev LP did not converge".into()))
        }
    }
}

/// Result of implicit-equality detection.
pub struct AffineHull {
    /// Rows of `p` that hold with equality everywhere on `p`, as `(m, f)`.
    pub eq_lhs: Mat,
    pub eq_rhs: Vec<f64>,
    /// `p` rewritten in the free coordinates; full-dimensional.
    pub reduced: HPolytope,
    /// Embeds reduced coordinates back: `x = L x_N + t`.
    pub embedding: AffineMap,
}

/// Detects implicit equalities by maximizing each row's slack over `p` and
/// rewrites `p` in a full-dimensional coordinate system.
pub fn affine_hull(p: &HPolytope, cfg: &Config) -> Result<AffineHull> {
    let n = p.dim();
    let m = p.num_rows();
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut eq_rhs: Vec<f64> = Vec::new();
    for i in 0..m {
        let row = p.a.row(i);
        let rnorm = norm2(row);
        if rnorm <= cfg.feas_tol {
            if p.b[i] < -cfg.feas_tol {
                return Err(Error::Infeasible("zero row with negative rhs".into()));
            }
            continue;
        }
        // maximize the slack b_i - a_i x, i.e. minimize a_i x
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        match lp_max(p, &neg, cfg)? {
            LpOutcome::Optimal(v, _) => {
                let max_slack = p.b[i] + v;
                if max_slack <= cfg.feas_tol * rnorm.max(1.0) {
                    eq_rows.push(row.to_vec());
                    eq_rhs.push(p.b[i]);
                }
            }
            LpOutcome::Unbounded => {}
            LpOutcome::Infeasible => {
                return Err(Error::Infeasible("empty polytope".into()));
            }
        }
    }

    if eq_rows.is_empty() {
        return Ok(AffineHull {
            eq_lhs: Mat::zeros(0, n),
            eq_rhs: Vec::new(),
            reduced: p.clone(),
            embedding: AffineMap::identity(n),
        });
    }

    let m_eq = Mat::from_rows(&eq_rows);
    let red = crate::densela::row_reduce(&m_eq, &eq_rhs, cfg.feas_tol)?;

    // embedding x = L x_N + t from the parametrization x_B = C x_N + h
    let nf = red.free_cols.len();
    let mut l = Mat::zeros(n, nf);
    let mut t = vec![0.0; n];
    for (k, &j) in red.free_cols.iter().enumerate() {
        l.set(j, k, 1.0);
    }
    for (r, &j) in red.basic_cols.iter().enumerate() {
        t[j] = red.offset[r];
        for k in 0..nf {
            l.set(j, k, red.coeffs.get(r, k));
        }
    }
    let embedding = AffineMap::new(l, t);
    let reduced = substitute_rows(p, &embedding, cfg)?;
    Ok(AffineHull { eq_lhs: m_eq, eq_rhs, reduced, embedding })
}

/// Rewrites `{A x <= b}` under `x = L u + t`; drops rows that become trivial.
pub fn substitute_rows(p: &HPolytope, map: &AffineMap, cfg: &Config) -> Result<HPolytope> {
    let nf = map.n_in();
    let at = p.a.matvec(&map.t);
    let al = p.a.matmul(&map.l);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..p.num_rows() {
        let row = al.row_vec(i);
        let b = p.b[i] - at[i];
        let scale = norm_inf(p.a.row(i)).max(1.0);
        if norm_inf(&row) <= cfg.feas_tol * scale {
            if b < -cfg.feas_tol * scale {
                return Err(Error::Infeasible("constraint row became 0 <= negative".into()));
            }
            continue;
        }
        rows.push(row);
        rhs.push(b);
    }
    if rows.is_empty() {
        return Ok(HPolytope { a: Mat::zeros(0, nf), b: rhs });
    }
    Ok(HPolytope { a: Mat::from_rows(&rows), b: rhs })
}

/// Removes redundant rows of a full-dimensional bounded polytope; the result
/// lists exactly the facets.
pub fn facets(p: &HPolytope, cfg: &Config) -> Result<HPolytope> {
    let n = p.dim();
    let m = p.num_rows();
    // normalize and drop exact duplicates first
    let mut keep: Vec<bool> = vec![true; m];
    let mut normed: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    for i in 0..m {
        let nr = norm2(p.a.row(i));
        if nr <= cfg.feas_tol {
            keep[i] = p.b[i] < -cfg.feas_tol; // infeasible zero rows are caught below
            if keep[i] {
                return Err(Error::Infeasible("zero row with negative rhs".into()));
            }
            normed.push((vec![0.0; n], 0.0));
            continue;
        }
        let row: Vec<f64> = p.a.row(i).iter().map(|v| v / nr).collect();
        normed.push((row, p.b[i] / nr));
    }
    for i in 0..m {
        if !keep[i] {
            continue;
        }
        for j in (i + 1)..m {
            if !keep[j] {
                continue;
            }
            let same = normed[i]
                .0
                .iter()
                .zip(&normed[j].0)
                .all(|(a, b)| (a - b).abs() <= cfg.feas_tol)
                && (normed[i].1 - normed[j].1).abs() <= cfg.feas_tol;
            if same {
                keep[j] = false;
            }
        }
    }

    for i in 0..m {
        if !keep[i] {
            continue;
        }
        let others: Vec<usize> = (0..m).filter(|&j| j != i && keep[j]).collect();
        if others.is_empty() {
            continue;
        }
        let sub = HPolytope {
            a: Mat::from_rows(&others.iter().map(|&j| p.a.row_vec(j)).collect::<Vec<_>>()),
            b: others.iter().map(|&j| p.b[j]).collect(),
        };
        match lp_max(&sub, p.a.row(i), cfg)? {
            LpOutcome::Optimal(v, _) => {
                let scale = norm2(p.a.row(i)).max(1.0);
                if v <= p.b[i] + cfg.feas_tol * scale {
                    keep[i] = false;
                }
            }
            LpOutcome::Unbounded => {}
            LpOutcome::Infeasible => {
                return Err(Error::Infeasible("empty polytope in facet filtering".into()))
            }
        }
    }

    let rows: Vec<Vec<f64>> =
        (0..m).filter(|&i| keep[i]).map(|i| p.a.row_vec(i)).collect();
    let rhs: Vec<f64> = (0..m).filter(|&i| keep[i]).map(|i| p.b[i]).collect();
    Ok(HPolytope { a: Mat::from_rows(&rows), b: rhs })
}

/// Exact vertex and edge enumeration for a bounded nonempty polytope of
/// dimension at most `cfg.dim_cap`.
///
/// Halfspaces are inserted one at a time into a strictly-containing box, in
/// lexicographic order of the normalized rows; edges are vertex pairs whose
/// shared active rows have rank `n - 1`.
pub fn vertices_and_edges(p: &HPolytope, cfg: &Config) -> Result<VPolytope> {
    let n = p.dim();
    if n > cfg.dim_cap {
        return Err(Error::Capacity(format!(
            "vertex enumeration in dimension {n} exceeds the cap {}",
            cfg.dim_cap
        )));
    }
    if n == 0 {
        return if p.b.iter().all(|&b| b >= -cfg.feas_tol) {
            Ok(VPolytope { vertices: vec![Vec::new()], adjacency: Vec::new() })
        } else {
            Err(Error::Infeasible("empty polytope".into()))
        };
    }
    let (lo, hi) = bounding_box(p, cfg)?;

    // strictly containing start box
    let mut blo = vec![0.0; n];
    let mut bhi = vec![0.0; n];
    for i in 0..n {
        let margin = 1.0 + 0.1 * (hi[i] - lo[i]).abs();
        blo[i] = lo[i] - margin;
        bhi[i] = hi[i] + margin;
    }

    // combined row list: 2n box rows, then the polytope rows normalized and
    // sorted lexicographically
    let mut all_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        all_rows.push((r.clone(), bhi[i]));
        r[i] = -1.0;
        all_rows.push((r, -blo[i]));
    }
    let mut poly_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..p.num_rows() {
        let nr = norm2(p.a.row(i));
        if nr <= cfg.feas_tol {
            if p.b[i] < -cfg.feas_tol {
                return Err(Error::Infeasible("zero row with negative rhs".into()));
            }
            continue;
        }
        poly_rows.push((p.a.row(i).iter().map(|v| v / nr).collect(), p.b[i] / nr));
    }
    poly_rows.sort_by(|x, y| {
        for (a, b) in x.0.iter().chain(std::iter::once(&x.1)).zip(y.0.iter().chain(std::iter::once(&y.1))) {
            match a.partial_cmp(b).unwrap() {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
    let first_poly_row = all_rows.len();
    all_rows.extend(poly_rows);

    #[derive(Clone)]
    struct Vtx {
        point: Vec<f64>,
        active: Vec<usize>,
    }

    // start from the box vertices
    let mut verts: Vec<Vtx> = Vec::with_capacity(1 << n);
    for mask in 0..(1usize << n) {
        let mut point = vec![0.0; n];
        let mut active = Vec::with_capacity(n);
        for i in 0..n {
            if mask & (1 << i) != 0 {
                point[i] = bhi[i];
                active.push(2 * i);
            } else {
                point[i] = blo[i];
                active.push(2 * i + 1);
            }
        }
        verts.push(Vtx { point, active });
    }

    let tol = cfg.vertex_tol;
    let scale = 1.0 + bhi.iter().chain(blo.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let coincide_tol = tol * scale;

    let shared_rank = |u: &Vtx, v: &Vtx, rows: &[(Vec<f64>, f64)]| -> usize {
        let shared: Vec<usize> =
            u.active.iter().filter(|i| v.active.contains(i)).copied().collect();
        if shared.len() < n - 1 {
            return 0;
        }
        let m = Mat::from_rows(&shared.iter().map(|&i| rows[i].0.clone()).collect::<Vec<_>>());
        m.rank(tol)
    };

    for r_idx in first_poly_row..all_rows.len() {
        let (row, rhs) = all_rows[r_idx].clone();
        let slacks: Vec<f64> = verts.iter().map(|v| rhs - dot(&row, &v.point)).collect();
        if slacks.iter().all(|&s| s >= -coincide_tol) {
            // nothing cut; still record tightness
            for (v, &s) in verts.iter_mut().zip(&slacks) {
                if s.abs() <= coincide_tol && !v.active.contains(&r_idx) {
                    v.active.push(r_idx);
                }
            }
            continue;
        }

        let mut next: Vec<Vtx> = Vec::new();
        for (v, &s) in verts.iter().zip(&slacks) {
            if s >= -coincide_tol {
                let mut keep = v.clone();
                if s.abs() <= coincide_tol && !keep.active.contains(&r_idx) {
                    keep.active.push(r_idx);
                }
                next.push(keep);
            }
        }
        // crossings on edges between strictly-in and strictly-out vertices
        for i in 0..verts.len() {
            if slacks[i] <= coincide_tol {
                continue; // need strictly inside
            }
            for j in 0..verts.len() {
                if slacks[j] >= -coincide_tol {
                    continue; // need strictly outside
                }
                if shared_rank(&verts[i], &verts[j], &all_rows) != n - 1 {
                    continue;
                }
                let t = slacks[i] / (slacks[i] - slacks[j]);
                let point: Vec<f64> = verts[i]
                    .point
                    .iter()
                    .zip(&verts[j].point)
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                let mut active: Vec<usize> = verts[i]
                    .active
                    .iter()
                    .filter(|k| verts[j].active.contains(k))
                    .copied()
                    .collect();
                active.push(r_idx);
                next.push(Vtx { point, active });
            }
        }
        // merge coinciding vertices, unioning active sets
        let mut merged: Vec<Vtx> = Vec::new();
        for v in next {
            if let Some(existing) = merged.iter_mut().find(|u| {
                u.point.iter().zip(&v.point).all(|(a, b)| (a - b).abs() <= coincide_tol)
            }) {
                for k in v.active {
                    if !existing.active.contains(&k) {
                        existing.active.push(k);
                    }
                }
            } else {
                merged.push(v);
            }
        }
        verts = merged;
        if verts.is_empty() {
            return Err(Error::Infeasible("vertex enumeration found an empty polytope".into()));
        }
    }

    // final vertices must not sit on the artificial box
    let mut points: Vec<Vec<f64>> = Vec::new();
    for v in &verts {
        if v.active.iter().any(|&k| k < first_poly_row) {
            return Err(Error::Internal(
                "vertex enumeration: a vertex stayed on the bounding box; polytope may be unbounded"
                    .into(),
            ));
        }
        points.push(v.point.clone());
    }

    // deterministic output order
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        for (a, b) in points[i].iter().zip(&points[j]) {
            match a.partial_cmp(b).unwrap() {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
    let vertices: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();

    // recompute active sets against the original rows and derive edges
    let actives: Vec<Vec<usize>> = vertices
        .iter()
        .map(|x| {
            (0..p.num_rows())
                .filter(|&i| {
                    let nr = norm2(p.a.row(i)).max(1.0);
                    (p.b[i] - dot(p.a.row(i), x)).abs() <= coincide_tol * nr
                })
                .collect()
        })
        .collect();
    let mut adjacency = Vec::new();
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            let shared: Vec<usize> =
                actives[i].iter().filter(|k| actives[j].contains(k)).copied().collect();
            if shared.len() < n.saturating_sub(1) {
                continue;
            }
            let m = Mat::from_rows(
                &shared.iter().map(|&k| p.a.row_vec(k)).collect::<Vec<_>>(),
            );
            if m.rank(tol) == n - 1 {
                adjacency.push((i, j));
            }
        }
    }

    Ok(VPolytope { vertices, adjacency })
}

/// Prunes `points` down to the vertices of their convex hull.
///
/// A point is kept iff it is not a convex combination of the others, decided
/// by a small phase-1 LP per point.
pub fn extreme_points(points: &[Vec<f64>], cfg: &Config) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let n = points[0].len();
    // dedupe coincident points first
    let scale = 1.0
        + points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = cfg.vertex_tol * scale;
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol)) {
            distinct.push(p.clone());
        }
    }
    distinct.sort_by(|x, y| {
        for (a, b) in x.iter().zip(y) {
            match a.partial_cmp(b).unwrap() {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
    if n == 0 || distinct.len() == 1 {
        distinct.truncate(1);
        return Ok(distinct);
    }

    let mut keep = vec![true; distinct.len()];
    for i in 0..distinct.len() {
        let others: Vec<usize> = (0..distinct.len()).filter(|&j| j != i && keep[j]).collect();
        if others.is_empty() {
            continue;
        }
        if in_convex_hull(&distinct[i], &others.iter().map(|&j| distinct[j].clone()).collect::<Vec<_>>(), cfg)? {
            keep[i] = false;
        }
    }
    Ok((0..distinct.len()).filter(|&i| keep[i]).map(|i| distinct[i].clone()).collect())
}

/// Phase-1 test for `x` in the convex hull of `gens`.
pub fn in_convex_hull(x: &[f64], gens: &[Vec<f64>], cfg: &Config) -> Result<bool> {
    let k = gens.len();
    let n = x.len();
    if k == 0 {
        return Ok(false);
    }
    // variables (mu_1..mu_k, t): minimize t
    // s.t. -t <= sum mu_j v_j - x <= t componentwise, sum mu = 1, mu >= 0
    let mut obj = vec![0.0; k + 1];
    obj[k] = 1.0;
    let mut prob = ConeProblem::new(k + 1, obj);
    let mut eq = vec![0.0; k + 1];
    for v in eq.iter_mut().take(k) {
        *v = 1.0;
    }
    prob.eq_lhs = Mat::from_rows(&[eq]);
    prob.eq_rhs = vec![1.0];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for d in 0..n {
        let mut up = vec![0.0; k + 1];
        let mut dn = vec![0.0; k + 1];
        for j in 0..k {
            up[j] = gens[j][d];
            dn[j] = -gens[j][d];
        }
        up[k] = -1.0;
        dn[k] = -1.0;
        rows.push(up);
        rhs.push(x[d]);
        rows.push(dn);
        rhs.push(-x[d]);
    }
    for j in 0..k {
        let mut r = vec![0.0; k + 1];
        r[j] = -1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    {
        let mut r = vec![0.0; k + 1];
        r[k] = -1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    prob.ineq_lhs = Mat::from_rows(&rows);
    prob.ineq_rhs = rhs;
    let sol = conicsolve::solve(&prob, cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => {
            let scale = 1.0 + norm_inf(x);
            Ok(sol.objective <= cfg.vertex_tol * scale)
        }
        _ => Err(Error::SolverFailure("convex-hull membership LP failed".into())),
    }
}
