//! Convex-hull construction for a quadratic surface over a polytope.
//!
//! A canonical set is classified either as a base case with a direct
//! second-order-cone description, or as a ruled case whose extreme points all
//! lie on facets of the polytope; the latter recurses on each facet and joins
//! the children with a disjunctive hull. The result is a tree of convex SOC
//! leaves, vertex-polytope leaves, disjunctions, intersections and affine
//! images whose represented set is exactly `conv(S)`.

use std::collections::BTreeSet;

use crate::affine::AffineMap;
use crate::conicsolve::{self, ConeProblem, SocConstraint, SolveStatus};
use crate::config::Config;
use crate::densela::{dot, norm2, norm_inf, Mat};
use crate::error::{Error, Result};
use crate::polytope::{self, HPolytope, LpOutcome};
use crate::reduction::{self, CanonicalSet, QuadInstance};

/// Outcome of the case analysis for one canonical set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    Empty,
    BasePoint,
    BaseLinear,
    BaseOneSided,
    BaseSingleSquare,
    RecurseFacets,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTag::Empty => "Empty",
            CaseTag::BasePoint => "BasePoint",
            CaseTag::BaseLinear => "BaseLinear",
            CaseTag::BaseOneSided => "BaseOneSided",
            CaseTag::BaseSingleSquare => "BaseSingleSquare",
            CaseTag::RecurseFacets => "RecurseFacets",
        };
        f.write_str(s)
    }
}

/// A case tag together with the rule that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub tag: CaseTag,
    pub rule: &'static str,
}

/// Convex set described directly by linear rows and SOC constraints.
///
/// Every leaf carries its polytope rows so the represented set is compact;
/// the disjunctive construction relies on that.
#[derive(Debug, Clone)]
pub struct SocLeaf {
    pub dim: usize,
    pub eq_lhs: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_lhs: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub socs: Vec<SocConstraint>,
    pub label: String,
}

impl SocLeaf {
    fn from_polytope(p: &HPolytope, label: &str) -> SocLeaf {
        SocLeaf {
            dim: p.dim(),
            eq_lhs: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_lhs: (0..p.num_rows()).map(|i| p.a.row_vec(i)).collect(),
            ineq_rhs: p.b.clone(),
            socs: Vec::new(),
            label: label.to_string(),
        }
    }
}

/// Recursive hull description.
#[derive(Debug, Clone)]
pub enum HullRep {
    Empty,
    ConvexSocLeaf(SocLeaf),
    VPolyLeaf { dim: usize, vertices: Vec<Vec<f64>>, label: String },
    Disjunction { dim: usize, children: Vec<HullRep> },
    Intersection { dim: usize, children: Vec<HullRep> },
    AffineImage { map: AffineMap, child: Box<HullRep> },
}

impl HullRep {
    pub fn is_empty(&self) -> bool {
        matches!(self, HullRep::Empty)
    }

    /// Ambient dimension of the represented set.
    pub fn dim(&self) -> usize {
        match self {
            HullRep::Empty => 0,
            HullRep::ConvexSocLeaf(l) => l.dim,
            HullRep::VPolyLeaf { dim, .. } => *dim,
            HullRep::Disjunction { dim, .. } | HullRep::Intersection { dim, .. } => *dim,
            HullRep::AffineImage { map, .. } => map.n_out(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            HullRep::Empty => 0,
            HullRep::ConvexSocLeaf(_) | HullRep::VPolyLeaf { .. } => 1,
            HullRep::Disjunction { children, .. } | HullRep::Intersection { children, .. } => {
                children.iter().map(|c| c.leaf_count()).sum()
            }
            HullRep::AffineImage { child, .. } => child.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            HullRep::Empty => 0,
            HullRep::ConvexSocLeaf(_) | HullRep::VPolyLeaf { .. } => 1,
            HullRep::Disjunction { children, .. } | HullRep::Intersection { children, .. } => {
                1 + children.iter().map(|c| c.depth()).max().unwrap_or(0)
            }
            HullRep::AffineImage { child, .. } => child.depth(),
        }
    }
}

/// Wraps a hull in an affine image, skipping identity maps.
pub fn apply_map(map: &AffineMap, hull: HullRep) -> HullRep {
    if hull.is_empty() {
        return HullRep::Empty;
    }
    if map.is_identity() {
        return hull;
    }
    HullRep::AffineImage { map: map.clone(), child: Box::new(hull) }
}

fn polytope_is_empty(p: &HPolytope, cfg: &Config) -> Result<bool> {
    if p.dim() == 0 {
        return Ok(p.b.iter().any(|&b| b < -cfg.feas_tol));
    }
    match polytope::lp_max(p, &vec![0.0; p.dim()], cfg)? {
        LpOutcome::Infeasible => Ok(true),
        _ => Ok(false),
    }
}

/// Case analysis of a canonical set, evaluated top-down.
pub fn classify(c: &CanonicalSet, cfg: &Config) -> Result<Classification> {
    if polytope_is_empty(&c.p, cfg)? {
        return Ok(Classification { tag: CaseTag::Empty, rule: "empty-polytope" });
    }
    let (qp, qm, l, o) = c.counts();
    let cls = if qp == 0 && qm == 0 && l == 0 {
        // the equation degenerates to 0 = g
        if c.g != 0.0 {
            Classification { tag: CaseTag::Empty, rule: "inconsistent-constant" }
        } else if c.dim() == 0 {
            Classification { tag: CaseTag::BasePoint, rule: "zero-dimensional-point" }
        } else {
            Classification { tag: CaseTag::BaseLinear, rule: "whole-polytope" }
        }
    } else if qp == 0 && qm == 0 && l == 1 {
        Classification { tag: CaseTag::BaseLinear, rule: "hyperplane-slice" }
    } else if o >= 1 {
        Classification { tag: CaseTag::RecurseFacets, rule: "absent-coordinate-translation" }
    } else if l >= 2 {
        Classification { tag: CaseTag::RecurseFacets, rule: "linear-pair-exchange" }
    } else if l == 1 && qp >= 1 && qm >= 1 {
        Classification { tag: CaseTag::RecurseFacets, rule: "square-linear-exchange" }
    } else if l <= 1 && (qp == 0 || qm == 0) {
        Classification { tag: CaseTag::BaseOneSided, rule: "one-sided-squares" }
    } else if qp == 1 && qm >= 1 {
        Classification { tag: CaseTag::BaseSingleSquare, rule: "single-opposed-square" }
    } else {
        debug_assert!(qp >= 2 && qm >= 1 && l == 0 && o == 0);
        Classification { tag: CaseTag::RecurseFacets, rule: "ruled-line" }
    };
    Ok(cls)
}

/// Returns the canonical set's data as a plain quadratic instance.
pub fn canonical_instance(c: &CanonicalSet) -> QuadInstance {
    let n = c.dim();
    let mut diag = vec![0.0; n];
    for d in diag.iter_mut().take(c.n_qp) {
        *d = 1.0;
    }
    for d in diag.iter_mut().skip(c.n_qp).take(c.n_qm) {
        *d = -1.0;
    }
    let mut alpha = vec![0.0; n];
    for a in alpha.iter_mut().skip(c.n_qp + c.n_qm).take(c.n_l) {
        *a = 1.0;
    }
    QuadInstance::new(Mat::diag(&diag), alpha, c.g, c.p.clone()).expect("canonical data is valid")
}

/// Substitutes one facet equation into the instance, eliminating the pivot
/// coordinate with the largest coefficient.
pub fn facet_restrict(
    inst: &QuadInstance,
    facet_index: usize,
) -> (AffineMap, HPolytope) {
    let n = inst.dim();
    let row = inst.p.a.row(facet_index);
    let rhs = inst.p.b[facet_index];
    let mut j0 = 0;
    for j in 1..n {
        if row[j].abs() > row[j0].abs() {
            j0 = j;
        }
    }
    let piv = row[j0];
    assert!(piv != 0.0, "facet row is zero");

    let mut l = Mat::zeros(n, n - 1);
    let mut t = vec![0.0; n];
    let mut k = 0;
    for j in 0..n {
        if j == j0 {
            continue;
        }
        l.set(j, k, 1.0);
        l.set(j0, k, -row[j] / piv);
        k += 1;
    }
    t[j0] = rhs / piv;

    let rows: Vec<Vec<f64>> = (0..inst.p.num_rows())
        .filter(|&i| i != facet_index)
        .map(|i| inst.p.a.row_vec(i))
        .collect();
    let b: Vec<f64> = (0..inst.p.num_rows())
        .filter(|&i| i != facet_index)
        .map(|i| inst.p.b[i])
        .collect();
    let p_rest = if rows.is_empty() {
        HPolytope::new(Mat::zeros(0, n), b)
    } else {
        HPolytope::new(Mat::from_rows(&rows), b)
    };
    (AffineMap::new(l, t), p_rest)
}

/// Candidate-point hull of the part of `p` violating (or on) one SOC
/// constraint: polytope vertices outside the constraint plus the boundary
/// crossings along edges, pruned to extreme points.
pub fn reverse_convex_hull_via_edges(
    p: &HPolytope,
    soc: &SocConstraint,
    cfg: &Config,
) -> Result<Vec<Vec<f64>>> {
    let vp = match polytope::vertices_and_edges(p, cfg) {
        Ok(vp) => vp,
        Err(Error::Infeasible(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let scale = 1.0
        + vp.vertices.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = cfg.feas_tol * scale;

    let value = |x: &[f64]| {
        let lhs = norm2(&crate::densela::add(&soc.a.matvec(x), &soc.b));
        let rhs = dot(&soc.c, x) + soc.d;
        (lhs, rhs)
    };

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for v in &vp.vertices {
        let (lhs, rhs) = value(v);
        if lhs >= rhs - tol {
            candidates.push(v.clone());
        }
    }
    for &(i, j) in &vp.adjacency {
        let p1 = &vp.vertices[i];
        let p2 = &vp.vertices[j];
        let d: Vec<f64> = p2.iter().zip(p1).map(|(a, b)| a - b).collect();
        // ||u + t v||^2 = (r0 + t r1)^2 as a quadratic in t
        let u = crate::densela::add(&soc.a.matvec(p1), &soc.b);
        let av = soc.a.matvec(&d);
        let r0 = dot(&soc.c, p1) + soc.d;
        let r1 = dot(&soc.c, &d);
        let qa = dot(&av, &av) - r1 * r1;
        let qb = 2.0 * (dot(&u, &av) - r0 * r1);
        let qc = dot(&u, &u) - r0 * r0;
        let mut roots: Vec<f64> = Vec::new();
        if qa.abs() <= 1e-14 * (1.0 + qb.abs().max(qc.abs())) {
            if qb != 0.0 {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q0 = -0.5 * (qb + qb.signum() * sq);
                if q0 != 0.0 {
                    roots.push(q0 / qa);
                    roots.push(qc / q0);
                } else {
                    roots.push(0.0);
                }
            }
        }
        for t in roots {
            if !(1e-9..=1.0 - 1e-9).contains(&t) {
                continue;
            }
            // the equation of squares only matches the cone boundary where
            // the right side is nonnegative
            if r0 + t * r1 < -tol {
                continue;
            }
            let pt: Vec<f64> = p1.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            candidates.push(pt);
        }
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    polytope::extreme_points(&candidates, cfg)
}

/// Hull of a compact union: drops empty children, simplifies singletons.
pub fn disjunct_union(children: Vec<HullRep>) -> HullRep {
    let mut kept: Vec<HullRep> = children.into_iter().filter(|c| !c.is_empty()).collect();
    match kept.len() {
        0 => HullRep::Empty,
        1 => kept.pop().unwrap(),
        _ => {
            let dim = kept[0].dim();
            debug_assert!(kept.iter().all(|c| c.dim() == dim));
            HullRep::Disjunction { dim, children: kept }
        }
    }
}

fn intersect(children: Vec<HullRep>) -> HullRep {
    if children.iter().any(|c| c.is_empty()) {
        return HullRep::Empty;
    }
    let mut kept = children;
    match kept.len() {
        0 => HullRep::Empty,
        1 => kept.pop().unwrap(),
        _ => {
            let dim = kept[0].dim();
            debug_assert!(kept.iter().all(|c| c.dim() == dim));
            HullRep::Intersection { dim, children: kept }
        }
    }
}

/// Feasibility probe for a SOC leaf: returns false when the leaf region is
/// certifiably empty.
fn leaf_feasible(leaf: &SocLeaf, objective: Vec<f64>, cfg: &Config) -> Result<bool> {
    let mut prob = ConeProblem::new(leaf.dim, objective);
    if !leaf.ineq_lhs.is_empty() {
        prob.ineq_lhs = Mat::from_rows(&leaf.ineq_lhs);
        prob.ineq_rhs = leaf.ineq_rhs.clone();
    }
    if !leaf.eq_lhs.is_empty() {
        prob.eq_lhs = Mat::from_rows(&leaf.eq_lhs);
        prob.eq_rhs = leaf.eq_rhs.clone();
    }
    prob.socs = leaf.socs.clone();
    let sol = conicsolve::solve(&prob, cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::Unbounded => Ok(true),
        SolveStatus::NumericFailure => Err(Error::SolverFailure(
            "leaf feasibility probe did not converge".into(),
        )),
    }
}

/// One-sided base case: all squares carry the same sign.
///
/// Writes `S = S' \cap S''` where `S'` (the inside of the paraboloid/ball) is
/// convex and SOC-described, and `conv(S'')` is the polyhedral hull of the
/// reverse-convex part, carried by polytope vertices and edge crossings.
pub fn base_one_sided(c: &CanonicalSet, cfg: &Config) -> Result<HullRep> {
    let (qp, qm, l, o) = c.counts();
    assert!(o == 0 && l <= 1 && (qp == 0 || qm == 0), "not a one-sided case: {:?}", c.counts());
    let n = c.dim();
    let mirror = qp == 0 && qm >= 1;
    let nsq = if mirror { qm } else { qp };
    let sq_off = if mirror { qp } else { 0 };
    let y_idx = if l == 1 { Some(qp + qm) } else { None };

    // S': sum of squares <= (g - y) (or (y - g) in the mirror case), as
    // || (s_block, (f - 1)/2) || <= (f + 1)/2 with f the affine right-hand
    // side; halving the textbook form keeps reported violations in the
    // geometry's own units
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_vec: Vec<f64> = Vec::new();
    for i in 0..nsq {
        let mut r = vec![0.0; n];
        r[sq_off + i] = 1.0;
        a_rows.push(r);
        b_vec.push(0.0);
    }
    // f = g - y  (mirror: f = y - g)
    let mut f_row = vec![0.0; n];
    let f_const = if mirror { -c.g } else { c.g };
    if let Some(y) = y_idx {
        f_row[y] = if mirror { 1.0 } else { -1.0 };
    }
    // last coordinate of the norm argument: (f - 1)/2
    let half_row: Vec<f64> = f_row.iter().map(|v| v / 2.0).collect();
    a_rows.push(half_row.clone());
    b_vec.push((f_const - 1.0) / 2.0);
    let soc = SocConstraint {
        a: Mat::from_rows(&a_rows),
        b: b_vec,
        c: half_row,
        d: (f_const + 1.0) / 2.0,
    };

    let mut leaf = SocLeaf::from_polytope(&c.p, "one-sided-cap");
    leaf.socs.push(soc.clone());

    // minimize f's slack to certify emptiness of S'
    let mut probe = vec![0.0; n];
    if let Some(y) = y_idx {
        probe[y] = if mirror { -1.0 } else { 1.0 };
    }
    if !leaf_feasible(&leaf, probe, cfg)? {
        return Ok(HullRep::Empty);
    }

    let outer = reverse_convex_hull_via_edges(&c.p, &soc, cfg)?;
    if outer.is_empty() {
        return Ok(HullRep::Empty);
    }
    Ok(intersect(vec![
        HullRep::ConvexSocLeaf(leaf),
        HullRep::VPolyLeaf { dim: n, vertices: outer, label: "one-sided-shell".into() },
    ]))
}

/// Base case with exactly one positive square against negative squares:
/// `w^2 = g + sum x_j^2` with no linear or absent coordinates.
///
/// Both halves split by the sign of `w` into a convex SOC piece and a
/// reverse-convex piece with a polyhedral hull; the result is the
/// intersection of the two disjunctive hulls.
pub fn base_single_square(c: &CanonicalSet, cfg: &Config) -> Result<HullRep> {
    let (qp, qm, l, o) = c.counts();
    assert!(l == 0 && o == 0 && qp <= 1, "not a single-square case: {:?}", c.counts());
    let n = c.dim();

    if qp == 0 {
        // -sum x^2 = g with g >= 0: empty unless g = 0, then the origin
        if c.g > 0.0 {
            return Ok(HullRep::Empty);
        }
        let origin = vec![0.0; n];
        if c.p.contains(&origin, cfg.feas_tol) {
            return Ok(HullRep::VPolyLeaf {
                dim: n,
                vertices: vec![origin],
                label: "single-point".into(),
            });
        }
        return Ok(HullRep::Empty);
    }

    let sqrt_g = c.g.sqrt();
    // norm argument (x, sqrt(g)) shared by all four pieces
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_vec: Vec<f64> = Vec::new();
    for j in 0..qm {
        let mut r = vec![0.0; n];
        r[1 + j] = 1.0;
        a_rows.push(r);
        b_vec.push(0.0);
    }
    a_rows.push(vec![0.0; n]);
    b_vec.push(sqrt_g);
    let norm_a = Mat::from_rows(&a_rows);

    let mut inner_children = Vec::new();
    let mut outer_children = Vec::new();
    for sign in [1.0, -1.0] {
        let mut w_row = vec![0.0; n];
        w_row[0] = sign;
        // convex piece: ||(x, sqrt g)|| <= sign * w, with sign * w >= 0
        let soc = SocConstraint { a: norm_a.clone(), b: b_vec.clone(), c: w_row.clone(), d: 0.0 };
        let mut leaf = SocLeaf::from_polytope(&c.p, if sign > 0.0 { "sheet-pos" } else { "sheet-neg" });
        let mut neg_w = vec![0.0; n];
        neg_w[0] = -sign;
        leaf.ineq_lhs.push(neg_w.clone());
        leaf.ineq_rhs.push(0.0);
        leaf.socs.push(soc.clone());
        if leaf_feasible(&leaf, neg_w.clone(), cfg)? {
            inner_children.push(HullRep::ConvexSocLeaf(leaf));
        }

        // reverse-convex piece on the same half: points with
        // ||(x, sqrt g)|| >= sign * w and sign * w >= 0
        let half = c.p.with_row(&neg_w, 0.0);
        let pts = reverse_convex_hull_via_edges(&half, &soc, cfg)?;
        if !pts.is_empty() {
            outer_children.push(HullRep::VPolyLeaf {
                dim: n,
                vertices: pts,
                label: if sign > 0.0 { "shell-pos".into() } else { "shell-neg".into() },
            });
        }
    }

    let inner = disjunct_union(inner_children);
    let outer = disjunct_union(outer_children);
    if inner.is_empty() || outer.is_empty() {
        return Ok(HullRep::Empty);
    }
    Ok(intersect(vec![inner, outer]))
}

/// Direction of a straight line through `point` lying entirely inside the
/// canonical surface of a ruled case; diagnostic companion of the
/// classification.
///
/// Returns `(u, v)` over the positive and negative square blocks with
/// `sum u^2 = sum v^2` and `a.u = b.v`, so `point + t (u, v)` stays on the
/// surface for every `t`.
pub fn ruled_line_witness(
    c: &CanonicalSet,
    point: &[f64],
    cfg: &Config,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (qp, qm, l, o) = c.counts();
    if !(qp >= 2 && qm >= 1 && l == 0 && o == 0) {
        return Err(Error::InvalidInput(format!(
            "ruled-line witness needs counts (>=2, >=1, 0, 0), got {:?}",
            c.counts()
        )));
    }
    let scale = 1.0 + norm_inf(point) + c.g;
    if c.residual(point).abs() > 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "point is off the surface by {:.3e}",
            c.residual(point).abs()
        )));
    }
    let _ = cfg;
    let a = &point[..qp];
    let b = &point[qp..qp + qm];

    let mut v = vec![0.0; qm];
    v[0] = 1.0;

    if norm2(a).max(norm2(b)) <= 1e-12 * scale {
        // apex of the cone (g = 0): the axis pair w_1 = x_1 rules through it
        let mut u = vec![0.0; qp];
        u[0] = 1.0;
        return Ok((u, v));
    }

    // u on the unit sphere with a.u = b_1; feasible because
    // sum a^2 = g + sum b^2 >= b_1^2
    let na2 = dot(a, a);
    debug_assert!(na2 > 0.0);
    let b1 = b[0];
    let mut u: Vec<f64> = a.iter().map(|ai| ai * b1 / na2).collect();
    let rem = (1.0 - b1 * b1 / na2).max(0.0);
    // orthogonal completion seeded from the smallest component of a
    let mut k = 0;
    for j in 1..qp {
        if a[j].abs() < a[k].abs() {
            k = j;
        }
    }
    let mut w: Vec<f64> = a.iter().map(|ai| -ai * a[k] / na2).collect();
    w[k] += 1.0;
    let wn = norm2(&w);
    debug_assert!(wn > 0.0);
    for (ui, wi) in u.iter_mut().zip(&w) {
        *ui += wi / wn * rem.sqrt();
    }
    Ok((u, v))
}

/// Per-node record of the recursion, suitable for a one-line trace.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub trace: Vec<String>,
    pub leaves: usize,
}

struct BuildState<'a> {
    cfg: &'a Config,
    leaves: usize,
    trace: Vec<String>,
    max_depth: usize,
}

impl BuildState<'_> {
    fn count_leaves(&mut self, n: usize) -> Result<()> {
        self.leaves += n;
        if self.leaves > self.cfg.max_leaves {
            return Err(Error::BudgetExceeded(format!(
                "leaf budget of {} exhausted",
                self.cfg.max_leaves
            )));
        }
        Ok(())
    }
}

/// Builds the exact convex hull representation of `inst`.
///
/// Errors with `Infeasible` when the surface misses the polytope entirely,
/// `UnboundedPolytope` for unbounded input, and `BudgetExceeded` when the
/// recursion outgrows the configured limits.
pub fn build_hull(inst: &QuadInstance, cfg: &Config) -> Result<(HullRep, BuildReport)> {
    if !polytope::is_bounded(&inst.p, cfg)? {
        return Err(Error::UnboundedPolytope);
    }
    let mut state = BuildState {
        cfg,
        leaves: 0,
        trace: Vec::new(),
        max_depth: cfg.max_depth.unwrap_or(inst.dim() + 1),
    };
    let hull = build_node(inst, 0, &mut state)?;
    let report = BuildReport { trace: state.trace, leaves: state.leaves };
    if hull.is_empty() {
        return Err(Error::Infeasible("the quadratic surface misses the polytope".into()));
    }
    Ok((hull, report))
}

fn build_node(inst: &QuadInstance, depth: usize, state: &mut BuildState) -> Result<HullRep> {
    if depth > state.max_depth {
        return Err(Error::BudgetExceeded(format!("recursion depth {} exceeded", state.max_depth)));
    }
    let cfg = state.cfg;
    let indent = "  ".repeat(depth);

    let (red, embed) = match reduction::drop_to_fulldim(inst, cfg) {
        Ok(v) => v,
        Err(Error::Infeasible(_)) => return Ok(HullRep::Empty),
        Err(e) => return Err(e),
    };
    if red.dim() < inst.dim() {
        state.trace.push(format!(
            "{indent}affine-hull: dim {} -> {}",
            inst.dim(),
            red.dim()
        ));
    }

    let scale = red.data_scale();
    let n = red.dim();

    if n == 0 {
        // a single point; the equation is a constant
        if red.g.abs() <= cfg.feas_tol * scale {
            state.count_leaves(1)?;
            state.trace.push(format!("{indent}dim 0 point"));
            return Ok(apply_map(
                &embed,
                HullRep::VPolyLeaf { dim: 0, vertices: vec![Vec::new()], label: "point".into() },
            ));
        }
        state.trace.push(format!("{indent}dim 0 empty"));
        return Ok(HullRep::Empty);
    }

    if n == 1 {
        let hull = univariate_hull(&red, cfg, state, &indent)?;
        return Ok(apply_map(&embed, hull));
    }

    let c = reduction::canonicalize(&red, cfg)?;
    let cls = classify(&c, cfg)?;
    let (qp, qm, l, o) = c.counts();
    state.trace.push(format!(
        "{indent}dim {n} ({qp},{qm},{l},{o}) {} [{}]",
        cls.tag, cls.rule
    ));

    let canonical_hull = match cls.tag {
        CaseTag::Empty => HullRep::Empty,
        CaseTag::BasePoint => unreachable!("zero-dimensional sets are handled before"),
        CaseTag::BaseLinear => {
            state.count_leaves(1)?;
            let mut leaf = SocLeaf::from_polytope(&c.p, "affine-slice");
            if l == 1 {
                let mut row = vec![0.0; n];
                row[qp + qm] = 1.0;
                leaf.eq_lhs.push(row);
                leaf.eq_rhs.push(c.g);
                if !leaf_feasible(&leaf, vec![0.0; n], cfg)? {
                    HullRep::Empty
                } else {
                    HullRep::ConvexSocLeaf(leaf)
                }
            } else {
                HullRep::ConvexSocLeaf(leaf)
            }
        }
        CaseTag::BaseOneSided => {
            let h = base_one_sided(&c, cfg)?;
            state.count_leaves(h.leaf_count())?;
            h
        }
        CaseTag::BaseSingleSquare => {
            let h = base_single_square(&c, cfg)?;
            state.count_leaves(h.leaf_count())?;
            h
        }
        CaseTag::RecurseFacets => {
            let canon_inst = canonical_instance(&c);
            let faceted = polytope::facets(&canon_inst.p, cfg)?;
            let canon_inst =
                QuadInstance::new(canon_inst.q, canon_inst.alpha, canon_inst.g, faceted)?;
            let mut children = Vec::new();
            let mut seen = BTreeSet::new();
            for i in 0..canon_inst.p.num_rows() {
                let (emb, p_rest) = facet_restrict(&canon_inst, i);
                let child_inst = QuadInstance::new(
                    canon_inst.q.clone(),
                    canon_inst.alpha.clone(),
                    canon_inst.g,
                    p_rest,
                );
                let child_inst = match child_inst {
                    Ok(ci) => ci,
                    Err(_) => continue,
                };
                let child = match reduction::substitute_instance(&child_inst, &emb, cfg) {
                    Ok(ci) => ci,
                    Err(Error::Infeasible(_)) => continue,
                    Err(e) => return Err(e),
                };
                if !seen.insert(child_signature(&emb, &child)) {
                    state.trace.push(format!("{indent}  facet {i}: duplicate child merged"));
                    continue;
                }
                let sub = build_node(&child, depth + 1, state)?;
                if sub.is_empty() && cfg.check_empty_children {
                    confirm_empty_child(&child, cfg)?;
                }
                children.push(apply_map(&emb, sub));
            }
            disjunct_union(children)
        }
    };

    let in_instance_coords = apply_map(&c.to_original, canonical_hull);
    Ok(apply_map(&embed, in_instance_coords))
}

/// One-dimensional base: the solutions of a scalar quadratic over an interval.
fn univariate_hull(
    inst: &QuadInstance,
    cfg: &Config,
    state: &mut BuildState,
    indent: &str,
) -> Result<HullRep> {
    let (lo, hi) = polytope::bounding_box(&inst.p, cfg)?;
    let (lo, hi) = (lo[0], hi[0]);
    let q = inst.q.get(0, 0);
    let a = inst.alpha[0];
    let g = inst.g;
    let scale = q.abs().max(a.abs()).max(g.abs()).max(1.0);
    let tol = cfg.feas_tol * scale;

    let mut roots: Vec<f64> = Vec::new();
    let mut whole_interval = false;
    if q.abs() > cfg.eig_tol * scale {
        // q u^2 + a u - g = 0
        let disc = a * a + 4.0 * q * g;
        if disc >= -tol * tol {
            let sq = disc.max(0.0).sqrt();
            if a == 0.0 {
                roots.push(sq / (2.0 * q));
                roots.push(-sq / (2.0 * q));
            } else {
                // stable pairing: r1 = q0/q, r1 * r2 = -g/q
                let q0 = -0.5 * (a + a.signum() * sq);
                roots.push(q0 / q);
                if q0 != 0.0 {
                    roots.push(-g / q0);
                }
            }
        }
    } else if a.abs() > cfg.eig_tol * scale {
        roots.push(g / a);
    } else if g.abs() <= tol {
        whole_interval = true;
    }

    let interval_tol = cfg.feas_tol * (1.0 + hi.abs().max(lo.abs()));
    if whole_interval {
        state.count_leaves(1)?;
        state.trace.push(format!("{indent}dim 1 interval"));
        let vertices = if (hi - lo).abs() <= interval_tol {
            vec![vec![lo]]
        } else {
            vec![vec![lo], vec![hi]]
        };
        return Ok(HullRep::VPolyLeaf { dim: 1, vertices, label: "interval".into() });
    }

    roots.retain(|r| r.is_finite());
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= interval_tol);
    let kept: Vec<Vec<f64>> = roots
        .into_iter()
        .filter(|&r| r >= lo - interval_tol && r <= hi + interval_tol)
        .map(|r| vec![r.clamp(lo, hi)])
        .collect();
    state.trace.push(format!("{indent}dim 1 roots: {}", kept.len()));
    if kept.is_empty() {
        return Ok(HullRep::Empty);
    }
    state.count_leaves(1)?;
    Ok(HullRep::VPolyLeaf { dim: 1, vertices: kept, label: "roots".into() })
}

/// Quantized fingerprint of a facet child for duplicate detection.
fn child_signature(map: &AffineMap, child: &QuadInstance) -> Vec<i64> {
    let quant = |v: f64| (v * 1e9).round() as i64;
    let mut sig = Vec::new();
    sig.push(map.n_in() as i64);
    for i in 0..map.l.rows() {
        for j in 0..map.l.cols() {
            sig.push(quant(map.l.get(i, j)));
        }
        sig.push(quant(map.t[i]));
    }
    for i in 0..child.q.rows() {
        for j in 0..child.q.cols() {
            sig.push(quant(child.q.get(i, j)));
        }
    }
    sig.extend(child.alpha.iter().map(|&v| quant(v)));
    sig.push(quant(child.g));
    let mut rows: Vec<Vec<i64>> = (0..child.p.num_rows())
        .map(|i| {
            let mut r: Vec<i64> = child.p.a.row(i).iter().map(|&v| quant(v)).collect();
            r.push(quant(child.p.b[i]));
            r
        })
        .collect();
    rows.sort();
    for r in rows {
        sig.extend(r);
    }
    sig
}

/// Both the structural recursion and the sampling oracle must agree that an
/// empty child really is empty; a disagreement aborts the run.
fn confirm_empty_child(child: &QuadInstance, cfg: &Config) -> Result<()> {
    let sample = crate::oracle::sample_surface(child, 25, 1, cfg)?;
    if !sample.points.is_empty() {
        return Err(Error::Internal(format!(
            "recursion found an empty child but the sampling oracle found {} surface points",
            sample.points.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::default()
    }

    fn canonical(qp: usize, qm: usize, l: usize, o: usize, g: f64) -> CanonicalSet {
        let n = qp + qm + l + o;
        let p = if n == 0 {
            HPolytope::new(Mat::zeros(0, 0), Vec::new())
        } else {
            HPolytope::bounding(&vec![-1.0; n], &vec![1.0; n])
        };
        CanonicalSet {
            n_qp: qp,
            n_qm: qm,
            n_l: l,
            n_o: o,
            g,
            p,
            to_original: AffineMap::identity(n),
            flipped: false,
            eq_scale: 1.0,
        }
    }

    #[test]
    fn classify_examples() {
        let cases = [
            ((2, 0, 1, 0, 1.0), CaseTag::BaseOneSided),
            ((1, 1, 1, 0, 1.0), CaseTag::RecurseFacets),
            ((2, 1, 0, 0, 1.0), CaseTag::RecurseFacets),
            ((1, 1, 0, 0, 1.0), CaseTag::BaseSingleSquare),
            ((0, 2, 0, 0, 0.0), CaseTag::BaseOneSided),
            ((0, 0, 1, 2, 0.5), CaseTag::BaseLinear),
            ((0, 0, 0, 2, 0.0), CaseTag::BaseLinear),
            ((0, 0, 0, 2, 1.0), CaseTag::Empty),
            ((0, 0, 0, 0, 0.0), CaseTag::BasePoint),
            ((1, 0, 0, 3, 1.0), CaseTag::RecurseFacets),
            ((0, 0, 3, 0, 1.0), CaseTag::RecurseFacets),
        ];
        for ((qp, qm, l, o, g), want) in cases {
            let c = canonical(qp, qm, l, o, g);
            let got = classify(&c, &cfg()).unwrap();
            assert_eq!(got.tag, want, "counts ({qp},{qm},{l},{o}) g={g}");
        }
    }

    #[test]
    fn classify_empty_polytope() {
        let mut c = canonical(1, 1, 0, 0, 1.0);
        c.p = c.p.with_row(&[1.0, 0.0], -5.0); // w <= -5 conflicts with w >= -1
        let got = classify(&c, &cfg()).unwrap();
        assert_eq!(got.tag, CaseTag::Empty);
    }

    #[test]
    fn classification_is_total_and_unique() {
        for qp in 0..=5usize {
            for qm in 0..=5 - qp {
                for l in 0..=5 - qp - qm {
                    for o in 0..=5 - qp - qm - l {
                        for g in [0.0, 1.0] {
                            let c = canonical(qp, qm, l, o, g);
                            let got = classify(&c, &cfg()).unwrap();
                            // one tag, and recursing cases really are the
                            // non-base ones
                            if got.tag == CaseTag::RecurseFacets {
                                assert!(qp + qm + l + o >= 1);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn facet_restrict_pivots_on_largest() {
        // facet row (0, 2): pivot must be coordinate 1
        let p = HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]).with_row(&[0.0, 2.0], 1.0);
        let inst = QuadInstance::new(Mat::identity(2), vec![0.0, 0.0], 1.0, p).unwrap();
        let (emb, _) = facet_restrict(&inst, 4);
        // x2 = 0.5, x1 free
        let x = emb.apply(&[0.3]);
        assert!((x[0] - 0.3).abs() <= 1e-12);
        assert!((x[1] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn facet_restrict_substitutes_quadratic() {
        // unit square facet x1 = 1 with x1^2 + x2^2 = 2 becomes x2^2 = 1
        let p = HPolytope::bounding(&[-2.0, -2.0], &[1.0, 2.0]);
        let inst = QuadInstance::new(Mat::identity(2), vec![0.0, 0.0], 2.0, p).unwrap();
        // row 0 of the bounding construction is x1 <= 1
        let (emb, rest) = facet_restrict(&inst, 0);
        let child_inst =
            QuadInstance::new(inst.q.clone(), inst.alpha.clone(), inst.g, rest).unwrap();
        let child = reduction::substitute_instance(&child_inst, &emb, &cfg()).unwrap();
        assert_eq!(child.dim(), 1);
        assert!((child.q.get(0, 0) - 1.0).abs() <= 1e-12);
        assert!((child.g - 1.0).abs() <= 1e-12);
        // quadratic values match on the facet
        for t in [-1.5, 0.0, 0.7] {
            let x = emb.apply(&[t]);
            assert!((inst.eval_quad(&x) - inst.g - (child.eval_quad(&[t]) - child.g)).abs() <= 1e-10);
        }
    }

    #[test]
    fn reverse_convex_interval() {
        // P = [0, 2], keep |x| >= 1: candidates {1, 2}
        let p = HPolytope::bounding(&[0.0], &[2.0]);
        let soc = SocConstraint {
            a: Mat::from_rows(&[vec![1.0]]),
            b: vec![0.0],
            c: vec![0.0],
            d: 1.0,
        };
        let pts = reverse_convex_hull_via_edges(&p, &soc, &cfg()).unwrap();
        let mut flat: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        flat.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(flat.len(), 2);
        assert!((flat[0] - 1.0).abs() <= 1e-9);
        assert!((flat[1] - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn reverse_convex_square_with_disk() {
        // unit square, keep ||x|| >= 1.2: corners dominate the crossings
        let p = HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]);
        let soc = SocConstraint {
            a: Mat::identity(2),
            b: vec![0.0, 0.0],
            c: vec![0.0, 0.0],
            d: 1.2,
        };
        let pts = reverse_convex_hull_via_edges(&p, &soc, &cfg()).unwrap();
        assert_eq!(pts.len(), 4, "only the 4 corners are extreme, got {pts:?}");
    }

    #[test]
    fn reverse_convex_nowhere_violated() {
        let p = HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]);
        let soc = SocConstraint {
            a: Mat::identity(2),
            b: vec![0.0, 0.0],
            c: vec![0.0, 0.0],
            d: 5.0,
        };
        let pts = reverse_convex_hull_via_edges(&p, &soc, &cfg()).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn one_sided_1d_segment() {
        // w^2 = 4 on [-5, 5]: S = {-2, 2}, hull = [-2, 2]
        let c = CanonicalSet {
            n_qp: 1,
            n_qm: 0,
            n_l: 0,
            n_o: 0,
            g: 4.0,
            p: HPolytope::bounding(&[-5.0], &[5.0]),
            to_original: AffineMap::identity(1),
            flipped: false,
            eq_scale: 1.0,
        };
        let h = base_one_sided(&c, &cfg()).unwrap();
        match &h {
            HullRep::Intersection { children, .. } => {
                assert_eq!(children.len(), 2);
                match &children[1] {
                    HullRep::VPolyLeaf { vertices, .. } => {
                        // the outer hull's extreme points are the interval ends
                        let mut xs: Vec<f64> = vertices.iter().map(|v| v[0]).collect();
                        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        assert_eq!(xs.len(), 2);
                        assert!((xs[0] + 5.0).abs() <= 1e-8 && (xs[1] - 5.0).abs() <= 1e-8);
                    }
                    other => panic!("expected vertex leaf, got {other:?}"),
                }
            }
            other => panic!("expected intersection, got {other:?}"),
        }
    }

    #[test]
    fn one_sided_infeasible_when_g_too_large() {
        // w^2 = g with g beyond the reachable range on P
        let c = CanonicalSet {
            n_qp: 1,
            n_qm: 0,
            n_l: 0,
            n_o: 0,
            g: 100.0,
            p: HPolytope::bounding(&[-2.0], &[2.0]),
            to_original: AffineMap::identity(1),
            flipped: false,
            eq_scale: 1.0,
        };
        // S' = {w^2 <= 100} is all of P, so S'' decides: the shell has no
        // violating points
        let h = base_one_sided(&c, &cfg()).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn single_square_origin_cases() {
        let mut c = canonical(0, 2, 0, 0, 0.0);
        let h = base_single_square(&c, &cfg()).unwrap();
        match h {
            HullRep::VPolyLeaf { vertices, .. } => assert_eq!(vertices, vec![vec![0.0, 0.0]]),
            other => panic!("expected the origin, got {other:?}"),
        }
        c.g = 1.0;
        let h = base_single_square(&c, &cfg()).unwrap();
        assert!(h.is_empty());
    }

    #[test]
    fn ruled_witness_hyperboloid_axis() {
        // w1^2 + w2^2 - x^2 = 1 at (1, 0, 0): direction ((0, 1), (1))
        let c = CanonicalSet {
            n_qp: 2,
            n_qm: 1,
            n_l: 0,
            n_o: 0,
            g: 1.0,
            p: HPolytope::bounding(&[-2.0; 3], &[2.0; 3]),
            to_original: AffineMap::identity(3),
            flipped: false,
            eq_scale: 1.0,
        };
        let (u, v) = ruled_line_witness(&c, &[1.0, 0.0, 0.0], &cfg()).unwrap();
        assert!((u[0]).abs() <= 1e-12 && (u[1].abs() - 1.0).abs() <= 1e-12);
        assert_eq!(v, vec![1.0]);
        for t in [-10.0, -1.0, 1.0, 10.0] {
            let p = [1.0 + t * u[0], t * u[1], t * v[0]];
            assert!(c.residual(&p).abs() <= 1e-8);
        }
    }

    #[test]
    fn ruled_witness_origin_axis_pair() {
        let c = CanonicalSet {
            n_qp: 2,
            n_qm: 1,
            n_l: 0,
            n_o: 0,
            g: 0.0,
            p: HPolytope::bounding(&[-2.0; 3], &[2.0; 3]),
            to_original: AffineMap::identity(3),
            flipped: false,
            eq_scale: 1.0,
        };
        let (u, v) = ruled_line_witness(&c, &[0.0, 0.0, 0.0], &cfg()).unwrap();
        assert_eq!(u, vec![1.0, 0.0]);
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn ruled_witness_random_points() {
        let c = CanonicalSet {
            n_qp: 2,
            n_qm: 1,
            n_l: 0,
            n_o: 0,
            g: 1.0,
            p: HPolytope::bounding(&[-3.0; 3], &[3.0; 3]),
            to_original: AffineMap::identity(3),
            flipped: false,
            eq_scale: 1.0,
        };
        let mut state = 77u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            // sample a surface point: pick w2, x, solve for w1
            let w2 = next() * 1.5;
            let x = next() * 1.5;
            let w1sq = 1.0 + x * x - w2 * w2;
            if w1sq <= 0.0 {
                continue;
            }
            let p = [w1sq.sqrt(), w2, x];
            let (u, v) = ruled_line_witness(&c, &p, &cfg()).unwrap();
            for t in [-10.0, -1.0, 1.0, 10.0] {
                let q = [p[0] + t * u[0], p[1] + t * u[1], p[2] + t * v[0]];
                assert!(
                    c.residual(&q).abs() <= 1e-8,
                    "line leaves the surface at t={t}: {:.3e}",
                    c.residual(&q)
                );
            }
        }
    }

    #[test]
    fn ruled_witness_rejects_off_surface() {
        let c = CanonicalSet {
            n_qp: 2,
            n_qm: 1,
            n_l: 0,
            n_o: 0,
            g: 1.0,
            p: HPolytope::bounding(&[-2.0; 3], &[2.0; 3]),
            to_original: AffineMap::identity(3),
            flipped: false,
            eq_scale: 1.0,
        };
        assert!(matches!(
            ruled_line_witness(&c, &[1.5, 0.0, 0.0], &cfg()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn build_circle_is_one_sided() {
        let p = HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]);
        let inst = QuadInstance::new(Mat::identity(2), vec![0.0, 0.0], 1.0, p).unwrap();
        let (hull, report) = build_hull(&inst, &cfg()).unwrap();
        assert!(!hull.is_empty());
        assert!(
            report.trace.iter().any(|l| l.contains("dim 2 (2,0,0,0) BaseOneSided")),
            "trace: {:?}",
            report.trace
        );
    }

    #[test]
    fn build_hyperboloid_recurses_on_six_facets() {
        let p = HPolytope::bounding(&[-2.0; 3], &[2.0; 3]);
        let inst =
            QuadInstance::new(Mat::diag(&[1.0, 1.0, -1.0]), vec![0.0; 3], 1.0, p).unwrap();
        let (hull, report) = build_hull(&inst, &cfg()).unwrap();
        assert!(report.trace.iter().any(|l| l.contains("RecurseFacets")));
        match hull {
            HullRep::Disjunction { ref children, .. } => assert_eq!(children.len(), 6),
            ref other => panic!("expected a disjunction at the root, got {other:?}"),
        }
    }

    #[test]
    fn build_reports_infeasible_roots() {
        // x^2 = -1 has no solutions
        let p = HPolytope::bounding(&[-1.0], &[1.0]);
        let inst = QuadInstance::new(Mat::identity(1), vec![0.0], -1.0, p).unwrap();
        match build_hull(&inst, &cfg()) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn build_univariate_roots() {
        // x^2 - 2x = 3 on [-5, 5]: roots -1 and 3
        let p = HPolytope::bounding(&[-5.0], &[5.0]);
        let inst = QuadInstance::new(Mat::identity(1), vec![-2.0], 3.0, p).unwrap();
        let (hull, _) = build_hull(&inst, &cfg()).unwrap();
        match hull {
            HullRep::VPolyLeaf { vertices, .. } => {
                let mut xs: Vec<f64> = vertices.iter().map(|v| v[0]).collect();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                assert!((xs[0] + 1.0).abs() <= 1e-9 && (xs[1] - 3.0).abs() <= 1e-9);
            }
            other => panic!("expected roots leaf, got {other:?}"),
        }
    }

    #[test]
    fn build_respects_leaf_budget() {
        let mut tight = cfg();
        tight.max_leaves = 2;
        let p = HPolytope::bounding(&[-2.0; 3], &[2.0; 3]);
        let inst =
            QuadInstance::new(Mat::diag(&[1.0, 1.0, -1.0]), vec![0.0; 3], 1.0, p).unwrap();
        match build_hull(&inst, &tight) {
            Err(Error::BudgetExceeded(_)) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
