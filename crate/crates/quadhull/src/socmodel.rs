//! Flattened extended formulation of a hull representation: one variable
//! space, linear rows and second-order-cone blocks, with the original
//! variables marked. Supports linear optimization, membership testing,
//! statistics and text export.

use serde::{Deserialize, Serialize};

use crate::conicsolve::{self, ConeProblem, SocConstraint, SolveStatus};
use crate::config::Config;
use crate::densela::{dot, Mat};
use crate::error::{Error, Result};
use crate::hullcore::{HullRep, SocLeaf};

/// Sparse linear row `sum coeffs . v (= | <=) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub note: String,
}

/// One cone block `|| rows . v + consts || <= rhs_coeffs . v + rhs_const`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocBlock {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub consts: Vec<f64>,
    pub rhs_coeffs: Vec<(usize, f64)>,
    pub rhs_const: f64,
    pub note: String,
}

/// The flattened program. The represented set is the projection onto the
/// original variables; it is bounded because every leaf carries its polytope
/// rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocProgram {
    pub num_vars: usize,
    pub var_names: Vec<String>,
    pub original_vars: Vec<usize>,
    pub eqs: Vec<LinRow>,
    pub ineqs: Vec<LinRow>,
    pub socs: Vec<SocBlock>,
    pub tree_depth: usize,
    pub leaf_count: usize,
}

impl SocProgram {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &i in &self.original_vars {
            if i >= self.num_vars {
                return Err(Error::InvalidInput(
                    "original-variable index out of range".into(),
                ));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidInput(
                    "original-variable indices are not distinct".into(),
                ));
            }
        }
        if self.var_names.len() != self.num_vars {
            return Err(Error::InvalidInput("variable name table size mismatch".into()));
        }
        let in_range = |r: &LinRow| r.coeffs.iter().all(|&(j, _)| j < self.num_vars);
        if !self.eqs.iter().all(in_range) || !self.ineqs.iter().all(in_range) {
            return Err(Error::InvalidInput("row references an unknown variable".into()));
        }
        for s in &self.socs {
            if s.rows.is_empty() {
                return Err(Error::InvalidInput("SOC block of dimension zero".into()));
            }
            if s.rows.len() != s.consts.len() {
                return Err(Error::InvalidInput("SOC block shape mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Scaling applied to a node's constraints: fixed at one, or a variable of
/// the perspective construction.
#[derive(Clone, Copy)]
enum Scale {
    One,
    Var(usize),
}

struct Flattener {
    prog: SocProgram,
}

impl Flattener {
    fn var(&mut self, name: String) -> usize {
        let id = self.prog.num_vars;
        self.prog.num_vars += 1;
        self.prog.var_names.push(name);
        id
    }

    /// expr - rhs * lambda as (coeffs, constant-rhs)
    fn homogenized(
        &self,
        coeffs: Vec<(usize, f64)>,
        rhs: f64,
        lam: Scale,
    ) -> (Vec<(usize, f64)>, f64) {
        match lam {
            Scale::One => (coeffs, rhs),
            Scale::Var(l) => {
                let mut c = coeffs;
                if rhs != 0.0 {
                    c.push((l, -rhs));
                }
                (c, 0.0)
            }
        }
    }

    fn emit(&mut self, node: &HullRep, out: &[usize], lam: Scale, path: &str) {
        match node {
            HullRep::Empty => unreachable!("empty nodes are dropped before flattening"),
            HullRep::ConvexSocLeaf(leaf) => self.emit_leaf(leaf, out, lam, path),
            HullRep::VPolyLeaf { vertices, .. } => {
                let k = vertices.len();
                let mus: Vec<usize> =
                    (0..k).map(|i| self.var(format!("{path}/mu{i}"))).collect();
                for &m in &mus {
                    self.prog.ineqs.push(LinRow {
                        coeffs: vec![(m, -1.0)],
                        rhs: 0.0,
                        note: format!("{path} vertex-weight"),
                    });
                }
                let (coeffs, rhs) =
                    self.homogenized(mus.iter().map(|&m| (m, 1.0)).collect(), 1.0, lam);
                self.prog.eqs.push(LinRow { coeffs, rhs, note: format!("{path} vertex-sum") });
                for d in 0..out.len() {
                    let mut coeffs: Vec<(usize, f64)> = vec![(out[d], 1.0)];
                    for (i, v) in vertices.iter().enumerate() {
                        if v[d] != 0.0 {
                            coeffs.push((mus[i], -v[d]));
                        }
                    }
                    self.prog.eqs.push(LinRow {
                        coeffs,
                        rhs: 0.0,
                        note: format!("{path} vertex-combination"),
                    });
                }
            }
            HullRep::Disjunction { children, dim } => {
                let k = children.len();
                let lams: Vec<usize> =
                    (0..k).map(|i| self.var(format!("{path}/lam{i}"))).collect();
                for &l in &lams {
                    self.prog.ineqs.push(LinRow {
                        coeffs: vec![(l, -1.0)],
                        rhs: 0.0,
                        note: format!("{path} disjunct-weight"),
                    });
                }
                let (coeffs, rhs) =
                    self.homogenized(lams.iter().map(|&l| (l, 1.0)).collect(), 1.0, lam);
                self.prog.eqs.push(LinRow { coeffs, rhs, note: format!("{path} disjunct-sum") });
                let mut parts: Vec<Vec<usize>> = Vec::with_capacity(k);
                for i in 0..k {
                    let zi: Vec<usize> =
                        (0..*dim).map(|d| self.var(format!("{path}.{i}/z{d}"))).collect();
                    parts.push(zi);
                }
                for d in 0..*dim {
                    let mut coeffs: Vec<(usize, f64)> = vec![(out[d], 1.0)];
                    for part in &parts {
                        coeffs.push((part[d], -1.0));
                    }
                    self.prog.eqs.push(LinRow {
                        coeffs,
                        rhs: 0.0,
                        note: format!("{path} disjunct-split"),
                    });
                }
                for (i, child) in children.iter().enumerate() {
                    self.emit(child, &parts[i], Scale::Var(lams[i]), &format!("{path}.{i}"));
                }
            }
            HullRep::Intersection { children, .. } => {
                for (i, child) in children.iter().enumerate() {
                    self.emit(child, out, lam, &format!("{path}.{i}"));
                }
            }
            HullRep::AffineImage { map, child } => {
                let zc: Vec<usize> =
                    (0..map.n_in()).map(|d| self.var(format!("{path}/z{d}"))).collect();
                for d in 0..map.n_out() {
                    let mut coeffs: Vec<(usize, f64)> = vec![(out[d], 1.0)];
                    for (j, &z) in zc.iter().enumerate() {
                        let v = map.l.get(d, j);
                        if v != 0.0 {
                            coeffs.push((z, -v));
                        }
                    }
                    let (coeffs, rhs) = self.homogenized(coeffs, map.t[d], lam);
                    self.prog.eqs.push(LinRow {
                        coeffs,
                        rhs,
                        note: format!("{path} affine-link"),
                    });
                }
                self.emit(child, &zc, lam, &format!("{path}.0"));
            }
        }
    }

    fn emit_leaf(&mut self, leaf: &SocLeaf, out: &[usize], lam: Scale, path: &str) {
        let map_coeffs = |row: &[f64]| -> Vec<(usize, f64)> {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (out[j], *v))
                .collect()
        };
        for (row, &rhs) in leaf.eq_lhs.iter().zip(&leaf.eq_rhs) {
            let (coeffs, rhs) = self.homogenized(map_coeffs(row), rhs, lam);
            self.prog.eqs.push(LinRow { coeffs, rhs, note: format!("{path} {}", leaf.label) });
        }
        for (row, &rhs) in leaf.ineq_lhs.iter().zip(&leaf.ineq_rhs) {
            let (coeffs, rhs) = self.homogenized(map_coeffs(row), rhs, lam);
            self.prog.ineqs.push(LinRow { coeffs, rhs, note: format!("{path} {}", leaf.label) });
        }
        for soc in &leaf.socs {
            let mut rows = Vec::with_capacity(soc.a.rows());
            let mut consts = Vec::with_capacity(soc.a.rows());
            for i in 0..soc.a.rows() {
                let coeffs = map_coeffs(soc.a.row(i));
                match lam {
                    Scale::One => {
                        rows.push(coeffs);
                        consts.push(soc.b[i]);
                    }
                    Scale::Var(l) => {
                        let mut c = coeffs;
                        if soc.b[i] != 0.0 {
                            c.push((l, soc.b[i]));
                        }
                        rows.push(c);
                        consts.push(0.0);
                    }
                }
            }
            let (rhs_coeffs, rhs_const) = match lam {
                Scale::One => (map_coeffs(&soc.c), soc.d),
                Scale::Var(l) => {
                    let mut c = map_coeffs(&soc.c);
                    if soc.d != 0.0 {
                        c.push((l, soc.d));
                    }
                    (c, 0.0)
                }
            };
            self.prog.socs.push(SocBlock {
                rows,
                consts,
                rhs_coeffs,
                rhs_const,
                note: format!("{path} {}", leaf.label),
            });
        }
    }
}

/// Flattens a hull representation into one conic program whose first block of
/// variables are the original coordinates.
pub fn flatten(hull: &HullRep) -> Result<SocProgram> {
    if hull.is_empty() {
        return Err(Error::Infeasible("cannot flatten an empty hull".into()));
    }
    let n = hull.dim();
    let mut f = Flattener {
        prog: SocProgram {
            num_vars: 0,
            var_names: Vec::new(),
            original_vars: Vec::new(),
            eqs: Vec::new(),
            ineqs: Vec::new(),
            socs: Vec::new(),
            tree_depth: hull.depth(),
            leaf_count: hull.leaf_count(),
        },
    };
    let out: Vec<usize> = (0..n).map(|i| f.var(format!("x{i}"))).collect();
    f.prog.original_vars = out.clone();
    f.emit(hull, &out, Scale::One, "r");
    f.prog.validate()?;
    Ok(f.prog)
}

/// Assembles the program plus an objective into solver form.
fn to_cone_problem(p: &SocProgram, objective: Vec<f64>) -> ConeProblem {
    let n = p.num_vars;
    let mut prob = ConeProblem::new(n, objective);
    if !p.eqs.is_empty() {
        let mut rows = Vec::with_capacity(p.eqs.len());
        let mut rhs = Vec::with_capacity(p.eqs.len());
        for r in &p.eqs {
            let mut row = vec![0.0; n];
            for &(j, v) in &r.coeffs {
                row[j] += v;
            }
            rows.push(row);
            rhs.push(r.rhs);
        }
        prob.eq_lhs = Mat::from_rows(&rows);
        prob.eq_rhs = rhs;
    }
    if !p.ineqs.is_empty() {
        let mut rows = Vec::with_capacity(p.ineqs.len());
        let mut rhs = Vec::with_capacity(p.ineqs.len());
        for r in &p.ineqs {
            let mut row = vec![0.0; n];
            for &(j, v) in &r.coeffs {
                row[j] += v;
            }
            rows.push(row);
            rhs.push(r.rhs);
        }
        prob.ineq_lhs = Mat::from_rows(&rows);
        prob.ineq_rhs = rhs;
    }
    for s in &p.socs {
        let mut a = Mat::zeros(s.rows.len(), n);
        for (i, row) in s.rows.iter().enumerate() {
            for &(j, v) in row {
                a.set(i, j, a.get(i, j) + v);
            }
        }
        let mut c = vec![0.0; n];
        for &(j, v) in &s.rhs_coeffs {
            c[j] += v;
        }
        prob.socs.push(SocConstraint { a, b: s.consts.clone(), c, d: s.rhs_const });
    }
    prob
}

/// Near-degenerate programs can stall a hair above the target accuracy at
/// the limits of double precision; a best iterate within this factor of the
/// tolerance is still accepted by [`optimize`] and [`membership`].
const LENIENCY: f64 = 20.0;

fn accept_lenient(sol: &conicsolve::ConeSolution, cfg: &Config) -> bool {
    let bar = LENIENCY * cfg.solver_tol;
    sol.status == SolveStatus::NumericFailure
        && sol.primal_residual <= bar
        && sol.dual_residual <= bar
        && sol.gap_residual <= bar
}

/// Maximizes `c . x` over the represented set; returns the value and the
/// original-variable projection of an optimizer.
pub fn optimize(p: &SocProgram, c: &[f64], cfg: &Config) -> Result<(f64, Vec<f64>)> {
    if c.len() != p.original_vars.len() {
        return Err(Error::InvalidInput(format!(
            "objective has {} entries for {} original variables",
            c.len(),
            p.original_vars.len()
        )));
    }
    let mut objective = vec![0.0; p.num_vars];
    for (k, &j) in p.original_vars.iter().enumerate() {
        objective[j] = -c[k];
    }
    let sol = conicsolve::solve(&to_cone_problem(p, objective), cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => {
            let point: Vec<f64> = p.original_vars.iter().map(|&j| sol.x[j]).collect();
            Ok((dot(c, &point), point))
        }
        SolveStatus::Infeasible => {
            Err(Error::Infeasible("flattened program is infeasible".into()))
        }
        SolveStatus::Unbounded => Err(Error::Internal(
            "flattened program is unbounded; a leaf lost its polytope rows".into(),
        )),
        SolveStatus::NumericFailure if accept_lenient(&sol, cfg) => {
            let point: Vec<f64> = p.original_vars.iter().map(|&j| sol.x[j]).collect();
            Ok((dot(c, &point), point))
        }
        SolveStatus::NumericFailure => {
            Err(Error::SolverFailure("optimization over the hull did not converge".into()))
        }
    }
}

/// Fast path for linear objectives: the support of a disjunction is the
/// maximum over its children, and affine images transform the direction;
/// intersections are solved as flattened units.
pub fn optimize_per_leaf(hull: &HullRep, c: &[f64], cfg: &Config) -> Result<(f64, Vec<f64>)> {
    match support(hull, c, cfg)? {
        Some(vp) => Ok(vp),
        None => Err(Error::Infeasible("hull is empty".into())),
    }
}

fn support(node: &HullRep, c: &[f64], cfg: &Config) -> Result<Option<(f64, Vec<f64>)>> {
    match node {
        HullRep::Empty => Ok(None),
        HullRep::VPolyLeaf { vertices, .. } => {
            let best = vertices
                .iter()
                .map(|v| (dot(c, v), v.clone()))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Ok(best)
        }
        HullRep::Disjunction { children, .. } => {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for child in children {
                if let Some((v, p)) = support(child, c, cfg)? {
                    if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                        best = Some((v, p));
                    }
                }
            }
            Ok(best)
        }
        HullRep::AffineImage { map, child } => {
            let c_in = map.l.tr_matvec(c);
            match support(child, &c_in, cfg)? {
                Some((v, p)) => Ok(Some((v + dot(c, &map.t), map.apply(&p)))),
                None => Ok(None),
            }
        }
        HullRep::ConvexSocLeaf(_) | HullRep::Intersection { .. } => {
            let prog = flatten(node)?;
            match optimize(&prog, c, cfg) {
                Ok((v, p)) => Ok(Some((v, p))),
                Err(Error::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}

/// Phase-1 membership: fixes the original variables at `x` and minimizes the
/// worst violation of the remaining constraints.
pub fn membership(p: &SocProgram, x: &[f64], tol: f64, cfg: &Config) -> Result<(bool, f64)> {
    if x.len() != p.original_vars.len() {
        return Err(Error::InvalidInput("membership query has wrong dimension".into()));
    }
    let n = p.num_vars;
    let t = n; // one extra slack variable
    let mut objective = vec![0.0; n + 1];
    objective[t] = 1.0;
    let mut prob = ConeProblem::new(n + 1, objective);

    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    for (k, &j) in p.original_vars.iter().enumerate() {
        let mut row = vec![0.0; n + 1];
        row[j] = 1.0;
        eq_rows.push(row);
        eq_rhs.push(x[k]);
    }
    let mut ineq_rows = Vec::new();
    let mut ineq_rhs = Vec::new();
    for r in &p.eqs {
        let mut up = vec![0.0; n + 1];
        for &(j, v) in &r.coeffs {
            up[j] += v;
        }
        let mut dn: Vec<f64> = up.iter().map(|v| -v).collect();
        up[t] = -1.0;
        dn[t] = -1.0;
        ineq_rows.push(up);
        ineq_rhs.push(r.rhs);
        ineq_rows.push(dn);
        ineq_rhs.push(-r.rhs);
    }
    for r in &p.ineqs {
        let mut row = vec![0.0; n + 1];
        for &(j, v) in &r.coeffs {
            row[j] += v;
        }
        row[t] = -1.0;
        ineq_rows.push(row);
        ineq_rhs.push(r.rhs);
    }
    {
        let mut row = vec![0.0; n + 1];
        row[t] = -1.0;
        ineq_rows.push(row);
        ineq_rhs.push(0.0);
    }
    prob.eq_lhs = Mat::from_rows(&eq_rows);
    prob.eq_rhs = eq_rhs;
    prob.ineq_lhs = Mat::from_rows(&ineq_rows);
    prob.ineq_rhs = ineq_rhs;
    for s in &p.socs {
        let mut a = Mat::zeros(s.rows.len(), n + 1);
        for (i, row) in s.rows.iter().enumerate() {
            for &(j, v) in row {
                a.set(i, j, a.get(i, j) + v);
            }
        }
        let mut c = vec![0.0; n + 1];
        for &(j, v) in &s.rhs_coeffs {
            c[j] += v;
        }
        c[t] = 1.0;
        prob.socs.push(SocConstraint { a, b: s.consts.clone(), c, d: s.rhs_const });
    }

    let sol = conicsolve::solve(&prob, cfg.solver_tol)?;
    match sol.status {
        SolveStatus::Optimal => {
            let violation = sol.objective.max(0.0);
            Ok((violation <= tol, violation))
        }
        SolveStatus::NumericFailure if accept_lenient(&sol, cfg) => {
            let violation = sol.objective.max(0.0);
            Ok((violation <= tol, violation))
        }
        SolveStatus::Infeasible => Err(Error::Internal(
            "membership phase-1 problem cannot be infeasible".into(),
        )),
        SolveStatus::Unbounded => {
            Err(Error::Internal("membership phase-1 problem cannot be unbounded".into()))
        }
        SolveStatus::NumericFailure => {
            Err(Error::SolverFailure("membership solve did not converge".into()))
        }
    }
}

/// Headline numbers of a flattened program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub num_vars: usize,
    pub num_original: usize,
    pub eq_rows: usize,
    pub ineq_rows: usize,
    pub soc_blocks: usize,
    pub soc_total_dim: usize,
    pub tree_depth: usize,
    pub leaf_count: usize,
}

pub fn stats(p: &SocProgram) -> Stats {
    Stats {
        num_vars: p.num_vars,
        num_original: p.original_vars.len(),
        eq_rows: p.eqs.len(),
        ineq_rows: p.ineqs.len(),
        soc_blocks: p.socs.len(),
        soc_total_dim: p.socs.iter().map(|s| s.rows.len() + 1).sum(),
        tree_depth: p.tree_depth,
        leaf_count: p.leaf_count,
    }
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "variables:        {}", self.num_vars)?;
        writeln!(f, "original vars:    {}", self.num_original)?;
        writeln!(f, "equality rows:    {}", self.eq_rows)?;
        writeln!(f, "inequality rows:  {}", self.ineq_rows)?;
        writeln!(f, "soc blocks:       {} (total dim {})", self.soc_blocks, self.soc_total_dim)?;
        writeln!(f, "tree depth:       {}", self.tree_depth)?;
        write!(f, "leaf count:       {}", self.leaf_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    ConicBenchmark,
    HumanReadable,
}

/// Deterministic text export; the conic-benchmark layout introduces one slack
/// vector per SOC block, constrained to the quadratic cone.
pub fn export_text(p: &SocProgram, format: ExportFormat) -> String {
    match format {
        ExportFormat::HumanReadable => export_human(p),
        ExportFormat::ConicBenchmark => export_cbf(p),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{:.17e}", v)
}

fn export_human(p: &SocProgram) -> String {
    let mut out = String::new();
    out.push_str("# flattened hull formulation\n");
    out.push_str(&format!("# vars: {}  originals: {:?}\n", p.num_vars, p.original_vars));
    out.push_str(&format!(
        "# tree depth {} / leaves {}\n",
        p.tree_depth, p.leaf_count
    ));
    let name = |j: usize| p.var_names[j].clone();
    let render = |coeffs: &[(usize, f64)]| {
        let mut s = String::new();
        for (k, &(j, v)) in coeffs.iter().enumerate() {
            if k > 0 {
                s.push_str(" + ");
            }
            s.push_str(&format!("{}*{}", fmt_num(v), name(j)));
        }
        if coeffs.is_empty() {
            s.push('0');
        }
        s
    };
    for r in &p.eqs {
        out.push_str(&format!("eq   [{}] {} = {}\n", r.note, render(&r.coeffs), fmt_num(r.rhs)));
    }
    for r in &p.ineqs {
        out.push_str(&format!(
            "ineq [{}] {} <= {}\n",
            r.note,
            render(&r.coeffs),
            fmt_num(r.rhs)
        ));
    }
    for s in &p.socs {
        out.push_str(&format!("soc  [{}] ||(", s.note));
        for (i, row) in s.rows.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            out.push_str(&render(row));
            if s.consts[i] != 0.0 {
                out.push_str(&format!(" + {}", fmt_num(s.consts[i])));
            }
        }
        out.push_str(&format!(
            ")|| <= {} + {}\n",
            render(&s.rhs_coeffs),
            fmt_num(s.rhs_const)
        ));
    }
    out
}

fn export_cbf(p: &SocProgram) -> String {
    let mut out = String::new();
    out.push_str("VER\n3\n\n");
    out.push_str("OBJSENSE\nMIN\n\n");

    // variables: the program's own variables are free, then one quadratic
    // cone group of slacks per SOC block
    let soc_vars: usize = p.socs.iter().map(|s| s.rows.len() + 1).sum();
    let total = p.num_vars + soc_vars;
    out.push_str("VAR\n");
    out.push_str(&format!("{} {}\n", total, 1 + p.socs.len()));
    out.push_str(&format!("F {}\n", p.num_vars));
    for s in &p.socs {
        out.push_str(&format!("Q {}\n", s.rows.len() + 1));
    }
    out.push('\n');

    // constraint rows: equalities, inequalities (as <= 0 after moving the
    // rhs), then the slack-definition equalities per SOC block
    let link_rows: usize = p.socs.iter().map(|s| s.rows.len() + 1).sum();
    out.push_str("CON\n");
    let groups = (!p.eqs.is_empty()) as usize
        + (!p.ineqs.is_empty()) as usize
        + (link_rows > 0) as usize;
    out.push_str(&format!("{} {}\n", p.eqs.len() + p.ineqs.len() + link_rows, groups));
    if !p.eqs.is_empty() {
        out.push_str(&format!("L= {}\n", p.eqs.len()));
    }
    if !p.ineqs.is_empty() {
        out.push_str(&format!("L- {}\n", p.ineqs.len()));
    }
    if link_rows > 0 {
        out.push_str(&format!("L= {}\n", link_rows));
    }
    out.push('\n');

    let mut acoord: Vec<(usize, usize, f64)> = Vec::new();
    let mut bcoord: Vec<(usize, f64)> = Vec::new();
    let mut row = 0usize;
    for r in &p.eqs {
        for &(j, v) in &r.coeffs {
            acoord.push((row, j, v));
        }
        if r.rhs != 0.0 {
            bcoord.push((row, -r.rhs));
        }
        row += 1;
    }
    for r in &p.ineqs {
        for &(j, v) in &r.coeffs {
            acoord.push((row, j, v));
        }
        if r.rhs != 0.0 {
            bcoord.push((row, -r.rhs));
        }
        row += 1;
    }
    let mut slack = p.num_vars;
    for s in &p.socs {
        // t - (rhs_coeffs . v + rhs_const) = 0
        acoord.push((row, slack, 1.0));
        for &(j, v) in &s.rhs_coeffs {
            acoord.push((row, j, -v));
        }
        if s.rhs_const != 0.0 {
            bcoord.push((row, -s.rhs_const));
        }
        row += 1;
        slack += 1;
        for (i, rrow) in s.rows.iter().enumerate() {
            acoord.push((row, slack, 1.0));
            for &(j, v) in rrow {
                acoord.push((row, j, -v));
            }
            if s.consts[i] != 0.0 {
                bcoord.push((row, -s.consts[i]));
            }
            row += 1;
            slack += 1;
        }
    }

    out.push_str("ACOORD\n");
    out.push_str(&format!("{}\n", acoord.len()));
    for (i, j, v) in &acoord {
        out.push_str(&format!("{} {} {}\n", i, j, fmt_num(*v)));
    }
    out.push('\n');
    out.push_str("BCOORD\n");
    out.push_str(&format!("{}\n", bcoord.len()));
    for (i, v) in &bcoord {
        out.push_str(&format!("{} {}\n", i, fmt_num(*v)));
    }
    out
}

/// Parsed form of the conic-benchmark export, for round-trip checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCbf {
    pub version: u32,
    pub objsense: String,
    pub var_groups: Vec<(String, usize)>,
    pub con_groups: Vec<(String, usize)>,
    pub acoord: Vec<(usize, usize, f64)>,
    pub bcoord: Vec<(usize, f64)>,
}

pub fn parse_cbf(text: &str) -> Result<ParsedCbf> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut parsed = ParsedCbf {
        version: 0,
        objsense: String::new(),
        var_groups: Vec::new(),
        con_groups: Vec::new(),
        acoord: Vec::new(),
        bcoord: Vec::new(),
    };
    let bad = |what: &str| Error::Parse(format!("conic-benchmark text: {what}"));
    while let Some(section) = lines.next() {
        match section {
            "VER" => {
                parsed.version = lines
                    .next()
                    .ok_or_else(|| bad("missing version"))?
                    .parse()
                    .map_err(|_| bad("bad version"))?;
            }
            "OBJSENSE" => {
                parsed.objsense = lines.next().ok_or_else(|| bad("missing objsense"))?.into();
            }
            "VAR" | "CON" => {
                let head = lines.next().ok_or_else(|| bad("missing group header"))?;
                let mut it = head.split_whitespace();
                let _total: usize =
                    it.next().ok_or_else(|| bad("bad header"))?.parse().map_err(|_| bad("bad header"))?;
                let groups: usize =
                    it.next().ok_or_else(|| bad("bad header"))?.parse().map_err(|_| bad("bad header"))?;
                for _ in 0..groups {
                    let line = lines.next().ok_or_else(|| bad("missing group"))?;
                    let mut it = line.split_whitespace();
                    let kind = it.next().ok_or_else(|| bad("bad group"))?.to_string();
                    let dim: usize =
                        it.next().ok_or_else(|| bad("bad group"))?.parse().map_err(|_| bad("bad group"))?;
                    if section == "VAR" {
                        parsed.var_groups.push((kind, dim));
                    } else {
                        parsed.con_groups.push((kind, dim));
                    }
                }
            }
            "ACOORD" => {
                let count: usize = lines
                    .next()
                    .ok_or_else(|| bad("missing count"))?
                    .parse()
                    .map_err(|_| bad("bad count"))?;
                for _ in 0..count {
                    let line = lines.next().ok_or_else(|| bad("missing entry"))?;
                    let mut it = line.split_whitespace();
                    let i: usize = it.next().unwrap_or("").parse().map_err(|_| bad("bad entry"))?;
                    let j: usize = it.next().unwrap_or("").parse().map_err(|_| bad("bad entry"))?;
                    let v: f64 = it.next().unwrap_or("").parse().map_err(|_| bad("bad entry"))?;
                    parsed.acoord.push((i, j, v));
                }
            }
            "BCOORD" => {
                let count: usize = lines
                    .next()
                    .ok_or_else(|| bad("missing count"))?
                    .parse()
                    .map_err(|_| bad("bad count"))?;
                for _ in 0..count {
                    let line = lines.next().ok_or_else(|| bad("missing entry"))?;
                    let mut it = line.split_whitespace();
                    let i: usize = it.next().unwrap_or("").parse().map_err(|_| bad("bad entry"))?;
                    let v: f64 = it.next().unwrap_or("").parse().map_err(|_| bad("bad entry"))?;
                    parsed.bcoord.push((i, v));
                }
            }
            other => return Err(bad(&format!("unknown section {other}"))),
        }
    }
    Ok(parsed)
}
