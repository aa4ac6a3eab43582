//! Dense primal-dual interior-point solver for linear and second-order-cone
//! programs, built on a homogeneous self-dual embedding with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! Problems are given as
//!
//! ```text
//!     minimize    c'x
//!     subject to  E x  = e
//!                 G x <= h
//!                 ||A_j x + b_j|| <= c_j'x + d_j     j = 1..k
//! ```
//!
//! The solver is deterministic: identical inputs produce identical iterates.

use serde::{Deserialize, Serialize};

use crate::densela::{self, dot, norm_inf, Lu, Mat};
use crate::error::{Error, Result};

/// One second-order-cone constraint `||a x + b|| <= c'x + d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocConstraint {
    pub a: Mat,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

/// A conic program over free variables.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub num_vars: usize,
    /// Minimized objective.
    pub objective: Vec<f64>,
    pub ineq_lhs: Mat,
    pub ineq_rhs: Vec<f64>,
    pub eq_lhs: Mat,
    pub eq_rhs: Vec<f64>,
    pub socs: Vec<SocConstraint>,
}

impl ConeProblem {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Self {
        assert_eq!(num_vars, objective.len());
        ConeProblem {
            num_vars,
            objective,
            ineq_lhs: Mat::zeros(0, num_vars),
            ineq_rhs: Vec::new(),
            eq_lhs: Mat::zeros(0, num_vars),
            eq_rhs: Vec::new(),
            socs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if n == 0 {
            return Err(Error::InvalidInput("cone problem with no variables".into()));
        }
        if self.objective.len() != n
            || self.ineq_lhs.cols() != n
            || self.eq_lhs.cols() != n
            || self.ineq_lhs.rows() != self.ineq_rhs.len()
            || self.eq_lhs.rows() != self.eq_rhs.len()
        {
            return Err(Error::InvalidInput("inconsistent cone problem dimensions".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.ineq_lhs.is_finite()
            && self.eq_lhs.is_finite()
            && self.ineq_rhs.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite data in cone problem".into()));
        }
        for s in &self.socs {
            if s.a.cols() != n || s.c.len() != n || s.a.rows() != s.b.len() {
                return Err(Error::InvalidInput("inconsistent SOC block dimensions".into()));
            }
            if !s.a.is_finite()
                || !s.b.iter().all(|v| v.is_finite())
                || !s.c.iter().all(|v| v.is_finite())
                || !s.d.is_finite()
            {
                return Err(Error::InvalidInput("non-finite data in SOC block".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

/// Per-iteration numbers recorded when tracing is enabled.
#[derive(Debug, Clone)]
pub struct IterTrace {
    pub pcost: f64,
    pub dcost: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap_residual: f64,
    /// Multipliers of the equality rows.
    pub eq_duals: Vec<f64>,
    /// Multipliers of the inequality rows.
    pub ineq_duals: Vec<f64>,
    /// Multipliers of the SOC blocks, one vector of length 1 + rows(a) each.
    pub soc_duals: Vec<Vec<f64>>,
    pub iterations: usize,
    pub trace: Vec<IterTrace>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub collect_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iters: 200, collect_trace: false }
    }
}

/// Solves `p` to tolerance `tol`.
pub fn solve(p: &ConeProblem, tol: f64) -> Result<ConeSolution> {
    solve_with(p, &SolverOptions { tol, ..SolverOptions::default() })
}

/// Independent recomputation of KKT residuals for an `Optimal` solution.
///
/// Everything is evaluated from the problem data and the returned point and
/// multipliers; no solver internals are consulted.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub eq_violation: f64,
    pub ineq_violation: f64,
    pub soc_violation: f64,
    pub stationarity: f64,
    pub dual_cone_violation: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.eq_violation
            .max(self.ineq_violation)
            .max(self.soc_violation)
            .max(self.stationarity)
            .max(self.dual_cone_violation)
            .max(self.complementarity)
    }
}

pub fn check_kkt(p: &ConeProblem, sol: &ConeSolution) -> KktReport {
    let x = &sol.x;
    let eq_violation = if p.eq_lhs.rows() > 0 {
        norm_inf(&densela::sub(&p.eq_lhs.matvec(x), &p.eq_rhs))
    } else {
        0.0
    };
    let mut ineq_violation = 0.0f64;
    let slacks: Vec<f64> = if p.ineq_lhs.rows() > 0 {
        let gx = p.ineq_lhs.matvec(x);
        (0..gx.len())
            .map(|i| {
                let s = p.ineq_rhs[i] - gx[i];
                ineq_violation = ineq_violation.max(-s);
                s
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut soc_violation = 0.0f64;
    let mut soc_slacks = Vec::new();
    for s in &p.socs {
        let lhs = densela::norm2(&densela::add(&s.a.matvec(x), &s.b));
        let rhs = dot(&s.c, x) + s.d;
        soc_violation = soc_violation.max(lhs - rhs);
        soc_slacks.push((rhs, densela::add(&s.a.matvec(x), &s.b)));
    }

    // stationarity: c + E'y + G'z_l + sum_j J_j' z_j = 0, where the j-th SOC
    // block enters the embedding as rows (-c_j'; -a_j).
    let mut grad = p.objective.clone();
    if p.eq_lhs.rows() > 0 {
        let t = p.eq_lhs.tr_matvec(&sol.eq_duals);
        for (g, ti) in grad.iter_mut().zip(&t) {
            *g += ti;
        }
    }
    if p.ineq_lhs.rows() > 0 {
        let t = p.ineq_lhs.tr_matvec(&sol.ineq_duals);
        for (g, ti) in grad.iter_mut().zip(&t) {
            *g += ti;
        }
    }
    for (s, z) in p.socs.iter().zip(&sol.soc_duals) {
        // block rows are (-c'; -a): contribution = -c z0 - a' z1
        for j in 0..p.num_vars {
            grad[j] -= s.c[j] * z[0];
        }
        let t = s.a.tr_matvec(&z[1..]);
        for (g, ti) in grad.iter_mut().zip(&t) {
            *g -= ti;
        }
    }
    let stationarity = norm_inf(&grad);

    let mut dual_cone_violation = 0.0f64;
    for z in &sol.ineq_duals {
        dual_cone_violation = dual_cone_violation.max(-z);
    }
    for z in &sol.soc_duals {
        dual_cone_violation = dual_cone_violation.max(densela::norm2(&z[1..]) - z[0]);
    }

    let mut complementarity = 0.0f64;
    for (s, z) in slacks.iter().zip(&sol.ineq_duals) {
        complementarity = complementarity.max((s * z).abs());
    }
    for ((rhs, a_x_b), z) in soc_slacks.iter().zip(&sol.soc_duals) {
        // s = (rhs, a x + b); complementary slackness is s'z = 0
        let sz = rhs * z[0] + dot(a_x_b, &z[1..]);
        complementarity = complementarity.max(sz.abs());
    }

    KktReport {
        eq_violation,
        ineq_violation: ineq_violation.max(0.0),
        soc_violation: soc_violation.max(0.0),
        stationarity,
        dual_cone_violation: dual_cone_violation.max(0.0),
        complementarity,
    }
}

// ---------------------------------------------------------------------------
// internal embedding
// ---------------------------------------------------------------------------

type SparseRow = Vec<(usize, f64)>;

fn to_sparse_rows(m: &Mat) -> Vec<SparseRow> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect()
        })
        .collect()
}

fn sp_matvec(rows: &[SparseRow], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
}

fn sp_tr_matvec(rows: &[SparseRow], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, &yi) in rows.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        for &(j, v) in r {
            out[j] += v * yi;
        }
    }
    out
}

/// Cone layout: `nonneg` scalar rows followed by SOC blocks.
#[derive(Debug, Clone)]
struct ConeLayout {
    nonneg: usize,
    soc_dims: Vec<usize>,
}

impl ConeLayout {
    fn total(&self) -> usize {
        self.nonneg + self.soc_dims.iter().sum::<usize>()
    }
    fn degree(&self) -> usize {
        self.nonneg + self.soc_dims.len()
    }
    fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.total()];
        for v in e.iter_mut().take(self.nonneg) {
            *v = 1.0;
        }
        let mut off = self.nonneg;
        for &q in &self.soc_dims {
            e[off] = 1.0;
            off += q;
        }
        e
    }

    /// Margin to the cone boundary; positive inside.
    fn margin(&self, u: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &v in u.iter().take(self.nonneg) {
            m = m.min(v);
        }
        let mut off = self.nonneg;
        for &q in &self.soc_dims {
            m = m.min(u[off] - densela::norm2(&u[off + 1..off + q]));
            off += q;
        }
        if m == f64::INFINITY {
            0.0
        } else {
            m
        }
    }

    /// Largest step alpha with `u + alpha du` still in the cone (can be inf).
    fn max_step(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        let mut off = self.nonneg;
        for &q in &self.soc_dims {
            let (u0, u1) = (u[off], &u[off + 1..off + q]);
            let (d0, d1) = (du[off], &du[off + 1..off + q]);
            // boundary of (u0 + a d0)^2 - ||u1 + a d1||^2 with u0 + a d0 >= 0
            let a = d0 * d0 - dot(d1, d1);
            let b = 2.0 * (u0 * d0 - dot(u1, d1));
            let c = u0 * u0 - dot(u1, u1);
            let mut best = f64::INFINITY;
            let disc = b * b - 4.0 * a * c;
            if a.abs() < 1e-300 {
                if b < 0.0 {
                    best = -c / b;
                }
            } else if disc >= 0.0 {
                let sq = disc.sqrt();
                // stable pairing of roots
                let q0 = -0.5 * (b + b.signum() * sq);
                let mut roots = [f64::INFINITY; 2];
                roots[0] = q0 / a;
                roots[1] = if q0 != 0.0 { c / q0 } else { f64::INFINITY };
                for r in roots {
                    if r > 0.0 && r < best {
                        // only boundary crossings where u0 stays nonnegative
                        if u0 + r * d0 >= -1e-12 * (1.0 + u0.abs()) {
                            best = r;
                        }
                    }
                }
            }
            if d0 < 0.0 {
                best = best.min(-u0 / d0);
            }
            alpha = alpha.min(best);
            off += q;
        }
        alpha
    }
}

/// Nesterov-Todd scaling per cone block.
#[derive(Debug, Clone)]
struct Scaling {
    /// w_i^2 = s_i / z_i on the nonnegative block.
    w2: Vec<f64>,
    /// (eta, wbar) per SOC block with wbar0^2 - ||wbar1||^2 = 1.
    socs: Vec<(f64, Vec<f64>)>,
}

impl Scaling {
    fn identity(layout: &ConeLayout) -> Scaling {
        Scaling {
            w2: vec![1.0; layout.nonneg],
            socs: layout
                .soc_dims
                .iter()
                .map(|&q| {
                    let mut w = vec![0.0; q];
                    w[0] = 1.0;
                    (1.0, w)
                })
                .collect(),
        }
    }

    fn compute(layout: &ConeLayout, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut w2 = Vec::with_capacity(layout.nonneg);
        for i in 0..layout.nonneg {
            if s[i] <= 0.0 || z[i] <= 0.0 {
                return None;
            }
            w2.push(s[i] / z[i]);
        }
        let mut socs = Vec::with_capacity(layout.soc_dims.len());
        let mut off = layout.nonneg;
        for &q in &layout.soc_dims {
            let sb = &s[off..off + q];
            let zb = &z[off..off + q];
            let sres = sb[0] * sb[0] - dot(&sb[1..], &sb[1..]);
            let zres = zb[0] * zb[0] - dot(&zb[1..], &zb[1..]);
            if sres <= 0.0 || zres <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0 {
                return None;
            }
            let snorm = sres.sqrt();
            let znorm = zres.sqrt();
            let sbar: Vec<f64> = sb.iter().map(|v| v / snorm).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / znorm).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            let mut wbar = vec![0.0; q];
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for i in 1..q {
                wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
            }
            let eta = (snorm / znorm).sqrt();
            socs.push((eta, wbar));
            off += q;
        }
        Some(Scaling { w2, socs })
    }

    /// lambda = W z (= W^{-1} s).
    fn lambda(&self, layout: &ConeLayout, z: &[f64]) -> Vec<f64> {
        self.apply_w(layout, z)
    }

    fn apply_w(&self, layout: &ConeLayout, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.total()];
        for i in 0..layout.nonneg {
            out[i] = self.w2[i].sqrt() * u[i];
        }
        let mut off = layout.nonneg;
        for (k, &q) in layout.soc_dims.iter().enumerate() {
            let (eta, wbar) = &self.socs[k];
            apply_wbar(wbar, &u[off..off + q], &mut out[off..off + q]);
            for v in &mut out[off..off + q] {
                *v *= eta;
            }
            off += q;
        }
        out
    }

    fn apply_w_inv(&self, layout: &ConeLayout, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.total()];
        for i in 0..layout.nonneg {
            out[i] = u[i] / self.w2[i].sqrt();
        }
        let mut off = layout.nonneg;
        for (k, &q) in layout.soc_dims.iter().enumerate() {
            let (eta, wbar) = &self.socs[k];
            let mut jw = wbar.clone();
            for v in &mut jw[1..] {
                *v = -*v;
            }
            apply_wbar(&jw, &u[off..off + q], &mut out[off..off + q]);
            for v in &mut out[off..off + q] {
                *v /= eta;
            }
            off += q;
        }
        out
    }

    /// W^T W u (W is symmetric here).
    fn apply_w2(&self, layout: &ConeLayout, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.total()];
        for i in 0..layout.nonneg {
            out[i] = self.w2[i] * u[i];
        }
        let mut off = layout.nonneg;
        for (k, &q) in layout.soc_dims.iter().enumerate() {
            let (eta, wbar) = &self.socs[k];
            let ub = &u[off..off + q];
            let wu = dot(wbar, ub);
            // W^2 = eta^2 (2 wbar wbar' - J)
            out[off] = eta * eta * (2.0 * wbar[0] * wu - ub[0]);
            for i in 1..q {
                out[off + i] = eta * eta * (2.0 * wbar[i] * wu + ub[i]);
            }
            off += q;
        }
        out
    }
}

/// W-bar application: out = Wbar(u) for the unit-normalized scaling point.
fn apply_wbar(wbar: &[f64], u: &[f64], out: &mut [f64]) {
    let q = wbar.len();
    let w1u1 = dot(&wbar[1..], &u[1..]);
    out[0] = wbar[0] * u[0] + w1u1;
    let f = u[0] + w1u1 / (1.0 + wbar[0]);
    for i in 1..q {
        out[i] = u[i] + f * wbar[i];
    }
}

/// Jordan product u o v per block.
fn jordan_prod(layout: &ConeLayout, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.total()];
    for i in 0..layout.nonneg {
        out[i] = u[i] * v[i];
    }
    let mut off = layout.nonneg;
    for &q in &layout.soc_dims {
        let (ub, vb) = (&u[off..off + q], &v[off..off + q]);
        out[off] = dot(ub, vb);
        for i in 1..q {
            out[off + i] = ub[0] * vb[i] + vb[0] * ub[i];
        }
        off += q;
    }
    out
}

/// Jordan division lambda \ d per block (inverse of the arrow operator).
fn jordan_div(layout: &ConeLayout, lambda: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.total()];
    for i in 0..layout.nonneg {
        out[i] = d[i] / lambda[i];
    }
    let mut off = layout.nonneg;
    for &q in &layout.soc_dims {
        let lb = &lambda[off..off + q];
        let db = &d[off..off + q];
        let det = lb[0] * lb[0] - dot(&lb[1..], &lb[1..]);
        let x0 = (lb[0] * db[0] - dot(&lb[1..], &db[1..])) / det;
        out[off] = x0;
        for i in 1..q {
            out[off + i] = (db[i] - x0 * lb[i]) / lb[0];
        }
        off += q;
    }
    out
}

/// Smallest per-block complementarity measure of `(s, z, tau, kappa)`.
///
/// For scalar blocks this is `s_i z_i`; for a SOC block it is the geometric
/// mean of the two Jordan eigen-products, `sqrt(sres * zres) / 2`. Used to
/// keep iterates inside a (very loose) central-path neighborhood.
fn min_complementarity(layout: &ConeLayout, s: &[f64], z: &[f64], tau: f64, kappa: f64) -> f64 {
    let mut m = tau * kappa;
    for i in 0..layout.nonneg {
        m = m.min(s[i] * z[i]);
    }
    let mut off = layout.nonneg;
    for &q in &layout.soc_dims {
        let sb = &s[off..off + q];
        let zb = &z[off..off + q];
        let sres = sb[0] * sb[0] - dot(&sb[1..], &sb[1..]);
        let zres = zb[0] * zb[0] - dot(&zb[1..], &zb[1..]);
        m = m.min(if sres <= 0.0 || zres <= 0.0 { 0.0 } else { (sres * zres).sqrt() / 2.0 });
        off += q;
    }
    m
}

struct KktSolver {
    n: usize,
    p: usize,
    m: usize,
    /// Unregularized symmetric KKT matrix, kept for iterative refinement.
    mat: Mat,
    lu: Lu,
}

const KKT_REG: f64 = 1e-10;

impl KktSolver {
    /// Builds and factors the full augmented system
    /// ```text
    ///   [ 0   A'  G'  ] [ux]   [bx]
    ///   [ A   0   0   ] [uy] = [by]
    ///   [ G   0  -W^2 ] [uz]   [bz]
    /// ```
    /// The normal-equation reduction is avoided on purpose: it squares the
    /// conditioning and loses the last digits near convergence.
    fn factor(
        n: usize,
        a_rows: &[SparseRow],
        g_rows: &[SparseRow],
        layout: &ConeLayout,
        scaling: &Scaling,
    ) -> KktSolver {
        let p = a_rows.len();
        let m = layout.total();
        let size = n + p + m;
        let mut mat = Mat::zeros(size, size);
        for (r, row) in a_rows.iter().enumerate() {
            for &(j, v) in row {
                mat.set(n + r, j, v);
                mat.set(j, n + r, v);
            }
        }
        for (r, row) in g_rows.iter().enumerate() {
            for &(j, v) in row {
                mat.set(n + p + r, j, v);
                mat.set(j, n + p + r, v);
            }
        }
        for i in 0..layout.nonneg {
            let k = n + p + i;
            mat.set(k, k, -scaling.w2[i]);
        }
        let mut off = layout.nonneg;
        for (bi, &q) in layout.soc_dims.iter().enumerate() {
            let (eta, wbar) = &scaling.socs[bi];
            let e2 = eta * eta;
            // W^2 = eta^2 (2 wbar wbar' - J)
            for i in 0..q {
                for j in 0..q {
                    let jij = if i != j {
                        0.0
                    } else if i == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let v = -e2 * (2.0 * wbar[i] * wbar[j] - jij);
                    mat.set(n + p + off + i, n + p + off + j, v);
                }
            }
            off += q;
        }

        let mut reg = mat.clone();
        for i in 0..n {
            reg.set(i, i, reg.get(i, i) + KKT_REG);
        }
        for i in n..size {
            reg.set(i, i, reg.get(i, i) - KKT_REG);
        }
        let lu = Lu::factor(&reg);
        KktSolver { n, p, m, mat, lu }
    }

    fn solve3(&self, bx: &[f64], by: &[f64], bz: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let size = self.n + self.p + self.m;
        let mut rhs = Vec::with_capacity(size);
        rhs.extend_from_slice(bx);
        rhs.extend_from_slice(by);
        rhs.extend_from_slice(bz);

        let mut sol = self.lu.solve(&rhs)?;
        // refinement against the unregularized operator; rolls back as soon
        // as a correction stops improving the residual
        let residual = |sol: &[f64]| -> Vec<f64> {
            let mx = self.mat.matvec(sol);
            rhs.iter().zip(&mx).map(|(b, v)| b - v).collect()
        };
        let target = 1e-14 * (1.0 + norm_inf(&rhs));
        let mut best = sol.clone();
        let mut best_norm = norm_inf(&residual(&sol));
        for _ in 0..8 {
            if best_norm <= target {
                break;
            }
            let res = residual(&sol);
            let corr = match self.lu.solve(&res) {
                Some(c) => c,
                None => break,
            };
            for (s, c) in sol.iter_mut().zip(&corr) {
                *s += c;
            }
            let r = norm_inf(&residual(&sol));
            if r < best_norm && r.is_finite() {
                best_norm = r;
                best.copy_from_slice(&sol);
            } else {
                break;
            }
        }
        let sol = best;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let ux = sol[..self.n].to_vec();
        let uy = sol[self.n..self.n + self.p].to_vec();
        let uz = sol[self.n + self.p..].to_vec();
        Some((ux, uy, uz))
    }
}

pub fn solve_with(prob: &ConeProblem, opts: &SolverOptions) -> Result<ConeSolution> {
    prob.validate()?;
    if opts.tol <= 0.0 {
        return Err(Error::InvalidInput("solver tolerance must be positive".into()));
    }

    let n = prob.num_vars;
    let ml = prob.ineq_lhs.rows();
    let layout = ConeLayout {
        nonneg: ml,
        soc_dims: prob.socs.iter().map(|s| 1 + s.a.rows()).collect(),
    };
    let m = layout.total();
    let p = prob.eq_lhs.rows();

    // Embedding data: G stacks the inequality rows then per-SOC (-c'; -a),
    // h stacks rhs then (d; b), so that  G x + s = h  with  s in K.
    let mut g_rows: Vec<SparseRow> = to_sparse_rows(&prob.ineq_lhs);
    let mut h_vec = prob.ineq_rhs.clone();
    for s in &prob.socs {
        let crow: SparseRow =
            s.c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, -*v)).collect();
        g_rows.push(crow);
        h_vec.push(s.d);
        for i in 0..s.a.rows() {
            let arow: SparseRow = s
                .a
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, -*v))
                .collect();
            g_rows.push(arow);
            h_vec.push(s.b[i]);
        }
    }
    let a_rows = to_sparse_rows(&prob.eq_lhs);
    let b_vec = prob.eq_rhs.clone();
    let c_vec = prob.objective.clone();

    if m == 0 {
        return Err(Error::InvalidInput(
            "cone problem must have at least one inequality or SOC constraint".into(),
        ));
    }

    let e_unit = layout.unit();
    let degree = (layout.degree() + 1) as f64;

    // --- initialization -----------------------------------------------------
    let id_scaling = Scaling::identity(&layout);
    let kkt0 = KktSolver::factor(n, &a_rows, &g_rows, &layout, &id_scaling);

    let zeros_n = vec![0.0; n];
    let (x0, _, zt) = kkt0
        .solve3(&zeros_n, &b_vec, &h_vec)
        .ok_or_else(|| Error::SolverFailure("initial KKT factorization failed".into()))?;
    let mut s: Vec<f64> = zt.iter().map(|v| -v).collect();
    // a unit margin at the start keeps the first scaling well conditioned
    let margin = layout.margin(&s);
    if margin < 1.0 {
        let shift = 1.0 - margin;
        for (si, ei) in s.iter_mut().zip(&e_unit) {
            *si += shift * ei;
        }
    }
    let neg_c: Vec<f64> = c_vec.iter().map(|v| -v).collect();
    let zeros_p = vec![0.0; p];
    let zeros_m = vec![0.0; m];
    let (_, y0, z0) = kkt0
        .solve3(&neg_c, &zeros_p, &zeros_m)
        .ok_or_else(|| Error::SolverFailure("initial KKT factorization failed".into()))?;
    let mut z = z0;
    let margin = layout.margin(&z);
    if margin < 1.0 {
        let shift = 1.0 - margin;
        for (zi, ei) in z.iter_mut().zip(&e_unit) {
            *zi += shift * ei;
        }
    }
    let mut x = x0;
    let mut y = y0;
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let norm_b = norm_inf(&b_vec).max(norm_inf(&h_vec));
    let norm_c = norm_inf(&c_vec);

    let mut trace = Vec::new();
    let mut best: Option<ConeSolution> = None;
    let mut stalled = false;

    // one extra pass so the final update is still checked for convergence
    for iter in 0..=opts.max_iters {
        // residuals
        let aty = sp_tr_matvec(&a_rows, &y, n);
        let gtz = sp_tr_matvec(&g_rows, &z, n);
        let rd: Vec<f64> = (0..n).map(|j| aty[j] + gtz[j] + c_vec[j] * tau).collect();
        let ax = sp_matvec(&a_rows, &x);
        let rp: Vec<f64> = (0..p).map(|i| ax[i] - b_vec[i] * tau).collect();
        let gx = sp_matvec(&g_rows, &x);
        let rc: Vec<f64> = (0..m).map(|i| s[i] + gx[i] - h_vec[i] * tau).collect();
        let cx = dot(&c_vec, &x);
        let by_hz = dot(&b_vec, &y) + dot(&h_vec, &z);
        let rg = kappa + cx + by_hz;

        let pcost = cx / tau;
        let dcost = -by_hz / tau;
        let sz = dot(&s, &z);
        let gap = sz / (tau * tau);
        let pres = norm_inf(&rp).max(norm_inf(&rc)) / tau / (1.0 + norm_b);
        let dres = norm_inf(&rd) / tau / (1.0 + norm_c);
        let relgap = gap / (1.0 + pcost.abs());

        if opts.collect_trace {
            trace.push(IterTrace {
                pcost,
                dcost,
                gap,
                primal_residual: pres,
                dual_residual: dres,
            });
        }

        let extract = |status: SolveStatus, trace: &Vec<IterTrace>| ConeSolution {
            status,
            x: x.iter().map(|v| v / tau).collect(),
            objective: pcost,
            primal_residual: pres,
            dual_residual: dres,
            gap_residual: relgap,
            eq_duals: y.iter().map(|v| v / tau).collect(),
            ineq_duals: z[..ml].iter().map(|v| v / tau).collect(),
            soc_duals: {
                let mut out = Vec::new();
                let mut off = ml;
                for &q in &layout.soc_dims {
                    out.push(z[off..off + q].iter().map(|v| v / tau).collect());
                    off += q;
                }
                out
            },
            iterations: iter,
            trace: trace.clone(),
        };

        if pres <= opts.tol && dres <= opts.tol && relgap <= opts.tol {
            return Ok(extract(SolveStatus::Optimal, &trace));
        }
        // certificates of infeasibility / unboundedness
        if by_hz < -1e-12 {
            let hres = norm_inf(&densela::add(&aty, &gtz));
            if hres <= opts.tol * (-by_hz) {
                let mut sol = extract(SolveStatus::Infeasible, &trace);
                let scale = -1.0 / by_hz;
                for v in sol
                    .eq_duals
                    .iter_mut()
                    .chain(sol.ineq_duals.iter_mut())
                    .chain(sol.soc_duals.iter_mut().flatten())
                {
                    *v *= scale * tau;
                }
                sol.x = vec![0.0; n];
                return Ok(sol);
            }
        }
        if cx < -1e-12 {
            // certificate requires A x = 0 and G x + s = 0 (without tau terms)
            let hres = norm_inf(&ax)
                .max(norm_inf(&(0..m).map(|i| s[i] + gx[i]).collect::<Vec<_>>()));
            if hres <= opts.tol * (-cx) {
                let mut sol = extract(SolveStatus::Unbounded, &trace);
                let scale = -1.0 / cx;
                for v in sol.x.iter_mut() {
                    *v *= scale * tau;
                }
                return Ok(sol);
            }
        }

        // remember the best near-feasible iterate for NumericFailure reporting
        if best.as_ref().map_or(true, |b| {
            pres.max(dres).max(relgap)
                < b.primal_residual.max(b.dual_residual).max(b.gap_residual)
        }) {
            best = Some(extract(SolveStatus::NumericFailure, &Vec::new()));
        }

        if stalled || iter == opts.max_iters {
            break;
        }

        // --- search direction ---------------------------------------------
        // rounding can push a slack marginally out of the cone; nudge back
        // toward the interior before computing the scaling
        let nudge = |vec: &mut Vec<f64>, layout: &ConeLayout, e_unit: &[f64]| {
            let margin = layout.margin(vec);
            if margin <= 0.0 {
                let shift = 1e-13 * (1.0 + norm_inf(vec)) - margin;
                for (vi, ei) in vec.iter_mut().zip(e_unit) {
                    *vi += shift * ei;
                }
            }
        };
        nudge(&mut s, &layout, &e_unit);
        nudge(&mut z, &layout, &e_unit);
        let scaling = match Scaling::compute(&layout, &s, &z) {
            Some(sc) => sc,
            None => {
                stalled = true;
                continue;
            }
        };
        let lambda = scaling.lambda(&layout, &z);
        let mu = (sz + tau * kappa) / degree;

        let kkt = KktSolver::factor(n, &a_rows, &g_rows, &layout, &scaling);
        let neg_c: Vec<f64> = c_vec.iter().map(|v| -v).collect();
        let v3 = match kkt.solve3(&neg_c, &b_vec, &h_vec) {
            Some(v) => v,
            None => {
                stalled = true;
                continue;
            }
        };

        let direction = |sigma: f64,
                             corr_s: Option<&Vec<f64>>,
                             corr_tk: f64|
         -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64)> {
            let eta = 1.0 - sigma;
            // scaled complementarity target
            let mut ds_target = jordan_prod(&layout, &lambda, &lambda);
            for v in ds_target.iter_mut() {
                *v = -*v;
            }
            if let Some(c) = corr_s {
                for (t, ci) in ds_target.iter_mut().zip(c) {
                    *t -= ci;
                }
            }
            if sigma > 0.0 {
                for (t, ei) in ds_target.iter_mut().zip(&e_unit) {
                    *t += sigma * mu * ei;
                }
            }
            let dkt = -tau * kappa - corr_tk + sigma * mu;

            let dtilde = jordan_div(&layout, &lambda, &ds_target);
            let w_dtilde = scaling.apply_w(&layout, &dtilde);

            let bx: Vec<f64> = rd.iter().map(|v| -eta * v).collect();
            let by: Vec<f64> = rp.iter().map(|v| -eta * v).collect();
            let bz: Vec<f64> = (0..m).map(|i| -eta * rc[i] - w_dtilde[i]).collect();
            let (ux, uy, uz) = kkt.solve3(&bx, &by, &bz)?;

            let num = -eta * rg - dkt / tau - (dot(&c_vec, &ux) + dot(&b_vec, &uy) + dot(&h_vec, &uz));
            let den = dot(&c_vec, &v3.0) + dot(&b_vec, &v3.1) + dot(&h_vec, &v3.2) - kappa / tau;
            if den.abs() < 1e-300 {
                return None;
            }
            let dtau = num / den;
            let dx: Vec<f64> = (0..n).map(|j| ux[j] + dtau * v3.0[j]).collect();
            let dy: Vec<f64> = (0..p).map(|i| uy[i] + dtau * v3.1[i]).collect();
            let dz: Vec<f64> = (0..m).map(|i| uz[i] + dtau * v3.2[i]).collect();
            let w2dz = scaling.apply_w2(&layout, &dz);
            let ds: Vec<f64> = (0..m).map(|i| w_dtilde[i] - w2dz[i]).collect();
            let dkappa = (dkt - kappa * dtau) / tau;
            Some((dx, dy, dz, ds, dtau, dkappa))
        };

        // predictor
        let aff = match direction(0.0, None, 0.0) {
            Some(d) => d,
            None => {
                stalled = true;
                continue;
            }
        };
        let (_, _, adz, ads, adtau, adkappa) = &aff;
        let mut alpha_aff = layout.max_step(&s, ads).min(layout.max_step(&z, adz));
        if *adtau < 0.0 {
            alpha_aff = alpha_aff.min(-tau / adtau);
        }
        if *adkappa < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / adkappa);
        }
        alpha_aff = alpha_aff.min(1.0);

        let mut s_aff = s.clone();
        let mut z_aff = z.clone();
        densela::axpy(alpha_aff, ads, &mut s_aff);
        densela::axpy(alpha_aff, adz, &mut z_aff);
        let mu_aff = (dot(&s_aff, &z_aff)
            + (tau + alpha_aff * adtau) * (kappa + alpha_aff * adkappa))
            / degree;
        let sigma = (mu_aff / mu).max(0.0).min(1.0).powi(3);

        // corrector term (W^{-1} ds_aff) o (W dz_aff)
        let wi_ds = scaling.apply_w_inv(&layout, ads);
        let w_dz = scaling.apply_w(&layout, adz);
        let corr = jordan_prod(&layout, &wi_ds, &w_dz);
        let corr_tk = adtau * adkappa;

        let (dx, dy, dz, ds, dtau, dkappa) = match direction(sigma, Some(&corr), corr_tk) {
            Some(d) => d,
            None => {
                stalled = true;
                continue;
            }
        };

        let mut alpha = layout.max_step(&s, &ds).min(layout.max_step(&z, &dz));
        if dtau < 0.0 {
            alpha = alpha.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            alpha = alpha.min(-kappa / dkappa);
        }
        alpha = (0.99 * alpha).min(1.0);
        // backtrack until the trial point keeps a minimal degree of
        // centrality; a collapsed block ruins the scaling and jams the
        // iteration at a complementary but infeasible point
        let cur_ratio = min_complementarity(&layout, &s, &z, tau, kappa) / mu;
        let floor_ratio = if cur_ratio >= 1e-7 { 1e-7 } else { 0.01 * cur_ratio };
        for _ in 0..40 {
            let trial_s: Vec<f64> = s.iter().zip(&ds).map(|(v, d)| v + alpha * d).collect();
            let trial_z: Vec<f64> = z.iter().zip(&dz).map(|(v, d)| v + alpha * d).collect();
            let trial_tau = tau + alpha * dtau;
            let trial_kappa = kappa + alpha * dkappa;
            let mu_trial = (dot(&trial_s, &trial_z) + trial_tau * trial_kappa) / degree;
            if min_complementarity(&layout, &trial_s, &trial_z, trial_tau, trial_kappa)
                >= floor_ratio * mu_trial
            {
                break;
            }
            alpha *= 0.8;
        }
        if !alpha.is_finite() || alpha <= 1e-10 {
            stalled = true;
            continue;
        }

        densela::axpy(alpha, &dx, &mut x);
        densela::axpy(alpha, &dy, &mut y);
        densela::axpy(alpha, &dz, &mut z);
        densela::axpy(alpha, &ds, &mut s);
        tau += alpha * dtau;
        kappa += alpha * dkappa;

        if !tau.is_finite() || tau <= 0.0 || !kappa.is_finite() {
            break;
        }
    }

    let mut sol = best.unwrap_or(ConeSolution {
        status: SolveStatus::NumericFailure,
        x: vec![0.0; n],
        objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap_residual: f64::INFINITY,
        eq_duals: vec![0.0; p],
        ineq_duals: vec![0.0; ml],
        soc_duals: Vec::new(),
        iterations: opts.max_iters,
        trace: Vec::new(),
    });
    sol.status = SolveStatus::NumericFailure;
    sol.trace = trace;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>, d: f64) -> SocConstraint {
        SocConstraint { a: Mat::from_rows(&a), b, c, d }
    }

    #[test]
    fn unit_interval() {
        // min x s.t. |x| <= 1
        let mut p = ConeProblem::new(1, vec![1.0]);
        p.socs.push(soc(vec![vec![1.0]], vec![0.0], vec![0.0], 1.0));
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] + 1.0).abs() <= 1e-6, "x = {}", sol.x[0]);
        assert!((sol.objective + 1.0).abs() <= 1e-6);
    }

    #[test]
    fn unit_disk_diagonal() {
        // min x + y s.t. ||(x, y)|| <= 1  ->  -sqrt(2)
        let mut p = ConeProblem::new(2, vec![1.0, 1.0]);
        p.socs.push(soc(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            1.0,
        ));
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 2f64.sqrt()).abs() <= 1e-6);
    }

    #[test]
    fn box_lp() {
        // min -x s.t. x <= 2, -x <= 0  ->  -2
        let mut p = ConeProblem::new(1, vec![-1.0]);
        p.ineq_lhs = Mat::from_rows(&[vec![1.0], vec![-1.0]]);
        p.ineq_rhs = vec![2.0, 0.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + 2.0).abs() <= 1e-7);
        let rep = check_kkt(&p, &sol);
        assert!(rep.max_residual() <= 1e-6, "kkt residual {:?}", rep);
    }

    #[test]
    fn equality_lp() {
        // min x + y s.t. x + y = 1, x,y >= 0
        let mut p = ConeProblem::new(2, vec![1.0, 1.0]);
        p.eq_lhs = Mat::from_rows(&[vec![1.0, 1.0]]);
        p.eq_rhs = vec![1.0];
        p.ineq_lhs = Mat::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]);
        p.ineq_rhs = vec![0.0, 0.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn detects_infeasible() {
        // x >= 1 and x <= 0
        let mut p = ConeProblem::new(1, vec![0.0]);
        p.ineq_lhs = Mat::from_rows(&[vec![-1.0], vec![1.0]]);
        p.ineq_rhs = vec![-1.0, 0.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min x with x <= 0 only
        let mut p = ConeProblem::new(1, vec![1.0]);
        p.ineq_lhs = Mat::from_rows(&[vec![1.0]]);
        p.ineq_rhs = vec![0.0];
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn kkt_detects_perturbation() {
        let mut p = ConeProblem::new(2, vec![1.0, 1.0]);
        p.socs.push(soc(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            1.0,
        ));
        let mut sol = solve(&p, 1e-8).unwrap();
        let rep = check_kkt(&p, &sol);
        assert!(rep.max_residual() <= 1e-6);
        sol.x[0] += 0.1;
        let rep = check_kkt(&p, &sol);
        assert!(
            rep.max_residual() >= 0.05 && rep.max_residual() <= 0.2,
            "expected injected error of about 0.1, got {rep:?}"
        );
    }

    #[test]
    fn weak_duality_on_trace() {
        let mut p = ConeProblem::new(2, vec![1.0, 2.0]);
        p.ineq_lhs = Mat::from_rows(&[
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
            vec![1.0, 1.0],
        ]);
        p.ineq_rhs = vec![0.0, 0.0, 3.0];
        let sol = solve_with(
            &p,
            &SolverOptions { tol: 1e-8, max_iters: 200, collect_trace: true },
        )
        .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(!sol.trace.is_empty());
        for t in &sol.trace {
            assert!(t.gap >= -1e-12, "cone gap must stay nonnegative, got {}", t.gap);
        }
    }
}
