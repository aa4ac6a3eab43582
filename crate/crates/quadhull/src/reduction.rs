//! Transformation of a raw quadratic-surface instance into the canonical form
//!
//! ```text
//!     sum_i w_i^2 - sum_j x_j^2 + sum_k y_k = g,    g >= 0,
//! ```
//!
//! via spectral rotation, square completion, linear rescaling, block
//! permutation and an optional sign flip, while tracking the invertible
//! affine map back to the original coordinates.

use crate::affine::AffineMap;
use crate::config::Config;
use crate::densela::{self, dot, norm_inf, Mat};
use crate::error::{Error, Result};
use crate::polytope::{self, HPolytope};

/// The raw set `{ x | x'Qx + alpha'x = g, A x <= b }`.
#[derive(Debug, Clone)]
pub struct QuadInstance {
    pub q: Mat,
    pub alpha: Vec<f64>,
    pub g: f64,
    pub p: HPolytope,
}

impl QuadInstance {
    /// Builds an instance; `q` is symmetrized. Boundedness of the polytope is
    /// not checked here (see [`QuadInstance::checked`]).
    pub fn new(q: Mat, alpha: Vec<f64>, g: f64, p: HPolytope) -> Result<Self> {
        let n = alpha.len();
        if q.rows() != n || q.cols() != n || p.dim() != n {
            return Err(Error::InvalidInput(format!(
                "instance dimensions disagree: Q is {}x{}, alpha has {}, polytope dim {}",
                q.rows(),
                q.cols(),
                n,
                p.dim()
            )));
        }
        if !q.is_finite() || !densela::all_finite(&alpha) || !g.is_finite() || !p.a.is_finite() {
            return Err(Error::InvalidInput("non-finite instance data".into()));
        }
        Ok(QuadInstance { q: q.symmetrized(), alpha, g, p })
    }

    /// Like [`QuadInstance::new`] but also rejects empty or unbounded polytopes.
    pub fn checked(q: Mat, alpha: Vec<f64>, g: f64, p: HPolytope, cfg: &Config) -> Result<Self> {
        let inst = QuadInstance::new(q, alpha, g, p)?;
        if !polytope::is_bounded(&inst.p, cfg)? {
            return Err(Error::UnboundedPolytope);
        }
        Ok(inst)
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `x'Qx + alpha'x`.
    pub fn eval_quad(&self, x: &[f64]) -> f64 {
        dot(&self.q.matvec(x), x) + dot(&self.alpha, x)
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.eval_quad(x) - self.g
    }

    pub fn data_scale(&self) -> f64 {
        self.q
            .max_abs()
            .max(norm_inf(&self.alpha))
            .max(self.g.abs())
            .max(norm_inf(&self.p.b))
            .max(1.0)
    }
}

/// Rewrites the instance under the substitution `x = L u + t`.
///
/// The resulting quadratic satisfies `eval_new(u) = eval_old(L u + t)` exactly
/// in exact arithmetic; infeasible substituted polytopes surface as an
/// `Infeasible` error.
pub fn substitute_instance(inst: &QuadInstance, map: &AffineMap, cfg: &Config) -> Result<QuadInstance> {
    assert_eq!(map.n_out(), inst.dim());
    let l = &map.l;
    let t = &map.t;
    let qt = inst.q.matvec(t);
    let q_new = l.transpose().matmul(&inst.q).matmul(l).symmetrized();
    // alpha_new = L'(2 Q t + alpha)
    let inner: Vec<f64> = (0..inst.dim()).map(|i| 2.0 * qt[i] + inst.alpha[i]).collect();
    let alpha_new = l.tr_matvec(&inner);
    let g_new = inst.g - dot(&qt, t) - dot(&inst.alpha, t);
    let p_new = polytope::substitute_rows(&inst.p, map, cfg)?;
    QuadInstance::new(q_new, alpha_new, g_new, p_new)
}

/// Rewrites `inst` over a full-dimensional polytope by eliminating the
/// implicit equalities of `P`; the embedding recovers original coordinates.
pub fn drop_to_fulldim(inst: &QuadInstance, cfg: &Config) -> Result<(QuadInstance, AffineMap)> {
    let hull = polytope::affine_hull(&inst.p, cfg)?;
    if hull.embedding.is_identity() {
        return Ok((inst.clone(), hull.embedding));
    }
    let reduced = substitute_instance(inst, &hull.embedding, cfg)?;
    Ok((reduced, hull.embedding))
}

/// Canonical form of an instance: square-term counts, normalized right-hand
/// side, the polytope in canonical coordinates, and the map back.
#[derive(Debug, Clone)]
pub struct CanonicalSet {
    /// Number of `+w^2` coordinates.
    pub n_qp: usize,
    /// Number of `-x^2` coordinates.
    pub n_qm: usize,
    /// Number of pure linear coordinates.
    pub n_l: usize,
    /// Number of coordinates absent from the equation.
    pub n_o: usize,
    /// Right-hand side, always `>= 0`.
    pub g: f64,
    /// The polytope in canonical coordinates.
    pub p: HPolytope,
    /// Canonical coordinates back to the instance coordinates.
    pub to_original: AffineMap,
    /// True when the whole equation was negated to make `g >= 0`.
    pub flipped: bool,
    /// Magnitude factor between the two equations: the original residual at
    /// `to_original(c)` equals `(+-1) * eq_scale * residual(c)`.
    pub eq_scale: f64,
}

impl CanonicalSet {
    pub fn dim(&self) -> usize {
        self.n_qp + self.n_qm + self.n_l + self.n_o
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.n_qp, self.n_qm, self.n_l, self.n_o)
    }

    /// Left-hand side `sum w^2 - sum x^2 + sum y` at a canonical point.
    pub fn eval(&self, c: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.n_qp {
            v += c[i] * c[i];
        }
        for j in 0..self.n_qm {
            let x = c[self.n_qp + j];
            v -= x * x;
        }
        for k in 0..self.n_l {
            v += c[self.n_qp + self.n_qm + k];
        }
        v
    }

    pub fn residual(&self, c: &[f64]) -> f64 {
        self.eval(c) - self.g
    }
}

/// Reduces a full-dimensional instance to canonical form.
pub fn canonicalize(inst: &QuadInstance, cfg: &Config) -> Result<CanonicalSet> {
    let n = inst.dim();
    if n == 0 {
        return Ok(CanonicalSet {
            n_qp: 0,
            n_qm: 0,
            n_l: 0,
            n_o: 0,
            g: inst.g.max(-inst.g),
            p: inst.p.clone(),
            to_original: AffineMap::identity(0),
            flipped: inst.g < 0.0,
            eq_scale: 1.0,
        });
    }

    let (sigma, v) = densela::sym_eigen(&inst.q, cfg.sym_tol)?;
    // w = V x; the quadratic becomes sum sigma_i w_i^2 + (V alpha)' w = g
    let alpha_rot = v.matvec(&inst.alpha);
    let mut to_original = AffineMap::new(v.transpose(), vec![0.0; n]);

    let sig_scale = sigma.iter().fold(1.0f64, |m, s| m.max(s.abs()));
    let is_quad: Vec<bool> = sigma.iter().map(|s| s.abs() > cfg.eig_tol * sig_scale).collect();
    let lin_scale = alpha_rot.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    // inclusive comparison: coefficients exactly at threshold count as linear
    let is_lin: Vec<bool> = (0..n)
        .map(|i| !is_quad[i] && alpha_rot[i].abs() >= cfg.lin_tol * lin_scale)
        .collect();

    // complete squares: u_i = sqrt|s| w_i + sign(s) a_i / (2 sqrt|s|)
    let mut scale_diag = vec![1.0; n];
    let mut shift = vec![0.0; n];
    let mut g_cur = inst.g;
    for i in 0..n {
        if is_quad[i] {
            let s = sigma[i];
            let root = s.abs().sqrt();
            scale_diag[i] = root;
            shift[i] = s.signum() * alpha_rot[i] / (2.0 * root);
            g_cur += alpha_rot[i] * alpha_rot[i] / (4.0 * s);
        } else if is_lin[i] {
            // v_i = a_i u_i turns the coefficient into 1
            scale_diag[i] = alpha_rot[i];
        }
    }
    // inverse of u = D w + c is w = D^{-1}(u - c)
    let inv_diag: Vec<f64> = scale_diag.iter().map(|d| 1.0 / d).collect();
    let inv_shift: Vec<f64> = shift.iter().zip(&inv_diag).map(|(c, d)| -c * d).collect();
    to_original = to_original.compose(&AffineMap::new(Mat::diag(&inv_diag), inv_shift));

    let mut lin_coords: Vec<usize> = (0..n).filter(|&i| is_lin[i]).collect();
    let mut other_coords: Vec<usize> = (0..n).filter(|&i| !is_quad[i] && !is_lin[i]).collect();

    // optional compression of the linear block into a single coordinate
    if cfg.aggregate_linear && lin_coords.len() >= 2 {
        let k = lin_coords.len();
        let rk = (k as f64).sqrt();
        // Householder H with H (1/sqrt k) * ones = e_first
        let mut u = vec![0.0; k];
        for ui in u.iter_mut() {
            *ui = 1.0 / rk;
        }
        u[0] -= 1.0;
        let unorm2 = dot(&u, &u);
        let mut h_full = Mat::identity(n);
        for (a, &ca) in lin_coords.iter().enumerate() {
            for (b, &cb) in lin_coords.iter().enumerate() {
                let hab = if a == b { 1.0 } else { 0.0 } - 2.0 * u[a] * u[b] / unorm2;
                h_full.set(ca, cb, hab);
            }
        }
        // forward v' = H v, then v'' = sqrt(k) v'_first; inverse composes
        // H (involution) after dividing the first linear coordinate.
        let mut inv_scale = vec![1.0; n];
        inv_scale[lin_coords[0]] = 1.0 / rk;
        let step_inv =
            AffineMap::new(h_full.matmul(&Mat::diag(&inv_scale)), vec![0.0; n]);
        to_original = to_original.compose(&step_inv);
        other_coords.extend(lin_coords.iter().skip(1).copied());
        other_coords.sort_unstable();
        lin_coords.truncate(1);
    }

    // block permutation: (positive squares, negative squares, linear, rest),
    // quadratic blocks ordered by descending |eigenvalue|
    let mut pos: Vec<usize> = (0..n).filter(|&i| is_quad[i] && sigma[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| is_quad[i] && sigma[i] < 0.0).collect();
    pos.sort_by(|&a, &b| sigma[b].abs().partial_cmp(&sigma[a].abs()).unwrap().then(a.cmp(&b)));
    neg.sort_by(|&a, &b| sigma[b].abs().partial_cmp(&sigma[a].abs()).unwrap().then(a.cmp(&b)));
    let mut n_qp = pos.len();
    let mut n_qm = neg.len();
    let n_l = lin_coords.len();
    let n_o = other_coords.len();

    let order: Vec<usize> = pos
        .iter()
        .chain(neg.iter())
        .chain(lin_coords.iter())
        .chain(other_coords.iter())
        .copied()
        .collect();
    // canonical coordinate r equals old coordinate order[r]; the inverse map
    // takes canonical to old: old[order[r]] = canon[r]
    let perm_inv = Mat::from_fn(n, n, |old, canon| if order[canon] == old { 1.0 } else { 0.0 });
    to_original = to_original.compose(&AffineMap::new(perm_inv, vec![0.0; n]));

    // sign normalization
    let data_scale = inst.data_scale();
    let mut g = g_cur;
    if g.abs() <= cfg.zero_snap * (1.0 + data_scale) {
        g = 0.0;
    }
    let mut flipped = false;
    if g < 0.0 {
        flipped = true;
        g = -g;
        // negating the equation swaps the square blocks and negates the
        // linear coordinates; as a coordinate map: new = (old x-block,
        // old w-block, -y, z)
        let mut swap = Mat::zeros(n, n);
        for r in 0..n_qm {
            // new w-block (length n_qm) holds the old x-block
            swap.set(n_qp + r, r, 1.0); // old coord n_qp + r = new coord r
        }
        for r in 0..n_qp {
            swap.set(r, n_qm + r, 1.0);
        }
        for r in 0..n_l {
            let c = n_qp + n_qm + r;
            swap.set(c, c, -1.0);
        }
        for r in 0..n_o {
            let c = n_qp + n_qm + n_l + r;
            swap.set(c, c, 1.0);
        }
        to_original = to_original.compose(&AffineMap::new(swap, vec![0.0; n]));
        std::mem::swap(&mut n_qp, &mut n_qm);
    }

    // normalize runaway magnitudes: dividing the equation by s^2 and scaling
    // the square blocks by s and the linear block by s^2 keeps the +-1
    // coefficients while taming the numbers that square completion of a
    // near-degenerate eigenvalue produces
    let mut eq_scale = 1.0;
    if g > 100.0 {
        let s = g.sqrt();
        let mut d_inv = vec![s; n];
        for v in d_inv.iter_mut().skip(n_qp + n_qm).take(n_l) {
            *v = s * s;
        }
        to_original = to_original.compose(&AffineMap::new(Mat::diag(&d_inv), vec![0.0; n]));
        eq_scale = g;
        g = 1.0;
    }

    let p_canon = polytope::substitute_rows(&inst.p, &to_original, cfg)?;
    Ok(CanonicalSet { n_qp, n_qm, n_l, n_o, g, p: p_canon, to_original, flipped, eq_scale })
}
