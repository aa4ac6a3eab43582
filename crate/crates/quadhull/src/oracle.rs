//! Brute-force ground truth: samples the quadric surface inside the polytope
//! on coordinate grids and estimates linear maxima over the surface by
//! successive refinement. Everything here is independent of the hull
//! construction; acceptance tests compare against these numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affine::AffineMap;
use crate::config::Config;
use crate::densela::dot;
use crate::error::Result;
use crate::polytope;
use crate::reduction::{self, QuadInstance};

/// Points found on `{x'Qx + alpha'x = g}` inside the polytope.
#[derive(Debug, Clone)]
pub struct SurfaceSample {
    pub points: Vec<Vec<f64>>,
    pub residual_bound: f64,
    pub density: usize,
    pub seed: u64,
}

const MAX_EVALS: usize = 1_000_000;
const RESIDUAL_TOL: f64 = 1e-9;

/// Samples the surface inside `inst.p`, fixing every coordinate but one on a
/// jittered grid and solving the remaining scalar quadratic exactly.
///
/// Low-dimensional polytopes are handled by reducing to a full-dimensional
/// coordinate system first. Deterministic for fixed `(density, seed)`.
pub fn sample_surface(
    inst: &QuadInstance,
    density: usize,
    seed: u64,
    cfg: &Config,
) -> Result<SurfaceSample> {
    let (red, embed) = reduction::drop_to_fulldim(inst, cfg)?;
    let boxes = if red.dim() == 0 {
        (Vec::new(), Vec::new())
    } else {
        polytope::bounding_box(&red.p, cfg)?
    };
    let mut points = sample_reduced(&red, &boxes.0, &boxes.1, density, seed);
    // map to the original coordinates and re-validate there
    let mut out = Vec::with_capacity(points.len());
    let mut residual_bound = 0.0f64;
    let scale = inst.data_scale();
    for p in points.drain(..) {
        let x = embed.apply(&p);
        let res = inst.residual(&x).abs();
        if res <= RESIDUAL_TOL * scale && inst.p.contains(&x, RESIDUAL_TOL * scale) {
            residual_bound = residual_bound.max(res);
            out.push(x);
        }
    }
    Ok(SurfaceSample { points: out, residual_bound, density, seed })
}

/// Grid sampling of a full-dimensional instance inside an explicit box.
fn sample_reduced(
    inst: &QuadInstance,
    lo: &[f64],
    hi: &[f64],
    density: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let scale = inst.data_scale();
    let mut found = Vec::new();
    visit_surface_grid(inst, lo, hi, density, seed, &mut |x: &[f64]| {
        found.push(x.to_vec());
    });
    // drop coinciding points found from different axes (quantized key)
    let mut seen = std::collections::BTreeSet::new();
    let quant = 1e10 / scale.max(1.0);
    let mut unique: Vec<Vec<f64>> = Vec::with_capacity(found.len());
    for p in found {
        let key: Vec<i64> = p.iter().map(|v| (v * quant).round() as i64).collect();
        if seen.insert(key) {
            unique.push(p);
        }
    }
    unique
}

/// Walks the jittered grids along every dependent axis and calls `visit` for
/// each surface point found inside the polytope.
fn visit_surface_grid(
    inst: &QuadInstance,
    lo: &[f64],
    hi: &[f64],
    density: usize,
    seed: u64,
    visit: &mut dyn FnMut(&[f64]),
) {
    let n = inst.dim();
    let scale = inst.data_scale();
    let tol = RESIDUAL_TOL * scale;
    if n == 0 {
        if inst.g.abs() <= tol {
            visit(&[]);
        }
        return;
    }

    // clamp the grid so the total work stays bounded
    let mut d = density.max(2);
    loop {
        let per_axis = (d as f64).powi(n as i32 - 1) * n as f64;
        if per_axis <= MAX_EVALS as f64 || d <= 2 {
            break;
        }
        d -= d / 8 + 1;
    }

    for axis in 0..n {
        let depends = inst.alpha[axis] != 0.0
            || (0..n).any(|j| inst.q.get(axis, j) != 0.0 || inst.q.get(j, axis) != 0.0);
        if !depends && n > 1 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((axis as u64) << 32));
        let others: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
        let mut idx = vec![0usize; others.len()];
        loop {
            let mut x = vec![0.0; n];
            for (k, &j) in others.iter().enumerate() {
                let f = if d == 1 {
                    0.5
                } else {
                    (idx[k] as f64 + 0.35 + 0.3 * rng.gen::<f64>()) / d as f64
                };
                x[j] = lo[j] + f * (hi[j] - lo[j]);
            }
            // quadratic in the free coordinate
            let qa = inst.q.get(axis, axis);
            let mut qb = inst.alpha[axis];
            for &j in &others {
                qb += 2.0 * inst.q.get(axis, j) * x[j];
            }
            let mut qc = -inst.g;
            for &i in &others {
                qc += inst.alpha[i] * x[i];
                for &j in &others {
                    qc += inst.q.get(i, j) * x[i] * x[j];
                }
            }
            for root in scalar_quadratic_roots(qa, qb, qc, scale) {
                x[axis] = root;
                if inst.p.contains(&x, tol) && inst.residual(&x).abs() <= tol {
                    visit(&x);
                }
            }

            // advance the mixed-radix counter over the other coordinates
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < d {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }

}

fn scalar_quadratic_roots(qa: f64, qb: f64, qc: f64, scale: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    if qa.abs() <= 1e-14 * scale {
        if qb.abs() > 1e-14 * scale {
            roots.push(-qc / qb);
        }
        return roots;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return roots;
    }
    let sq = disc.sqrt();
    if qb == 0.0 {
        roots.push(sq / (2.0 * qa));
        roots.push(-sq / (2.0 * qa));
    } else {
        let q0 = -0.5 * (qb + qb.signum() * sq);
        roots.push(q0 / qa);
        if q0 != 0.0 {
            roots.push(qc / q0);
        }
    }
    roots
}

/// Result of the refinement search for `max c.x` over the surface.
#[derive(Debug, Clone)]
pub struct BruteMax {
    /// Best value found; `-inf` when no surface point was found.
    pub value: f64,
    pub point: Option<Vec<f64>>,
    /// Running maxima after each refinement round; nondecreasing.
    pub trace: Vec<f64>,
    pub empty: bool,
}

/// Estimates `max c.x` over the surface by density doubling plus local grid
/// zoom around the incumbent. The result is always a lower bound on the true
/// maximum.
pub fn brute_max(inst: &QuadInstance, c: &[f64], seed: u64, cfg: &Config) -> Result<BruteMax> {
    assert_eq!(c.len(), inst.dim());
    let (red, embed) = reduction::drop_to_fulldim(inst, cfg)?;
    // objective in reduced coordinates: c.(L u + t) = (L'c).u + c.t
    let c_red = red_objective(&embed, c);
    let offset = dot(c, &embed.t);

    if red.dim() == 0 {
        let scale = inst.data_scale();
        return Ok(if red.g.abs() <= RESIDUAL_TOL * scale {
            BruteMax { value: offset, point: Some(embed.t.clone()), trace: vec![offset], empty: false }
        } else {
            BruteMax { value: f64::NEG_INFINITY, point: None, trace: Vec::new(), empty: true }
        });
    }

    let (lo, hi) = polytope::bounding_box(&red.p, cfg)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::new();

    let mut density = 64usize;
    let mut prev: Option<f64> = None;
    for round in 0..6 {
        {
            let best_ref = &mut best;
            visit_surface_grid(&red, &lo, &hi, density, seed.wrapping_add(round), &mut |p| {
                let v = dot(&c_red, p) + offset;
                if best_ref.as_ref().map_or(true, |(bv, _)| v > *bv) {
                    *best_ref = Some((v, p.to_vec()));
                }
            });
        }
        if let Some((v, _)) = best {
            trace.push(v);
            if let Some(pv) = prev {
                if (v - pv).abs() <= 1e-4 * (1.0 + v.abs()) && round >= 1 {
                    break;
                }
            }
            prev = Some(v);
        }
        density *= 2;
    }

    if let Some((_, ref bp)) = best {
        // local zoom sharpens the incumbent without global cost
        let mut zlo = lo.clone();
        let mut zhi = hi.clone();
        let mut center = bp.clone();
        for round in 0..3 {
            for j in 0..red.dim() {
                let w = (zhi[j] - zlo[j]) * 0.1;
                zlo[j] = (center[j] - w / 2.0).max(lo[j]);
                zhi[j] = (center[j] + w / 2.0).min(hi[j]);
            }
            {
                let best_ref = &mut best;
                visit_surface_grid(&red, &zlo, &zhi, 64, seed.wrapping_add(100 + round), &mut |p| {
                    let v = dot(&c_red, p) + offset;
                    if best_ref.as_ref().map_or(true, |(bv, _)| v > *bv) {
                        *best_ref = Some((v, p.to_vec()));
                    }
                });
            }
            let (v, ref p) = *best.as_ref().unwrap();
            trace.push(v);
            center = p.clone();
        }
    }

    Ok(match best {
        Some((v, p)) => BruteMax { value: v, point: Some(embed.apply(&p)), trace, empty: false },
        None => BruteMax { value: f64::NEG_INFINITY, point: None, trace, empty: true },
    })
}

fn red_objective(embed: &AffineMap, c: &[f64]) -> Vec<f64> {
    embed.l.tr_matvec(c)
}

/// One row per sample: the coordinates then the absolute residual.
pub fn sample_to_csv(inst: &QuadInstance, sample: &SurfaceSample) -> String {
    let n = inst.dim();
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("residual\n");
    for p in &sample.points {
        for v in p {
            out.push_str(&format!("{:.17e},", v));
        }
        out.push_str(&format!("{:.17e}\n", inst.residual(p).abs()));
    }
    out
}
