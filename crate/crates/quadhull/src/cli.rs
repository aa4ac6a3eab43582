//! Command implementations behind the `quadhull` binary: instance loading,
//! hull building, optimization, verification, export and surface sampling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::densela::{dot, norm2, Mat};
use crate::error::{Error, Result};
use crate::hullcore::{self, HullRep};
use crate::oracle;
use crate::polytope::HPolytope;
use crate::reduction::QuadInstance;
use crate::socmodel::{self, ExportFormat, SocProgram};

/// On-disk instance: the quadratic equation and the polytope, with optional
/// name and tolerance overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub g: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub tolerances: Option<Config>,
}

impl InstanceFile {
    pub fn from_instance(inst: &QuadInstance, name: &str) -> InstanceFile {
        InstanceFile {
            n: inst.dim(),
            q: (0..inst.dim()).map(|i| inst.q.row_vec(i)).collect(),
            alpha: inst.alpha.clone(),
            g: inst.g,
            a: (0..inst.p.num_rows()).map(|i| inst.p.a.row_vec(i)).collect(),
            b: inst.p.b.clone(),
            name: Some(name.to_string()),
            tolerances: None,
        }
    }
}

/// Loads and validates an instance file; returns the instance and the
/// effective configuration (file overrides applied over `base`).
pub fn load_instance(path: &Path, base: &Config) -> Result<(QuadInstance, Config, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file: InstanceFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;

    let n = file.n;
    if file.q.len() != n
        || file.q.iter().any(|r| r.len() != n)
        || file.alpha.len() != n
        || file.a.iter().any(|r| r.len() != n)
        || file.a.len() != file.b.len()
    {
        return Err(Error::Parse(format!(
            "{}: dimensions are inconsistent with n = {n}",
            path.display()
        )));
    }
    let mut cfg = file.tolerances.unwrap_or(*base);
    cfg.aggregate_linear = cfg.aggregate_linear || base.aggregate_linear;

    let q = if n == 0 { Mat::zeros(0, 0) } else { Mat::from_rows(&file.q) };
    let a = if file.a.is_empty() { Mat::zeros(0, n) } else { Mat::from_rows(&file.a) };
    let inst = QuadInstance::checked(q, file.alpha, file.g, HPolytope::new(a, file.b), &cfg)?;
    let name = file
        .name
        .unwrap_or_else(|| path.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned()));
    Ok((inst, cfg, name))
}

/// Maps an error onto the documented process exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidInput(_) | Error::Io(_) => 1,
        Error::Infeasible(_) => 2,
        Error::BudgetExceeded(_) | Error::Capacity(_) => 3,
        Error::UnboundedPolytope => 4,
        Error::SolverFailure(_) | Error::Internal(_) => 1,
    }
}

/// Exit code used when `verify` finds violations.
pub const EXIT_VERIFY_FAILED: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactFormat {
    Json,
    Cbf,
    Txt,
}

impl std::str::FromStr for ArtifactFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ArtifactFormat::Json),
            "cbf" => Ok(ArtifactFormat::Cbf),
            "txt" | "human" => Ok(ArtifactFormat::Txt),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

fn build_program(inst: &QuadInstance, cfg: &Config) -> Result<(HullRep, SocProgram, Vec<String>)> {
    let (hull, report) = hullcore::build_hull(inst, cfg)?;
    let prog = socmodel::flatten(&hull)?;
    Ok((hull, prog, report.trace))
}

/// `build`: writes the flattened formulation and prints the classification
/// trace plus statistics.
pub fn cmd_build(
    instance: &Path,
    format: ArtifactFormat,
    out: Option<PathBuf>,
    cfg: &Config,
) -> Result<String> {
    let (inst, cfg, name) = load_instance(instance, cfg)?;
    let (_, prog, trace) = build_program(&inst, &cfg)?;
    let ext = match format {
        ArtifactFormat::Json => "hull.json",
        ArtifactFormat::Cbf => "cbf",
        ArtifactFormat::Txt => "txt",
    };
    let out_path = out.unwrap_or_else(|| instance.with_extension(ext));
    let payload = match format {
        ArtifactFormat::Json => serde_json::to_string_pretty(&prog)
            .map_err(|e| Error::Parse(format!("artifact serialization: {e}")))?,
        ArtifactFormat::Cbf => socmodel::export_text(&prog, ExportFormat::ConicBenchmark),
        ArtifactFormat::Txt => socmodel::export_text(&prog, ExportFormat::HumanReadable),
    };
    let mut f = std::fs::File::create(&out_path)?;
    f.write_all(payload.as_bytes())?;

    let mut report = String::new();
    report.push_str(&format!("instance {name}\n"));
    for line in &trace {
        report.push_str(line);
        report.push('\n');
    }
    report.push_str(&format!("{}\n", socmodel::stats(&prog)));
    report.push_str(&format!("artifact written to {}\n", out_path.display()));
    Ok(report)
}

pub fn load_artifact(path: &Path) -> Result<SocProgram> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let prog: SocProgram = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    prog.validate()?;
    Ok(prog)
}

/// `optimize`: maximizes a linear objective over the hull.
pub fn cmd_optimize(
    instance: &Path,
    objective: &[f64],
    per_leaf: bool,
    from_artifact: Option<&Path>,
    cfg: &Config,
) -> Result<String> {
    let (value, point) = match from_artifact {
        Some(artifact) => {
            if per_leaf {
                return Err(Error::InvalidInput(
                    "--per-leaf needs the hull tree; it cannot run from a flattened artifact".into(),
                ));
            }
            let (_, cfg, _) = load_instance(instance, cfg)?;
            let prog = load_artifact(artifact)?;
            socmodel::optimize(&prog, objective, &cfg)?
        }
        None => {
            let (inst, cfg, _) = load_instance(instance, cfg)?;
            if objective.len() != inst.dim() {
                return Err(Error::InvalidInput(format!(
                    "objective has {} entries, instance dimension is {}",
                    objective.len(),
                    inst.dim()
                )));
            }
            let (hull, prog, _) = build_program(&inst, &cfg)?;
            if per_leaf {
                socmodel::optimize_per_leaf(&hull, objective, &cfg)?
            } else {
                socmodel::optimize(&prog, objective, &cfg)?
            }
        }
    };
    let mut out = format!("value {:.12e}\n", value);
    out.push_str("point");
    for v in &point {
        out.push_str(&format!(" {:.12e}", v));
    }
    out.push('\n');
    Ok(out)
}

/// `verify`: memberships of surface samples plus support agreement against
/// the brute-force oracle. Returns `(report, pass)`.
pub fn cmd_verify(
    instance: &Path,
    objectives: usize,
    samples: usize,
    seed: u64,
    artifact: Option<&Path>,
    cfg: &Config,
) -> Result<(String, bool)> {
    let (inst, cfg, name) = load_instance(instance, cfg)?;
    let mut report = String::new();
    report.push_str(&format!(
        "verify {name}: objectives={objectives} samples={samples} seed={seed}\n"
    ));

    let build = match artifact {
        Some(path) => {
            let prog = load_artifact(path)?;
            report.push_str(&format!("using artifact {}\n", path.display()));
            Ok((None, prog))
        }
        None => match build_program(&inst, &cfg) {
            Ok((hull, prog, _)) => Ok((Some(hull), prog)),
            Err(e) => Err(e),
        },
    };

    let (hull, prog) = match build {
        Ok(v) => v,
        Err(Error::Infeasible(_)) => {
            // an empty surface has nothing to verify
            let sample = oracle::sample_surface(&inst, 60, seed, &cfg)?;
            if sample.points.is_empty() {
                report.push_str("surface is empty; nothing to verify\n");
                report.push_str("PASS (empty surface)\n");
                return Ok((report, true));
            }
            report.push_str(&format!(
                "FAIL invariant soundness: build reported an empty surface but the oracle found {} points\n",
                sample.points.len()
            ));
            return Ok((report, false));
        }
        Err(e) => return Err(e),
    };
    let _ = hull;

    let mut pass = true;

    // membership of oracle samples
    let mut density = 40usize;
    let mut sample = oracle::sample_surface(&inst, density, seed, &cfg)?;
    while sample.points.len() < samples && density < 5000 {
        density *= 2;
        sample = oracle::sample_surface(&inst, density, seed, &cfg)?;
    }
    let points: Vec<Vec<f64>> = sample.points.into_iter().take(samples).collect();
    if points.is_empty() {
        report.push_str("oracle found no surface points; membership skipped\n");
    } else {
        let results: Vec<Result<(bool, f64)>> = points
            .par_iter()
            .map(|p| socmodel::membership(&prog, p, 1e-6, &cfg))
            .collect();
        let mut worst = 0.0f64;
        let mut violations = 0usize;
        for r in results {
            let (member, v) = r?;
            worst = worst.max(v);
            if !member {
                violations += 1;
            }
        }
        report.push_str(&format!(
            "membership: {} samples, {} violations, max violation {:.3e}\n",
            points.len(),
            violations,
            worst
        ));
        if violations > 0 {
            report.push_str("FAIL invariant soundness: surface samples outside the hull\n");
            pass = false;
        }
    }

    // support agreement on random unit directions
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    let mut max_under = 0.0f64;
    for k in 0..objectives {
        let mut c: Vec<f64> = (0..inst.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = norm2(&c);
        if nrm <= 1e-12 {
            c = vec![1.0; inst.dim()];
        } else {
            for v in &mut c {
                *v /= nrm;
            }
        }
        let (hv, _) = socmodel::optimize(&prog, &c, &cfg)?;
        let bm = oracle::brute_max(&inst, &c, seed.wrapping_add(k as u64), &cfg)?;
        if bm.empty {
            report.push_str(&format!("objective {k}: oracle found no surface point\n"));
            continue;
        }
        let gap = (hv - bm.value).abs();
        let under = (bm.value - hv).max(0.0);
        max_gap = max_gap.max(gap);
        max_under = max_under.max(under);
        report.push_str(&format!(
            "objective {k}: hull {:.9e} oracle {:.9e} gap {:.3e}\n",
            hv, bm.value, gap
        ));
    }
    if objectives > 0 {
        report.push_str(&format!(
            "support agreement: max gap {:.3e}, max undershoot {:.3e}\n",
            max_gap, max_under
        ));
        if max_under > 1e-6 {
            report.push_str("FAIL invariant exactness: hull support below the oracle bound\n");
            pass = false;
        }
        if max_gap > 1e-3 {
            report.push_str("FAIL invariant agreement: hull and oracle differ beyond tolerance\n");
            pass = false;
        }
    }

    report.push_str(if pass { "PASS\n" } else { "FAIL\n" });
    Ok((report, pass))
}

/// `export`: writes the conic-benchmark or human-readable text form.
pub fn cmd_export(
    instance: &Path,
    format: ArtifactFormat,
    out: Option<PathBuf>,
    cfg: &Config,
) -> Result<String> {
    let (inst, cfg, _) = load_instance(instance, cfg)?;
    let (_, prog, _) = build_program(&inst, &cfg)?;
    let (payload, ext) = match format {
        ArtifactFormat::Cbf => (socmodel::export_text(&prog, ExportFormat::ConicBenchmark), "cbf"),
        ArtifactFormat::Txt | ArtifactFormat::Json => {
            (socmodel::export_text(&prog, ExportFormat::HumanReadable), "txt")
        }
    };
    let out_path = out.unwrap_or_else(|| instance.with_extension(ext));
    std::fs::write(&out_path, payload)?;
    Ok(format!("export written to {}\n", out_path.display()))
}

/// `stats`: builds and prints formulation statistics.
pub fn cmd_stats(instance: &Path, cfg: &Config) -> Result<String> {
    let (inst, cfg, name) = load_instance(instance, cfg)?;
    let (_, prog, _) = build_program(&inst, &cfg)?;
    Ok(format!("instance {name}\n{}\n", socmodel::stats(&prog)))
}

/// `sample-surface`: writes the oracle's point cloud as CSV.
pub fn cmd_sample_surface(
    instance: &Path,
    density: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<String> {
    let base = Config::default();
    let (inst, cfg, _) = load_instance(instance, &base)?;
    let sample = oracle::sample_surface(&inst, density, seed, &cfg)?;
    let csv = oracle::sample_to_csv(&inst, &sample);
    let out_path = out.unwrap_or_else(|| instance.with_extension("csv"));
    std::fs::write(&out_path, csv)?;
    Ok(format!(
        "{} samples written to {}\n",
        sample.points.len(),
        out_path.display()
    ))
}

/// Deterministic generator for the bundled instance corpus.
pub fn corpus_instances() -> Vec<(String, InstanceFile)> {
    let mut out = Vec::new();
    let file = |name: &str, q: Mat, alpha: Vec<f64>, g: f64, p: HPolytope| {
        let inst = QuadInstance::new(q, alpha, g, p).unwrap();
        (format!("{name}.json"), InstanceFile::from_instance(&inst, name))
    };

    out.push(file(
        "circle",
        Mat::identity(2),
        vec![0.0, 0.0],
        1.0,
        HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]),
    ));
    out.push(file(
        "hyperbola",
        Mat::diag(&[1.0, -1.0]),
        vec![0.0, 0.0],
        1.0,
        HPolytope::bounding(&[-2.0, -2.0], &[2.0, 2.0]),
    ));
    out.push(file(
        "hyperboloid1",
        Mat::diag(&[1.0, 1.0, -1.0]),
        vec![0.0; 3],
        1.0,
        HPolytope::bounding(&[-2.0; 3], &[2.0; 3]),
    ));
    out.push(file(
        "hyperboloid2",
        Mat::diag(&[1.0, -1.0, -1.0]),
        vec![0.0; 3],
        1.0,
        HPolytope::bounding(&[-2.0; 3], &[2.0; 3]),
    ));
    out.push(file(
        "degenerate_q0",
        Mat::zeros(2, 2),
        vec![1.0, 1.0],
        0.5,
        HPolytope::bounding(&[-1.0, -1.0], &[1.0, 1.0]),
    ));
    out.push(file(
        "lowdim",
        Mat::identity(2),
        vec![0.0, 0.0],
        0.625,
        HPolytope::bounding(&[0.0, 0.0], &[1.0, 1.0])
            .with_row(&[1.0, 1.0], 1.0)
            .with_row(&[-1.0, -1.0], -1.0),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
    for k in 0..20 {
        let n = if k % 5 < 3 { 2 } else { 3 };
        let mut q = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                q.set(i, j, v);
                q.set(j, i, v);
            }
        }
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut p = HPolytope::bounding(&vec![-1.5; n], &vec![1.5; n]);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
        for _ in 0..rng.gen_range(0..=3usize) {
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rhs = dot(&row, &x0) + rng.gen_range(0.2..1.0);
            p = p.with_row(&row, rhs);
        }
        // the surface passes through x0, so the instance is feasible
        let inst = QuadInstance::new(q, alpha, 0.0, p).unwrap();
        let g = inst.eval_quad(&x0);
        out.push(file(
            &format!("random_{k:02}"),
            inst.q.clone(),
            inst.alpha.clone(),
            g,
            inst.p.clone(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_loadable() {
        let a = corpus_instances();
        let b = corpus_instances();
        assert_eq!(a.len(), 26);
        for ((na, fa), (nb, fb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            assert_eq!(
                serde_json::to_string(fa).unwrap(),
                serde_json::to_string(fb).unwrap()
            );
        }
    }

    #[test]
    fn instance_round_trip_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("circle.json");
        let (_, file) = corpus_instances().into_iter().next().unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
        let (inst, _, name) = load_instance(&path, &Config::default()).unwrap();
        assert_eq!(name, "circle");
        assert_eq!(inst.dim(), 2);
        assert!((inst.g - 1.0).abs() == 0.0);
    }

    #[test]
    fn exit_codes_match_contract() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 1);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 2);
        assert_eq!(exit_code(&Error::BudgetExceeded("x".into())), 3);
        assert_eq!(exit_code(&Error::UnboundedPolytope), 4);
    }
}
