use std::path::{Path, PathBuf};

use convexreg::complexity::locate_t_star_with;
use convexreg::functions::{build_f_tilde, BumpPacking};
use convexreg::geometry::{grid_points, SlabPolytope};
use convexreg::harness::{rate_report, Experiment, ExperimentConfig, RegimeDescriptor, RiskCurve};
use convexreg::lse::{fit as lse_fit, RegressionProblem};
use serde_json::json;

use crate::config::{
    check_keys, key_values, load, lookup, CliError, ComplexityConfig, FitConfig, RatesConfig,
};

pub struct Context {
    pub output_dir: PathBuf,
    pub strict: bool,
}

pub enum Status {
    Done,
    Unconverged(String),
}

impl Context {
    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| CliError(format!("{}: {e}", self.output_dir.display())))?;
        Ok(self.output_dir.join(name))
    }

    fn finish(&self, unconverged: usize, what: &str) -> Status {
        if unconverged > 0 {
            eprintln!("warning: {unconverged} {what} did not converge");
            if self.strict {
                return Status::Unconverged(format!("{unconverged} {what} did not converge"));
            }
        }
        Status::Done
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

pub fn fit(ctx: &Context, config: &Path) -> Result<Status, CliError> {
    let cfg: FitConfig = load(config)?;
    cfg.solver.validate()?;
    let problem = RegressionProblem::new(cfg.design, cfg.responses, cfg.variant)?;
    let f = lse_fit(&problem, &cfg.solver);
    let out = ctx.path(&format!("{}.fit.json", stem(config)))?;
    write_json(
        &out,
        &json!({
            "points": problem.points(),
            "theta": f.theta,
            "subgradients": f.subgradients,
            "fitted_at_observations": f.fitted_at_observations(&problem),
            "diagnostics": f.diagnostics,
        }),
    )?;
    println!(
        "fit: n = {}, objective = {:.6e}, converged = {}, wrote {}",
        problem.len(),
        f.diagnostics.objective,
        f.diagnostics.converged,
        out.display()
    );
    Ok(ctx.finish(usize::from(!f.diagnostics.converged), "fit"))
}

pub fn construct(ctx: &Context, f_tilde: bool, params: &[String]) -> Result<Status, CliError> {
    let kv = key_values(params)?;
    if f_tilde {
        check_keys(&kv, &["k", "d"])?;
        let k: usize = lookup(&kv, "k", None)?;
        let d: usize = lookup(&kv, "d", None)?;
        if d == 0 {
            return Err(CliError("d must be positive".into()));
        }
        let ft = build_f_tilde(&SlabPolytope::unit_cube(d), k)?;
        let out = ctx.path(&format!("f_tilde_k{k}_d{d}.json"))?;
        write_json(
            &out,
            &json!({
                "k": k,
                "dim": d,
                "eta": ft.eta,
                "pieces": ft.function.pieces().len(),
                "function": ft.function,
                "anchors": ft.anchors,
            }),
        )?;
        println!(
            "f_tilde: k = {k}, d = {d}, {} affine pieces, wrote {}",
            ft.function.pieces().len(),
            out.display()
        );
    } else {
        check_keys(&kv, &["d", "delta", "count", "seed"])?;
        let d: usize = lookup(&kv, "d", None)?;
        let delta: f64 = lookup(&kv, "delta", None)?;
        let count: usize = lookup(&kv, "count", Some(8))?;
        let seed: u64 = lookup(&kv, "seed", Some(0))?;
        if d == 0 {
            return Err(CliError("d must be positive".into()));
        }
        let grid = grid_points(&SlabPolytope::unit_cube(d), delta)?;
        let packing = BumpPacking::varshamov_gilbert(grid, count, seed)?;
        let mut min_distance = f64::INFINITY;
        for i in 0..packing.len() {
            for j in 0..i {
                min_distance = min_distance.min(packing.packing_distance(i, j)?);
            }
        }
        let codewords: Vec<String> = packing
            .codewords()
            .iter()
            .map(|c| c.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect();
        let out = ctx.path(&format!("packing_d{d}_delta{delta}_seed{seed}.json"))?;
        write_json(
            &out,
            &json!({
                "dim": d,
                "delta": delta,
                "grid": packing.grid().points,
                "coefficient": packing.coefficient(),
                "codewords": codewords,
                "min_distance": if min_distance.is_finite() { Some(min_distance) } else { None },
            }),
        )?;
        println!(
            "packing: {} members on {} grid points, wrote {}",
            packing.len(),
            packing.grid().n(),
            out.display()
        );
    }
    Ok(Status::Done)
}

pub fn experiment(ctx: &Context, config: &Path) -> Result<Status, CliError> {
    let cfg: ExperimentConfig = load(config)?;
    let out = match &cfg.output_path {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => ctx.path(&p.to_string_lossy())?,
        None => ctx.path(&format!("{}.csv", stem(config)))?,
    };
    let exp = Experiment::new(cfg)?;
    let curve = exp.run_with(|row| {
        eprintln!(
            "n = {:>6}  risk = {:.4e} ± {:.1e}  Lfrak = {:.4e}  failures = {}",
            row.n, row.mean_risk, row.stderr, row.mean_lfrak, row.failures
        );
    })?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    curve.save_csv(&out)?;
    println!(
        "experiment: {} rows, wrote {}",
        curve.rows.len(),
        out.display()
    );
    let failures = curve.rows.iter().map(|r| r.failures).sum();
    Ok(ctx.finish(failures, "replicate fits"))
}

pub fn complexity(ctx: &Context, config: &Path) -> Result<Status, CliError> {
    let cfg: ComplexityConfig = load(config)?;
    cfg.variant.validate()?;
    cfg.solver.validate()?;
    let (domain, design) = cfg.design.build()?;
    let truth = cfg.truth.build(&domain)?;
    let center: Vec<f64> = design.iter().map(|x| truth.eval(x)).collect();
    let radii = cfg.radii(design.len(), domain.dim(), &center);
    let locate = |radii: &[f64], seed: u64| {
        locate_t_star_with(
            &design,
            &center,
            cfg.sigma,
            radii,
            cfg.mc_reps,
            seed,
            cfg.variant,
            &cfg.solver,
        )
    };
    let mut est = locate(&radii, cfg.seed)?;
    let mut failures: usize = est.h_values.iter().map(|h| h.solver_failures).sum();
    if let Some(count) = cfg.refine_count.filter(|&c| c >= 2) {
        est = locate(&est.refined_grid(count), cfg.seed.wrapping_add(1))?;
        failures += est
            .h_values
            .iter()
            .map(|h| h.solver_failures)
            .sum::<usize>();
    }
    let name = cfg.output_stem.clone().unwrap_or_else(|| stem(config));
    let csv = ctx.path(&format!("{name}_complexity.csv"))?;
    est.save_csv(&csv)?;
    let summary = ctx.path(&format!("{name}_complexity.json"))?;
    write_json(&summary, &serde_json::to_value(&est)?)?;
    println!(
        "complexity: t_star = {:.6e} (flat region {:.4e}..{:.4e}{}), wrote {}",
        est.t_star,
        est.flat_region.0,
        est.flat_region.1,
        if est.beyond_grid {
            ", at the end of the grid"
        } else {
            ""
        },
        csv.display()
    );
    Ok(ctx.finish(failures, "localized solves"))
}

pub fn rates(ctx: &Context, config: &Path) -> Result<Status, CliError> {
    let cfg: RatesConfig = load(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut curves = Vec::new();
    for spec in cfg.curves {
        let path = if spec.csv.is_absolute() {
            spec.csv.clone()
        } else {
            base.join(&spec.csv)
        };
        let curve =
            RiskCurve::load_csv(&path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
        curves.push((
            curve,
            RegimeDescriptor {
                label: spec.label,
                dim: spec.dim,
                regime: spec.regime,
            },
        ));
    }
    let table = rate_report(&curves);
    let out = ctx.path("rates.csv")?;
    table.save_csv(&out)?;
    for e in &table.entries {
        let fitted = match (e.fitted_slope, e.stderr) {
            (Some(s), Some(se)) => format!("{s:.3} ± {se:.3}"),
            _ => "unavailable".into(),
        };
        println!(
            "{:<24} d={} theory {:.3}  fitted {fitted}{}",
            e.label,
            e.dim,
            e.theoretical,
            if e.flagged { "  FLAGGED" } else { "" }
        );
    }
    println!("wrote {}", out.display());
    Ok(Status::Done)
}
