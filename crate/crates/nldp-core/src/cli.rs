//! Command-line driver: load a problem config, dispatch an operation,
//! write CSV results plus a JSON run manifest.
//!
//! Output discipline: results are fully computed before anything is
//! written, so a failing run leaves no partial CSV behind. Floats render
//! with 17 significant digits so files round-trip bit-exactly. Exit codes:
//! 0 success, 2 validation error, 3 simulation error, 4 check failed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{FieldConfig, ProblemConfig, VerifySection};
use crate::error::{Error, Result};
use crate::estimate::{
    alpha_decay_profile, check_prop_2_3, check_resolvent_identity, exit_time_scaling,
    small_ball_kato_decay, solve_dirichlet, Prop23Params, ResolventIdentityParams,
};
use crate::oracle::{compare_with_oracle, dirichlet_oracle};
use crate::problem::{validate_problem, ProblemSpec};
use crate::sim::{run_until_exit_traced, RngStream, SimConfig, TraceRow};
use crate::stats::IdentityReport;

#[derive(Parser)]
#[command(
    name = "nldp",
    version,
    about = "Monte Carlo and finite-difference solvers for exterior-value problems of jump-diffusions"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for path simulation; 0 picks the machine default.
    /// Results are identical for every value. Env: NLDP_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the exterior-value solution at the configured points.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Paths per point; overrides the config.
        #[arg(long)]
        paths: Option<u64>,
        /// Base time step; overrides the config.
        #[arg(long)]
        dt: Option<f64>,
        /// Also write a single-path debug trace CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a statistical identity or asymptotics check.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        which: WhichCheck,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Discount rate for the identity checks; overrides the config.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Solve the problem on a finite-difference grid.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Target mesh width.
        #[arg(long)]
        h: f64,
    },
    /// Monte Carlo vs grid solution at the configured points.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum WhichCheck {
    Prop23,
    ResolventIdentity,
    ExitScaling,
    KatoDecay,
    AlphaDecay,
}

impl WhichCheck {
    fn name(self) -> &'static str {
        match self {
            WhichCheck::Prop23 => "prop23",
            WhichCheck::ResolventIdentity => "resolvent_identity",
            WhichCheck::ExitScaling => "exit_scaling",
            WhichCheck::KatoDecay => "kato_decay",
            WhichCheck::AlphaDecay => "alpha_decay",
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let category = match e.exit_code() {
                2 => "validation",
                4 => "check",
                _ => "simulation",
            };
            eprintln!("error[{category}]: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let workers = cli
        .workers
        .or_else(|| {
            std::env::var("NLDP_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if workers == 0 {
        return dispatch(cli.command);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Solve {
            config,
            out,
            seed,
            paths,
            dt,
            trace,
        } => cmd_solve(&config, &out, seed, paths, dt, trace.as_deref()),
        Command::Verify {
            config,
            which,
            out,
            seed,
            paths,
            dt,
            alpha,
        } => cmd_verify(&config, which, &out, seed, paths, dt, alpha),
        Command::Oracle { config, out, h } => cmd_oracle(&config, &out, h),
        Command::Compare {
            config,
            out,
            h,
            seed,
            paths,
            dt,
        } => cmd_compare(&config, &out, h, seed, paths, dt),
    }
}

/// Shared per-run context: parsed config, built problem, effective
/// parameters, and the manifest skeleton.
struct RunContext {
    cfg: ProblemConfig,
    spec: ProblemSpec,
    sim: SimConfig,
    seed: u64,
    n_paths: u64,
    manifest: RunManifest,
    started: Instant,
}

impl RunContext {
    fn prepare(
        operation: &str,
        config_path: &Path,
        seed: Option<u64>,
        paths: Option<u64>,
        dt: Option<f64>,
    ) -> Result<RunContext> {
        let raw = std::fs::read(config_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
        let cfg = ProblemConfig::parse(
            std::str::from_utf8(&raw)
                .map_err(|e| Error::Config(format!("config is not UTF-8: {e}")))?,
        )?;
        let spec = cfg.build_problem()?;
        let mut sim = cfg.build_sim()?;
        if let Some(dt) = dt {
            sim.dt_base = dt;
            sim.check()?;
        }
        let seed = seed.or(cfg.master_seed).unwrap_or(0);
        let n_paths = paths.or(cfg.n_paths).unwrap_or(10_000);
        if n_paths < 2 {
            return Err(Error::Precondition("need at least 2 paths".into()));
        }

        // probe the coefficient fields before spending simulation time
        let report = validate_problem(&spec, 200, seed ^ 0x5eed);
        for issue in &report.issues {
            eprintln!("validate: {issue}");
        }
        report.ensure()?;

        let digest = Sha256::digest(&raw);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        let mut params = BTreeMap::new();
        params.insert("dt_base".into(), serde_json::json!(sim.dt_base));
        params.insert("n_paths".into(), serde_json::json!(n_paths));
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            operation: operation.into(),
            config_path: config_path.display().to_string(),
            config_sha256: hex,
            master_seed: seed,
            params,
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        };
        Ok(RunContext {
            cfg,
            spec,
            sim,
            seed,
            n_paths,
            manifest,
            started: Instant::now(),
        })
    }

    fn finish(mut self, out: &Path, body: String, summary: serde_json::Value) -> Result<()> {
        self.manifest.outputs.push(out.display().to_string());
        self.manifest.summary = summary;
        self.manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        std::fs::write(out, body)?;
        let manifest_path = manifest_path_for(out);
        std::fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&self.manifest)
                .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?,
        )?;
        Ok(())
    }
}

/// Reproducibility record written next to every output file.
#[derive(Serialize)]
pub struct RunManifest {
    pub version: String,
    pub operation: String,
    pub config_path: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// 17 significant digits: enough for a bit-exact f64 round trip.
fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn point_header(dim: usize) -> String {
    (1..=dim).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",")
}

fn point_fields(point: &[f64]) -> String {
    point.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(",")
}

fn cmd_solve(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    paths: Option<u64>,
    dt: Option<f64>,
    trace: Option<&Path>,
) -> Result<()> {
    let mut ctx = RunContext::prepare("solve", config_path, seed, paths, dt)?;
    let points = ctx.cfg.require_points()?.to_vec();
    let solves = solve_dirichlet(&ctx.spec, &points, ctx.n_paths, &ctx.sim, ctx.seed)?;

    let dim = ctx.spec.dim();
    let mut body = format!(
        "point_id,{},mean,stderr,ci_lo,ci_hi,mean_exit_time,mean_jumps,nonexit_count\n",
        point_header(dim)
    );
    for (id, s) in solves.iter().enumerate() {
        let e = &s.estimate;
        let (lo, hi) = e.ci95;
        body.push_str(&format!(
            "{id},{},{},{},{},{},{},{},{}\n",
            point_fields(&s.point),
            fmt_f(e.mean),
            fmt_f(e.stderr),
            fmt_f(lo),
            fmt_f(hi),
            fmt_f(e.aux["mean_exit_time"]),
            fmt_f(e.aux["mean_jumps"]),
            e.aux["nonexit_count"] as u64,
        ));
    }

    if let Some(trace_path) = trace {
        let trace_body = trace_one_path(&ctx.spec, &points[0], &ctx.sim, ctx.seed)?;
        std::fs::write(trace_path, trace_body)?;
        ctx.manifest
            .outputs
            .push(trace_path.display().to_string());
    }

    let worst_stderr = solves
        .iter()
        .map(|s| s.estimate.stderr)
        .fold(0.0f64, f64::max);
    let summary = serde_json::json!({
        "points": solves.len(),
        "max_stderr": worst_stderr,
        "boundary_jump_fraction": solves
            .iter()
            .map(|s| s.estimate.aux["boundary_jump_fraction"])
            .fold(0.0f64, f64::max),
    });
    ctx.finish(out, body, summary)?;
    println!("solve: {} points -> {}", points.len(), out.display());
    Ok(())
}

/// Debug trace of the first path of the first point.
fn trace_one_path(spec: &ProblemSpec, x0: &[f64], sim: &SimConfig, seed: u64) -> Result<String> {
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut rng = RngStream::new(seed, 0);
    run_until_exit_traced(spec, x0, sim, &mut rng, Some(&mut rows))?;
    let dim = spec.dim();
    let mut body = format!("step,t,{},hazard_accum,event\n", point_header(dim));
    for row in rows {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step,
            fmt_f(row.time),
            point_fields(&row.position),
            fmt_f(row.hazard_accum),
            row.event,
        ));
    }
    Ok(body)
}

fn identity_csv(dim: usize, reports: &[IdentityReport]) -> String {
    let mut body = format!(
        "point_id,{},lhs_mean,lhs_stderr,rhs_mean,rhs_stderr,z_score,pass\n",
        point_header(dim)
    );
    for (id, r) in reports.iter().enumerate() {
        body.push_str(&format!(
            "{id},{},{},{},{},{},{},{}\n",
            point_fields(&r.point),
            fmt_f(r.lhs.mean),
            fmt_f(r.lhs.stderr),
            fmt_f(r.rhs.mean),
            fmt_f(r.rhs.stderr),
            fmt_f(r.z_score),
            r.pass,
        ));
    }
    body
}

fn identity_summary(reports: &[IdentityReport]) -> (bool, serde_json::Value) {
    let all_pass = reports.iter().all(|r| r.pass);
    let checks: Vec<_> = reports
        .iter()
        .map(|r| {
            serde_json::json!({
                "point": r.point,
                "z_score": r.z_score,
                "pass": r.pass,
            })
        })
        .collect();
    (
        all_pass,
        serde_json::json!({"all_pass": all_pass, "checks": checks}),
    )
}

/// Global sup bound derivable from the expression alone, for fields that a
/// free-roaming path may evaluate anywhere.
fn global_sup(f: &FieldConfig) -> Option<f64> {
    match f {
        FieldConfig::Constant { value } => Some(value.abs()),
        FieldConfig::IndicatorBox { .. } => Some(1.0),
        _ => None,
    }
}

fn cmd_verify(
    config_path: &Path,
    which: WhichCheck,
    out: &Path,
    seed: Option<u64>,
    paths: Option<u64>,
    dt: Option<f64>,
    alpha: Option<f64>,
) -> Result<()> {
    let ctx = RunContext::prepare(&format!("verify_{}", which.name()), config_path, seed, paths, dt)?;
    let verify: VerifySection = ctx.cfg.verify_section();
    let alpha = alpha.unwrap_or(verify.alpha);
    let dim = ctx.spec.dim();

    match which {
        WhichCheck::Prop23 => {
            let points = ctx.cfg.require_points()?.to_vec();
            let phi_sup = verify
                .phi_sup
                .or(ctx.spec.boundary.sup_bound)
                .ok_or_else(|| {
                    Error::Config("prop23 needs a sup bound for phi (verify.phi_sup)".into())
                })?;
            let params = Prop23Params {
                alpha,
                phi_sup,
                target_stderr: verify.target_stderr,
                z_threshold: verify.z_threshold,
            };
            let reports =
                check_prop_2_3(&ctx.spec, &params, &points, ctx.n_paths, &ctx.sim, ctx.seed)?;
            let body = identity_csv(dim, &reports);
            let (all_pass, summary) = identity_summary(&reports);
            for r in &reports {
                println!(
                    "prop23 {:?}: lhs {:.6} rhs {:.6} z {:.3} {}",
                    r.point,
                    r.lhs.mean,
                    r.rhs.mean,
                    r.z_score,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            ctx.finish(out, body, summary)?;
            if !all_pass {
                return Err(Error::CheckFailed("prop23 z-score gate".into()));
            }
        }
        WhichCheck::ResolventIdentity => {
            let points = ctx.cfg.require_points()?.to_vec();
            let f_cfg = ctx.cfg.f.clone().ok_or_else(|| {
                Error::Config("resolvent_identity needs an integrand \"f\" in the config".into())
            })?;
            let f = f_cfg.build(dim)?;
            let sup_f = verify.sup_f.or_else(|| global_sup(&f_cfg)).ok_or_else(|| {
                Error::Config("resolvent_identity needs a global bound (verify.sup_f)".into())
            })?;
            let params = ResolventIdentityParams {
                alpha,
                sup_f,
                target_stderr: verify.target_stderr,
                z_threshold: verify.z_threshold,
            };
            let reports = check_resolvent_identity(
                &ctx.spec,
                f.as_ref(),
                &params,
                &points,
                ctx.n_paths,
                &ctx.sim,
                ctx.seed,
            )?;
            let body = identity_csv(dim, &reports);
            let (all_pass, summary) = identity_summary(&reports);
            for r in &reports {
                println!(
                    "resolvent identity {:?}: lhs {:.6} rhs {:.6} z {:.3} {}",
                    r.point,
                    r.lhs.mean,
                    r.rhs.mean,
                    r.z_score,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
            ctx.finish(out, body, summary)?;
            if !all_pass {
                return Err(Error::CheckFailed("resolvent identity z-score gate".into()));
            }
        }
        WhichCheck::ExitScaling => {
            let (lo, hi) = ctx.spec.domain.bounding_box();
            let center_default: Vec<f64> =
                lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
            let center = verify
                .probes
                .as_ref()
                .and_then(|p| p.first().cloned())
                .or_else(|| ctx.cfg.points.as_ref().and_then(|p| p.first().cloned()))
                .unwrap_or(center_default);
            let report = exit_time_scaling(
                &ctx.spec,
                &center,
                &verify.radii,
                ctx.n_paths,
                &ctx.sim,
                ctx.seed,
            )?;
            let mut body = String::from("radius,mean_exit_time,stderr,dt_base\n");
            for row in &report.rows {
                body.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f(row.radius),
                    fmt_f(row.estimate.mean),
                    fmt_f(row.estimate.stderr),
                    fmt_f(row.dt_used),
                ));
            }
            let pass = report.log_slope >= 1.9 && report.log_slope <= 2.1;
            println!(
                "exit scaling: slope {:.4} {}",
                report.log_slope,
                if pass { "pass" } else { "FAIL" }
            );
            let summary = serde_json::json!({
                "all_pass": pass,
                "log_slope": report.log_slope,
                "center": report.center,
            });
            ctx.finish(out, body, summary)?;
            if !pass {
                return Err(Error::CheckFailed(format!(
                    "exit-time log-log slope {:.4} outside [1.9, 2.1]",
                    report.log_slope
                )));
            }
        }
        WhichCheck::KatoDecay => {
            let (lo, hi) = ctx.spec.domain.bounding_box();
            let center_default: Vec<f64> =
                lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
            let probes = verify
                .probes
                .clone()
                .or_else(|| ctx.cfg.points.clone())
                .unwrap_or_else(|| vec![center_default]);
            let mut radii = verify.radii.clone();
            radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let rows = small_ball_kato_decay(
                &ctx.spec,
                &probes,
                &radii,
                ctx.n_paths,
                &ctx.sim,
                ctx.seed,
            )?;
            let mut body = String::from("radius,probe_id,mean,stderr\n");
            for row in &rows {
                for (pid, est) in row.per_probe.iter().enumerate() {
                    body.push_str(&format!(
                        "{},{pid},{},{}\n",
                        fmt_f(row.radius),
                        fmt_f(est.mean),
                        fmt_f(est.stderr),
                    ));
                }
            }
            // gate: profile shrinks with the ball, uniformly over probes
            let sups: Vec<f64> = rows.iter().map(|r| r.sup_mean).collect();
            let monotone = sups.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            let shrinks = match (sups.first(), sups.last()) {
                (Some(big), Some(small)) => *small <= 0.5 * *big + 1e-12,
                _ => false,
            };
            let pass = monotone && shrinks;
            println!(
                "kato decay: sup profile {:?} {}",
                sups,
                if pass { "pass" } else { "FAIL" }
            );
            let summary = serde_json::json!({
                "all_pass": pass,
                "radii": radii,
                "sup_means": sups,
            });
            ctx.finish(out, body, summary)?;
            if !pass {
                return Err(Error::CheckFailed(
                    "small-ball profile failed to shrink with the radius".into(),
                ));
            }
        }
        WhichCheck::AlphaDecay => {
            let points = ctx.cfg.require_points()?.to_vec();
            let report = alpha_decay_profile(
                &ctx.spec,
                &points,
                &verify.alphas,
                ctx.n_paths,
                &ctx.sim,
                ctx.seed,
            )?;
            let mut body = String::from("alpha,sup_mean,at_or_below_half\n");
            for (a, s) in report.alphas.iter().zip(&report.sup_means) {
                body.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f(*a),
                    fmt_f(*s),
                    *s <= 0.5,
                ));
            }
            let pass = report.first_at_or_below_half.is_some();
            match report.first_at_or_below_half {
                Some(a) => println!("alpha decay: sup falls to 1/2 at alpha = {a}"),
                None => println!("alpha decay: sup never reached 1/2 (FAIL)"),
            }
            let summary = serde_json::json!({
                "all_pass": pass,
                "first_at_or_below_half": report.first_at_or_below_half,
                "sup_means": report.sup_means,
            });
            ctx.finish(out, body, summary)?;
            if !pass {
                return Err(Error::CheckFailed(
                    "discounted exit sup never fell to 1/2 on the alpha grid".into(),
                ));
            }
        }
    }
    Ok(())
}

fn cmd_oracle(config_path: &Path, out: &Path, h: f64) -> Result<()> {
    let ctx = RunContext::prepare("oracle", config_path, None, None, None)?;
    let sol = dirichlet_oracle(&ctx.spec, h)?;
    let dim = ctx.spec.dim();
    let mut body = format!("{},value\n", point_header(dim));
    let mut x = vec![0.0; dim];
    for flat in 0..sol.grid().n_nodes() {
        sol.grid().position(flat, &mut x);
        body.push_str(&format!(
            "{},{}\n",
            point_fields(&x),
            fmt_f(sol.node_values()[flat])
        ));
    }
    let summary = serde_json::json!({
        "h": h,
        "n_interior": sol.aux["n_interior"],
        "residual": sol.residual,
        "m_matrix_ok": sol.diagnostics.m_matrix_ok,
        "upwind_nodes": sol.diagnostics.upwind_nodes,
        "snapped_atoms": sol.diagnostics.snapped_atoms,
    });
    ctx.finish(out, body, summary)?;
    println!(
        "oracle: {} unknowns, residual {:.3e} -> {}",
        sol.aux["n_interior"], sol.residual, out.display()
    );
    Ok(())
}

fn cmd_compare(
    config_path: &Path,
    out: &Path,
    h: f64,
    seed: Option<u64>,
    paths: Option<u64>,
    dt: Option<f64>,
) -> Result<()> {
    let ctx = RunContext::prepare("compare", config_path, seed, paths, dt)?;
    let points = ctx.cfg.require_points()?.to_vec();
    let solves = solve_dirichlet(&ctx.spec, &points, ctx.n_paths, &ctx.sim, ctx.seed)?;
    let fine = dirichlet_oracle(&ctx.spec, h)?;
    let coarse = dirichlet_oracle(&ctx.spec, 2.0 * h)?;
    let rows = compare_with_oracle(&solves, &fine, Some(&coarse))?;

    let dim = ctx.spec.dim();
    let mut body = format!(
        "point_id,{},mc_mean,mc_stderr,oracle_value,gap,tolerance,pass\n",
        point_header(dim)
    );
    for (id, r) in rows.iter().enumerate() {
        body.push_str(&format!(
            "{id},{},{},{},{},{},{},{}\n",
            point_fields(&r.point),
            fmt_f(r.mc_mean),
            fmt_f(r.mc_stderr),
            fmt_f(r.oracle_value),
            fmt_f(r.gap),
            fmt_f(r.tolerance),
            r.pass,
        ));
    }
    let all_pass = rows.iter().all(|r| r.pass);
    for r in &rows {
        println!(
            "compare {:?}: mc {:.6} oracle {:.6} gap {:.2e} tol {:.2e} {}",
            r.point,
            r.mc_mean,
            r.oracle_value,
            r.gap,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let summary = serde_json::json!({
        "all_pass": all_pass,
        "h": h,
        "points": rows.len(),
    });
    ctx.finish(out, body, summary)?;
    if !all_pass {
        return Err(Error::CheckFailed(
            "Monte Carlo and grid solutions disagree beyond tolerance".into(),
        ));
    }
    Ok(())
}
