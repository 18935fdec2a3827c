//! Batch front-end for the superlens experiments: lens design reports, loss
//! sweeps, resonance probes, and FEM↔exact cross-validation, emitting CSV
//! and JSON for any plotting tool.
//!
//! Subcommands: `design`, `sweep`, `crossvalidate`, `resonance`. Exit codes:
//! 0 success, 1 numerical failure, 2 configuration error. Log verbosity via
//! the `CMLENS_LOG` environment variable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use num_complex::Complex64;
use serde::Deserialize;

use cmlens::fem2d::{
    assemble_and_solve, build_mesh, l2_difference_sq, ring_trace_modes, weighted_gradient_energy,
    FemLoad,
};
use cmlens::lens_design::{
    build_effective_medium, build_medium, complementarity_residual, object_ellipticity, LensSpec,
    ObjectSpec,
};
use cmlens::radial_solver::{energy, solve_field, wp1_screen, RingSource};
use cmlens::singularity::{desingularize, jump_norms, reflect_solution};

#[derive(Parser)]
#[command(name = "cmlens", about = "Complementary-media superlens experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the δ sweep (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print radii, the layer table and the complementarity residuals
    Design(CommonArgs),
    /// Run the loss sweep and emit error norms, energies and jump norms
    Sweep(CommonArgs),
    /// Compare the FEM solution against the exact mode-matched solver
    Crossvalidate(CommonArgs),
    /// Probe localized resonance: energies and de-singularized norms per δ
    Resonance(CommonArgs),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceModeConfig {
    n: i64,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceConfig {
    radius: f64,
    modes: Vec<SourceModeConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FemConfig {
    h: f64,
    #[serde(default = "default_c_mesh")]
    c_mesh: f64,
}

fn default_c_mesh() -> f64 {
    1.0
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "snake_case")]
enum SolverKind {
    Radial,
    Fem,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    lens: LensSpec,
    solver: SolverKind,
    sweep: Vec<f64>,
    source: SourceConfig,
    observe_radius: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    fem: Option<FemConfig>,
    #[serde(default)]
    truncation: Option<u32>,
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(1),
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn num_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(config_err)?;
    cfg.lens.validate().map_err(config_err)?;
    if cfg.sweep.is_empty() {
        return Err(CliError::Config("sweep list is empty".into()));
    }
    if !cfg.sweep.windows(2).all(|w| w[1] < w[0]) {
        return Err(CliError::Config(
            "sweep values must be strictly decreasing".into(),
        ));
    }
    if cfg.solver == SolverKind::Fem && cfg.fem.is_none() {
        return Err(CliError::Config(
            "solver \"fem\" requires the \"fem\" section".into(),
        ));
    }
    Ok(cfg)
}

fn ring_source(cfg: &ExperimentConfig) -> RingSource {
    RingSource {
        radius: cfg.source.radius,
        amplitudes: cfg
            .source
            .modes
            .iter()
            .map(|m| (m.n, Complex64::new(m.re, m.im)))
            .collect(),
    }
}

fn out_dir(args: &CommonArgs) -> Result<PathBuf, CliError> {
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

/// Fixed parameter-tuple prefix carried by every CSV row.
fn param_prefix(cfg: &ExperimentConfig) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        fnum(cfg.lens.m),
        fnum(cfg.lens.r0),
        fnum(cfg.lens.alpha),
        cfg.lens.d,
        fnum(cfg.lens.k),
        fnum(cfg.source.radius),
        fnum(cfg.observe_radius),
        cfg.seed,
    )
}

const PARAM_HEADER: &str = "m,r0,alpha,d,k,r_s,observe_radius,seed";

fn install_pool(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(config_err)?;
    }
    Ok(())
}

fn cmd_design(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let spec = &cfg.lens;
    let radii = spec.radii().map_err(config_err)?;
    let medium = build_medium(spec).map_err(config_err)?;
    println!("lens design (m = {}, r0 = {}, alpha = {}, d = {})", spec.m, spec.r0, spec.alpha, spec.d);
    println!(
        "radii: r1 = {:.12}, r2 = {:.12}, r3 = {:.12}, r* = {:.12} (beta = {:.12})",
        radii.r1, radii.r2, radii.r3, radii.r_star, radii.beta
    );
    println!("layers (annulus, a_r, a_t, sigma, loss):");
    for l in &medium.layers {
        println!(
            "  ({:.6}, {:.6}]: a_r = {:.6}·r^{:.3}, a_t = {:.6}·r^{:.3}, sigma = {:.6}·r^{:.3}, s = {:.6}{:+.6}i",
            l.r_in, l.r_out, l.a_r.c, l.a_r.p, l.a_t.c, l.a_t.p, l.sigma.c, l.sigma.p, l.s.re, l.s.im
        );
    }
    let lambda = object_ellipticity(spec).map_err(config_err)?;
    println!("object ellipticity bound (64x64 polar sampling): lambda = {lambda:.6}");
    let rep = complementarity_residual(spec, 200, cfg.seed).map_err(num_err)?;
    println!(
        "complementarity residuals over {} random points: F_* = {:.3e}, (G∘F)_* = {:.3e}",
        rep.points, rep.res_f, rep.res_gf
    );
    if cfg.lens.k > 0.0 {
        let n_max = cfg.truncation.unwrap_or_else(|| {
            cmlens::radial_solver::default_truncation(radii.r2, radii.r3)
        });
        match wp1_screen(cfg.lens.k, radii.r2, spec.outer_radius, n_max) {
            Ok(()) => println!("well-posedness screen: all modes n <= {n_max} pass"),
            Err(e) => return Err(num_err(e)),
        }
    }
    Ok(())
}

struct SweepRow {
    delta: f64,
    err_outside: Option<f64>,
    energy_lens_annulus: Option<f64>,
    uhat_norm: Option<f64>,
    jump_u: Option<f64>,
    jump_flux: Option<f64>,
    status: String,
}

fn opt(v: Option<f64>) -> String {
    v.map(fnum).unwrap_or_default()
}

fn cmd_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    install_pool(args.threads)?;
    let dir = out_dir(args)?;
    let source = ring_source(&cfg);
    let radii = cfg.lens.radii().map_err(config_err)?;
    let rows: Vec<SweepRow> = match cfg.solver {
        SolverKind::Radial => {
            let eff = build_effective_medium(&cfg.lens).map_err(config_err)?;
            let eff_field = solve_field(&eff, &source, cfg.truncation).map_err(num_err)?;
            let eff_trace = eff_field.trace(cfg.observe_radius).map_err(num_err)?;
            use rayon::prelude::*;
            cfg.sweep
                .par_iter()
                .map(|&delta| {
                    let mut spec = cfg.lens.clone();
                    spec.delta = delta;
                    let run = || -> Result<SweepRow, String> {
                        let medium = build_medium(&spec).map_err(|e| e.to_string())?;
                        let field = solve_field(&medium, &source, cfg.truncation)
                            .map_err(|e| e.to_string())?;
                        let err = field
                            .trace(cfg.observe_radius)
                            .map_err(|e| e.to_string())?
                            .l2_distance(&eff_trace);
                        let shell = energy(&field, radii.r1, radii.r2)
                            .map_err(|e| e.to_string())?
                            .gradient;
                        let coeffs =
                            reflect_solution(&field, &spec).map_err(|e| e.to_string())?;
                        let desing =
                            desingularize(&field, &coeffs).map_err(|e| e.to_string())?;
                        let uhat = desing
                            .uhat
                            .h1_norm_sq(radii.r3, spec.outer_radius)
                            .map_err(|e| e.to_string())?
                            .sqrt();
                        let (ju, jf) = jump_norms(&desing.jumps().map_err(|e| e.to_string())?);
                        Ok(SweepRow {
                            delta,
                            err_outside: Some(err),
                            energy_lens_annulus: Some(shell),
                            uhat_norm: Some(uhat),
                            jump_u: Some(ju),
                            jump_flux: Some(jf),
                            status: "ok".into(),
                        })
                    };
                    run().unwrap_or_else(|e| SweepRow {
                        delta,
                        err_outside: None,
                        energy_lens_annulus: None,
                        uhat_norm: None,
                        jump_u: None,
                        jump_flux: None,
                        status: format!("error: {e}"),
                    })
                })
                .collect()
        }
        SolverKind::Fem => {
            let fem = cfg.fem.as_ref().unwrap();
            let ifaces = vec![
                cfg.lens.r0,
                radii.r1,
                radii.r2,
                radii.r3,
                radii.r_star,
                cfg.source.radius,
            ];
            let mesh = build_mesh(&ifaces, cfg.lens.outer_radius, fem.h).map_err(num_err)?;
            info!(
                "mesh: {} vertices, {} triangles, min angle {:.2} deg",
                mesh.vertices.len(),
                mesh.triangles.len(),
                mesh.min_angle_degrees()
            );
            let eff = build_effective_medium(&cfg.lens).map_err(config_err)?;
            let eff_sol = assemble_and_solve(&mesh, &eff, &FemLoad::Ring(&source), 1.0, 0.0)
                .map_err(num_err)?;
            cfg.sweep
                .iter()
                .map(|&delta| {
                    let mut spec = cfg.lens.clone();
                    spec.delta = delta;
                    let run = || -> Result<SweepRow, String> {
                        let medium = build_medium(&spec).map_err(|e| e.to_string())?;
                        let sol = assemble_and_solve(
                            &mesh,
                            &medium,
                            &FemLoad::Ring(&source),
                            delta,
                            fem.c_mesh,
                        )
                        .map_err(|e| e.to_string())?;
                        let err = l2_difference_sq(
                            &mesh,
                            &sol.values,
                            &eff_sol.values,
                            radii.r3,
                            cfg.lens.outer_radius,
                        )
                        .sqrt();
                        let shell = weighted_gradient_energy(
                            &mesh, &medium, &sol.values, radii.r1, radii.r2,
                        );
                        Ok(SweepRow {
                            delta,
                            err_outside: Some(err),
                            energy_lens_annulus: Some(shell),
                            uhat_norm: None,
                            jump_u: None,
                            jump_flux: None,
                            status: format!("ok residual={:.3e}", sol.residual),
                        })
                    };
                    run().unwrap_or_else(|e| SweepRow {
                        delta,
                        err_outside: None,
                        energy_lens_annulus: None,
                        uhat_norm: None,
                        jump_u: None,
                        jump_flux: None,
                        status: format!("error: {e}"),
                    })
                })
                .collect()
        }
    };
    let mut csv = String::new();
    writeln!(
        csv,
        "{PARAM_HEADER},delta,err_outside,energy_lens_annulus,uhat_norm,jumpU_h12,jumpFlux_hm12,status"
    )
    .unwrap();
    let prefix = param_prefix(&cfg);
    for r in &rows {
        writeln!(
            csv,
            "{prefix},{},{},{},{},{},{},{}",
            fnum(r.delta),
            opt(r.err_outside),
            opt(r.energy_lens_annulus),
            opt(r.uhat_norm),
            opt(r.jump_u),
            opt(r.jump_flux),
            r.status
        )
        .unwrap();
    }
    let path = dir.join("sweep.csv");
    std::fs::write(&path, csv).map_err(num_err)?;
    println!("wrote {}", path.display());

    // final-δ mode field as JSON (per-mode coefficient arrays)
    if cfg.solver == SolverKind::Radial {
        let mut spec = cfg.lens.clone();
        spec.delta = *cfg.sweep.last().unwrap();
        if let Ok(field) = build_medium(&spec)
            .map_err(num_err)
            .and_then(|m| solve_field(&m, &source, cfg.truncation).map_err(num_err))
        {
            let layers: Vec<serde_json::Value> = field
                .layers
                .iter()
                .map(|l| serde_json::json!({"r_in": l.r_in, "r_out": l.r_out}))
                .collect();
            let modes: BTreeMap<String, Vec<[f64; 4]>> = field
                .modes
                .iter()
                .map(|(n, sol)| {
                    (
                        n.to_string(),
                        sol.coeffs
                            .iter()
                            .map(|c| [c[0].re, c[0].im, c[1].re, c[1].im])
                            .collect(),
                    )
                })
                .collect();
            let doc = serde_json::json!({
                "d": field.d,
                "k": field.k,
                "R": field.outer_radius,
                "delta": spec.delta,
                "layers": layers,
                "modes": modes,
            });
            let path = dir.join("field.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap())
                .map_err(num_err)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_crossvalidate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    install_pool(args.threads)?;
    if matches!(cfg.lens.object, ObjectSpec::FemGrid { .. }) {
        return Err(CliError::Config(
            "crossvalidate needs a radial object (the exact solver is the oracle)".into(),
        ));
    }
    let fem = cfg
        .fem
        .as_ref()
        .ok_or_else(|| CliError::Config("crossvalidate requires the \"fem\" section".into()))?;
    let dir = out_dir(args)?;
    let source = ring_source(&cfg);
    let radii = cfg.lens.radii().map_err(config_err)?;
    let ifaces = vec![
        cfg.lens.r0,
        radii.r1,
        radii.r2,
        radii.r3,
        radii.r_star,
        cfg.source.radius,
    ];
    let n_max_cmp = cfg
        .source
        .modes
        .iter()
        .map(|m| m.n.unsigned_abs())
        .max()
        .unwrap_or(0) as i64
        + 4;
    let mut csv = String::new();
    writeln!(csv, "{PARAM_HEADER},delta,h,trace_rel_diff,residual,status").unwrap();
    let prefix = param_prefix(&cfg);
    let mut mesh_dump: Option<(cmlens::fem2d::DiskMesh, Vec<Complex64>)> = None;
    for &h in &[fem.h, fem.h / 2.0] {
        let mesh = build_mesh(&ifaces, cfg.lens.outer_radius, h).map_err(num_err)?;
        for &delta in &cfg.sweep {
            let mut spec = cfg.lens.clone();
            spec.delta = delta;
            let run = || -> Result<(f64, f64), String> {
                let medium = build_medium(&spec).map_err(|e| e.to_string())?;
                let exact = solve_field(&medium, &source, cfg.truncation)
                    .map_err(|e| e.to_string())?;
                let exact_trace = exact.trace(radii.r3).map_err(|e| e.to_string())?;
                let sol =
                    assemble_and_solve(&mesh, &medium, &FemLoad::Ring(&source), delta, fem.c_mesh)
                        .map_err(|e| e.to_string())?;
                let fem_modes = ring_trace_modes(&mesh, &sol.values, radii.r3, n_max_cmp)
                    .map_err(|e| e.to_string())?;
                let mut diff = 0.0;
                let mut norm = 0.0;
                for (n, (u, _)) in &exact_trace.entries {
                    let f = fem_modes.get(n).copied().unwrap_or(Complex64::ZERO);
                    diff += (f - u).norm_sqr();
                    norm += u.norm_sqr();
                }
                Ok(((diff / norm).sqrt(), sol.residual))
            };
            match run() {
                Ok((rel, res)) => {
                    writeln!(
                        csv,
                        "{prefix},{},{},{},{},ok",
                        fnum(delta),
                        fnum(h),
                        fnum(rel),
                        fnum(res)
                    )
                    .unwrap();
                }
                Err(e) => {
                    writeln!(csv, "{prefix},{},{},,,error: {e}", fnum(delta), fnum(h)).unwrap();
                }
            }
        }
        if mesh_dump.is_none() {
            let mut spec = cfg.lens.clone();
            spec.delta = cfg.sweep[0];
            if let Ok(medium) = build_medium(&spec) {
                if let Ok(sol) =
                    assemble_and_solve(&mesh, &medium, &FemLoad::Ring(&source), spec.delta, fem.c_mesh)
                {
                    mesh_dump = Some((mesh.clone(), sol.values));
                }
            }
        }
    }
    let path = dir.join("crossvalidate.csv");
    std::fs::write(&path, csv).map_err(num_err)?;
    println!("wrote {}", path.display());
    if let Some((mesh, values)) = mesh_dump {
        let doc = serde_json::json!({
            "vertices": mesh.vertices,
            "triangles": mesh.triangles,
            "values": values.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
        });
        let path = dir.join("fem_field.json");
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).map_err(num_err)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_resonance(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    install_pool(args.threads)?;
    if cfg.solver != SolverKind::Radial {
        return Err(CliError::Config(
            "resonance probes run on the exact radial solver".into(),
        ));
    }
    let dir = out_dir(args)?;
    let source = ring_source(&cfg);
    let radii = cfg.lens.radii().map_err(config_err)?;
    use rayon::prelude::*;
    let rows: Vec<String> = cfg
        .sweep
        .par_iter()
        .map(|&delta| {
            let mut spec = cfg.lens.clone();
            spec.delta = delta;
            let run = || -> Result<String, String> {
                let medium = build_medium(&spec).map_err(|e| e.to_string())?;
                let field =
                    solve_field(&medium, &source, cfg.truncation).map_err(|e| e.to_string())?;
                let e_shell = energy(&field, radii.r1, radii.r2)
                    .map_err(|e| e.to_string())?
                    .gradient;
                let e_outer_annulus = energy(&field, radii.r2, radii.r3)
                    .map_err(|e| e.to_string())?
                    .gradient;
                let coeffs = reflect_solution(&field, &spec).map_err(|e| e.to_string())?;
                let desing = desingularize(&field, &coeffs).map_err(|e| e.to_string())?;
                let u_h1 = desing
                    .u_h1_norm_sq(radii.r_star, spec.outer_radius)
                    .map_err(|e| e.to_string())?
                    .sqrt();
                let uhat = desing
                    .uhat
                    .h1_norm_sq(radii.r3, spec.outer_radius)
                    .map_err(|e| e.to_string())?
                    .sqrt();
                let (ju, jf) = jump_norms(&desing.jumps().map_err(|e| e.to_string())?);
                Ok(format!(
                    "{},{},{},{},{},{},{},ok",
                    fnum(delta),
                    fnum(e_shell),
                    fnum(e_outer_annulus),
                    fnum(u_h1),
                    fnum(uhat),
                    fnum(ju),
                    fnum(jf)
                ))
            };
            run().unwrap_or_else(|e| format!("{},,,,,,,error: {e}", fnum(delta)))
        })
        .collect();
    let mut csv = String::new();
    writeln!(
        csv,
        "{PARAM_HEADER},delta,energy_shell,energy_r2_r3,u_h1_outside,uhat_h1_outside_r3,jumpU_h12,jumpFlux_hm12,status"
    )
    .unwrap();
    let prefix = param_prefix(&cfg);
    for r in &rows {
        writeln!(csv, "{prefix},{r}").unwrap();
    }
    let path = dir.join("resonance.csv");
    std::fs::write(&path, csv).map_err(num_err)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CMLENS_LOG")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Crossvalidate(a) => cmd_crossvalidate(a),
        Command::Resonance(a) => cmd_resonance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
