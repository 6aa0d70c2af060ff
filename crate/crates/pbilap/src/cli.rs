//! The `pbilap` command line front end.
//!
//! Three subcommands tie mesh generation, solving and post-processing
//! into reproducible experiments:
//!
//! - `solve`: one solve at a fixed exponent, field and report output
//! - `benchmark`: refinement ladder against the manufactured solution,
//!   EOC table output
//! - `psweep`: continuation in p with per-exponent field dumps and
//!   limit diagnostics
//!
//! Settings come from defaults, then an optional TOML config file, then
//! command line flags. `PBILAP_THREADS` caps how many benchmark ladder
//! levels run concurrently.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::analysis::{
    self, breakpoint_diagnostics_1d, histogram_mode_report, manufactured_sine, recovered_laplacian,
    EocTable,
};
use crate::assembly::{BoundaryProjection, ProblemSpec};
use crate::io;
use crate::mesh::{criss_cross_mesh, metrics, refine_uniform, unit_interval_mesh, Mesh};
use crate::solver::{
    continuation_solve, solve_p_bilaplacian, ContinuationConfig, NewtonConfig, SolveReport,
};
use crate::space::FeFunction;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pbilap",
    about = "Mixed C0 finite element solver for the p-Bilaplacian",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand)]
pub enum CliCommand {
    /// Solve once at a fixed exponent and write fields and report
    Solve(CommonArgs),
    /// Run the refinement-ladder convergence study (manufactured case)
    Benchmark(CommonArgs),
    /// March p upward and dump fields and limit diagnostics per exponent
    Psweep(CommonArgs),
}

#[derive(Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML config file; command line flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem case: manufactured_sine | cubic_1d | cosine_2d
    #[arg(long)]
    pub case: Option<String>,
    /// Exponent p >= 2
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated exponent ladder for psweep, e.g. "2,4,12,42,202"
    #[arg(long = "p-schedule")]
    pub p_schedule: Option<String>,
    /// Polynomial degree, 1 or 2
    #[arg(long)]
    pub k: Option<usize>,
    /// Initial mesh resolution (cells per direction)
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of refinement levels for benchmark
    #[arg(long)]
    pub levels: Option<usize>,
    /// Cosine case frequency
    #[arg(long)]
    pub m: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dirichlet data realisation: interpolate | ritz
    #[arg(long = "boundary-projection")]
    pub boundary_projection: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    ManufacturedSine,
    Cubic1d,
    Cosine2d,
}

impl Case {
    fn parse(s: &str) -> Result<Case> {
        match s {
            "manufactured_sine" => Ok(Case::ManufacturedSine),
            "cubic_1d" => Ok(Case::Cubic1d),
            "cosine_2d" => Ok(Case::Cosine2d),
            other => Err(Error::invalid(format!(
                "unknown case '{other}' (expected manufactured_sine, cubic_1d or cosine_2d)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Case::ManufacturedSine => "manufactured_sine",
            Case::Cubic1d => "cubic_1d",
            Case::Cosine2d => "cosine_2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Case::Cubic1d => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Benchmark,
    Psweep,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub case: Case,
    pub m: usize,
    pub p: f64,
    pub p_schedule: Vec<f64>,
    pub k: usize,
    pub n: usize,
    pub levels: usize,
    pub newton: NewtonConfig,
    pub boundary_projection: BoundaryProjection,
    pub out_dir: PathBuf,
    pub guard_cells: usize,
    pub samples_per_cell: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<ProblemSection>,
    mesh: Option<MeshSection>,
    newton: Option<NewtonSection>,
    continuation: Option<ContinuationSection>,
    output: Option<OutputSection>,
    diagnostics: Option<DiagnosticsSection>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    case: Option<String>,
    p: Option<f64>,
    m: Option<usize>,
    boundary_projection: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MeshSection {
    n: Option<usize>,
    degree: Option<usize>,
    levels: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NewtonSection {
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_iters: Option<usize>,
    max_line_search_halvings: Option<usize>,
    epsilon_schedule: Option<Vec<f64>>,
    adaptive_epsilon: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ContinuationSection {
    p_schedule: Option<Vec<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DiagnosticsSection {
    guard_cells: Option<usize>,
    samples_per_cell: Option<usize>,
}

fn parse_boundary_projection(s: &str) -> Result<BoundaryProjection> {
    match s {
        "interpolate" => Ok(BoundaryProjection::Interpolate),
        "ritz" => Ok(BoundaryProjection::Ritz),
        other => Err(Error::invalid(format!(
            "unknown boundary projection '{other}' (expected interpolate or ritz)"
        ))),
    }
}

fn parse_schedule(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad exponent '{t}' in p schedule")))
        })
        .collect()
}

/// Resolve defaults <- config file <- flags into a [`RunConfig`].
pub fn resolve_config(command: CommandKind, args: &CommonArgs) -> Result<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::invalid(format!("config: {e}")))?
        }
        None => FileConfig::default(),
    };
    let problem = file.problem.unwrap_or_default();
    let mesh_sec = file.mesh.unwrap_or_default();
    let newton_sec = file.newton.unwrap_or_default();
    let cont = file.continuation.unwrap_or_default();
    let output = file.output.unwrap_or_default();
    let diag = file.diagnostics.unwrap_or_default();

    let case = match args.case.as_deref().or(problem.case.as_deref()) {
        Some(s) => Case::parse(s)?,
        None => match command {
            CommandKind::Benchmark => Case::ManufacturedSine,
            _ => Case::Cubic1d,
        },
    };

    let m_given = args.m.or(problem.m);
    if m_given.is_some() && case != Case::Cosine2d {
        return Err(Error::invalid("--m applies only to the cosine_2d case"));
    }
    let m = m_given.unwrap_or(1);
    if case == Case::Cosine2d && m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }

    let p = args.p.or(problem.p).unwrap_or(2.0);
    if !(p >= 2.0) {
        return Err(Error::invalid(format!("p must be >= 2, got {p}")));
    }

    let p_schedule = match args.p_schedule.as_deref() {
        Some(s) => parse_schedule(s)?,
        None => cont.p_schedule.unwrap_or_else(|| match case.dim() {
            1 => vec![2.0, 4.0, 12.0, 42.0, 202.0],
            _ => vec![2.0, 4.0, 42.0, 68.0, 142.0],
        }),
    };

    let k = args.k.or(mesh_sec.degree).unwrap_or(1);
    let n = args.n.or(mesh_sec.n).unwrap_or(match (command, case.dim()) {
        (CommandKind::Benchmark, _) => 4,
        (CommandKind::Psweep, 1) => 128,
        (CommandKind::Psweep, _) => 32,
        (_, 1) => 32,
        (_, _) => 16,
    });
    let levels = args.levels.or(mesh_sec.levels).unwrap_or(4);
    if n == 0 || levels == 0 {
        return Err(Error::invalid("mesh resolution and levels must be positive"));
    }

    let mut newton = NewtonConfig::default();
    if let Some(v) = newton_sec.abs_tol {
        newton.abs_tol = v;
    }
    if let Some(v) = newton_sec.rel_tol {
        newton.rel_tol = v;
    }
    if let Some(v) = newton_sec.max_iters {
        newton.max_iters = v;
    }
    if let Some(v) = newton_sec.max_line_search_halvings {
        newton.max_line_search_halvings = v;
    }
    if let Some(v) = newton_sec.epsilon_schedule {
        newton.epsilon_schedule = v;
    }
    if let Some(v) = newton_sec.adaptive_epsilon {
        newton.adaptive_epsilon = v;
    }
    newton.validate()?;

    let boundary_projection = match args
        .boundary_projection
        .as_deref()
        .or(problem.boundary_projection.as_deref())
    {
        Some(s) => parse_boundary_projection(s)?,
        None => BoundaryProjection::Interpolate,
    };

    let config = RunConfig {
        command,
        case,
        m,
        p,
        p_schedule,
        k,
        n,
        levels,
        newton,
        boundary_projection,
        out_dir: args.out.clone().or(output.dir).unwrap_or_else(|| PathBuf::from("out")),
        guard_cells: diag.guard_cells.unwrap_or(3),
        samples_per_cell: diag.samples_per_cell.unwrap_or(8),
    };
    validate_config(&config)?;
    Ok(config)
}

fn validate_config(cfg: &RunConfig) -> Result<()> {
    if !(cfg.k == 1 || cfg.k == 2) {
        return Err(Error::invalid(format!("degree k must be 1 or 2, got {}", cfg.k)));
    }
    match cfg.command {
        CommandKind::Benchmark => {
            if cfg.case != Case::ManufacturedSine {
                return Err(Error::invalid(
                    "benchmark requires the manufactured_sine case",
                ));
            }
        }
        CommandKind::Psweep => {
            if cfg.case == Case::ManufacturedSine {
                return Err(Error::invalid(
                    "psweep requires a homogeneous case (cubic_1d or cosine_2d)",
                ));
            }
            if cfg.p_schedule.is_empty() {
                return Err(Error::invalid("psweep needs a nonempty p schedule"));
            }
        }
        CommandKind::Solve => {}
    }
    Ok(())
}

/// Problem data for a resolved case.
pub fn case_spec(cfg: &RunConfig) -> Result<ProblemSpec> {
    let mut spec = match cfg.case {
        Case::ManufacturedSine => manufactured_sine(cfg.p)?.spec,
        Case::Cubic1d => analysis::cubic_1d_case()?.with_p(cfg.p)?,
        Case::Cosine2d => analysis::cosine_2d_case(cfg.m)?.with_p(cfg.p)?,
    };
    spec.boundary_projection = cfg.boundary_projection;
    Ok(spec)
}

/// Mesh for a resolved case at resolution `n`.
pub fn case_mesh(case: Case, n: usize) -> Result<Mesh> {
    match case.dim() {
        1 => unit_interval_mesh(n, 0.0, 1.0),
        _ => criss_cross_mesh(n, n, (-1.0, -1.0, 1.0, 1.0)),
    }
}

fn p_tag(p: f64) -> String {
    if p.fract() == 0.0 && p.abs() < 1e9 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

/// Worker-thread cap: `PBILAP_THREADS`, else the machine parallelism.
pub fn thread_cap() -> usize {
    std::env::var("PBILAP_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

#[derive(Debug, Clone)]
pub struct BenchmarkLevel {
    pub h_max: f64,
    pub dofs: usize,
    pub err_w: f64,
    pub err_u: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub table: EocTable,
    pub levels: Vec<BenchmarkLevel>,
    /// First ladder level whose solve failed, if any; the table holds the
    /// rows completed before it.
    pub failed_level: Option<usize>,
}

/// Run the manufactured-solution refinement ladder: `levels` meshes
/// starting from an `n0 x n0` criss-cross grid, each refined uniformly.
/// Levels run concurrently up to `threads`.
pub fn run_benchmark(
    p: f64,
    k: usize,
    n0: usize,
    levels: usize,
    ncfg: &NewtonConfig,
    threads: usize,
) -> Result<BenchmarkOutcome> {
    let mut meshes = Vec::with_capacity(levels);
    let mut mesh = criss_cross_mesh(n0, n0, (-1.0, -1.0, 1.0, 1.0))?;
    for _ in 0..levels {
        meshes.push(mesh.clone());
        mesh = refine_uniform(&mesh);
    }

    let mut results: Vec<Option<Result<BenchmarkLevel>>> = Vec::new();
    results.resize_with(levels, || None);
    let level_ids: Vec<usize> = (0..levels).collect();
    for chunk in level_ids.chunks(threads.max(1)) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&lvl| {
                    let mesh = &meshes[lvl];
                    scope.spawn(move || run_benchmark_level(p, k, mesh, ncfg))
                })
                .collect();
            for (&lvl, handle) in chunk.iter().zip(handles) {
                results[lvl] = Some(match handle.join() {
                    Ok(r) => r,
                    Err(_) => Err(Error::invalid(format!("level {lvl} worker panicked"))),
                });
            }
        });
    }

    let mut table = EocTable::new("manufactured_sine", p, k);
    let mut level_rows = Vec::new();
    let mut failed_level = None;
    for (lvl, result) in results.into_iter().enumerate() {
        match result.expect("level executed") {
            Ok(level) => {
                if failed_level.is_none() {
                    table.push_row(level.h_max, level.dofs, level.err_w, level.err_u);
                    level_rows.push(level);
                }
            }
            Err(_) => {
                if failed_level.is_none() {
                    failed_level = Some(lvl);
                }
            }
        }
    }
    Ok(BenchmarkOutcome {
        table,
        levels: level_rows,
        failed_level,
    })
}

fn run_benchmark_level(p: f64, k: usize, mesh: &Mesh, ncfg: &NewtonConfig) -> Result<BenchmarkLevel> {
    let case = manufactured_sine(p)?;
    let (u, w, report) = solve_p_bilaplacian(mesh, k, &case.spec, ncfg)?;
    if !report.converged {
        return Err(Error::invalid("benchmark level did not converge"));
    }
    let q = case.spec.q;
    let exact_w = case.exact_w.clone();
    let exact_g = case.exact_grad_u.clone();
    Ok(BenchmarkLevel {
        h_max: metrics(mesh).h_max,
        dofs: u.space.dof_count,
        err_w: analysis::error_w_lq(&w, move |x| exact_w(x), q),
        err_u: analysis::error_gradu_lp(&u, move |x| exact_g(x), p),
        report,
    })
}

fn diagnostics_header(dim: usize) -> &'static str {
    if dim == 1 {
        "p,q,s_max,s_energy_lp,stability_margin,num_sign_changes,plateau_mean_first,plateau_mean_last,plateau_rel_stddev,break_location"
    } else {
        "p,q,s_max,s_energy_lp,stability_margin,mode1,mode2,top2_capture_fraction"
    }
}

fn diagnostics_row(cfg: &RunConfig, p: f64, w: &FeFunction, margin: Option<f64>) -> String {
    let q = p / (p - 1.0);
    let s = recovered_laplacian(w, q);
    let mut row = format!(
        "{},{},{},{},{}",
        io::fmt_f64(p),
        io::fmt_f64(q),
        io::fmt_f64(s.max_abs()),
        io::fmt_f64(s.lp_norm(p)),
        margin.map(io::fmt_f64).unwrap_or_default(),
    );
    if w.space.mesh.dim() == 1 {
        let samples = s.sample_1d(cfg.samples_per_cell);
        match breakpoint_diagnostics_1d(&samples, cfg.guard_cells * cfg.samples_per_cell) {
            Ok(d) => {
                row.push_str(&format!(
                    ",{},{},{},{},{}",
                    d.num_sign_changes,
                    io::fmt_f64(d.plateau_means.0),
                    io::fmt_f64(d.plateau_means.1),
                    io::fmt_f64(d.plateau_rel_stddev),
                    d.break_location.map(io::fmt_f64).unwrap_or_default(),
                ));
            }
            Err(_) => row.push_str(",,,,,"),
        }
    } else {
        let values: Vec<f64> = s.sample_quad_points().iter().map(|&(_, v)| v).collect();
        let h = histogram_mode_report(&values, 64);
        row.push_str(&format!(
            ",{},{},{}",
            io::fmt_f64(h.modes.0),
            io::fmt_f64(h.modes.1),
            io::fmt_f64(h.capture_fraction),
        ));
    }
    row
}

/// Vertex samples of `u` and the recovered Laplacian for field dumps.
fn field_dump(
    cfg: &RunConfig,
    dir: &Path,
    p: f64,
    u: &FeFunction,
    w: &FeFunction,
) -> Result<()> {
    let q = p / (p - 1.0);
    let s = recovered_laplacian(w, q);
    let mesh = &u.space.mesh;
    let u_vals = io::vertex_values(u);
    let s_vals: Vec<f64> = io::vertex_values(w).iter().map(|&v| s.apply(v)).collect();
    io::write_vtk(
        &dir.join(format!("field_p{}.vtk", p_tag(p))),
        mesh,
        &[("u", &u_vals), ("laplacian_u", &s_vals)],
    )?;
    let rows: Vec<Vec<f64>> = if mesh.dim() == 1 {
        let samples = s.sample_1d(cfg.samples_per_cell);
        let mut rows = Vec::with_capacity(samples.len());
        let per = cfg.samples_per_cell;
        for (i, &(x, sv)) in samples.iter().enumerate() {
            let cell = i / per;
            let t = ((i % per) as f64 + 0.5) / per as f64;
            rows.push(vec![x, u.eval(cell, [t, 0.0]), sv]);
        }
        rows
    } else {
        (0..mesh.num_vertices())
            .map(|v| {
                let [x, y] = mesh.vertex(v);
                vec![x, y, u_vals[v], s_vals[v]]
            })
            .collect()
    };
    let header = if mesh.dim() == 1 { "x u laplacian_u" } else { "x y u laplacian_u" };
    io::write_columns(&dir.join(format!("field_p{}.dat", p_tag(p))), header, &rows)?;
    Ok(())
}

/// `solve`: one solve, field and report output. Exit 1 on
/// non-convergence (partial outputs retained).
pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let spec = case_spec(cfg)?;
    let mesh = case_mesh(cfg.case, cfg.n)?;
    let (u, w, report) = solve_p_bilaplacian(&mesh, cfg.k, &spec, &cfg.newton)?;

    // Debug aid: PBILAP_DUMP_MATRIX writes the saddle system assembled at
    // the final iterate in MatrixMarket coordinate format.
    if std::env::var_os("PBILAP_DUMP_MATRIX").is_some() {
        let space = u.space.clone();
        let (mat, _) = crate::assembly::assemble_saddle_system(&u, &w, &spec, &space);
        io::write_matrix_market(&cfg.out_dir.join("system.mtx"), &mat)?;
    }

    io::write_fefunction_csv(&cfg.out_dir.join("u.csv"), &u)?;
    io::write_fefunction_csv(&cfg.out_dir.join("w.csv"), &w)?;
    field_dump(cfg, &cfg.out_dir, cfg.p, &u, &w)?;
    let h_max = metrics(&mesh).h_max;
    let row = io::report_row(cfg.p, spec.q, cfg.k, h_max, u.space.dof_count, &report);
    io::write_report_csv(&cfg.out_dir.join("report.csv"), &[row])?;
    let margin = if spec.source_f.is_none() {
        Some(analysis::stability_margin(&w, &spec)?)
    } else {
        None
    };
    io::write_csv(
        &cfg.out_dir.join("diagnostics.csv"),
        diagnostics_header(mesh.dim()),
        &[diagnostics_row(cfg, cfg.p, &w, margin)],
    )?;

    println!(
        "solve case={} p={} k={} n={} dofs={} iters={:?} residual={:.3e} converged={}",
        cfg.case.name(),
        cfg.p,
        cfg.k,
        cfg.n,
        u.space.dof_count,
        report.newton_iters_per_stage,
        report.final_residual,
        report.converged
    );
    Ok(if report.converged { 0 } else { 1 })
}

/// `benchmark`: refinement ladder, EOC table and log-log data output.
/// Exit 1 when a level fails (partial table retained).
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let outcome = run_benchmark(cfg.p, cfg.k, cfg.n, cfg.levels, &cfg.newton, thread_cap())?;

    let stem = format!("eoc_{}_p{}_k{}", cfg.case.name(), p_tag(cfg.p), cfg.k);
    io::write_eoc_csv(&cfg.out_dir.join(format!("{stem}.csv")), &outcome.table)?;
    let rows: Vec<Vec<f64>> = outcome
        .table
        .rows
        .iter()
        .map(|r| vec![r.h_max, r.err_w_lq, r.err_gradu_lp])
        .collect();
    io::write_columns(
        &cfg.out_dir.join(format!("{stem}.dat")),
        "h err_w_lq err_gradu_lp",
        &rows,
    )?;
    let report_rows: Vec<String> = outcome
        .levels
        .iter()
        .map(|l| io::report_row(cfg.p, cfg.p / (cfg.p - 1.0), cfg.k, l.h_max, l.dofs, &l.report))
        .collect();
    io::write_report_csv(&cfg.out_dir.join("report.csv"), &report_rows)?;

    println!("benchmark case={} p={} k={}", cfg.case.name(), cfg.p, cfg.k);
    println!("{:>12} {:>8} {:>13} {:>13} {:>7} {:>7}", "h_max", "dofs", "err_w", "err_gradu", "eoc_w", "eoc_u");
    for r in &outcome.table.rows {
        println!(
            "{:>12.5e} {:>8} {:>13.6e} {:>13.6e} {:>7} {:>7}",
            r.h_max,
            r.dofs,
            r.err_w_lq,
            r.err_gradu_lp,
            r.eoc_w.map(|e| format!("{e:.3}")).unwrap_or_default(),
            r.eoc_u.map(|e| format!("{e:.3}")).unwrap_or_default(),
        );
    }
    match outcome.failed_level {
        Some(lvl) => {
            eprintln!("benchmark aborted: level {lvl} failed; partial table written");
            Ok(1)
        }
        None => Ok(0),
    }
}

/// `psweep`: continuation along the p schedule with per-exponent dumps.
/// Exit 1 on continuation abort (partial outputs retained).
pub fn cmd_psweep(cfg: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let spec = case_spec(cfg)?;
    let mesh = case_mesh(cfg.case, cfg.n)?;

    // The solver's ladder always starts at 2; dumps are written for the
    // requested exponents only.
    let mut schedule = cfg.p_schedule.clone();
    if schedule.first() != Some(&2.0) {
        schedule.insert(0, 2.0);
    }
    let ccfg = ContinuationConfig {
        p_schedule: schedule,
        warm_start: true,
    };
    let result = continuation_solve(&mesh, cfg.k, &spec, &ccfg, &cfg.newton)?;

    let h_max = metrics(&mesh).h_max;
    let mut report_rows = Vec::new();
    let mut diag_rows = Vec::new();
    for step in &result.steps {
        if cfg.p_schedule.contains(&step.p) {
            field_dump(cfg, &cfg.out_dir, step.p, &step.u, &step.w)?;
        }
        let q = step.p / (step.p - 1.0);
        let dofs = step.u.space.dof_count;
        report_rows.push(io::report_row(step.p, q, cfg.k, h_max, dofs, &step.report));
        diag_rows.push(diagnostics_row(cfg, step.p, &step.w, Some(step.diagnostics.stability_margin)));
    }
    io::write_report_csv(&cfg.out_dir.join("report.csv"), &report_rows)?;
    io::write_csv(
        &cfg.out_dir.join("diagnostics.csv"),
        diagnostics_header(mesh.dim()),
        &diag_rows,
    )?;

    println!(
        "psweep case={} k={} n={} exponents={:?}",
        cfg.case.name(),
        cfg.k,
        cfg.n,
        result.steps.iter().map(|s| s.p).collect::<Vec<_>>()
    );
    match result.aborted_at {
        Some(p) => {
            eprintln!("continuation aborted before p = {p}; partial outputs written");
            Ok(1)
        }
        None => Ok(0),
    }
}

/// Parse and dispatch. Returns the process exit code: 0 success,
/// 1 runtime failure (non-convergence, abort), 2 invalid configuration.
pub fn run(cli: Cli) -> i32 {
    let (kind, args) = match &cli.command {
        CliCommand::Solve(a) => (CommandKind::Solve, a),
        CliCommand::Benchmark(a) => (CommandKind::Benchmark, a),
        CliCommand::Psweep(a) => (CommandKind::Psweep, a),
    };
    let cfg = match resolve_config(kind, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("pbilap: {e}");
            eprintln!("usage: pbilap <solve|benchmark|psweep> [--config FILE] [--case NAME] [--p X] [--k N] [--n N] [--levels L] [--m M] [--out DIR]");
            return 2;
        }
    };
    let outcome = match kind {
        CommandKind::Solve => cmd_solve(&cfg),
        CommandKind::Benchmark => cmd_benchmark(&cfg),
        CommandKind::Psweep => cmd_psweep(&cfg),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pbilap: {e}");
            1
        }
    }
}
