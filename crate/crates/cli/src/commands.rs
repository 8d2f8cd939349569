//! Subcommand implementations. Each writes its report to `out` and returns
//! an error carrying the exit code on failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use rm_dpg::dpg::{local_kernel, p1_gradients};
use rm_dpg::exec::{Clock, NoClock};
use rm_dpg::rates::tail_slope;
use rm_dpg::stages::{run_pipeline, LevelRecord};
use rm_dpg::{BcKind, Mesh};

use crate::config::RunConfig;
use crate::pool::{RayonExecutor, WallClock};
use crate::verify::{run_all, VerifyOptions};
use crate::{csvio, meshio, plotdata, CliError};

/// Levels used for the summary rates.
pub const RATE_LEVELS: usize = 3;

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    /// 0 uses all cores.
    pub threads: usize,
}

fn executor(threads: usize) -> Result<RayonExecutor, CliError> {
    RayonExecutor::new(threads).map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn report(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<Vec<LevelRecord>, CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let problem = cfg.problem()?;
    let opts = cfg.pipeline_options();
    let exec = executor(args.threads)?;
    create_dir(&args.out_dir)?;
    let o = &cfg.output;
    let dir = &args.out_dir;

    let mut failure: Option<CliError> = None;
    let mut observe = |d: &rm_dpg::stages::LevelData<'_>| -> rm_dpg::Result<()> {
        let level = d.record.level;
        let result = (|| {
            if o.meshes {
                meshio::write_mesh(d.mesh, &dir.join(format!("mesh_level{level}.txt")))?;
            }
            if o.solutions {
                csvio::write_solution(
                    &dir.join(format!("fields_level{level}.csv")),
                    &dir.join(format!("nodal_level{level}.csv")),
                    d.mesh,
                    d.solution,
                )?;
            }
            if o.estimators {
                csvio::write_estimators(&dir.join(format!("estimators_level{level}.csv")), d.estimates)?;
            }
            if o.kernels && level == 0 {
                let grads = p1_gradients(d.mesh, &d.solution.r);
                let kernels = (0..d.mesh.num_triangles())
                    .map(|t| local_kernel(d.kernel, d.mesh, t, grads[t]))
                    .collect::<rm_dpg::Result<Vec<_>>>()?;
                csvio::write_kernels(&dir.join("kernels_level0.txt"), &kernels)?;
            }
            Ok::<(), CliError>(())
        })();
        result.map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            rm_dpg::Error::Config(msg)
        })
    };
    let clock = WallClock::start();
    let records = if cfg.solver.record_timings {
        run_pipeline(&problem, &opts, &exec, &clock as &dyn Clock, &mut observe)
    } else {
        run_pipeline(&problem, &opts, &exec, &NoClock as &dyn Clock, &mut observe)
    };
    let records = match (records, failure) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?,
    };
    csvio::write_convergence(&dir.join(&o.csv), &records, cfg.solver.record_timings)?;
    print_rate_table(out, &records)?;
    Ok(records)
}

fn print_rate_table(out: &mut dyn Write, records: &[LevelRecord]) -> Result<(), CliError> {
    report(out, format_args!("{:>5} {:>9} {:>9} {:>12} {:>12} {:>12} {:>12}\n", "level", "#T", "dofs", "err_u_h1", "err_psi", "err_M", "eta"))?;
    let fmt_err = |r: &LevelRecord, k: usize| match &r.errors {
        Some(e) => format!("{:12.4e}", [e.u_h1, e.psi, e.moment][k]),
        None => format!("{:>12}", "-"),
    };
    for r in records {
        report(
            out,
            format_args!(
                "{:>5} {:>9} {:>9} {} {} {} {:12.4e}\n",
                r.level,
                r.n_triangles,
                r.dofs,
                fmt_err(r, 0),
                fmt_err(r, 1),
                fmt_err(r, 2),
                r.estimators[3]
            ),
        )?;
    }
    if records.len() < 2 {
        return Ok(());
    }
    let k = RATE_LEVELS.min(records.len());
    let nt: Vec<f64> = records.iter().map(|r| r.n_triangles as f64).collect();
    let mut series: Vec<(&str, Vec<f64>)> = Vec::new();
    if records.iter().all(|r| r.errors.is_some()) {
        let e = |f: fn(&rm_dpg::stages::ErrorNorms) -> f64| records.iter().map(|r| f(r.errors.as_ref().unwrap())).collect();
        series.push(("err_u_h1", e(|x| x.u_h1)));
        series.push(("err_psi", e(|x| x.psi)));
        series.push(("err_M", e(|x| x.moment)));
    }
    for (i, name) in ["eta1", "eta2", "eta3", "eta"].into_iter().enumerate() {
        series.push((name, records.iter().map(|r| r.estimators[i]).collect()));
    }
    let parts: Vec<String> = series
        .iter()
        .map(|(name, y)| match tail_slope(&nt, y, k) {
            Some(s) => format!("{name} {s:.3}"),
            None => format!("{name} n/a"),
        })
        .collect();
    report(out, format_args!("rates vs #T (least squares, last {k} levels): {}\n", parts.join(", ")))
}

pub fn verify(opts: &VerifyOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let results = run_all(opts);
    for r in &results {
        report(out, format_args!("{r}\n"))?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

/// Seed for `verify`: flag, then config file, then the default.
pub fn verify_seed(seed: Option<u64>, config: Option<&Path>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    if let Some(path) = config {
        if let Some(s) = RunConfig::load(path)?.seed {
            return Ok(s);
        }
    }
    Ok(VerifyOptions::default().seed)
}

pub fn plotdata(csv: &Path, slope: f64, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    if !slope.is_finite() || slope >= 0.0 {
        return Err(CliError::Usage(format!("guide slope {slope} must be negative")));
    }
    let table = csvio::read_table(csv)?;
    let text = plotdata::plot_data(&table, slope).map_err(|e| CliError::Format(format!("{}: {e}", csv.display())))?;
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => report(out, format_args!("{text}")),
    }
}

#[derive(Debug, Clone, Default)]
pub struct MeshInfoArgs {
    pub config: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    /// Uniform refinements applied before reporting.
    pub levels: usize,
    pub write: Option<PathBuf>,
}

pub fn mesh_info(args: &MeshInfoArgs, out: &mut dyn Write) -> Result<Mesh, CliError> {
    let mut mesh = match (&args.mesh, &args.config) {
        (Some(m), None) => meshio::read_mesh(m)?,
        (None, Some(c)) => RunConfig::load(c)?.problem()?.mesh,
        _ => return Err(CliError::Usage("give exactly one of --mesh and --config".into())),
    };
    for _ in 0..args.levels {
        mesh = mesh.refine_uniform();
    }
    mesh.check_conforming()?;
    let h_max = mesh.triangles().iter().map(|t| t.diameter).fold(0.0, f64::max);
    report(out, format_args!("vertices {}\ntriangles {}\nedges {}\n", mesh.num_vertices(), mesh.num_triangles(), mesh.num_edges()))?;
    report(out, format_args!("area {}\nh_max {}\nmin_angle_deg {}\n", mesh.total_area(), h_max, mesh.min_angle().to_degrees()))?;
    for kind in BcKind::ALL {
        let n = mesh.boundary_edges().filter(|&e| mesh.edge_kind(e) == Some(kind)).count();
        if n > 0 {
            report(out, format_args!("boundary {} {n}\n", kind.token()))?;
        }
    }
    if let Some(p) = &args.write {
        meshio::write_mesh(&mesh, p)?;
    }
    Ok(mesh)
}
