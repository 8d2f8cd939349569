//! Convergence tables and per-level dumps.

use std::io::Write;
use std::path::Path;

use rm_dpg::dpg::LocalDpgKernel;
use rm_dpg::estimator::EstimateField;
use rm_dpg::stages::{LevelRecord, StageSolution};

use crate::CliError;

pub const HEADER: [&str; 14] = [
    "level",
    "n_triangles",
    "dofs",
    "t",
    "err_u_h1",
    "err_psi_l2",
    "err_m_l2",
    "eta1",
    "eta2",
    "eta3",
    "eta",
    "time_stage1",
    "time_stage2",
    "time_stage3",
];

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn record_row(r: &LevelRecord, timings: bool) -> Vec<String> {
    let err = |f: fn(&rm_dpg::stages::ErrorNorms) -> f64| r.errors.as_ref().map_or(f64::NAN, f);
    let mut row = vec![r.level.to_string(), r.n_triangles.to_string(), r.dofs.to_string(), num(r.t)];
    row.extend([err(|e| e.u_h1), err(|e| e.psi), err(|e| e.moment)].map(num));
    row.extend(r.estimators.map(num));
    row.extend(r.solve_seconds.map(|s| num(if timings { s } else { 0.0 })));
    row
}

pub fn write_convergence(path: &Path, records: &[LevelRecord], timings: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record(record_row(r, timings)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Format(format!("{}: {other:?}", path.display())),
    }
}

/// A convergence table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_table(&text).map_err(|m| CliError::Format(format!("{}: {m}", path.display())))
}

pub fn parse_table(text: &str) -> Result<Table, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("level") || !header.iter().any(|h| h == "n_triangles") {
        return Err("not a convergence table (missing level / n_triangles columns)".into());
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| format!("row {}: '{f}' is not a number", i + 1)))
            .collect::<Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| CliError::io(path, e))?))
}

/// `element,eta1,eta2,eta3`.
pub fn write_estimators(path: &Path, est: &EstimateField) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "element,eta1,eta2,eta3").map_err(io)?;
    for t in 0..est.eta1.len() {
        writeln!(w, "{t},{},{},{}", num(est.eta1[t]), num(est.eta2[t]), num(est.eta3[t])).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Elementwise fields and nodal values, two files.
pub fn write_solution(fields: &Path, nodal: &Path, mesh: &rm_dpg::Mesh, sol: &StageSolution) -> Result<(), CliError> {
    let mut w = create(fields)?;
    let io = |e| CliError::io(fields, e);
    writeln!(w, "element,psi_x,psi_y,eta_x,eta_y,m_xx,m_yy,m_xy,p").map_err(io)?;
    for t in 0..mesh.num_triangles() {
        let s = &sol.stage2;
        let v: Vec<String> = s.psi(t).into_iter().chain(s.eta(t)).chain(s.moment(t)).chain([s.p(t)]).map(num).collect();
        writeln!(w, "{t},{}", v.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)?;
    let mut w = create(nodal)?;
    let io = |e| CliError::io(nodal, e);
    writeln!(w, "vertex,x,y,r,u").map_err(io)?;
    for (i, x) in mesh.vertices().iter().enumerate() {
        writeln!(w, "{i},{},{},{},{}", num(x[0]), num(x[1]), num(sol.r[i]), num(sol.u[i])).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_matrix(w: &mut impl Write, name: &str, rows: usize, cols: usize, data: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{name} {rows} {cols}")?;
    for r in 0..rows {
        let line: Vec<String> = data[r * cols..(r + 1) * cols].iter().map(|v| num(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Element kernels: per element an `element <id>` line followed by the
/// blocks `gram`, `b_local`, `load_local` and `opt_test`, each as a
/// `<name> <rows> <cols>` line and row-major entries.
pub fn write_kernels(path: &Path, kernels: &[LocalDpgKernel]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    for k in kernels {
        writeln!(w, "element {}", k.element).map_err(io)?;
        write_matrix(&mut w, "gram", k.gram.rows(), k.gram.cols(), k.gram.as_slice()).map_err(io)?;
        write_matrix(&mut w, "b_local", k.b_local.rows(), k.b_local.cols(), k.b_local.as_slice()).map_err(io)?;
        write_matrix(&mut w, "load_local", k.load_local.len(), 1, &k.load_local).map_err(io)?;
        write_matrix(&mut w, "opt_test", k.opt_test.rows(), k.opt_test.cols(), k.opt_test.as_slice()).map_err(io)?;
    }
    w.flush().map_err(io)
}
