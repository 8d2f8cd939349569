//! Plain-text mesh files.
//!
//! ```text
//! vertices N / triangles M / edges K
//! x y                      (N lines)
//! v0 v1 v2 ref_edge        (M lines)
//! v0 v1 tag                (K boundary edges, tag = hc|sc|hss|sss|f)
//! ```
//!
//! Coordinates are written with 17 significant digits, so a write/read
//! cycle reproduces the mesh bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use rm_dpg::mesh::BoundarySegment;
use rm_dpg::{BcKind, Mesh};

use crate::CliError;

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let boundary: Vec<usize> = mesh.boundary_edges().collect();
    let mut s = String::new();
    let _ = writeln!(s, "vertices {} / triangles {} / edges {}", mesh.num_vertices(), mesh.num_triangles(), boundary.len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        let _ = writeln!(s, "{a} {b} {c} {}", t.refinement_edge);
    }
    for e in boundary {
        let [a, b] = mesh.edges()[e].vertices;
        let kind = mesh.edge_kind(e).expect("boundary edges are tagged");
        let _ = writeln!(s, "{a} {b} {}", kind.token());
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, write_mesh_string(mesh)).map_err(|e| CliError::io(path, e))
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, CliError> {
    let tok = tok.ok_or_else(|| CliError::Format(format!("line {line}: missing {what}")))?;
    tok.parse().map_err(|_| CliError::Format(format!("line {line}: invalid {what} '{tok}'")))
}

pub fn read_mesh_str(text: &str) -> Result<Mesh, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or_else(|| CliError::Format("empty mesh file".into()))?;
    let words: Vec<&str> = header.split_whitespace().filter(|w| *w != "/").collect();
    let count = |key: &str| -> Result<usize, CliError> {
        let i = words.iter().position(|w| *w == key).ok_or_else(|| CliError::Format(format!("line {ln}: header lacks '{key}'")))?;
        parse(words.get(i + 1).copied(), ln, key)
    };
    let (nv, nt, ne) = (count("vertices")?, count("triangles")?, count("edges")?);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| CliError::Format("unexpected end of file in vertices".into()))?;
        let mut it = l.split_whitespace();
        vertices.push([parse(it.next(), ln, "x")?, parse(it.next(), ln, "y")?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| CliError::Format("unexpected end of file in triangles".into()))?;
        let mut it = l.split_whitespace();
        let v = [parse(it.next(), ln, "v0")?, parse(it.next(), ln, "v1")?, parse(it.next(), ln, "v2")?];
        let r: u8 = parse(it.next(), ln, "ref_edge")?;
        triangles.push((v, r));
    }
    let mut segments: Vec<BoundarySegment> = Vec::new();
    let mut boundary = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.next().ok_or_else(|| CliError::Format("unexpected end of file in edges".into()))?;
        let mut it = l.split_whitespace();
        let a: usize = parse(it.next(), ln, "v0")?;
        let b: usize = parse(it.next(), ln, "v1")?;
        let tag = it.next().ok_or_else(|| CliError::Format(format!("line {ln}: missing tag")))?;
        let kind = BcKind::from_token(tag).ok_or_else(|| CliError::Format(format!("line {ln}: unknown boundary tag '{tag}'")))?;
        let seg = match segments.iter().position(|s| s.kind == kind) {
            Some(i) => i,
            None => {
                segments.push(BoundarySegment { name: tag.to_string(), kind });
                segments.len() - 1
            }
        };
        boundary.push(([a, b], seg));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(CliError::Format(format!("line {ln}: trailing content")));
    }
    Ok(Mesh::new(vertices, triangles, &boundary, segments)?)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    read_mesh_str(&text)
}
