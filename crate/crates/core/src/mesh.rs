//! Conforming triangulations with tagged boundary segments and
//! newest-vertex bisection.
//!
//! Meshes are index-based: vertex, triangle and edge tables. A mesh is never
//! mutated after construction; refinement returns a new mesh.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Boundary condition attached to a boundary segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BcKind {
    HardClamped,
    SoftClamped,
    HardSimpleSupport,
    SoftSimpleSupport,
    Free,
}

impl BcKind {
    pub const ALL: [BcKind; 5] = [
        BcKind::HardClamped,
        BcKind::SoftClamped,
        BcKind::HardSimpleSupport,
        BcKind::SoftSimpleSupport,
        BcKind::Free,
    ];

    pub fn token(self) -> &'static str {
        match self {
            BcKind::HardClamped => "hc",
            BcKind::SoftClamped => "sc",
            BcKind::HardSimpleSupport => "hss",
            BcKind::SoftSimpleSupport => "sss",
            BcKind::Free => "f",
        }
    }

    pub fn from_token(s: &str) -> Option<BcKind> {
        BcKind::ALL.into_iter().find(|k| k.token() == s)
    }

    /// Part of the boundary with imposed zero deflection.
    pub fn is_deflection_fixed(self) -> bool {
        self != BcKind::Free
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    /// Local index of the refinement edge; edge `i` is opposite vertex `i`.
    pub refinement_edge: u8,
    /// Longest edge length.
    pub diameter: f64,
    pub area: f64,
}

impl Triangle {
    /// Endpoints of local edge `i` in counter-clockwise order.
    pub fn edge_vertices(&self, i: usize) -> [usize; 2] {
        [self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3]]
    }
}

/// Mesh edge. `vertices` is sorted, which fixes the global orientation:
/// tangent from `vertices[0]` to `vertices[1]`, normal equal to the tangent
/// rotated clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Adjacent triangles with the local edge index in each.
    pub triangles: [Option<(usize, u8)>; 2],
    /// Boundary segment index, `None` for interior edges.
    pub segment: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub name: String,
    pub kind: BcKind,
}

/// One triangle's view of one of its edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeView {
    pub edge: usize,
    /// +1 if the counter-clockwise traversal agrees with the global edge
    /// orientation, -1 otherwise.
    pub sign: f64,
    /// Unit outward normal seen from this triangle.
    pub normal: [f64; 2],
    /// Unit tangent, counter-clockwise around this triangle.
    pub tangent: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    segments: Vec<BoundarySegment>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(b[0] - a[0], b[1] - a[1])
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Local index of the longest edge; ties go to the edge whose opposite
/// vertex has the smallest global index.
pub fn longest_edge(coords: &[[f64; 2]], tri: [usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_len = -1.0;
    for i in 0..3 {
        let l = dist(coords[tri[(i + 1) % 3]], coords[tri[(i + 2) % 3]]);
        let better = l > best_len * (1.0 + 1e-12)
            || ((l - best_len).abs() <= 1e-12 * best_len && tri[i] < tri[best]);
        if better {
            best = i;
            best_len = l;
        }
    }
    best as u8
}

impl Mesh {
    /// Assembles a mesh from raw tables.
    ///
    /// Triangles given clockwise are reoriented. Every boundary edge must be
    /// listed in `boundary` with a segment index; interior edges listed there
    /// are rejected.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<([usize; 3], u8)>,
        boundary: &[([usize; 2], usize)],
        segments: Vec<BoundarySegment>,
    ) -> Result<Mesh> {
        for (i, v) in vertices.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::Geometry { element: i, detail: "non-finite vertex".to_string() });
            }
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, &(mut v, mut r)) in triangles.iter().enumerate() {
            if v.iter().any(|&i| i >= vertices.len()) || r > 2 {
                return Err(Error::Geometry { element: t, detail: "index out of range".to_string() });
            }
            let mut area = signed_area(vertices[v[0]], vertices[v[1]], vertices[v[2]]);
            if area < 0.0 {
                // swap vertices 1 and 2; edge opposite vertex 1 <-> opposite vertex 2
                v.swap(1, 2);
                r = match r {
                    1 => 2,
                    2 => 1,
                    x => x,
                };
                area = -area;
            }
            let diameter = (0..3)
                .map(|i| dist(vertices[v[(i + 1) % 3]], vertices[v[(i + 2) % 3]]))
                .fold(0.0, f64::max);
            if !(area > 1e-14 * diameter * diameter) {
                return Err(Error::Geometry { element: t, detail: format!("area {area:e}") });
            }
            tris.push(Triangle { vertices: v, refinement_edge: r, diameter, area });
        }

        let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let mut te = [0usize; 3];
            for (i, slot) in te.iter_mut().enumerate() {
                let [a, b] = tri.edge_vertices(i);
                let k = key(a, b);
                let id = *edge_ids.entry(k).or_insert_with(|| {
                    edges.push(Edge { vertices: [k.0, k.1], triangles: [None, None], segment: None });
                    edges.len() - 1
                });
                let e = &mut edges[id];
                if e.triangles[0].is_none() {
                    e.triangles[0] = Some((t, i as u8));
                } else if e.triangles[1].is_none() {
                    e.triangles[1] = Some((t, i as u8));
                } else {
                    return Err(Error::Geometry { element: t, detail: "edge shared by more than two triangles".to_string() });
                }
                *slot = id;
            }
            tri_edges.push(te);
        }

        for &([a, b], seg) in boundary {
            if seg >= segments.len() {
                return Err(Error::Config(format!("boundary segment index {seg} out of range")));
            }
            let id = *edge_ids
                .get(&key(a, b))
                .ok_or_else(|| Error::Config(format!("boundary edge ({a},{b}) is not a mesh edge")))?;
            if !edges[id].is_boundary() {
                return Err(Error::Config(format!("edge ({a},{b}) is interior but was tagged")));
            }
            edges[id].segment = Some(seg);
        }
        if let Some(e) = edges.iter().find(|e| e.is_boundary() && e.segment.is_none()) {
            return Err(Error::Config(format!(
                "boundary edge ({},{}) carries no boundary condition",
                e.vertices[0], e.vertices[1]
            )));
        }
        Ok(Mesh { vertices, triangles: tris, edges, tri_edges, segments })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn segments(&self) -> &[BoundarySegment] {
        &self.segments
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global edge ids of the local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn edge_kind(&self, e: usize) -> Option<BcKind> {
        self.edges[e].segment.map(|s| self.segments[s].kind)
    }

    /// Whether any boundary edge carries `kind`.
    pub fn has_kind(&self, kind: BcKind) -> bool {
        self.edges.iter().any(|e| e.segment.map(|s| self.segments[s].kind) == Some(kind))
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.edges[e].is_boundary())
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let c = self.triangle_coords(t);
        [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0]
    }

    /// Edge views of triangle `t`, local edge `i` opposite local vertex `i`.
    pub fn edge_views(&self, t: usize) -> [EdgeView; 3] {
        let tri = &self.triangles[t];
        let te = self.tri_edges[t];
        core::array::from_fn(|i| {
            let [a, b] = tri.edge_vertices(i);
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let length = dist(pa, pb);
            let tangent = [(pb[0] - pa[0]) / length, (pb[1] - pa[1]) / length];
            EdgeView {
                edge: te[i],
                sign: if a < b { 1.0 } else { -1.0 },
                normal: [tangent[1], -tangent[0]],
                tangent,
                length,
            }
        })
    }

    /// Edge views for every triangle.
    pub fn skeleton_edges(&self) -> Vec<[EdgeView; 3]> {
        (0..self.triangles.len()).map(|t| self.edge_views(t)).collect()
    }

    /// Global (oriented) unit normal of edge `e`.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let l = dist(pa, pb);
        [(pb[1] - pa[1]) / l, -(pb[0] - pa[0]) / l]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut m = core::f64::consts::PI;
        for t in 0..self.triangles.len() {
            let c = self.triangle_coords(t);
            for i in 0..3 {
                let p = c[i];
                let q = c[(i + 1) % 3];
                let r = c[(i + 2) % 3];
                let u = [q[0] - p[0], q[1] - p[1]];
                let w = [r[0] - p[0], r[1] - p[1]];
                let cosv = (u[0] * w[0] + u[1] * w[1]) / (libm::hypot(u[0], u[1]) * libm::hypot(w[0], w[1]));
                m = m.min(libm::acos(cosv.clamp(-1.0, 1.0)));
            }
        }
        m
    }

    /// Checks the structural invariants: every interior edge has two
    /// triangles seeing it in opposite directions, every boundary edge is
    /// tagged, no vertex lies in the interior of an edge.
    pub fn check_conforming(&self) -> Result<()> {
        for (id, e) in self.edges.iter().enumerate() {
            if let [Some((t0, i0)), Some((t1, i1))] = e.triangles {
                let a = self.triangles[t0].edge_vertices(i0 as usize);
                let b = self.triangles[t1].edge_vertices(i1 as usize);
                if a != [b[1], b[0]] {
                    return Err(Error::Geometry { element: t0, detail: format!("edge {id} not traversed oppositely") });
                }
            } else if e.segment.is_none() {
                return Err(Error::Geometry { element: id, detail: "untagged boundary edge".to_string() });
            }
        }
        // Hanging vertices show up as vertices strictly inside an edge.
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in &t.vertices {
                used[v] = true;
            }
        }
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            let [a, b] = e.vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let l2 = (pb[0] - pa[0]) * (pb[0] - pa[0]) + (pb[1] - pa[1]) * (pb[1] - pa[1]);
            for (v, p) in self.vertices.iter().enumerate() {
                if !used[v] || v == a || v == b {
                    continue;
                }
                let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / l2;
                let cross = signed_area(pa, pb, *p).abs();
                if s > 1e-12 && s < 1.0 - 1e-12 && cross < 1e-14 * l2 {
                    return Err(Error::Geometry { element: v, detail: "hanging vertex".to_string() });
                }
            }
        }
        let area: f64 = self.total_area();
        if !(area > 0.0) {
            return Err(Error::Geometry { element: 0, detail: "empty mesh".to_string() });
        }
        Ok(())
    }

    /// Newest-vertex bisection of the marked triangles plus the closure
    /// needed to keep the mesh conforming.
    pub fn refine_nvb(&self, marked: &[usize]) -> Mesh {
        let ne = self.edges.len();
        let mut edge_marked = vec![false; ne];
        let mut queue = Vec::new();
        let mark = |e: usize, edge_marked: &mut Vec<bool>, queue: &mut Vec<usize>| {
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.push(e);
            }
        };
        for &t in marked {
            let e = self.tri_edges[t][self.triangles[t].refinement_edge as usize];
            mark(e, &mut edge_marked, &mut queue);
        }
        // closure: a triangle with any marked edge needs its refinement edge marked
        while let Some(e) = queue.pop() {
            for (t, _) in self.edges[e].triangles.iter().flatten() {
                let re = self.tri_edges[*t][self.triangles[*t].refinement_edge as usize];
                mark(re, &mut edge_marked, &mut queue);
            }
        }
        self.bisect_edges(&edge_marked)
    }

    /// Splits every edge, which bisects every triangle twice.
    pub fn refine_uniform(&self) -> Mesh {
        self.bisect_edges(&vec![true; self.edges.len()])
    }

    /// Bisects a closed set of edges (every triangle with a marked edge has
    /// its refinement edge marked).
    fn bisect_edges(&self, edge_marked: &[bool]) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (id, e) in self.edges.iter().enumerate() {
            if edge_marked[id] {
                let [a, b] = e.vertices;
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                midpoint.insert((a, b), vertices.len() - 1);
            }
        }

        fn bisect(
            n: [usize; 3],
            midpoint: &BTreeMap<(usize, usize), usize>,
            out: &mut Vec<([usize; 3], u8)>,
        ) {
            // n[0]-n[1] is the refinement edge, counter-clockwise order
            match midpoint.get(&key(n[0], n[1])) {
                Some(&m) => {
                    bisect([n[2], n[0], m], midpoint, out);
                    bisect([n[1], n[2], m], midpoint, out);
                }
                None => out.push((n, 2)),
            }
        }

        let mut tris = Vec::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            let r = tri.refinement_edge as usize;
            let v = tri.vertices;
            let [a, b] = tri.edge_vertices(r);
            if midpoint.contains_key(&key(a, b)) {
                bisect([a, b, v[r]], &midpoint, &mut tris);
            } else {
                tris.push((v, tri.refinement_edge));
            }
        }

        let mut boundary = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            if let Some(seg) = e.segment {
                let [a, b] = e.vertices;
                if edge_marked[id] {
                    let m = midpoint[&(a, b)];
                    boundary.push(([a, m], seg));
                    boundary.push(([m, b], seg));
                } else {
                    boundary.push(([a, b], seg));
                }
            }
        }
        Mesh::new(vertices, tris, &boundary, self.segments.clone())
            .expect("bisection of a valid mesh is valid")
    }
}

/// Boundary conditions per side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareBc {
    pub left: BcKind,
    pub right: BcKind,
    pub bottom: BcKind,
    pub top: BcKind,
}

impl SquareBc {
    pub fn uniform(kind: BcKind) -> SquareBc {
        SquareBc { left: kind, right: kind, bottom: kind, top: kind }
    }
}

/// Boundary conditions per side of the L-shaped domain
/// (-1,1)^2 \ [-1,0]^2. The two re-entrant sides meet at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LShapeBc {
    pub bottom: BcKind,
    pub right: BcKind,
    pub top: BcKind,
    pub left: BcKind,
    /// Side on y = 0, -1 <= x <= 0.
    pub reentrant_x: BcKind,
    /// Side on x = 0, -1 <= y <= 0.
    pub reentrant_y: BcKind,
}

impl LShapeBc {
    pub fn uniform(kind: BcKind) -> LShapeBc {
        LShapeBc { bottom: kind, right: kind, top: kind, left: kind, reentrant_x: kind, reentrant_y: kind }
    }

    /// Clamped at the re-entrant corner, free elsewhere.
    pub fn clamped_corner() -> LShapeBc {
        LShapeBc {
            reentrant_x: BcKind::HardClamped,
            reentrant_y: BcKind::HardClamped,
            ..LShapeBc::uniform(BcKind::Free)
        }
    }
}

const GEOM_TOL: f64 = 1e-12;

fn tag_boundary(
    vertices: &[[f64; 2]],
    tris: &[([usize; 3], u8)],
    classify: impl Fn([f64; 2]) -> Option<usize>,
) -> Vec<([usize; 2], usize)> {
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (v, _) in tris {
        for i in 0..3 {
            *count.entry(key(v[(i + 1) % 3], v[(i + 2) % 3])).or_insert(0) += 1;
        }
    }
    count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .filter_map(|((a, b), _)| {
            let m = [0.5 * (vertices[a][0] + vertices[b][0]), 0.5 * (vertices[a][1] + vertices[b][1])];
            classify(m).map(|s| ([a, b], s))
        })
        .collect()
}

fn with_refinement_edges(vertices: &[[f64; 2]], tris: Vec<[usize; 3]>) -> Vec<([usize; 3], u8)> {
    tris.into_iter().map(|t| (t, longest_edge(vertices, t))).collect()
}

/// Uniform mesh of the unit square with `2 n^2` right triangles, all
/// diagonals running from lower-left to upper-right.
pub fn build_structured_square(n: usize, bc: SquareBc) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".to_string()));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let tris = with_refinement_edges(&vertices, tris);
    let segments = vec![
        BoundarySegment { name: "left".to_string(), kind: bc.left },
        BoundarySegment { name: "right".to_string(), kind: bc.right },
        BoundarySegment { name: "bottom".to_string(), kind: bc.bottom },
        BoundarySegment { name: "top".to_string(), kind: bc.top },
    ];
    let boundary = tag_boundary(&vertices, &tris, |m| {
        if m[0].abs() < GEOM_TOL {
            Some(0)
        } else if (m[0] - 1.0).abs() < GEOM_TOL {
            Some(1)
        } else if m[1].abs() < GEOM_TOL {
            Some(2)
        } else if (m[1] - 1.0).abs() < GEOM_TOL {
            Some(3)
        } else {
            None
        }
    });
    Mesh::new(vertices, tris, &boundary, segments)
}

/// Mesh of the L-shaped domain (-1,1)^2 \ [-1,0]^2 made of three unit
/// blocks with `n x n` squares each. Every square is split along the
/// diagonal pointing away from the re-entrant corner.
pub fn build_lshape(n: usize, bc: LShapeBc) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".to_string()));
    }
    let side = 2 * n;
    let inside = |i: usize, j: usize| i >= n || j >= n;
    let mut id = vec![usize::MAX; (side + 1) * (side + 1)];
    let mut vertices = Vec::new();
    for j in 0..=side {
        for i in 0..=side {
            if inside(i, j) {
                id[j * (side + 1) + i] = vertices.len();
                vertices.push([-1.0 + i as f64 / n as f64, -1.0 + j as f64 / n as f64]);
            }
        }
    }
    let v = |i: usize, j: usize| id[j * (side + 1) + i];
    let mut tris = Vec::with_capacity(6 * n * n);
    for j in 0..side {
        for i in 0..side {
            if i < n && j < n {
                continue;
            }
            let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            if i >= n && j >= n {
                // upper-right block: diagonal from the origin side to (1,1)
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                // upper-left and lower-right blocks: the other diagonal
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    let tris = with_refinement_edges(&vertices, tris);
    let segments = vec![
        BoundarySegment { name: "bottom".to_string(), kind: bc.bottom },
        BoundarySegment { name: "right".to_string(), kind: bc.right },
        BoundarySegment { name: "top".to_string(), kind: bc.top },
        BoundarySegment { name: "left".to_string(), kind: bc.left },
        BoundarySegment { name: "reentrant_x".to_string(), kind: bc.reentrant_x },
        BoundarySegment { name: "reentrant_y".to_string(), kind: bc.reentrant_y },
    ];
    let boundary = tag_boundary(&vertices, &tris, |m| {
        if (m[1] + 1.0).abs() < GEOM_TOL {
            Some(0)
        } else if (m[0] - 1.0).abs() < GEOM_TOL {
            Some(1)
        } else if (m[1] - 1.0).abs() < GEOM_TOL {
            Some(2)
        } else if (m[0] + 1.0).abs() < GEOM_TOL {
            Some(3)
        } else if m[1].abs() < GEOM_TOL && m[0] < 0.0 {
            Some(4)
        } else if m[0].abs() < GEOM_TOL && m[1] < 0.0 {
            Some(5)
        } else {
            None
        }
    });
    Mesh::new(vertices, tris, &boundary, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hc_square(n: usize) -> Mesh {
        build_structured_square(n, SquareBc::uniform(BcKind::HardClamped)).unwrap()
    }

    #[test]
    fn square_counts() {
        let m = hc_square(1);
        assert_eq!((m.num_triangles(), m.num_vertices(), m.num_edges()), (2, 4, 5));
        assert_eq!(m.boundary_edges().count(), 4);
        let m = hc_square(2);
        assert_eq!((m.num_triangles(), m.num_vertices()), (8, 9));
    }

    #[test]
    fn square_tags() {
        let m = hc_square(4);
        for e in 0..m.num_edges() {
            if m.edges()[e].is_boundary() {
                assert_eq!(m.edge_kind(e), Some(BcKind::HardClamped));
            } else {
                assert_eq!(m.edge_kind(e), None);
            }
        }
        m.check_conforming().unwrap();
    }

    #[test]
    fn square_refinement_edges_are_hypotenuses() {
        let m = hc_square(3);
        for t in m.triangles() {
            let [a, b] = t.edge_vertices(t.refinement_edge as usize);
            let l = dist(m.vertices()[a], m.vertices()[b]);
            assert!((l - t.diameter).abs() < 1e-15);
        }
    }

    #[test]
    fn lshape_geometry_and_tags() {
        let m = build_lshape(1, LShapeBc::clamped_corner()).unwrap();
        assert_eq!(m.num_triangles(), 6);
        for n in 1..4 {
            let m = build_lshape(n, LShapeBc::clamped_corner()).unwrap();
            assert!((m.total_area() - 3.0).abs() < 1e-13);
            m.check_conforming().unwrap();
            for e in m.boundary_edges() {
                let [a, b] = m.edges()[e].vertices;
                let (pa, pb) = (m.vertices()[a], m.vertices()[b]);
                let on_reentrant = (pa[1] == 0.0 && pb[1] == 0.0 && pa[0] <= 0.0 && pb[0] <= 0.0)
                    || (pa[0] == 0.0 && pb[0] == 0.0 && pa[1] <= 0.0 && pb[1] <= 0.0);
                let expect = if on_reentrant { BcKind::HardClamped } else { BcKind::Free };
                assert_eq!(m.edge_kind(e), Some(expect));
            }
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = hc_square(2);
        assert_eq!(m.refine_nvb(&[]), m);
    }

    #[test]
    fn uniform_refinement_of_two_triangles() {
        let m = hc_square(1).refine_uniform();
        assert_eq!(m.num_triangles(), 8);
        m.check_conforming().unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_mark_closure() {
        let m = hc_square(2);
        for t in 0..m.num_triangles() {
            let r = m.refine_nvb(&[t]);
            r.check_conforming().unwrap();
            assert!(r.num_triangles() > 9 && r.num_triangles() < 16, "{}", r.num_triangles());
        }
    }

    #[test]
    fn edge_views_are_opposite_on_interior_edges() {
        let m = hc_square(1);
        let views = m.skeleton_edges();
        let mut seen = BTreeMap::new();
        for v in views.iter().flatten() {
            seen.entry(v.edge).or_insert_with(Vec::new).push(*v);
        }
        let interior: Vec<_> = seen.values().filter(|v| v.len() == 2).collect();
        assert_eq!(interior.len(), 1);
        let (a, b) = (interior[0][0], interior[0][1]);
        assert_eq!(a.sign, -b.sign);
        assert!((a.normal[0] + b.normal[0]).abs() < 1e-15 && (a.normal[1] + b.normal[1]).abs() < 1e-15);
        assert!(seen.values().filter(|v| v.len() == 1).count() == 4);
    }

    #[test]
    fn closed_boundary_integral_of_constant_field_vanishes() {
        let m = build_lshape(2, LShapeBc::clamped_corner()).unwrap().refine_nvb(&[0, 5, 9]);
        let c = [0.3, -1.7];
        for views in m.skeleton_edges() {
            let s: f64 = views.iter().map(|v| v.length * (v.normal[0] * c[0] + v.normal[1] * c[1])).sum();
            assert!(s.abs() < 1e-14);
        }
        // interior views cancel pairwise, so the sum over all triangles is
        // the boundary flux
        let total: f64 = m
            .skeleton_edges()
            .iter()
            .flatten()
            .filter(|v| !m.edges()[v.edge].is_boundary())
            .map(|v| v.length * (v.normal[0] * c[0] + v.normal[1] * c[1]))
            .sum();
        assert!(total.abs() < 1e-13);
    }

    #[test]
    fn tags_inherited_by_children() {
        let bc = SquareBc {
            left: BcKind::HardClamped,
            right: BcKind::Free,
            bottom: BcKind::SoftClamped,
            top: BcKind::HardSimpleSupport,
        };
        let m = build_structured_square(2, bc).unwrap().refine_uniform().refine_nvb(&[0, 3]);
        for e in m.boundary_edges() {
            let [a, b] = m.edges()[e].vertices;
            let mid = [
                0.5 * (m.vertices()[a][0] + m.vertices()[b][0]),
                0.5 * (m.vertices()[a][1] + m.vertices()[b][1]),
            ];
            let expect = if mid[0] == 0.0 {
                bc.left
            } else if mid[0] == 1.0 {
                bc.right
            } else if mid[1] == 0.0 {
                bc.bottom
            } else {
                bc.top
            };
            assert_eq!(m.edge_kind(e), Some(expect));
        }
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let seg = vec![BoundarySegment { name: "all".to_string(), kind: BcKind::Free }];
        let m = Mesh::new(v, vec![([0, 2, 1], 1)], &[([0, 1], 0), ([1, 2], 0), ([2, 0], 0)], seg).unwrap();
        assert!(m.triangles()[0].area > 0.0);
        let t = &m.triangles()[0];
        // the refinement edge is still the edge between vertices 0 and 1
        let mut e = t.edge_vertices(t.refinement_edge as usize);
        e.sort();
        assert_eq!(e, [0, 1]);
    }
}
