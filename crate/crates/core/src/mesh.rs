//! Conforming triangulations of the unit square and the L-shape, with red
//! (uniform) refinement and newest-vertex bisection.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

const GEOM_TOL: f64 = 1e-12;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh invariant violated: {0}")]
    InvariantViolation(String),
}

/// Computational domain. Determines the geometric boundary predicate and the
/// reference area used by the invariant checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// (0,1) x (0,1)
    UnitSquare,
    /// (-1,1)^2 with the lower-right quadrant [0,1) x (-1,0] removed
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    /// Whether `p` lies on the domain boundary (within a small tolerance).
    pub fn on_boundary(self, p: [f64; 2]) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() <= 1e-10;
        let [x, y] = p;
        match self {
            Domain::UnitSquare => near(x, 0.0) || near(x, 1.0) || near(y, 0.0) || near(y, 1.0),
            Domain::LShape => {
                near(x.abs(), 1.0)
                    || near(y.abs(), 1.0)
                    || (near(x, 0.0) && y <= 1e-10)
                    || (near(y, 0.0) && x >= -1e-10)
            }
        }
    }
}

/// Edge connectivity derived from a triangle list.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    /// Edge endpoints, smaller vertex index first.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, the edge opposite each local vertex.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Triangles adjacent to each edge (second entry `None` on the boundary).
    pub edge_triangles: Vec<[Option<usize>; 2]>,
}

impl EdgeTopology {
    fn build(triangles: &[[usize; 3]]) -> Result<Self, MeshError> {
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (e, slot) in local.iter_mut().enumerate() {
                let key = edge_key(tri[(e + 1) % 3], tri[(e + 2) % 3]);
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push([None, None]);
                    edges.len() - 1
                });
                let adj = &mut edge_triangles[id];
                if adj[0].is_none() {
                    adj[0] = Some(t);
                } else if adj[1].is_none() {
                    adj[1] = Some(t);
                } else {
                    return Err(MeshError::InvariantViolation(format!(
                        "edge {key:?} shared by more than two triangles"
                    )));
                }
                *slot = id;
            }
            triangle_edges.push(local);
        }
        Ok(Self { edges, triangle_edges, edge_triangles })
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e][1].is_none()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// A conforming triangulation together with its refinement history.
///
/// Meshes are immutable; refinement produces a new mesh that keeps an `Arc`
/// to its parent and the map from each child triangle to the parent triangle
/// containing it. That ancestry is what makes prolongation between nested
/// finite element spaces exact.
#[derive(Debug)]
pub struct Mesh {
    id: u64,
    domain: Domain,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    refinement_edge: Vec<u8>,
    level: usize,
    parent: Option<Arc<Mesh>>,
    parent_triangle: Vec<usize>,
    topology: OnceLock<EdgeTopology>,
}

impl Mesh {
    fn assemble(
        domain: Domain,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
        level: usize,
        parent: Option<(Arc<Mesh>, Vec<usize>)>,
    ) -> Result<Mesh, MeshError> {
        let topology = EdgeTopology::build(&triangles)?;
        let mut boundary = vec![false; vertices.len()];
        for (e, [a, b]) in topology.edges.iter().enumerate() {
            if topology.is_boundary_edge(e) {
                boundary[*a] = true;
                boundary[*b] = true;
            }
        }
        let (parent, parent_triangle) = match parent {
            Some((p, map)) => (Some(p), map),
            None => (None, Vec::new()),
        };
        let cell = OnceLock::new();
        let _ = cell.set(topology);
        Ok(Mesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            domain,
            vertices,
            triangles,
            boundary,
            refinement_edge,
            level,
            parent,
            parent_triangle,
            topology: cell,
        })
    }

    /// Build a mesh from raw data. Refinement edges follow the longest-edge
    /// rule. Mainly useful for tests and for reading meshes back in.
    pub fn from_parts(
        domain: Domain,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Arc<Mesh>, MeshError> {
        if let Some(bad) = triangles.iter().flatten().find(|&&v| v >= vertices.len()) {
            return Err(MeshError::InvalidArgument(format!("vertex index {bad} out of range")));
        }
        let refinement_edge = triangles.iter().map(|t| longest_edge(&vertices, t)).collect();
        Ok(Arc::new(Mesh::assemble(domain, vertices, triangles, refinement_edge, 0, None)?))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn parent(&self) -> Option<&Arc<Mesh>> {
        self.parent.as_ref()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn topology(&self) -> &EdgeTopology {
        self.topology
            .get_or_init(|| EdgeTopology::build(&self.triangles).expect("validated at construction"))
    }

    pub fn num_edges(&self) -> usize {
        self.topology().len()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle `t` (positive for counter-clockwise ordering).
    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(self.triangle_coords(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_coords(t);
        dist(p0, p1).max(dist(p1, p2)).max(dist(p2, p0))
    }

    /// Mesh size h: the largest triangle diameter.
    pub fn h(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// For every triangle of `self`, the triangle of the ancestor mesh with
    /// id `ancestor_id` that contains it. `None` if that mesh is not an
    /// ancestor (or `self`).
    pub fn ancestor_triangles(&self, ancestor_id: u64) -> Option<Vec<usize>> {
        if self.id == ancestor_id {
            return Some((0..self.num_triangles()).collect());
        }
        let parent = self.parent.as_ref()?;
        let up = parent.ancestor_triangles(ancestor_id)?;
        Some(self.parent_triangle.iter().map(|&p| up[p]).collect())
    }

    pub fn is_refinement_of(&self, ancestor: &Mesh) -> bool {
        let mut cur = Some(self);
        while let Some(m) = cur {
            if m.id == ancestor.id {
                return true;
            }
            cur = m.parent.as_deref();
        }
        false
    }

    /// Find a triangle containing `p` and the barycentric coordinates of `p`
    /// in it. Linear scan; intended for evaluation in tests and diagnostics.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        (0..self.num_triangles()).find_map(|t| {
            let bary = barycentric(self.triangle_coords(t), p);
            (bary.iter().all(|&l| l >= -1e-12)).then_some((t, bary))
        })
    }

    /// Check every structural invariant: positive orientation, conformity,
    /// boundary flags and total area.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.num_triangles() {
            let a = self.signed_area(t);
            if a <= 0.0 {
                return Err(MeshError::InvariantViolation(format!(
                    "triangle {t} has nonpositive area {a:e}"
                )));
            }
        }
        let topo = EdgeTopology::build(&self.triangles)?;
        for (e, [a, b]) in topo.edges.iter().enumerate() {
            if !topo.is_boundary_edge(e) {
                continue;
            }
            let mid = midpoint(self.vertices[*a], self.vertices[*b]);
            if !self.domain.on_boundary(mid) {
                return Err(MeshError::InvariantViolation(format!(
                    "edge {a}-{b} has a single neighbour but lies inside the domain (hanging node)"
                )));
            }
            if !self.boundary[*a] || !self.boundary[*b] {
                return Err(MeshError::InvariantViolation(format!(
                    "boundary edge {a}-{b} has an unflagged endpoint"
                )));
            }
        }
        for (v, &flag) in self.boundary.iter().enumerate() {
            if flag && !self.domain.on_boundary(self.vertices[v]) {
                return Err(MeshError::InvariantViolation(format!(
                    "vertex {v} flagged as boundary but lies inside the domain"
                )));
            }
        }
        let area = self.total_area();
        let expected = self.domain.area();
        if ((area - expected) / expected).abs() > GEOM_TOL {
            return Err(MeshError::InvariantViolation(format!(
                "total area {area} differs from domain area {expected}"
            )));
        }
        Ok(())
    }

    /// Write the plain text mesh format: `NV NT`, then `x y flag` per vertex,
    /// then `i j k` per triangle (0-based).
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.num_vertices(), self.num_triangles())?;
        for (p, &flag) in self.vertices.iter().zip(&self.boundary) {
            writeln!(w, "{:.17e} {:.17e} {}", p[0], p[1], u8::from(flag))?;
        }
        for [i, j, k] in &self.triangles {
            writeln!(w, "{i} {j} {k}")?;
        }
        Ok(())
    }
}

pub(crate) fn signed_area([p0, p1, p2]: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

pub(crate) fn barycentric(coords: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let [p0, p1, p2] = coords;
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let dx = p[0] - p0[0];
    let dy = p[1] - p0[1];
    let l1 = (dx * (p2[1] - p0[1]) - (p2[0] - p0[0]) * dy) / det;
    let l2 = ((p1[0] - p0[0]) * dy - dx * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Local index of the refinement edge (the edge opposite that local vertex):
/// the longest edge, ties broken by the smallest opposite-vertex index.
fn longest_edge(vertices: &[[f64; 2]], tri: &[usize; 3]) -> u8 {
    let len = |e: usize| dist(vertices[tri[(e + 1) % 3]], vertices[tri[(e + 2) % 3]]);
    let mut best = 0usize;
    for e in 1..3 {
        let (le, lb) = (len(e), len(best));
        if le > lb * (1.0 + 1e-12) || ((le - lb).abs() <= lb * 1e-12 && tri[e] < tri[best]) {
            best = e;
        }
    }
    best as u8
}

fn structured(
    domain: Domain,
    n: usize,
    origin: [f64; 2],
    cells: usize,
    keep_cell: impl Fn(usize, usize) -> bool,
) -> Result<Arc<Mesh>, MeshError> {
    let step = 1.0 / n as f64;
    let mut index = vec![usize::MAX; (cells + 1) * (cells + 1)];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<[f64; 2]>| {
        let k = j * (cells + 1) + i;
        if index[k] == usize::MAX {
            index[k] = vertices.len();
            vertices.push([origin[0] + i as f64 * step, origin[1] + j as f64 * step]);
        }
        index[k]
    };
    // Visit vertices in lexicographic order first so numbering is row-major.
    for j in 0..=cells {
        for i in 0..=cells {
            let touches = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j.wrapping_sub(1))]
                .iter()
                .any(|&(ci, cj)| ci < cells && cj < cells && keep_cell(ci, cj));
            if touches {
                vid(i, j, &mut vertices);
            }
        }
    }
    for j in 0..cells {
        for i in 0..cells {
            if !keep_cell(i, j) {
                continue;
            }
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let refinement_edge = triangles.iter().map(|t| longest_edge(&vertices, t)).collect();
    Ok(Arc::new(Mesh::assemble(domain, vertices, triangles, refinement_edge, 0, None)?))
}

/// Uniform mesh of the unit square with `n` cells per side, each cell split
/// along its lower-left to upper-right diagonal.
pub fn generate_unit_square(n: usize) -> Result<Arc<Mesh>, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidArgument("unit square needs n >= 1".into()));
    }
    structured(Domain::UnitSquare, n, [0.0, 0.0], n, |_, _| true)
}

/// Uniform mesh of the L-shape with `n` cells per unit length.
pub fn generate_l_shape(n: usize) -> Result<Arc<Mesh>, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidArgument("L-shape needs n >= 1".into()));
    }
    // Cells with lower-left corner in [0,1) x [-1,0) are removed.
    structured(Domain::LShape, n, [-1.0, -1.0], 2 * n, move |i, j| !(i >= n && j < n))
}

/// Regular (red) refinement: every triangle is split into four congruent
/// children through its edge midpoints.
pub fn refine_red(mesh: &Arc<Mesh>) -> Arc<Mesh> {
    let topo = mesh.topology();
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(topo.edges.iter().map(|&[a, b]| midpoint(mesh.vertices[a], mesh.vertices[b])));
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut parent_triangle = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let [e0, e1, e2] = topo.triangle_edges[t];
        // e0 = bc, e1 = ca, e2 = ab
        let (m_bc, m_ca, m_ab) = (nv + e0, nv + e1, nv + e2);
        triangles.push([a, m_ab, m_ca]);
        triangles.push([m_ab, b, m_bc]);
        triangles.push([m_ca, m_bc, c]);
        triangles.push([m_ab, m_bc, m_ca]);
        parent_triangle.extend([t; 4]);
    }
    let refinement_edge = triangles.iter().map(|t| longest_edge(&vertices, t)).collect();
    Arc::new(
        Mesh::assemble(
            mesh.domain,
            vertices,
            triangles,
            refinement_edge,
            mesh.level + 1,
            Some((Arc::clone(mesh), parent_triangle)),
        )
        .expect("red refinement of a valid mesh is valid"),
    )
}

/// Newest-vertex bisection of the marked triangles plus the closure needed
/// to keep the mesh conforming. Every marked triangle is bisected at least
/// once. An empty marking returns the input mesh itself.
pub fn refine_bisection(mesh: &Arc<Mesh>, marked: &[usize]) -> Result<Arc<Mesh>, MeshError> {
    if let Some(&bad) = marked.iter().find(|&&t| t >= mesh.num_triangles()) {
        return Err(MeshError::InvalidArgument(format!(
            "marked triangle {bad} out of range (mesh has {})",
            mesh.num_triangles()
        )));
    }
    if marked.is_empty() {
        return Ok(Arc::clone(mesh));
    }
    let refedge = |t: usize| -> [usize; 2] {
        let tri = mesh.triangles[t];
        let r = mesh.refinement_edge[t] as usize;
        edge_key(tri[(r + 1) % 3], tri[(r + 2) % 3])
    };
    let topo = mesh.topology();
    let mut marked_edges: HashSet<[usize; 2]> = marked.iter().map(|&t| refedge(t)).collect();

    // Closure: a triangle with any marked edge must also split its refinement edge.
    loop {
        let mut changed = false;
        for t in 0..mesh.num_triangles() {
            let own = refedge(t);
            if marked_edges.contains(&own) {
                continue;
            }
            let has_marked = topo.triangle_edges[t]
                .iter()
                .any(|&e| marked_edges.contains(&topo.edges[e]));
            if has_marked {
                marked_edges.insert(own);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<[usize; 2], usize> = HashMap::new();
    // (vertices with the newest vertex first, ancestor triangle)
    let mut current: Vec<([usize; 3], usize)> = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let r = mesh.refinement_edge[t] as usize;
            ([tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]], t)
        })
        .collect();
    loop {
        let mut any = false;
        let mut next = Vec::with_capacity(current.len() + 16);
        for ([a, b, c], anc) in current {
            let key = edge_key(b, c);
            if marked_edges.contains(&key) {
                let m = *midpoints.entry(key).or_insert_with(|| {
                    vertices.push(midpoint(vertices[b], vertices[c]));
                    vertices.len() - 1
                });
                next.push(([m, a, b], anc));
                next.push(([m, c, a], anc));
                any = true;
            } else {
                next.push(([a, b, c], anc));
            }
        }
        current = next;
        if !any {
            break;
        }
    }
    let triangles: Vec<[usize; 3]> = current.iter().map(|(t, _)| *t).collect();
    let parent_triangle: Vec<usize> = current.iter().map(|(_, a)| *a).collect();
    let refinement_edge = vec![0u8; triangles.len()];
    let refined = Mesh::assemble(
        mesh.domain,
        vertices,
        triangles,
        refinement_edge,
        mesh.level + 1,
        Some((Arc::clone(mesh), parent_triangle)),
    )?;
    Ok(Arc::new(refined))
}
