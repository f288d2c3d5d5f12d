//! Conforming triangulations of the unit square, uniform red refinement and
//! the prolongation operator between nested P1 spaces.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub type Point = [f64; 2];

/// An edge with one (boundary) or two (interior) incident triangles.
///
/// `triangles[0]` is always the lower-indexed triangle; its outward normal
/// orients jumps across the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [usize; 2],
    /// Local index (0..3) of this edge inside each incident triangle.
    pub local: [usize; 2],
    pub boundary: bool,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.boundary
    }
}

/// Link from a refined mesh back to the mesh it was obtained from.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub parent: Arc<TriMesh>,
    /// Children of each parent triangle.
    pub children: Vec<[usize; 4]>,
    /// For every vertex created by the refinement (indices
    /// `parent.num_vertices()..`), the endpoints of the parent edge it bisects.
    pub midpoint_of: Vec<[usize; 2]>,
}

/// Geometric data of one triangle, all constant over the element for P1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    /// Longest edge.
    pub diameter: f64,
    /// Gradients of the three barycentric coordinates.
    pub basis_gradients: [Point; 3],
    /// `edge_lengths[i]` is the length of the edge opposite local vertex `i`.
    pub edge_lengths: [f64; 3],
    /// Unit outward normal of the edge opposite local vertex `i`.
    pub outward_normals: [Point; 3],
}

/// A conforming triangulation with counterclockwise triangles.
///
/// Local edge `i` of a triangle joins its vertices `(i+1)%3` and `(i+2)%3`.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    refinement: Option<Refinement>,
    /// Cells per side of the structured mesh this one descends from.
    cells_per_side: Option<usize>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

impl TriMesh {
    /// Build a mesh from raw vertex coordinates and triangles.
    ///
    /// Triangles are reoriented counterclockwise if necessary; edge topology is
    /// derived and conformity checked (no edge with more than two triangles).
    pub fn from_parts(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!(
                    "triangle {k} references a missing vertex"
                )));
            }
            let area = signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if area.abs() <= f64::EPSILON * 1e-3 {
                return Err(Error::DegenerateElement { index: k, area });
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
        }
        let (edges, triangle_edges) = build_edges(&triangles)?;
        Ok(TriMesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            refinement: None,
            cells_per_side: None,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge indices of the three local edges of triangle `k`.
    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.triangle_edges[k]
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

    pub fn refinement(&self) -> Option<&Refinement> {
        self.refinement.as_ref()
    }

    pub fn parent(&self) -> Option<&Arc<TriMesh>> {
        self.refinement.as_ref().map(|r| &r.parent)
    }

    /// Cells per side for meshes built by [`unit_square_mesh`] and refinements
    /// of them; `None` for meshes assembled from raw parts.
    pub fn cells_per_side(&self) -> Option<usize> {
        self.cells_per_side
    }

    /// Number of refinement levels between this mesh and the root of its chain.
    pub fn depth(&self) -> usize {
        self.parent().map_or(0, |p| p.depth() + 1)
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.area(k)).sum()
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        self.geometries()
            .iter()
            .map(|g| g.diameter)
            .fold(0.0, f64::max)
    }

    /// Cell width `1/n` of the structured family, falling back to the
    /// maximum diameter for unstructured input.
    pub fn cell_width(&self) -> f64 {
        match self.cells_per_side {
            Some(n) => 1.0 / n as f64,
            None => self.max_diameter(),
        }
    }

    pub fn element_geometry(&self, k: usize) -> Result<ElementGeometry> {
        if k >= self.num_triangles() {
            return Err(Error::Mesh(format!("triangle index {k} out of range")));
        }
        let p = self.triangle_points(k);
        element_geometry_of(&p).ok_or(Error::DegenerateElement {
            index: k,
            area: self.area(k),
        })
    }

    /// Geometry of every triangle, in triangle order.
    pub fn geometries(&self) -> Vec<ElementGeometry> {
        (0..self.num_triangles())
            .map(|k| {
                element_geometry_of(&self.triangle_points(k)).expect("validated at construction")
            })
            .collect()
    }

    /// Vertices renumbered by `perm` (new index of old vertex `i` is `perm[i]`).
    pub fn renumbered(&self, perm: &[usize]) -> Result<TriMesh> {
        if perm.len() != self.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vertices(),
                found: perm.len(),
            });
        }
        let mut vertices = vec![[0.0; 2]; self.num_vertices()];
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]])
            .collect();
        let mut mesh = TriMesh::from_parts(vertices, triangles)?;
        mesh.cells_per_side = self.cells_per_side;
        Ok(mesh)
    }

    /// Barycentric coordinates of `x` with respect to triangle `k`.
    pub fn barycentric(&self, k: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(k);
        let area = signed_area(&a, &b, &c);
        let l0 = signed_area(&x, &b, &c) / area;
        let l1 = signed_area(&a, &x, &c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Triangle containing `x` (closed), found by linear search.
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.num_triangles()).find(|&k| self.barycentric(k, x).iter().all(|&l| l >= -1e-12))
    }
}

fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn element_geometry_of(p: &[Point; 3]) -> Option<ElementGeometry> {
    let area = signed_area(&p[0], &p[1], &p[2]);
    if area <= 0.0 {
        return None;
    }
    let mut basis_gradients = [[0.0; 2]; 3];
    let mut edge_lengths = [0.0; 3];
    let mut outward_normals = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        // Rotating the edge a->b by +90 degrees points into the triangle.
        let inward = [a[1] - b[1], b[0] - a[0]];
        let len = (inward[0] * inward[0] + inward[1] * inward[1]).sqrt();
        basis_gradients[i] = [inward[0] / (2.0 * area), inward[1] / (2.0 * area)];
        edge_lengths[i] = len;
        outward_normals[i] = [-inward[0] / len, -inward[1] / len];
    }
    let diameter = edge_lengths.iter().copied().fold(0.0, f64::max);
    Some(ElementGeometry {
        area,
        diameter,
        basis_gradients,
        edge_lengths,
        outward_normals,
    })
}

fn build_edges(triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
    let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 2);
    let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let a = t[(i + 1) % 3];
            let b = t[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            match lookup.get(&key) {
                Some(&e) => {
                    let edge = &mut edges[e];
                    if !edge.boundary {
                        return Err(Error::Mesh(format!(
                            "edge {key:?} shared by more than two triangles"
                        )));
                    }
                    // Counterclockwise neighbours traverse a shared edge in opposite directions.
                    let (t0, l0) = (edge.triangles[0], edge.local[0]);
                    let first = triangles[t0][(l0 + 1) % 3];
                    if first != b {
                        return Err(Error::Mesh(format!(
                            "inconsistent orientation across edge {key:?}"
                        )));
                    }
                    edge.triangles[1] = k;
                    edge.local[1] = i;
                    edge.boundary = false;
                    triangle_edges[k][i] = e;
                }
                None => {
                    lookup.insert(key, edges.len());
                    triangle_edges[k][i] = edges.len();
                    edges.push(Edge {
                        vertices: [a, b],
                        triangles: [k, k],
                        local: [i, i],
                        boundary: true,
                    });
                }
            }
        }
    }
    Ok((edges, triangle_edges))
}

/// Structured mesh of `(0,1)^2` with `n` cells per side, each square split
/// along its `(i,j)-(i+1,j+1)` diagonal.
pub fn unit_square_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::param("mesh.n", "must be at least 1"));
    }
    let stride = n + 1;
    let nf = n as f64;
    let vertices = (0..stride)
        .flat_map(|j| (0..stride).map(move |i| [i as f64 / nf, j as f64 / nf]))
        .collect();
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = TriMesh::from_parts(vertices, triangles)?;
    mesh.cells_per_side = Some(n);
    Ok(mesh)
}

/// Split every triangle into four congruent children through its edge
/// midpoints. Old vertices keep their indices; the midpoint of edge `e`
/// becomes vertex `num_vertices + e`.
pub fn refine_uniform(mesh: &Arc<TriMesh>) -> Result<TriMesh> {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.reserve(mesh.num_edges());
    let mut midpoint_of = Vec::with_capacity(mesh.num_edges());
    for e in &mesh.edges {
        let [a, b] = e.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        midpoint_of.push([a, b]);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut children = Vec::with_capacity(mesh.num_triangles());
    for (k, t) in mesh.triangles.iter().enumerate() {
        // m[i] is the midpoint of the edge opposite local vertex i.
        let te = mesh.triangle_edges[k];
        let m = [nv + te[0], nv + te[1], nv + te[2]];
        let base = triangles.len();
        triangles.push([t[0], m[2], m[1]]);
        triangles.push([m[2], t[1], m[0]]);
        triangles.push([m[1], m[0], t[2]]);
        triangles.push([m[0], m[1], m[2]]);
        children.push([base, base + 1, base + 2, base + 3]);
    }
    let mut fine = TriMesh::from_parts(vertices, triangles)?;
    fine.cells_per_side = mesh.cells_per_side.map(|n| 2 * n);
    fine.refinement = Some(Refinement {
        parent: Arc::clone(mesh),
        children,
        midpoint_of,
    });
    Ok(fine)
}

/// A chain of uniformly refined meshes, coarsest first.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Arc<TriMesh>>,
}

impl MeshHierarchy {
    /// `unit_square_mesh(base_n)` refined `depth` times.
    pub fn unit_square(base_n: usize, depth: usize) -> Result<Self> {
        let mut levels = vec![Arc::new(unit_square_mesh(base_n)?)];
        for _ in 0..depth {
            let next = refine_uniform(levels.last().expect("non-empty"))?;
            levels.push(Arc::new(next));
        }
        Ok(MeshHierarchy { levels })
    }

    pub fn levels(&self) -> &[Arc<TriMesh>] {
        &self.levels
    }

    pub fn finest(&self) -> &Arc<TriMesh> {
        self.levels.last().expect("non-empty")
    }

    /// The level with `n` cells per side.
    pub fn with_cells(&self, n: usize) -> Option<&Arc<TriMesh>> {
        self.levels.iter().find(|m| m.cells_per_side() == Some(n))
    }
}

/// Matrix `P` mapping coarse nodal values to the fine nodal values of the
/// same P1 function. `fine` must descend from `coarse` by uniform refinement.
pub fn prolongation(coarse: &TriMesh, fine: &TriMesh) -> Result<SparseMatrix> {
    // Walk up the chain collecting single-level operators, finest first.
    let mut steps: Vec<SparseMatrix> = Vec::new();
    let mut current = fine;
    loop {
        if current == coarse {
            break;
        }
        let refinement = current.refinement().ok_or(Error::NotNested)?;
        let parent = &refinement.parent;
        if parent.num_vertices() < coarse.num_vertices() {
            return Err(Error::NotNested);
        }
        steps.push(single_level_prolongation(
            parent.num_vertices(),
            &refinement.midpoint_of,
        ));
        current = parent;
    }
    let mut result = SparseMatrix::identity(coarse.num_vertices());
    for step in steps.iter().rev() {
        result = step.matmul(&result)?;
    }
    Ok(result)
}

fn single_level_prolongation(coarse_nv: usize, midpoint_of: &[[usize; 2]]) -> SparseMatrix {
    let nrows = coarse_nv + midpoint_of.len();
    let mut triplets = Vec::with_capacity(coarse_nv + 2 * midpoint_of.len());
    for i in 0..coarse_nv {
        triplets.push((i, i, 1.0));
    }
    for (e, &[a, b]) in midpoint_of.iter().enumerate() {
        triplets.push((coarse_nv + e, a, 0.5));
        triplets.push((coarse_nv + e, b, 0.5));
    }
    SparseMatrix::from_triplets(nrows, coarse_nv, &triplets)
}
