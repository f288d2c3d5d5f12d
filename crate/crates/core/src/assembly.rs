//! P1 finite element assembly on triangle meshes.

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, Point, TriMesh};
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::solver::linear::sparse_solve;
use crate::sparse::SparseMatrix;

pub type Tensor2 = [[f64; 2]; 2];

/// Conductivity `M(x)`: a global scalar or one SPD tensor per element.
#[derive(Debug, Clone, PartialEq)]
pub enum ConductivityTensor {
    Scalar(f64),
    PerElement(Vec<Tensor2>),
}

impl ConductivityTensor {
    pub fn identity() -> Self {
        ConductivityTensor::Scalar(1.0)
    }

    pub fn validate(&self, mesh: &TriMesh) -> Result<()> {
        match self {
            ConductivityTensor::Scalar(m) => {
                if !(*m > 0.0 && m.is_finite()) {
                    return Err(Error::NotSpd { element: 0 });
                }
            }
            ConductivityTensor::PerElement(ts) => {
                if ts.len() != mesh.num_triangles() {
                    return Err(Error::DimensionMismatch {
                        expected: mesh.num_triangles(),
                        found: ts.len(),
                    });
                }
                for (k, t) in ts.iter().enumerate() {
                    let symmetric = (t[0][1] - t[1][0]).abs()
                        <= 1e-14 * (t[0][1].abs() + t[1][0].abs()).max(1.0);
                    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
                    if !symmetric || t[0][0] <= 0.0 || det <= 0.0 {
                        return Err(Error::NotSpd { element: k });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tensor(&self, k: usize) -> Tensor2 {
        match self {
            ConductivityTensor::Scalar(m) => [[*m, 0.0], [0.0, *m]],
            ConductivityTensor::PerElement(ts) => ts[k],
        }
    }

    /// `M_k v`.
    #[inline]
    pub fn apply(&self, k: usize, v: Point) -> Point {
        match self {
            ConductivityTensor::Scalar(m) => [m * v[0], m * v[1]],
            ConductivityTensor::PerElement(ts) => {
                let t = &ts[k];
                [
                    t[0][0] * v[0] + t[0][1] * v[1],
                    t[1][0] * v[0] + t[1][1] * v[1],
                ]
            }
        }
    }

    /// Extreme eigenvalues `(mu_min, mu_max)` over all elements.
    pub fn eigenvalue_bounds(&self) -> (f64, f64) {
        match self {
            ConductivityTensor::Scalar(m) => (*m, *m),
            ConductivityTensor::PerElement(ts) => {
                ts.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
                    let mean = 0.5 * (t[0][0] + t[1][1]);
                    let radius = (0.25 * (t[0][0] - t[1][1]).powi(2) + t[0][1] * t[1][0]).sqrt();
                    (lo.min(mean - radius), hi.max(mean + radius))
                })
            }
        }
    }
}

/// Sparsity of the P1 operator on a mesh together with, for each triangle,
/// the positions of its 3x3 local block in the CSR value array.
#[derive(Debug, Clone)]
pub struct P1Pattern {
    skeleton: SparseMatrix,
    slots: Vec<[usize; 9]>,
}

impl P1Pattern {
    pub fn new(mesh: &TriMesh) -> Self {
        let triplets: Vec<(usize, usize, f64)> = mesh
            .triangles()
            .iter()
            .flat_map(|t| {
                t.iter()
                    .flat_map(move |&a| t.iter().map(move |&b| (a, b, 0.0)))
            })
            .collect();
        let n = mesh.num_vertices();
        let skeleton = SparseMatrix::from_triplets(n, n, &triplets);
        let slots = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = skeleton
                            .position(t[a], t[b])
                            .expect("pattern covers element");
                    }
                }
                s
            })
            .collect();
        P1Pattern { skeleton, slots }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.skeleton
    }

    /// CSR positions of the local block of triangle `k`, row-major.
    pub fn slots(&self, k: usize) -> &[usize; 9] {
        &self.slots[k]
    }

    /// Assemble `sum_k local(k)` where `local` returns a row-major 3x3 block.
    pub fn assemble(&self, mut local: impl FnMut(usize) -> [f64; 9]) -> SparseMatrix {
        let mut m = self.skeleton.clone();
        let values = m.values_mut();
        for (k, slots) in self.slots.iter().enumerate() {
            let block = local(k);
            for (slot, v) in slots.iter().zip(block) {
                values[*slot] += v;
            }
        }
        m
    }
}

#[inline]
pub fn interpolate(values: [f64; 3], bary: &[f64; 3]) -> f64 {
    values[0] * bary[0] + values[1] * bary[1] + values[2] * bary[2]
}

#[inline]
pub fn local_values(field: &[f64], tri: &[usize; 3]) -> [f64; 3] {
    [field[tri[0]], field[tri[1]], field[tri[2]]]
}

/// Constant gradient of a P1 field on an element.
#[inline]
pub fn element_gradient(values: [f64; 3], geo: &ElementGeometry) -> Point {
    let g = &geo.basis_gradients;
    [
        values[0] * g[0][0] + values[1] * g[1][0] + values[2] * g[2][0],
        values[0] * g[0][1] + values[1] * g[1][1] + values[2] * g[2][1],
    ]
}

pub fn physical_point(p: &[Point; 3], bary: &[f64; 3]) -> Point {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}

/// `M_ij = int lambda_i lambda_j`, from the exact element formula
/// `area (1 + delta_ij) / 12`.
pub fn mass_matrix(mesh: &TriMesh) -> SparseMatrix {
    mass_matrix_on(mesh, &P1Pattern::new(mesh))
}

pub fn mass_matrix_on(mesh: &TriMesh, pattern: &P1Pattern) -> SparseMatrix {
    pattern.assemble(|k| {
        let a = mesh.area(k) / 12.0;
        let mut block = [a; 9];
        for i in 0..3 {
            block[4 * i] = 2.0 * a;
        }
        block
    })
}

/// `K_ij = int M grad lambda_j . grad lambda_i`.
pub fn stiffness_matrix(mesh: &TriMesh, conductivity: &ConductivityTensor) -> Result<SparseMatrix> {
    stiffness_matrix_on(mesh, conductivity, &P1Pattern::new(mesh))
}

pub fn stiffness_matrix_on(
    mesh: &TriMesh,
    conductivity: &ConductivityTensor,
    pattern: &P1Pattern,
) -> Result<SparseMatrix> {
    conductivity.validate(mesh)?;
    let geometries = mesh.geometries();
    Ok(pattern.assemble(|k| {
        let geo = &geometries[k];
        let mut block = [0.0; 9];
        for j in 0..3 {
            let mg = conductivity.apply(k, geo.basis_gradients[j]);
            for i in 0..3 {
                let gi = geo.basis_gradients[i];
                block[3 * i + j] = geo.area * (mg[0] * gi[0] + mg[1] * gi[1]);
            }
        }
        block
    }))
}

/// `W_ij = int c lambda_i lambda_j` where `weight(k, q)` gives the weight at
/// quadrature point `q` of element `k`.
pub fn weighted_mass_with(
    mesh: &TriMesh,
    pattern: &P1Pattern,
    rule: &QuadratureRule,
    mut weight: impl FnMut(usize, usize) -> f64,
) -> SparseMatrix {
    pattern.assemble(|k| {
        let area = mesh.area(k);
        let mut block = [0.0; 9];
        for (q, (bary, w)) in rule.iter().enumerate() {
            let c = weight(k, q) * w * area;
            for i in 0..3 {
                for j in 0..3 {
                    block[3 * i + j] += c * bary[i] * bary[j];
                }
            }
        }
        block
    })
}

/// `W_ij = int c_h lambda_i lambda_j` with `c_h` the P1 interpolant of the
/// nodal values `c` (integrated exactly by the degree-4 rule).
pub fn weighted_mass_matrix(mesh: &TriMesh, c: &[f64]) -> Result<SparseMatrix> {
    if c.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: c.len(),
        });
    }
    let rule = quadrature_rule(4)?;
    let pattern = P1Pattern::new(mesh);
    let triangles = mesh.triangles();
    Ok(weighted_mass_with(mesh, &pattern, &rule, |k, q| {
        interpolate(local_values(c, &triangles[k]), &rule.points()[q])
    }))
}

/// `b_i = int f lambda_i`.
pub fn load_vector(mesh: &TriMesh, rule: &QuadratureRule, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(k);
        let area = mesh.area(k);
        for (bary, w) in rule.iter() {
            let fx = f(physical_point(&pts, bary)) * w * area;
            for i in 0..3 {
                b[tri[i]] += fx * bary[i];
            }
        }
    }
    b
}

/// L2-orthogonal projection of `f` onto the P1 space (degree-6 load quadrature).
pub fn l2_project(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    let rule = quadrature_rule(6)?;
    let b = load_vector(mesh, &rule, f);
    sparse_solve(&mass_matrix(mesh), &b)
}

/// `||f - u_h||^2_{L2}` by the degree-6 rule.
pub fn l2_distance_sq(mesh: &TriMesh, f: impl Fn(Point) -> f64, uh: &[f64]) -> f64 {
    let rule = quadrature_rule(6).expect("degree 6 supported");
    let mut total = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(k);
        let vals = local_values(uh, tri);
        let area = mesh.area(k);
        for (bary, w) in rule.iter() {
            let d = f(physical_point(&pts, bary)) - interpolate(vals, bary);
            total += w * area * d * d;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{refine_uniform, unit_square_mesh};
    use std::sync::Arc;

    fn reference_triangle() -> TriMesh {
        TriMesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn reference_mass_entries() {
        let m = mass_matrix(&reference_triangle()).to_dense();
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
                assert!((v - want).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mass_sums_to_domain_area() {
        let mesh = unit_square_mesh(7).unwrap();
        let m = mass_matrix(&mesh);
        let one = vec![1.0; mesh.num_vertices()];
        assert!((m.quad_form(&one) - 1.0).abs() < 1e-13);
        for i in 0..m.nrows() {
            assert!(m.row(i).map(|(_, v)| v).sum::<f64>() >= 0.0);
        }
    }

    #[test]
    fn reference_stiffness() {
        let k = stiffness_matrix(&reference_triangle(), &ConductivityTensor::identity())
            .unwrap()
            .to_dense();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_kernel_and_scaling() {
        let mesh = unit_square_mesh(5).unwrap();
        let k1 = stiffness_matrix(&mesh, &ConductivityTensor::Scalar(1.0)).unwrap();
        let k2 = stiffness_matrix(&mesh, &ConductivityTensor::Scalar(2.0)).unwrap();
        let kone = k1.mul_vec(&vec![1.0; mesh.num_vertices()]);
        assert!(kone.iter().all(|v| v.abs() < 1e-13));
        for (a, b) in k1.values().iter().zip(k2.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn anisotropic_tensor_is_accepted_and_symmetric() {
        let mesh = unit_square_mesh(3).unwrap();
        let t =
            ConductivityTensor::PerElement(vec![[[2.0, 0.5], [0.5, 1.0]]; mesh.num_triangles()]);
        let k = stiffness_matrix(&mesh, &t).unwrap();
        let d = k.to_dense();
        for i in 0..d.len() {
            for j in 0..d.len() {
                assert!((d[i][j] - d[j][i]).abs() < 1e-14);
            }
        }
        let (lo, hi) = t.eigenvalue_bounds();
        assert!(lo > 0.0 && hi > lo);
    }

    #[test]
    fn non_spd_tensor_rejected() {
        let mesh = unit_square_mesh(1).unwrap();
        let bad = ConductivityTensor::PerElement(vec![[[1.0, 2.0], [2.0, 1.0]]; 2]);
        assert!(matches!(
            stiffness_matrix(&mesh, &bad),
            Err(Error::NotSpd { .. })
        ));
        let asym = ConductivityTensor::PerElement(vec![[[1.0, 0.1], [0.0, 1.0]]; 2]);
        assert!(stiffness_matrix(&mesh, &asym).is_err());
    }

    #[test]
    fn weighted_mass_special_cases() {
        let mesh = unit_square_mesh(4).unwrap();
        let n = mesh.num_vertices();
        let mass = mass_matrix(&mesh);
        let w1 = weighted_mass_matrix(&mesh, &vec![1.0; n]).unwrap();
        let w0 = weighted_mass_matrix(&mesh, &vec![0.0; n]).unwrap();
        let w25 = weighted_mass_matrix(&mesh, &vec![2.5; n]).unwrap();
        for ((a, b), (c, d)) in mass
            .values()
            .iter()
            .zip(w1.values())
            .zip(w0.values().iter().zip(w25.values()))
        {
            assert!((a - b).abs() < 1e-16);
            assert_eq!(*c, 0.0);
            assert!((2.5 * a - d).abs() < 1e-16);
        }
        assert!(weighted_mass_matrix(&mesh, &[1.0]).is_err());
    }

    #[test]
    fn weighted_mass_is_exact_for_linear_weight() {
        // int_T x lambda_0 lambda_0 on the reference triangle = 1/60
        let t = reference_triangle();
        let w = weighted_mass_matrix(&t, &[0.0, 1.0, 0.0]).unwrap();
        assert!((w.get(0, 0) - 1.0 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn projection_of_constant_and_p1() {
        let mesh = unit_square_mesh(6).unwrap();
        let c = l2_project(&mesh, |_| 7.0).unwrap();
        assert!(c.iter().all(|v| (v - 7.0).abs() < 1e-12));
        let lin = |x: Point| 2.0 * x[0] - x[1] + 0.25;
        let p = l2_project(&mesh, lin).unwrap();
        for (x, v) in mesh.vertices().iter().zip(p) {
            assert!((lin(*x) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_initial_bump_converges() {
        let u0 = |x: Point| crate::ionic::initial_data(x).0;
        let mut mesh = Arc::new(unit_square_mesh(4).unwrap());
        let mut errors = Vec::new();
        for _ in 0..4 {
            let p = l2_project(&mesh, u0).unwrap();
            // node (1, 0) is vertex n of the structured root; locate by coordinate
            let idx = mesh
                .vertices()
                .iter()
                .position(|v| *v == [1.0, 0.0])
                .unwrap();
            errors.push((p[idx] - 1.0).abs());
            mesh = Arc::new(refine_uniform(&mesh).unwrap());
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.5, "nodal projection error rates {errors:?}");
        }
    }
}
