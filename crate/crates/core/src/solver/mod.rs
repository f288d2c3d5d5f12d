//! Implicit Euler in time, Newton-Galerkin on each step, direct sparse solves.

pub mod linear;
pub mod march;
pub mod newton;

use std::sync::{Arc, OnceLock};

use crate::assembly::{
    interpolate, local_values, mass_matrix_on, stiffness_matrix_on, ConductivityTensor, P1Pattern,
};
use crate::error::{Error, Result};
use crate::ionic::{AlievPanfilovParams, Reaction};
use crate::mesh::{ElementGeometry, TriMesh};
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::sparse::SparseMatrix;

use linear::SparseLu;

pub use march::{time_march, time_march_from, MarchOptions, StepRecord, TrajectorySolution};
pub use newton::{
    newton_solve, newton_step, IterateIndicators, NewtonConfig, NewtonHistory, StoppingMode,
};

/// Nodal values of `(u, w)` at one time instant or Newton iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub time: f64,
}

impl StateField {
    pub fn zeros(n: usize, time: f64) -> Self {
        StateField {
            u: vec![0.0; n],
            w: vec![0.0; n],
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Everything that stays fixed during a run on one mesh: the mesh, kinetics,
/// conductivity, constant matrices and the sparsity/ordering of the coupled
/// Newton system.
pub struct Discretization {
    mesh: Arc<TriMesh>,
    reaction: Reaction,
    conductivity: ConductivityTensor,
    geometries: Vec<ElementGeometry>,
    pattern: P1Pattern,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    h1_gram: SparseMatrix,
    rule: QuadratureRule,
    block: BlockPattern,
    symbolic: OnceLock<SparseLu>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("vertices", &self.mesh.num_vertices())
            .field("triangles", &self.mesh.num_triangles())
            .field("reaction", &self.reaction)
            .finish_non_exhaustive()
    }
}

impl Discretization {
    pub fn new(
        mesh: Arc<TriMesh>,
        reaction: Reaction,
        conductivity: ConductivityTensor,
    ) -> Result<Self> {
        if let Reaction::AlievPanfilov(p) = &reaction {
            p.validate()?;
        }
        let pattern = P1Pattern::new(&mesh);
        let mass = mass_matrix_on(&mesh, &pattern);
        let stiffness = stiffness_matrix_on(&mesh, &conductivity, &pattern)?;
        let laplace = stiffness_matrix_on(&mesh, &ConductivityTensor::identity(), &pattern)?;
        let h1_gram = laplace.linear_combination(1.0, &mass, 1.0)?;
        let block = BlockPattern::new(pattern.matrix());
        Ok(Discretization {
            geometries: mesh.geometries(),
            mesh,
            reaction,
            conductivity,
            pattern,
            mass,
            stiffness,
            h1_gram,
            rule: quadrature_rule(4)?,
            block,
            symbolic: OnceLock::new(),
        })
    }

    /// Aliev-Panfilov kinetics with the scalar conductivity from `params`.
    pub fn aliev_panfilov(mesh: Arc<TriMesh>, params: AlievPanfilovParams) -> Result<Self> {
        Self::new(
            mesh,
            Reaction::AlievPanfilov(params),
            ConductivityTensor::Scalar(params.conductivity),
        )
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn conductivity(&self) -> &ConductivityTensor {
        &self.conductivity
    }

    pub fn geometries(&self) -> &[ElementGeometry] {
        &self.geometries
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Gram matrix of the H1 inner product, `int grad u . grad v + u v`.
    pub fn h1_gram(&self) -> &SparseMatrix {
        &self.h1_gram
    }

    pub fn num_vertices(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        self.h1_gram.quad_form(v).max(0.0).sqrt()
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.quad_form(v).max(0.0).sqrt()
    }

    pub(crate) fn check_state(&self, s: &StateField) -> Result<()> {
        let n = self.num_vertices();
        for len in [s.u.len(), s.w.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(())
    }

    fn symbolic(&self, jacobian: &SparseMatrix) -> Result<&SparseLu> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s);
        }
        let analyzed = SparseLu::analyze(jacobian)?;
        Ok(self.symbolic.get_or_init(|| analyzed))
    }

    /// Checked public form of [`Self::residual_and_jacobian`].
    pub fn step_system(
        &self,
        prev: &StateField,
        iter: &StateField,
        tau: f64,
    ) -> Result<(Vec<f64>, SparseMatrix)> {
        self.check_state(prev)?;
        self.check_state(iter)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("time.tau", "must be positive"));
        }
        Ok(self.residual_and_jacobian(prev, iter, tau))
    }

    /// Residual `F` and Jacobian `J` of the implicit Euler step at `iter`,
    /// in interleaved ordering `(u_0, w_0, u_1, w_1, ...)`:
    ///
    /// ```text
    /// F_u = Mass (u - u_prev)/tau + K u + int f(u, w) phi
    /// F_w = Mass (w - w_prev)/tau + int g(u, w) phi
    /// J   = [ Mass/tau + K + W(f_u)   W(f_w)          ]
    ///       [ W(g_u)                  Mass/tau + W(g_w) ]
    /// ```
    ///
    /// Reaction terms are integrated with the degree-4 rule, which is exact
    /// for the cubic kinetics against P1 test functions.
    pub(crate) fn residual_and_jacobian(
        &self,
        prev: &StateField,
        iter: &StateField,
        tau: f64,
    ) -> (Vec<f64>, SparseMatrix) {
        let n = self.num_vertices();
        let mut residual = vec![0.0; 2 * n];
        let mut jac = self.block.skeleton.clone();
        let p1_offsets = self.pattern.matrix().row_offsets();
        let values = jac.values_mut();
        let inv_tau = 1.0 / tau;
        for (k, tri) in self.mesh.triangles().iter().enumerate() {
            let geo = &self.geometries[k];
            let area = geo.area;
            let u = local_values(&iter.u, tri);
            let w = local_values(&iter.w, tri);
            let up = local_values(&prev.u, tri);
            let wp = local_values(&prev.w, tri);

            // Reaction loads and weighted mass blocks.
            let mut load_f = [0.0; 3];
            let mut load_g = [0.0; 3];
            let mut w_fu = [0.0; 9];
            let mut w_fw = [0.0; 9];
            let mut w_gu = [0.0; 9];
            let mut w_gw = [0.0; 9];
            for (bary, weight) in self.rule.iter() {
                let r = self
                    .reaction
                    .eval(interpolate(u, bary), interpolate(w, bary));
                let c = weight * area;
                for a in 0..3 {
                    load_f[a] += c * r.f * bary[a];
                    load_g[a] += c * r.g * bary[a];
                    for b in 0..3 {
                        let phi = c * bary[a] * bary[b];
                        w_fu[3 * a + b] += r.f_u * phi;
                        w_fw[3 * a + b] += r.f_w * phi;
                        w_gu[3 * a + b] += r.g_u * phi;
                        w_gw[3 * a + b] += r.g_w * phi;
                    }
                }
            }

            let slots = self.pattern.slots(k);
            for a in 0..3 {
                let i = tri[a];
                let mut res_u = load_f[a];
                let mut res_w = load_g[a];
                let row_start = p1_offsets[i];
                let row_len = p1_offsets[i + 1] - row_start;
                for b in 0..3 {
                    let mass_ab = if a == b { area / 6.0 } else { area / 12.0 };
                    let mg = self.conductivity.apply(k, geo.basis_gradients[b]);
                    let ga = geo.basis_gradients[a];
                    let stiff_ab = area * (mg[0] * ga[0] + mg[1] * ga[1]);
                    res_u += mass_ab * (u[b] - up[b]) * inv_tau + stiff_ab * u[b];
                    res_w += mass_ab * (w[b] - wp[b]) * inv_tau;

                    let m = 3 * a + b;
                    let base = 4 * row_start + 2 * (slots[m] - row_start);
                    values[base] += mass_ab * inv_tau + stiff_ab + w_fu[m];
                    values[base + 1] += w_fw[m];
                    values[base + 2 * row_len] += w_gu[m];
                    values[base + 2 * row_len + 1] += mass_ab * inv_tau + w_gw[m];
                }
                residual[2 * i] += res_u;
                residual[2 * i + 1] += res_w;
            }
        }
        (residual, jac)
    }
}

/// Sparsity of the interleaved 2N x 2N system: every P1 entry `(i, j)`
/// expands to the 2x2 block `(2i+s, 2j+t)`.
///
/// With `p` the P1 position of `(i, j)` and `r = p1_offsets[i]`, the block
/// entry lives at `4 r + 2 (p - r) + 2 s len_i + t`.
#[derive(Debug, Clone)]
struct BlockPattern {
    skeleton: SparseMatrix,
}

impl BlockPattern {
    fn new(p1: &SparseMatrix) -> Self {
        let n = p1.nrows();
        let mut row_offsets = Vec::with_capacity(2 * n + 1);
        let mut col_indices = Vec::with_capacity(4 * p1.nnz());
        row_offsets.push(0);
        for i in 0..n {
            for _s in 0..2 {
                for (j, _) in p1.row(i) {
                    col_indices.push(2 * j);
                    col_indices.push(2 * j + 1);
                }
                row_offsets.push(col_indices.len());
            }
        }
        let nnz = col_indices.len();
        let skeleton =
            SparseMatrix::from_csr(2 * n, 2 * n, row_offsets, col_indices, vec![0.0; nnz])
                .expect("block pattern is well formed");
        BlockPattern { skeleton }
    }
}

/// Split an interleaved vector into its `u` and `w` parts.
pub(crate) fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        x.iter().step_by(2).copied().collect(),
        x.iter().skip(1).step_by(2).copied().collect(),
    )
}
