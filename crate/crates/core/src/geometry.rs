//! Multi-linear prism geometry: reference-to-real mapping, Jacobian terms and
//! physical shape derivatives.
//!
//! Vertex convention: 0, 1, 2 form the bottom triangle (counterclockwise seen from
//! above), 3, 4, 5 sit above 0, 1, 2. The vertex functions are
//! `N_v = lambda_v(xi1, xi2) * (1 -/+ xi3) / 2` with `lambda = (1 - xi1 - xi2, xi1, xi2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{QuadratureRule, RefCoords};
use crate::shapes::{ShapePointValues, N_DERIV};

pub type Point3 = [f64; 3];

/// Reals per precomputed Jacobian record: determinant then the row-major inverse.
pub const JACOBIAN_RECORD_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrismGeometry {
    pub vertices: [Point3; 6],
}

impl PrismGeometry {
    /// The reference prism itself, mapped by the identity.
    pub fn reference() -> Self {
        Self {
            vertices: [
                [0.0, 0.0, -1.0],
                [1.0, 0.0, -1.0],
                [0.0, 1.0, -1.0],
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 1.0],
                [0.0, 1.0, 1.0],
            ],
        }
    }

    /// Physical image of a reference point.
    pub fn map(&self, xi: RefCoords) -> Point3 {
        let n = geometry_shape_values(xi);
        let mut x = [0.0; 3];
        for (nv, v) in n.iter().zip(&self.vertices) {
            for i in 0..3 {
                x[i] += nv * v[i];
            }
        }
        x
    }

    /// Flattened vertex coordinates, 18 reals, vertex-major.
    pub fn flat(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        for (v, c) in self.vertices.iter().enumerate() {
            out[3 * v..3 * v + 3].copy_from_slice(c);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianTerms {
    pub det: f64,
    /// `inv[k][i] = d xi_k / d x_i`.
    pub inv: [[f64; 3]; 3],
}

impl JacobianTerms {
    pub fn to_record(&self) -> [f64; JACOBIAN_RECORD_LEN] {
        let mut r = [0.0; JACOBIAN_RECORD_LEN];
        r[0] = self.det;
        for k in 0..3 {
            r[1 + 3 * k..4 + 3 * k].copy_from_slice(&self.inv[k]);
        }
        r
    }
}

/// Shape values and derivatives with respect to physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalShapeValues {
    pub n_sh: usize,
    pub values: Vec<f64>,
}

impl PhysicalShapeValues {
    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.n_sh..(d + 1) * self.n_sh]
    }

    pub fn get(&self, d: usize, dof: usize) -> f64 {
        self.values[d * self.n_sh + dof]
    }
}

pub fn geometry_shape_values(xi: RefCoords) -> [f64; 6] {
    let l = [1.0 - xi.xi1 - xi.xi2, xi.xi1, xi.xi2];
    let lo = 0.5 * (1.0 - xi.xi3);
    let hi = 0.5 * (1.0 + xi.xi3);
    [l[0] * lo, l[1] * lo, l[2] * lo, l[0] * hi, l[1] * hi, l[2] * hi]
}

/// `d[j][v] = dN_v / d xi_j`.
pub fn geometry_shape_derivs(xi: RefCoords) -> [[f64; 6]; 3] {
    let l = [1.0 - xi.xi1 - xi.xi2, xi.xi1, xi.xi2];
    let dl1 = [-1.0, 1.0, 0.0];
    let dl2 = [-1.0, 0.0, 1.0];
    let lo = 0.5 * (1.0 - xi.xi3);
    let hi = 0.5 * (1.0 + xi.xi3);
    let mut d = [[0.0; 6]; 3];
    for v in 0..3 {
        d[0][v] = dl1[v] * lo;
        d[0][v + 3] = dl1[v] * hi;
        d[1][v] = dl2[v] * lo;
        d[1][v + 3] = dl2[v] * hi;
        d[2][v] = -0.5 * l[v];
        d[2][v + 3] = 0.5 * l[v];
    }
    d
}

/// Jacobian matrix `J[i][j] = d x_i / d xi_j`.
pub fn jacobian_matrix(geom: &PrismGeometry, xi: RefCoords) -> [[f64; 3]; 3] {
    let d = geometry_shape_derivs(xi);
    let mut jac = [[0.0; 3]; 3];
    for (i, row) in jac.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (0..6).map(|v| d[j][v] * geom.vertices[v][i]).sum();
        }
    }
    jac
}

/// Determinant and inverse of a 3x3 matrix by cofactors.
pub fn invert3(m: &[[f64; 3]; 3]) -> (f64, [[f64; 3]; 3]) {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let r = 1.0 / det;
    let inv = [
        [
            c00 * r,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * r,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * r,
        ],
        [
            c01 * r,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * r,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * r,
        ],
        [
            c02 * r,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * r,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * r,
        ],
    ];
    (det, inv)
}

pub fn jacobian_terms(geom: &PrismGeometry, xi: RefCoords) -> Result<JacobianTerms> {
    let jac = jacobian_matrix(geom, xi);
    let (det, inv) = invert3(&jac);
    // NaN dets count as inverted too.
    if !(det > 0.0) {
        return Err(Error::InvertedElement {
            element: None,
            xi: xi.as_array(),
            det,
        });
    }
    Ok(JacobianTerms { det, inv })
}

/// Chain rule: `psi_i = sum_k (d phi / d xi_k) * inv[k][i]`; the value row is copied.
pub fn physical_derivatives(ref_vals: &ShapePointValues, jt: &JacobianTerms) -> PhysicalShapeValues {
    let n = ref_vals.n_sh;
    let mut values = vec![0.0; N_DERIV * n];
    values[..n].copy_from_slice(ref_vals.row(0));
    let (d1, d2, d3) = (ref_vals.row(1), ref_vals.row(2), ref_vals.row(3));
    for i in 0..3 {
        let (a, b, c) = (jt.inv[0][i], jt.inv[1][i], jt.inv[2][i]);
        let out = &mut values[(i + 1) * n..(i + 2) * n];
        for dof in 0..n {
            out[dof] = d1[dof] * a + d2[dof] * b + d3[dof] * c;
        }
    }
    PhysicalShapeValues { n_sh: n, values }
}

/// Jacobian records for every (element, quadrature point), element-major.
///
/// Each record is [`JACOBIAN_RECORD_LEN`] reals: `det, inv[0][0], inv[0][1], ..., inv[2][2]`.
pub fn precompute_all_jacobian_terms(
    geoms: &[PrismGeometry],
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let per_elem = rule.len() * JACOBIAN_RECORD_LEN;
    let mut out = vec![0.0; geoms.len() * per_elem];
    if per_elem == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(per_elem)
        .zip(geoms.par_iter())
        .enumerate()
        .try_for_each(|(e, (chunk, geom))| {
            for (q, &xi) in rule.points.iter().enumerate() {
                let jt = jacobian_terms(geom, xi).map_err(|err| err.with_element(e))?;
                chunk[q * JACOBIAN_RECORD_LEN..(q + 1) * JACOBIAN_RECORD_LEN]
                    .copy_from_slice(&jt.to_record());
            }
            Ok::<(), Error>(())
        })?;
    Ok(out)
}
