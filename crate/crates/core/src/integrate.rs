//! Sequential element integrators in wide precision.
//!
//! [`integrate_generic`] runs the full six-loop contraction against an arbitrary
//! coefficient tensor and serves as the oracle. [`integrate_optimized`] exploits the
//! isotropic-elasticity sparsity through [`elasticity_block_update`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::block::{elasticity_block_update, BLOCK_UPDATE_FLOPS};
use crate::coefficients::{coefficients_at_point, MaterialData, PreviousSolution, QuadCoefficients};
use crate::error::{Error, Result};
use crate::geometry::{jacobian_terms, physical_derivatives, PrismGeometry};
use crate::quadrature::{prism_quadrature, QuadratureRule, RefCoords};
use crate::shapes::{basis_index, ShapeTable};
use crate::{check_order, n_quad, n_shape, ELASTICITY_EQS};

/// Flops of the psi chain rule per shape function and point (3 x (3 mul + 2 add)).
pub const PSI_FLOPS_PER_DOF: u64 = 15;

/// Dense element matrix, row-major, row index `i_DOF * n_eq + i_E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementStiffness {
    pub order_p: usize,
    pub n_eq: usize,
    pub data: Vec<f64>,
}

/// Metadata written next to a binary stiffness dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessHeader {
    pub p: usize,
    pub n_eq: usize,
    pub element_id: usize,
    pub dim: usize,
    pub layout: String,
}

impl ElementStiffness {
    pub fn zeros(order_p: usize, n_eq: usize) -> Self {
        let dim = n_eq * n_shape(order_p);
        Self {
            order_p,
            n_eq,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.n_eq * n_shape(self.order_p)
    }

    pub fn n_blocks(&self) -> usize {
        let n = n_shape(self.order_p);
        n * n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim() + col]
    }

    /// Entry `A[i_E][j_E][i_DOF][j_DOF]`.
    pub fn block_entry(&self, ie: usize, je: usize, idof: usize, jdof: usize) -> f64 {
        self.get(idof * self.n_eq + ie, jdof * self.n_eq + je)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let n = self.dim();
        self.data
            .chunks(n)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(u.len(), n);
        self.data
            .chunks(n)
            .map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `||A - A^T||_F / ||A||_F`.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = self.data[i * n + j] - self.data[j * n + i];
                s += d * d;
            }
        }
        s.sqrt() / self.frobenius()
    }

    /// `||self - reference||_F / ||reference||_F`.
    pub fn rel_frobenius_diff(&self, reference: &ElementStiffness) -> f64 {
        assert_eq!(self.data.len(), reference.data.len());
        let num: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        num.sqrt() / reference.frobenius()
    }

    pub fn header(&self, element_id: usize) -> StiffnessHeader {
        StiffnessHeader {
            p: self.order_p,
            n_eq: self.n_eq,
            element_id,
            dim: self.dim(),
            layout: "row-major f32 little-endian, row = i_dof * n_eq + i_eq".into(),
        }
    }

    pub fn write_f32_le<W: Write>(&self, mut out: W) -> Result<()> {
        for x in &self.data {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

/// Instrumented flop tally of the sequential optimized path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopTally {
    pub block_updates: u64,
    pub psi: u64,
    pub scaling: u64,
}

impl FlopTally {
    pub fn total(&self) -> u64 {
        self.block_updates + self.psi + self.scaling
    }
}

fn check_inputs(p: usize, shapes: &ShapeTable, rule: &QuadratureRule) -> Result<()> {
    check_order(p)?;
    for found in [shapes.order_p, rule.order_p] {
        if found != p {
            return Err(Error::OrderMismatch { expected: p, found });
        }
    }
    if shapes.n_points() != rule.len() {
        return Err(Error::ContractViolation(format!(
            "shape table has {} points, rule has {}",
            shapes.n_points(),
            rule.len()
        )));
    }
    Ok(())
}

/// Brute-force integration over all `(i_D, j_D, i_E, j_E)` with no sparsity
/// assumptions.
pub fn integrate_generic(
    geom: &PrismGeometry,
    coeffs: &QuadCoefficients,
    shapes: &ShapeTable,
    rule: &QuadratureRule,
    old: Option<&PreviousSolution>,
) -> Result<ElementStiffness> {
    let p = rule.order_p;
    check_inputs(p, shapes, rule)?;
    if coeffs.per_point.len() != rule.len() {
        return Err(Error::ContractViolation(format!(
            "{} coefficient tensors for {} points",
            coeffs.per_point.len(),
            rule.len()
        )));
    }
    let n_eq = coeffs.per_point[0].n_eq;
    let n_sh = n_shape(p);
    let mut a = ElementStiffness::zeros(p, n_eq);
    let dim = a.dim();
    for (q, &xi) in rule.points.iter().enumerate() {
        let jt = jacobian_terms(geom, xi)?;
        let psi = physical_derivatives(&shapes.per_point[q], &jt);
        let c = coefficients_at_point(&coeffs.per_point[q], old, xi);
        let dw = jt.det * rule.weights[q];
        // dw * c, same [i_E][j_E][i_D][j_D] layout.
        let cw: Vec<f64> = c.entries.iter().map(|&v| dw * v).collect();
        let psi = &psi.values;
        let mut prod = [0.0f64; 16];
        for idof in 0..n_sh {
            for jdof in 0..n_sh {
                for id in 0..4 {
                    let pi = psi[id * n_sh + idof];
                    for jd in 0..4 {
                        prod[id * 4 + jd] = pi * psi[jd * n_sh + jdof];
                    }
                }
                for ie in 0..n_eq {
                    let row = (idof * n_eq + ie) * dim + jdof * n_eq;
                    for je in 0..n_eq {
                        let cr = &cw[(ie * n_eq + je) * 16..][..16];
                        let s: f64 = cr.iter().zip(&prod).map(|(c, s)| c * s).sum();
                        a.data[row + je] += s;
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Sparsity-aware integration for isotropic elasticity.
pub fn integrate_optimized(
    geom: &PrismGeometry,
    mat: &MaterialData,
    shapes: &ShapeTable,
    rule: &QuadratureRule,
) -> Result<ElementStiffness> {
    integrate_optimized_counted(geom, mat, shapes, rule).map(|(a, _)| a)
}

pub fn integrate_optimized_counted(
    geom: &PrismGeometry,
    mat: &MaterialData,
    shapes: &ShapeTable,
    rule: &QuadratureRule,
) -> Result<(ElementStiffness, FlopTally)> {
    let p = rule.order_p;
    check_inputs(p, shapes, rule)?;
    let (lambda, mu) = mat.lame()?;
    let n_sh = n_shape(p);
    let ne = ELASTICITY_EQS;
    let mut a = ElementStiffness::zeros(p, ne);
    let dim = a.dim();
    let mut tally = FlopTally::default();
    let mut blocks = vec![[0.0f64; 9]; n_sh * n_sh];
    for (q, &xi) in rule.points.iter().enumerate() {
        let jt = jacobian_terms(geom, xi)?;
        let psi = physical_derivatives(&shapes.per_point[q], &jt);
        tally.psi += PSI_FLOPS_PER_DOF * n_sh as u64;
        let dw = jt.det * rule.weights[q];
        let (lw, mw) = (lambda * dw, mu * dw);
        tally.scaling += 3;
        let grad = |dof: usize| [psi.get(1, dof), psi.get(2, dof), psi.get(3, dof)];
        for idof in 0..n_sh {
            let ga = grad(idof);
            for jdof in 0..n_sh {
                elasticity_block_update(ga, grad(jdof), lw, mw, &mut blocks[idof * n_sh + jdof]);
            }
        }
        tally.block_updates += BLOCK_UPDATE_FLOPS * (n_sh * n_sh) as u64;
    }
    for idof in 0..n_sh {
        for jdof in 0..n_sh {
            let b = &blocks[idof * n_sh + jdof];
            for ie in 0..ne {
                for je in 0..ne {
                    a.data[(idof * ne + ie) * dim + jdof * ne + je] = b[3 * ie + je];
                }
            }
        }
    }
    Ok((a, tally))
}

/// Block-update flops of the sequential path: `N_sh^2 * N_Q * 63`.
pub fn flop_count_reference(p: usize) -> Result<u64> {
    check_order(p)?;
    let n = n_shape(p) as u64;
    Ok(n * n * n_quad(p) as u64 * BLOCK_UPDATE_FLOPS)
}

/// Coefficients of a vector field that is affine in the reference coordinates,
/// in the canonical DOF layout (`i_DOF * 3 + i_E`). `field` maps reference points
/// to the field value.
pub fn interpolate_affine_field<F>(p: usize, field: F) -> Vec<f64>
where
    F: Fn(RefCoords) -> [f64; 3],
{
    let ne = ELASTICITY_EQS;
    let mut u = vec![0.0; ne * n_shape(p)];
    let u0 = field(RefCoords::new(0.0, 0.0, 0.0));
    let dirs = [
        (RefCoords::new(1.0, 0.0, 0.0), basis_index(p, 1, 0, 0)),
        (RefCoords::new(0.0, 1.0, 0.0), basis_index(p, 0, 1, 0)),
        (RefCoords::new(0.0, 0.0, 1.0), basis_index(p, 0, 0, 1)),
    ];
    u[..ne].copy_from_slice(&u0);
    for (xi, dof) in dirs {
        let v = field(xi);
        for c in 0..ne {
            u[dof * ne + c] = v[c] - u0[c];
        }
    }
    u
}

/// The six rigid-body modes (three translations, three infinitesimal rotations
/// about the origin) of an affinely mapped element.
pub fn rigid_body_modes(geom: &PrismGeometry, p: usize) -> Vec<Vec<f64>> {
    let mut modes = Vec::with_capacity(6);
    for k in 0..3 {
        modes.push(interpolate_affine_field(p, |_| {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            e
        }));
    }
    for axis in 0..3 {
        modes.push(interpolate_affine_field(p, |xi| {
            let x = geom.map(xi);
            let mut w = [0.0; 3];
            w[axis] = 1.0;
            [w[1] * x[2] - w[2] * x[1], w[2] * x[0] - w[0] * x[2], w[0] * x[1] - w[1] * x[0]]
        }));
    }
    modes
}

/// Convenience: wide-precision optimized matrices for a set of elements.
pub fn integrate_mesh_optimized(
    geoms: &[PrismGeometry],
    mat: &crate::coefficients::MaterialField,
    p: usize,
) -> Result<Vec<ElementStiffness>> {
    use rayon::prelude::*;
    let rule = prism_quadrature(p)?;
    let shapes = crate::shapes::tabulate_shapes(p, &rule)?;
    geoms
        .par_iter()
        .enumerate()
        .map(|(e, g)| {
            integrate_optimized(g, &mat.for_element(e), &shapes, &rule).map_err(|err| err.with_element(e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{elasticity_tensor, CoefficientTensor};
    use crate::mesh::generate_box_mesh;
    use crate::shapes::tabulate_shapes;

    fn setup(p: usize) -> (QuadratureRule, ShapeTable) {
        let rule = prism_quadrature(p).unwrap();
        let shapes = tabulate_shapes(p, &rule).unwrap();
        (rule, shapes)
    }

    #[test]
    fn reference_flop_counts() {
        assert_eq!(flop_count_reference(7).unwrap(), 1_755_758_592);
        assert_eq!(flop_count_reference(5).unwrap(), 150_028_200);
        assert_eq!(flop_count_reference(1).unwrap(), 13_608);
        assert_eq!(flop_count_reference(2).unwrap(), 367_416);
    }

    #[test]
    fn generic_translation_is_null() {
        let (rule, shapes) = setup(1);
        let geom = generate_box_mesh(1, 1, 1, 0.0).unwrap().geometry(0);
        let c = elasticity_tensor(&MaterialData::default()).unwrap();
        let a = integrate_generic(&geom, &QuadCoefficients::constant(c, rule.len()), &shapes, &rule, None).unwrap();
        for k in 0..3 {
            let mut u = vec![0.0; a.dim()];
            u[k] = 1.0;
            let r = a.matvec(&u);
            let rmax = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(rmax <= 1e-12 * a.inf_norm());
        }
    }

    #[test]
    fn optimized_matches_generic_and_counts_flops() {
        let mesh = generate_box_mesh(1, 1, 1, 0.0).unwrap();
        let mat = MaterialData::new(2.0, 0.3).unwrap();
        for p in 1..=3 {
            let (rule, shapes) = setup(p);
            let c = QuadCoefficients::constant(elasticity_tensor(&mat).unwrap(), rule.len());
            let g = mesh.geometry(1);
            let gen = integrate_generic(&g, &c, &shapes, &rule, None).unwrap();
            let (opt, tally) = integrate_optimized_counted(&g, &mat, &shapes, &rule).unwrap();
            assert!(opt.rel_frobenius_diff(&gen) < 1e-12);
            assert_eq!(tally.block_updates, flop_count_reference(p).unwrap());
            assert!(opt.symmetry_error() < 1e-12);
        }
    }

    #[test]
    fn order_mismatch() {
        let (rule, _) = setup(2);
        let (_, shapes3) = setup(3);
        let err = integrate_optimized(&PrismGeometry::reference(), &MaterialData::default(), &shapes3, &rule);
        assert!(matches!(err, Err(Error::OrderMismatch { .. })));
    }

    #[test]
    fn laplace_tensor_gives_n_eq_one_matrix() {
        let (rule, shapes) = setup(1);
        let c = QuadCoefficients::constant(CoefficientTensor::laplace(), rule.len());
        let a = integrate_generic(&PrismGeometry::reference(), &c, &shapes, &rule, None).unwrap();
        assert_eq!(a.dim(), 6);
        // Constant mode has zero gradient: first row and column vanish.
        for j in 0..6 {
            assert!(a.get(0, j).abs() < 1e-15);
        }
        // int |grad xi1|^2 over the reference prism = volume = 1.
        let i1 = basis_index(1, 1, 0, 0);
        assert!((a.get(i1, i1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverted_element_propagates() {
        let (rule, shapes) = setup(1);
        let mut g = PrismGeometry::reference();
        g.vertices.swap(1, 2);
        g.vertices.swap(4, 5);
        assert!(matches!(
            integrate_optimized(&g, &MaterialData::default(), &shapes, &rule),
            Err(Error::InvertedElement { .. })
        ));
    }
}
