//! Prism shape functions and their tabulation at quadrature points.
//!
//! Basis function `index = tri_index * (p + 1) + vert_index`, where the triangle
//! factor is the monomial `xi1^a xi2^b` (ordered by total degree `a + b`, then by
//! `a` ascending) and the vertical factor is the Legendre polynomial
//! `P_vert_index(xi3)`. The constant mode is index 0.
//!
//! The monomial triangle basis is poorly conditioned at p = 7; integration never
//! inverts it, so this only matters for users who fit data in the basis.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{QuadratureRule, RefCoords};
use crate::{check_order, n_shape};

/// Number of rows per point: value plus three derivatives.
pub const N_DERIV: usize = 4;

/// Shape values and reference derivatives at one point, laid out `[i_D][i_DOF]`
/// with `i_DOF` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapePointValues {
    pub n_sh: usize,
    pub values: Vec<f64>,
}

impl ShapePointValues {
    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.n_sh..(d + 1) * self.n_sh]
    }

    pub fn get(&self, d: usize, dof: usize) -> f64 {
        self.values[d * self.n_sh + dof]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTable {
    pub order_p: usize,
    pub per_point: Vec<ShapePointValues>,
}

impl ShapeTable {
    pub fn n_sh(&self) -> usize {
        n_shape(self.order_p)
    }

    pub fn n_points(&self) -> usize {
        self.per_point.len()
    }

    pub fn entries_per_point(&self) -> usize {
        N_DERIV * self.n_sh()
    }

    pub fn total_entries(&self) -> usize {
        self.per_point.iter().map(|v| v.values.len()).sum()
    }

    /// Flat `[i_Q][i_D][i_DOF]` copy converted to the requested precision.
    pub fn flatten<T: num_traits::Float>(&self) -> Vec<T> {
        self.per_point
            .iter()
            .flat_map(|v| v.values.iter().map(|&x| T::from(x).unwrap()))
            .collect()
    }

    /// Writes the flat layout as little-endian `f32`.
    pub fn write_f32_le<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.per_point {
            for x in &v.values {
                out.write_all(&(*x as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Exponents `(a, b)` of the triangle monomials in basis order.
pub fn triangle_exponents(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((p + 1) * (p + 2) / 2);
    for d in 0..=p {
        for a in 0..=d {
            out.push((a, d - a));
        }
    }
    out
}

/// Legendre values `P_0..P_p` and derivatives at `x`.
pub fn legendre_table(p: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut val = vec![0.0; p + 1];
    let mut der = vec![0.0; p + 1];
    val[0] = 1.0;
    if p >= 1 {
        val[1] = x;
        der[1] = 1.0;
    }
    for n in 1..p {
        let nf = n as f64;
        val[n + 1] = ((2.0 * nf + 1.0) * x * val[n] - nf * val[n - 1]) / (nf + 1.0);
        // P'_{n+1} = P'_{n-1} + (2n + 1) P_n
        der[n + 1] = der[n - 1] + (2.0 * nf + 1.0) * val[n];
    }
    (val, der)
}

fn powers(x: f64, p: usize) -> Vec<f64> {
    let mut out = vec![1.0; p + 1];
    for k in 1..=p {
        out[k] = out[k - 1] * x;
    }
    out
}

/// Values and reference derivatives of all `N_sh` basis functions at `xi`.
pub fn shape_values(p: usize, xi: RefCoords) -> ShapePointValues {
    let n_sh = n_shape(p);
    let px = powers(xi.xi1, p);
    let py = powers(xi.xi2, p);
    let (leg, dleg) = legendre_table(p, xi.xi3);
    let mut values = vec![0.0; N_DERIV * n_sh];
    for (t, &(a, b)) in triangle_exponents(p).iter().enumerate() {
        let tri = px[a] * py[b];
        let d1 = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
        let d2 = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
        for v in 0..=p {
            let idx = t * (p + 1) + v;
            values[idx] = tri * leg[v];
            values[n_sh + idx] = d1 * leg[v];
            values[2 * n_sh + idx] = d2 * leg[v];
            values[3 * n_sh + idx] = tri * dleg[v];
        }
    }
    ShapePointValues { n_sh, values }
}

/// Basis index of the triangle monomial `(a, b)` times `P_vert`.
pub fn basis_index(p: usize, a: usize, b: usize, vert: usize) -> usize {
    let d = a + b;
    let tri = d * (d + 1) / 2 + a;
    tri * (p + 1) + vert
}

pub fn tabulate_shapes(p: usize, rule: &QuadratureRule) -> Result<ShapeTable> {
    check_order(p)?;
    if rule.order_p != p {
        return Err(Error::OrderMismatch {
            expected: p,
            found: rule.order_p,
        });
    }
    Ok(ShapeTable {
        order_p: p,
        per_point: rule.points.iter().map(|&x| shape_values(p, x)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::prism_quadrature;

    #[test]
    fn basis_sizes() {
        let expected = [6, 18, 40, 75, 126, 196, 288];
        for p in 1..=7 {
            let v = shape_values(p, RefCoords::new(0.2, 0.3, 0.1));
            assert_eq!(v.n_sh, expected[p - 1]);
            assert_eq!(v.values.len(), 4 * expected[p - 1]);
        }
    }

    #[test]
    fn constant_mode_at_origin() {
        let v = shape_values(2, RefCoords::new(0.0, 0.0, 0.0));
        assert_eq!(v.get(0, 0), 1.0);
        assert_eq!(v.get(3, 0), 0.0);
    }

    #[test]
    fn basis_index_matches_ordering() {
        let p = 3;
        for (t, &(a, b)) in triangle_exponents(p).iter().enumerate() {
            for v in 0..=p {
                assert_eq!(basis_index(p, a, b, v), t * (p + 1) + v);
            }
        }
    }

    #[test]
    fn linear_fields_are_single_modes() {
        let p = 4;
        let xi = RefCoords::new(0.21, 0.37, -0.44);
        let v = shape_values(p, xi);
        assert!((v.get(0, basis_index(p, 1, 0, 0)) - xi.xi1).abs() < 1e-15);
        assert!((v.get(0, basis_index(p, 0, 1, 0)) - xi.xi2).abs() < 1e-15);
        assert!((v.get(0, basis_index(p, 0, 0, 1)) - xi.xi3).abs() < 1e-15);
    }

    #[test]
    fn table_entry_counts() {
        let totals = [144, 1296, 7680, 24000, 75600, 181104, 387072];
        let per_point = [24, 72, 160, 300, 504, 784, 1152];
        for p in 1..=7 {
            let rule = prism_quadrature(p).unwrap();
            let table = tabulate_shapes(p, &rule).unwrap();
            assert_eq!(table.total_entries(), totals[p - 1]);
            assert_eq!(table.entries_per_point(), per_point[p - 1]);
        }
    }

    #[test]
    fn mismatched_rule_is_rejected() {
        let rule = prism_quadrature(2).unwrap();
        assert!(matches!(
            tabulate_shapes(3, &rule),
            Err(Error::OrderMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn f32_dump_has_expected_size() {
        let rule = prism_quadrature(1).unwrap();
        let table = tabulate_shapes(1, &rule).unwrap();
        let mut buf = Vec::new();
        table.write_f32_le(&mut buf).unwrap();
        assert_eq!(buf.len(), 144 * 4);
        let first = f32::from_le_bytes(buf[0..4].try_into().unwrap());
        assert_eq!(first, 1.0);
    }
}
