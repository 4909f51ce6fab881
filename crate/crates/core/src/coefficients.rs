//! Problem coefficient tensors `c[i_E][j_E][i_D][j_D]` and isotropic elasticity.
//!
//! Derivative index 0 stands for the function value itself, 1..=3 for the
//! physical derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::RefCoords;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    pub n_eq: usize,
    /// Flat `[i_E][j_E][i_D][j_D]`, `j_D` fastest.
    pub entries: Vec<f64>,
    pub sparsity_mask: Vec<bool>,
}

impl CoefficientTensor {
    pub fn zeros(n_eq: usize) -> Self {
        Self {
            n_eq,
            entries: vec![0.0; n_eq * n_eq * 16],
            sparsity_mask: vec![false; n_eq * n_eq * 16],
        }
    }

    #[inline]
    pub fn index(&self, ie: usize, je: usize, id: usize, jd: usize) -> usize {
        ((ie * self.n_eq + je) * 4 + id) * 4 + jd
    }

    #[inline]
    pub fn get(&self, ie: usize, je: usize, id: usize, jd: usize) -> f64 {
        self.entries[self.index(ie, je, id, jd)]
    }

    pub fn set(&mut self, ie: usize, je: usize, id: usize, jd: usize, value: f64) {
        let k = self.index(ie, je, id, jd);
        self.entries[k] = value;
        self.sparsity_mask[k] = value != 0.0;
    }

    /// Scalar diffusion: `n_eq = 1`, identity on the derivative-derivative block.
    pub fn laplace() -> Self {
        let mut c = Self::zeros(1);
        for d in 1..4 {
            c.set(0, 0, d, d, 1.0);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadCoefficients {
    pub per_point: Vec<CoefficientTensor>,
}

impl QuadCoefficients {
    pub fn constant(tensor: CoefficientTensor, n_points: usize) -> Self {
        Self {
            per_point: vec![tensor; n_points],
        }
    }
}

/// Young modulus and Poisson ratio of an isotropic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialData {
    pub young_e: f64,
    pub poisson_nu: f64,
}

impl Default for MaterialData {
    fn default() -> Self {
        Self {
            young_e: 1.0,
            poisson_nu: 0.3,
        }
    }
}

impl MaterialData {
    pub fn new(young_e: f64, poisson_nu: f64) -> Result<Self> {
        let m = Self { young_e, poisson_nu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.poisson_nu == 0.5 {
            return Err(Error::IncompressibleMaterial);
        }
        if !(self.young_e > 0.0) || !self.young_e.is_finite() {
            return Err(Error::InvalidMaterial(format!(
                "Young modulus must be positive, got {}",
                self.young_e
            )));
        }
        if !(self.poisson_nu > -1.0 && self.poisson_nu < 0.5) {
            return Err(Error::InvalidMaterial(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson_nu
            )));
        }
        Ok(())
    }

    /// Lame parameters `(lambda, mu)`.
    pub fn lame(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let (e, nu) = (self.young_e, self.poisson_nu);
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Ok((lambda, mu))
    }
}

/// Materials for a mesh: one global pair or one pair per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialField {
    Global(MaterialData),
    PerElement(Vec<MaterialData>),
}

impl MaterialField {
    pub fn for_element(&self, e: usize) -> MaterialData {
        match self {
            MaterialField::Global(m) => *m,
            MaterialField::PerElement(v) => v[e],
        }
    }

    pub fn validate(&self, n_elements: usize) -> Result<()> {
        match self {
            MaterialField::Global(m) => m.validate(),
            MaterialField::PerElement(v) => {
                if v.len() != n_elements {
                    return Err(Error::Config(format!(
                        "{} materials given for {n_elements} elements",
                        v.len()
                    )));
                }
                v.iter().try_for_each(MaterialData::validate)
            }
        }
    }
}

/// Degrees of freedom of a previous iterate, `[i_E][i_DOF]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreviousSolution {
    pub n_eq: usize,
    pub n_sh: usize,
    pub dofs: Vec<f64>,
}

impl PreviousSolution {
    pub fn zeros(n_eq: usize, n_sh: usize) -> Self {
        Self {
            n_eq,
            n_sh,
            dofs: vec![0.0; n_eq * n_sh],
        }
    }
}

/// Isotropic `c_ijkl = lambda d_ij d_kl + mu (d_ik d_jl + d_il d_jk)` placed at
/// `(i_E, j_E, i_D, j_D) = (i, k, j + 1, l + 1)`.
pub fn elasticity_tensor(mat: &MaterialData) -> Result<CoefficientTensor> {
    let (lambda, mu) = mat.lame()?;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut c = CoefficientTensor::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let v = lambda * delta(i, j) * delta(k, l)
                        + mu * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k));
                    c.set(i, k, j + 1, l + 1, v);
                }
            }
        }
    }
    Ok(c)
}

/// Coefficients at a quadrature point. Linear elastostatics has element-wise
/// constant coefficients, so this returns `base` unchanged; the previous-solution
/// argument is the hook for nonlinear models.
pub fn coefficients_at_point(
    base: &CoefficientTensor,
    _old: Option<&PreviousSolution>,
    _xi: RefCoords,
) -> CoefficientTensor {
    base.clone()
}
