//! Structured prism meshes of the unit box, used as test fixtures.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{jacobian_terms, Point3, PrismGeometry};
use crate::quadrature::{prism_quadrature, RefCoords};
use crate::MAX_ORDER;

pub const DEFAULT_SEED: u64 = 42;

/// Node list plus six-node connectivity (same vertex order as [`PrismGeometry`]).
///
/// Serialized as `{"nodes": [[x, y, z], ...], "elements": [[n0, ..., n5], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<Point3>,
    pub elements: Vec<[usize; 6]>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn geometry(&self, e: usize) -> PrismGeometry {
        let conn = &self.elements[e];
        PrismGeometry {
            vertices: std::array::from_fn(|v| self.nodes[conn[v]]),
        }
    }

    pub fn geometries(&self) -> Vec<PrismGeometry> {
        (0..self.len()).map(|e| self.geometry(e)).collect()
    }

    pub fn from_geometries(geoms: &[PrismGeometry]) -> Self {
        let mut nodes = Vec::with_capacity(6 * geoms.len());
        let mut elements = Vec::with_capacity(geoms.len());
        for g in geoms {
            let base = nodes.len();
            nodes.extend_from_slice(&g.vertices);
            elements.push(std::array::from_fn(|v| base + v));
        }
        Self { nodes, elements }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mesh: Mesh = serde_json::from_str(text)?;
        if let Some(bad) = mesh
            .elements
            .iter()
            .flatten()
            .find(|&&n| n >= mesh.nodes.len())
        {
            return Err(Error::MeshGeneration(format!("node index {bad} out of range")));
        }
        Ok(mesh)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Unit box split into `nx * ny * nz` hexahedral cells, two prisms per cell.
///
/// With `distortion > 0` every interior node is moved by up to
/// `distortion / 2` cell widths per axis, drawn from [`DEFAULT_SEED`].
pub fn generate_box_mesh(nx: usize, ny: usize, nz: usize, distortion: f64) -> Result<Mesh> {
    generate_box_mesh_seeded(nx, ny, nz, distortion, DEFAULT_SEED)
}

pub fn generate_box_mesh_seeded(
    nx: usize,
    ny: usize,
    nz: usize,
    distortion: f64,
    seed: u64,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::MeshGeneration("mesh dimensions must be >= 1".into()));
    }
    if !(0.0..0.3).contains(&distortion) {
        return Err(Error::MeshGeneration(format!(
            "distortion {distortion} outside [0, 0.3)"
        )));
    }
    let h = [1.0 / nx as f64, 1.0 / ny as f64, 1.0 / nz as f64];
    let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let mut x = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                let interior = i > 0 && i < nx && j > 0 && j < ny && k > 0 && k < nz;
                if distortion > 0.0 && interior {
                    for a in 0..3 {
                        x[a] += distortion * h[a] * rng.gen_range(-0.5..0.5);
                    }
                }
                nodes.push(x);
            }
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (node(i, j, k), node(i + 1, j, k), node(i + 1, j + 1, k), node(i, j + 1, k));
                let up = (nx + 1) * (ny + 1);
                elements.push([a, b, c, a + up, b + up, c + up]);
                elements.push([a, c, d, a + up, c + up, d + up]);
            }
        }
    }
    let mesh = Mesh { nodes, elements };
    validate_mesh(&mesh)?;
    Ok(mesh)
}

/// Checks `det J > 0` at the vertices and at every point of every supported rule.
pub fn validate_mesh(mesh: &Mesh) -> Result<()> {
    let mut probes: Vec<RefCoords> = PrismGeometry::reference()
        .vertices
        .iter()
        .map(|v| RefCoords::new(v[0], v[1], v[2]))
        .collect();
    for p in 1..=MAX_ORDER {
        probes.extend(prism_quadrature(p)?.points);
    }
    for e in 0..mesh.len() {
        let g = mesh.geometry(e);
        for &xi in &probes {
            jacobian_terms(&g, xi).map_err(|err| match err.with_element(e) {
                Error::InvertedElement { element, det, .. } => Error::MeshGeneration(format!(
                    "element {} inverted (det = {det:e})",
                    element.unwrap_or(e)
                )),
                other => other,
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::jacobian_terms;

    fn mesh_volume(mesh: &Mesh, p: usize) -> f64 {
        let rule = prism_quadrature(p).unwrap();
        mesh.geometries()
            .iter()
            .map(|g| {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&xi, w)| w * jacobian_terms(g, xi).unwrap().det)
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn single_cell() {
        let mesh = generate_box_mesh(1, 1, 1, 0.0).unwrap();
        assert_eq!(mesh.len(), 2);
        assert!((mesh_volume(&mesh, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn four_cubed_conserves_volume() {
        let mesh = generate_box_mesh(4, 4, 4, 0.0).unwrap();
        assert_eq!(mesh.len(), 128);
        assert!((mesh_volume(&mesh, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distorted_mesh_stays_valid() {
        let mesh = generate_box_mesh(2, 2, 2, 0.1).unwrap();
        assert_eq!(mesh.len(), 16);
        let mesh = generate_box_mesh(4, 4, 4, 0.29).unwrap();
        assert!((mesh_volume(&mesh, 2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distortion_is_reproducible() {
        let a = generate_box_mesh_seeded(3, 3, 3, 0.2, 7).unwrap();
        let b = generate_box_mesh_seeded(3, 3, 3, 0.2, 7).unwrap();
        let c = generate_box_mesh_seeded(3, 3, 3, 0.2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bad_arguments() {
        assert!(generate_box_mesh(0, 1, 1, 0.0).is_err());
        assert!(generate_box_mesh(1, 1, 1, 0.3).is_err());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let mesh = generate_box_mesh(2, 1, 1, 0.0).unwrap();
        let back = Mesh::from_json(&mesh.to_json().unwrap()).unwrap();
        assert_eq!(mesh, back);
        let bad = r#"{"nodes": [[0,0,0]], "elements": [[0,1,2,3,4,5]]}"#;
        assert!(Mesh::from_json(bad).is_err());
    }
}
