use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cylindrical pod: radius and height in metres, discretized into
/// `n_r × n_z` axisymmetric cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodGeometry {
    pub radius: f64,
    pub height: f64,
    pub n_r: usize,
    pub n_z: usize,
}

impl Default for PodGeometry {
    fn default() -> Self {
        Self {
            radius: 0.029,
            height: 0.012,
            n_r: 4,
            n_z: 40,
        }
    }
}

impl PodGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.height > 0.0) {
            return Err(Error::invalid("geometry", "radius and height must be positive"));
        }
        if self.n_r < 4 || self.n_z < 4 {
            return Err(Error::invalid("geometry", "n_r and n_z must be at least 4"));
        }
        Ok(())
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_r: self.n_r * factor,
            n_z: self.n_z * factor,
            ..*self
        }
    }
}

/// Boundary surfaces of the pod.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Γ1, the inlet at the top.
    Top,
    /// Γ2, the lateral wall.
    Lateral,
    /// Γ3, the outlet at the bottom.
    Bottom,
}

/// Cell-centred finite-volume mesh on the `(r, x3)` half-plane.
///
/// Cell `(i, j)` has radial index `i` (0 at the axis) and axial index `j`
/// (0 at the bottom); its flat index is `j * n_r + i`.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub geometry: PodGeometry,
    pub dr: f64,
    pub dz: f64,
    /// Radii of the `n_r + 1` radial faces.
    pub r_face: Vec<f64>,
    pub r_center: Vec<f64>,
    pub z_center: Vec<f64>,
    /// Area of radial face `i` (one axial layer), `2π r_i dz`.
    pub area_r: Vec<f64>,
    /// Area of the axial faces above/below ring `i`, `π (r_{i+1}² − r_i²)`.
    pub area_z: Vec<f64>,
    /// Volume of every cell of ring `i`.
    pub ring_volume: Vec<f64>,
}

impl Mesh {
    pub fn new(geometry: PodGeometry) -> Result<Self> {
        geometry.validate()?;
        let PodGeometry {
            radius,
            height,
            n_r,
            n_z,
        } = geometry;
        let dr = radius / n_r as f64;
        let dz = height / n_z as f64;
        let r_face: Vec<f64> = (0..=n_r).map(|i| i as f64 * dr).collect();
        let r_center = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        let z_center = (0..n_z).map(|j| (j as f64 + 0.5) * dz).collect();
        let area_r = r_face.iter().map(|r| 2.0 * PI * r * dz).collect();
        let area_z: Vec<f64> = (0..n_r)
            .map(|i| PI * (r_face[i + 1] * r_face[i + 1] - r_face[i] * r_face[i]))
            .collect();
        let ring_volume = area_z.iter().map(|a| a * dz).collect();
        Ok(Self {
            geometry,
            dr,
            dz,
            r_face,
            r_center,
            z_center,
            area_r,
            area_z,
            ring_volume,
        })
    }

    pub fn n_r(&self) -> usize {
        self.geometry.n_r
    }

    pub fn n_z(&self) -> usize {
        self.geometry.n_z
    }

    pub fn n_cells(&self) -> usize {
        self.geometry.n_r * self.geometry.n_z
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.geometry.n_r + i
    }

    #[inline]
    pub fn volume(&self, cell: usize) -> f64 {
        self.ring_volume[cell % self.geometry.n_r]
    }

    pub fn volumes(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.volume(c)).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.ring_volume.iter().sum::<f64>() * self.geometry.n_z as f64
    }

    /// Cells adjacent to a boundary surface, in ascending index order.
    pub fn boundary_cells(&self, b: Boundary) -> Vec<usize> {
        let (n_r, n_z) = (self.n_r(), self.n_z());
        match b {
            Boundary::Top => (0..n_r).map(|i| self.index(i, n_z - 1)).collect(),
            Boundary::Bottom => (0..n_r).map(|i| self.index(i, 0)).collect(),
            Boundary::Lateral => (0..n_z).map(|j| self.index(n_r - 1, j)).collect(),
        }
    }

    /// Volume-weighted sum of a cell field.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().enumerate().map(|(c, v)| v * self.volume(c)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_add_up_to_cylinder() {
        let m = Mesh::new(PodGeometry::default()).unwrap();
        let g = m.geometry;
        let exact = PI * g.radius * g.radius * g.height;
        assert!((m.total_volume() - exact).abs() < 1e-15);
    }

    #[test]
    fn boundary_faces_partition_the_surface() {
        let m = Mesh::new(PodGeometry::default()).unwrap();
        let top = m.boundary_cells(Boundary::Top);
        let bottom = m.boundary_cells(Boundary::Bottom);
        let lateral = m.boundary_cells(Boundary::Lateral);
        assert_eq!(top.len() + bottom.len(), 2 * m.n_r());
        assert_eq!(lateral.len(), m.n_z());
        assert!(top.iter().all(|c| !bottom.contains(c)));
        // Face areas: top + bottom disks plus the wall.
        let g = m.geometry;
        let wall: f64 = m.area_r[m.n_r()] * m.n_z() as f64;
        assert!((wall - 2.0 * PI * g.radius * g.height).abs() < 1e-15);
    }

    #[test]
    fn rejects_coarse_meshes() {
        let g = PodGeometry {
            n_r: 3,
            ..PodGeometry::default()
        };
        assert!(Mesh::new(g).is_err());
    }
}
