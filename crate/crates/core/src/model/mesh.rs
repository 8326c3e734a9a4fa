//! Finite-volume discretization of the through-thickness and radial domains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Neg,
    Sep,
    Pos,
}

/// Control-volume counts; positions are derived from cell geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub n_neg: usize,
    pub n_sep: usize,
    pub n_pos: usize,
    pub n_r: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            n_neg: 10,
            n_sep: 5,
            n_pos: 10,
            n_r: 10,
        }
    }
}

impl MeshSpec {
    /// Twice as many control volumes in every direction.
    pub fn refined(self) -> Self {
        Self {
            n_neg: 2 * self.n_neg,
            n_sep: 2 * self.n_sep,
            n_pos: 2 * self.n_pos,
            n_r: 2 * self.n_r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: MeshSpec,
    /// Control-volume centers along x, m.
    pub x: Vec<f64>,
    /// Control-volume widths along x, m.
    pub dx: Vec<f64>,
    pub region: Vec<Region>,
    /// Normalized shell boundaries rho_0 = 0 .. rho_{n_r} = 1.
    pub rho_faces: Vec<f64>,
    /// Normalized shell volume fractions; they sum to one.
    pub shell_fraction: Vec<f64>,
}

impl Mesh {
    pub fn new(spec: MeshSpec, params: &ParameterSet) -> Result<Self> {
        for (name, n) in [
            ("n_neg", spec.n_neg),
            ("n_sep", spec.n_sep),
            ("n_pos", spec.n_pos),
            ("n_r", spec.n_r),
        ] {
            if n < 3 {
                return Err(Error::InvalidMesh(format!("{name} = {n}, need at least 3")));
            }
        }
        let mut x = Vec::new();
        let mut dx = Vec::new();
        let mut region = Vec::new();
        let mut offset = 0.0;
        for (n, len, tag) in [
            (spec.n_neg, params.l_n, Region::Neg),
            (spec.n_sep, params.l_sep, Region::Sep),
            (spec.n_pos, params.l_p, Region::Pos),
        ] {
            let h = len / n as f64;
            for i in 0..n {
                x.push(offset + (i as f64 + 0.5) * h);
                dx.push(h);
                region.push(tag);
            }
            offset += len;
        }
        let n_r = spec.n_r;
        let rho_faces: Vec<f64> = (0..=n_r).map(|i| i as f64 / n_r as f64).collect();
        let shell_fraction = rho_faces
            .windows(2)
            .map(|w| w[1].powi(3) - w[0].powi(3))
            .collect();
        Ok(Self {
            spec,
            x,
            dx,
            region,
            rho_faces,
            shell_fraction,
        })
    }

    pub fn n_x(&self) -> usize {
        self.dx.len()
    }

    pub fn n_r(&self) -> usize {
        self.spec.n_r
    }

    pub fn neg_range(&self) -> std::ops::Range<usize> {
        0..self.spec.n_neg
    }

    pub fn pos_range(&self) -> std::ops::Range<usize> {
        let start = self.spec.n_neg + self.spec.n_sep;
        start..start + self.spec.n_pos
    }

    pub fn region_length(&self, tag: Region) -> f64 {
        self.dx
            .iter()
            .zip(&self.region)
            .filter(|(_, r)| **r == tag)
            .map(|(h, _)| h)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_sum_to_domain_lengths() {
        let p = ParameterSet::default();
        let mesh = Mesh::new(MeshSpec { n_neg: 7, n_sep: 3, n_pos: 11, n_r: 9 }, &p).unwrap();
        for (tag, len) in [(Region::Neg, p.l_n), (Region::Sep, p.l_sep), (Region::Pos, p.l_p)] {
            assert!((mesh.region_length(tag) - len).abs() / len < 1e-12);
        }
        let total: f64 = mesh.shell_fraction.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(mesh.n_x(), 21);
        assert_eq!(mesh.pos_range(), 10..21);
    }

    #[test]
    fn rejects_coarse_mesh() {
        let p = ParameterSet::default();
        let spec = MeshSpec { n_neg: 2, ..MeshSpec::default() };
        assert!(matches!(Mesh::new(spec, &p), Err(Error::InvalidMesh(_))));
    }
}
