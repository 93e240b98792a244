use crate::calculus::Boundary;
use crate::error::{Error, Result};
use crate::motion::MotionMap;

/// Smallest admissible element length at any level.
pub const MIN_ELEMENT: f64 = 1e-6;

/// Moving spatial meshes over a uniform time partition. Level `n` holds the
/// initial grid transported by `Φ(·, t_n)`; inside a slab nodes move on
/// straight lines between consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeMesh {
    motion: MotionMap,
    boundary: Boundary,
    times: Vec<f64>,
    levels: Vec<Vec<f64>>,
    interface_node: usize,
}

impl SpaceTimeMesh {
    /// `n_x` cells split between `[0, γ₀]` and `[γ₀, 1]` in proportion to
    /// their lengths, `n_t` uniform slabs.
    pub fn build(n_x: usize, n_t: usize, motion: &MotionMap, boundary: Boundary) -> Result<Self> {
        if n_x < 2 || n_t < 1 {
            return Err(Error::config(format!("mesh needs n_x >= 2 and n_t >= 1 (got {n_x}, {n_t})")));
        }
        let gamma0 = motion.gamma0();
        let initial = crate::operator::fitted_grid(n_x, gamma0);
        let interface_node = initial.iter().position(|&x| x == gamma0).expect("fitted grid holds the interface");
        let horizon = motion.horizon();
        let times: Vec<f64> = (0..=n_t)
            .map(|n| if n == n_t { horizon } else { horizon * n as f64 / n_t as f64 })
            .collect();
        let levels: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| initial.iter().map(|&x| motion.forward(x, t)).collect())
            .collect();
        for (n, level) in levels.iter().enumerate() {
            if let Some(w) = level.windows(2).find(|w| w[1] - w[0] < MIN_ELEMENT) {
                return Err(Error::numerical(format!(
                    "degenerate element [{}, {}] at level {n} (t = {})",
                    w[0], w[1], times[n]
                )));
            }
        }
        Ok(Self {
            motion: *motion,
            boundary,
            times,
            levels,
            interface_node,
        })
    }

    pub fn motion(&self) -> &MotionMap {
        &self.motion
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_x(&self) -> usize {
        self.levels[0].len() - 1
    }

    pub fn n_t(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self, slab: usize) -> f64 {
        self.times[slab + 1] - self.times[slab]
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn interface_node(&self) -> usize {
        self.interface_node
    }

    /// Degrees of freedom per level.
    pub fn dofs_per_level(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => self.n_x() - 1,
            Boundary::Neumann => self.n_x() + 1,
        }
    }

    pub fn trial_dim(&self) -> usize {
        (self.n_t() + 1) * self.dofs_per_level()
    }

    /// Degree of freedom of a mesh node, `None` for Dirichlet boundary nodes.
    #[inline]
    pub fn dof(&self, node: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Dirichlet => {
                if node == 0 || node == self.n_x() {
                    None
                } else {
                    Some(node - 1)
                }
            }
            Boundary::Neumann => Some(node),
        }
    }

    /// Mesh node of a degree of freedom.
    #[inline]
    pub fn node(&self, dof: usize) -> usize {
        match self.boundary {
            Boundary::Dirichlet => dof + 1,
            Boundary::Neumann => dof,
        }
    }

    /// Global trial index of `dof` at level `n`.
    #[inline]
    pub fn trial_index(&self, level: usize, dof: usize) -> usize {
        level * self.dofs_per_level() + dof
    }

    /// Slab containing `t` (the last slab for `t = T`).
    pub fn slab_of(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.clamp(1, self.n_t()) - 1
    }

    /// Node positions and velocities at time `t` inside `slab`.
    pub fn nodes_at(&self, slab: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (&self.levels[slab], &self.levels[slab + 1]);
        let dt = self.dt(slab);
        let s = (t - self.times[slab]) / dt;
        let pos = a.iter().zip(b).map(|(x0, x1)| x0 + s * (x1 - x0)).collect();
        let vel = a.iter().zip(b).map(|(x0, x1)| (x1 - x0) / dt).collect();
        (pos, vel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_levels_coincide() {
        let m = MotionMap::identity(0.5, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(8, 4, &m, Boundary::Dirichlet).unwrap();
        for n in 1..=4 {
            assert_eq!(mesh.level(n), mesh.level(0));
        }
        assert_eq!(mesh.trial_dim(), 5 * 7);
    }

    #[test]
    fn interface_node_is_tracked() {
        let m = MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(4, 4, &m, Boundary::Dirichlet).unwrap();
        let i = mesh.interface_node();
        for n in 0..=4 {
            assert_eq!(mesh.level(n)[i], m.gamma(mesh.times()[n]));
        }
        // level 1 is t = 1/4, where a sin(ωt) = 0.1
        assert!((mesh.level(1)[i] - 0.598_394_524_536_567_9).abs() < 1e-13);
    }

    #[test]
    fn single_slab() {
        let m = MotionMap::identity(0.3, 2.0).unwrap();
        let mesh = SpaceTimeMesh::build(5, 1, &m, Boundary::Neumann).unwrap();
        assert_eq!(mesh.times(), &[0.0, 2.0]);
        assert_eq!(mesh.dofs_per_level(), 6);
        assert_eq!(mesh.slab_of(2.0), 0);
    }

    #[test]
    fn rejects_degenerate_requests() {
        let m = MotionMap::identity(0.5, 1.0).unwrap();
        assert!(SpaceTimeMesh::build(1, 4, &m, Boundary::Dirichlet).is_err());
        assert!(SpaceTimeMesh::build(4, 0, &m, Boundary::Dirichlet).is_err());
        let wild = MotionMap::separable_flow(8.0, 2.0 * PI, 0.5, 1.0).unwrap();
        assert!(SpaceTimeMesh::build(64, 4, &wild, Boundary::Dirichlet).is_err());
    }

    #[test]
    fn levels_are_strictly_increasing() {
        let m = MotionMap::separable_flow(0.1, 2.0 * PI, 0.37, 1.0).unwrap();
        let mesh = SpaceTimeMesh::build(16, 8, &m, Boundary::Dirichlet).unwrap();
        for n in 0..=8 {
            assert!(mesh.level(n).windows(2).all(|w| w[1] - w[0] >= MIN_ELEMENT));
        }
    }
}
