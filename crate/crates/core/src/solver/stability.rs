use nalgebra::DMatrix;
use sprs::CsMat;

use crate::discretization::DiscreteSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, generalized_symmetric_eigenvalues, mul_vec, to_dense, BandedLu};

/// Largest trial dimension handled by the dense eigenvalue path.
pub const DENSE_CAP: usize = 2000;
pub const ITERATION_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfSupMethod {
    Dense,
    InverseIteration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSup {
    /// `c_B,h`.
    pub value: f64,
    /// Largest generalized singular value (dense path only).
    pub continuity: Option<f64>,
    pub method: InfSupMethod,
    pub iterations: usize,
}

impl InfSup {
    pub fn condition(&self) -> Option<f64> {
        self.continuity.map(|c| c / self.value)
    }
}

fn cholesky_l(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(a.clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what} Gram matrix is not positive definite")))?
        .l())
}

/// Extreme generalized singular values of `B` between `M_X` and `M_Y`:
/// square roots of the extreme eigenvalues of `Bᵀ M_Y⁻¹ B` against `M_X`.
pub fn inf_sup_dense(b: &CsMat<f64>, m_x: &CsMat<f64>, m_y: &CsMat<f64>) -> Result<(f64, f64)> {
    let l_y = cholesky_l(&to_dense(m_y), "Y")?;
    let y = l_y
        .solve_lower_triangular(&to_dense(b))
        .ok_or_else(|| Error::Numerical("singular Y factor".into()))?;
    let k = y.transpose() * &y;
    let eig = generalized_symmetric_eigenvalues(&k, &to_dense(m_x))?;
    Ok((eig[0].max(0.0).sqrt(), eig[eig.len() - 1].max(0.0).sqrt()))
}

/// Smallest singular value of `L_Y⁻¹ B L_X⁻ᵀ`, an independent route to `c_B,h`.
pub fn svd_oracle(b: &CsMat<f64>, m_x: &CsMat<f64>, m_y: &CsMat<f64>) -> Result<f64> {
    let l_x = cholesky_l(&to_dense(m_x), "X")?;
    let l_y = cholesky_l(&to_dense(m_y), "Y")?;
    let left = l_y
        .solve_lower_triangular(&to_dense(b))
        .ok_or_else(|| Error::Numerical("singular Y factor".into()))?;
    // (L_Y⁻¹ B) L_X⁻ᵀ = (L_X⁻¹ (L_Y⁻¹ B)ᵀ)ᵀ
    let c = l_x
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numerical("singular X factor".into()))?
        .transpose();
    Ok(c.singular_values().min())
}

/// Inverse iteration on `x ↦ B⁻¹ M_Y B⁻ᵀ M_X x`, whose dominant eigenvalue
/// is `1 / c_B,h²`.
pub fn inf_sup_iterative(b: &CsMat<f64>, m_x: &CsMat<f64>, m_y: &CsMat<f64>) -> Result<(f64, usize)> {
    let lu = BandedLu::factor(b)?;
    let n = b.rows();
    let mut x: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * (0.7 * k as f64 + 0.3).sin()).collect();
    let normalize = |x: &mut Vec<f64>| {
        let s = dot(x, &mul_vec(m_x, x)).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
    };
    normalize(&mut x);
    let mut mu_old = f64::NAN;
    for it in 1..=MAX_ITERATIONS {
        let mx = mul_vec(m_x, &x);
        let z = lu.solve_transpose(&mx);
        let next = lu.solve(&mul_vec(m_y, &z));
        let mu = dot(&mx, &next);
        x = next;
        normalize(&mut x);
        if (mu - mu_old).abs() <= ITERATION_TOL * mu {
            return Ok((1.0 / mu.sqrt(), it));
        }
        mu_old = mu;
    }
    Err(Error::Numerical(format!(
        "inverse iteration for the inf-sup constant did not converge in {MAX_ITERATIONS} iterations"
    )))
}

/// `c_B,h = inf_u sup_y B(u, y) / (‖u‖_X ‖y‖_Y)` in the discrete norms.
pub fn discrete_inf_sup(system: &DiscreteSystem) -> Result<InfSup> {
    let (m_x, m_y) = system.norm_matrices()?;
    let out = if system.dim() <= DENSE_CAP {
        let (low, high) = inf_sup_dense(&system.matrix, m_x, m_y)?;
        InfSup {
            value: low,
            continuity: Some(high),
            method: InfSupMethod::Dense,
            iterations: 0,
        }
    } else {
        let (value, iterations) = inf_sup_iterative(&system.matrix, m_x, m_y)?;
        InfSup {
            value,
            continuity: None,
            method: InfSupMethod::InverseIteration,
            iterations,
        }
    };
    if !(out.value > 0.0) {
        return Err(Error::Instability {
            reason: format!("discrete inf-sup constant {} is not positive", out.value),
            n_x: system.mesh.n_x(),
            n_t: system.mesh.n_t(),
            dim: system.dim(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::AssemblyOptions;
    use crate::linalg::csr_from_triplets;
    use crate::solver::benchmarks::Benchmark;

    #[test]
    fn scalar_system() {
        let b = csr_from_triplets(1, 1, vec![(0, 0, -2.5)]);
        let one = csr_from_triplets(1, 1, vec![(0, 0, 1.0)]);
        let (low, high) = inf_sup_dense(&b, &one, &one).unwrap();
        assert!((low - 2.5).abs() < 1e-15 && (high - 2.5).abs() < 1e-15);
        assert!((svd_oracle(&b, &one, &one).unwrap() - 2.5).abs() < 1e-15);
        assert!((inf_sup_iterative(&b, &one, &one).unwrap().0 - 2.5).abs() < 1e-12);
    }

    #[test]
    fn dense_path_matches_svd_oracle() {
        for bench in [Benchmark::Heat, Benchmark::M1, Benchmark::M3] {
            let p = bench.problem().unwrap();
            let sys = p.assemble(&p.mesh(4, 4).unwrap(), AssemblyOptions::default()).unwrap();
            let (mx, my) = sys.norm_matrices().unwrap();
            let dense = discrete_inf_sup(&sys).unwrap().value;
            let oracle = svd_oracle(&sys.matrix, mx, my).unwrap();
            assert!((dense - oracle).abs() <= 1e-10, "{bench:?}: {dense} vs {oracle}");
        }
    }

    #[test]
    fn iteration_matches_dense_path() {
        let p = Benchmark::M2.problem().unwrap();
        let sys = p.assemble(&p.mesh(8, 8).unwrap(), AssemblyOptions::default()).unwrap();
        let (mx, my) = sys.norm_matrices().unwrap();
        let (dense, _) = inf_sup_dense(&sys.matrix, mx, my).unwrap();
        let (iter, _) = inf_sup_iterative(&sys.matrix, mx, my).unwrap();
        assert!((dense - iter).abs() <= 1e-6 * dense, "{dense} vs {iter}");
    }
}
