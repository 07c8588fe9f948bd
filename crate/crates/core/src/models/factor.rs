use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_theta_len, default_in_domain, CorrelationModel, ModelSpec, DOMAIN_EPS};
use crate::error::{Error, Result};
use crate::numcore::SymMatrix;

/// Identification constraint on the loading matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorConstraint {
    /// Entries above the diagonal of the leading q×q block are fixed at zero
    /// and its diagonal must be positive.
    #[default]
    LowerTriangular,
    /// Raw loadings, all p·q entries free. Not identifiable: rotations of the
    /// loadings leave R unchanged, so information matrices are singular.
    None,
}

/// Gaussian factor copula: R(Λ) = I + offdiag(ΛΛ') with p×q loadings Λ.
#[derive(Debug, Clone)]
pub struct FactorModel {
    p: usize,
    q: usize,
    constraint: FactorConstraint,
    /// Positions (row, column) in Λ of the free parameters, in θ order.
    free: Vec<(usize, usize)>,
}

impl FactorModel {
    pub fn new(p: usize, q: usize, constraint: FactorConstraint) -> Result<Self> {
        if p < 2 {
            return Err(Error::config("p", format!("dimension must be at least 2, got {p}")));
        }
        if q == 0 || q >= p {
            return Err(Error::config("q", format!("need 1 <= q < p, got q = {q}, p = {p}")));
        }
        let free = (0..p)
            .flat_map(|i| (0..q).map(move |l| (i, l)))
            .filter(|&(i, l)| constraint == FactorConstraint::None || l <= i)
            .collect();
        Ok(Self { p, q, constraint, free })
    }

    pub fn n_factors(&self) -> usize {
        self.q
    }

    pub fn constraint(&self) -> FactorConstraint {
        self.constraint
    }

    /// The p×q loading matrix encoded by θ.
    pub fn loadings(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_theta_len(self.free.len(), theta)?;
        let mut lam = DMatrix::zeros(self.p, self.q);
        for (&(i, l), &t) in self.free.iter().zip(theta) {
            lam[(i, l)] = t;
        }
        Ok(lam)
    }

    /// θ encoding the given loadings; entries fixed by the constraint are dropped.
    pub fn theta_from_loadings(&self, lam: &DMatrix<f64>) -> Vec<f64> {
        self.free.iter().map(|&(i, l)| lam[(i, l)]).collect()
    }

    fn correlation_from_loadings(&self, lam: &DMatrix<f64>) -> SymMatrix {
        let mut r = SymMatrix::symmetrize(lam * lam.transpose()).into_inner();
        r.fill_diagonal(1.0);
        SymMatrix::symmetrize(r)
    }
}

impl CorrelationModel for FactorModel {
    fn name(&self) -> String {
        let c = match self.constraint {
            FactorConstraint::LowerTriangular => "lower_triangular",
            FactorConstraint::None => "none",
        };
        format!("factor({}, {}, {c})", self.p, self.q)
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn correlation(&self, theta: &[f64]) -> Result<SymMatrix> {
        Ok(self.correlation_from_loadings(&self.loadings(theta)?))
    }

    /// Off-diagonal part of E_m Λ' + Λ E_m'.
    fn derivative(&self, theta: &[f64], m: usize) -> Result<SymMatrix> {
        let lam = self.loadings(theta)?;
        let &(i, l) = self
            .free
            .get(m)
            .ok_or_else(|| Error::Shape(format!("parameter index {m} out of range")))?;
        let mut d = SymMatrix::zeros(self.p).into_inner();
        for j in 0..self.p {
            if j != i {
                d[(i, j)] = lam[(j, l)];
                d[(j, i)] = lam[(j, l)];
            }
        }
        Ok(SymMatrix::symmetrize(d))
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        let Ok(lam) = self.loadings(theta) else {
            return false;
        };
        let rows_ok = lam.row_iter().all(|row| row.norm_squared() < 1.0 - DOMAIN_EPS);
        let diag_ok = self.constraint == FactorConstraint::None
            || (0..self.q).all(|l| lam[(l, l)] > 0.0);
        rows_ok && diag_ok && default_in_domain(self, theta)
    }

    /// Principal-component loadings from the top q eigenpairs of R̂, rows
    /// shrunk inside the unit ball, rotated to satisfy the constraint.
    fn default_init(&self, rhat: &SymMatrix) -> Vec<f64> {
        let eig = rhat.as_matrix().clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut lam = DMatrix::zeros(self.p, self.q);
        for (l, &idx) in order.iter().take(self.q).enumerate() {
            let scale = eig.eigenvalues[idx].max(0.0).sqrt();
            for i in 0..self.p {
                lam[(i, l)] = eig.eigenvectors[(i, idx)] * scale;
            }
        }
        for mut row in lam.row_iter_mut() {
            let n2 = row.norm_squared();
            if n2 > 0.9 {
                row *= (0.9 / n2).sqrt();
            }
        }
        if self.constraint == FactorConstraint::LowerTriangular {
            let top = lam.rows(0, self.q).transpose();
            let q_mat = top.qr().q();
            lam = &lam * q_mat;
            for l in 0..self.q {
                if lam[(l, l)] < 0.0 {
                    lam.column_mut(l).neg_mut();
                }
                if lam[(l, l)] == 0.0 {
                    lam[(l, l)] = 1e-3;
                }
            }
        }
        self.theta_from_loadings(&lam)
    }

    fn shrink_center(&self) -> Vec<f64> {
        // Keep the positive diagonal positive while shrinking.
        self.free
            .iter()
            .map(|&(i, l)| {
                if self.constraint == FactorConstraint::LowerTriangular && i == l {
                    1e-3
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn notes(&self) -> Vec<String> {
        match self.constraint {
            FactorConstraint::LowerTriangular => vec![
                "unverified reparametrization condition: the lower-triangular loadings are assumed to span the same derivative space as the raw loadings".into(),
            ],
            FactorConstraint::None => vec![
                "raw loadings are not identifiable; information matrices may be singular".into(),
            ],
        }
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::Factor {
            p: self.p,
            q: self.q,
            constraint: self.constraint,
        })
    }
}
