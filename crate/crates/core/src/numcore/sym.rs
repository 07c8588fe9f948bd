use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before the input is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

/// A dense real symmetric matrix. The stored entries are exactly symmetric.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, rejecting it if it is not symmetric up to
    /// round-off. The stored value is the exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Shape("symmetric matrix must have dim >= 1".into()));
        }
        let scale = m.amax().max(1.0);
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !(a - b).abs().le(&(SYMMETRY_TOL * scale)) {
                    return Err(Error::Shape(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetric part (M + M')/2 of a square matrix; no tolerance check.
    pub fn symmetrize(mut m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Builds from the upper triangle given by `f(i, j)` with `i <= j`.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Shape("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn zeros(p: usize) -> Self {
        SymMatrix(DMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// The matrix with ones at (i, j) and (j, i) and zeros elsewhere.
    pub fn unit_pair(p: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(p, p);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        SymMatrix(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    /// Same matrix with the diagonal set to zero.
    pub fn off_diagonal(&self) -> Self {
        let mut m = self.0.clone();
        m.fill_diagonal(0.0);
        SymMatrix(m)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// Rows as nested vectors, for serialization and display.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// `self * other * self`, symmetrized.
    pub fn sandwich(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrize(&self.0 * &other.0 * &self.0)
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn quad_form(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dim(), "quad_form: vector length");
        let mut acc = 0.0;
        for (i, zi) in z.iter().enumerate() {
            let row: f64 = z.iter().enumerate().map(|(j, zj)| self.0[(i, j)] * zj).sum();
            acc += zi * row;
        }
        acc
    }

    pub fn hadamard(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(self.0.component_mul(&other.0))
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )))
        }
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", self.to_rows())
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// A correlation matrix R fixing the inner product ⟨A, B⟩ = ½ tr(A R B R).
#[derive(Debug, Clone)]
pub struct InnerProductContext {
    r: SymMatrix,
}

impl InnerProductContext {
    /// Validates unit diagonal and positive definiteness.
    pub fn new(r: SymMatrix) -> Result<Self> {
        for (j, d) in r.diagonal().into_iter().enumerate() {
            if (d - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "correlation matrix needs unit diagonal, entry {j} is {d}"
                )));
            }
        }
        super::linalg::cholesky(&r, "inner product context")?;
        Ok(Self { r })
    }

    pub(crate) fn new_unchecked(r: SymMatrix) -> Self {
        Self { r }
    }

    pub fn r(&self) -> &SymMatrix {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }
}

/// ⟨A, B⟩ = ½ tr(A R B R), the covariance of ½Z'AZ and ½Z'BZ for Z ~ N(0, R).
pub fn theta_inner(a: &SymMatrix, b: &SymMatrix, ctx: &InnerProductContext) -> Result<f64> {
    a.check_same_dim(b)?;
    a.check_same_dim(ctx.r())?;
    Ok(inner_unchecked(a, b, ctx.r()))
}

pub(crate) fn inner_unchecked(a: &SymMatrix, b: &SymMatrix, r: &SymMatrix) -> f64 {
    let ar = &a.0 * &r.0;
    let br = &b.0 * &r.0;
    // tr(AR BR) = Σ_ij (AR)_ij (BR)_ji
    0.5 * ar.component_mul(&br.transpose()).sum()
}

/// Gram matrix of `basis` under [`theta_inner`]. Symmetric by construction.
pub fn gram(basis: &[SymMatrix], ctx: &InnerProductContext) -> Result<DMatrix<f64>> {
    if basis.is_empty() {
        return Err(Error::Shape("gram needs a non-empty basis".into()));
    }
    for b in basis {
        b.check_same_dim(ctx.r())?;
    }
    let r = &ctx.r().0;
    let products: Vec<DMatrix<f64>> = basis.iter().map(|b| &b.0 * r).collect();
    let k = basis.len();
    let mut g = DMatrix::zeros(k, k);
    for m in 0..k {
        for l in m..k {
            let v = 0.5 * products[m].component_mul(&products[l].transpose()).sum();
            g[(m, l)] = v;
            g[(l, m)] = v;
        }
    }
    Ok(g)
}

/// Least-squares projection of a symmetric matrix onto a span.
#[derive(Debug, Clone, Serialize)]
pub struct SpanProjection {
    /// Frobenius norm of `M - Σ c_m basis[m]`.
    pub residual_norm: f64,
    pub coefficients: Vec<f64>,
    /// Numerical rank of the basis.
    pub rank: usize,
}

impl SpanProjection {
    /// Membership test with threshold `rel_tol * (1 + ‖M‖_F)`.
    pub fn in_span(&self, m_norm: f64, rel_tol: f64) -> bool {
        self.residual_norm <= rel_tol * (1.0 + m_norm)
    }
}

/// Projects `m` onto `span(basis)` in the Frobenius inner product, using a
/// rank-revealing SVD solve so that dependent bases are handled.
pub fn span_residual(m: &SymMatrix, basis: &[SymMatrix]) -> Result<SpanProjection> {
    if basis.is_empty() {
        return Ok(SpanProjection {
            residual_norm: m.frobenius_norm(),
            coefficients: Vec::new(),
            rank: 0,
        });
    }
    for b in basis {
        m.check_same_dim(b)?;
    }
    let p = m.dim();
    let len = p * (p + 1) / 2;
    // Upper triangle with off-diagonal entries weighted by √2, so the
    // Euclidean norm of the vector equals the Frobenius norm of the matrix.
    let vectorize = |s: &SymMatrix| -> DVector<f64> {
        let mut v = DVector::zeros(len);
        let mut idx = 0;
        for i in 0..p {
            for j in i..p {
                let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                v[idx] = w * s.get(i, j);
                idx += 1;
            }
        }
        v
    };
    let mut design = DMatrix::zeros(len, basis.len());
    for (c, b) in basis.iter().enumerate() {
        design.set_column(c, &vectorize(b));
    }
    let target = vectorize(m);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (len.max(basis.len()) as f64);
    let rank = svd.rank(eps);
    let coef = svd
        .solve(&target, eps)
        .map_err(|e| Error::singular(format!("span projection: {e}"), None))?;
    let resid = &target - &design * &coef;
    Ok(SpanProjection {
        residual_norm: resid.norm(),
        coefficients: coef.iter().copied().collect(),
        rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exch(p: usize, t: f64) -> SymMatrix {
        SymMatrix::from_fn(p, |i, j| if i == j { 1.0 } else { t })
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::Shape(_))));
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(SymMatrix::new(m).is_err());
    }

    #[test]
    fn identity_inner_product() {
        for p in 1..6 {
            let ctx = InnerProductContext::new(SymMatrix::identity(p)).unwrap();
            let i = SymMatrix::identity(p);
            assert_eq!(theta_inner(&i, &i, &ctx).unwrap(), p as f64 / 2.0);
        }
    }

    #[test]
    fn zero_is_annihilating() {
        let ctx = InnerProductContext::new(exch(3, 0.3)).unwrap();
        let b = exch(3, 2.0);
        assert_eq!(theta_inner(&SymMatrix::zeros(3), &b, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn offdiagonal_ones_at_independence() {
        let ctx = InnerProductContext::new(SymMatrix::identity(3)).unwrap();
        let rdot = exch(3, 1.0).off_diagonal();
        assert!((theta_inner(&rdot, &rdot, &ctx).unwrap() - 3.0).abs() < 1e-15);
        let g = gram(&[rdot.clone(), SymMatrix::zeros(3)], &ctx).unwrap();
        assert!((g[(0, 0)] - 3.0).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 1)], 0.0);
    }

    #[test]
    fn context_validation() {
        assert!(InnerProductContext::new(exch(3, -0.5)).is_err());
        let mut m = exch(3, 0.2).into_inner();
        m[(1, 1)] = 2.0;
        assert!(InnerProductContext::new(SymMatrix::symmetrize(m)).is_err());
    }

    #[test]
    fn shape_errors() {
        let ctx = InnerProductContext::new(SymMatrix::identity(3)).unwrap();
        let a = SymMatrix::identity(2);
        assert!(matches!(
            theta_inner(&a, &a, &ctx),
            Err(Error::Shape(_))
        ));
        assert!(gram(&[], &ctx).is_err());
        assert!(span_residual(&SymMatrix::identity(3), &[a]).is_err());
    }

    #[test]
    fn span_of_itself() {
        let b0 = exch(3, 0.7);
        let b1 = SymMatrix::unit_pair(3, 0, 2);
        let proj = span_residual(&b0, &[b0.clone(), b1]).unwrap();
        assert!(proj.residual_norm < 1e-14);
        assert!((proj.coefficients[0] - 1.0).abs() < 1e-14);
        assert!(proj.coefficients[1].abs() < 1e-14);
        assert_eq!(proj.rank, 2);
    }

    #[test]
    fn empty_basis_residual_is_norm() {
        let m = exch(3, 0.3);
        let proj = span_residual(&m, &[]).unwrap();
        assert_eq!(proj.residual_norm, m.frobenius_norm());
        assert!(proj.coefficients.is_empty());
    }

    #[test]
    fn diagonal_is_orthogonal_to_zero_diagonal_span() {
        let m = SymMatrix::from_fn(3, |i, j| if i == j { 1.0 + i as f64 } else { 0.4 });
        let basis = [SymMatrix::unit_pair(3, 0, 1), SymMatrix::unit_pair(3, 1, 2)];
        let proj = span_residual(&m, &basis).unwrap();
        let diag_norm = m.diagonal().iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(proj.residual_norm >= diag_norm - 1e-12);
    }

    #[test]
    fn dependent_basis_is_rank_deficient() {
        let b = SymMatrix::unit_pair(4, 0, 1);
        let c = SymMatrix::unit_pair(4, 2, 3);
        let basis = [b.clone(), c.clone(), &b + &c];
        let proj = span_residual(&(&b * 2.0), &basis).unwrap();
        assert_eq!(proj.rank, 2);
        assert!(proj.residual_norm < 1e-13);
    }
}
