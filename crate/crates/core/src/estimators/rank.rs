use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::{normal, SymMatrix};

/// Column-wise ranks of an n×p sample and the derived normal scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSample {
    pub n: usize,
    pub p: usize,
    /// n×p ranks in 1..=n; tied values share their average rank.
    #[serde(skip)]
    pub ranks: DMatrix<f64>,
    /// rank / (n + 1).
    #[serde(skip)]
    pub pseudo_obs: DMatrix<f64>,
    /// Φ⁻¹(pseudo_obs).
    #[serde(skip)]
    pub zhat: DMatrix<f64>,
    /// Columns (0-based) that contained ties.
    pub tie_columns: Vec<usize>,
}

impl RankedSample {
    pub fn has_ties(&self) -> bool {
        !self.tie_columns.is_empty()
    }
}

/// Average ranks of one column (1-based); the flag reports ties.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, bool) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut tied = false;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            tied = true;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    (ranks, tied)
}

/// Reduces an n×p data matrix to ranks, pseudo-observations rank/(n+1) and
/// normal scores.
pub fn rank_transform(data: &DMatrix<f64>) -> Result<RankedSample> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 observations, got {n}")));
    }
    if p < 1 {
        return Err(Error::Data("data has no columns".into()));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite value at row {}, column {}",
            pos % n + 1,
            pos / n + 1
        )));
    }
    let mut ranks = DMatrix::zeros(n, p);
    let mut tie_columns = Vec::new();
    for j in 0..p {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        let (r, tied) = average_ranks(&col);
        if r.iter().all(|v| *v == r[0]) {
            return Err(Error::DegenerateMargin { column: j });
        }
        if tied {
            tie_columns.push(j);
        }
        ranks.set_column(j, &nalgebra::DVector::from_vec(r));
    }
    let denom = (n + 1) as f64;
    let pseudo_obs = ranks.map(|r| r / denom);
    let zhat = pseudo_obs.map(|u| normal::quantile(u).expect("pseudo-observations lie in (0,1)"));
    Ok(RankedSample {
        n,
        p,
        ranks,
        pseudo_obs,
        zhat,
        tie_columns,
    })
}

/// R̂ = (1/n) Σ ẑ_i ẑ_i'.
pub fn normal_scores_matrix(sample: &RankedSample) -> SymMatrix {
    SymMatrix::symmetrize(sample.zhat.tr_mul(&sample.zhat) / sample.n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_column() {
        let data = DMatrix::from_column_slice(3, 1, &[3.2, -1.0, 7.0]);
        let s = rank_transform(&data).unwrap();
        assert_eq!(s.ranks.as_slice(), &[2.0, 1.0, 3.0]);
        assert_eq!(s.pseudo_obs.as_slice(), &[0.5, 0.25, 0.75]);
        assert!(!s.has_ties());
    }

    #[test]
    fn ties_get_average_rank() {
        let (r, tied) = average_ranks(&[1.0, 2.0, 2.0, 5.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
        assert!(tied);
        let (r, _) = average_ranks(&[4.0, 4.0, 4.0, 1.0]);
        assert_eq!(r, vec![3.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn errors() {
        let one = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(rank_transform(&one), Err(Error::Data(_))));
        let constant = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!(matches!(
            rank_transform(&constant),
            Err(Error::DegenerateMargin { column: 1 })
        ));
        let nan = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(rank_transform(&nan).is_err());
    }

    #[test]
    fn monotone_invariance() {
        let data = DMatrix::from_row_slice(4, 2, &[0.3, 1.0, -2.0, 0.5, 1.7, -0.1, 0.0, 2.2]);
        let a = rank_transform(&data).unwrap();
        let b = rank_transform(&data.map(f64::exp)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn n2_scores() {
        let z = normal::quantile(1.0 / 3.0).unwrap();
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = normal_scores_matrix(&rank_transform(&data).unwrap());
        assert!((r.get(0, 0) - z * z).abs() < 1e-15);
        assert!((r.get(0, 1) + z * z).abs() < 1e-15);
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let r = normal_scores_matrix(&rank_transform(&data).unwrap());
        assert!((r.get(0, 1) - z * z).abs() < 1e-15);
    }

    #[test]
    fn identical_columns() {
        let data = DMatrix::from_row_slice(5, 2, &[0.1, 0.1, 0.5, 0.5, -0.3, -0.3, 2.0, 2.0, 1.1, 1.1]);
        let r = normal_scores_matrix(&rank_transform(&data).unwrap());
        assert_eq!(r.get(0, 1), r.get(0, 0));
    }
}
