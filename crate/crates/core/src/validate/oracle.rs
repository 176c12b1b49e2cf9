//! Exact solver for small least-norm problems by active-set enumeration.
//!
//! The minimizer of `‖x‖²` over `{Ex = e, Gx ≤ h}` is the least-norm
//! solution of its active equality system, so trying every subset of
//! inequality rows as equalities and keeping the best feasible candidate
//! finds it exactly.

use nalgebra::{DMatrix, DVector};

use crate::model::{from_real, C64};

/// `aᵀx = b` or `aᵀx ≤ b`.
pub type Row = (DVector<f64>, f64);

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: DVector<f64>,
    /// `‖x‖²`.
    pub value: f64,
}

/// `None` when no subset yields a feasible point, i.e. the set is empty.
pub fn least_norm_oracle(dim: usize, eq: &[Row], le: &[Row]) -> Option<OracleSolution> {
    assert!(le.len() <= 20, "enumeration over {} rows is too large", le.len());
    let scale = eq
        .iter()
        .chain(le)
        .map(|(a, b)| a.amax().max(b.abs()))
        .fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1 << le.len()) {
        let active: Vec<&Row> = eq
            .iter()
            .chain(
                le.iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, r)| r),
            )
            .collect();
        let x = match least_norm(dim, &active, tol) {
            Some(x) => x,
            None => continue,
        };
        let feasible = eq.iter().all(|(a, b)| (a.dot(&x) - b).abs() <= tol * (1.0 + x.norm()))
            && le.iter().all(|(a, b)| a.dot(&x) - b <= tol * (1.0 + x.norm()));
        if !feasible {
            continue;
        }
        let value = x.norm_squared();
        if best.as_ref().is_none_or(|s| value < s.value) {
            best = Some(OracleSolution { x, value });
        }
    }
    best
}

/// Least-norm solution of `A x = b`, or `None` if inconsistent.
fn least_norm(dim: usize, rows: &[&Row], tol: f64) -> Option<DVector<f64>> {
    if rows.is_empty() {
        return Some(DVector::zeros(dim));
    }
    let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]);
    let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12 * svd.singular_values.max()).ok()?;
    ((&a * &x - &b).amax() <= tol * (1.0 + x.norm())).then_some(x)
}

/// Real coefficient vector of the real-linear functional `w ↦ L(w)` in the
/// coordinates `x = [Re w; −Im w]`, found by evaluating `L` on every basis
/// vector.
pub fn functional_row(n: usize, l: impl Fn(&DVector<C64>) -> f64) -> DVector<f64> {
    DVector::from_fn(2 * n, |j, _| {
        let mut e = DVector::zeros(2 * n);
        e[j] = 1.0;
        l(&from_real(&e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_projection() {
        let le = vec![(DVector::from_vec(vec![-1.0, 0.0]), -3.0)];
        let s = least_norm_oracle(2, &[], &le).unwrap();
        assert!((s.value - 9.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set() {
        let le = vec![
            (DVector::from_vec(vec![1.0]), -1.0),
            (DVector::from_vec(vec![-1.0]), -1.0),
        ];
        assert!(least_norm_oracle(1, &[], &le).is_none());
    }

    #[test]
    fn functional_row_matches_real_part() {
        let a = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)]);
        let row = functional_row(2, |w| (a.transpose() * w)[0].re);
        let w = DVector::from_vec(vec![C64::new(0.3, -1.1), C64::new(2.0, 0.7)]);
        let x = crate::model::to_real(&w);
        assert!((row.dot(&x) - (a.transpose() * &w)[0].re).abs() < 1e-14);
    }
}
