use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// How raw `(A, W)` inputs map to design columns for the linear families.
///
/// Column order is always `[1, A (if given), W_1..W_p]` followed by the
/// basis-specific terms:
/// - `Interact`: `A*W_j`
/// - `Poly2`: `W_j^2` for each `j`, then `W_j*W_k` for `j < k`
/// - `Poly2Interact`: the `Poly2` terms, then `A*W_j`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Linear,
    Interact,
    Poly2,
    Poly2Interact,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Linear => "linear",
            Basis::Interact => "interact",
            Basis::Poly2 => "poly2",
            Basis::Poly2Interact => "poly2_interact",
        }
    }

    pub fn parse(s: &str) -> Option<Basis> {
        Some(match s {
            "linear" => Basis::Linear,
            "interact" => Basis::Interact,
            "poly2" => Basis::Poly2,
            "poly2_interact" => Basis::Poly2Interact,
            _ => return None,
        })
    }

    fn has_squares(self) -> bool {
        matches!(self, Basis::Poly2 | Basis::Poly2Interact)
    }

    fn has_interactions(self) -> bool {
        matches!(self, Basis::Interact | Basis::Poly2Interact)
    }

    pub fn n_columns(self, p: usize, has_treatment: bool) -> usize {
        let mut cols = 1 + usize::from(has_treatment) + p;
        if self.has_squares() {
            cols += p + p * p.saturating_sub(1) / 2;
        }
        if self.has_interactions() && has_treatment {
            cols += p;
        }
        cols
    }
}

/// Builds the design matrix for `basis`. Interaction terms are skipped when
/// no treatment column is supplied.
pub fn expand_basis(w: &DMatrix<f64>, a: Option<&[f64]>, basis: Basis) -> DMatrix<f64> {
    let (n, p) = w.shape();
    let ncols = basis.n_columns(p, a.is_some());
    let mut x = DMatrix::zeros(n, ncols);
    for i in 0..n {
        let mut c = 0;
        let mut put = |v: f64| {
            x[(i, c)] = v;
            c += 1;
        };
        put(1.0);
        if let Some(a) = a {
            put(a[i]);
        }
        for j in 0..p {
            put(w[(i, j)]);
        }
        if basis.has_squares() {
            for j in 0..p {
                put(w[(i, j)] * w[(i, j)]);
            }
            for j in 0..p {
                for k in j + 1..p {
                    put(w[(i, j)] * w[(i, k)]);
                }
            }
        }
        if basis.has_interactions() {
            if let Some(a) = a {
                for j in 0..p {
                    put(a[i] * w[(i, j)]);
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_layouts() {
        let w = DMatrix::from_row_slice(1, 1, &[3.0]);
        let a = [1.0];
        let x = expand_basis(&w, Some(&a), Basis::Linear);
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 3.0]);
        let x = expand_basis(&w, Some(&a), Basis::Interact);
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 3.0, 3.0]);

        let w = DMatrix::from_row_slice(1, 2, &[2.0, 5.0]);
        let x = expand_basis(&w, Some(&[0.0]), Basis::Poly2);
        assert_eq!(
            x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 2.0, 5.0, 4.0, 25.0, 10.0]
        );
        let x = expand_basis(&w, Some(&[1.0]), Basis::Poly2Interact);
        assert_eq!(
            x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 1.0, 2.0, 5.0, 4.0, 25.0, 10.0, 2.0, 5.0]
        );
    }

    #[test]
    fn no_treatment_no_interactions() {
        let w = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let x = expand_basis(&w, None, Basis::Interact);
        assert_eq!(x.shape(), (2, 2));
        let x = expand_basis(&DMatrix::zeros(3, 0), Some(&[1.0, 0.0, 1.0]), Basis::Poly2Interact);
        assert_eq!(x.shape(), (3, 2));
    }
}
