/// k-nearest-neighbour regression on raw feature rows (Euclidean distance).
/// Equal distances are resolved in favour of the lower training row.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Knn {
    rows: Vec<f64>,
    width: usize,
    targets: Vec<f64>,
    weights: Option<Vec<f64>>,
    k: usize,
}

impl Knn {
    pub fn fit(rows: Vec<f64>, width: usize, targets: &[f64], weights: Option<&[f64]>, k: usize) -> Knn {
        Knn {
            rows,
            width,
            targets: targets.to_vec(),
            weights: weights.map(<[f64]>::to_vec),
            k,
        }
    }

    pub fn predict_one(&self, query: &[f64]) -> f64 {
        let n = self.targets.len();
        let k = self.k.min(n);
        let mut dist: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let row = &self.rows[i * self.width..(i + 1) * self.width];
                let d = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let nearest = &dist[..k];
        match &self.weights {
            Some(w) => {
                let wsum: f64 = nearest.iter().map(|&(_, i)| w[i]).sum();
                if wsum > 0.0 {
                    return nearest.iter().map(|&(_, i)| w[i] * self.targets[i]).sum::<f64>() / wsum;
                }
                mean_of(nearest.iter().map(|&(_, i)| self.targets[i]))
            }
            None => mean_of(nearest.iter().map(|&(_, i)| self.targets[i])),
        }
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    s / c as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_neighbour_interpolates() {
        let rows = vec![0.0, 1.0, 2.0, 5.0];
        let knn = Knn::fit(rows.clone(), 1, &[3.0, -1.0, 4.0, 7.0], None, 1);
        for (i, &r) in rows.iter().enumerate() {
            assert_eq!(knn.predict_one(&[r]), [3.0, -1.0, 4.0, 7.0][i]);
        }
    }

    #[test]
    fn ties_prefer_lower_rows() {
        // query 1.0: row 2 is nearest, rows 0 and 1 tie for second place
        let knn = Knn::fit(vec![0.0, 2.0, 1.5], 1, &[10.0, 20.0, 30.0], None, 2);
        assert_eq!(knn.predict_one(&[1.0]), 20.0);
        let knn = Knn::fit(vec![0.0, 2.0], 1, &[10.0, 20.0], None, 1);
        assert_eq!(knn.predict_one(&[1.0]), 10.0);
    }
}
