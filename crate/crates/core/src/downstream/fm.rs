use log::warn;

use crate::ndcore::dot;

/// Second-order factorization-machine term `Σ_{i<j} e_i·e_j`, computed as
/// `½(‖Σ e‖² − Σ ‖e‖²)`. Fewer than two fields contribute nothing.
pub fn fm_interaction(fields: &[&[f64]]) -> f64 {
    if fields.len() < 2 {
        warn!("fm_interaction called with {} field(s); returning 0", fields.len());
        return 0.0;
    }
    let d = fields[0].len();
    let mut sum = vec![0.0; d];
    let mut sq = 0.0;
    for e in fields {
        debug_assert_eq!(e.len(), d);
        for (s, v) in sum.iter_mut().zip(e.iter()) {
            *s += v;
        }
        sq += dot(e, e);
    }
    0.5 * (dot(&sum, &sum) - sq)
}

/// FM term of one concatenated row of `fields` segments of width `d`, plus
/// the gradient of that term with respect to the row.
pub(crate) fn fm_row(row: &[f64], d: usize, grad: &mut [f64]) -> f64 {
    let fields = row.len() / d;
    if fields < 2 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return 0.0;
    }
    let mut sum = vec![0.0; d];
    let mut sq = 0.0;
    for f in row.chunks_exact(d) {
        for (s, v) in sum.iter_mut().zip(f) {
            *s += v;
        }
        sq += dot(f, f);
    }
    for (g, f) in grad.chunks_exact_mut(d).zip(row.chunks_exact(d)) {
        for ((gv, s), v) in g.iter_mut().zip(&sum).zip(f) {
            *gv = s - v;
        }
    }
    0.5 * (dot(&sum, &sum) - sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn pairwise(fields: &[&[f64]]) -> f64 {
        let mut s = 0.0;
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                s += fields[i].iter().zip(fields[j]).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        s
    }

    #[test]
    fn hand_cases() {
        assert_eq!(fm_interaction(&[&[0.0; 4], &[0.0; 4], &[0.0; 4]]), 0.0);
        assert_eq!(fm_interaction(&[&[1.0, 0.0], &[0.0, 1.0]]), 0.0);
        assert_eq!(fm_interaction(&[&[1.0, 1.0], &[1.0, 1.0]]), 2.0);
        assert_eq!(fm_interaction(&[&[3.0, 1.0]]), 0.0);
        assert_eq!(fm_interaction(&[]), 0.0);
    }

    #[test]
    fn five_random_fields_match_pairwise() {
        let mut rng = seeded(4);
        let f: Vec<Vec<f64>> = (0..5).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = f.iter().map(Vec::as_slice).collect();
        assert!((fm_interaction(&refs) - pairwise(&refs)).abs() < 1e-12);
    }

    #[test]
    fn row_gradient_is_sum_of_other_fields() {
        let row = [1.0, 2.0, 3.0, 4.0, -1.0, 0.5];
        let mut g = [0.0; 6];
        let v = fm_row(&row, 2, &mut g);
        assert_eq!(v, fm_interaction(&[&row[0..2], &row[2..4], &row[4..6]]));
        assert_eq!(g, [2.0, 4.5, 0.0, 2.5, 4.0, 6.0]);
    }

    proptest! {
        #[test]
        fn identity_equals_pairwise(
            data in prop::collection::vec(-3.0f64..3.0, 2 * 4..12 * 4)
        ) {
            let fields: Vec<&[f64]> = data.chunks_exact(4).collect();
            let a = fm_interaction(&fields);
            let b = pairwise(&fields);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{} vs {}", a, b);
        }
    }
}
