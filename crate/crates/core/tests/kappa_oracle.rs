//! Fleiss' kappa against an exact rational evaluation of the textbook formula.

use moodkappa::{fleiss_kappa, AnnotationMatrix, Label};
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i64>;

/// Per-item evaluation in exact arithmetic; `None` for the 0/0 case.
fn oracle(rows: &[Vec<u16>], categories: usize) -> Option<Q> {
    let n = rows.len() as i64;
    let items = rows[0].len();
    let mut p_bar = Q::from_integer(0);
    let mut col = vec![0i64; categories];
    for i in 0..items {
        let mut counts = vec![0i64; categories];
        for r in rows {
            counts[r[i] as usize] += 1;
        }
        let sq: i64 = counts.iter().map(|c| c * c).sum();
        p_bar += Q::new(sq - n, n * (n - 1));
        for (j, c) in counts.iter().enumerate() {
            col[j] += c;
        }
    }
    p_bar /= Q::from_integer(items as i64);
    let total = n * items as i64;
    let p_e: Q = col.iter().map(|&c| Q::new(c, total) * Q::new(c, total)).sum();
    if p_e == Q::from_integer(1) {
        return None;
    }
    Some((p_bar - p_e) / (Q::from_integer(1) - p_e))
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn matrix(rows: &[Vec<u16>], categories: usize) -> AnnotationMatrix {
    let raters = (0..rows.len()).map(|r| format!("p{r}")).collect();
    let items = (0..rows[0].len()).map(|i| format!("s{i}")).collect();
    let cats = (0..categories).map(|c| format!("c{c}")).collect();
    let labels = rows.iter().map(|r| r.iter().map(|&l| Label(l)).collect()).collect();
    AnnotationMatrix::new(raters, items, cats, labels).unwrap()
}

fn small_matrix() -> impl Strategy<Value = (Vec<Vec<u16>>, usize)> {
    (2usize..=4, 1usize..=4, 2usize..=3).prop_flat_map(|(n, items, k)| {
        (
            proptest::collection::vec(proptest::collection::vec(0..k as u16, items), n),
            Just(k),
        )
    })
}

fn check(rows: &[Vec<u16>], k: usize) {
    let got = fleiss_kappa(&matrix(rows, k));
    match oracle(rows, k) {
        Some(q) => {
            assert!(!got.degenerate);
            assert!((got.kappa - to_f64(q)).abs() < 1e-12, "{rows:?}: {} vs {}", got.kappa, to_f64(q));
        }
        None => {
            assert!(got.degenerate);
            assert_eq!(got.kappa, 1.0);
        }
    }
}

#[test]
fn hand_case_two_by_two() {
    let rows = vec![vec![0, 0], vec![0, 1]];
    assert_eq!(oracle(&rows, 2), Some(Q::new(-1, 3)));
    check(&rows, 2);
}

#[test]
fn exhaustive_two_raters_two_items_three_categories() {
    for code in 0..81u32 {
        let d = |p: u32| (code / 3u32.pow(p) % 3) as u16;
        check(&[vec![d(0), d(1)], vec![d(2), d(3)]], 3);
    }
}

#[test]
fn one_thousand_seeded_matrices() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.random_range(2..=4);
        let items = rng.random_range(1..=4);
        let k = rng.random_range(2..=3);
        let rows: Vec<Vec<u16>> = (0..n)
            .map(|_| (0..items).map(|_| rng.random_range(0..k as u16)).collect())
            .collect();
        check(&rows, k);
    }
}

proptest! {
    #[test]
    fn matches_oracle((rows, k) in small_matrix()) {
        check(&rows, k);
    }

    #[test]
    fn at_most_one_and_one_iff_unanimous((rows, k) in small_matrix()) {
        let got = fleiss_kappa(&matrix(&rows, k));
        let unanimous = (0..rows[0].len()).all(|i| rows.iter().all(|r| r[i] == rows[0][i]));
        prop_assert!(got.kappa <= 1.0 + 1e-15);
        prop_assert_eq!(got.kappa == 1.0, unanimous);
    }

    #[test]
    fn permutation_invariance(
        (rows, k) in small_matrix(),
        rater_seed in any::<u64>(),
        item_seed in any::<u64>(),
        relabel in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let base = fleiss_kappa(&matrix(&rows, k)).kappa;

        let mut r_order: Vec<usize> = (0..rows.len()).collect();
        r_order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(rater_seed));
        let mut i_order: Vec<usize> = (0..rows[0].len()).collect();
        i_order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(item_seed));
        let mut cat_map: Vec<u16> = (0..k as u16).collect();
        cat_map.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(relabel));

        let permuted: Vec<Vec<u16>> = r_order
            .iter()
            .map(|&r| i_order.iter().map(|&i| cat_map[rows[r][i] as usize]).collect())
            .collect();
        let got = fleiss_kappa(&matrix(&permuted, k)).kappa;
        prop_assert!((got - base).abs() < 1e-12);
    }

    #[test]
    fn duplicated_item_follows_formula((rows, k) in small_matrix(), which in 0usize..4) {
        let which = which % rows[0].len();
        let dup: Vec<Vec<u16>> = rows.iter().map(|r| {
            let mut r = r.clone();
            r.push(r[which]);
            r
        }).collect();
        check(&dup, k);
    }
}
