use deplin::oracle::exact_expectation;
use deplin::{
    aggregate, count_type1, count_type2, gen_family, mdd_plain, DepTree, Family, RngStream,
};

const DRAWS: u64 = 20_000;

fn check(family: Family, n: usize, name: &str, metric: fn(&DepTree) -> f64) {
    let exact = exact_expectation(n, metric, family).unwrap();
    let values: Vec<f64> = (0..DRAWS)
        .map(|i| {
            let mut rng = RngStream::new(0xC0FFEE + n as u64, i);
            metric(&gen_family(family, n, None, &mut rng).unwrap())
        })
        .collect();
    let agg = aggregate(&values).unwrap();
    let se = agg.sd / (DRAWS as f64).sqrt();
    let tol = (3.0 * se).max(1e-9);
    assert!(
        (agg.mean - exact).abs() <= tol,
        "{family} n={n} {name}: sampled {} vs exact {exact} (tol {tol})",
        agg.mean
    );
}

fn mdd(t: &DepTree) -> f64 {
    mdd_plain(t).unwrap()
}

fn type1(t: &DepTree) -> f64 {
    count_type1(t) as f64
}

fn type2(t: &DepTree) -> f64 {
    count_type2(t) as f64
}

#[test]
fn sampled_means_match_enumeration() {
    for family in [Family::RL1, Family::RL2] {
        for n in 2..=5 {
            check(family, n, "mdd", mdd);
            check(family, n, "type1", type1);
            check(family, n, "type2", type2);
        }
    }
}
