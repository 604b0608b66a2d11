//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line per
//! criterion and then asserts it.
//!
//! Run with `cargo test -p deplin --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use deplin::experiments::{
    correlation_by_family, optimal_chunk_curve, run_cell, sweep_chunks, sweep_crossings,
    sweep_lengths, write_csv, Cell, ExperimentConfig,
};
use deplin::oracle::{enumerate_projective_trees, enumerate_rooted_trees};
use deplin::{
    count_projective, count_type1, count_type2, gen_chunked_projective_tree, gen_chunked_tree,
    gen_projective_tree, gen_random_tree, mdd_chunked, mdd_plain, pearson, ChunkConfig, ChunkMode,
    DepTree, Family, RngStream, SweepRow,
};
use num_bigint::BigUint;

const SEED: u64 = 20_170_101;
const REPS: usize = 5000;

fn report(id: &str, what: &str, ok: bool) -> bool {
    println!(
        "{} criterion {id}: {what}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn cfg() -> ExperimentConfig {
    ExperimentConfig::with_seed(SEED)
}

#[test]
fn criterion_1_unchunked_baseline() {
    let start = Instant::now();
    let row = run_cell(&Cell::plain(Family::RL1, 23), SEED, REPS).unwrap();
    let elapsed = start.elapsed();

    let ok = [
        report(
            "1a",
            &format!("RL1 n=23 mean type-I {:.3} in [62, 72]", row.mean_type1),
            in_range(row.mean_type1, 62.0, 72.0),
        ),
        report(
            "1b",
            &format!("RL1 n=23 mean type-II {:.3} in [30, 40]", row.mean_type2),
            in_range(row.mean_type2, 30.0, 40.0),
        ),
        report(
            "1c",
            &format!("RL1 n=23 mean MDD {:.4} = 8.0 +/- 0.15", row.mean_mdd),
            (row.mean_mdd - 8.0).abs() <= 0.15,
        ),
        report(
            "1d",
            &format!("RL1 n=23 runtime {elapsed:?} < 10 s"),
            elapsed < Duration::from_secs(10),
        ),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_2_chunked_full_interval() {
    let cell = Cell::chunked(Family::RL3, 23, ChunkConfig::random(1, 23));
    let row = run_cell(&cell, SEED, REPS).unwrap();
    let ok = [
        report(
            "2a",
            &format!(
                "RL3 [1,23] n=23 mean type-I {:.3} in [33, 43]",
                row.mean_type1
            ),
            in_range(row.mean_type1, 33.0, 43.0),
        ),
        report(
            "2b",
            &format!(
                "RL3 [1,23] n=23 mean type-II {:.3} in [18, 26]",
                row.mean_type2
            ),
            in_range(row.mean_type2, 18.0, 26.0),
        ),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_3_crossing_sweep_minimum() {
    let sizes: Vec<usize> = (1..=23).collect();
    let rows = sweep_crossings(&cfg(), 23, &sizes).unwrap();
    let chunked: Vec<&SweepRow> = rows.iter().filter(|r| r.family == Family::RL3).collect();
    for r in &chunked {
        println!(
            "  max size {:>2}: type-I {:7.3} type-II {:7.3} MDD {:.3}",
            r.chunk_param.unwrap(),
            r.mean_type1,
            r.mean_type2,
            r.mean_mdd
        );
    }
    let best = chunked
        .iter()
        .min_by(|a, b| a.mean_type1.total_cmp(&b.mean_type1))
        .unwrap();
    let size = best.chunk_param.unwrap();
    let ok = [
        report(
            "3a",
            &format!("type-I argmin max size {size} in {{4, 5, 6}}"),
            (4..=6).contains(&size),
        ),
        report(
            "3b",
            &format!("type-I minimum {:.3} in [9.7, 14.7]", best.mean_type1),
            in_range(best.mean_type1, 9.7, 14.7),
        ),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_4_mdd_targets() {
    let rl2 = run_cell(&Cell::plain(Family::RL2, 23), SEED, REPS).unwrap();
    let sizes: Vec<usize> = (1..=23).collect();
    let grid = sweep_chunks(&cfg(), ChunkMode::RandomMax, &[23], &sizes).unwrap();
    let best = optimal_chunk_curve(&grid, &[23]).unwrap();
    let ok = [
        report(
            "4a",
            &format!("RL2 n=23 mean MDD {:.4} in [3.4, 4.3]", rl2.mean_mdd),
            in_range(rl2.mean_mdd, 3.4, 4.3),
        ),
        report(
            "4b",
            &format!(
                "RL3 random-max optimum at n=23: MDD {:.4} (max size {}) in [4.8, 5.9]",
                best[0].mean_mdd,
                best[0].chunk_param.unwrap()
            ),
            in_range(best[0].mean_mdd, 4.8, 5.9),
        ),
    ];
    assert!(ok.iter().all(|&b| b));
}

#[test]
fn criterion_5_chunk_size_optima() {
    let lengths = [2, 4, 8, 16, 32, 64];
    let sizes: Vec<usize> = (1..=64).collect();
    let expected = [
        (ChunkMode::RandomMax, [1, 3, 5, 6, 10, 14]),
        (ChunkMode::Fixed, [1, 2, 3, 4, 7, 8]),
    ];
    let mut all_ok = true;
    for (mode, targets) in expected {
        let grid = sweep_chunks(&cfg(), mode, &lengths, &sizes).unwrap();
        let best = optimal_chunk_curve(&grid, &lengths).unwrap();
        for (row, &target) in best.iter().zip(&targets) {
            let size = row.chunk_param.unwrap();
            all_ok &= report(
                "5",
                &format!(
                    "{mode} SL{}: argmin size {size} (MDD {:.3}) within 2 of {target}",
                    row.n, row.mean_mdd
                ),
                size.abs_diff(target) <= 2,
            );
        }
    }
    assert!(all_ok);
}

fn tv_distance(counts: &HashMap<DepTree, usize>, support: &[DepTree], samples: usize) -> f64 {
    let p = 1.0 / support.len() as f64;
    let inside: f64 = support
        .iter()
        .map(|t| (counts.get(t).copied().unwrap_or(0) as f64 / samples as f64 - p).abs())
        .sum();
    let outside: usize = counts
        .iter()
        .filter(|(t, _)| !support.contains(t))
        .map(|(_, &c)| c)
        .sum();
    0.5 * (inside + outside as f64 / samples as f64)
}

#[test]
fn criterion_6_exactness() {
    let mut all_ok = true;

    let mut worst = 0.0f64;
    for i in 0..10_000u64 {
        let mut rng = RngStream::new(SEED, i);
        let n = rng.between(2, 100);
        let max = rng.between(1, n);
        let cfg = if rng.below(2) == 0 {
            ChunkConfig::random(rng.between(1, max), max)
        } else {
            ChunkConfig::fixed(max)
        };
        let ct = gen_chunked_tree(n, &cfg, &mut rng).unwrap();
        worst = worst.max((mdd_chunked(&ct).unwrap() - mdd_plain(&ct.tree).unwrap()).abs());
    }
    all_ok &= report(
        "6a",
        &format!("chunked vs plain MDD max deviation {worst:e} < 1e-12 over 10^4 chunked trees"),
        worst < 1e-12,
    );

    let mut counts_ok = count_projective(3) == BigUint::from(7u32);
    for n in 1..=6 {
        counts_ok &=
            BigUint::from(enumerate_projective_trees(n).unwrap().len()) == count_projective(n);
    }
    all_ok &= report(
        "6b",
        "enumerated continuous trees match the counting recurrence for n <= 6 (n=3 gives 7)",
        counts_ok,
    );

    let samples = 100_000;
    for n in 2..=4 {
        for (family, support) in [
            (Family::RL1, enumerate_rooted_trees(n).unwrap()),
            (Family::RL2, enumerate_projective_trees(n).unwrap()),
        ] {
            let mut counts = HashMap::new();
            for i in 0..samples as u64 {
                let mut rng = RngStream::new(SEED + n as u64, i);
                let t = match family {
                    Family::RL1 => gen_random_tree(n, &mut rng),
                    _ => gen_projective_tree(n, &mut rng),
                };
                *counts.entry(t).or_insert(0) += 1;
            }
            let tv = tv_distance(&counts, &support, samples);
            all_ok &= report(
                "6c",
                &format!("{family} n={n} TV distance to uniform {tv:.4} < 0.02"),
                tv < 0.02,
            );
        }
    }

    let mut crossings = 0u64;
    for i in 0..100_000u64 {
        let mut rng = RngStream::new(SEED ^ 0xABCD, i);
        let n = rng.between(1, 50);
        let tree = if i % 2 == 0 {
            gen_projective_tree(n, &mut rng)
        } else {
            let max = rng.between(1, n);
            let cfg = ChunkConfig::random(rng.between(1, max), max);
            gen_chunked_projective_tree(n, &cfg, &mut rng).unwrap().tree
        };
        crossings += count_type1(&tree) + count_type2(&tree);
    }
    all_ok &= report(
        "6d",
        &format!("{crossings} crossings over 10^5 RL2/RL4 trees with n <= 50"),
        crossings == 0,
    );
    assert!(all_ok);
}

#[test]
fn criterion_7_correlation() {
    let rows = sweep_lengths(&cfg()).unwrap();
    let mut all_ok = true;
    let by_family: BTreeMap<Family, f64> =
        correlation_by_family(&rows).unwrap().into_iter().collect();
    for family in Family::ALL {
        let r = by_family[&family];
        all_ok &= report(
            "7a",
            &format!("{family} Pearson(mean MDD, n) over 2..100 = {r:.5} > 0.99"),
            r > 0.99,
        );
    }
    for n in [10, 23, 50, 100] {
        let at = |f: Family| {
            rows.iter()
                .find(|r| r.family == f && r.n == n)
                .unwrap()
                .mean_mdd
        };
        println!(
            "  n={n:>3}: RL1 {:.3} RL2 {:.3} RL3 {:.3} RL4 {:.3}",
            at(Family::RL1),
            at(Family::RL2),
            at(Family::RL3),
            at(Family::RL4)
        );
    }

    let xs = [1.0, 2.0, 3.0];
    let exact = (pearson(&xs, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12
        && (pearson(&xs, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12
        && (pearson(&xs, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12;
    all_ok &= report("7b", "pearson unit examples exact to 1e-12", exact);
    assert!(all_ok);
}

fn csv_bytes(rows: &[SweepRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    buf
}

#[test]
fn criterion_8_determinism_across_jobs() {
    let sizes: Vec<usize> = (1..=23).collect();
    let mut one = cfg();
    one.jobs = Some(1);
    let mut many = cfg();
    many.jobs = Some(4);

    let a = csv_bytes(&sweep_crossings(&one, 23, &sizes).unwrap());
    let b = csv_bytes(&sweep_crossings(&many, 23, &sizes).unwrap());
    let crossings_ok = report(
        "8a",
        "crossing sweep CSV byte-identical with 1 and 4 workers",
        a == b,
    );

    one.lengths = (2..=30).collect();
    many.lengths = one.lengths.clone();
    one.replicates = 500;
    many.replicates = 500;
    let a = csv_bytes(&sweep_lengths(&one).unwrap());
    let b = csv_bytes(&sweep_lengths(&many).unwrap());
    let lengths_ok = report(
        "8b",
        "length sweep CSV byte-identical with 1 and 4 workers",
        a == b,
    );
    assert!(crossings_ok && lengths_ok);
}
