//! Dependency distance and crossing measurements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChunkedTree, DepTree, MetricsRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("mean dependency distance is undefined for a single-node sentence")]
    DegenerateSentence,
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two points are needed, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("no values to aggregate")]
    EmptyInput,
}

/// Mean of `|dependent - governor|` over the `n - 1` edges.
pub fn mdd_plain(tree: &DepTree) -> Result<f64, MetricsError> {
    if tree.n() < 2 {
        return Err(MetricsError::DegenerateSentence);
    }
    Ok(tree.total_distance() as f64 / tree.edge_count() as f64)
}

/// Mean dependency distance assembled from chunk terms: for each chunk the
/// sum of its internal distances plus the distance from its head to the
/// external governor (zero for the root chunk).
pub fn mdd_chunked(ct: &ChunkedTree) -> Result<f64, MetricsError> {
    let n = ct.tree.n();
    if n < 2 {
        return Err(MetricsError::DegenerateSentence);
    }
    let mut total = 0u64;
    for (i, span) in ct.partition.spans().iter().enumerate() {
        let internal: u64 = span
            .positions()
            .filter_map(|p| ct.tree.head(p).map(|h| (p, h)))
            .filter(|&(_, h)| span.contains(h))
            .map(|(p, h)| p.abs_diff(h) as u64)
            .sum();
        let link = ct.attach_node[i].map_or(0, |m| m.abs_diff(ct.chunk_heads[i]) as u64);
        total += internal + link;
    }
    Ok(total as f64 / (n - 1) as f64)
}

/// Pairs of arcs with strictly interleaved endpoints, `a < c < b < d`.
///
/// Sweeps arcs by left endpoint and counts, with a Fenwick tree, earlier
/// arcs whose right endpoint falls strictly inside the current arc.
pub fn count_type1(tree: &DepTree) -> u64 {
    let n = tree.n();
    if n < 4 {
        return 0;
    }
    let mut arcs: Vec<(usize, usize)> = tree.arcs().collect();
    arcs.sort_unstable();

    let mut fenwick = vec![0u32; n + 1];
    let prefix = |fw: &[u32], mut i: usize| {
        let mut s = 0u64;
        while i > 0 {
            s += fw[i] as u64;
            i &= i - 1;
        }
        s
    };

    let mut total = 0u64;
    let mut group = 0;
    while group < arcs.len() {
        let lo = arcs[group].0;
        let end = group + arcs[group..].partition_point(|a| a.0 == lo);
        for &(c, d) in &arcs[group..end] {
            // right endpoints b with c < b < d
            total += prefix(&fenwick, d - 1) - prefix(&fenwick, c);
        }
        for &(_, b) in &arcs[group..end] {
            let mut i = b;
            while i <= n {
                fenwick[i] += 1;
                i += i & i.wrapping_neg();
            }
        }
        group = end;
    }
    total
}

/// Quadratic pairwise scan; reference for [`count_type1`].
pub fn count_type1_pairwise(tree: &DepTree) -> u64 {
    let arcs: Vec<(usize, usize)> = tree.arcs().collect();
    let mut total = 0;
    for (i, &(a, b)) in arcs.iter().enumerate() {
        for &(c, d) in &arcs[i + 1..] {
            if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                total += 1;
            }
        }
    }
    total
}

/// Arcs `{i, j}` with `i < root < j`.
pub fn count_type2(tree: &DepTree) -> u64 {
    let root = tree.root();
    tree.arcs()
        .filter(|&(lo, hi)| lo < root && root < hi)
        .count() as u64
}

/// No crossings of either type.
pub fn is_continuous(tree: &DepTree) -> bool {
    count_type2(tree) == 0 && count_type1(tree) == 0
}

/// All per-tree measurements at once.
pub fn measure(tree: &DepTree) -> MetricsRecord {
    let type1 = count_type1(tree);
    let type2 = count_type2(tree);
    MetricsRecord {
        n: tree.n(),
        mdd: mdd_plain(tree).ok(),
        type1,
        type2,
        continuous: type1 == 0 && type2 == 0,
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFewPoints(xs.len()));
    }
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance("xs"));
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance("ys"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Summary statistics over one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`count - 1` denominator, 0 for one value).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let count = values.len();
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / count as f64;
    let sd = if count == 1 {
        0.0
    } else {
        let ss = values
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value();
        (ss / (count - 1) as f64).sqrt()
    };
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok(Aggregate {
        count,
        // Rounding can push a constant series' mean just outside [min, max].
        mean: mean.clamp(min, max),
        sd,
        min,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_chunked_tree, gen_random_tree, ChunkConfig};
    use crate::model::{validate_tree, ChunkPartition, RngStream};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn tree(heads: &[usize]) -> DepTree {
        validate_tree(heads).unwrap()
    }

    #[test]
    fn plain_mdd_examples() {
        assert_eq!(mdd_plain(&tree(&[2, 0, 4, 2])).unwrap(), 4.0 / 3.0);
        assert_eq!(mdd_plain(&tree(&[0, 1, 2, 3])).unwrap(), 1.0);
        assert_eq!(mdd_plain(&tree(&[3, 3, 0, 3, 3])).unwrap(), 1.5);
        assert_eq!(
            mdd_plain(&DepTree::singleton()),
            Err(MetricsError::DegenerateSentence)
        );
    }

    #[test]
    fn chunked_mdd_constructed_example() {
        // chunks (1,2),(3,4); 1 <- 2 is root-internal, 3 -> 4, attach 1 -> 3
        let ct = ChunkedTree {
            tree: tree(&[2, 0, 1, 3]),
            partition: ChunkPartition::from_sizes(&[2, 2], 2, 2).unwrap(),
            chunk_heads: vec![2, 3],
            chunk_parent: vec![None, Some(0)],
            attach_node: vec![None, Some(1)],
        };
        ct.check().unwrap();
        assert_eq!(mdd_chunked(&ct).unwrap(), 4.0 / 3.0);
        assert_eq!(mdd_chunked(&ct).unwrap(), mdd_plain(&ct.tree).unwrap());
    }

    #[test]
    fn chunked_mdd_single_chunk() {
        let t = tree(&[2, 0, 4, 2, 4]);
        let ct = ChunkedTree {
            partition: ChunkPartition::from_sizes(&[5], 1, 5).unwrap(),
            chunk_heads: vec![t.root()],
            chunk_parent: vec![None],
            attach_node: vec![None],
            tree: t,
        };
        assert_eq!(mdd_chunked(&ct).unwrap(), mdd_plain(&ct.tree).unwrap());
    }

    #[test]
    fn crossing_examples() {
        let crossed = tree(&[3, 4, 0, 3]);
        assert_eq!(count_type1(&crossed), 1);
        assert_eq!(count_type2(&crossed), 1);
        assert!(!is_continuous(&crossed));

        assert_eq!(count_type1(&tree(&[0, 1, 2, 3, 4])), 0);
        assert_eq!(count_type1(&tree(&[2, 3, 4, 5, 0])), 0);
        assert_eq!(count_type2(&tree(&[0, 1, 1, 2])), 0);
        assert_eq!(count_type2(&tree(&[2, 0, 1])), 1);
        assert!(is_continuous(&tree(&[2, 0, 4, 2])));
    }

    #[test]
    fn shared_endpoints_never_cross() {
        // star from 1 plus nested arcs
        assert_eq!(count_type1(&tree(&[0, 1, 1, 1, 1])), 0);
        assert_eq!(count_type1(&tree(&[5, 5, 5, 5, 0])), 0);
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(
            pearson(&xs, &[1.0, 1.0, 1.0]),
            Err(MetricsError::ZeroVariance("ys"))
        );
        assert_eq!(
            pearson(&xs, &[1.0]),
            Err(MetricsError::LengthMismatch(3, 1))
        );
        assert_eq!(pearson(&[1.0], &[1.0]), Err(MetricsError::TooFewPoints(1)));
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[5.0]).unwrap();
        assert_eq!((a.mean, a.sd), (5.0, 0.0));
        let a = aggregate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((a.mean, a.sd, a.min, a.max), (2.0, 1.0, 1.0, 3.0));
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn aggregate_standard_normal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a = aggregate(&draws).unwrap();
        assert!(a.mean.abs() < 0.05, "mean {}", a.mean);
        assert!((a.sd - 1.0).abs() < 0.05, "sd {}", a.sd);
    }

    #[test]
    fn small_trees_have_no_crossings() {
        for n in 1..=3 {
            for i in 0..200 {
                let t = gen_random_tree(n, &mut RngStream::new(n as u64, i));
                assert_eq!(count_type1(&t), 0);
                if n <= 2 {
                    assert_eq!(count_type2(&t), 0);
                }
            }
        }
    }

    #[test]
    fn fenwick_matches_pairwise_scan() {
        for i in 0..10_000u64 {
            let mut rng = RngStream::new(2024, i);
            let n = rng.between(1, 60);
            let t = gen_random_tree(n, &mut rng);
            assert_eq!(count_type1(&t), count_type1_pairwise(&t), "tree {t}");
        }
    }

    #[test]
    fn chunked_mdd_equals_plain() {
        for i in 0..10_000u64 {
            let mut rng = RngStream::new(99, i);
            let n = rng.between(2, 100);
            let max = rng.between(1, n);
            let cfg = ChunkConfig::random(rng.between(1, max), max);
            let ct = gen_chunked_tree(n, &cfg, &mut rng).unwrap();
            let diff = (mdd_chunked(&ct).unwrap() - mdd_plain(&ct.tree).unwrap()).abs();
            assert!(diff < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn mirror_preserves_crossings(n in 1usize..40, seed in any::<u64>()) {
            let t = gen_random_tree(n, &mut RngStream::new(seed, 0));
            let m = t.mirrored();
            prop_assert_eq!(count_type1(&t), count_type1(&m));
            prop_assert_eq!(count_type2(&t), count_type2(&m));
        }

        #[test]
        fn pearson_affine_invariant(
            ys in proptest::collection::vec(-100.0f64..100.0, 3..30),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                let moved: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
                let r2 = pearson(&xs, &moved).unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn aggregate_bounds(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let a = aggregate(&values).unwrap();
            prop_assert!(a.sd >= 0.0);
            prop_assert!(a.min <= a.mean && a.mean <= a.max);
        }
    }
}
