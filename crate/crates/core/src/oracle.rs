//! Exhaustive enumeration of small trees, used as ground truth for the
//! generators and metrics.

use thiserror::Error;

use crate::metrics::is_continuous;
use crate::model::{validate_tree, DepTree, Family};

/// Largest enumerable sentence length (`7^7` candidate head vectors).
pub const MAX_ENUM_N: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("n = {0} is outside the enumerable range 1..={MAX_ENUM_N}")]
    TooLarge(usize),
    #[error("family {0} has no enumeration")]
    NotEnumerable(Family),
}

fn check_n(n: usize) -> Result<(), OracleError> {
    if (1..=MAX_ENUM_N).contains(&n) {
        Ok(())
    } else {
        Err(OracleError::TooLarge(n))
    }
}

/// Every rooted labeled tree on `1..=n`, in lexicographic head-vector order.
///
/// Iterates all `n^n` vectors where each position's governor is 0 or
/// another position, keeping those that validate.
pub fn enumerate_rooted_trees(n: usize) -> Result<Vec<DepTree>, OracleError> {
    check_n(n)?;
    // choice c at position p maps to governor: 0 for c == 0, otherwise the
    // c-th position other than p
    let governor = |p: usize, c: usize| match c {
        0 => 0,
        c if c < p => c,
        c => c + 1,
    };
    let mut choice = vec![0usize; n];
    let mut heads = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        for (i, &c) in choice.iter().enumerate() {
            heads[i] = governor(i + 1, c);
        }
        if let Ok(t) = validate_tree(&heads) {
            out.push(t);
        }
        // odometer increment over digits in 0..n
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < n {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// The continuous subset of [`enumerate_rooted_trees`].
pub fn enumerate_projective_trees(n: usize) -> Result<Vec<DepTree>, OracleError> {
    Ok(enumerate_rooted_trees(n)?
        .into_iter()
        .filter(is_continuous)
        .collect())
}

/// Support of a family's generator for small `n`.
pub fn enumerate_family(family: Family, n: usize) -> Result<Vec<DepTree>, OracleError> {
    match family {
        Family::RL1 => enumerate_rooted_trees(n),
        Family::RL2 => enumerate_projective_trees(n),
        other => Err(OracleError::NotEnumerable(other)),
    }
}

/// Uniform average of `metric` over the enumerated family.
pub fn exact_expectation<F>(n: usize, metric: F, family: Family) -> Result<f64, OracleError>
where
    F: Fn(&DepTree) -> f64,
{
    let trees = enumerate_family(family, n)?;
    let total: f64 = trees.iter().map(&metric).sum();
    Ok(total / trees.len() as f64)
}
