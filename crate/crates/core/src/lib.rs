//! Random dependency trees over a linear order, chunked assembly, and the
//! distance and crossing statistics used to compare them with treebanks.
//!
//! Four tree families are generated:
//!
//! | family | construction |
//! |--------|--------------|
//! | RL1 | uniform rooted labeled tree |
//! | RL2 | uniform continuous (projective) tree |
//! | RL3 | chunked tree, crossings allowed |
//! | RL4 | chunked tree without crossings |

pub mod experiments;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod treebank;

pub use generate::{
    count_projective, gen_chunked_projective_tree, gen_chunked_tree, gen_family,
    gen_projective_tree, gen_random_tree, segment_chunks, ChunkConfig, GenerateError,
};
pub use metrics::{
    aggregate, count_type1, count_type2, is_continuous, mdd_chunked, mdd_plain, measure, pearson,
    Aggregate, MetricsError,
};
pub use model::{
    derive_seed, validate_tree, ChunkMode, ChunkPartition, ChunkedTree, DepTree, Family,
    MetricsRecord, RngStream, Span, SweepRow, TreeError,
};
