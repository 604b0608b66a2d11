//! Random tree generators over a fixed linear order of nodes.
//!
//! * [`gen_random_tree`]: uniform over all `n^(n-1)` rooted labeled trees
//!   (Prüfer decoding plus a uniform root).
//! * [`gen_projective_tree`]: uniform over continuous trees, i.e. trees with
//!   no interleaving arcs and no arc spanning the root, by weighted top-down
//!   choices from exact counts.
//! * [`gen_chunked_tree`] / [`gen_chunked_projective_tree`]: segment the
//!   sequence into chunks, grow one subtree per chunk, then join the chunk
//!   heads with `k - 1` inter-chunk edges.

use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::model::{
    validate_tree, ChunkMode, ChunkPartition, ChunkedTree, DepTree, Family, RngStream, Span,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("invalid chunk configuration for n = {n}: min {min}, max {max}")]
    InvalidChunkConfig { n: usize, min: usize, max: usize },
    #[error("family {0} needs a chunk configuration")]
    MissingChunkConfig(Family),
    #[error("no crossing-free attachment found after {0} attempts")]
    RetryExhausted(usize),
    #[error("sentence length must be at least 1")]
    EmptySentence,
}

/// Whole-tree resampling budget for the continuous chunked generator.
pub const MAX_RETRIES: usize = 1000;

/// Chunk size bounds and how sizes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChunkConfig {
    pub min_size: usize,
    pub max_size: usize,
    pub mode: ChunkMode,
}

impl ChunkConfig {
    /// Sizes drawn uniformly from `[min, max]` for every chunk.
    pub fn random(min_size: usize, max_size: usize) -> Self {
        ChunkConfig {
            min_size,
            max_size,
            mode: ChunkMode::RandomMax,
        }
    }

    /// Every chunk has exactly `size` nodes, except possibly the last.
    pub fn fixed(size: usize) -> Self {
        ChunkConfig {
            min_size: size,
            max_size: size,
            mode: ChunkMode::Fixed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), GenerateError> {
        let ok = 1 <= self.min_size
            && self.min_size <= self.max_size
            && self.max_size <= n
            && self.mode != ChunkMode::None
            && (self.mode != ChunkMode::Fixed || self.min_size == self.max_size);
        if ok {
            Ok(())
        } else {
            Err(GenerateError::InvalidChunkConfig {
                n,
                min: self.min_size,
                max: self.max_size,
            })
        }
    }
}

/// Decodes a Prüfer sequence over labels `0..k` into `k - 1` undirected edges.
fn prufer_edges(sequence: &[usize], k: usize) -> Vec<(usize, usize)> {
    debug_assert_eq!(sequence.len() + 2, k);
    let mut degree = vec![1usize; k];
    for &v in sequence {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(k - 1);
    let mut ptr = degree.iter().position(|&d| d == 1).unwrap();
    let mut leaf = ptr;
    for &v in sequence {
        edges.push((leaf, v));
        degree[v] -= 1;
        if degree[v] == 1 && v < ptr {
            leaf = v;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf, k - 1));
    edges
}

/// Uniform labeled tree on `0..k` oriented away from `root`.
/// Returns `parent[v]`, `None` at the root.
fn uniform_tree_parents(k: usize, root: usize, rng: &mut RngStream) -> Vec<Option<usize>> {
    let mut parent = vec![None; k];
    if k < 2 {
        return parent;
    }
    let sequence: Vec<usize> = (0..k - 2).map(|_| rng.below(k)).collect();
    let edges = prufer_edges(&sequence, k);

    let mut adj = vec![Vec::new(); k];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; k];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                stack.push(w);
            }
        }
    }
    parent
}

/// Uniform rooted labeled tree on positions `1..=n`.
pub fn gen_random_tree(n: usize, rng: &mut RngStream) -> DepTree {
    assert!(n >= 1, "gen_random_tree needs n >= 1");
    let heads = random_heads(n, rng);
    validate_tree(&heads).expect("random tree generator produced an invalid tree")
}

/// Local (1-based, 0 = root) head vector of a uniform rooted tree.
fn random_heads(n: usize, rng: &mut RngStream) -> Vec<usize> {
    if n == 1 {
        return vec![0];
    }
    // Draw the tree first, then the root: the pair is uniform either way.
    let sequence: Vec<usize> = (0..n - 2).map(|_| rng.below(n)).collect();
    let root = rng.below(n);
    let edges = prufer_edges(&sequence, n);
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut heads = vec![0usize; n];
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                heads[w] = v + 1;
                stack.push(w);
            }
        }
    }
    heads
}

/// Exact counts of continuous trees over ordered spans, with cumulative
/// weight tables for sampling.
///
/// `attachable[l]` is the number of trees on `l` ordered nodes with no
/// crossing arcs and no arc spanning the head; `ways[s]` counts ordered
/// sequences of such subtrees covering `s` nodes.
#[derive(Debug)]
pub struct ProjectiveTables {
    attachable: Vec<BigUint>,
    ways: Vec<BigUint>,
    /// `head_cum[l][h - 1] = sum_{h' <= h} ways(h' - 1) * ways(l - h')`.
    head_cum: Vec<Vec<BigUint>>,
    /// `part_cum[s][j - 1] = sum_{j' <= j} attachable(j') * ways(s - j')`.
    part_cum: Vec<Vec<BigUint>>,
}

impl ProjectiveTables {
    pub fn new(max_len: usize) -> Self {
        let mut attachable = vec![BigUint::one()];
        let mut ways = vec![BigUint::one()];
        let mut head_cum = vec![Vec::new()];
        let mut part_cum = vec![Vec::new()];
        for l in 1..=max_len {
            let mut acc = BigUint::default();
            let mut cum = Vec::with_capacity(l);
            for h in 1..=l {
                acc += &ways[h - 1] * &ways[l - h];
                cum.push(acc.clone());
            }
            attachable.push(acc);
            head_cum.push(cum);

            let mut acc = BigUint::default();
            let mut cum = Vec::with_capacity(l);
            for j in 1..=l {
                acc += &attachable[j] * &ways[l - j];
                cum.push(acc.clone());
            }
            ways.push(acc);
            part_cum.push(cum);
        }
        ProjectiveTables {
            attachable,
            ways,
            head_cum,
            part_cum,
        }
    }

    pub fn max_len(&self) -> usize {
        self.attachable.len() - 1
    }

    pub fn attachable(&self, len: usize) -> &BigUint {
        &self.attachable[len]
    }

    pub fn ways(&self, len: usize) -> &BigUint {
        &self.ways[len]
    }

    /// Samples a continuous tree over `start..start + len`, attaching its head
    /// to `governor` (0 for the sentence root).
    fn sample_span(
        &self,
        start: usize,
        len: usize,
        governor: usize,
        heads: &mut [usize],
        rng: &mut RngStream,
    ) {
        let h = weighted_index(&self.head_cum[len], rng) + 1;
        self.sample_around(start, len, h, governor, heads, rng);
    }

    /// Like `sample_span` with the head fixed at offset `h` (1-based).
    fn sample_around(
        &self,
        start: usize,
        len: usize,
        h: usize,
        governor: usize,
        heads: &mut [usize],
        rng: &mut RngStream,
    ) {
        let head = start + h - 1;
        heads[head - 1] = governor;
        self.sample_dependents(start, h - 1, head, heads, rng);
        self.sample_dependents(head + 1, len - h, head, heads, rng);
    }

    /// Fills `start..start + len` with consecutive attachable subtrees whose
    /// heads all attach to `governor`.
    fn sample_dependents(
        &self,
        mut start: usize,
        mut len: usize,
        governor: usize,
        heads: &mut [usize],
        rng: &mut RngStream,
    ) {
        while len > 0 {
            let part = weighted_index(&self.part_cum[len], rng) + 1;
            self.sample_span(start, part, governor, heads, rng);
            start += part;
            len -= part;
        }
    }
}

/// Index `i` drawn with probability `(cum[i] - cum[i - 1]) / cum.last()`.
fn weighted_index(cum: &[BigUint], rng: &mut RngStream) -> usize {
    let total = cum.last().expect("empty weight table");
    let r = rng.below_big(total);
    cum.partition_point(|c| c <= &r)
}

static TABLES: OnceLock<RwLock<Arc<ProjectiveTables>>> = OnceLock::new();

/// Shared tables covering spans up to at least `len`.
pub fn projective_tables(len: usize) -> Arc<ProjectiveTables> {
    let lock = TABLES.get_or_init(|| RwLock::new(Arc::new(ProjectiveTables::new(128))));
    {
        let current = lock.read().unwrap();
        if current.max_len() >= len {
            return Arc::clone(&current);
        }
    }
    let mut current = lock.write().unwrap();
    if current.max_len() < len {
        *current = Arc::new(ProjectiveTables::new(len.max(2 * current.max_len())));
    }
    Arc::clone(&current)
}

/// Number of continuous trees on `len` ordered nodes (`1` for `len = 0`).
pub fn count_projective(len: usize) -> BigUint {
    projective_tables(len).attachable(len).clone()
}

/// Uniform continuous tree on positions `1..=n`.
pub fn gen_projective_tree(n: usize, rng: &mut RngStream) -> DepTree {
    assert!(n >= 1, "gen_projective_tree needs n >= 1");
    let tables = projective_tables(n);
    let mut heads = vec![0usize; n];
    tables.sample_span(1, n, 0, &mut heads, rng);
    validate_tree(&heads).expect("projective generator produced an invalid tree")
}

/// Continuous tree on `1..=len` conditioned on its root being `root`.
fn projective_heads_rooted(len: usize, root: usize, rng: &mut RngStream) -> Vec<usize> {
    let tables = projective_tables(len);
    let mut heads = vec![0usize; len];
    tables.sample_around(1, len, root, 0, &mut heads, rng);
    heads
}

/// Left-to-right chunk segmentation of `1..=n`.
///
/// When the remaining tail is shorter than the drawn size the last chunk
/// takes the whole tail, even below `min_size`.
pub fn segment_chunks(
    n: usize,
    cfg: &ChunkConfig,
    rng: &mut RngStream,
) -> Result<ChunkPartition, GenerateError> {
    cfg.validate(n)?;
    let mut sizes = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let drawn = match cfg.mode {
            ChunkMode::Fixed => cfg.max_size,
            _ => rng.between(cfg.min_size, cfg.max_size),
        };
        let size = drawn.min(remaining);
        sizes.push(size);
        remaining -= size;
    }
    Ok(
        ChunkPartition::from_sizes(&sizes, cfg.min_size, cfg.max_size)
            .expect("segmentation violated its own bounds"),
    )
}

/// Per-chunk subtrees written into `heads` (local roots set to 0).
/// Returns the head position of each chunk.
fn grow_chunks(
    partition: &ChunkPartition,
    heads: &mut [usize],
    projective: bool,
    rng: &mut RngStream,
) -> Vec<usize> {
    let mut chunk_heads = Vec::with_capacity(partition.len());
    for span in partition.spans() {
        let len = span.len();
        let local = if projective {
            let tables = projective_tables(len);
            let mut local = vec![0usize; len];
            tables.sample_span(1, len, 0, &mut local, rng);
            local
        } else {
            random_heads(len, rng)
        };
        let offset = span.start - 1;
        let mut head = 0;
        for (i, &h) in local.iter().enumerate() {
            if h == 0 {
                head = span.start + i;
            } else {
                heads[offset + i] = offset + h;
            }
        }
        heads[head - 1] = 0;
        chunk_heads.push(head);
    }
    chunk_heads
}

/// Chunked random tree with crossings allowed.
pub fn gen_chunked_tree(
    n: usize,
    cfg: &ChunkConfig,
    rng: &mut RngStream,
) -> Result<ChunkedTree, GenerateError> {
    let partition = segment_chunks(n, cfg, rng)?;
    let k = partition.len();
    let mut heads = vec![0usize; n];
    let chunk_heads = grow_chunks(&partition, &mut heads, false, rng);
    let root_chunk = rng.below(k);

    let chunk_parent = uniform_tree_parents(k, root_chunk, rng);
    let spans = partition.spans();
    let mut attach_node = vec![None; k];
    for j in 0..k {
        if let Some(i) = chunk_parent[j] {
            let m = rng.between(spans[i].start, spans[i].end);
            attach_node[j] = Some(m);
            heads[chunk_heads[j] - 1] = m;
        }
    }

    let tree = validate_tree(&heads).expect("chunked generator produced an invalid tree");
    let ct = ChunkedTree {
        tree,
        partition,
        chunk_heads,
        chunk_parent,
        attach_node,
    };
    debug_assert_eq!(ct.check(), Ok(()));
    Ok(ct)
}

fn arcs_cross((a, b): (usize, usize), (c, d): (usize, usize)) -> bool {
    (a < c && c < b && b < d) || (c < a && a < d && d < b)
}

/// Chunked tree with no crossings of either type.
///
/// Chunk subtrees are continuous, the chunk-level tree is continuous over
/// chunk order and rooted at a uniformly chosen chunk, and each attachment
/// node is drawn uniformly from the positions whose new edge crosses no
/// edge placed so far and does not span the sentence root.
pub fn gen_chunked_projective_tree(
    n: usize,
    cfg: &ChunkConfig,
    rng: &mut RngStream,
) -> Result<ChunkedTree, GenerateError> {
    cfg.validate(n)?;
    for _ in 0..MAX_RETRIES {
        if let Some(ct) = try_chunked_projective(n, cfg, rng)? {
            return Ok(ct);
        }
    }
    Err(GenerateError::RetryExhausted(MAX_RETRIES))
}

fn try_chunked_projective(
    n: usize,
    cfg: &ChunkConfig,
    rng: &mut RngStream,
) -> Result<Option<ChunkedTree>, GenerateError> {
    let partition = segment_chunks(n, cfg, rng)?;
    let k = partition.len();
    let mut heads = vec![0usize; n];
    let chunk_heads = grow_chunks(&partition, &mut heads, true, rng);
    let root_chunk = rng.below(k);
    let root = chunk_heads[root_chunk];

    let chunk_heads_local = projective_heads_rooted(k, root_chunk + 1, rng);
    let chunk_parent: Vec<Option<usize>> = chunk_heads_local
        .iter()
        .map(|&h| (h != 0).then(|| h - 1))
        .collect();

    let mut children = vec![Vec::new(); k];
    for (j, p) in chunk_parent.iter().enumerate() {
        if let Some(i) = *p {
            children[i].push(j);
        }
    }

    let mut arcs: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .filter(|(_, &h)| h != 0)
        .map(|(i, &h)| ((i + 1).min(h), (i + 1).max(h)))
        .collect();
    let spans: &[Span] = partition.spans();
    let mut attach_node = vec![None; k];
    let mut queue = std::collections::VecDeque::from([root_chunk]);
    let mut candidates = Vec::new();
    while let Some(i) = queue.pop_front() {
        for &j in &children[i] {
            let target = chunk_heads[j];
            candidates.clear();
            for m in spans[i].positions() {
                let arc = (m.min(target), m.max(target));
                let spans_root = arc.0 < root && root < arc.1;
                if !spans_root && !arcs.iter().any(|&e| arcs_cross(e, arc)) {
                    candidates.push(m);
                }
            }
            if candidates.is_empty() {
                return Ok(None);
            }
            let m = candidates[rng.below(candidates.len())];
            attach_node[j] = Some(m);
            heads[target - 1] = m;
            arcs.push((m.min(target), m.max(target)));
            queue.push_back(j);
        }
    }

    let tree = validate_tree(&heads).expect("chunked generator produced an invalid tree");
    let ct = ChunkedTree {
        tree,
        partition,
        chunk_heads,
        chunk_parent,
        attach_node,
    };
    debug_assert_eq!(ct.check(), Ok(()));
    Ok(Some(ct))
}

/// Draws one tree of the given family.
pub fn gen_family(
    family: Family,
    n: usize,
    cfg: Option<&ChunkConfig>,
    rng: &mut RngStream,
) -> Result<DepTree, GenerateError> {
    if n == 0 {
        return Err(GenerateError::EmptySentence);
    }
    match family {
        Family::RL1 => Ok(gen_random_tree(n, rng)),
        Family::RL2 => Ok(gen_projective_tree(n, rng)),
        Family::RL3 => {
            let cfg = cfg.ok_or(GenerateError::MissingChunkConfig(family))?;
            gen_chunked_tree(n, cfg, rng).map(|ct| ct.tree)
        }
        Family::RL4 => {
            let cfg = cfg.ok_or(GenerateError::MissingChunkConfig(family))?;
            gen_chunked_projective_tree(n, cfg, rng).map(|ct| ct.tree)
        }
    }
}
