//! Pair partitions, their graphs, and signed edge labellings.
//!
//! Positions are 0-based internally. The `Display` impl prints the usual
//! 1-based block notation, e.g. `{{1,4},{2,5},{3,6}}`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest ground set enumerated exhaustively; `|P₂(16)| = 2,027,025`.
pub const ENUMERATION_CAP: usize = 16;

/// Largest edge count accepted by [`brute_force_labellings`].
pub const BRUTE_FORCE_EDGE_CAP: usize = 20;

/// A partition of `{0, …, m-1}` into blocks of size two, blocks sorted by
/// their smaller element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairPartition {
    blocks: Vec<(usize, usize)>,
}

impl PairPartition {
    /// Validate and canonicalize a list of 0-based blocks.
    pub fn new(m: usize, blocks: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut blocks: Vec<(usize, usize)> = blocks
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        blocks.sort_unstable();
        let mut seen = vec![false; m];
        for &(a, b) in &blocks {
            if a == b || b >= m || seen[a] || seen[b] {
                return Err(Error::shape(format!(
                    "blocks do not form a pair partition of [{m}]"
                )));
            }
            seen[a] = true;
            seen[b] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::shape(format!("blocks do not cover [{m}]")));
        }
        Ok(PairPartition { blocks })
    }

    /// Same as [`PairPartition::new`] but with 1-based positions.
    pub fn from_one_based(m: usize, blocks: &[(usize, usize)]) -> Result<Self> {
        if blocks.iter().any(|&(a, b)| a == 0 || b == 0) {
            return Err(Error::shape("1-based positions start at 1"));
        }
        Self::new(m, blocks.iter().map(|&(a, b)| (a - 1, b - 1)))
    }

    /// Size of the ground set.
    pub fn m(&self) -> usize {
        2 * self.blocks.len()
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// The map `position -> block index` under the canonical block order.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.m()];
        for (i, &(a, b)) in self.blocks.iter().enumerate() {
            labels[a] = i;
            labels[b] = i;
        }
        labels
    }

    /// Build from a sequence of partner choices: choice `t` pairs the smallest
    /// unpaired position with the `(1 + choice)`-th remaining one.
    fn from_choices(m: usize, choices: &[usize]) -> Self {
        let mut remaining: Vec<usize> = (0..m).collect();
        let mut blocks = Vec::with_capacity(m / 2);
        for &c in choices {
            let first = remaining.remove(0);
            let partner = remaining.remove(c);
            blocks.push((first, partner));
        }
        PairPartition { blocks }
    }
}

impl fmt::Display for PairPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, b)) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{{{},{}}}", a + 1, b + 1)?;
        }
        f.write_str("}")
    }
}

/// `|P₂(m)| = m! / (2^{m/2} (m/2)!) = (m-1)!!`, zero for odd `m`.
pub fn pair_partition_count(m: usize) -> u128 {
    if m % 2 == 1 {
        return 0;
    }
    (1..m as u128).step_by(2).product()
}

/// Iterator over `P₂(m)` in depth-first order: the smallest unpaired
/// position is matched with each larger candidate in turn.
#[derive(Debug, Clone)]
pub struct PairPartitions {
    m: usize,
    /// `choices[t] < m - 2t - 1`; `None` once exhausted.
    choices: Option<Vec<usize>>,
}

impl Iterator for PairPartitions {
    type Item = PairPartition;

    fn next(&mut self) -> Option<PairPartition> {
        let choices = self.choices.as_mut()?;
        let out = PairPartition::from_choices(self.m, choices);
        // Odometer step from the deepest level.
        let mut level = choices.len();
        loop {
            if level == 0 {
                self.choices = None;
                break;
            }
            level -= 1;
            let radix = self.m - 2 * level - 1;
            choices[level] += 1;
            if choices[level] < radix {
                break;
            }
            choices[level] = 0;
        }
        Some(out)
    }
}

/// Every pair partition of `[m]` exactly once.
///
/// Odd `m` yields nothing. Ground sets above [`ENUMERATION_CAP`] are refused;
/// use [`sample_pair_partitions`] there.
pub fn enumerate_pair_partitions(m: usize) -> Result<PairPartitions> {
    if m > ENUMERATION_CAP {
        return Err(Error::feasibility(format!(
            "P2({m}) has {} elements; exhaustive enumeration is capped at m <= {ENUMERATION_CAP}, \
             use partition sampling instead",
            pair_partition_count(m)
        )));
    }
    let choices = if m % 2 == 1 {
        None
    } else {
        Some(vec![0; m / 2])
    };
    Ok(PairPartitions { m, choices })
}

/// One uniform draw from `P₂(m)`.
///
/// Pairing the smallest open position with a uniformly chosen partner gives
/// every partition probability `1/(m-1)!!`.
pub fn sample_pair_partition<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<PairPartition> {
    if m % 2 == 1 {
        return Err(Error::domain(format!("P2({m}) is empty for odd m")));
    }
    let choices: Vec<usize> = (0..m / 2)
        .map(|t| rng.random_range(0..m - 2 * t - 1))
        .collect();
    Ok(PairPartition::from_choices(m, &choices))
}

/// `count` independent uniform draws from `P₂(m)`.
pub fn sample_pair_partitions<'a, R: Rng + ?Sized>(
    m: usize,
    count: usize,
    rng: &'a mut R,
) -> Result<impl Iterator<Item = PairPartition> + 'a> {
    if m % 2 == 1 {
        return Err(Error::domain(format!("P2({m}) is empty for odd m")));
    }
    Ok((0..count).map(move |_| sample_pair_partition(m, rng).expect("m is even")))
}

/// Minimal union-find over `0..len`.
struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(len: usize) -> Self {
        DisjointSets {
            parent: (0..len).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// A simple loop-free graph on `0..k` with its connected components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionGraph {
    k: usize,
    edges: BTreeSet<(usize, usize)>,
    /// Components, each sorted, ordered by smallest vertex.
    components: Vec<Vec<usize>>,
}

impl PartitionGraph {
    /// Graph from an explicit edge list; duplicates collapse, loops are
    /// rejected.
    pub fn from_edges(k: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::shape(format!("loop at vertex {a}")));
            }
            if a >= k || b >= k {
                return Err(Error::shape(format!("edge ({a},{b}) outside {k} vertices")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut dsu = DisjointSets::new(k);
        for &(a, b) in &set {
            dsu.union(a, b);
        }
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); k];
        for v in 0..k {
            let r = dsu.find(v);
            by_root[r].push(v);
        }
        let components = by_root.into_iter().filter(|c| !c.is_empty()).collect();
        Ok(PartitionGraph {
            k,
            edges: set,
            components,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// `m(π) = k - #components`.
    pub fn m_pi(&self) -> usize {
        self.k - self.components.len()
    }

    fn component_edge_counts(&self) -> Vec<usize> {
        let mut comp_of = vec![0; self.k];
        for (c, verts) in self.components.iter().enumerate() {
            for &v in verts {
                comp_of[v] = c;
            }
        }
        let mut counts = vec![0; self.components.len()];
        for &(a, _) in &self.edges {
            counts[comp_of[a]] += 1;
        }
        counts
    }
}

/// Vector `r` owns positions `offset_r .. offset_r + degrees[r]`, where
/// `offset_r` is the sum of the earlier degrees.
pub fn vector_of_positions(degrees: &[usize]) -> Vec<usize> {
    degrees
        .iter()
        .enumerate()
        .flat_map(|(r, &d)| std::iter::repeat_n(r, d))
        .collect()
}

/// `G_π`: one vertex per trace factor, an edge wherever a block joins two
/// different factors.
pub fn build_graph(pi: &PairPartition, degrees: &[usize]) -> Result<PartitionGraph> {
    let total: usize = degrees.iter().sum();
    if total != pi.m() {
        return Err(Error::shape(format!(
            "degrees sum to {total} but the partition is of [{}]",
            pi.m()
        )));
    }
    let owner = vector_of_positions(degrees);
    let edges = pi
        .blocks()
        .iter()
        .map(|&(a, b)| (owner[a], owner[b]))
        .filter(|(r, s)| r != s);
    PartitionGraph::from_edges(degrees.len(), edges)
}

/// Which vertex sign every vertex must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabellingTarget {
    /// Every vertex product is `-1`.
    AllOdd,
    /// Every vertex product is `+1`.
    AllEven,
}

/// Number of ±1 edge labellings whose vertex products all equal the target.
///
/// Each component contributes `2^{#E - #V + 1}`; for all-odd the product of
/// all vertex signs is `+1` (each edge is counted twice), so a component with
/// an odd vertex count has none. The result is `None` if it overflows `u128`.
pub fn count_labellings(g: &PartitionGraph, target: LabellingTarget) -> Option<u128> {
    let mut exponent = 0u32;
    for (verts, &e) in g.components().iter().zip(&g.component_edge_counts()) {
        if target == LabellingTarget::AllOdd && verts.len() % 2 == 1 {
            return Some(0);
        }
        exponent += (e + 1 - verts.len()) as u32;
    }
    1u128.checked_shl(exponent)
}

/// Exhaustive count over all `2^{#E}` labellings.
pub fn brute_force_labellings(g: &PartitionGraph, target: LabellingTarget) -> Result<u64> {
    let edges: Vec<(usize, usize)> = g.edges().iter().copied().collect();
    if edges.len() > BRUTE_FORCE_EDGE_CAP {
        return Err(Error::feasibility(format!(
            "{} edges exceed the brute-force cap of {BRUTE_FORCE_EDGE_CAP}",
            edges.len()
        )));
    }
    let want_negative = target == LabellingTarget::AllOdd;
    let mut count = 0u64;
    let mut negative = vec![false; g.vertex_count()];
    for mask in 0u64..(1 << edges.len()) {
        negative.iter_mut().for_each(|s| *s = false);
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                negative[a] ^= true;
                negative[b] ^= true;
            }
        }
        if negative.iter().all(|&s| s == want_negative) {
            count += 1;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    fn pp(m: usize, blocks: &[(usize, usize)]) -> PairPartition {
        PairPartition::from_one_based(m, blocks).unwrap()
    }

    #[test]
    fn smallest_sets() {
        let all: Vec<_> = enumerate_pair_partitions(2).unwrap().collect();
        assert_eq!(all, vec![pp(2, &[(1, 2)])]);
        assert_eq!(enumerate_pair_partitions(0).unwrap().count(), 1);
        assert_eq!(enumerate_pair_partitions(5).unwrap().count(), 0);
        assert_eq!(enumerate_pair_partitions(6).unwrap().count(), 15);
    }

    #[test]
    fn counts_match_double_factorial() {
        let expected = [1u128, 3, 15, 105, 945, 10395];
        for (i, m) in (2..=12).step_by(2).enumerate() {
            let n = enumerate_pair_partitions(m).unwrap().count() as u128;
            assert_eq!(n, expected[i]);
            assert_eq!(pair_partition_count(m), expected[i]);
            // m! / (2^{m/2} (m/2)!)
            let fact = |x: u128| (1..=x).product::<u128>();
            let h = (m / 2) as u128;
            assert_eq!(fact(m as u128) / (1u128 << h) / fact(h), expected[i]);
        }
    }

    #[test]
    fn enumeration_is_distinct_and_valid() {
        let all: Vec<_> = enumerate_pair_partitions(8).unwrap().collect();
        let set: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
        for p in &all {
            let again = PairPartition::new(8, p.blocks().iter().rev().copied()).unwrap();
            assert_eq!(&again, p);
            assert!(p.blocks().windows(2).all(|w| w[0].0 < w[1].0));
        }
        assert_eq!(all[0], pp(8, &[(1, 2), (3, 4), (5, 6), (7, 8)]));
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_pair_partitions(18),
            Err(Error::Feasibility(_))
        ));
        assert!(enumerate_pair_partitions(16).is_ok());
    }

    #[test]
    fn rejects_malformed_blocks() {
        assert!(PairPartition::new(4, [(0, 1), (1, 2)]).is_err());
        assert!(PairPartition::new(4, [(0, 1)]).is_err());
        assert!(PairPartition::new(4, [(0, 0), (2, 3)]).is_err());
        assert!(PairPartition::new(4, [(0, 1), (2, 4)]).is_err());
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(pp(4, &[(2, 4), (1, 3)]).to_string(), "{{1,3},{2,4}}");
    }

    #[test]
    fn sampling_is_uniform_on_four_points() {
        let mut rng = substream(3, Domain::Adhoc, 0);
        let draws = 30_000usize;
        let all: Vec<_> = enumerate_pair_partitions(4).unwrap().collect();
        let mut counts = [0usize; 3];
        for p in sample_pair_partitions(4, draws, &mut rng).unwrap() {
            counts[all.iter().position(|q| *q == p).unwrap()] += 1;
        }
        let se = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - draws as f64 / 3.0).abs() < 3.0 * se,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = substream(3, Domain::Adhoc, 1);
        assert!(sample_pair_partitions(2, 10, &mut rng)
            .unwrap()
            .all(|p| p == pp(2, &[(1, 2)])));
        let big: Vec<_> = sample_pair_partitions(28, 10_000, &mut rng)
            .unwrap()
            .collect();
        assert_eq!(big.len(), 10_000);
        for p in &big {
            assert_eq!(
                PairPartition::new(28, p.blocks().iter().copied()).as_ref(),
                Ok(p)
            );
        }
        assert!(sample_pair_partition(3, &mut rng).is_err());
    }

    #[test]
    fn graph_examples() {
        let g = build_graph(&pp(6, &[(1, 4), (2, 5), (3, 6)]), &[3, 3]).unwrap();
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!((g.components().len(), g.m_pi()), (1, 1));

        let g = build_graph(&pp(6, &[(1, 2), (3, 4), (5, 6)]), &[3, 3]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.m_pi(), 1);

        let g = build_graph(&pp(2, &[(1, 2)]), &[1, 1]).unwrap();
        assert_eq!(g.m_pi(), 1);

        // Two self-contained factors stay disconnected.
        let g = build_graph(&pp(8, &[(1, 2), (3, 4), (5, 6), (7, 8)]), &[4, 4]).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.m_pi(), 0);

        assert!(matches!(
            build_graph(&pp(2, &[(1, 2)]), &[3]),
            Err(Error::InputShape(_))
        ));
    }

    #[test]
    fn mixed_degree_layout() {
        // Degrees (1, 3): position 1 is vector 0, positions 2..4 vector 1.
        assert_eq!(vector_of_positions(&[1, 3]), vec![0, 1, 1, 1]);
        let g = build_graph(&pp(4, &[(1, 2), (3, 4)]), &[1, 3]).unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    fn cycle(k: usize) -> PartitionGraph {
        PartitionGraph::from_edges(k, (0..k).map(|i| (i, (i + 1) % k))).unwrap()
    }

    #[test]
    fn labelling_examples() {
        use LabellingTarget::*;
        let edge = PartitionGraph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(count_labellings(&edge, AllOdd), Some(1));
        assert_eq!(count_labellings(&cycle(4), AllOdd), Some(2));
        assert_eq!(brute_force_labellings(&cycle(4), AllOdd).unwrap(), 2);
        assert_eq!(count_labellings(&cycle(3), AllOdd), Some(0));
        assert_eq!(count_labellings(&cycle(3), AllEven), Some(2));
        assert_eq!(brute_force_labellings(&cycle(3), AllEven).unwrap(), 2);
        let path = PartitionGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(brute_force_labellings(&path, AllOdd).unwrap(), 1);
        assert_eq!(count_labellings(&path, AllOdd), Some(1));
    }

    #[test]
    fn isolated_vertices() {
        let g = PartitionGraph::from_edges(3, [(0, 1)]).unwrap();
        assert_eq!(count_labellings(&g, LabellingTarget::AllOdd), Some(0));
        assert_eq!(count_labellings(&g, LabellingTarget::AllEven), Some(1));
        assert_eq!(
            brute_force_labellings(&g, LabellingTarget::AllOdd).unwrap(),
            0
        );
    }

    #[test]
    fn duplicate_edges_collapse_and_loops_fail() {
        let g = PartitionGraph::from_edges(2, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!(PartitionGraph::from_edges(2, [(1, 1)]).is_err());
    }

    #[test]
    fn brute_force_cap() {
        let complete7 =
            PartitionGraph::from_edges(7, (0..7).flat_map(|a| (a + 1..7).map(move |b| (a, b))))
                .unwrap();
        assert!(matches!(
            brute_force_labellings(&complete7, LabellingTarget::AllEven),
            Err(Error::Feasibility(_))
        ));
    }
}
