//! The two-layer network: a cyber layer carrying pairwise links plus a
//! roster of 2-simplices, and a physical contact layer. Both layers share
//! the node set `0..n`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{rng_from_seed, SimRng};

/// Undirected simple graph in compressed sparse row form. Neighbor lists
/// are sorted, so membership tests are a binary search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Adjacency {
    /// Builds the graph from an unordered edge list. Orientation, duplicates
    /// and self-loops are normalized away.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut directed: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for n = {n}");
            if u != v {
                directed.push((u, v));
                directed.push((v, u));
            }
        }
        directed.sort_unstable();
        directed.dedup();

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &directed {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = directed.into_iter().map(|(_, v)| v).collect();
        Adjacency { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn mean_degree(&self) -> f64 {
        let n = self.node_count();
        if n == 0 {
            0.0
        } else {
            self.targets.len() as f64 / n as f64
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    /// Checks symmetry, absence of self-loops and of repeated entries.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.node_count() {
            let nb = self.neighbors(i);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invariant(format!(
                    "neighbor list of node {i} is not strictly increasing"
                )));
            }
            for &j in nb {
                if j == i {
                    return Err(Error::Invariant(format!("self-loop at node {i}")));
                }
                if !self.has_edge(j, i) {
                    return Err(Error::Invariant(format!(
                        "edge ({i}, {j}) has no reverse entry"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Information layer: pairwise links (`a_ij`) and the 2-simplices each
/// node sits in.
#[derive(Clone, Debug, PartialEq)]
pub struct CyberLayer {
    adj: Adjacency,
    simplices: Vec<[usize; 3]>,
    simplex_offsets: Vec<usize>,
    simplex_ids: Vec<usize>,
    partners: Vec<[usize; 2]>,
}

impl CyberLayer {
    /// Assembles a layer from pairwise edges and simplices. The three edges
    /// of every simplex are added when missing.
    pub fn from_parts(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        simplices: impl IntoIterator<Item = [usize; 3]>,
    ) -> Result<Self> {
        let mut roster: Vec<[usize; 3]> = Vec::new();
        for mut s in simplices {
            s.sort_unstable();
            if s[2] >= n {
                return Err(Error::Invariant(format!("simplex {s:?} out of range")));
            }
            if s[0] == s[1] || s[1] == s[2] {
                return Err(Error::Invariant(format!(
                    "simplex {s:?} has repeated nodes"
                )));
            }
            roster.push(s);
        }
        roster.sort_unstable();
        if roster.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invariant("duplicate simplex".into()));
        }

        let closure = roster
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (a, c)]);
        let adj = Adjacency::from_edges(n, edges.into_iter().chain(closure));

        let mut counts = vec![0usize; n + 1];
        for s in &roster {
            for &v in s {
                counts[v + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let simplex_offsets = counts.clone();
        let mut cursor = counts;
        let total = roster.len() * 3;
        let mut simplex_ids = vec![0usize; total];
        let mut partners = vec![[0usize; 2]; total];
        for (id, &[a, b, c]) in roster.iter().enumerate() {
            for (v, pair) in [(a, [b, c]), (b, [a, c]), (c, [a, b])] {
                simplex_ids[cursor[v]] = id;
                partners[cursor[v]] = pair;
                cursor[v] += 1;
            }
        }

        Ok(CyberLayer {
            adj,
            simplices: roster,
            simplex_offsets,
            simplex_ids,
            partners,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adj.node_count()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adj.neighbors(i)
    }

    pub fn simplices(&self) -> &[[usize; 3]] {
        &self.simplices
    }

    /// Ids (into [`Self::simplices`]) of the simplices containing node `i`.
    pub fn simplex_index(&self, i: usize) -> &[usize] {
        &self.simplex_ids[self.simplex_offsets[i]..self.simplex_offsets[i + 1]]
    }

    /// For each simplex containing `i`, the other two members.
    #[inline]
    pub fn simplex_partners(&self, i: usize) -> &[[usize; 2]] {
        &self.partners[self.simplex_offsets[i]..self.simplex_offsets[i + 1]]
    }

    /// Mean number of simplices per node (the realized `k2`).
    pub fn mean_simplex_membership(&self) -> f64 {
        let n = self.node_count();
        if n == 0 {
            0.0
        } else {
            3.0 * self.simplices.len() as f64 / n as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adj.validate()?;
        for (id, &[a, b, c]) in self.simplices.iter().enumerate() {
            if !(a < b && b < c) {
                return Err(Error::Invariant(format!("simplex {id} not canonical")));
            }
            for (u, v) in [(a, b), (b, c), (a, c)] {
                if !self.adj.has_edge(u, v) {
                    return Err(Error::Invariant(format!(
                        "simplex {id} = {{{a},{b},{c}}} lacks edge ({u}, {v})"
                    )));
                }
            }
            for v in [a, b, c] {
                if !self.simplex_index(v).contains(&id) {
                    return Err(Error::Invariant(format!(
                        "node {v} missing simplex {id} in its roster"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Contact layer (`b_ij`). Nodes loaded from files keep their original ids.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalLayer {
    adj: Adjacency,
    original_ids: Option<Vec<u64>>,
}

impl PhysicalLayer {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        PhysicalLayer {
            adj: Adjacency::from_edges(n, edges),
            original_ids: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.node_count()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adj.neighbors(i)
    }

    /// Physical degree `k_i`.
    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.adj.degree(i)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.edge_count()
    }

    /// Id of compacted node `i` in the source file, when loaded from one.
    pub fn original_id(&self, i: usize) -> Option<u64> {
        self.original_ids.as_ref().map(|ids| ids[i])
    }

    pub fn validate(&self) -> Result<()> {
        self.adj.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplexNetwork {
    pub cyber: CyberLayer,
    pub physical: PhysicalLayer,
}

impl MultiplexNetwork {
    pub fn new(cyber: CyberLayer, physical: PhysicalLayer) -> Result<Self> {
        if cyber.node_count() != physical.node_count() {
            return Err(Error::Invariant(format!(
                "layer sizes differ: cyber has {} nodes, physical has {}",
                cyber.node_count(),
                physical.node_count()
            )));
        }
        Ok(MultiplexNetwork { cyber, physical })
    }

    pub fn node_count(&self) -> usize {
        self.physical.node_count()
    }
}

/// Pairwise and per-triple connection probabilities of the simplicial
/// random graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionProbs {
    pub p1: f64,
    pub p2: f64,
}

/// Converts a target mean cyber degree `k1` and mean simplex membership
/// `k2` into `(p1, p2)`.
///
/// Simplex closure adds on average `2(1 - p1)` links per simplex a node
/// belongs to, so `k1 = (n-1) p1 + 2 (1 - p1) k2`; solving for `p1` gives
/// the first expression below.
pub fn compute_connection_probs(n: usize, k1: f64, k2: f64) -> Result<ConnectionProbs> {
    if n < 3 {
        return Err(Error::param("n", format!("need at least 3 nodes, got {n}")));
    }
    let nm1 = (n - 1) as f64;
    let nm2 = (n - 2) as f64;
    if !(k1 > 0.0 && k1 < nm1) {
        return Err(Error::param(
            "k1",
            format!("mean degree must satisfy 0 < k1 < n-1 = {nm1}, got {k1}"),
        ));
    }
    if !k2.is_finite() {
        return Err(Error::param("k2", "must be finite"));
    }
    let p1 = (k1 - 2.0 * k2) / (nm1 - 2.0 * k2);
    let p2 = 2.0 * k2 / (nm1 * nm2);
    if !(0.0..=1.0).contains(&p2) {
        return Err(Error::param(
            "k2",
            format!("p2 = {p2} outside [0, 1] (k2 = {k2})"),
        ));
    }
    if !(0.0..=1.0).contains(&p1) || 2.0 * k2 >= nm1 {
        return Err(Error::param(
            "k2",
            format!("p1 = {p1} outside [0, 1]: 2*k2 = {} must stay below k1 = {k1}", 2.0 * k2),
        ));
    }
    if 2.0 * k2 >= k1 {
        return Err(Error::param(
            "k2",
            format!("2*k2 = {} must be below k1 = {k1} (p1 = {p1})", 2.0 * k2),
        ));
    }
    Ok(ConnectionProbs { p1, p2 })
}

/// G(n, p) edges by geometric skipping over the lower triangle
/// (Batagelj & Brandes), O(n + m).
fn sample_gnp_edges(n: usize, p: f64, rng: &mut SimRng, out: &mut Vec<(usize, usize)>) {
    if p <= 0.0 || n < 2 {
        return;
    }
    if p >= 1.0 {
        for v in 1..n {
            out.extend((0..v).map(|w| (w, v)));
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w) = (1usize, -1i64);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            out.push((w as usize, v));
        }
    }
}

fn choose2(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

fn choose3(c: u64) -> u64 {
    if c < 3 {
        0
    } else {
        c * (c - 1) / 2 * (c - 2) / 3
    }
}

/// Largest `c` in `[lo, hi]` with `f(c) <= x`, for non-decreasing `f`.
fn largest_at_most(x: u64, mut lo: u64, mut hi: u64, f: impl Fn(u64) -> u64) -> u64 {
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if f(mid) <= x {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Maps a rank in `0..C(n,3)` to its triple in colexicographic order.
fn unrank_triple(rank: u64, n: u64) -> [usize; 3] {
    let c3 = largest_at_most(rank, 2, n - 1, choose3);
    let rest = rank - choose3(c3);
    let c2 = largest_at_most(rest, 1, c3 - 1, choose2);
    let c1 = rest - choose2(c2);
    [c1 as usize, c2 as usize, c3 as usize]
}

/// Draws each of the `C(n,3)` triples independently with probability `p2`.
/// The count is drawn from its binomial law and then that many distinct
/// ranks are sampled uniformly, which has the same distribution as the
/// per-triple coin flips without touching every triple.
fn sample_simplices(n: usize, p2: f64, rng: &mut SimRng) -> Vec<[usize; 3]> {
    if p2 <= 0.0 || n < 3 {
        return Vec::new();
    }
    let total = choose3(n as u64);
    let count = Binomial::new(total, p2.min(1.0))
        .expect("p2 validated to lie in [0, 1]")
        .sample(rng);
    let mut out: Vec<[usize; 3]> = index::sample(rng, total as usize, count as usize)
        .into_iter()
        .map(|r| unrank_triple(r as u64, n as u64))
        .collect();
    out.sort_unstable();
    out
}

/// Simplicial Erdős–Rényi cyber layer: pairwise links with probability
/// `p1`, then 2-simplices with probability `p2` per triple, whose missing
/// edges are added to the layer.
pub fn generate_simplicial_er(n: usize, k1: f64, k2: f64, seed: u64) -> Result<CyberLayer> {
    let ConnectionProbs { p1, p2 } = compute_connection_probs(n, k1, k2)?;
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    sample_gnp_edges(n, p1, &mut rng, &mut edges);
    let simplices = sample_simplices(n, p2, &mut rng);
    CyberLayer::from_parts(n, edges, simplices)
}

/// Watts–Strogatz small world: ring lattice with `k` nearest neighbors,
/// then each lattice edge `(u, u+j)` has its far endpoint moved with
/// probability `p` to a uniform node that is neither `u` nor already
/// adjacent to `u`.
pub fn generate_ws(n: usize, k: usize, p: f64, seed: u64) -> Result<PhysicalLayer> {
    if !k.is_multiple_of(2) {
        return Err(Error::param("K", format!("ring degree must be even, got {k}")));
    }
    if n <= k {
        return Err(Error::param("n", format!("need n > K, got n = {n}, K = {k}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("P", format!("rewiring probability {p} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= p {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let mut w = rng.random_range(0..n);
            while w == u || adj[u].contains(&w) {
                w = rng.random_range(0..n);
            }
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nb)| nb.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
        .collect::<Vec<_>>();
    Ok(PhysicalLayer::from_edges(n, edges))
}

/// Cyber layer that copies the physical links and adds simplices
/// calibrated to mean membership `k2`.
pub fn mirror_layer(physical: &PhysicalLayer, k2: f64, seed: u64) -> Result<CyberLayer> {
    let n = physical.node_count();
    if n < 3 {
        return Err(Error::param("n", format!("need at least 3 nodes, got {n}")));
    }
    if k2.is_nan() || k2 < 0.0 {
        return Err(Error::param("k2", format!("must be non-negative, got {k2}")));
    }
    let p2 = 2.0 * k2 / ((n - 1) as f64 * (n - 2) as f64);
    if p2 > 1.0 {
        return Err(Error::param("k2", format!("p2 = {p2} exceeds 1")));
    }
    let mut rng = rng_from_seed(seed);
    let simplices = sample_simplices(n, p2, &mut rng);
    CyberLayer::from_parts(n, physical.adjacency().edges(), simplices)
}

/// On-disk layouts accepted by [`load_edge_list`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeListFormat {
    /// One `u v` pair per line, separated by whitespace or a comma.
    /// Further columns (weights, timestamps) are ignored.
    #[default]
    Pairs,
    /// METIS adjacency: a `n m` header, then line `i` lists the 1-based
    /// neighbors of node `i`.
    Metis,
    /// GML as distributed for the classic network datasets: `node [ id .. ]`
    /// and `edge [ source .. target .. ]` blocks, other keys ignored.
    Gml,
}

/// A loaded graph with the clean-up counts.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub layer: PhysicalLayer,
    pub self_loops_dropped: usize,
    pub duplicates_collapsed: usize,
}

fn is_comment(line: &str) -> bool {
    line.starts_with('#') || line.starts_with('%')
}

fn parse_id(tok: &str, path: &Path, line: usize) -> Result<u64> {
    tok.parse::<u64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("expected a non-negative integer node id, found `{tok}`"),
    })
}

/// Reads an undirected graph. Reversed and repeated pairs collapse to one
/// edge, self-loops are dropped (and counted), and node ids are compacted
/// to `0..n` in increasing order of the original id.
pub fn load_edge_list(path: impl AsRef<Path>, format: EdgeListFormat) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
                hint: String::new(),
            }
        } else {
            Error::io(path, e)
        }
    })?;
    let reader = BufReader::new(file);
    let (raw, ids) = match format {
        EdgeListFormat::Pairs => read_pairs(reader, path)?,
        EdgeListFormat::Metis => read_metis(reader, path)?,
        EdgeListFormat::Gml => read_gml(reader, path)?,
    };

    let mut self_loops = 0usize;
    let mut seen = BTreeSet::new();
    let mut duplicates = 0usize;
    for &(u, v) in &raw {
        if u == v {
            self_loops += 1;
            continue;
        }
        if !seen.insert((u.min(v), u.max(v))) {
            duplicates += 1;
        }
    }
    if seen.is_empty() {
        return Err(Error::EmptyGraph {
            path: path.to_path_buf(),
        });
    }
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loop(s)", path.display());
    }

    // Compact ids.
    let index: BTreeMap<u64, usize> = ids
        .unwrap_or_else(|| raw.iter().flat_map(|&(u, v)| [u, v]).collect())
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let original_ids: Vec<u64> = index.keys().copied().collect();
    let n = original_ids.len();
    let edges = seen.iter().map(|&(u, v)| (index[&u], index[&v]));
    let layer = PhysicalLayer {
        adj: Adjacency::from_edges(n, edges),
        original_ids: Some(original_ids),
    };
    Ok(LoadedGraph {
        layer,
        self_loops_dropped: self_loops,
        duplicates_collapsed: duplicates,
    })
}

type RawGraph = (Vec<(u64, u64)>, Option<BTreeSet<u64>>);

fn read_pairs(reader: impl BufRead, path: &Path) -> Result<RawGraph> {
    let mut raw = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || is_comment(trimmed) {
            continue;
        }
        let mut toks = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty());
        let (Some(a), Some(b)) = (toks.next(), toks.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: format!("expected two node ids, found `{trimmed}`"),
            });
        };
        raw.push((parse_id(a, path, lineno + 1)?, parse_id(b, path, lineno + 1)?));
    }
    Ok((raw, None))
}

fn read_metis(reader: impl BufRead, path: &Path) -> Result<RawGraph> {
    let mut lines = reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !is_comment(l.trim_start())));
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let (hline, header) = match lines.next() {
        Some((i, l)) => (i + 1, l.map_err(|e| Error::io(path, e))?),
        None => return Err(Error::EmptyGraph { path: path.to_path_buf() }),
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() < 2 {
        return Err(parse_err(hline, "METIS header must be `n m [fmt]`".into()));
    }
    let n = parse_id(head[0], path, hline)?;
    let m = parse_id(head[1], path, hline)?;
    if head.len() > 2 && !head[2].trim_start_matches('0').is_empty() {
        return Err(parse_err(hline, format!("weighted METIS format `{}` unsupported", head[2])));
    }

    let mut raw = Vec::new();
    let mut node = 0u64;
    for (i, l) in lines {
        let l = l.map_err(|e| Error::io(path, e))?;
        node += 1;
        if node > n {
            if l.trim().is_empty() {
                continue;
            }
            return Err(parse_err(i + 1, format!("more adjacency lines than the {n} declared nodes")));
        }
        for tok in l.split_whitespace() {
            let v = parse_id(tok, path, i + 1)?;
            if v == 0 || v > n {
                return Err(parse_err(i + 1, format!("neighbor {v} outside 1..={n}")));
            }
            if node <= v {
                raw.push((node, v));
            }
        }
    }
    if node < n {
        return Err(parse_err(hline, format!("declared {n} nodes but found {node} adjacency lines")));
    }
    let distinct: BTreeSet<(u64, u64)> = raw.iter().copied().filter(|(u, v)| u != v).collect();
    if distinct.len() as u64 != m {
        log::warn!(
            "{}: header declares {m} edges, adjacency lists give {}",
            path.display(),
            distinct.len()
        );
    }
    Ok((raw, Some((1..=n).collect())))
}

/// GML tokens with their line numbers. Quoted strings become one token.
fn gml_tokens(reader: impl BufRead, path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    let mut in_string = false;
    let mut cur = String::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        for c in line.chars() {
            if in_string {
                cur.push(c);
                if c == '"' {
                    in_string = false;
                    out.push((lineno + 1, std::mem::take(&mut cur)));
                }
            } else if c == '"' {
                in_string = true;
                cur.push(c);
            } else if c == '[' || c == ']' {
                if !cur.is_empty() {
                    out.push((lineno + 1, std::mem::take(&mut cur)));
                }
                out.push((lineno + 1, c.to_string()));
            } else if c == '#' && cur.is_empty() {
                break;
            } else if c.is_whitespace() {
                if !cur.is_empty() {
                    out.push((lineno + 1, std::mem::take(&mut cur)));
                }
            } else {
                cur.push(c);
            }
        }
        if !in_string && !cur.is_empty() {
            out.push((lineno + 1, std::mem::take(&mut cur)));
        }
        if in_string {
            cur.push('\n');
        }
    }
    Ok(out)
}

fn read_gml(reader: impl BufRead, path: &Path) -> Result<RawGraph> {
    let tokens = gml_tokens(reader, path)?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut raw = Vec::new();
    let mut ids = BTreeSet::new();
    // Open blocks: the key that opened each one.
    let mut stack: Vec<String> = Vec::new();
    let (mut source, mut target, mut id) = (None, None, None);
    let mut i = 0;
    while i < tokens.len() {
        let (line, tok) = (&tokens[i].0, tokens[i].1.as_str());
        match tok {
            "]" => {
                let Some(block) = stack.pop() else {
                    return Err(parse_err(*line, "unbalanced `]`".into()));
                };
                match block.as_str() {
                    "node" => {
                        let v = id.take().ok_or_else(|| parse_err(*line, "node without id".into()))?;
                        ids.insert(v);
                    }
                    "edge" => match (source.take(), target.take()) {
                        (Some(u), Some(v)) => raw.push((u, v)),
                        _ => return Err(parse_err(*line, "edge without source and target".into())),
                    },
                    _ => {}
                }
                i += 1;
            }
            "[" => return Err(parse_err(*line, "`[` without a key".into())),
            key => {
                let Some((vline, value)) = tokens.get(i + 1) else {
                    return Err(parse_err(*line, format!("key `{key}` has no value")));
                };
                if value == "[" {
                    stack.push(key.to_string());
                } else if value == "]" {
                    return Err(parse_err(*vline, format!("key `{key}` has no value")));
                } else {
                    let parent = stack.last().map(String::as_str);
                    match (parent, key) {
                        (Some("node"), "id") => id = Some(parse_id(value, path, *vline)?),
                        (Some("edge"), "source") => source = Some(parse_id(value, path, *vline)?),
                        (Some("edge"), "target") => target = Some(parse_id(value, path, *vline)?),
                        _ => {}
                    }
                }
                i += 2;
            }
        }
    }
    if !stack.is_empty() {
        let line = tokens.last().map_or(0, |t| t.0);
        return Err(parse_err(line, "unterminated block".into()));
    }
    for &(u, v) in &raw {
        ids.insert(u);
        ids.insert(v);
    }
    Ok((raw, Some(ids)))
}

/// Writes `i j` per undirected edge, `i < j`.
pub fn write_edge_list(adj: &Adjacency, mut out: impl Write) -> std::io::Result<()> {
    for (i, j) in adj.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}

/// Writes `i j k` per simplex.
pub fn write_simplices(cyber: &CyberLayer, mut out: impl Write) -> std::io::Result<()> {
    for [a, b, c] in cyber.simplices() {
        writeln!(out, "{a} {b} {c}")?;
    }
    Ok(())
}
