//! Empirical population models from a contact network.
//!
//! Loads an undirected edge list and per-node covariates, fits a greedy
//! regression tree predicting degree from covariates, and turns each leaf's
//! degree histogram into one mixture component weighted by leaf size.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, PopulationModel};
use crate::error::{Error, Result};

/// Undirected simple graph over string node ids. Nodes are indexed in order of
/// first appearance; adjacency lists are sorted and free of duplicates.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds the graph, dropping self-loops and repeated edges.
    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut g = Graph::default();
        for (u, v) in edges {
            let u = g.intern(u.as_ref());
            let v = g.intern(v.as_ref());
            if u != v {
                g.adj[u].push(v);
                g.adj[v].push(u);
            }
        }
        for list in g.adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        g
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        self.adj.push(Vec::new());
        i
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// A covariate value; a column is numeric only if every one of its cells parses.
#[derive(Clone, Debug, PartialEq)]
pub enum CovariateValue {
    Numeric(f64),
    Categorical(String),
}

/// One graph node with its covariates (if any row named it) and degree.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub node: usize,
    pub id: String,
    pub covariates: Option<BTreeMap<String, CovariateValue>>,
    pub degree: usize,
}

/// Graph plus one record per node, in node-index order.
#[derive(Clone, Debug)]
pub struct NetworkData {
    pub graph: Graph,
    pub records: Vec<NodeRecord>,
    /// Ids from covariate rows that matched no graph node.
    pub unknown_covariate_ids: Vec<String>,
}

const HEADER_TOKENS: &[&str] = &[
    "u", "v", "source", "target", "from", "to", "src", "dst", "node1", "node2", "node_a", "node_b", "i", "j",
];

fn split_edge_line(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses an edge list: two columns separated by tab, comma or whitespace, an
/// optional header row, `#` comments and blank lines ignored.
pub fn parse_edges(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens = split_edge_line(line);
        let was_first = std::mem::replace(&mut first, false);
        if tokens.len() != 2 || tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected two node ids, found {:?}", line),
            });
        }
        if was_first
            && tokens
                .iter()
                .all(|t| HEADER_TOKENS.contains(&t.to_ascii_lowercase().as_str()))
        {
            continue;
        }
        edges.push((tokens[0].to_string(), tokens[1].to_string()));
    }
    Ok(edges)
}

/// Loads an edge list into a graph.
pub fn load_graph(edges_path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(edges_path).map_err(|e| Error::io(edges_path, e))?;
    Ok(Graph::from_edges(parse_edges(&text, edges_path)?))
}

/// Parsed covariate table: column names (without the id column) and rows.
struct CovariateTable {
    names: Vec<String>,
    rows: Vec<(usize, String, Vec<String>)>,
}

fn read_covariates(path: &Path) -> Result<CovariateTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delimiter = match text.lines().next() {
        Some(h) if h.contains('\t') && !h.contains(',') => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(parse_err(1, "missing header row".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen = std::collections::HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(parse_err(1, format!("duplicate column {n:?}")));
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty node id".into()));
        }
        rows.push((line, id, rec.iter().skip(1).map(str::to_string).collect()));
    }
    Ok(CovariateTable { names, rows })
}

/// Loads the edge list and covariate file into a graph and per-node records.
///
/// Covariate rows naming unknown nodes are skipped with a warning. Nodes
/// without a covariate row get `covariates: None`.
pub fn load_network(edges_path: &Path, covariates_path: &Path) -> Result<NetworkData> {
    let graph = load_graph(edges_path)?;
    let table = read_covariates(covariates_path)?;

    let numeric: Vec<bool> = (0..table.names.len())
        .map(|c| {
            table
                .rows
                .iter()
                .all(|(_, _, vals)| vals[c].parse::<f64>().is_ok_and(f64::is_finite))
        })
        .collect();

    let mut covs: Vec<Option<BTreeMap<String, CovariateValue>>> = vec![None; graph.num_nodes()];
    let mut unknown = Vec::new();
    for (line, id, vals) in table.rows {
        let Some(node) = graph.index_of(&id) else {
            log::warn!(
                "{}:{line}: covariates for unknown node {id:?} skipped",
                covariates_path.display()
            );
            unknown.push(id);
            continue;
        };
        if covs[node].is_some() {
            return Err(Error::Parse {
                path: covariates_path.to_path_buf(),
                line,
                message: format!("duplicate covariate row for node {id:?}"),
            });
        }
        let map = table
            .names
            .iter()
            .zip(vals)
            .zip(&numeric)
            .map(|((name, v), &num)| {
                let value = if num {
                    CovariateValue::Numeric(v.parse().expect("checked numeric"))
                } else {
                    CovariateValue::Categorical(v)
                };
                (name.clone(), value)
            })
            .collect();
        covs[node] = Some(map);
    }

    let records = covs
        .into_iter()
        .enumerate()
        .map(|(node, covariates)| NodeRecord {
            node,
            id: graph.id(node).to_string(),
            covariates,
            degree: graph.degree(node),
        })
        .collect();
    Ok(NetworkData {
        graph,
        records,
        unknown_covariate_ids: unknown,
    })
}

/// Binary split rule. Members satisfying the test go left.
#[derive(Clone, Debug, PartialEq)]
pub enum Split {
    /// `value ≤ threshold`.
    Numeric { covariate: String, threshold: f64 },
    /// `value == category`.
    Categorical { covariate: String, category: String },
}

impl Split {
    fn goes_left(&self, covs: &BTreeMap<String, CovariateValue>) -> bool {
        match self {
            Split::Numeric { covariate, threshold } => {
                matches!(covs.get(covariate), Some(CovariateValue::Numeric(x)) if x <= threshold)
            }
            Split::Categorical { covariate, category } => {
                matches!(covs.get(covariate), Some(CovariateValue::Categorical(c)) if c == category)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf(usize),
    Split {
        rule: Split,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Fitted tree with its leaves. `leaves[j]` holds indices into the record
/// slice passed to [`fit_partition`]. Records without covariates form the
/// extra catch-all leaf, which is exempt from the minimum leaf size.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub root: Option<TreeNode>,
    pub leaves: Vec<Vec<usize>>,
    pub catch_all: Option<usize>,
}

impl Partition {
    pub fn depth(&self) -> usize {
        fn walk(t: &TreeNode) -> usize {
            match t {
                TreeNode::Leaf(_) => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        self.root.as_ref().map_or(0, walk)
    }

    /// Leaf index for a set of covariates (the catch-all for `None`).
    pub fn leaf_of(&self, covs: Option<&BTreeMap<String, CovariateValue>>) -> Option<usize> {
        let Some(covs) = covs else {
            return self.catch_all;
        };
        let mut t = self.root.as_ref()?;
        loop {
            match t {
                TreeNode::Leaf(j) => return Some(*j),
                TreeNode::Split { rule, left, right } => {
                    t = if rule.goes_left(covs) { left } else { right };
                }
            }
        }
    }
}

/// Sum of squared deviations from a running `(count, Σd, Σd²)`.
fn sse(n: usize, sum: f64, sum_sq: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sum_sq - sum * sum / n as f64).max(0.0)
    }
}

/// Reductions below this count as no improvement.
const MIN_REDUCTION: f64 = 1e-9;

/// Best split of `members` by degree-SSE reduction, or `None` when no
/// admissible split improves it. Ties keep the first candidate in
/// (covariate name, threshold or category) order.
pub fn best_split(records: &[NodeRecord], members: &[usize], min_leaf: usize) -> Option<(Split, f64)> {
    let deg = |i: usize| records[i].degree as f64;
    let (tot_s, tot_q) = members
        .iter()
        .fold((0.0, 0.0), |(s, q), &i| (s + deg(i), q + deg(i) * deg(i)));
    let parent = sse(members.len(), tot_s, tot_q);
    let names: Vec<&String> = records[members[0]].covariates.as_ref()?.keys().collect();

    let mut best: Option<(Split, f64)> = None;
    let mut consider = |split: Split, left: (usize, f64, f64)| {
        let (ln, ls, lq) = left;
        let rn = members.len() - ln;
        if ln < min_leaf || rn < min_leaf || ln == 0 || rn == 0 {
            return;
        }
        let red = parent - sse(ln, ls, lq) - sse(rn, tot_s - ls, tot_q - lq);
        if red > MIN_REDUCTION && best.as_ref().is_none_or(|(_, b)| red > b + MIN_REDUCTION) {
            best = Some((split, red));
        }
    };

    for name in names {
        let values: Vec<(&CovariateValue, f64)> = members
            .iter()
            .map(|&i| {
                (
                    &records[i].covariates.as_ref().expect("covariate members")[name],
                    deg(i),
                )
            })
            .collect();
        match values[0].0 {
            CovariateValue::Numeric(_) => {
                let mut xs: Vec<(f64, f64)> = values
                    .iter()
                    .map(|(v, d)| match v {
                        CovariateValue::Numeric(x) => (*x, *d),
                        CovariateValue::Categorical(_) => unreachable!("columns are typed"),
                    })
                    .collect();
                xs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (mut n, mut s, mut q) = (0, 0.0, 0.0);
                for j in 0..xs.len() - 1 {
                    n += 1;
                    s += xs[j].1;
                    q += xs[j].1 * xs[j].1;
                    if xs[j].0 < xs[j + 1].0 {
                        let threshold = 0.5 * (xs[j].0 + xs[j + 1].0);
                        consider(
                            Split::Numeric {
                                covariate: name.clone(),
                                threshold,
                            },
                            (n, s, q),
                        );
                    }
                }
            }
            CovariateValue::Categorical(_) => {
                let mut groups: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
                for (v, d) in &values {
                    if let CovariateValue::Categorical(c) = v {
                        let g = groups.entry(c.as_str()).or_default();
                        g.0 += 1;
                        g.1 += d;
                        g.2 += d * d;
                    }
                }
                for (cat, stats) in groups {
                    consider(
                        Split::Categorical {
                            covariate: name.clone(),
                            category: cat.to_string(),
                        },
                        stats,
                    );
                }
            }
        }
    }
    best
}

/// Fits a greedy regression tree predicting degree from covariates.
pub fn fit_partition(records: &[NodeRecord], max_depth: usize, min_leaf: usize) -> Result<Partition> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    if min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
    }
    let with: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].covariates.is_some())
        .collect();
    let without: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].covariates.is_none())
        .collect();

    fn grow(
        records: &[NodeRecord],
        members: Vec<usize>,
        depth: usize,
        max_depth: usize,
        min_leaf: usize,
        leaves: &mut Vec<Vec<usize>>,
    ) -> TreeNode {
        let split = if depth < max_depth && members.len() >= 2 * min_leaf {
            best_split(records, &members, min_leaf)
        } else {
            None
        };
        match split {
            None => {
                leaves.push(members);
                TreeNode::Leaf(leaves.len() - 1)
            }
            Some((rule, _)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = members.into_iter().partition(|&i| {
                    rule.goes_left(records[i].covariates.as_ref().expect("covariate members"))
                });
                let left = grow(records, l, depth + 1, max_depth, min_leaf, leaves);
                let right = grow(records, r, depth + 1, max_depth, min_leaf, leaves);
                TreeNode::Split {
                    rule,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
        }
    }

    let mut leaves = Vec::new();
    let root = (!with.is_empty()).then(|| grow(records, with, 0, max_depth, min_leaf, &mut leaves));
    let catch_all = (!without.is_empty()).then(|| {
        leaves.push(without);
        leaves.len() - 1
    });
    Ok(Partition {
        root,
        leaves,
        catch_all,
    })
}

/// Per-node estimates: one Pmf per leaf and each node's leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeEstimates {
    pub leaves: Vec<Pmf>,
    pub nodes: BTreeMap<String, usize>,
}

impl NodeEstimates {
    pub fn get(&self, id: &str) -> Option<&Pmf> {
        self.nodes.get(id).map(|&j| &self.leaves[j])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let est: NodeEstimates = serde_json::from_str(&text)?;
        if let Some((id, &j)) = est.nodes.iter().find(|(_, &j)| j >= est.leaves.len()) {
            return Err(Error::InvalidParameter(format!(
                "node {id:?} points at missing leaf {j}"
            )));
        }
        Ok(est)
    }
}

/// Degree histogram with everything at or above `tail` folded into `tail`.
pub fn degree_histogram(degrees: impl IntoIterator<Item = usize>, tail: usize) -> Result<Pmf> {
    let mut counts = vec![0usize; tail + 1];
    let mut total = 0usize;
    for d in degrees {
        counts[d.min(tail)] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyRecords);
    }
    Pmf::new(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// One component per leaf: the leaf's degree histogram (tail-bucketed at
/// `tail`) weighted by leaf size.
pub fn build_population(
    partition: &Partition,
    records: &[NodeRecord],
    tail: usize,
) -> Result<(PopulationModel, NodeEstimates)> {
    let total: usize = partition.leaves.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::EmptyRecords);
    }
    let mut parts = Vec::with_capacity(partition.leaves.len());
    let mut nodes = BTreeMap::new();
    for (j, leaf) in partition.leaves.iter().enumerate() {
        let pmf = degree_histogram(leaf.iter().map(|&i| records[i].degree), tail)?;
        parts.push((leaf.len() as f64 / total as f64, pmf));
        for &i in leaf {
            nodes.insert(records[i].id.clone(), j);
        }
    }
    let leaves = parts.iter().map(|(_, p)| p.clone()).collect();
    Ok((PopulationModel::new(parts)?, NodeEstimates { leaves, nodes }))
}
