//! Full and clustered dependence structure detection.
//!
//! Detected dependencies become nodes of a hypergraph: variable nodes for the
//! input groups, dependency nodes for every flagged tuple and, in clustered
//! mode, cluster nodes for merged groups of variables.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::centering::{cluster_distance_matrix, double_center, psi_for, scaled_matrices, CenteredMatrix, Scaling};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::independence::{resampling_p_value, CONSERVATIVE_ALPHA_MAX};
use crate::measures::{entry_mean, product};
use crate::psi::Psi;
use crate::rng::RngState;
use crate::special::{chi2_1_sf, holm_adjust};

/// Beyond this many variables full detection gets expensive.
pub const FULL_COST_WARNING: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeKind {
    Variable,
    Cluster,
    Dependency,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub label: String,
    /// Sorted variable indices (0-based).
    pub members: Vec<usize>,
    pub order: Option<usize>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

/// Undirected edge. Dependency and cluster nodes store their links with
/// themselves as `from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    Full,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum Decision {
    Conservative { alpha: f64 },
    Resampling { alpha: f64, replicates: usize },
    Consistent { beta: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeLabel {
    #[default]
    Statistic,
    Order,
    PValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionOptions {
    pub mode: Mode,
    pub decision: Decision,
    pub label: NodeLabel,
}

impl DetectionOptions {
    pub fn new(mode: Mode, decision: Decision) -> Self {
        DetectionOptions { mode, decision, label: NodeLabel::Statistic }
    }

    pub fn validate(&self) -> Result<()> {
        match self.decision {
            Decision::Conservative { alpha } if !(alpha > 0.0 && alpha <= CONSERVATIVE_ALPHA_MAX) => {
                Err(Error::usage(format!(
                    "conservative detection needs alpha in (0, {CONSERVATIVE_ALPHA_MAX}], got {alpha}"
                )))
            }
            Decision::Resampling { alpha, replicates } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    Err(Error::usage(format!("alpha must lie in (0, 1), got {alpha}")))
                } else if replicates == 0 {
                    Err(Error::usage("resampling needs at least one replicate"))
                } else {
                    Ok(())
                }
            }
            Decision::Consistent { beta, c } if !(beta > 0.0 && beta < 1.0 && c > 0.0) => Err(Error::usage(
                format!("consistent detection needs beta in (0, 1) and C > 0, got beta = {beta}, C = {c}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraphMetadata {
    pub options: DetectionOptions,
    pub samples: usize,
    pub variables: usize,
    pub seed: Option<u64>,
    /// Number of tuple tests performed.
    pub tests: usize,
    /// Bound on the probability of any false detection (consistent decisions).
    pub type_i_bound: Option<f64>,
    /// Final clusters in clustered mode, singletons included.
    pub clusters: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DependencyGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub metadata: GraphMetadata,
}

impl DependencyGraph {
    pub fn dependency_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Dependency)
    }

    /// Nodes linked from `id`.
    pub fn targets(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.from == id).map(|e| e.to).collect()
    }
}

/// `1 - (1 - (1 - F(N^(1 - beta) C)))^k`: chance of at least one false
/// detection among `k` tests with the consistent rejection level.
pub fn type_i_bound(k: usize, samples: usize, beta: f64, c: f64) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let level = libm::pow(samples as f64, 1.0 - beta) * c;
    let single = chi2_1_sf(level.max(0.0))?;
    Ok(-libm::expm1(k as f64 * libm::log1p(-single)))
}

struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Graph {
    fn with_variables(data: &Dataset) -> Self {
        let nodes = (0..data.variables())
            .map(|i| Node {
                id: i,
                kind: NodeKind::Variable,
                label: data.names()[i].clone(),
                members: vec![i],
                order: None,
                statistic: None,
                p_value: None,
            })
            .collect();
        Graph { nodes, edges: Vec::new() }
    }

    fn add(&mut self, kind: NodeKind, label: String, members: Vec<usize>, targets: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, kind, label, members, order: None, statistic: None, p_value: None });
        self.edges.extend(targets.iter().map(|&to| Edge { from: id, to }));
        id
    }
}

/// Tuple test outcome before multiple-testing adjustment.
struct Tested {
    statistic: f64,
    p_value: Option<f64>,
}

struct Tester<'a> {
    decision: Decision,
    rng: &'a mut RngState,
    samples: usize,
    tests: usize,
}

impl Tester<'_> {
    fn tuple_statistic(&self, mats: &[&CenteredMatrix], perms: Option<&[Vec<usize>]>) -> f64 {
        (self.samples as f64 * entry_mean(mats, perms, product)).max(0.0)
    }

    fn test(&mut self, mats: &[&CenteredMatrix]) -> Result<Tested> {
        self.tests += 1;
        let statistic = self.tuple_statistic(mats, None);
        let p_value = match self.decision {
            Decision::Conservative { .. } => Some(chi2_1_sf(statistic)?),
            Decision::Resampling { replicates, .. } => {
                let mut perms: Vec<Vec<usize>> = vec![(0..self.samples).collect(); mats.len()];
                let mut reps = Vec::with_capacity(replicates);
                for _ in 0..replicates {
                    for p in perms.iter_mut() {
                        for (slot, v) in p.iter_mut().enumerate() {
                            *v = slot;
                        }
                        self.rng.shuffle(p);
                    }
                    reps.push(self.tuple_statistic(mats, Some(&perms)));
                }
                Some(resampling_p_value(statistic, &reps))
            }
            Decision::Consistent { .. } => None,
        };
        Ok(Tested { statistic, p_value })
    }

    /// Flags per batch: Holm-adjusted p-values against alpha, or the
    /// consistent rejection level.
    fn flags(&self, batch: &[Tested]) -> Result<Vec<(bool, Option<f64>)>> {
        match self.decision {
            Decision::Conservative { alpha } | Decision::Resampling { alpha, .. } => {
                let p: Vec<f64> = batch.iter().map(|t| t.p_value.unwrap_or(1.0)).collect();
                let adjusted = holm_adjust(&p);
                Ok(adjusted.iter().map(|&a| (a <= alpha, Some(a))).collect())
            }
            Decision::Consistent { beta, c } => {
                let level = libm::pow(self.samples as f64, 1.0 - beta) * c;
                Ok(batch.iter().map(|t| (t.statistic > level, None)).collect())
            }
        }
    }
}

fn format_label(label: NodeLabel, order: usize, statistic: f64, p: Option<f64>) -> String {
    match label {
        NodeLabel::Statistic => format!("{statistic:.1}"),
        NodeLabel::Order => order.to_string(),
        NodeLabel::PValue => match p {
            Some(p) => format!("{p:.3e}"),
            None => "-".to_string(),
        },
    }
}

/// Calls `visit` with every `m`-subset of `0..n` in lexicographic order.
fn subsets(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        visit(&idx);
        let mut i = m;
        while i > 0 && idx[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for t in i..m {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn check(data: &Dataset, options: &DetectionOptions) -> Result<()> {
    options.validate()?;
    if data.variables() < 2 {
        return Err(Error::usage("structure detection needs at least 2 variables"));
    }
    Ok(())
}

fn metadata(data: &Dataset, options: &DetectionOptions, rng: &RngState, tests: usize) -> Result<GraphMetadata> {
    let type_i_bound = match options.decision {
        Decision::Consistent { beta, c } => Some(type_i_bound(tests, data.samples(), beta, c)?),
        _ => None,
    };
    Ok(GraphMetadata {
        options: *options,
        samples: data.samples(),
        variables: data.variables(),
        seed: Some(rng.seed()),
        tests,
        type_i_bound,
        clusters: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Tests, for `m = 2, ..., n`, every `m`-tuple of variables none of whose
/// proper sub-tuples was flagged; flagged tuples become dependency nodes.
pub fn detect_full(data: &Dataset, psis: &[Psi], options: &DetectionOptions, rng: &mut RngState) -> Result<DependencyGraph> {
    check(data, options)?;
    let n = data.variables();
    let mats = scaled_matrices(data, psis, Scaling::Normalized)?;
    let mut graph = Graph::with_variables(data);
    let mut flagged: Vec<Vec<usize>> = Vec::new();
    let mut tester = Tester { decision: options.decision, rng, samples: data.samples(), tests: 0 };
    for m in 2..=n {
        let mut tuples = Vec::new();
        subsets(n, m, |t| {
            if !flagged.iter().any(|f| f.iter().all(|v| t.contains(v))) {
                tuples.push(t.to_vec());
            }
        });
        if tuples.is_empty() {
            continue;
        }
        let mut batch = Vec::with_capacity(tuples.len());
        for t in &tuples {
            let refs: Vec<&CenteredMatrix> = t.iter().map(|&i| &mats[i]).collect();
            batch.push(tester.test(&refs)?);
        }
        for ((tuple, tested), (flag, adjusted)) in tuples.into_iter().zip(&batch).zip(tester.flags(&batch)?) {
            if !flag {
                continue;
            }
            let p = adjusted.or(tested.p_value);
            let label = format_label(options.label, m, tested.statistic, p);
            let id = graph.add(NodeKind::Dependency, label, tuple.clone(), &tuple);
            let node = &mut graph.nodes[id];
            node.order = Some(m);
            node.statistic = Some(tested.statistic);
            node.p_value = p;
            flagged.push(tuple);
        }
    }
    let tests = tester.tests;
    let mut meta = metadata(data, options, tester.rng, tests)?;
    if n > FULL_COST_WARNING {
        meta.warnings.push(format!(
            "full detection over {n} variables may test up to 2^{n} tuples; consider clustered mode"
        ));
    }
    Ok(DependencyGraph { nodes: graph.nodes, edges: graph.edges, metadata: meta })
}

struct Cluster {
    /// Sorted group indices.
    members: Vec<usize>,
    node: usize,
    matrix: CenteredMatrix,
}

fn cluster_matrix(data: &Dataset, psis: &[Psi], members: &[usize]) -> Result<CenteredMatrix> {
    // A cluster inherits the distance function of its first member.
    let psi = psi_for(psis, members[0]);
    double_center(&cluster_distance_matrix(data, members, &psi)?).scaled(Scaling::Normalized)
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Iterative detection that merges dependent variables into clusters and
/// retests clusters as single multivariate variables. After every batch
/// with detections the search restarts at pairs of the new clusters;
/// tuples of unchanged clusters are never tested twice.
pub fn detect_clustered(
    data: &Dataset,
    psis: &[Psi],
    options: &DetectionOptions,
    rng: &mut RngState,
) -> Result<DependencyGraph> {
    check(data, options)?;
    crate::centering::check_psis(psis, data.variables())?;
    let mut graph = Graph::with_variables(data);
    let mut clusters: Vec<Cluster> = (0..data.variables())
        .map(|i| Ok(Cluster { members: vec![i], node: i, matrix: cluster_matrix(data, psis, &[i])? }))
        .collect::<Result<_>>()?;
    let mut registry: BTreeSet<Vec<Vec<usize>>> = BTreeSet::new();
    let mut tester = Tester { decision: options.decision, rng, samples: data.samples(), tests: 0 };
    let mut m = 2;
    while m <= clusters.len() {
        let mut tuples = Vec::new();
        subsets(clusters.len(), m, |t| {
            let key: Vec<Vec<usize>> = t.iter().map(|&c| clusters[c].members.clone()).collect();
            if registry.insert(key) {
                tuples.push(t.to_vec());
            }
        });
        let mut batch = Vec::with_capacity(tuples.len());
        for t in &tuples {
            let refs: Vec<&CenteredMatrix> = t.iter().map(|&c| &clusters[c].matrix).collect();
            batch.push(tester.test(&refs)?);
        }
        let flags = tester.flags(&batch)?;
        let mut parent: Vec<usize> = (0..clusters.len()).collect();
        let mut created: Vec<(usize, usize)> = Vec::new();
        for ((tuple, tested), (flag, adjusted)) in tuples.iter().zip(&batch).zip(flags) {
            if !flag {
                continue;
            }
            let mut members: Vec<usize> = tuple.iter().flat_map(|&c| clusters[c].members.iter().copied()).collect();
            members.sort_unstable();
            let targets: Vec<usize> = tuple.iter().map(|&c| clusters[c].node).collect();
            let p = adjusted.or(tested.p_value);
            let label = format_label(options.label, m, tested.statistic, p);
            let id = graph.add(NodeKind::Dependency, label, members, &targets);
            let node = &mut graph.nodes[id];
            node.order = Some(m);
            node.statistic = Some(tested.statistic);
            node.p_value = p;
            for &c in &tuple[1..] {
                let (a, b) = (find(&mut parent, tuple[0]), find(&mut parent, c));
                parent[b] = a;
            }
            created.push((tuple[0], id));
        }
        if created.is_empty() {
            m += 1;
            continue;
        }
        // Merge connected components into new clusters.
        let mut roots: Vec<usize> = Vec::new();
        let mut grouped: Vec<Vec<usize>> = Vec::new();
        for c in 0..clusters.len() {
            let r = find(&mut parent, c);
            match roots.iter().position(|&x| x == r) {
                Some(pos) => grouped[pos].push(c),
                None => {
                    roots.push(r);
                    grouped.push(vec![c]);
                }
            }
        }
        let mut next = Vec::with_capacity(grouped.len());
        let mut old: Vec<Option<Cluster>> = clusters.into_iter().map(Some).collect();
        for (root, group) in roots.into_iter().zip(grouped) {
            if group.len() == 1 {
                next.push(old[group[0]].take().expect("cluster used once"));
                continue;
            }
            let mut members: Vec<usize> = group.iter().flat_map(|&c| old[c].as_ref().unwrap().members.clone()).collect();
            members.sort_unstable();
            let deps: Vec<usize> = created
                .iter()
                .filter(|&&(first, _)| find(&mut parent, first) == root)
                .map(|&(_, id)| id)
                .collect();
            let names: Vec<&str> = members.iter().map(|&v| data.names()[v].as_str()).collect();
            let node = graph.add(NodeKind::Cluster, names.join(","), members.clone(), &deps);
            let matrix = cluster_matrix(data, psis, &members)?;
            next.push(Cluster { members, node, matrix });
        }
        next.sort_by(|a, b| a.members.cmp(&b.members));
        clusters = next;
        m = 2;
    }
    let tests = tester.tests;
    let mut meta = metadata(data, options, tester.rng, tests)?;
    meta.clusters = clusters.into_iter().map(|c| c.members).collect();
    Ok(DependencyGraph { nodes: graph.nodes, edges: graph.edges, metadata: meta })
}

/// Dispatches on the configured mode.
pub fn detect(data: &Dataset, psis: &[Psi], options: &DetectionOptions, rng: &mut RngState) -> Result<DependencyGraph> {
    match options.mode {
        Mode::Full => detect_full(data, psis, options, rng),
        Mode::Clustered => detect_clustered(data, psis, options, rng),
    }
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: circled variable nodes, unframed dependency nodes
/// and boxed cluster nodes.
pub fn to_dot(graph: &DependencyGraph) -> String {
    let mut out = String::from("graph dependence {\n");
    for node in &graph.nodes {
        let shape = match node.kind {
            NodeKind::Variable => "circle",
            NodeKind::Dependency => "none",
            NodeKind::Cluster => "box",
        };
        out.push_str(&format!("  n{} [shape={shape}, label=\"{}\"];\n", node.id, dot_escape(&node.label)));
    }
    for e in &graph.edges {
        out.push_str(&format!("  n{} -- n{};\n", e.from, e.to));
    }
    out.push_str("}\n");
    out
}
