use std::collections::{BTreeSet, HashMap};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::model::Challenge;

/// Undirected graph of confirmed duplicate pairs. Node order is the
/// processing order for greedy clustering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<BTreeSet<usize>>,
}

impl MatchGraph {
    pub fn new(nodes: impl IntoIterator<Item = String>) -> Self {
        let mut g = Self::default();
        for id in nodes {
            if !g.index.contains_key(&id) {
                g.index.insert(id.clone(), g.nodes.len());
                g.nodes.push(id);
                g.adj.push(BTreeSet::new());
            }
        }
        g
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an undirected edge. Self-loops and unknown ids are ignored;
    /// returns whether an edge was added.
    pub fn add_edge(&mut self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) if i != j => {
                let new = self.adj[i].insert(j);
                self.adj[j].insert(i);
                new
            }
            _ => false,
        }
    }

    pub fn add_edge_idx(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[i].insert(j);
            self.adj[j].insert(i);
        }
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.adj[i].contains(&j),
            _ => false,
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as id pairs with the smaller id first, sorted.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| {
                ns.iter().filter(move |&&j| i < j).map(move |&j| {
                    let (a, b) = (&self.nodes[i], &self.nodes[j]);
                    if a <= b {
                        (a.clone(), b.clone())
                    } else {
                        (b.clone(), a.clone())
                    }
                })
            })
            .collect();
        out.sort();
        out
    }
}

/// Greedy correlation clustering over `graph` in node order.
///
/// Each node joins the existing cluster where it has the most neighbors,
/// provided it is adjacent to at least half of that cluster's members;
/// otherwise it opens a new cluster. Ties go to the earliest cluster.
/// Returns clusters of node indices, in creation order, members in
/// insertion order.
pub fn cluster_greedy_idx(graph: &MatchGraph) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut cluster_of: Vec<Option<usize>> = vec![None; graph.len()];
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for node in 0..graph.len() {
        counts.clear();
        for nb in graph.neighbors(node) {
            if let Some(c) = cluster_of[nb] {
                *counts.entry(c).or_default() += 1;
            }
        }
        let best = counts
            .iter()
            .filter(|(&c, &m)| 2 * m >= clusters[c].len())
            .max_by(|(ca, ma), (cb, mb)| ma.cmp(mb).then(cb.cmp(ca)))
            .map(|(&c, _)| c);
        let target = best.unwrap_or_else(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[target].push(node);
        cluster_of[node] = Some(target);
    }
    clusters
}

/// Connected components, ordered by smallest member index, members
/// ascending.
pub fn cluster_transitive_idx(graph: &MatchGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::<usize>::new(graph.len());
    for i in 0..graph.len() {
        for j in graph.neighbors(i) {
            uf.union(i, j);
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..graph.len() {
        let root = uf.find(i);
        let slot = *by_root.entry(root).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(i);
    }
    clusters
}

fn to_ids(graph: &MatchGraph, clusters: Vec<Vec<usize>>) -> Vec<Vec<String>> {
    clusters
        .into_iter()
        .map(|c| c.into_iter().map(|i| graph.nodes[i].clone()).collect())
        .collect()
}

pub fn cluster_greedy(graph: &MatchGraph) -> Vec<Vec<String>> {
    to_ids(graph, cluster_greedy_idx(graph))
}

pub fn cluster_transitive(graph: &MatchGraph) -> Vec<Vec<String>> {
    to_ids(graph, cluster_transitive_idx(graph))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub member_ids: Vec<String>,
    pub representative_id: String,
}

/// The member with the longest description (in chars); ties go to the
/// smallest id.
pub fn representative<'a>(members: impl IntoIterator<Item = &'a Challenge>) -> Option<&'a Challenge> {
    members.into_iter().max_by(|a, b| {
        a.description
            .chars()
            .count()
            .cmp(&b.description.chars().count())
            .then_with(|| b.id.cmp(&a.id))
    })
}

/// Picks one challenge per cluster. Output is ordered by representative id.
/// Panics if a cluster names an id missing from `challenges`.
pub fn pick_representatives(
    groups: &[Vec<String>],
    challenges: &[Challenge],
) -> (Vec<Cluster>, Vec<Challenge>) {
    let by_id: HashMap<&str, &Challenge> = challenges.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut clusters: Vec<Cluster> = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let rep = representative(g.iter().map(|id| {
                *by_id
                    .get(id.as_str())
                    .unwrap_or_else(|| panic!("cluster member {id} is not a known challenge"))
            }))
            .expect("cluster is nonempty");
            Cluster {
                member_ids: g.clone(),
                representative_id: rep.id.clone(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.representative_id.cmp(&b.representative_id));
    let reps = clusters
        .iter()
        .map(|c| by_id[c.representative_id.as_str()].clone())
        .collect();
    (clusters, reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CreatedFrom;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> MatchGraph {
        let mut g = MatchGraph::new((0..n).map(|i| ((b'A' + i as u8) as char).to_string()));
        for &(a, b) in edges {
            g.add_edge_idx(a, b);
        }
        g
    }

    #[test]
    fn path_of_three_is_one_cluster() {
        assert_eq!(cluster_greedy(&graph(3, &[(0, 1), (1, 2)])), vec![vec!["A", "B", "C"]]);
    }

    #[test]
    fn path_of_four_splits() {
        assert_eq!(
            cluster_greedy(&graph(4, &[(0, 1), (1, 2), (2, 3)])),
            vec![vec!["A", "B", "C"], vec!["D"]]
        );
    }

    #[test]
    fn no_edges_gives_singletons() {
        assert_eq!(cluster_greedy_idx(&graph(3, &[])), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(cluster_transitive_idx(&graph(3, &[])), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn chain_of_ten() {
        let edges: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).collect();
        let g = graph(10, &edges);
        assert_eq!(cluster_transitive_idx(&g), vec![(0..10).collect::<Vec<_>>()]);
        // Hand trace: each triple closes, the next node matches 1 of 3.
        assert_eq!(
            cluster_greedy_idx(&g),
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9]]
        );
    }

    #[test]
    fn tie_goes_to_earliest_cluster() {
        // A and B unconnected; C matches both singletons equally.
        assert_eq!(
            cluster_greedy_idx(&graph(3, &[(0, 2), (1, 2)])),
            vec![vec![0, 2], vec![1]]
        );
    }

    #[test]
    fn self_loops_and_unknown_ids_ignored() {
        let mut g = graph(2, &[]);
        assert!(!g.add_edge("A", "A"));
        assert!(!g.add_edge("A", "Z"));
        assert!(g.add_edge("A", "B"));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges(), vec![("A".to_string(), "B".to_string())]);
    }

    fn ch(id: &str, desc: &str) -> Challenge {
        Challenge {
            id: id.into(),
            title: "t".into(),
            description: desc.into(),
            wish: "w".into(),
            daily_action: "d".into(),
            source_url: "https://a.com".into(),
            created_from: CreatedFrom::Fixture,
        }
    }

    #[test]
    fn representative_rule() {
        let cs = vec![ch("c0", &"x".repeat(10)), ch("c1", &"y".repeat(40)), ch("c2", "z"), ch("c3", "q")];
        let (clusters, reps) = pick_representatives(
            &[vec!["c0".into(), "c1".into()], vec!["c3".into(), "c2".into()]],
            &cs,
        );
        assert_eq!(clusters[0].representative_id, "c1");
        assert_eq!(clusters[1].representative_id, "c2");
        assert_eq!(reps.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), vec!["c1", "c2"]);
        let (_, single) = pick_representatives(&[vec!["c3".into()]], &cs);
        assert_eq!(single[0].id, "c3");
    }

    fn is_partition(n: usize, clusters: &[Vec<usize>]) -> bool {
        let mut seen = vec![false; n];
        for c in clusters {
            if c.is_empty() {
                return false;
            }
            for &i in c {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return false;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn random_graph() -> impl Strategy<Value = MatchGraph> {
        (1usize..30).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |edges| graph_n(n, &edges))
        })
    }

    fn graph_n(n: usize, edges: &[(usize, usize)]) -> MatchGraph {
        let mut g = MatchGraph::new((0..n).map(|i| format!("n{i:03}")));
        for &(a, b) in edges {
            g.add_edge_idx(a, b);
        }
        g
    }

    proptest! {
        #[test]
        fn both_clusterings_partition(g in random_graph()) {
            prop_assert!(is_partition(g.len(), &cluster_greedy_idx(&g)));
            prop_assert!(is_partition(g.len(), &cluster_transitive_idx(&g)));
        }

        #[test]
        fn greedy_clusters_refine_components(g in random_graph()) {
            let comp = cluster_transitive_idx(&g);
            let mut comp_of = vec![0; g.len()];
            for (ci, c) in comp.iter().enumerate() {
                for &i in c { comp_of[i] = ci; }
            }
            for c in cluster_greedy_idx(&g) {
                prop_assert!(c.iter().all(|&i| comp_of[i] == comp_of[c[0]]));
            }
        }
    }
}
