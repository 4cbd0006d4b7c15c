//! Undirected simple graphs for graph-state preparation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VcemError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    /// Normalized so that `u < v`.
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(VcemError::InvalidGraph("graph has no nodes".into()));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u == v {
                return Err(VcemError::InvalidGraph(format!("self-loop on node {u}")));
            }
            if u >= n || v >= n {
                return Err(VcemError::InvalidGraph(format!("edge ({u}, {v}) outside {n} nodes")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(VcemError::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Graph { n, edges: set })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn line(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    /// `rows x cols` rectangular lattice, node `(r, c)` has index `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, &edges)
    }

    /// Parses `line:N`, `grid:RxC`, or a path to an edge-list file.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(n) = spec.strip_prefix("line:") {
            let n = n
                .parse()
                .map_err(|_| VcemError::Parse(format!("bad node count in {spec:?}")))?;
            return Self::line(n);
        }
        if let Some(dims) = spec.strip_prefix("grid:") {
            let (r, c) = dims
                .split_once(['x', 'X'])
                .ok_or_else(|| VcemError::Parse(format!("expected grid:RxC, got {spec:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| VcemError::Parse(format!("bad grid dimension in {spec:?}")))
            };
            return Self::grid(parse(r)?, parse(c)?);
        }
        let path = Path::new(spec);
        if path.exists() {
            return Self::from_edge_list(&std::fs::read_to_string(path)?);
        }
        Err(VcemError::Parse(format!(
            "graph spec {spec:?} is neither line:N, grid:RxC nor an existing file"
        )))
    }

    /// One `u v` pair per line; `#` starts a comment. The node count is one
    /// more than the largest index, or the value of an `n N` header line.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || VcemError::Parse(format!("edge list line {}: {line:?}", lineno + 1));
            match fields.as_slice() {
                ["n", count] => declared = Some(count.parse::<usize>().map_err(|_| bad())?),
                [u, v] => edges.push((
                    u.parse::<usize>().map_err(|_| bad())?,
                    v.parse::<usize>().map_err(|_| bad())?,
                )),
                _ => return Err(bad()),
            }
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        Self::new(declared.unwrap_or(inferred), &edges)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(VcemError::InvalidGraph("graph has no nodes".into()));
        }
        for &(u, v) in &self.edges {
            if u >= v || v >= self.n {
                return Err(VcemError::InvalidGraph(format!("malformed edge ({u}, {v})")));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(u, v)| {
                if u == i {
                    Some(v)
                } else if v == i {
                    Some(u)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.neighbors(i).len()).max().unwrap_or(0)
    }

    /// First-fit edge colouring in sorted edge order: each colour class has
    /// pairwise disjoint edges.
    pub fn greedy_edge_coloring(&self) -> Vec<Vec<(usize, usize)>> {
        // Each class: its edges and a per-node occupancy mask.
        type Class = (Vec<(usize, usize)>, Vec<bool>);
        let mut classes: Vec<Class> = Vec::new();
        for (u, v) in self.edges() {
            match classes.iter_mut().find(|(_, used)| !used[u] && !used[v]) {
                Some((edges, used)) => {
                    edges.push((u, v));
                    used[u] = true;
                    used[v] = true;
                }
                None => {
                    let mut used = vec![false; self.n];
                    used[u] = true;
                    used[v] = true;
                    classes.push((vec![(u, v)], used));
                }
            }
        }
        classes.into_iter().map(|(edges, _)| edges).collect()
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges=[", self.n)?;
        for (i, (u, v)) in self.edges().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{u}-{v}")?;
        }
        f.write_str("])")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_graphs() {
        assert!(Graph::new(2, &[(0, 0)]).is_err());
        assert!(Graph::new(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, &[(0, 2)]).is_err());
        assert!(Graph::new(0, &[]).is_err());
    }

    #[test]
    fn grid_edge_count() {
        let g = Graph::grid(2, 5).unwrap();
        assert_eq!(g.num_nodes(), 10);
        assert_eq!(g.num_edges(), 13);
        assert_eq!(g.max_degree(), 3);
    }

    #[test]
    fn specs_parse() {
        assert_eq!(Graph::from_spec("line:4").unwrap(), Graph::line(4).unwrap());
        assert_eq!(Graph::from_spec("grid:2x5").unwrap(), Graph::grid(2, 5).unwrap());
        assert!(Graph::from_spec("ring:5").is_err());
        assert!(Graph::from_spec("grid:2by5").is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::from_edge_list("# triangle\n0 1\n1 2\n2 0\n").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 3);
        let g = Graph::from_edge_list("n 5\n0 1\n").unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert!(Graph::from_edge_list("0 1 2\n").is_err());
    }

    #[test]
    fn coloring_classes_are_disjoint_matchings() {
        for g in [Graph::grid(2, 5).unwrap(), Graph::grid(3, 3).unwrap(), Graph::line(7).unwrap()] {
            let classes = g.greedy_edge_coloring();
            assert_eq!(classes.iter().map(Vec::len).sum::<usize>(), g.num_edges());
            for class in &classes {
                let mut seen = std::collections::HashSet::new();
                for &(u, v) in class {
                    assert!(seen.insert(u) && seen.insert(v));
                }
            }
        }
        assert_eq!(Graph::line(7).unwrap().greedy_edge_coloring().len(), 2);
        assert!(Graph::grid(2, 5).unwrap().greedy_edge_coloring().len() <= 4);
    }
}
