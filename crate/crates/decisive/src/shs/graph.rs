use super::HybridSystem;

/// A system satisfies the cycle-reset property iff every simple cycle of the
/// location multigraph (self-loops included) contains a strongly reset edge
/// — equivalently, the subgraph of non-strong edges is acyclic.
pub fn is_cycle_reset(h: &HybridSystem) -> bool {
    cycle_reset_witness(h).is_none()
}

/// Returns a cycle of non-strong edges (by name, in order) when one exists.
pub fn cycle_reset_witness(h: &HybridSystem) -> Option<Vec<String>> {
    let n = h.locations.len();
    // Adjacency over non-strong edges, remembering edge indices.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (ei, e) in h.edges.iter().enumerate() {
        if !e.strong {
            adj[e.source].push((e.target, ei));
        }
    }
    // Iterative DFS with three colors; the edge stack reconstructs the cycle.
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; n];
    for start in 0..n {
        if color[start] != Color::White {
            continue;
        }
        // Frame: (node, next edge position, incoming edge index).
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        let mut path_edges: Vec<usize> = Vec::new();
        color[start] = Color::Gray;
        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            if *pos < adj[v].len() {
                let (w, ei) = adj[v][*pos];
                *pos += 1;
                match color[w] {
                    Color::Gray => {
                        // Cycle: the suffix of the path from w, plus (v → w).
                        let mut cycle = Vec::new();
                        let mut found = w == v;
                        for (frame_idx, &(node, _)) in frames.iter().enumerate() {
                            if node == w {
                                found = true;
                                cycle = path_edges[frame_idx..].to_vec();
                                break;
                            }
                        }
                        debug_assert!(found);
                        cycle.push(ei);
                        return Some(
                            cycle.into_iter().map(|i| h.edges[i].name.clone()).collect(),
                        );
                    }
                    Color::White => {
                        color[w] = Color::Gray;
                        path_edges.push(ei);
                        frames.push((w, 0));
                    }
                    Color::Black => {}
                }
            } else {
                color[v] = Color::Black;
                frames.pop();
                path_edges.pop();
            }
        }
    }
    None
}

/// Length of the longest path in the non-strong subgraph, counting edges.
/// `None` when that subgraph is cyclic (the system is not cycle-reset).
/// This is the bound on path segments between strong resets.
pub fn longest_nonstrong_path(h: &HybridSystem) -> Option<usize> {
    if !is_cycle_reset(h) {
        return None;
    }
    let n = h.locations.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &h.edges {
        if !e.strong {
            adj[e.source].push(e.target);
        }
    }
    // Longest path in a DAG by memoized depth-first search.
    fn depth(v: usize, adj: &[Vec<usize>], memo: &mut [Option<usize>]) -> usize {
        if let Some(d) = memo[v] {
            return d;
        }
        let d = adj[v]
            .iter()
            .map(|&w| 1 + depth(w, adj, memo))
            .max()
            .unwrap_or(0);
        memo[v] = Some(d);
        d
    }
    let mut memo = vec![None; n];
    Some((0..n).map(|v| depth(v, &adj, &mut memo)).max().unwrap_or(0))
}
