//! Strongly connected components and periods of the support graph of a
//! non-negative matrix.
//!
//! The graph has an edge `λ → κ` whenever `T[κ, λ] > threshold`: mass flows
//! from column to row.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

pub(crate) fn successors(t: &DMatrix<f64>, threshold: f64) -> Vec<Vec<usize>> {
    let n = t.nrows();
    (0..n)
        .map(|from| (0..n).filter(|&to| t[(to, from)] > threshold).collect())
        .collect()
}

/// Tarjan's algorithm, iterative. Components are returned in the order they
/// are completed, which lists every component after all components it can
/// reach; in particular closed components come before anything feeding them.
pub(crate) fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next = 0usize;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, edge)) = frames.last() {
            if edge < adj[v].len() {
                let w = adj[v][edge];
                if let Some(top) = frames.last_mut() {
                    top.1 += 1;
                }
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("stack holds the component");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// Period of the subgraph induced on `members`, which must be strongly
/// connected. A single vertex without a self-loop has period 1 by convention.
pub(crate) fn period_on(adj: &[Vec<usize>], members: &[usize]) -> usize {
    let n = adj.len();
    let mut inside = vec![false; n];
    for &m in members {
        inside[m] = true;
    }
    let mut level = vec![usize::MAX; n];
    let start = members[0];
    level[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !inside[v] {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Level of each member in a BFS from the first member, reduced modulo the
/// period: the cyclic class of every vertex.
pub(crate) fn cyclic_classes(adj: &[Vec<usize>], members: &[usize], period: usize) -> Vec<usize> {
    let n = adj.len();
    let mut inside = vec![false; n];
    for &m in members {
        inside[m] = true;
    }
    let mut level = vec![usize::MAX; n];
    level[members[0]] = 0;
    let mut queue = std::collections::VecDeque::from([members[0]]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if inside[v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    members.iter().map(|&m| level[m] % period).collect()
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Period of an irreducible non-negative matrix: the gcd of the lengths of
/// its directed cycles.
pub fn period_of(block: &DMatrix<f64>, threshold: f64) -> Result<usize> {
    if block.nrows() != block.ncols() || block.nrows() == 0 {
        return invalid("period requires a non-empty square matrix");
    }
    let adj = successors(block, threshold);
    let components = tarjan(&adj);
    if components.len() != 1 {
        return invalid(format!(
            "matrix is reducible ({} strongly connected components)",
            components.len()
        ));
    }
    let members: Vec<usize> = (0..block.nrows()).collect();
    Ok(period_on(&adj, &members))
}
