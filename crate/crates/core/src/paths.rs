//! Unweighted shortest paths over the undirected view.

use std::collections::VecDeque;

use crate::kg::{EntityId, KnowledgeGraph};

/// Hop count, `None` when unreachable.
pub type Hops = Option<u32>;

/// Full single-source BFS.
pub fn bfs_distances(kg: &KnowledgeGraph, src: EntityId) -> Vec<Hops> {
    let mut dist = vec![None; kg.num_entities()];
    let mut queue = VecDeque::new();
    dist[src.index()] = Some(0);
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()].unwrap();
        for &v in kg.neighbors_unchecked(u) {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// BFS from `src` that stops once every entity in `targets` has been
/// settled. Returns distances aligned with `targets`.
pub fn bfs_to_targets(kg: &KnowledgeGraph, src: EntityId, targets: &[EntityId]) -> Vec<Hops> {
    let n = kg.num_entities();
    let mut wanted = vec![false; n];
    let mut remaining = 0usize;
    for &t in targets {
        if !wanted[t.index()] {
            wanted[t.index()] = true;
            remaining += 1;
        }
    }
    let mut dist: Vec<Hops> = vec![None; n];
    let mut queue = VecDeque::new();
    dist[src.index()] = Some(0);
    if wanted[src.index()] {
        remaining -= 1;
    }
    queue.push_back(src);
    'outer: while let Some(u) = queue.pop_front() {
        if remaining == 0 {
            break;
        }
        let du = dist[u.index()].unwrap();
        for &v in kg.neighbors_unchecked(u) {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(du + 1);
                if wanted[v.index()] {
                    remaining -= 1;
                    if remaining == 0 {
                        break 'outer;
                    }
                }
                queue.push_back(v);
            }
        }
    }
    targets.iter().map(|t| dist[t.index()]).collect()
}

/// Connected-component label per entity, labels dense from 0.
pub fn components(kg: &KnowledgeGraph) -> Vec<u32> {
    let n = kg.num_entities();
    let mut comp = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for s in 0..n {
        if comp[s] != u32::MAX {
            continue;
        }
        comp[s] = next;
        stack.push(EntityId(s as u32));
        while let Some(u) = stack.pop() {
            for &v in kg.neighbors_unchecked(u) {
                if comp[v.index()] == u32::MAX {
                    comp[v.index()] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}
