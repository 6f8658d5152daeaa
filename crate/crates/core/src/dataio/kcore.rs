use std::collections::{HashMap, VecDeque};

use crate::dataio::raw::Interaction;
use crate::error::{Error, Result};

/// Iteratively drops users and items with fewer than `min_count`
/// interactions until every survivor meets the bound. The k-core is unique,
/// so the result does not depend on input order; it is returned sorted.
///
/// An empty fixed point is not an error; callers decide whether to warn.
pub fn kcore_filter(records: &[Interaction], min_count: usize) -> Result<Vec<Interaction>> {
    if min_count == 0 {
        return Err(Error::Config("kcore min_count must be >= 1".into()));
    }
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut items: HashMap<&str, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(records.len());
    for r in records {
        let n_users = users.len();
        let u = *users.entry(r.user.as_str()).or_insert(n_users);
        let n_items = items.len();
        let i = *items.entry(r.item.as_str()).or_insert(n_items);
        edges.push((u, i));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut user_adj: Vec<Vec<usize>> = vec![Vec::new(); users.len()];
    let mut item_adj: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
    for (e, &(u, i)) in edges.iter().enumerate() {
        user_adj[u].push(e);
        item_adj[i].push(e);
    }
    let mut user_deg: Vec<usize> = user_adj.iter().map(Vec::len).collect();
    let mut item_deg: Vec<usize> = item_adj.iter().map(Vec::len).collect();
    let mut user_gone = vec![false; users.len()];
    let mut item_gone = vec![false; items.len()];
    let mut edge_gone = vec![false; edges.len()];

    enum Node {
        User(usize),
        Item(usize),
    }
    let mut queue: VecDeque<Node> = VecDeque::new();
    for (u, &d) in user_deg.iter().enumerate() {
        if d < min_count {
            queue.push_back(Node::User(u));
        }
    }
    for (i, &d) in item_deg.iter().enumerate() {
        if d < min_count {
            queue.push_back(Node::Item(i));
        }
    }

    while let Some(node) = queue.pop_front() {
        match node {
            Node::User(u) => {
                if user_gone[u] {
                    continue;
                }
                user_gone[u] = true;
                for &e in &user_adj[u] {
                    if edge_gone[e] {
                        continue;
                    }
                    edge_gone[e] = true;
                    let i = edges[e].1;
                    item_deg[i] -= 1;
                    if !item_gone[i] && item_deg[i] < min_count {
                        queue.push_back(Node::Item(i));
                    }
                }
            }
            Node::Item(i) => {
                if item_gone[i] {
                    continue;
                }
                item_gone[i] = true;
                for &e in &item_adj[i] {
                    if edge_gone[e] {
                        continue;
                    }
                    edge_gone[e] = true;
                    let u = edges[e].0;
                    user_deg[u] -= 1;
                    if !user_gone[u] && user_deg[u] < min_count {
                        queue.push_back(Node::User(u));
                    }
                }
            }
        }
    }

    let user_tokens: Vec<&str> = invert(&users);
    let item_tokens: Vec<&str> = invert(&items);
    let mut out: Vec<Interaction> = edges
        .iter()
        .zip(&edge_gone)
        .filter(|(_, &gone)| !gone)
        .map(|(&(u, i), _)| Interaction::new(user_tokens[u], item_tokens[i]))
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn invert<'a>(index: &HashMap<&'a str, usize>) -> Vec<&'a str> {
    let mut v = vec![""; index.len()];
    for (&k, &i) in index {
        v[i] = k;
    }
    v
}
