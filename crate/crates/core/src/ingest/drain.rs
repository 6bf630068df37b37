//! Fixed-depth prefix tree used to find candidate templates.
//!
//! Level one partitions by token count, the next `depth - 3` levels by the
//! leading tokens (tokens containing digits share the wildcard branch), and
//! leaves hold the candidate templates. A `depth` of 4 therefore routes on the
//! token count plus the first token.

use std::collections::HashMap;

use super::mask::WILDCARD;

#[derive(Clone, Debug, Default)]
struct Node {
    children: HashMap<String, Node>,
    clusters: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct PrefixTree {
    by_length: HashMap<usize, Node>,
    token_layers: usize,
    max_children: usize,
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

fn insert_key(node: &Node, token: &str, max_children: usize) -> String {
    if node.children.contains_key(token) {
        return token.to_string();
    }
    if has_digit(token) {
        return WILDCARD.to_string();
    }
    let n = node.children.len();
    let fits = if node.children.contains_key(WILDCARD) {
        n < max_children
    } else {
        n + 1 < max_children
    };
    if fits {
        token.to_string()
    } else {
        WILDCARD.to_string()
    }
}

impl PrefixTree {
    pub fn new(depth: usize, max_children: usize) -> Self {
        Self {
            by_length: HashMap::new(),
            token_layers: depth.saturating_sub(3),
            max_children,
        }
    }

    /// Places a new template and returns the route (keys taken below the
    /// length node) so the tree can be rebuilt from persisted templates.
    pub fn insert(&mut self, tokens: &[String], cluster: usize) -> Vec<String> {
        let layers = self.token_layers.min(tokens.len());
        let max_children = self.max_children;
        let mut node = self.by_length.entry(tokens.len()).or_default();
        let mut route = Vec::with_capacity(layers);
        for token in &tokens[..layers] {
            let key = insert_key(node, token, max_children);
            node = node.children.entry(key.clone()).or_default();
            route.push(key);
        }
        node.clusters.push(cluster);
        route
    }

    pub fn insert_at(&mut self, len: usize, route: &[String], cluster: usize) {
        let mut node = self.by_length.entry(len).or_default();
        for key in route {
            node = node.children.entry(key.clone()).or_default();
        }
        node.clusters.push(cluster);
    }

    /// Templates sharing a leaf with `tokens`, in creation order.
    pub fn candidates(&self, tokens: &[String]) -> &[usize] {
        let Some(mut node) = self.by_length.get(&tokens.len()) else {
            return &[];
        };
        for token in tokens.iter().take(self.token_layers) {
            match node
                .children
                .get(token)
                .or_else(|| node.children.get(WILDCARD))
            {
                Some(next) => node = next,
                None => return &[],
            }
        }
        &node.clusters
    }
}

/// Fraction of positions where the template holds the same literal token,
/// plus the number of wildcard positions in the template.
pub(crate) fn similarity(template: &[String], tokens: &[String]) -> (f64, usize) {
    debug_assert_eq!(template.len(), tokens.len());
    let mut same = 0usize;
    let mut params = 0usize;
    for (t, s) in template.iter().zip(tokens) {
        if t == WILDCARD {
            params += 1;
        } else if t == s {
            same += 1;
        }
    }
    (same as f64 / template.len().max(1) as f64, params)
}
