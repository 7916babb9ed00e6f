use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A node of a binary classification tree. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: u8,
        n_samples: u32,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Depth of every node, root at 0.
    pub fn node_depths(&self) -> Vec<u32> {
        let mut depth = vec![0u32; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                depth[*left as usize] = depth[i] + 1;
                depth[*right as usize] = depth[i] + 1;
            }
        }
        depth
    }

    pub fn depth(&self) -> u32 {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (u8, u32)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { class, n_samples } => Some((*class, *n_samples)),
            Node::Split { .. } => None,
        })
    }
}

/// Weighted Gini criterion as an exact fraction: a split's score is
/// `(l0^2 + l1^2) / nl + (r0^2 + r1^2) / nr`, and larger is purer.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn node(c: [u64; 2]) -> Self {
        let n = c[0] + c[1];
        Self {
            num: (c[0] * c[0] + c[1] * c[1]) as u128,
            den: n as u128,
        }
    }

    fn split(l: [u64; 2], r: [u64; 2]) -> Self {
        let nl = (l[0] + l[1]) as u128;
        let nr = (r[0] + r[1]) as u128;
        let a = (l[0] * l[0] + l[1] * l[1]) as u128;
        let b = (r[0] * r[0] + r[1] * r[1]) as u128;
        Self {
            num: a * nr + b * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

pub(crate) struct TreeParams {
    pub max_depth: Option<u32>,
    pub min_samples_leaf: u32,
    pub max_features: usize,
}

/// Column-major view of the training features.
pub(crate) struct Columns<'a> {
    pub values: &'a [Vec<f64>],
    pub labels: &'a [u8],
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a * 0.5 + b * 0.5;
    if mid >= b || mid < a {
        a
    } else {
        mid
    }
}

struct BestSplit {
    score: Score,
    feature: usize,
    threshold: f64,
}

fn best_split<R: Rng>(
    data: &Columns<'_>,
    samples: &[u32],
    counts: [u64; 2],
    params: &TreeParams,
    rng: &mut R,
    scratch: &mut Vec<(f64, u8)>,
) -> Option<BestSplit> {
    let d = data.values.len();
    let mut features = index::sample(rng, d, params.max_features).into_vec();
    features.sort_unstable();
    let msl = params.min_samples_leaf as u64;
    let n = samples.len() as u64;
    let parent = Score::node(counts);
    let mut best: Option<BestSplit> = None;

    for f in features {
        let col = &data.values[f];
        scratch.clear();
        scratch.extend(samples.iter().map(|&i| (col[i as usize], data.labels[i as usize])));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u64; 2];
        for i in 0..scratch.len() - 1 {
            left[scratch[i].1 as usize] += 1;
            let (v, next) = (scratch[i].0, scratch[i + 1].0);
            if v == next {
                continue;
            }
            let nl = i as u64 + 1;
            if nl < msl {
                continue;
            }
            if n - nl < msl {
                break;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let score = Score::split(left, right);
            if score.cmp(&parent) != Ordering::Greater {
                continue;
            }
            if best.as_ref().is_none_or(|b| score.cmp(&b.score) == Ordering::Greater) {
                best = Some(BestSplit {
                    score,
                    feature: f,
                    threshold: midpoint(v, next),
                });
            }
        }
    }
    best
}

fn majority(counts: [u64; 2]) -> u8 {
    (counts[1] > counts[0]) as u8
}

/// Grows one CART tree on a multiset of sample indices.
pub(crate) fn grow_tree<R: Rng>(data: &Columns<'_>, samples: Vec<u32>, params: &TreeParams, rng: &mut R) -> Tree {
    let mut nodes = vec![Node::Leaf { class: 0, n_samples: 0 }];
    let mut stack = vec![(0usize, samples, 0u32)];
    let mut scratch = Vec::new();
    while let Some((slot, samples, depth)) = stack.pop() {
        let mut counts = [0u64; 2];
        for &i in &samples {
            counts[data.labels[i as usize] as usize] += 1;
        }
        let leaf = Node::Leaf {
            class: majority(counts),
            n_samples: samples.len() as u32,
        };
        let stop = params.max_depth.is_some_and(|m| depth >= m)
            || counts[0] == 0
            || counts[1] == 0
            || (samples.len() as u64) < 2 * params.min_samples_leaf as u64;
        if stop {
            nodes[slot] = leaf;
            continue;
        }
        let Some(split) = best_split(data, &samples, counts, params, rng, &mut scratch) else {
            nodes[slot] = leaf;
            continue;
        };
        let col = &data.values[split.feature];
        let (left, right): (Vec<u32>, Vec<u32>) = samples.iter().partition(|&&i| col[i as usize] <= split.threshold);
        let li = nodes.len();
        nodes.push(Node::Leaf { class: 0, n_samples: 0 });
        nodes.push(Node::Leaf { class: 0, n_samples: 0 });
        nodes[slot] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: li as u32,
            right: li as u32 + 1,
        };
        stack.push((li + 1, right, depth + 1));
        stack.push((li, left, depth + 1));
    }
    Tree { nodes }
}
