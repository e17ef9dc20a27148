//! Maximum-weight up-set of a finite poset, solved as a maximum-weight
//! closure problem by minimum cut (Dinic).
//!
//! For a bilinear objective `Cov(1_U(X_A), 1_V(X_B))` with `U` fixed, the
//! best `V` is the up-set maximising `sum_{y in V} w(y)`; this is what lets
//! the NA checker enumerate up-sets on one block only.

use std::collections::VecDeque;

struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

struct FlowGraph {
    adj: Vec<Vec<Edge>>,
    eps: f64,
}

impl FlowGraph {
    fn new(n: usize, eps: f64) -> Self {
        Self { adj: (0..n).map(|_| Vec::new()).collect(), eps }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, rev: rev_from, cap });
        self.adj[to].push(Edge { to: from, rev: rev_to, cap: 0.0 });
    }

    fn levels(&self, s: usize) -> Vec<i32> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.adj[v] {
                if e.cap > self.eps && level[e.to] < 0 {
                    level[e.to] = level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, v: usize, t: usize, f: f64, level: &[i32], it: &mut [usize]) -> f64 {
        if v == t {
            return f;
        }
        while it[v] < self.adj[v].len() {
            let (to, cap) = {
                let e = &self.adj[v][it[v]];
                (e.to, e.cap)
            };
            if cap > self.eps && level[to] == level[v] + 1 {
                let d = self.augment(to, t, f.min(cap), level, it);
                if d > self.eps {
                    let rev = self.adj[v][it[v]].rev;
                    self.adj[v][it[v]].cap -= d;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            it[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) {
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut it);
                if f <= self.eps {
                    break;
                }
            }
        }
    }
}

/// Precomputed order relation of a poset: `above[v]` lists every `w > v`.
pub struct OrderGraph {
    above: Vec<Vec<usize>>,
}

impl OrderGraph {
    pub fn new(points: &[Vec<f64>]) -> Self {
        let above = points
            .iter()
            .enumerate()
            .map(|(i, v)| {
                points
                    .iter()
                    .enumerate()
                    .filter(|(j, w)| *j != i && dominates(w, v))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Self { above }
    }

    pub fn len(&self) -> usize {
        self.above.len()
    }

    pub fn is_empty(&self) -> bool {
        self.above.is_empty()
    }

    /// Up-set maximising the total weight, with that total. Ties resolve to
    /// the smallest optimal up-set.
    pub fn max_weight_up_set(&self, weights: &[f64]) -> (Vec<bool>, f64) {
        let n = self.above.len();
        let scale = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        if scale == 0.0 {
            return (vec![false; n], 0.0);
        }
        let (s, t) = (n, n + 1);
        let mut g = FlowGraph::new(n + 2, scale * 1e-15);
        for (v, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                g.add_edge(s, v, w);
            } else if w < 0.0 {
                g.add_edge(v, t, -w);
            }
        }
        for (v, ups) in self.above.iter().enumerate() {
            for &u in ups {
                g.add_edge(v, u, f64::INFINITY);
            }
        }
        g.max_flow(s, t);
        let level = g.levels(s);
        let members: Vec<bool> = (0..n).map(|v| level[v] >= 0).collect();
        let total = crate::numeric::compensated_sum(
            members.iter().zip(weights).filter(|(m, _)| **m).map(|(_, w)| *w),
        );
        (members, total)
    }
}

/// Componentwise `w >= v`.
pub fn dominates(w: &[f64], v: &[f64]) -> bool {
    w.iter().zip(v).all(|(a, b)| a >= b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(points: &[Vec<f64>], w: &[f64]) -> f64 {
        let n = points.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let inside = |i: usize| mask >> i & 1 == 1;
            let closed = (0..n).all(|i| {
                !inside(i) || (0..n).all(|j| !dominates(&points[j], &points[i]) || inside(j))
            });
            if closed {
                let v: f64 = (0..n).filter(|&i| inside(i)).map(|i| w[i]).sum();
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn matches_brute_force_on_grid() {
        let points: Vec<Vec<f64>> = (0..3)
            .flat_map(|a| (0..3).map(move |b| vec![a as f64, b as f64]))
            .collect();
        let g = OrderGraph::new(&points);
        let cases = [
            vec![0.1, -0.2, 0.3, -0.1, 0.05, 0.2, -0.3, 0.1, -0.05],
            vec![-1.0; 9],
            vec![0.5, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, -0.1, 0.2],
            vec![-0.3, 0.0, 0.0, 0.0, 0.4, 0.0, 0.0, 0.0, -0.05],
        ];
        for w in cases {
            let (set, val) = g.max_weight_up_set(&w);
            assert!((val - brute(&points, &w)).abs() < 1e-12, "{w:?}");
            // returned set is an up-set
            for i in 0..9 {
                if set[i] {
                    for j in 0..9 {
                        if dominates(&points[j], &points[i]) {
                            assert!(set[j]);
                        }
                    }
                }
            }
        }
    }
}
