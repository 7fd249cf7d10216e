//! Exact binary labeling of a submodular pairwise energy by s-t min-cut.

use std::collections::VecDeque;

const EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

/// Dinic max-flow on `f64` capacities.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    level: Vec<usize>,
    cursor: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            level: vec![usize::MAX; n],
            cursor: vec![0; n],
        }
    }

    /// Adds `u -> v` with capacity `cap` and `v -> u` with `rev_cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
        let ru = self.adj[v].len();
        let rv = self.adj[u].len();
        self.adj[u].push(Arc { to: v, cap, rev: ru });
        self.adj[v].push(Arc {
            to: u,
            cap: rev_cap,
            rev: rv,
        });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(usize::MAX);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.adj[u] {
                if a.cap > EPS && self.level[a.to] == usize::MAX {
                    self.level[a.to] = self.level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        self.level[t] != usize::MAX
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.cursor[u] < self.adj[u].len() {
            let i = self.cursor[u];
            let (to, cap) = (self.adj[u][i].to, self.adj[u][i].cap);
            if cap > EPS && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0.0 {
                    self.adj[u][i].cap -= got;
                    let rev = self.adj[u][i].rev;
                    self.adj[to][rev].cap += got;
                    return got;
                }
            }
            self.cursor[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.cursor.fill(0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    /// Vertices reachable from `s` in the residual network.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.adj[u] {
                if a.cap > EPS && !seen[a.to] {
                    seen[a.to] = true;
                    queue.push_back(a.to);
                }
            }
        }
        seen
    }
}

/// Unary `(true, false)` costs and `(i, j, w)` pairwise weights.
pub type BinaryEnergy = (Vec<(f64, f64)>, Vec<(usize, usize, f64)>);

/// Minimizes `sum_i U_i(x_i) + sum_(i,j) w_ij [x_i != x_j]` over binary
/// labels with `w_ij >= 0`. `unary[i] = (cost if true, cost if false)`.
pub fn minimize_binary(unary: &[(f64, f64)], pairwise: &[(usize, usize, f64)]) -> Vec<bool> {
    let n = unary.len();
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for (i, &(on, off)) in unary.iter().enumerate() {
        let m = on.min(off);
        // cutting s -> i puts i on the sink side (false)
        let (cap_s, cap_t) = (off - m, on - m);
        if cap_s > 0.0 {
            net.add_edge(s, i, cap_s, 0.0);
        }
        if cap_t > 0.0 {
            net.add_edge(i, t, cap_t, 0.0);
        }
    }
    for &(i, j, w) in pairwise {
        if w > 0.0 && i != j {
            net.add_edge(i, j, w, w);
        }
    }
    net.max_flow(s, t);
    let side = net.source_side(s);
    side[..n].to_vec()
}

pub fn energy(unary: &[(f64, f64)], pairwise: &[(usize, usize, f64)], labels: &[bool]) -> f64 {
    let u: f64 = unary
        .iter()
        .zip(labels)
        .map(|(&(on, off), &x)| if x { on } else { off })
        .sum();
    let p: f64 = pairwise
        .iter()
        .filter(|&&(i, j, _)| labels[i] != labels[j])
        .map(|&(_, _, w)| w.max(0.0))
        .sum();
    u + p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_flow() {
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, 3.0, 0.0);
        net.add_edge(0, 2, 2.0, 0.0);
        net.add_edge(1, 2, 1.0, 0.0);
        net.add_edge(1, 3, 2.0, 0.0);
        net.add_edge(2, 3, 3.0, 0.0);
        assert!((net.max_flow(0, 3) - 5.0).abs() < 1e-12);
    }

    fn brute_force(unary: &[(f64, f64)], pairwise: &[(usize, usize, f64)]) -> f64 {
        let n = unary.len();
        (0..1u32 << n)
            .map(|mask| {
                let labels: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                energy(unary, pairwise, &labels)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn instance() -> impl Strategy<Value = BinaryEnergy> {
        (1usize..=12).prop_flat_map(|n| {
            let unary = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n);
            let pairs = prop::collection::vec((0..n, 0..n, 0.0f64..1.0), 0..30);
            (unary, pairs)
        })
    }

    proptest! {
        #[test]
        fn cut_matches_exhaustive_minimum((unary, pairs) in instance()) {
            let labels = minimize_binary(&unary, &pairs);
            let e = energy(&unary, &pairs, &labels);
            let best = brute_force(&unary, &pairs);
            prop_assert!((e - best).abs() <= 1e-9, "{} vs {}", e, best);
        }
    }
}
