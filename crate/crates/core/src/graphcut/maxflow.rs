use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

/// Directed network with nonnegative capacities, solved with Dinic's
/// algorithm.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<Arc>>,
    max_cap: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            max_cap: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds arc `u → v`. Negative or non-finite capacities are a caller bug.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64) {
        assert!(cap >= 0.0 && cap.is_finite(), "capacity {cap} on arc {u}->{v}");
        if cap == 0.0 || u == v {
            return;
        }
        self.max_cap = self.max_cap.max(cap);
        let (ru, rv) = (self.adj[v].len(), self.adj[u].len());
        self.adj[u].push(Arc { to: v, cap, rev: ru });
        self.adj[v].push(Arc { to: u, cap: 0.0, rev: rv });
    }

    fn eps(&self) -> f64 {
        1e-12 * self.max_cap
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let eps = self.eps();
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for a in &self.adj[u] {
                if a.cap > eps && level[a.to] == usize::MAX {
                    level[a.to] = level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, pushed: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        let eps = self.eps();
        while next[u] < self.adj[u].len() {
            let i = next[u];
            let Arc { to, cap, rev } = self.adj[u][i];
            if cap > eps && level[to] == level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got > 0.0 {
                    self.adj[u][i].cap -= got;
                    self.adj[to][rev].cap += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Maximum `s → t` flow value. The network is left in its residual
    /// state for [`source_side`](Self::source_side).
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        if s == t {
            return flow;
        }
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }

    /// Nodes reachable from `s` in the residual graph: the source side of
    /// a minimum cut after [`max_flow`](Self::max_flow).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let eps = self.eps();
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for a in &self.adj[u] {
                if a.cap > eps && !seen[a.to] {
                    seen[a.to] = true;
                    stack.push(a.to);
                }
            }
        }
        seen
    }
}
