use super::graph::{DecodingGraph, BOUNDARY};

/// Weighted-growth cluster decoder with peeling.
#[derive(Clone, Debug)]
pub struct UnionFindDecoder {
    n: usize,
    /// Edge endpoints; `b == n` is the boundary.
    ends: Vec<(usize, usize)>,
    /// Doubled integer edge lengths.
    len2: Vec<i64>,
    obs: Vec<bool>,
    adj: Vec<Vec<u32>>,
}

/// Per-thread scratch space, reset lazily through `touched`.
#[derive(Clone, Debug, Default)]
pub struct UfWorkspace {
    parent: Vec<u32>,
    odd: Vec<bool>,
    boundary_edge: Vec<u32>,
    frontier: Vec<Vec<u32>>,
    in_cluster: Vec<bool>,
    defect: Vec<bool>,
    grown: Vec<i64>,
    rate: Vec<u32>,
    full: Vec<bool>,
    touched_nodes: Vec<u32>,
    touched_edges: Vec<u32>,
    visited: Vec<bool>,
}

const NO_EDGE: u32 = u32::MAX;

impl UnionFindDecoder {
    pub fn new(graph: &DecodingGraph) -> UnionFindDecoder {
        let n = graph.num_detectors;
        let mut adj = vec![Vec::new(); n];
        let mut ends = Vec::with_capacity(graph.edges.len());
        for (i, e) in graph.edges.iter().enumerate() {
            let b = if e.b == BOUNDARY { n } else { e.b as usize };
            ends.push((e.a as usize, b));
            adj[e.a as usize].push(i as u32);
            if b < n {
                adj[b].push(i as u32);
            }
        }
        UnionFindDecoder {
            n,
            ends,
            len2: graph
                .edges
                .iter()
                .map(|e| 2 * e.int_weight().max(1))
                .collect(),
            obs: graph.edges.iter().map(|e| e.obs).collect(),
            adj,
        }
    }

    pub fn workspace(&self) -> UfWorkspace {
        let n = self.n;
        let m = self.ends.len();
        UfWorkspace {
            parent: (0..n as u32).collect(),
            odd: vec![false; n],
            boundary_edge: vec![NO_EDGE; n],
            frontier: vec![Vec::new(); n],
            in_cluster: vec![false; n],
            defect: vec![false; n],
            grown: vec![0; m],
            rate: vec![0; m],
            full: vec![false; m],
            touched_nodes: Vec::new(),
            touched_edges: Vec::new(),
            visited: vec![false; n],
        }
    }

    fn find(ws: &mut UfWorkspace, mut v: usize) -> usize {
        while ws.parent[v] as usize != v {
            let p = ws.parent[v] as usize;
            ws.parent[v] = ws.parent[p];
            v = p;
        }
        v
    }

    fn touch(&self, ws: &mut UfWorkspace, v: usize) {
        if !ws.in_cluster[v] {
            ws.in_cluster[v] = true;
            ws.touched_nodes.push(v as u32);
            ws.frontier[v] = self.adj[v].clone();
        }
    }

    fn union(ws: &mut UfWorkspace, a: usize, b: usize) {
        let (mut ra, mut rb) = (Self::find(ws, a), Self::find(ws, b));
        if ra == rb {
            return;
        }
        if ws.frontier[ra].len() < ws.frontier[rb].len() {
            std::mem::swap(&mut ra, &mut rb);
        }
        ws.parent[rb] = ra as u32;
        ws.odd[ra] ^= ws.odd[rb];
        if ws.boundary_edge[ra] == NO_EDGE {
            ws.boundary_edge[ra] = ws.boundary_edge[rb];
        }
        let moved = std::mem::take(&mut ws.frontier[rb]);
        ws.frontier[ra].extend(moved);
    }

    pub fn decode(&self, defects: &[u32]) -> bool {
        let mut ws = self.workspace();
        self.decode_with(&mut ws, defects)
    }

    pub fn decode_with(&self, ws: &mut UfWorkspace, defects: &[u32]) -> bool {
        if defects.is_empty() {
            return false;
        }
        let n = self.n;
        for &d in defects {
            let d = d as usize;
            self.touch(ws, d);
            ws.odd[d] = true;
            ws.defect[d] = true;
        }
        let mut active: Vec<usize> = Vec::new();
        let mut rate_edges: Vec<u32> = Vec::new();
        loop {
            active.clear();
            for &v in &ws.touched_nodes {
                let v = v as usize;
                if ws.parent[v] as usize == v && ws.odd[v] && ws.boundary_edge[v] == NO_EDGE {
                    active.push(v);
                }
            }
            if active.is_empty() {
                break;
            }
            rate_edges.clear();
            for &r in &active {
                let mut f = std::mem::take(&mut ws.frontier[r]);
                f.retain(|&e| !ws.full[e as usize]);
                for &e in &f {
                    if ws.rate[e as usize] == 0 {
                        rate_edges.push(e);
                    }
                    ws.rate[e as usize] += 1;
                }
                ws.frontier[r] = f;
            }
            let mut step = i64::MAX;
            for &e in &rate_edges {
                let e = e as usize;
                let rate = ws.rate[e] as i64;
                let rem = self.len2[e] - ws.grown[e];
                step = step.min((rem + rate - 1) / rate);
            }
            let mut newly = Vec::new();
            for &e in &rate_edges {
                let ei = e as usize;
                if ws.grown[ei] == 0 {
                    ws.touched_edges.push(e);
                }
                ws.grown[ei] += step * ws.rate[ei] as i64;
                ws.rate[ei] = 0;
                if ws.grown[ei] >= self.len2[ei] {
                    ws.grown[ei] = self.len2[ei];
                    ws.full[ei] = true;
                    newly.push(ei);
                }
            }
            for e in newly {
                let (a, b) = self.ends[e];
                if b == n {
                    let r = Self::find(ws, a);
                    if ws.boundary_edge[r] == NO_EDGE {
                        ws.boundary_edge[r] = e as u32;
                    }
                } else {
                    self.touch(ws, a);
                    self.touch(ws, b);
                    Self::union(ws, a, b);
                }
            }
        }
        let obs = self.peel(ws);
        self.reset(ws);
        obs
    }

    fn peel(&self, ws: &mut UfWorkspace) -> bool {
        let n = self.n;
        let mut obs = false;
        // (node, edge to parent, parent or n for the boundary)
        let mut order: Vec<(usize, u32, usize)> = Vec::new();
        let mut starts: Vec<(usize, u32)> = Vec::new();
        for &v in &ws.touched_nodes {
            let v = v as usize;
            if ws.parent[v] as usize == v && ws.boundary_edge[v] != NO_EDGE {
                let e = ws.boundary_edge[v];
                starts.push((self.ends[e as usize].0, e));
            }
        }
        for &v in &ws.touched_nodes {
            starts.push((v as usize, NO_EDGE));
        }
        for (s, e0) in starts {
            if ws.visited[s] {
                continue;
            }
            ws.visited[s] = true;
            let begin = order.len();
            order.push((s, e0, n));
            let mut i = begin;
            while i < order.len() {
                let v = order[i].0;
                i += 1;
                for &e in &self.adj[v] {
                    if !ws.full[e as usize] {
                        continue;
                    }
                    let (a, b) = self.ends[e as usize];
                    let u = if a == v { b } else { a };
                    if u == n || ws.visited[u] {
                        continue;
                    }
                    ws.visited[u] = true;
                    order.push((u, e, v));
                }
            }
        }
        for &(v, e, p) in order.iter().rev() {
            if !ws.defect[v] || e == NO_EDGE {
                continue;
            }
            ws.defect[v] = false;
            obs ^= self.obs[e as usize];
            if p < n {
                ws.defect[p] ^= true;
            }
        }
        for &(v, _, _) in &order {
            ws.visited[v] = false;
        }
        obs
    }

    fn reset(&self, ws: &mut UfWorkspace) {
        for v in ws.touched_nodes.drain(..) {
            let v = v as usize;
            ws.parent[v] = v as u32;
            ws.odd[v] = false;
            ws.boundary_edge[v] = NO_EDGE;
            ws.frontier[v].clear();
            ws.in_cluster[v] = false;
            ws.defect[v] = false;
        }
        for e in ws.touched_edges.drain(..) {
            let e = e as usize;
            ws.grown[e] = 0;
            ws.full[e] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_surface_code_memory, Basis};
    use crate::decoder::graph::{build_decoding_graph, Prior};
    use crate::decoder::mwpm::MwpmDecoder;

    #[test]
    fn isolated_edges_match_mwpm() {
        let c = build_surface_code_memory(3, 3, Basis::Z)
            .unwrap()
            .with_uniform_noise(1e-3);
        let g = build_decoding_graph(&c, Prior::TrueModel).unwrap();
        let uf = UnionFindDecoder::new(&g);
        let mw = MwpmDecoder::new(&g);
        let mut ws = uf.workspace();
        assert!(!uf.decode_with(&mut ws, &[]));
        let mut agree = 0;
        for e in &g.edges {
            let defects: Vec<u32> = if e.b == BOUNDARY {
                vec![e.a]
            } else {
                vec![e.a, e.b]
            };
            agree += (uf.decode_with(&mut ws, &defects) == mw.decode(&defects)) as usize;
        }
        assert!(
            agree as f64 >= 0.9 * g.edges.len() as f64,
            "{agree}/{}",
            g.edges.len()
        );
    }

    #[test]
    fn workspace_is_reset_between_shots() {
        let c = build_surface_code_memory(3, 2, Basis::Z)
            .unwrap()
            .with_uniform_noise(1e-3);
        let g = build_decoding_graph(&c, Prior::TrueModel).unwrap();
        let uf = UnionFindDecoder::new(&g);
        let mut ws = uf.workspace();
        let s = [0u32, 3, 5];
        let first = uf.decode_with(&mut ws, &s);
        uf.decode_with(&mut ws, &[1, 2]);
        assert_eq!(uf.decode_with(&mut ws, &s), first);
        assert_eq!(uf.decode(&s), first);
    }
}
