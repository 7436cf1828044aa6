//! Random geometric networks, the system tuple `D = {S, A, Ā, B, B̄}`, the
//! distance between two system descriptions and ε-perturbed systems.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{inf_norm, spectral_norm, sym_eig, Matrix, RngStream};

/// Undirected simple graph, edges stored once as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::Precondition(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Precondition(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Graph {
            n,
            edges: set.into_iter().collect(),
            positions: None,
        })
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors().iter().map(Vec::len).collect()
    }

    pub fn component_count(&self) -> usize {
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    pub fn adjacency(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    /// Nodes within `hops` of `node` (including itself).
    pub fn neighborhood(&self, node: usize, hops: usize) -> BTreeSet<usize> {
        let adj = self.neighbors();
        let mut seen: BTreeSet<usize> = [node].into();
        let mut frontier = vec![node];
        for _ in 0..hops {
            let mut next = Vec::new();
            for v in frontier {
                for &w in &adj[v] {
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        seen
    }
}

/// Points uniform on the unit square, edges between mutual-or-one-sided k nearest neighbours.
pub fn generate_geometric_graph(n: usize, k: usize, rng: &mut RngStream) -> Result<Graph> {
    if k == 0 || n < k + 1 {
        return Err(Error::Precondition(format!(
            "need n >= k + 1 and k >= 1 (n = {n}, k = {k})"
        )));
    }
    let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect();
    let mut g = knn_graph(&positions, k)?;
    g.positions = Some(positions);
    Ok(g)
}

/// Symmetrised k-nearest-neighbour graph over fixed positions. Distance ties
/// break towards the lower node index.
pub fn knn_graph(positions: &[[f64; 2]], k: usize) -> Result<Graph> {
    let n = positions.len();
    if k == 0 || n < k + 1 {
        return Err(Error::Precondition(format!(
            "need n >= k + 1 and k >= 1 (n = {n}, k = {k})"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                (dx * dx + dy * dy, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(others.iter().take(k).map(|&(_, j)| (i, j)));
    }
    let mut g = Graph::new(n, edges)?;
    g.positions = Some(positions.to_vec());
    Ok(g)
}

/// Adjacency normalised by its largest-magnitude eigenvalue, so `‖S‖₂ = 1`.
pub fn build_support(g: &Graph) -> Result<Matrix> {
    let components = g.component_count();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let adj = g.adjacency();
    if g.n == 1 {
        return Ok(adj);
    }
    let top = sym_eig(&adj)?.max_abs();
    Ok(adj.scale(1.0 / top))
}

/// Quadratic cost weights `Q̄` (F×F, PSD) and `R̄` (G×G, PD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub q_mat: Matrix,
    pub r_mat: Matrix,
}

impl CostSpec {
    pub fn new(q_mat: Matrix, r_mat: Matrix) -> Result<Self> {
        let q = sym_eig(&q_mat)?;
        if q.min() < -1e-10 * q.max_abs().max(1.0) {
            return Err(Error::Precondition(
                "Q must be positive semidefinite".into(),
            ));
        }
        let r = sym_eig(&r_mat)?;
        if r.min() <= 1e-10 {
            return Err(Error::Precondition("R must be positive definite".into()));
        }
        Ok(CostSpec { q_mat, r_mat })
    }

    pub fn identity(f_dim: usize, g_dim: usize) -> Self {
        CostSpec {
            q_mat: Matrix::identity(f_dim),
            r_mat: Matrix::identity(g_dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    pub seed: u64,
    pub stream: u64,
    pub knn_k: usize,
    pub a_norm: f64,
    pub b_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_eps: Option<f64>,
}

/// `X(t+1) = A X(t) Ā + B U(t) B̄` on an N-node network with F state and G control features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedSystem {
    /// S, N×N symmetric.
    pub support: Matrix,
    /// A, N×N.
    pub sys_graph: Matrix,
    /// Ā, F×F.
    pub sys_feat: Matrix,
    /// B, N×N.
    pub ctrl_graph: Matrix,
    /// B̄, G×F.
    pub ctrl_feat: Matrix,
    pub f_dim: usize,
    pub g_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<SystemMeta>,
}

impl DistributedSystem {
    pub fn new(
        support: Matrix,
        sys_graph: Matrix,
        sys_feat: Matrix,
        ctrl_graph: Matrix,
        ctrl_feat: Matrix,
    ) -> Result<Self> {
        let n = support.rows();
        let f = sys_feat.rows();
        let g = ctrl_feat.rows();
        let checks = [
            ("support", support.shape(), (n, n)),
            ("sys_graph", sys_graph.shape(), (n, n)),
            ("sys_feat", sys_feat.shape(), (f, f)),
            ("ctrl_graph", ctrl_graph.shape(), (n, n)),
            ("ctrl_feat", ctrl_feat.shape(), (g, f)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::dim(
                    "DistributedSystem::new",
                    format!("{name} {want:?}"),
                    format!("{got:?}"),
                ));
            }
        }
        for m in [&support, &sys_graph, &sys_feat, &ctrl_graph, &ctrl_feat] {
            if !m.is_finite() {
                return Err(Error::NotFinite("DistributedSystem::new"));
            }
        }
        if !support.is_symmetric(1e-10) {
            return Err(Error::NotSymmetric {
                asymmetry: support.asymmetry(),
            });
        }
        Ok(DistributedSystem {
            support,
            sys_graph,
            sys_feat,
            ctrl_graph,
            ctrl_feat,
            f_dim: f,
            g_dim: g,
            meta: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.support.rows()
    }

    /// Whether `S` is zero off the graph's edge set and diagonal.
    pub fn respects_sparsity(&self, g: &Graph) -> bool {
        let adj = g.adjacency();
        (0..self.n_nodes()).all(|i| {
            (0..self.n_nodes()).all(|j| i == j || adj[(i, j)] != 0.0 || self.support[(i, j)] == 0.0)
        })
    }

    /// One step of the dynamics.
    pub fn step(&self, x: &Matrix, u: &Matrix) -> Result<Matrix> {
        let drift = self.sys_graph.matmul(x)?.matmul(&self.sys_feat)?;
        let input = self.ctrl_graph.matmul(u)?.matmul(&self.ctrl_feat)?;
        drift.zip_map(&input, |a, b| a + b)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let sys: DistributedSystem = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        // re-run the constructor checks on untrusted input
        let meta = sys.meta.clone();
        let mut checked = DistributedSystem::new(
            sys.support,
            sys.sys_graph,
            sys.sys_feat,
            sys.ctrl_graph,
            sys.ctrl_feat,
        )?;
        checked.meta = meta;
        Ok(checked)
    }
}

/// Builds `S` from the graph, then `A = V diag(a) Vᵀ`, `B = V diag(b) Vᵀ` on the
/// eigenvectors of `S` (ascending eigenvalue order) with Gaussian diagonals
/// rescaled so that `max|aᵢ| = a_norm` and `max|bᵢ| = b_norm`.
pub fn generate_system(
    g: &Graph,
    a_norm: f64,
    b_norm: f64,
    f_dim: usize,
    g_dim: usize,
    rng: &mut RngStream,
) -> Result<DistributedSystem> {
    if !(a_norm >= 0.0 && b_norm > 0.0) || f_dim == 0 || g_dim == 0 {
        return Err(Error::Precondition(format!(
            "need a_norm >= 0, b_norm > 0 and positive feature dims (a_norm = {a_norm}, b_norm = {b_norm})"
        )));
    }
    let support = build_support(g)?;
    let spectrum = sym_eig(&support)?;
    let v = &spectrum.eigenvectors;
    let n = g.n;
    let mut draw = |target: f64| -> Vec<f64> {
        loop {
            let d = rng.normal_vec(n);
            let m = d.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if m > 0.0 {
                return d.iter().map(|x| x * target / m).collect();
            }
        }
    };
    let a_diag = draw(a_norm);
    let b_diag = draw(b_norm);
    let compose = |d: &[f64]| -> Matrix {
        let vd = Matrix::from_fn(n, n, |i, j| v[(i, j)] * d[j]);
        vd.matmul_t(v).expect("square").symmetrize()
    };
    let mut sys = DistributedSystem::new(
        support,
        compose(&a_diag),
        Matrix::identity(f_dim),
        compose(&b_diag),
        Matrix::from_fn(g_dim, f_dim, |i, j| if i == j { 1.0 } else { 0.0 }),
    )?;
    sys.meta = Some(SystemMeta {
        seed: rng.seed(),
        stream: rng.stream_id(),
        knn_k: 0,
        a_norm,
        b_norm,
        positions: g.positions.clone(),
        perturbation_eps: None,
    });
    Ok(sys)
}

/// Samples a connected geometric graph (resampling disconnected draws) and a
/// system on it.
pub fn sample_connected_system(
    n: usize,
    k: usize,
    a_norm: f64,
    b_norm: f64,
    rng: &mut RngStream,
) -> Result<(Graph, DistributedSystem)> {
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let g = generate_geometric_graph(n, k, rng)?;
        if !g.is_connected() {
            continue;
        }
        let mut sys = generate_system(&g, a_norm, b_norm, 1, 1, rng)?;
        if let Some(m) = sys.meta.as_mut() {
            m.knn_k = k;
        }
        return Ok((g, sys));
    }
    Err(Error::NoConvergence {
        what: "connected graph sampling",
        iterations: MAX_ATTEMPTS,
    })
}

/// `max{‖S−Ŝ‖₂, ‖A−Â‖₂, ‖Ā−Ā̂‖∞, ‖B−B̂‖₂, ‖B̄−B̄̂‖∞}`.
pub fn system_distance(d1: &DistributedSystem, d2: &DistributedSystem) -> Result<f64> {
    let parts = distance_components(d1, d2)?;
    Ok(parts.into_iter().fold(0.0, f64::max))
}

/// The five constituent norm differences in `S, A, Ā, B, B̄` order.
pub fn distance_components(d1: &DistributedSystem, d2: &DistributedSystem) -> Result<[f64; 5]> {
    if d1.n_nodes() != d2.n_nodes() || d1.f_dim != d2.f_dim || d1.g_dim != d2.g_dim {
        return Err(Error::dim(
            "system_distance",
            format!("N={} F={} G={}", d1.n_nodes(), d1.f_dim, d1.g_dim),
            format!("N={} F={} G={}", d2.n_nodes(), d2.f_dim, d2.g_dim),
        ));
    }
    Ok([
        spectral_norm(&(&d1.support - &d2.support))?,
        spectral_norm(&(&d1.sys_graph - &d2.sys_graph))?,
        inf_norm(&(&d1.sys_feat - &d2.sys_feat)),
        spectral_norm(&(&d1.ctrl_graph - &d2.ctrl_graph))?,
        inf_norm(&(&d1.ctrl_feat - &d2.ctrl_feat)),
    ])
}

/// Perturbs `S`, `A`, `B` by `eps · Z / ‖Z‖₂` with independent symmetric
/// Gaussian directions `Z`; `Ā` and `B̄` stay exact.
pub fn perturb_system(
    d: &DistributedSystem,
    eps: f64,
    rng: &mut RngStream,
) -> Result<DistributedSystem> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Precondition(format!(
            "eps must be finite and >= 0, got {eps}"
        )));
    }
    let n = d.n_nodes();
    let mut perturb = |m: &Matrix| -> Result<Matrix> {
        loop {
            let z = rng.normal_matrix(n, n).symmetrize();
            let nz = spectral_norm(&z)?;
            if nz > 0.0 {
                let mut out = m.clone();
                out.axpy(eps / nz, &z)?;
                return Ok(out);
            }
        }
    };
    let support = perturb(&d.support)?;
    let sys_graph = perturb(&d.sys_graph)?;
    let ctrl_graph = perturb(&d.ctrl_graph)?;
    let mut out = DistributedSystem::new(
        support,
        sys_graph,
        d.sys_feat.clone(),
        ctrl_graph,
        d.ctrl_feat.clone(),
    )?;
    out.meta = d.meta.clone().map(|mut m| {
        m.perturbation_eps = Some(eps);
        m
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_one_edge() {
        let mut rng = RngStream::new(1, 0);
        let g = generate_geometric_graph(2, 1, &mut rng).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
    }

    #[test]
    fn knn_precondition() {
        let mut rng = RngStream::new(1, 0);
        assert!(generate_geometric_graph(3, 3, &mut rng).is_err());
        assert!(generate_geometric_graph(3, 0, &mut rng).is_err());
    }

    #[test]
    fn support_of_path_and_triangle() {
        let s = build_support(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        let want = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((&s - &want).max_abs() < 1e-12);
        let t = build_support(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()).unwrap();
        let ev = sym_eig(&t).unwrap().eigenvalues;
        assert!(
            (ev[0] + 0.5).abs() < 1e-12
                && (ev[1] + 0.5).abs() < 1e-12
                && (ev[2] - 1.0).abs() < 1e-12
        );
        assert!((t[(0, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disconnected_support_errors() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            build_support(&g),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn graph_rejects_self_loops() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn distance_of_shifted_a() {
        let mut rng = RngStream::new(5, 0);
        let (_, d1) = sample_connected_system(8, 3, 0.995, 1.0, &mut rng).unwrap();
        let mut d2 = d1.clone();
        d2.sys_graph.axpy(0.1, &Matrix::identity(8)).unwrap();
        assert_eq!(system_distance(&d1, &d1).unwrap(), 0.0);
        assert!((system_distance(&d1, &d2).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn perturb_rejects_negative_eps_and_keeps_zero() {
        let mut rng = RngStream::new(5, 0);
        let (_, d) = sample_connected_system(8, 3, 0.995, 1.0, &mut rng).unwrap();
        assert!(perturb_system(&d, -0.1, &mut rng).is_err());
        let same = perturb_system(&d, 0.0, &mut rng).unwrap();
        assert_eq!(system_distance(&d, &same).unwrap(), 0.0);
    }
}
