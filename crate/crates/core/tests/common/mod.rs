//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relloc::graph::{
    build_complete, build_cycle, build_erdos_renyi, build_path, build_torus_grid, Graph,
};

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Incidence matrix written out from the edge list.
pub fn incidence(g: &Graph) -> Dense {
    let mut a = vec![vec![0.0; g.node_count()]; g.edge_count()];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        a[e][u] = -1.0;
        a[e][v] = 1.0;
    }
    a
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a[0].len());
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    (0..r)
        .map(|i| (0..c).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, x)| a * x).sum()).collect()
}

/// Laplacian as `AᵀA` by dense multiplication.
pub fn laplacian_via_incidence(g: &Graph) -> Dense {
    let a = incidence(g);
    matmul(&transpose(&a), &a)
}

/// Dense `Q = (1 - τγ) I - τ AᵀA`.
pub fn dense_q(g: &Graph, tau: f64, gamma: f64) -> Dense {
    let mut q = laplacian_via_incidence(g);
    for (i, row) in q.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v *= -tau;
        }
        row[i] += 1.0 - tau * gamma;
    }
    q
}

/// Dense regularized step `Q x + τ Aᵀb + τγ x0`.
pub fn dense_step(g: &Graph, x: &[f64], b: &[f64], x0: &[f64], tau: f64, gamma: f64) -> Vec<f64> {
    let qx = matvec(&dense_q(g, tau, gamma), x);
    let atb = matvec(&transpose(&incidence(g)), b);
    (0..x.len()).map(|i| qx[i] + tau * atb[i] + tau * gamma * x0[i]).collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(mut a: Dense) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `Φ(x)` written directly from its definition.
pub fn phi(g: &Graph, x: &[f64], b: &[f64], x0: &[f64], sigma: f64, nu: f64) -> f64 {
    let ax = matvec(&incidence(g), x);
    let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum();
    let p: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
    r / (sigma * sigma) + p / (nu * nu)
}

/// Central differences of `Φ` with step `h`.
pub fn fd_gradient(g: &Graph, x: &[f64], b: &[f64], x0: &[f64], sigma: f64, nu: f64, h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (phi(g, &xp, b, x0, sigma, nu) - phi(g, &xm, b, x0, sigma, nu)) / (2.0 * h)
        })
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub const FAMILIES: [&str; 5] = ["cycle", "path", "complete", "torus", "erdos_renyi"];

/// A graph of the named family with roughly `n` nodes.
pub fn family_graph(family: &str, n: usize, seed: u64) -> Graph {
    match family {
        "cycle" => build_cycle(n.max(3)).unwrap(),
        "path" => build_path(n.max(2)).unwrap(),
        "complete" => build_complete(n.max(2)).unwrap(),
        "torus" => {
            let rows = ((n as f64).sqrt() as usize).max(2);
            build_torus_grid(rows, (n / rows).max(2)).unwrap()
        }
        "erdos_renyi" => {
            let n = n.max(2);
            let p = (2.0 * (n as f64).ln() / n as f64).clamp(0.1, 1.0);
            build_erdos_renyi(n, p, seed).unwrap()
        }
        other => panic!("unknown family {other}"),
    }
}

/// A random graph from a random family with `2 ≤ N ≤ max_n`.
pub fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let family = FAMILIES[rng.random_range(0..FAMILIES.len())];
    let n = rng.random_range(3..=max_n);
    family_graph(family, n, rng.random())
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}
