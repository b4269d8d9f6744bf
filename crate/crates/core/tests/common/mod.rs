//! Brute-force reference implementations shared by the integration tests.
//! They favour obviousness over speed and share no code with the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use stocknet::ingest::AggregatedHolding;
use stocknet::money::Cents;
use stocknet::network::{Edge, NetworkMeta, StockNetwork};

pub fn snapshot() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 6, 30).unwrap()
}

/// Random holdings: each investor holds a random non-empty subset of stocks.
pub fn random_holdings(rng: &mut ChaCha20Rng, max_investors: usize, max_stocks: usize) -> Vec<AggregatedHolding> {
    let investors = rng.random_range(1..=max_investors);
    let stocks = rng.random_range(2..=max_stocks);
    let mut out = Vec::new();
    for m in 0..investors {
        let held = rng.random_range(1..=stocks);
        for s in index::sample(rng, stocks, held) {
            out.push(AggregatedHolding {
                manager_id: format!("M{m:02}"),
                stock_id: format!("S{s:02}"),
                market_value: Cents(rng.random_range(1..=5_000_000_000u64)),
                as_of_date: snapshot(),
            });
        }
    }
    out
}

/// w_ij = Σ_m h_mi over investors m holding both i and j, by scanning every
/// stock pair against every investor.
pub fn brute_projection(holdings: &[AggregatedHolding]) -> BTreeMap<(String, String), u64> {
    let stocks: BTreeSet<&str> = holdings.iter().map(|h| h.stock_id.as_str()).collect();
    let investors: BTreeSet<&str> = holdings.iter().map(|h| h.manager_id.as_str()).collect();
    let table: BTreeMap<(&str, &str), u64> = holdings
        .iter()
        .map(|h| ((h.manager_id.as_str(), h.stock_id.as_str()), h.market_value.0))
        .collect();
    let value = |m: &str, s: &str| table.get(&(m, s)).copied();
    let mut out = BTreeMap::new();
    for &i in &stocks {
        for &j in &stocks {
            if i == j {
                continue;
            }
            let mut w = 0u64;
            let mut common = false;
            for &m in &investors {
                if let (Some(hi), Some(_)) = (value(m, i), value(m, j)) {
                    w += hi;
                    common = true;
                }
            }
            if common {
                out.insert((i.to_string(), j.to_string()), w);
            }
        }
    }
    out
}

pub fn edge_map(net: &StockNetwork) -> BTreeMap<(String, String), u64> {
    net.edges()
        .iter()
        .map(|e| {
            (
                (net.nodes()[e.source as usize].clone(), net.nodes()[e.target as usize].clone()),
                e.weight.0,
            )
        })
        .collect()
}

/// Erdős–Rényi style digraph with edge probability `p`.
pub fn random_digraph(rng: &mut ChaCha20Rng, n: usize, p: f64) -> StockNetwork {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.random_bool(p) {
                edges.push(Edge {
                    source: s as u32,
                    target: t as u32,
                    weight: Cents(rng.random_range(1..=10_000_000)),
                });
            }
        }
    }
    let nodes = (0..n).map(|i| format!("V{i:03}")).collect();
    StockNetwork::new(nodes, edges, NetworkMeta::default()).unwrap()
}

/// Dense adjacency view of a network.
pub struct Dense {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
    pub w: Vec<Vec<u64>>,
}

impl Dense {
    pub fn of(net: &StockNetwork) -> Self {
        let n = net.node_count();
        let mut adj = vec![vec![false; n]; n];
        let mut w = vec![vec![0u64; n]; n];
        for e in net.edges() {
            adj[e.source as usize][e.target as usize] = true;
            w[e.source as usize][e.target as usize] = e.weight.0;
        }
        Dense { n, adj, w }
    }

    pub fn edges(&self) -> usize {
        self.adj.iter().flatten().filter(|a| **a).count()
    }

    pub fn density(&self) -> f64 {
        self.edges() as f64 / (self.n * (self.n - 1)) as f64
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.adj[i][j]).count()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| self.adj[i][j]).count()
    }

    pub fn out_strength(&self, i: usize) -> u64 {
        self.w[i].iter().sum()
    }

    pub fn in_strength(&self, j: usize) -> u64 {
        (0..self.n).map(|i| self.w[i][j]).sum()
    }

    /// Reachability by Warshall's algorithm; every node reaches itself.
    fn closure(&self, symmetric: bool) -> Vec<Vec<bool>> {
        let mut r = self.adj.clone();
        for i in 0..self.n {
            r[i][i] = true;
            if symmetric {
                for j in 0..self.n {
                    if self.adj[j][i] {
                        r[i][j] = true;
                    }
                }
            }
        }
        for k in 0..self.n {
            for i in 0..self.n {
                if r[i][k] {
                    for j in 0..self.n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    fn classes(r: &[Vec<bool>]) -> Vec<usize> {
        let n = r.len();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| r[i][j] && r[j][i]).collect();
            for &j in &members {
                seen[j] = true;
            }
            sizes.push(members.len());
        }
        sizes
    }

    pub fn scc_sizes(&self) -> Vec<usize> {
        Self::classes(&self.closure(false))
    }

    pub fn wcc_sizes(&self) -> Vec<usize> {
        Self::classes(&self.closure(true))
    }

    /// Pearson correlation of (deg(source), deg(target)) over edges using raw
    /// moment sums. `out` picks out-degree, otherwise in-degree.
    pub fn assortativity(&self, out: bool) -> Option<f64> {
        let deg = |v: usize| if out { self.out_degree(v) } else { self.in_degree(v) } as f64;
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.adj[i][j] {
                    let (x, y) = (deg(i), deg(j));
                    n += 1.0;
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
        }
        let cov = sxy / n - (sx / n) * (sy / n);
        let vx = sxx / n - (sx / n).powi(2);
        let vy = syy / n - (sy / n).powi(2);
        (n > 1.0 && vx > 1e-12 && vy > 1e-12).then(|| cov / (vx * vy).sqrt())
    }

    /// Nodes ranked by out-degree desc, then id asc.
    pub fn top_by_out_degree(&self, ids: &[String], r: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.out_degree(b).cmp(&self.out_degree(a)).then(ids[a].cmp(&ids[b])));
        order.truncate(r);
        order
    }

    pub fn edges_within(&self, set: &[usize]) -> usize {
        set.iter()
            .flat_map(|&i| set.iter().map(move |&j| (i, j)))
            .filter(|&(i, j)| self.adj[i][j])
            .count()
    }
}

/// One-tailed paired t with H1: mean(low) < mean(high), p from statrs.
pub fn reference_paired_t(low: &[f64], high: &[f64]) -> (f64, f64) {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    use statrs::statistics::Statistics;
    let d: Vec<f64> = low.iter().zip(high).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().copied().mean();
    let sd = d.iter().copied().std_dev();
    let t = mean / (sd / n.sqrt());
    let p = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(t);
    (t, p)
}

pub fn reference_entropy(values: &[f64]) -> f64 {
    let total: f64 = values.iter().sum();
    -values
        .iter()
        .map(|v| v / total)
        .filter(|p| *p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Ordinary least squares residual sum of squares by modified Gram-Schmidt.
pub fn ols_ssr(cols: &[Vec<f64>], y: &[f64]) -> Option<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for u in &q {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= proj * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = c.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale.max(1e-300) {
            return None;
        }
        q.push(v.into_iter().map(|a| a / norm).collect());
    }
    let mut r = y.to_vec();
    for u in &q {
        let proj: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
        for (a, b) in r.iter_mut().zip(u) {
            *a -= proj * b;
        }
    }
    Some(r.iter().map(|a| a * a).sum())
}

/// Residual vector of an OLS fit (same method as `ols_ssr`).
fn ols_resid(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for u in &q {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= proj * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|a| a / norm).collect());
    }
    let mut r = y.to_vec();
    for u in &q {
        let proj: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
        for (a, b) in r.iter_mut().zip(u) {
            *a -= proj * b;
        }
    }
    r
}

pub struct OracleGranger {
    pub lag: usize,
    pub wald: f64,
    pub p: f64,
}

/// Toda-Yamamoto test on complete series: lag by information criterion over
/// the bivariate VAR, then the Wald statistic in its restricted-vs-full SSR
/// form, `(SSR_r − SSR_u) / (SSR_u / (T − k))`.
pub fn oracle_granger(x: &[f64], y: &[f64], max_lag: usize, d_max: usize, bic: bool) -> OracleGranger {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let big_l = max_lag + d_max;
    let rows: Vec<usize> = (big_l..x.len()).collect();
    let t = rows.len() as f64;
    let lagged = |s: &[f64], l: usize| rows.iter().map(|&r| s[r - l]).collect::<Vec<f64>>();
    let regressors = |q: usize, x_from: usize| {
        let mut cols = vec![vec![1.0; rows.len()]];
        for l in 1..=q {
            cols.push(lagged(y, l));
        }
        for l in x_from..=q {
            cols.push(lagged(x, l));
        }
        cols
    };
    let yt = lagged(y, 0);
    let xt = lagged(x, 0);
    let mut best = (f64::INFINITY, 0);
    for p in 1..=max_lag {
        let cols = regressors(p, 1);
        let (e1, e2) = (ols_resid(&cols, &yt), ols_resid(&cols, &xt));
        let s11: f64 = e1.iter().map(|a| a * a).sum::<f64>() / t;
        let s22: f64 = e2.iter().map(|a| a * a).sum::<f64>() / t;
        let s12: f64 = e1.iter().zip(&e2).map(|(a, b)| a * b).sum::<f64>() / t;
        let k = 4.0 * p as f64;
        let pen = if bic { t.ln() * k / t } else { 2.0 * k / t };
        let crit = (s11 * s22 - s12 * s12).ln() + pen;
        if crit < best.0 {
            best = (crit, p);
        }
    }
    let m = best.1;
    let q = m + d_max;
    let full = regressors(q, 1);
    let k = full.len() as f64;
    let ssr_u = ols_ssr(&full, &yt).unwrap();
    let ssr_r = ols_ssr(&regressors(q, m + 1), &yt).unwrap();
    let wald = (ssr_r - ssr_u) / (ssr_u / (t - k));
    let p = 1.0 - ChiSquared::new(m as f64).unwrap().cdf(wald);
    OracleGranger { lag: m, wald, p }
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
