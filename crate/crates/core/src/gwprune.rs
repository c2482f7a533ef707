//! Discrete Galton–Watson analogue of the pruning process: exponential mark
//! clocks on nodes and edges, a decreasing root component as the pruning
//! parameter grows, and the thinning identity behind the special Markov
//! property checked both by exact enumeration and by simulation.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// Default depth cap for sampled trees.
pub const DEFAULT_DEPTH_CAP: usize = 30;
/// Node budget per sampled tree.
pub const NODE_BUDGET: usize = 10_000_000;

/// Offspring distribution as a finite probability vector or named family.
#[derive(Debug, Clone)]
pub enum OffspringLaw {
    /// Explicit probabilities p\[k\] of k children.
    Probs(Vec<f64>),
}

impl OffspringLaw {
    /// p0 = p2 = 1/2.
    pub fn binary_critical() -> Self {
        OffspringLaw::Probs(vec![0.5, 0.0, 0.5])
    }

    /// P(k) = (1−q)q^k; sub-critical when q < 1/2.
    pub fn geometric(q: f64, terms: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain("geometric parameter must lie in (0,1)"));
        }
        let mut p: Vec<f64> = (0..terms).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v /= total;
        }
        Ok(OffspringLaw::Probs(p))
    }

    pub fn probs(&self) -> &[f64] {
        match self {
            OffspringLaw::Probs(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probs();
        if p.is_empty() || p.iter().any(|&v| v < 0.0) {
            return Err(Error::domain("offspring probabilities must be >= 0"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("offspring law sums to {total}")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.probs()
            .iter()
            .enumerate()
            .map(|(k, &v)| k as f64 * v)
            .sum()
    }

    /// Generating function f(s) = Σ p_k s^k.
    pub fn generating(&self, s: f64) -> f64 {
        self.probs()
            .iter()
            .rev()
            .fold(0.0, |acc, &p| acc * s + p)
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let p = self.probs();
        for (k, &v) in p.iter().enumerate() {
            acc += v;
            if u < acc {
                return k;
            }
        }
        p.len() - 1
    }

    /// Edge-thinned law: keep each child independently with probability p,
    /// i.e. generating function s ↦ f(1 − p + p·s) as a probability vector
    /// (binomial thinning of each litter).
    pub fn thinned(&self, p: f64) -> Result<OffspringLaw> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain("retention probability must lie in [0,1]"));
        }
        let probs = self.probs();
        let kmax = probs.len() - 1;
        let mut out = vec![0.0; probs.len()];
        for (k, &pk) in probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            // Binomial(k, p) spread of a k-litter.
            for j in 0..=k {
                let binom = binomial_coeff(k, j) * p.powi(j as i32)
                    * (1.0 - p).powi((k - j) as i32);
                out[j] += pk * binom;
            }
        }
        let _ = kmax;
        Ok(OffspringLaw::Probs(out))
    }
}

fn binomial_coeff(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (k - i) as f64;
    }
    acc
}

/// One node of a marked tree.
#[derive(Debug, Clone)]
pub struct MarkedNode {
    pub parent: Option<usize>,
    pub offspring: usize,
    /// Node size Δ; zero means the node can never be marked.
    pub size: f64,
    /// Exponential node clock with rate Δ (infinite when Δ = 0).
    pub node_clock: f64,
    /// Exponential clock of the edge to the parent (infinite at the root).
    pub edge_clock: f64,
    pub depth: usize,
}

/// Rooted Galton–Watson tree with per-node and per-edge exponential clocks.
#[derive(Debug, Clone)]
pub struct MarkedGwTree {
    pub nodes: Vec<MarkedNode>,
    pub depth_cap: usize,
    pub truncated: bool,
}

/// Clock configuration: node clocks fire at rate `size`, edge clocks at rate
/// `edge_rate` (the skeleton-mark analogue: 2β per unit edge length).
#[derive(Debug, Clone, Copy)]
pub struct ClockConfig {
    pub edge_rate: f64,
    /// Node size assigned to every node (0 disables node marks).
    pub node_size: f64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            edge_rate: 1.0,
            node_size: 0.0,
        }
    }
}

/// Summary of the pruned (root) component at a given parameter.
#[derive(Debug, Clone, Copy)]
pub struct PrunedForestStat {
    pub theta: f64,
    pub root_component_size: usize,
    pub total_progeny: usize,
}

/// Sample a marked tree generation by generation, truncated at `depth_cap`.
pub fn sample_gw(
    law: &OffspringLaw,
    depth_cap: usize,
    clocks: ClockConfig,
    rng: &mut impl Rng,
) -> Result<MarkedGwTree> {
    law.validate()?;
    let edge_exp = Exp::new(clocks.edge_rate).map_err(|_| Error::domain("edge rate > 0"))?;
    let node_exp = if clocks.node_size > 0.0 {
        Some(Exp::new(clocks.node_size).unwrap())
    } else {
        None
    };
    let mut nodes = Vec::new();
    let mut truncated = false;
    nodes.push(MarkedNode {
        parent: None,
        offspring: 0,
        size: clocks.node_size,
        node_clock: node_exp.map_or(f64::INFINITY, |e| e.sample(rng)),
        edge_clock: f64::INFINITY,
        depth: 0,
    });
    let mut frontier = vec![0usize];
    while let Some(v) = frontier.pop() {
        let depth = nodes[v].depth;
        if depth >= depth_cap {
            truncated = true;
            continue;
        }
        let k = law.sample(rng);
        nodes[v].offspring = k;
        for _ in 0..k {
            if nodes.len() >= NODE_BUDGET {
                return Err(Error::Size(format!(
                    "tree exceeded the {NODE_BUDGET}-node budget"
                )));
            }
            let idx = nodes.len();
            nodes.push(MarkedNode {
                parent: Some(v),
                offspring: 0,
                size: clocks.node_size,
                node_clock: node_exp.map_or(f64::INFINITY, |e| e.sample(rng)),
                edge_clock: edge_exp.sample(rng),
                depth: depth + 1,
            });
            frontier.push(idx);
        }
    }
    Ok(MarkedGwTree {
        nodes,
        depth_cap,
        truncated,
    })
}

/// Prune at parameter θ ≥ 0 under the clock coupling.
///
/// A non-root node survives iff its parent survives, the connecting edge
/// clock exceeds θ, and the parent's node clock exceeds θ (a fired node
/// keeps the node itself but cuts everything above it).
pub fn prune_at(tree: &MarkedGwTree, theta: f64) -> PrunedForestStat {
    assert!(theta >= 0.0, "pruning parameter must be >= 0");
    let mut alive = vec![false; tree.nodes.len()];
    let mut size = 0usize;
    for (i, node) in tree.nodes.iter().enumerate() {
        let ok = match node.parent {
            None => true,
            Some(p) => {
                alive[p] && node.edge_clock > theta && tree.nodes[p].node_clock > theta
            }
        };
        alive[i] = ok;
        if ok {
            size += 1;
        }
    }
    PrunedForestStat {
        theta,
        root_component_size: size,
        total_progeny: tree.nodes.len(),
    }
}

/// Result of the discrete special-Markov check.
#[derive(Debug, Clone)]
pub struct SpecialMarkovReport {
    pub chi_square: f64,
    pub degrees: usize,
    pub p_value: f64,
    pub pass_chi_square: bool,
    /// Exact total-variation distance between the pruned-tree law and the
    /// thinned-law tree on depth-≤3 truncations.
    pub enumeration_tv: f64,
    pub pass_enumeration: bool,
    pub bins: Vec<(String, u64, u64)>,
}

/// Exact shape distribution of a GW tree truncated at depth `depth`.
///
/// Shapes are canonical strings; probabilities are exact products.
fn truncated_shape_distribution(law: &OffspringLaw, depth: usize) -> Vec<(String, f64)> {
    if depth == 0 {
        return vec![("*".to_string(), 1.0)];
    }
    let sub = truncated_shape_distribution(law, depth - 1);
    let probs = law.probs();
    let mut out: std::collections::BTreeMap<String, f64> = Default::default();
    for (k, &pk) in probs.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        // All ordered k-tuples of sub-shapes.
        let mut stack: Vec<(usize, String, f64)> = vec![(0, String::new(), pk)];
        while let Some((i, acc, p)) = stack.pop() {
            if i == k {
                let shape = format!("({acc})");
                *out.entry(shape).or_insert(0.0) += p;
                continue;
            }
            for (s, sp) in &sub {
                stack.push((i + 1, format!("{acc}{s}"), p * sp));
            }
        }
    }
    out.into_iter().collect()
}

/// Exact shape distribution of the *pruned* tree truncated at `depth`:
/// enumerate the original truncated tree jointly with edge-mark patterns.
fn pruned_shape_distribution(
    law: &OffspringLaw,
    keep_p: f64,
    depth: usize,
) -> Vec<(String, f64)> {
    // The root component of an edge-marked GW tree is again a GW tree: a
    // child contributes its own pruned subtree when its edge survives
    // (probability keep_p), else nothing. Enumerate directly.
    fn shapes(law: &OffspringLaw, keep_p: f64, depth: usize) -> Vec<(String, f64)> {
        if depth == 0 {
            return vec![("*".to_string(), 1.0)];
        }
        let sub = shapes(law, keep_p, depth - 1);
        let probs = law.probs();
        let mut out: std::collections::BTreeMap<String, f64> = Default::default();
        for (k, &pk) in probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            // Each of the k children independently: dropped with 1−p, or
            // kept with p and replaced by a sub-shape.
            let mut stack: Vec<(usize, String, f64)> = vec![(0, String::new(), pk)];
            while let Some((i, acc, pr)) = stack.pop() {
                if i == k {
                    let shape = format!("({acc})");
                    *out.entry(shape).or_insert(0.0) += pr;
                    continue;
                }
                stack.push((i + 1, acc.clone(), pr * (1.0 - keep_p)));
                for (s, sp) in &sub {
                    stack.push((i + 1, format!("{acc}{s}"), pr * keep_p * sp));
                }
            }
        }
        out.into_iter().collect()
    }
    shapes(law, keep_p, depth)
}

/// Chi-square homogeneity test of two histograms over the same bins.
fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, usize, f64) {
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&ca, &cb) in a.iter().zip(b) {
        let tot = (ca + cb) as f64;
        if tot == 0.0 {
            continue;
        }
        let ea = tot * na / (na + nb);
        let eb = tot * nb / (na + nb);
        stat += (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb;
        df += 1;
    }
    df = df.saturating_sub(1);
    let p = if df == 0 {
        1.0
    } else {
        let chi = statrs::distribution::ChiSquared::new(df as f64).unwrap();
        1.0 - statrs::distribution::ContinuousCDF::cdf(&chi, stat)
    };
    (stat, df, p)
}

/// Discrete special-Markov check: prune a binary-critical-style tree with
/// edge clocks at retention p = e^{−θ}, against direct simulation from the
/// thinned offspring law, plus exact enumeration on depth-≤3 truncations.
pub fn special_markov_check(
    law: &OffspringLaw,
    keep_p: f64,
    n: usize,
    depth_cap: usize,
    rng: &mut impl Rng,
) -> Result<SpecialMarkovReport> {
    law.validate()?;
    if !(0.0 < keep_p && keep_p <= 1.0) {
        return Err(Error::domain("keep probability must lie in (0, 1]"));
    }
    // θ with e^{−θ·edge_rate} = keep_p at unit edge rate.
    let theta = -keep_p.ln();
    let thinned = law.thinned(keep_p)?;

    // Histogram bins on total progeny: 1..=15 then overflow.
    let nbins = 16usize;
    let bin_of = |progeny: usize| progeny.min(nbins).saturating_sub(1);
    let mut pruned_hist = vec![0u64; nbins];
    let mut thinned_hist = vec![0u64; nbins];
    for _ in 0..n {
        let tree = sample_gw(law, depth_cap, ClockConfig::default(), rng)?;
        let stat = prune_at(&tree, theta);
        pruned_hist[bin_of(stat.root_component_size)] += 1;
        let direct = sample_gw(&thinned, depth_cap, ClockConfig::default(), rng)?;
        thinned_hist[bin_of(direct.nodes.len())] += 1;
    }
    let (chisq, df, p_value) = chi_square_two_sample(&pruned_hist, &thinned_hist);

    // Exact enumeration at depth 3.
    let lhs = pruned_shape_distribution(law, keep_p, 3);
    let rhs = truncated_shape_distribution(&thinned, 3);
    let mut tv = 0.0;
    let mut keys: std::collections::BTreeSet<String> = Default::default();
    keys.extend(lhs.iter().map(|(k, _)| k.clone()));
    keys.extend(rhs.iter().map(|(k, _)| k.clone()));
    for key in keys {
        let a = lhs.iter().find(|(k, _)| *k == key).map_or(0.0, |(_, v)| *v);
        let b = rhs.iter().find(|(k, _)| *k == key).map_or(0.0, |(_, v)| *v);
        tv += 0.5 * (a - b).abs();
    }

    let bins = pruned_hist
        .iter()
        .zip(&thinned_hist)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let label = if i + 1 < nbins {
                format!("{}", i + 1)
            } else {
                format!(">={nbins}")
            };
            (label, a, b)
        })
        .collect();

    Ok(SpecialMarkovReport {
        chi_square: chisq,
        degrees: df,
        p_value,
        pass_chi_square: p_value > 0.01,
        enumeration_tv: tv,
        pass_enumeration: tv <= 1e-12,
        bins,
    })
}
