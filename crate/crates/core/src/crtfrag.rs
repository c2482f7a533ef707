//! Quadratic-case CRT fragmentation at desk scale: normalized Brownian
//! excursions on a dyadic grid, binary subtrees spanned by uniform leaves,
//! Poisson cuts on the skeleton, and the tagged (root) fragment mass.
//!
//! The tree is coded by g = 2e with cut intensity θ per unit length, the
//! normalization that goes with β = 1/2.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};

/// Normalized Brownian excursion sampled on a dyadic grid.
#[derive(Debug, Clone)]
pub struct GridExcursion {
    /// Grid size (power of two).
    pub n: usize,
    /// Values e(k/n) for k = 0..=n, with e(0) = e(1) = 0.
    pub values: Vec<f64>,
}

/// Vervaat construction, bit-exact recipe:
/// 1. Walk W_k = Σ_{i≤k} ξ_i √(1/n), ξ_i standard normal drawn in order.
/// 2. Bridge b_k = W_k − (k/n) W_n.
/// 3. Cyclic shift at the argmin m (first one on ties):
///    e_k = b_{(m+k) mod n} − b_m, and e_n = e_0 = 0.
pub fn sample_excursion(n: usize, rng: &mut impl Rng) -> Result<GridExcursion> {
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "grid size {n} must be a power of two, at least 256"
        )));
    }
    let step = (1.0 / n as f64).sqrt();
    let mut w = Vec::with_capacity(n + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for _ in 0..n {
        let xi: f64 = StandardNormal.sample(rng);
        acc += xi * step;
        w.push(acc);
    }
    let wn = w[n];
    let bridge: Vec<f64> = (0..=n).map(|k| w[k] - (k as f64 / n as f64) * wn).collect();
    let mut argmin = 0;
    for k in 1..n {
        if bridge[k] < bridge[argmin] {
            argmin = k;
        }
    }
    let bmin = bridge[argmin];
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k == n {
            values.push(0.0);
        } else {
            values.push(bridge[(argmin + k) % n] - bmin);
        }
    }
    values[0] = 0.0;
    Ok(GridExcursion { n, values })
}

/// Sparse table for O(1) range-minimum queries returning (value, index).
pub struct RangeMin {
    levels: Vec<Vec<(f64, usize)>>,
}

impl RangeMin {
    pub fn build(values: &[f64]) -> RangeMin {
        let n = values.len();
        let mut levels = Vec::new();
        levels.push(values.iter().copied().zip(0..n).collect::<Vec<_>>());
        let mut len = 1;
        while len * 2 <= n {
            let prev = levels.last().unwrap();
            let next: Vec<(f64, usize)> = (0..=n - 2 * len)
                .map(|i| {
                    let a = prev[i];
                    let b = prev[i + len];
                    if a.0 <= b.0 {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            levels.push(next);
            len *= 2;
        }
        RangeMin { levels }
    }

    /// Minimum over the inclusive index range [lo, hi].
    pub fn query(&self, lo: usize, hi: usize) -> (f64, usize) {
        assert!(lo <= hi);
        if lo == hi {
            return self.levels[0][lo];
        }
        let span = hi - lo + 1;
        let k = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let a = self.levels[k][lo];
        let b = self.levels[k][hi + 1 - (1 << k)];
        if a.0 <= b.0 {
            a
        } else {
            b
        }
    }
}

/// A node of the spanned subtree.
#[derive(Debug, Clone)]
pub struct SpanNode {
    pub parent: Option<usize>,
    pub height: f64,
    /// Length of the edge to the parent (0 at the root).
    pub edge_len: f64,
    /// First Poisson cut time on that edge, Exp(edge length).
    pub cut_clock: f64,
}

/// Binary tree spanned by m uniform leaves of the excursion tree, rooted at
/// height 0, with per-edge cut clocks.
#[derive(Debug, Clone)]
pub struct SpannedTree {
    pub nodes: Vec<SpanNode>,
    /// Node indices of the leaves, in grid-time order.
    pub leaves: Vec<usize>,
    /// Leaf grid times (sorted).
    pub leaf_times: Vec<usize>,
}

impl SpannedTree {
    /// Tree distance between two nodes (sum of edge lengths on the path).
    pub fn distance(&self, mut a: usize, mut b: usize) -> f64 {
        let mut da = 0.0;
        let mut db = 0.0;
        let depth = |mut v: usize| {
            let mut d = 0usize;
            while let Some(p) = self.nodes[v].parent {
                v = p;
                d += 1;
            }
            d
        };
        let (mut na, mut nb) = (depth(a), depth(b));
        while na > nb {
            da += self.nodes[a].edge_len;
            a = self.nodes[a].parent.unwrap();
            na -= 1;
        }
        while nb > na {
            db += self.nodes[b].edge_len;
            b = self.nodes[b].parent.unwrap();
            nb -= 1;
        }
        while a != b {
            da += self.nodes[a].edge_len;
            db += self.nodes[b].edge_len;
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        da + db
    }
}

/// Build the spanned subtree of `m` uniform leaves with g = 2e.
///
/// Colliding leaf times are redrawn (positive probability on a grid, zero in
/// the continuum); an error is returned only if the grid is too crowded.
pub fn build_spanned_tree(
    exc: &GridExcursion,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SpannedTree> {
    if m < 2 {
        return Err(Error::domain("need at least two leaves"));
    }
    if m * 4 > exc.n {
        return Err(Error::domain("grid too coarse for this many leaves"));
    }
    let mut times = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while times.len() < m {
        let t = 1 + rng.random_range(0..exc.n - 1);
        if !times.insert(t) {
            attempts += 1;
            if attempts > 100 * m {
                return Err(Error::domain("leaf redraw budget exhausted"));
            }
        }
    }
    let leaf_times: Vec<usize> = times.into_iter().collect();
    let g: Vec<f64> = exc.values.iter().map(|&v| 2.0 * v).collect();
    let rmq = RangeMin::build(&g);

    // Heights of the MRCAs of consecutive leaves.
    let consec: Vec<f64> = leaf_times
        .windows(2)
        .map(|w| rmq.query(w[0], w[1]).0)
        .collect();
    let consec_rmq = RangeMin::build(&consec);

    let mut nodes: Vec<SpanNode> = Vec::with_capacity(2 * m);
    nodes.push(SpanNode {
        parent: None,
        height: 0.0,
        edge_len: 0.0,
        cut_clock: f64::INFINITY,
    });
    let mut leaves = vec![usize::MAX; m];

    // Recursive construction over leaf ranges: the subtree spanned by the
    // leaves lo..=hi attaches below at the height of its overall minimum.
    struct Ctx<'a> {
        g: &'a [f64],
        leaf_times: &'a [usize],
        consec_rmq: &'a RangeMin,
        nodes: &'a mut Vec<SpanNode>,
        leaves: &'a mut [usize],
    }
    fn build_range(c: &mut Ctx, lo: usize, hi: usize, parent: usize, parent_h: f64) {
        if lo == hi {
            let h = c.g[c.leaf_times[lo]];
            let idx = c.nodes.len();
            c.nodes.push(SpanNode {
                parent: Some(parent),
                height: h,
                edge_len: (h - parent_h).max(0.0),
                cut_clock: f64::NAN, // clocks drawn afterwards
            });
            c.leaves[lo] = idx;
            return;
        }
        // Split at the lowest consecutive-pair minimum in the range.
        let (h, k) = c.consec_rmq.query(lo, hi - 1);
        let idx = c.nodes.len();
        c.nodes.push(SpanNode {
            parent: Some(parent),
            height: h,
            edge_len: (h - parent_h).max(0.0),
            cut_clock: f64::NAN,
        });
        build_range(c, lo, k, idx, h);
        build_range(c, k + 1, hi, idx, h);
    }
    {
        let mut ctx = Ctx {
            g: &g,
            leaf_times: &leaf_times,
            consec_rmq: &consec_rmq,
            nodes: &mut nodes,
            leaves: &mut leaves,
        };
        build_range(&mut ctx, 0, m - 1, 0, 0.0);
    }
    // Cut clocks: first Poisson arrival at rate = edge length.
    for node in nodes.iter_mut().skip(1) {
        node.cut_clock = if node.edge_len > 0.0 {
            Exp::new(node.edge_len).unwrap().sample(rng)
        } else {
            f64::INFINITY
        };
    }
    Ok(SpannedTree {
        nodes,
        leaves,
        leaf_times,
    })
}

/// Fraction of leaves still connected to the root at each θ of the grid.
///
/// Coupled across θ through the clocks: the per-leaf disconnect time is the
/// minimum cut clock on its root path, so the fraction is non-increasing.
pub fn tagged_fragment_process(tree: &SpannedTree, thetas: &[f64]) -> Vec<(f64, f64)> {
    let n = tree.nodes.len();
    // Min clock along the path from the root, by parent-before-child order.
    let mut path_min = vec![f64::INFINITY; n];
    for i in 1..n {
        let p = tree.nodes[i].parent.unwrap();
        debug_assert!(p < i);
        path_min[i] = path_min[p].min(tree.nodes[i].cut_clock);
    }
    let disconnect: Vec<f64> = tree.leaves.iter().map(|&l| path_min[l]).collect();
    let m = disconnect.len() as f64;
    thetas
        .iter()
        .map(|&th| {
            let alive = disconnect.iter().filter(|&&d| d > th).count();
            (th, alive as f64 / m)
        })
        .collect()
}

/// Fraction-mass reference CDF at parameter θ (β = 1/2 convention): the
/// tagged fragment is 1/(1+τ_θ), so P(frac ≤ y) = 2Φ(θ/√(1/y − 1)) − 1.
pub fn fragment_reference_cdf(theta: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    // P(τ_θ ≥ 1/y − 1) with P(τ_θ ≤ x) = 2(1 − Φ(θ/√x)) collapses to an
    // error function: 2Φ(z) − 1 = erf(z/√2).
    let x = 1.0 / y - 1.0;
    statrs::function::erf::erf(theta / (2.0 * x).sqrt())
}
