//! Gauss–Legendre rules and the geometrically graded rule used for
//! logarithmic endpoint singularities.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre rule with `n` points mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "empty Gauss rule");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Rule { nodes, weights }
}

/// Cached rules for the orders used in assembly.
pub fn cached_gauss(n: usize) -> &'static Rule {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=64)
            .map(|n| match n {
                0 => Rule { nodes: vec![], weights: vec![] },
                _ => gauss_legendre(n),
            })
            .collect()
    });
    &rules[n]
}

/// Composite rule on `[0, 1]` graded geometrically toward 0: subintervals
/// `[ρ^{j+1}, ρ^j]`, each carrying an `order`-point Gauss rule, down to
/// `ρ^levels`, plus a final plain cell at the origin. Integrates `f(u) + g(u) ln u` with smooth `f`, `g`.
pub fn graded_log(ratio: f64, levels: usize, order: usize) -> Rule {
    let base = cached_gauss(order);
    let mut nodes = Vec::with_capacity(levels * order);
    let mut weights = Vec::with_capacity(levels * order);
    let mut hi = 1.0;
    for _ in 0..levels {
        let lo = hi * ratio;
        for (x, w) in base.iter() {
            nodes.push(lo + (hi - lo) * x);
            weights.push((hi - lo) * w);
        }
        hi = lo;
    }
    // Innermost cell [0, ρ^levels] with a plain rule.
    for (x, w) in base.iter() {
        nodes.push(hi * x);
        weights.push(hi * w);
    }
    Rule { nodes, weights }
}

/// Graded rule for `ln u` singularities (coincident panels).
pub fn singular_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| graded_log(0.25, 22, 12))
}

/// Graded rule for the weaker `u ln u` singularity left after a Duffy split
/// (touching panels).
pub fn corner_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| graded_log(0.25, 12, 12))
}
