//! Quadrature grids on `[0, 1]` and adaptive Simpson integration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Node placement for an `m`-point rule on `[0, 1]` with equal weights `1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rule {
    /// Nodes `k/m` for `k = 1..=m`.
    #[default]
    RightEndpoint,
    /// Nodes `(k − 1/2)/m` for `k = 1..=m`.
    Midpoint,
}

impl Rule {
    pub fn node(self, k: usize, m: usize) -> f64 {
        match self {
            Rule::RightEndpoint => k as f64 / m as f64,
            Rule::Midpoint => (k as f64 - 0.5) / m as f64,
        }
    }

    pub fn nodes(self, m: usize) -> impl Iterator<Item = f64> {
        (1..=m).map(move |k| self.node(k, m))
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" | "right-endpoint" => Ok(Rule::RightEndpoint),
            "midpoint" => Ok(Rule::Midpoint),
            other => Err(Error::Parse(format!(
                "unknown quadrature rule `{other}` (expected right or midpoint)"
            ))),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::RightEndpoint => "right",
            Rule::Midpoint => "midpoint",
        })
    }
}

/// `(1/m) Σ_k f(node_k)`.
pub fn riemann(rule: Rule, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    rule.nodes(m).map(f).sum::<f64>() / m as f64
}

const MAX_DEPTH: u32 = 48;
/// Levels that are always subdivided, which guards against the five-point
/// estimates agreeing by coincidence on a coarse panel.
const MIN_DEPTH: u32 = 5;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_simpson_with_min_depth(f, a, b, tol, MIN_DEPTH)
}

/// As [`adaptive_simpson`] with an explicit number of forced subdivisions.
pub fn adaptive_simpson_with_min_depth(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    min_depth: u32,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let whole = simpson(a, b, fa, fm, fb);
    refine(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        MAX_DEPTH,
        min_depth.min(MAX_DEPTH),
    )
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    min_depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || (MAX_DEPTH - depth >= min_depth && diff.abs() <= 15.0 * tol) {
        return left + right + diff / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, min_depth)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, min_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes() {
        let right: Vec<f64> = Rule::RightEndpoint.nodes(4).collect();
        assert_eq!(right, vec![0.25, 0.5, 0.75, 1.0]);
        let mid: Vec<f64> = Rule::Midpoint.nodes(2).collect();
        assert_eq!(mid, vec![0.25, 0.75]);
    }

    #[test]
    fn riemann_sums() {
        assert_eq!(riemann(Rule::RightEndpoint, 10, |_| 2.0), 2.0);
        // (1/m) Σ k/m = (m+1)/(2m)
        assert!((riemann(Rule::RightEndpoint, 100, |a| a) - 0.505).abs() < 1e-15);
        assert!((riemann(Rule::Midpoint, 100, |a| a) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn simpson_accuracy() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(adaptive_simpson(&|x: f64| x, 0.3, 0.3, 1e-10), 0.0);
    }

    #[test]
    fn rule_parse() {
        assert_eq!("midpoint".parse::<Rule>().unwrap(), Rule::Midpoint);
        assert_eq!("right".parse::<Rule>().unwrap(), Rule::RightEndpoint);
        assert!("left".parse::<Rule>().is_err());
    }
}
