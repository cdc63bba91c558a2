//! Baseline densities on `[0, 1]`: pdf, CDF and inverse-CDF sampling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pathgeom::unit_parameter;
use crate::quadrature::{adaptive_simpson, adaptive_simpson_with_min_depth, riemann, Rule};

const BETA_CDF_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-12;

/// Beta(a, b) restricted to `a, b ≥ 1`, where the pdf is bounded on `[0, 1]`.
///
/// The CDF is adaptive Simpson quadrature of the pdf. Masses of `PANELS`
/// equal panels are integrated once at construction; a query integrates
/// only the partial panel containing `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beta {
    a: f64,
    b: f64,
    inv_norm: f64,
    cumulative: Vec<f64>,
}

impl Beta {
    const PANELS: usize = 256;

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a >= 1.0 && b >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta parameters must be finite and >= 1, got ({a}, {b})"
            )));
        }
        let mut beta = Self {
            a,
            b,
            inv_norm: 1.0,
            cumulative: Vec::new(),
        };
        let panel_tol = BETA_CDF_TOL / Self::PANELS as f64 * 1e-2;
        let mut cumulative = Vec::with_capacity(Self::PANELS + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        for j in 0..Self::PANELS {
            let (lo, hi) = Self::panel(j);
            total += adaptive_simpson(&|s| beta.kernel(s), lo, hi, panel_tol);
            cumulative.push(total);
        }
        beta.inv_norm = 1.0 / total;
        beta.cumulative = cumulative.into_iter().map(|c| c / total).collect();
        Ok(beta)
    }

    fn panel(j: usize) -> (f64, f64) {
        let w = 1.0 / Self::PANELS as f64;
        (j as f64 * w, (j + 1) as f64 * w)
    }

    pub fn params(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn kernel(&self, s: f64) -> f64 {
        s.powf(self.a - 1.0) * (1.0 - s).powf(self.b - 1.0)
    }

    fn pdf(&self, s: f64) -> f64 {
        self.kernel(s) * self.inv_norm
    }

    fn cdf(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        if alpha >= 1.0 {
            return 1.0;
        }
        let j = ((alpha * Self::PANELS as f64) as usize).min(Self::PANELS - 1);
        let (lo, _) = Self::panel(j);
        let partial = adaptive_simpson_with_min_depth(&|s| self.pdf(s), lo, alpha, BETA_CDF_TOL, 1);
        (self.cumulative[j] + partial).clamp(self.cumulative[j], self.cumulative[j + 1])
    }

    /// Bisection on the CDF, first over the panel table and then within
    /// the bracketing panel.
    fn inverse_cdf(&self, u: f64) -> f64 {
        let j = self
            .cumulative
            .partition_point(|&c| c < u)
            .clamp(1, Self::PANELS)
            - 1;
        let (mut lo, mut hi) = Self::panel(j);
        while hi - lo > INVERSE_TOL {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Right-continuous empirical CDF `Ĝ_m(α) = #{j : s_j ≤ α} / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical CDF needs at least one sample".into(),
            ));
        }
        for &s in &samples {
            unit_parameter("sample", s)?;
        }
        for s in &mut samples {
            *s = s.clamp(0.0, 1.0);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    /// Reads one real per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let samples = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: `{l}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cdf(&self, alpha: f64) -> f64 {
        let count = self.samples.partition_point(|&s| s <= alpha);
        count as f64 / self.samples.len() as f64
    }

    /// Smallest sample `s_j` with `Ĝ_m(s_j) ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let m = self.samples.len();
        let idx = ((u * m as f64).ceil() as usize).clamp(1, m) - 1;
        self.samples[idx]
    }

    /// Largest distance between this empirical CDF and `cdf`, evaluated on
    /// both sides of every jump.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let m = self.samples.len() as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let g = cdf(s);
                let above = (j + 1) as f64 / m - g;
                let below = g - j as f64 / m;
                above.max(below)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform,
    /// `p(s) = 2s`.
    TriangularUp,
    Beta(Beta),
    /// All mass at `s0`; `G(α) = 1` for `α ≥ s0`.
    PointMass(f64),
    Empirical(EmpiricalCdf),
}

impl Density {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Beta::new(a, b).map(Density::Beta)
    }

    pub fn point_mass(s0: f64) -> Result<Self> {
        unit_parameter("s0", s0).map(Density::PointMass)
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        EmpiricalCdf::new(samples).map(Density::Empirical)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Density::Uniform => "uniform",
            Density::TriangularUp => "triangular",
            Density::Beta(_) => "beta",
            Density::PointMass(_) => "pointmass",
            Density::Empirical(_) => "empirical",
        }
    }

    /// True for the kinds with a pdf (absolutely continuous on `[0, 1]`).
    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            Density::Uniform | Density::TriangularUp | Density::Beta(_)
        )
    }

    pub fn pdf(&self, s: f64) -> Result<f64> {
        let s = unit_parameter("s", s)?;
        match self {
            Density::Uniform => Ok(1.0),
            Density::TriangularUp => Ok(2.0 * s),
            Density::Beta(b) => Ok(b.pdf(s)),
            Density::PointMass(_) | Density::Empirical(_) => Err(Error::Unsupported {
                op: "pdf",
                kind: self.kind().into(),
            }),
        }
    }

    pub fn cdf(&self, alpha: f64) -> Result<f64> {
        let alpha = unit_parameter("alpha", alpha)?;
        Ok(self.cdf_at(alpha))
    }

    /// CDF for an `alpha` already known to lie in `[0, 1]`.
    pub(crate) fn cdf_at(&self, alpha: f64) -> f64 {
        match self {
            Density::Uniform => alpha,
            Density::TriangularUp => alpha * alpha,
            Density::Beta(b) => b.cdf(alpha),
            Density::PointMass(s0) => {
                if alpha >= *s0 {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Empirical(e) => e.cdf(alpha),
        }
    }

    /// Generalized inverse `G⁻¹(u) = inf{α : G(α) ≥ u}`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        let u = unit_parameter("u", u)?;
        Ok(match self {
            Density::Uniform => u,
            Density::TriangularUp => u.sqrt(),
            Density::PointMass(s0) => *s0,
            Density::Empirical(e) => e.quantile(u),
            Density::Beta(b) => b.inverse_cdf(u),
        })
    }

    /// Draws `s = G⁻¹(U)` with `U` uniform on `[0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.inverse_cdf(u).expect("uniform draw lies in [0, 1)")
    }

    /// `∫₀¹ G(α)² dα` by the right-endpoint rule on `grid_size` nodes, the
    /// same rule the attribution estimators use. This is the predicted ratio
    /// of path-sampled to standard attribution variance under white gradient
    /// noise.
    pub fn l2_norm_sq_of_cdf(&self, grid_size: usize) -> Result<f64> {
        if grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid_size must be at least 2, got {grid_size}"
            )));
        }
        Ok(riemann(Rule::RightEndpoint, grid_size, |a| {
            let g = self.cdf_at(a);
            g * g
        }))
    }
}

impl FromStr for Density {
    type Err = Error;

    /// Parses `uniform`, `triangular`, `beta:a,b`, `pointmass:s0` or
    /// `empirical:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a.trim())),
            None => (s, None),
        };
        let num = |text: &str| {
            text.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("density `{s}`: {e}")))
        };
        match (kind, arg) {
            ("uniform", None) => Ok(Density::Uniform),
            ("triangular" | "triangular_up", None) => Ok(Density::TriangularUp),
            ("beta", Some(args)) => {
                let (a, b) = args
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("density `{s}`: expected beta:a,b")))?;
                Density::beta(num(a)?, num(b)?)
            }
            ("pointmass" | "point_mass", Some(s0)) => Density::point_mass(num(s0)?),
            ("empirical", Some(path)) if !path.is_empty() => {
                EmpiricalCdf::from_file(Path::new(path)).map(Density::Empirical)
            }
            _ => Err(Error::Parse(format!(
                "unknown density `{s}` (expected uniform, triangular, beta:a,b, pointmass:s0, empirical:<path>)"
            ))),
        }
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Beta(b) => write!(f, "beta:{},{}", b.a, b.b),
            Density::PointMass(s0) => write!(f, "pointmass:{s0}"),
            Density::Empirical(e) => write!(f, "empirical(m={})", e.len()),
            other => f.write_str(other.kind()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn continuous() -> Vec<Density> {
        vec![
            Density::Uniform,
            Density::TriangularUp,
            Density::beta(2.0, 2.0).unwrap(),
            Density::beta(2.5, 1.5).unwrap(),
        ]
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(Density::Uniform.pdf(0.7).unwrap(), 1.0);
        assert_eq!(Density::TriangularUp.pdf(0.5).unwrap(), 1.0);
        let b = Density::beta(2.0, 2.0).unwrap();
        assert!((b.pdf(0.5).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pdf_unsupported_for_discrete_kinds() {
        let pm = Density::point_mass(0.3).unwrap();
        assert!(matches!(pm.pdf(0.3), Err(Error::Unsupported { .. })));
        let e = Density::empirical(vec![0.1, 0.2]).unwrap();
        assert!(matches!(e.pdf(0.3), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(Density::Uniform.cdf(0.4).unwrap(), 0.4);
        let pm0 = Density::point_mass(0.0).unwrap();
        for a in [0.0, 1e-9, 0.5, 1.0] {
            assert_eq!(pm0.cdf(a).unwrap(), 1.0);
        }
        assert_eq!(Density::TriangularUp.cdf(0.5).unwrap(), 0.25);
        let pm = Density::point_mass(0.3).unwrap();
        assert_eq!(pm.cdf(0.29).unwrap(), 0.0);
        assert_eq!(pm.cdf(0.3).unwrap(), 1.0);
        let b = Density::beta(2.0, 2.0).unwrap();
        // 3a² − 2a³
        assert!((b.cdf(0.3).unwrap() - (0.27 - 0.054)).abs() < 1e-10);
    }

    #[test]
    fn pdf_integrates_to_one() {
        for d in continuous() {
            let total = adaptive_simpson(&|s| d.pdf(s).unwrap(), 0.0, 1.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "{d}: {total}");
        }
    }

    #[test]
    fn cdf_shape_invariants() {
        let n = 10_000;
        for d in continuous() {
            assert_eq!(d.cdf(0.0).unwrap(), 0.0);
            assert_eq!(d.cdf(1.0).unwrap(), 1.0);
            let mut prev = 0.0;
            for k in 0..=n {
                let g = d.cdf(k as f64 / n as f64).unwrap();
                assert!((0.0..=1.0).contains(&g));
                assert!(g >= prev, "{d} decreases at {k}");
                prev = g;
            }
        }
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        let h = 1e-6;
        for d in continuous() {
            for k in 1..100 {
                let a = k as f64 / 100.0;
                let fd = (d.cdf(a + h).unwrap() - d.cdf(a - h).unwrap()) / (2.0 * h);
                let p = d.pdf(a).unwrap();
                assert!((fd - p).abs() < 1e-5, "{d} at {a}: {fd} vs {p}");
            }
        }
    }

    #[test]
    fn inverse_cdf_examples() {
        assert_eq!(Density::Uniform.inverse_cdf(0.37).unwrap(), 0.37);
        assert_eq!(Density::TriangularUp.inverse_cdf(0.25).unwrap(), 0.5);
        let pm = Density::point_mass(0.3).unwrap();
        assert_eq!(pm.inverse_cdf(0.9).unwrap(), 0.3);
        let b = Density::beta(2.0, 2.0).unwrap();
        assert!((b.inverse_cdf(0.5).unwrap() - 0.5).abs() < 1e-11);
        let q = b.inverse_cdf(0.216).unwrap();
        assert!((b.cdf(q).unwrap() - 0.216).abs() < 1e-10);
    }

    #[test]
    fn sampler_matches_cdf() {
        for d in continuous() {
            let mut rng = substream(11, 0);
            let samples: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
            let ks = EmpiricalCdf::new(samples)
                .unwrap()
                .ks_distance(|a| d.cdf_at(a));
            assert!(ks < 0.01, "{d}: KS {ks}");
        }
    }

    #[test]
    fn empirical_cdf_steps() {
        let e = EmpiricalCdf::new(vec![0.5, 0.1, 0.9, 0.5]).unwrap();
        assert_eq!(e.samples(), &[0.1, 0.5, 0.5, 0.9]);
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.cdf(0.1), 0.25);
        assert_eq!(e.cdf(0.49), 0.25);
        assert_eq!(e.cdf(0.5), 0.75);
        assert_eq!(e.cdf(1.0), 1.0);
        assert_eq!(e.quantile(0.25), 0.1);
        assert_eq!(e.quantile(0.26), 0.5);
        assert_eq!(e.quantile(1.0), 0.9);
        assert!(EmpiricalCdf::new(vec![]).is_err());
        assert!(EmpiricalCdf::new(vec![1.5]).is_err());
    }

    #[test]
    fn empirical_sampling_is_uniform_over_points() {
        let d = Density::empirical(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let mut rng = substream(3, 0);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            let s = d.sample(&mut rng);
            counts[(s * 5.0).round() as usize - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn l2_norm_examples() {
        let uni = Density::Uniform.l2_norm_sq_of_cdf(10_000).unwrap();
        assert!((uni - 1.0 / 3.0).abs() < 1e-4);
        let tri = Density::TriangularUp.l2_norm_sq_of_cdf(10_000).unwrap();
        assert!((tri - 0.2).abs() < 1e-4);
        let pm = Density::point_mass(0.0)
            .unwrap()
            .l2_norm_sq_of_cdf(10_000)
            .unwrap();
        assert_eq!(pm, 1.0);
        // 13/35 for beta(2,2)
        let b = Density::beta(2.0, 2.0)
            .unwrap()
            .l2_norm_sq_of_cdf(10_000)
            .unwrap();
        assert!((b - 13.0 / 35.0).abs() < 1e-4);
        assert!(Density::Uniform.l2_norm_sq_of_cdf(1).is_err());
    }

    #[test]
    fn l2_norm_below_one_for_interior_support() {
        for d in continuous() {
            assert!(d.l2_norm_sq_of_cdf(10_000).unwrap() < 1.0);
        }
    }

    #[test]
    fn descriptors() {
        assert_eq!("uniform".parse::<Density>().unwrap(), Density::Uniform);
        assert_eq!(
            "triangular".parse::<Density>().unwrap(),
            Density::TriangularUp
        );
        let b: Density = "beta:2,3".parse().unwrap();
        assert_eq!(b.to_string(), "beta:2,3");
        let pm: Density = "pointmass:0.25".parse().unwrap();
        assert_eq!(pm, Density::PointMass(0.25));
        assert!("beta:0.5,2".parse::<Density>().is_err());
        assert!("pointmass:2".parse::<Density>().is_err());
        assert!("gaussian".parse::<Density>().is_err());
        assert!("empirical:".parse::<Density>().is_err());
    }

    #[test]
    fn empirical_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        std::fs::write(&path, "# draws\n0.3\n\n0.1\n0.7\n").unwrap();
        let d: Density = format!("empirical:{}", path.display()).parse().unwrap();
        match d {
            Density::Empirical(e) => assert_eq!(e.samples(), &[0.1, 0.3, 0.7]),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "0.3\nabc\n").unwrap();
        assert!(format!("empirical:{}", path.display())
            .parse::<Density>()
            .is_err());
    }
}
