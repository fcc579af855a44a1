//! Radius-of-influence laws.
//!
//! Every vertex that hears the rumour draws an independent radius `R` and
//! informs the whole graph ball of that radius around itself. This module
//! holds the supported laws, their PMF/CDF, sampling, the moment `E[d^R]`
//! and the text grammar used on the command line and in environment files:
//!
//! ```text
//! bernoulli:p=0.7
//! geometric:p=0.3        P[R = k] = (1 - p) p^k
//! binomial:n=4,p=0.25
//! pmf:0.2,0.3,0.5        explicit weights for k = 0, 1, 2, ...
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Series over an infinite support stop once the remaining tail mass drops
/// below this value.
pub const TAIL_TOLERANCE: f64 = 1e-15;

/// Largest binomial `n` accepted; keeps the coefficients inside `f64` range.
pub const MAX_BINOMIAL_N: u32 = 1000;

const NORMALIZATION_WARN: f64 = 1e-9;

/// A non-negative real or `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn from_f64(x: f64) -> Self {
        if x.is_finite() {
            ExtendedReal::Finite(x)
        } else {
            ExtendedReal::Infinite
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The value as `f64`, with `+inf` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::Finite(x) => x,
            ExtendedReal::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), Infinite) => Some(Ordering::Less),
            (Infinite, Finite(_)) => Some(Ordering::Greater),
            (Infinite, Infinite) => Some(Ordering::Equal),
        }
    }
}

impl PartialEq<f64> for ExtendedReal {
    fn eq(&self, other: &f64) -> bool {
        *self == ExtendedReal::from_f64(*other)
    }
}

impl PartialOrd<f64> for ExtendedReal {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.partial_cmp(&ExtendedReal::from_f64(*other))
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::from_f64(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl Add<f64> for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: f64) -> Self {
        self + ExtendedReal::from_f64(rhs)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Serialized as a number, or as the string `"inf"`.
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => serializer.serialize_f64(*x),
            ExtendedReal::Infinite => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Bernoulli {
        p: f64,
    },
    Geometric {
        p: f64,
        sampler: rand_distr::Geometric,
    },
    Binomial {
        n: u32,
        p: f64,
        sampler: rand_distr::Binomial,
    },
    Explicit {
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

/// Law of the radius of influence `R` over the non-negative integers.
///
/// Values are immutable once built; share them freely between workers.
#[derive(Clone, Debug)]
pub struct RadiusDistribution {
    kind: Kind,
}

/// Parameter view of a [`RadiusDistribution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family<'a> {
    Bernoulli { p: f64 },
    Geometric { p: f64 },
    Binomial { n: u32, p: f64 },
    Explicit { weights: &'a [f64] },
}

fn check_probability(param: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ParamOutOfRange {
            param,
            value,
            expected: "[0, 1]",
        })
    }
}

impl RadiusDistribution {
    /// `P[R = 1] = p`, `P[R = 0] = 1 - p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        check_probability("p", p)?;
        Ok(Self {
            kind: Kind::Bernoulli { p },
        })
    }

    /// `P[R = k] = (1 - p) p^k` for `k = 0, 1, 2, ...`; requires `p < 1`.
    pub fn geometric(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::ParamOutOfRange {
                param: "p",
                value: p,
                expected: "[0, 1)",
            });
        }
        // rand_distr counts failures before the first success.
        let sampler = rand_distr::Geometric::new(1.0 - p).map_err(|_| Error::ParamOutOfRange {
            param: "p",
            value: p,
            expected: "[0, 1)",
        })?;
        Ok(Self {
            kind: Kind::Geometric { p, sampler },
        })
    }

    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        check_probability("p", p)?;
        if n > MAX_BINOMIAL_N {
            return Err(Error::ParamOutOfRange {
                param: "n",
                value: n as f64,
                expected: "0..=1000",
            });
        }
        let sampler =
            rand_distr::Binomial::new(n as u64, p).map_err(|_| Error::ParamOutOfRange {
                param: "p",
                value: p,
                expected: "[0, 1]",
            })?;
        Ok(Self {
            kind: Kind::Binomial { n, p, sampler },
        })
    }

    /// Explicit PMF for `k = 0..weights.len()`. Weights are normalized; a raw
    /// sum further than 1e-9 from one is accepted with a warning.
    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::ParamOutOfRange {
                param: "weights",
                value: 0.0,
                expected: "at least one weight",
            });
        }
        for &w in &weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::ParamOutOfRange {
                    param: "weight",
                    value: w,
                    expected: "finite and non-negative",
                });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ParamOutOfRange {
                param: "weights",
                value: total,
                expected: "positive total mass",
            });
        }
        if (total - 1.0).abs() > NORMALIZATION_WARN {
            log::warn!("pmf weights sum to {total}; normalizing");
        }
        let weights: Vec<f64> = if total == 1.0 {
            weights
        } else {
            weights.iter().map(|w| w / total).collect()
        };
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            kind: Kind::Explicit {
                weights,
                cumulative,
            },
        })
    }

    pub fn family(&self) -> Family<'_> {
        match &self.kind {
            Kind::Bernoulli { p } => Family::Bernoulli { p: *p },
            Kind::Geometric { p, .. } => Family::Geometric { p: *p },
            Kind::Binomial { n, p, .. } => Family::Binomial { n: *n, p: *p },
            Kind::Explicit { weights, .. } => Family::Explicit { weights },
        }
    }

    /// `P[R = k]`.
    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            Kind::Bernoulli { p } => match k {
                0 => 1.0 - p,
                1 => *p,
                _ => 0.0,
            },
            Kind::Geometric { p, .. } => (1.0 - p) * pow_u64(*p, k),
            Kind::Binomial { n, p, .. } => {
                let n = *n as u64;
                if k > n {
                    return 0.0;
                }
                binomial_coefficient(n, k) * pow_u64(*p, k) * pow_u64(1.0 - p, n - k)
            }
            Kind::Explicit { weights, .. } => weights.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P[R <= k]`; zero for negative `k`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let k = k as u64;
        match &self.kind {
            Kind::Bernoulli { p } => {
                if k == 0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Kind::Geometric { p, .. } => 1.0 - pow_u64(*p, k.saturating_add(1)),
            Kind::Binomial { n, .. } => {
                if k >= *n as u64 {
                    1.0
                } else {
                    (0..=k).map(|i| self.pmf(i)).sum::<f64>().min(1.0)
                }
            }
            Kind::Explicit { cumulative, .. } => {
                if k as usize >= cumulative.len() - 1 {
                    1.0
                } else {
                    cumulative[k as usize]
                }
            }
        }
    }

    /// `P[R = 0]`.
    pub fn p0(&self) -> f64 {
        self.pmf(0)
    }

    /// Largest `k` with `P[R = k] > 0` when the support is finite.
    pub fn support_max(&self) -> Option<u64> {
        match &self.kind {
            Kind::Bernoulli { .. } => Some(1),
            Kind::Geometric { p, .. } => (*p == 0.0).then_some(0),
            Kind::Binomial { n, .. } => Some(*n as u64),
            Kind::Explicit { weights, .. } => Some(weights.len() as u64 - 1),
        }
    }

    /// Engines require `0 < P[R = 0] < 1`.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let p0 = self.p0();
        if p0 > 0.0 && p0 < 1.0 {
            Ok(())
        } else {
            Err(Error::DegenerateRadius { p0 })
        }
    }

    /// Draws one radius.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.kind {
            Kind::Bernoulli { p } => (rng.random::<f64>() < *p) as u32,
            Kind::Geometric { sampler, .. } => sampler.sample(rng).min(u32::MAX as u64) as u32,
            Kind::Binomial { sampler, .. } => sampler.sample(rng) as u32,
            Kind::Explicit { cumulative, .. } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u);
                k.min(cumulative.len() - 1) as u32
            }
        }
    }

    /// `(k, P[R = k])` pairs over the support. For infinite support the
    /// sequence stops once `P[R > k]` falls below [`TAIL_TOLERANCE`].
    pub fn terms(&self) -> Terms<'_> {
        Terms {
            dist: self,
            k: 0,
            done: false,
        }
    }

    /// `E[f(R)]` for `0 <= f <= 1`, summed over [`terms`](Self::terms).
    pub fn expect_unit<F: FnMut(u64) -> f64>(&self, mut f: F) -> f64 {
        self.terms().map(|(k, pk)| pk * f(k)).sum()
    }

    /// `E[d^R]`, or `+inf` when the series diverges.
    pub fn expected_d_power(&self, d: u32) -> ExtendedReal {
        let d = d as f64;
        match &self.kind {
            Kind::Bernoulli { p } => ExtendedReal::from_f64(1.0 - p + p * d),
            Kind::Geometric { p, .. } => {
                if p * d >= 1.0 {
                    ExtendedReal::Infinite
                } else {
                    ExtendedReal::from_f64((1.0 - p) / (1.0 - p * d))
                }
            }
            Kind::Binomial { n, p, .. } => {
                ExtendedReal::from_f64((1.0 - p + p * d).powi(*n as i32))
            }
            Kind::Explicit { weights, .. } => ExtendedReal::from_f64(
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * d.powi(k as i32))
                    .sum(),
            ),
        }
    }
}

impl PartialEq for RadiusDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.family() == other.family()
    }
}

/// Iterator returned by [`RadiusDistribution::terms`].
pub struct Terms<'a> {
    dist: &'a RadiusDistribution,
    k: u64,
    done: bool,
}

impl Iterator for Terms<'_> {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<(u64, f64)> {
        if self.done {
            return None;
        }
        let k = self.k;
        let pk = self.dist.pmf(k);
        self.k += 1;
        self.done = match &self.dist.kind {
            Kind::Geometric { p, .. } => pow_u64(*p, k + 1) < TAIL_TOLERANCE,
            _ => Some(k) >= self.dist.support_max(),
        };
        Some((k, pk))
    }
}

fn pow_u64(x: f64, k: u64) -> f64 {
    if k > i32::MAX as u64 {
        if x < 1.0 {
            0.0
        } else {
            x
        }
    } else {
        x.powi(k as i32)
    }
}

fn binomial_coefficient(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

impl fmt::Display for RadiusDistribution {
    /// Canonical spec string; parses back to an equal distribution.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family() {
            Family::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            Family::Geometric { p } => write!(f, "geometric:p={p}"),
            Family::Binomial { n, p } => write!(f, "binomial:n={n},p={p}"),
            Family::Explicit { weights } => {
                f.write_str("pmf:")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for RadiusDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_dist(s)
    }
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        msg: msg.into(),
    }
}

/// Comma-separated fields with their byte offsets.
fn fields(body: &str, offset: usize) -> impl Iterator<Item = (usize, &str)> {
    let mut pos = offset;
    body.split(',').map(move |field| {
        let start = pos;
        pos += field.len() + 1;
        (start, field)
    })
}

fn parse_number<T: FromStr>(text: &str, pos: usize) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| syntax(pos, format!("cannot parse number {:?}", text.trim())))
}

/// Parses `family ':' key '=' value (',' key '=' value)*`, or
/// `pmf:` followed by a comma-separated weight list.
pub fn parse_dist(spec: &str) -> Result<RadiusDistribution> {
    let colon = spec
        .find(':')
        .ok_or_else(|| syntax(spec.len(), "expected ':' after the family name"))?;
    let family = spec[..colon].trim();
    let body_start = colon + 1;
    let body = &spec[body_start..];
    if body.trim().is_empty() {
        return Err(syntax(body_start, "missing parameters"));
    }

    if family == "pmf" {
        let weights = fields(body, body_start)
            .map(|(pos, w)| {
                if w.trim().is_empty() {
                    Err(syntax(pos, "empty weight"))
                } else {
                    parse_number::<f64>(w, pos)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        return RadiusDistribution::explicit(weights);
    }

    let allowed: &[&str] =
        match family {
            "bernoulli" | "geometric" => &["p"],
            "binomial" => &["n", "p"],
            _ => return Err(syntax(
                0,
                format!(
                    "unknown family {family:?} (expected bernoulli, geometric, binomial or pmf)"
                ),
            )),
        };

    let mut values: Vec<(&str, &str, usize)> = Vec::new();
    for (pos, field) in fields(body, body_start) {
        let eq = field
            .find('=')
            .ok_or_else(|| syntax(pos, format!("expected key=value, found {field:?}")))?;
        let key = field[..eq].trim();
        if !allowed.contains(&key) {
            return Err(syntax(
                pos,
                format!("unknown parameter {key:?} for {family}"),
            ));
        }
        if values.iter().any(|(k, _, _)| *k == key) {
            return Err(syntax(pos, format!("duplicate parameter {key:?}")));
        }
        values.push((key, &field[eq + 1..], pos + eq + 1));
    }
    let get = |key: &str| {
        values
            .iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, v, pos)| (*v, *pos))
            .ok_or_else(|| syntax(spec.len(), format!("missing parameter {key:?}")))
    };

    let (p_text, p_pos) = get("p")?;
    let p: f64 = parse_number(p_text, p_pos)?;
    match family {
        "bernoulli" => RadiusDistribution::bernoulli(p),
        "geometric" => RadiusDistribution::geometric(p),
        _ => {
            let (n_text, n_pos) = get("n")?;
            RadiusDistribution::binomial(parse_number(n_text, n_pos)?, p)
        }
    }
}

/// Depth-indexed source of radius laws. A homogeneous law answers the same
/// distribution at every depth.
pub trait RadiusSource: Sync {
    fn dist_at(&self, depth: u32) -> &RadiusDistribution;
}

impl RadiusSource for RadiusDistribution {
    fn dist_at(&self, _depth: u32) -> &RadiusDistribution {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pmf_examples() {
        let b = RadiusDistribution::bernoulli(0.7).unwrap();
        assert_eq!(b.pmf(1), 0.7);
        let g = RadiusDistribution::geometric(0.5).unwrap();
        assert_eq!(g.pmf(2), 0.125);
        let bin = RadiusDistribution::binomial(4, 0.25).unwrap();
        assert!(close(bin.pmf(0), 81.0 / 256.0, 1e-15));
        assert_eq!(bin.pmf(5), 0.0);
        assert_eq!(b.pmf(2), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let b = RadiusDistribution::bernoulli(0.7).unwrap();
        assert!(close(b.cdf(0), 0.3, 1e-15));
        let g = RadiusDistribution::geometric(0.4).unwrap();
        assert!(close(g.cdf(1), 0.6 + 0.6 * 0.4, 1e-15));
        assert_eq!(g.cdf(-1), 0.0);
        assert_eq!(b.cdf(-1), 0.0);
    }

    #[test]
    fn cdf_matches_pmf_partial_sums() {
        let dists = [
            RadiusDistribution::bernoulli(0.3).unwrap(),
            RadiusDistribution::geometric(0.45).unwrap(),
            RadiusDistribution::binomial(7, 0.6).unwrap(),
            RadiusDistribution::explicit(vec![0.1, 0.0, 0.4, 0.5]).unwrap(),
        ];
        for dist in &dists {
            let mut acc = 0.0;
            let mut prev = 0.0;
            for k in 0..60 {
                acc += dist.pmf(k);
                let c = dist.cdf(k as i64);
                assert!(close(c, acc, 1e-12), "{dist} k={k}: {c} vs {acc}");
                assert!(c >= prev);
                prev = c;
            }
            assert!(close(prev, 1.0, 1e-12));
        }
    }

    #[test]
    fn expected_d_power_closed_forms() {
        let b = RadiusDistribution::bernoulli(0.5).unwrap();
        assert_eq!(b.expected_d_power(2), ExtendedReal::Finite(1.5));
        assert_eq!(
            RadiusDistribution::geometric(0.5)
                .unwrap()
                .expected_d_power(2),
            ExtendedReal::Infinite
        );
        let g = RadiusDistribution::geometric(0.2).unwrap();
        let ExtendedReal::Finite(v) = g.expected_d_power(2) else {
            panic!("finite expected")
        };
        assert!(close(v, 0.8 / 0.6, 1e-15));
    }

    /// Brute-force partial sum of p_k d^k with the geometric remainder bound.
    fn brute_force_d_power(dist: &RadiusDistribution, d: u32) -> f64 {
        let mut sum = 0.0;
        for k in 0..10_000u64 {
            let pk = dist.pmf(k);
            if pk == 0.0 && k > 64 {
                break;
            }
            sum += pk * (d as f64).powi(k as i32);
        }
        sum
    }

    #[test]
    fn expected_d_power_agrees_with_partial_sums() {
        let cases = [
            (RadiusDistribution::geometric(0.27).unwrap(), 2),
            (RadiusDistribution::geometric(0.1).unwrap(), 3),
            (RadiusDistribution::geometric(0.3).unwrap(), 3),
            (RadiusDistribution::binomial(4, 0.5).unwrap(), 2),
            (RadiusDistribution::binomial(6, 0.2).unwrap(), 5),
            (RadiusDistribution::bernoulli(0.9).unwrap(), 7),
            (
                RadiusDistribution::explicit(vec![0.25, 0.25, 0.5]).unwrap(),
                3,
            ),
        ];
        for (dist, d) in &cases {
            let exact = dist.expected_d_power(*d).to_f64();
            let brute = brute_force_d_power(dist, *d);
            assert!(
                (exact - brute).abs() <= 1e-10 * exact.max(1.0),
                "{dist} d={d}: {exact} vs {brute}"
            );
        }
    }

    #[test]
    fn extended_real_ordering() {
        assert!(ExtendedReal::Infinite > ExtendedReal::Finite(1e300));
        assert!(ExtendedReal::Finite(2.0) > 1.5);
        assert_eq!(
            ExtendedReal::Finite(1.0) + ExtendedReal::Infinite,
            ExtendedReal::Infinite
        );
        assert_eq!(ExtendedReal::Finite(1.0) + 2.0, ExtendedReal::Finite(3.0));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_dist("bernoulli:p=0.7").unwrap(),
            RadiusDistribution::bernoulli(0.7).unwrap()
        );
        let pmf = parse_dist("pmf:0.2,0.3,0.5").unwrap();
        assert!(close(pmf.pmf(0), 0.2, 1e-15));
        assert!(close(pmf.pmf(1), 0.3, 1e-15));
        assert!(close(pmf.pmf(2), 0.5, 1e-15));
        assert!(matches!(
            parse_dist("geometric:p=1.5"),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert_eq!(
            parse_dist("binomial:n=4,p=0.25").unwrap(),
            RadiusDistribution::binomial(4, 0.25).unwrap()
        );
        assert_eq!(
            parse_dist("binomial:p=0.25,n=4").unwrap(),
            RadiusDistribution::binomial(4, 0.25).unwrap()
        );
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_dist("bernoulli:q=0.1") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 10),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dist("binomial:n=4,p=zz") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_dist("poisson:l=1"),
            Err(Error::Syntax { pos: 0, .. })
        ));
        assert!(matches!(parse_dist("bernoulli"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_dist("binomial:p=0.5"),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_dist("bernoulli:p=0.1,p=0.2"),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_dist("pmf:0.5,,0.5"),
            Err(Error::Syntax { pos: 8, .. })
        ));
        assert!(matches!(
            parse_dist("pmf:0,0"),
            Err(Error::ParamOutOfRange { .. })
        ));
        assert!(matches!(
            parse_dist("geometric:p=1"),
            Err(Error::ParamOutOfRange { .. })
        ));
    }

    #[test]
    fn unnormalized_pmf_is_normalized() {
        let dist = RadiusDistribution::explicit(vec![1.0, 3.0]).unwrap();
        assert_eq!(dist.pmf(0), 0.25);
        assert_eq!(dist.pmf(1), 0.75);
        assert_eq!(dist.cdf(5), 1.0);
    }

    #[test]
    fn degenerate_sampling_and_checks() {
        let zero = RadiusDistribution::explicit(vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| zero.sample(&mut rng) == 0));
        assert!(zero.check_nondegenerate().is_err());
        assert!(RadiusDistribution::bernoulli(1.0)
            .unwrap()
            .check_nondegenerate()
            .is_err());
        assert!(RadiusDistribution::bernoulli(0.5)
            .unwrap()
            .check_nondegenerate()
            .is_ok());
    }

    #[test]
    fn sampling_clt_checks() {
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = RadiusDistribution::bernoulli(0.7).unwrap();
        let hits = (0..n).filter(|_| b.sample(&mut rng) == 1).count();
        let sigma = (0.21f64 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.7).abs() <= 3.0 * sigma);

        let g = RadiusDistribution::geometric(0.5).unwrap();
        let zeros = (0..n).filter(|_| g.sample(&mut rng) == 0).count();
        let sigma = (0.25f64 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.5).abs() <= 3.0 * sigma);
    }

    /// Upper 1e-3 quantile of chi-squared, Wilson-Hilferty approximation.
    fn chi2_critical(df: usize) -> f64 {
        let z = 3.090_232_306_167_813;
        let k = df as f64;
        let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
        k * t * t * t
    }

    fn chi_squared_statistic(dist: &RadiusDistribution, seed: u64) -> (f64, usize) {
        let n = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; 64];
        for _ in 0..n {
            let k = (dist.sample(&mut rng) as usize).min(63);
            counts[k] += 1;
        }
        // Pool cells with expected count below 5 into a final bucket.
        let mut stat = 0.0;
        let mut cells = 0;
        let mut pooled_obs = 0.0;
        let mut pooled_exp = 0.0;
        for (k, &obs) in counts.iter().enumerate() {
            let expected = dist.pmf(k as u64) * n as f64;
            if expected >= 5.0 {
                stat += (obs as f64 - expected).powi(2) / expected;
                cells += 1;
            } else {
                pooled_obs += obs as f64;
                pooled_exp += expected;
            }
        }
        pooled_exp += (1.0 - dist.cdf(63)) * n as f64;
        if pooled_exp > 0.0 {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            cells += 1;
        }
        (stat, cells - 1)
    }

    #[test]
    fn chi_squared_goodness_of_fit() {
        let dists = [
            RadiusDistribution::bernoulli(0.35).unwrap(),
            RadiusDistribution::geometric(0.6).unwrap(),
            RadiusDistribution::binomial(10, 0.3).unwrap(),
            RadiusDistribution::explicit(vec![0.2, 0.3, 0.1, 0.4]).unwrap(),
        ];
        for (i, dist) in dists.iter().enumerate() {
            let (stat, df) = chi_squared_statistic(dist, 100 + i as u64);
            assert!(stat < chi2_critical(df), "{dist}: chi2 {stat} with df {df}");
        }
    }

    #[test]
    fn terms_truncate_geometric_tail() {
        let g = RadiusDistribution::geometric(0.5).unwrap();
        let terms: Vec<_> = g.terms().collect();
        let (last, _) = *terms.last().unwrap();
        assert!(0.5f64.powi(last as i32 + 1) < TAIL_TOLERANCE);
        let mass: f64 = terms.iter().map(|(_, p)| p).sum();
        assert!(close(mass, 1.0, 2e-15));
        assert_eq!(
            RadiusDistribution::bernoulli(0.3).unwrap().terms().count(),
            2
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_dist() -> impl Strategy<Value = RadiusDistribution> {
            prop_oneof![
                (0.0..=1.0f64).prop_map(|p| RadiusDistribution::bernoulli(p).unwrap()),
                (0.0..0.98f64).prop_map(|p| RadiusDistribution::geometric(p).unwrap()),
                (0u32..40, 0.0..=1.0f64)
                    .prop_map(|(n, p)| RadiusDistribution::binomial(n, p).unwrap()),
                prop::collection::vec(0.0..10.0f64, 1..12)
                    .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-6)
                    .prop_map(|w| RadiusDistribution::explicit(w).unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn canonical_format_round_trips(dist in any_dist()) {
                let text = dist.to_string();
                let back = parse_dist(&text).unwrap();
                for k in 0..50 {
                    prop_assert!((back.pmf(k) - dist.pmf(k)).abs() <= 1e-15);
                }
            }

            #[test]
            fn pmf_partial_sums_are_monotone_to_one(dist in any_dist()) {
                let mut acc = 0.0;
                for k in 0..2000u64 {
                    let pk = dist.pmf(k);
                    prop_assert!(pk >= 0.0);
                    acc += pk;
                    prop_assert!((dist.cdf(k as i64) - acc).abs() <= 1e-12);
                }
                prop_assert!((acc - 1.0).abs() <= 1e-9);
            }
        }
    }
}
