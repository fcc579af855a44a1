//! Depth-heterogeneous cone percolation on `T_d^+`.
//!
//! A vertex at depth `z` draws its radius from `R_z`. Fix a block length
//! `n` and look at the process only at depths `0, n, 2n, ...`: the vertices
//! at depth `(j+1) n` reached from a depth-`jn` vertex within `n` steps form
//! a branching process in a varying environment with mean `d^n rho_j`, where
//! `rho_j` is the probability of crossing to one fixed descendant. Along
//! the path `u = v_0, v_1, ..., v_n = v`, crossing happens as soon as every
//! step `k` is covered by some earlier path vertex `i <= k` with
//! `R_{jn+i} >= k + 1 - i`; those events are increasing, so
//!
//! ```text
//! rho_j >= prod_{k=0}^{n-1} [ 1 - prod_{i=0}^{k} P[R_{jn+i} < k + 1 - i] ]
//! ```
//!
//! If `d^n` times this bound stays above one for all large `j`, the process
//! survives with positive probability. Failing the test proves nothing.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::radius_dist::{parse_dist, RadiusDistribution, RadiusSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// The last law of the prefix repeats forever.
    ConstantLast,
    /// The last `k` laws of the prefix repeat cyclically.
    Periodic(usize),
}

/// Radius laws indexed by depth: an explicit prefix followed by a tail rule.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroEnvironment {
    prefix: Vec<RadiusDistribution>,
    tail: TailRule,
}

impl HeteroEnvironment {
    pub fn new(prefix: Vec<RadiusDistribution>, tail: TailRule) -> Result<Self> {
        if prefix.is_empty() {
            return Err(Error::InvalidEnvironment {
                line: 0,
                msg: "at least one depth law is required".into(),
            });
        }
        if let TailRule::Periodic(k) = tail {
            if k == 0 || k > prefix.len() {
                return Err(Error::InvalidEnvironment {
                    line: 0,
                    msg: format!("period {k} must lie in 1..={}", prefix.len()),
                });
            }
        }
        for (z, dist) in prefix.iter().enumerate() {
            if dist.p0() >= 1.0 {
                return Err(Error::InvalidEnvironment {
                    line: z + 1,
                    msg: format!("P[R = 0] must be below 1 at depth {z}"),
                });
            }
        }
        Ok(Self { prefix, tail })
    }

    /// The same law at every depth.
    pub fn constant(dist: RadiusDistribution) -> Result<Self> {
        Self::new(vec![dist], TailRule::ConstantLast)
    }

    /// `laws` repeating from depth 0.
    pub fn periodic(laws: Vec<RadiusDistribution>) -> Result<Self> {
        let k = laws.len();
        Self::new(laws, TailRule::Periodic(k))
    }

    pub fn prefix(&self) -> &[RadiusDistribution] {
        &self.prefix
    }

    pub fn tail(&self) -> TailRule {
        self.tail
    }

    /// First depth from which the environment is periodic.
    pub fn tail_start(&self) -> u64 {
        (self.prefix.len() - self.period()) as u64
    }

    /// Period of the tail (1 for a constant tail).
    pub fn period(&self) -> usize {
        match self.tail {
            TailRule::ConstantLast => 1,
            TailRule::Periodic(k) => k,
        }
    }

    pub fn distribution_at(&self, z: u64) -> &RadiusDistribution {
        let len = self.prefix.len() as u64;
        if z < len {
            return &self.prefix[z as usize];
        }
        let start = self.tail_start();
        let period = self.period() as u64;
        &self.prefix[(start + (z - start) % period) as usize]
    }

    /// Copy with the prefix lengthened by `extra` laws taken from the tail.
    /// Describes the same environment.
    pub fn extended(&self, extra: usize) -> Self {
        let len = self.prefix.len() as u64;
        let prefix = (0..len + extra as u64)
            .map(|z| self.distribution_at(z).clone())
            .collect();
        Self {
            prefix,
            tail: self.tail,
        }
    }

    /// Parses the line-oriented environment format: one distribution spec
    /// per depth, then optionally `tail: constant` or `tail: periodic=<k>`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut prefix = Vec::new();
        let mut tail = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if tail.is_some() {
                return Err(Error::InvalidEnvironment {
                    line: line_no,
                    msg: "the tail rule must be the last line".into(),
                });
            }
            if let Some(rule) = line.strip_prefix("tail:") {
                tail = Some(parse_tail(rule.trim(), line_no)?);
                continue;
            }
            let dist = parse_dist(line).map_err(|e| Error::InvalidEnvironment {
                line: line_no,
                msg: e.to_string(),
            })?;
            prefix.push(dist);
        }
        Self::new(prefix, tail.unwrap_or(TailRule::ConstantLast))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_tail(rule: &str, line: usize) -> Result<TailRule> {
    if rule == "constant" {
        return Ok(TailRule::ConstantLast);
    }
    if let Some(k) = rule.strip_prefix("periodic=") {
        return k
            .trim()
            .parse()
            .map(TailRule::Periodic)
            .map_err(|_| Error::InvalidEnvironment {
                line,
                msg: format!("bad period {k:?}"),
            });
    }
    Err(Error::InvalidEnvironment {
        line,
        msg: format!("unknown tail rule {rule:?} (expected constant or periodic=<k>)"),
    })
}

impl FromStr for HeteroEnvironment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl RadiusSource for HeteroEnvironment {
    fn dist_at(&self, depth: u32) -> &RadiusDistribution {
        self.distribution_at(depth as u64)
    }
}

fn check_block(d: u32, n: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDegree(d));
    }
    if n == 0 {
        return Err(Error::InvalidBlockLength);
    }
    Ok(())
}

/// Lower bound on the probability that a process started at a depth-`jn`
/// vertex reaches a fixed descendant `n` levels below within `n` steps.
pub fn crossing_lower_bound(env: &HeteroEnvironment, d: u32, n: u32, j: u64) -> Result<f64> {
    check_block(d, n)?;
    let base = j * n as u64;
    let bound = (0..n as u64)
        .map(|k| {
            // P[R_{base+i} < k + 1 - i] = cdf(k - i)
            let all_short: f64 = (0..=k)
                .map(|i| env.distribution_at(base + i).cdf((k - i) as i64))
                .product();
            1.0 - all_short
        })
        .product::<f64>();
    Ok(bound.clamp(0.0, 1.0))
}

/// `d^n` times [`crossing_lower_bound`]: a lower bound on the mean offspring
/// of the embedded block process at block `j`.
pub fn mean_lower_bound(env: &HeteroEnvironment, d: u32, n: u32, j: u64) -> Result<f64> {
    let crossing = crossing_lower_bound(env, d, n, j)?;
    Ok((d as f64).powi(n as i32) * crossing)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    pub n: u32,
    pub c_values: Vec<f64>,
    /// Minimum of `c_j` over one full period of the tail.
    pub liminf_estimate: f64,
    pub certified: bool,
    pub j_max: u64,
    /// First block index from which `c_j` is periodic.
    pub tail_start_block: u64,
    /// Period of `c_j` in `j` from `tail_start_block` on.
    pub tail_period: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Evaluates `c_j = d^n rho_j` for `j = 0..=j_max` and the exact liminf
/// over the periodic tail. `certified` means survival with positive
/// probability is proven; an uncertified report proves nothing.
pub fn certify_survival(
    env: &HeteroEnvironment,
    d: u32,
    n: u32,
    j_max: u64,
) -> Result<CertificationReport> {
    check_block(d, n)?;
    let n64 = n as u64;
    let period = env.period() as u64;
    // Blocks starting at or after the environment's tail see depths
    // jn..jn+n-1 that repeat once jn advances by a multiple of the period.
    let tail_start_block = env.tail_start().div_ceil(n64);
    let tail_period = period / gcd(n64, period);
    let required = (tail_start_block + tail_period - 1).max(1);
    if j_max < required {
        return Err(Error::JmaxTooSmall { j_max, required });
    }
    let c_values = (0..=j_max)
        .map(|j| mean_lower_bound(env, d, n, j))
        .collect::<Result<Vec<_>>>()?;
    let liminf_estimate = c_values
        [tail_start_block as usize..(tail_start_block + tail_period) as usize]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(CertificationReport {
        n,
        c_values,
        liminf_estimate,
        certified: liminf_estimate > 1.0,
        j_max,
        tail_start_block,
        tail_period,
    })
}

/// Tries `n = 1..=n_max` and returns the first certifying report, if any.
pub fn find_certifying_block(
    env: &HeteroEnvironment,
    d: u32,
    n_max: u32,
    j_max: u64,
) -> Result<Option<CertificationReport>> {
    for n in 1..=n_max {
        let report = certify_survival(env, d, n, j_max)?;
        if report.certified {
            return Ok(Some(report));
        }
    }
    Ok(None)
}
