//! Generating functions of the two auxiliary branching processes and their
//! extinction probabilities.
//!
//! The lower process `X` puts mass `p_0` on zero offspring and mass `p_k` on
//! `d^k` offspring for `k >= 1`:
//!
//! ```text
//! phi_X(s) = E[s^(d^R)] + (1 - s) p_0
//! ```
//!
//! The upper process `Y` puts mass `p_k` on `d + d^2 + ... + d^k` offspring:
//!
//! ```text
//! phi_Y(s) = E[s^(d (d^R - 1) / (d - 1))]
//! ```
//!
//! The smallest fixed points on `[0, 1]` are `rho` (lower) and `psi` (upper).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::radius_dist::{ExtendedReal, Family, RadiusDistribution};

/// Step size below which plain iteration is considered settled.
pub const STEP_TOLERANCE: f64 = 1e-14;
/// Largest `|phi(root) - root|` accepted in a reported result.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Hard cap on iterations (functional plus Newton).
pub const MAX_ITERATIONS: u64 = 1_000_000;

const FUNCTIONAL_WARMUP: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Lower,
    Upper,
}

/// `s^e` on `[0, 1]` with `0^0 = 1`, computed in log space so that huge
/// exponents underflow cleanly to zero.
pub fn unit_pow(s: f64, e: f64) -> f64 {
    if e == 0.0 || s == 1.0 {
        1.0
    } else if s <= 0.0 {
        0.0
    } else {
        (e * s.ln()).exp()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GeneratingFunction<'a> {
    dist: &'a RadiusDistribution,
    d: u32,
    flavor: Flavor,
}

impl<'a> GeneratingFunction<'a> {
    pub fn new(dist: &'a RadiusDistribution, d: u32, flavor: Flavor) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDegree(d));
        }
        Ok(Self { dist, d, flavor })
    }

    pub fn lower(dist: &'a RadiusDistribution, d: u32) -> Result<Self> {
        Self::new(dist, d, Flavor::Lower)
    }

    pub fn upper(dist: &'a RadiusDistribution, d: u32) -> Result<Self> {
        Self::new(dist, d, Flavor::Upper)
    }

    pub fn dist(&self) -> &'a RadiusDistribution {
        self.dist
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// Offspring count attached to radius `k`: `d^k` for the lower process,
    /// `d + ... + d^k` for the upper one.
    pub fn exponent(&self, k: u64) -> f64 {
        let d = self.d as f64;
        let dk = if k > i32::MAX as u64 {
            f64::INFINITY
        } else {
            d.powi(k as i32)
        };
        match self.flavor {
            Flavor::Lower => dk,
            Flavor::Upper => d * (dk - 1.0) / (d - 1.0),
        }
    }

    /// `phi(s)` for `s` in `[0, 1]`.
    pub fn eval(&self, s: f64) -> f64 {
        let series = self.dist.expect_unit(|k| unit_pow(s, self.exponent(k)));
        match self.flavor {
            Flavor::Lower => series + (1.0 - s) * self.dist.p0(),
            Flavor::Upper => series,
        }
    }

    /// `phi'(s)` for `s` in `[0, 1)`.
    pub fn derivative(&self, s: f64) -> f64 {
        let series: f64 = self
            .dist
            .terms()
            .map(|(k, pk)| {
                let e = self.exponent(k);
                if e == 0.0 {
                    return 0.0;
                }
                let power = unit_pow(s, e - 1.0);
                if power == 0.0 {
                    0.0
                } else {
                    pk * e * power
                }
            })
            .sum();
        match self.flavor {
            Flavor::Lower => series - self.dist.p0(),
            Flavor::Upper => series,
        }
    }

    /// Mean offspring: `E[d^R] - p_0` (lower) or `d/(d-1) (E[d^R] - 1)` (upper).
    pub fn mean(&self) -> ExtendedReal {
        let moment = self.dist.expected_d_power(self.d);
        let d = self.d as f64;
        match (self.flavor, moment) {
            (_, ExtendedReal::Infinite) => ExtendedReal::Infinite,
            (Flavor::Lower, ExtendedReal::Finite(m)) => ExtendedReal::Finite(m - self.dist.p0()),
            (Flavor::Upper, ExtendedReal::Finite(m)) => {
                ExtendedReal::Finite(d / (d - 1.0) * (m - 1.0))
            }
        }
    }

    /// Whether the mean offspring is at most one, decided with the closed
    /// forms of each family so that boundary cases compare exactly.
    pub fn is_subcritical(&self) -> bool {
        let d = self.d as f64;
        match (self.flavor, self.dist.family()) {
            // X and Y coincide for Bernoulli radii: mean p d.
            (_, Family::Bernoulli { p }) => p * d <= 1.0,
            (Flavor::Lower, Family::Geometric { p }) => {
                p * d < 1.0 && d * p * p - 2.0 * d * p + 1.0 >= 0.0
            }
            (Flavor::Upper, Family::Geometric { p }) => 2.0 * p * d <= 1.0,
            (Flavor::Lower, Family::Binomial { n, p }) => {
                let n = n as i32;
                (p * d + 1.0 - p).powi(n) - (1.0 - p).powi(n) <= 1.0
            }
            (Flavor::Upper, Family::Binomial { n, p }) => {
                2.0 * d - d * (p * d + 1.0 - p).powi(n as i32) >= 1.0
            }
            (Flavor::Lower, Family::Explicit { weights }) => {
                let mean: f64 = weights
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, w)| w * d.powi(k as i32))
                    .sum();
                mean <= 1.0
            }
            (Flavor::Upper, Family::Explicit { weights }) => {
                let scaled: f64 = weights
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, w)| w * d * (d.powi(k as i32) - 1.0))
                    .sum();
                scaled <= d - 1.0
            }
        }
    }
}

/// Extinction probability of an auxiliary process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub root: f64,
    pub iterations: u64,
    pub residual: f64,
    pub is_supercritical: bool,
}

pub fn eval_gf(gf: &GeneratingFunction<'_>, s: f64) -> f64 {
    gf.eval(s)
}

/// Smallest fixed point of `gf` in `[0, 1]`.
///
/// Subcritical and critical processes return exactly 1. Otherwise the
/// iteration `s <- phi(s)` runs upward from 0, which can only approach the
/// smallest fixed point, and Newton steps finish the job from the left:
/// `phi(s) - s` is convex and decreasing there, so every step stays below
/// the root.
pub fn smallest_fixed_point(gf: &GeneratingFunction<'_>) -> Result<FixedPointResult> {
    gf.dist().check_nondegenerate()?;
    if gf.is_subcritical() {
        return Ok(FixedPointResult {
            root: 1.0,
            iterations: 0,
            residual: 0.0,
            is_supercritical: false,
        });
    }

    let mut s = 0.0f64;
    let mut iterations = 0u64;
    while iterations < FUNCTIONAL_WARMUP {
        let next = gf.eval(s);
        iterations += 1;
        let step = next - s;
        s = next;
        if step.abs() < STEP_TOLERANCE {
            break;
        }
    }

    while iterations < MAX_ITERATIONS {
        let f = gf.eval(s) - s;
        if f <= 0.0 {
            break;
        }
        let slope = gf.derivative(s) - 1.0;
        if slope.is_nan() || slope >= 0.0 {
            // Fall back to a plain iteration step.
            s = gf.eval(s);
            iterations += 1;
            continue;
        }
        let next = s - f / slope;
        iterations += 1;
        if next.is_nan() || next <= s || next >= 1.0 {
            break;
        }
        let moved = next - s;
        s = next;
        if moved <= f64::EPSILON * s {
            break;
        }
    }

    let residual = (gf.eval(s) - s).abs();
    if residual > RESIDUAL_TOLERANCE {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(FixedPointResult {
        root: s,
        iterations,
        residual,
        is_supercritical: s < 1.0,
    })
}

/// Probability that the auxiliary process is extinct by generation `g`:
/// the `g`-th iterate of `phi` started at 0.
pub fn extinction_by_generation(gf: &GeneratingFunction<'_>, g: u64) -> f64 {
    (0..g).fold(0.0, |q, _| gf.eval(q))
}
