//! Survival criteria and survival-probability bounds on `T_d^+` and `T_d`.
//!
//! On `T_d^+` the survival probability is sandwiched by the extinction
//! probabilities of the auxiliary processes: `1 - rho <= P+[V] <= 1 - psi`.
//! On `T_d` the origin has one extra neighbour and every other vertex sees a
//! copy of `T_d^+`, which gives
//!
//! ```text
//! 1 - (1 - rho^((d+1)/d)) p_0 - E[rho^((d+1)/d d^R)]  <=  P[V]
//! P[V]  <=  1 - E[psi^((d+1)/(d-1) (d^R - 1))]
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf_solver::{smallest_fixed_point, unit_pow, Flavor, GeneratingFunction};
use crate::radius_dist::{ExtendedReal, RadiusDistribution};
use crate::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Survives,
    DiesOut,
    Inconclusive,
}

/// Which mean criterion fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `E[d^R] > 1 + p_0`: the lower process is supercritical.
    MeanAboveOnePlusP0,
    /// `E[d^R] <= 2 - 1/d`: the upper process is (sub)critical.
    MeanAtMostTwoMinusInvD,
    /// Neither; the threshold reported is `1 + p_0`.
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub criterion: Criterion,
    pub expected_d_power: ExtendedReal,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witness: Witness,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalBounds {
    pub graph: Graph,
    pub lower: f64,
    pub upper: f64,
    pub rho: f64,
    pub psi: f64,
    pub verdict: Verdict,
}

fn check_inputs(dist: &RadiusDistribution, d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDegree(d));
    }
    dist.check_nondegenerate()
}

/// Mean criteria on `T_d^+`. The verdict carries over to `T_d` because
/// `P+[V] = 0` exactly when `P[V] = 0`.
pub fn classify_plus(dist: &RadiusDistribution, d: u32) -> Result<Verdict> {
    check_inputs(dist, d)?;
    let moment = dist.expected_d_power(d);
    let p0 = dist.p0();
    let survives = !GeneratingFunction::lower(dist, d)?.is_subcritical();
    let dies = GeneratingFunction::upper(dist, d)?.is_subcritical();
    debug_assert!(!(survives && dies));
    let (outcome, criterion, threshold) = if survives {
        (Outcome::Survives, Criterion::MeanAboveOnePlusP0, 1.0 + p0)
    } else if dies {
        (
            Outcome::DiesOut,
            Criterion::MeanAtMostTwoMinusInvD,
            2.0 - 1.0 / d as f64,
        )
    } else {
        (Outcome::Inconclusive, Criterion::Neither, 1.0 + p0)
    };
    Ok(Verdict {
        outcome,
        witness: Witness {
            criterion,
            expected_d_power: moment,
            threshold,
        },
    })
}

struct Roots {
    rho: f64,
    psi: f64,
}

fn roots(dist: &RadiusDistribution, d: u32) -> Result<Roots> {
    let rho = smallest_fixed_point(&GeneratingFunction::new(dist, d, Flavor::Lower)?)?.root;
    let psi = smallest_fixed_point(&GeneratingFunction::new(dist, d, Flavor::Upper)?)?.root;
    Ok(Roots { rho, psi })
}

fn clamp_unit(x: f64) -> f64 {
    debug_assert!(
        (-1e-12..=1.0 + 1e-12).contains(&x),
        "bound {x} outside [0, 1]"
    );
    x.clamp(0.0, 1.0)
}

/// `[1 - rho, 1 - psi]` for `P+[V]` on `T_d^+`.
pub fn survival_bounds_plus(dist: &RadiusDistribution, d: u32) -> Result<SurvivalBounds> {
    let verdict = classify_plus(dist, d)?;
    let Roots { rho, psi } = roots(dist, d)?;
    Ok(SurvivalBounds {
        graph: Graph::TdPlus,
        lower: clamp_unit(1.0 - rho),
        upper: clamp_unit(1.0 - psi),
        rho,
        psi,
        verdict,
    })
}

/// Bounds for `P[V]` on the full tree `T_d`.
pub fn survival_bounds_full(dist: &RadiusDistribution, d: u32) -> Result<SurvivalBounds> {
    let verdict = classify_plus(dist, d)?;
    let Roots { rho, psi } = roots(dist, d)?;
    let df = d as f64;
    let p0 = dist.p0();

    let lower_scale = (df + 1.0) / df;
    let lower_tail = dist.expect_unit(|k| unit_pow(rho, lower_scale * df.powi(k as i32)));
    let lower = if rho >= 1.0 {
        0.0
    } else {
        1.0 - (1.0 - unit_pow(rho, lower_scale)) * p0 - lower_tail
    };

    let upper_scale = (df + 1.0) / (df - 1.0);
    let upper_tail = dist.expect_unit(|k| unit_pow(psi, upper_scale * (df.powi(k as i32) - 1.0)));
    let upper = if psi >= 1.0 { 0.0 } else { 1.0 - upper_tail };

    Ok(SurvivalBounds {
        graph: Graph::Td,
        lower: clamp_unit(lower),
        upper: clamp_unit(upper),
        rho,
        psi,
        verdict,
    })
}

/// Bounds on `T_d^+` or `T_d` as selected by `graph`.
pub fn survival_bounds(dist: &RadiusDistribution, d: u32, graph: Graph) -> Result<SurvivalBounds> {
    match graph {
        Graph::TdPlus => survival_bounds_plus(dist, d),
        Graph::Td => survival_bounds_full(dist, d),
    }
}

/// Exact `P[V]` on `T_d` for Bernoulli radii: `p (1 - psi^(d+1))` where
/// `psi` is the smallest root of `p psi^d - psi + 1 - p = 0`.
pub fn bernoulli_exact(p: f64, d: u32) -> Result<f64> {
    let dist = RadiusDistribution::bernoulli(p)?;
    check_inputs(&dist, d)?;
    let psi = smallest_fixed_point(&GeneratingFunction::upper(&dist, d)?)?.root;
    if psi >= 1.0 {
        return Ok(0.0);
    }
    Ok(p * (1.0 - psi.powi(d as i32 + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli(p: f64) -> RadiusDistribution {
        RadiusDistribution::bernoulli(p).unwrap()
    }

    /// Smallest root of p s^d - s + 1 - p after factoring out (s - 1), for
    /// d = 2 and d = 3.
    fn bernoulli_psi_oracle(p: f64, d: u32) -> f64 {
        match d {
            2 => ((1.0 - p) / p).min(1.0),
            3 => ((-p + (p * p + 4.0 * p * (1.0 - p)).sqrt()) / (2.0 * p)).min(1.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bernoulli_classification_switches_at_one_over_d() {
        assert_eq!(
            classify_plus(&bernoulli(0.6), 2).unwrap().outcome,
            Outcome::Survives
        );
        assert_eq!(
            classify_plus(&bernoulli(0.5), 2).unwrap().outcome,
            Outcome::DiesOut
        );
        for i in 1..100 {
            let p = i as f64 / 100.0;
            for d in 2..6 {
                let v = classify_plus(&bernoulli(p), d).unwrap();
                assert_ne!(v.outcome, Outcome::Inconclusive, "p={p} d={d}");
                assert_eq!(v.outcome == Outcome::Survives, p * d as f64 > 1.0);
            }
        }
    }

    #[test]
    fn geometric_classification() {
        let g = RadiusDistribution::geometric(0.2).unwrap();
        let v = classify_plus(&g, 2).unwrap();
        assert_eq!(v.outcome, Outcome::DiesOut);
        assert_eq!(v.witness.criterion, Criterion::MeanAtMostTwoMinusInvD);
        assert_eq!(v.witness.threshold, 1.5);

        let g = RadiusDistribution::geometric(0.27).unwrap();
        let v = classify_plus(&g, 2).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
        let m = v.witness.expected_d_power.to_f64();
        assert!((m - 0.73 / 0.46).abs() < 1e-12);
        assert!((v.witness.threshold - 1.73).abs() < 1e-15);

        let g = RadiusDistribution::geometric(0.5).unwrap();
        let v = classify_plus(&g, 2).unwrap();
        assert_eq!(v.outcome, Outcome::Survives);
        assert_eq!(v.witness.expected_d_power, ExtendedReal::Infinite);
    }

    #[test]
    fn binomial_classification_matches_closed_form() {
        for n in 1..8u32 {
            for i in 1..20 {
                let p = i as f64 / 20.0;
                for d in 2..5u32 {
                    let dist = RadiusDistribution::binomial(n, p).unwrap();
                    let df = d as f64;
                    let survives =
                        (p * df + 1.0 - p).powi(n as i32) - (1.0 - p).powi(n as i32) > 1.0;
                    let v = classify_plus(&dist, d).unwrap();
                    assert_eq!(
                        v.outcome == Outcome::Survives,
                        survives,
                        "n={n} p={p} d={d}"
                    );
                }
            }
        }
    }

    #[test]
    fn plus_bounds_binomial_example() {
        let dist = RadiusDistribution::binomial(4, 0.5).unwrap();
        let b = survival_bounds_plus(&dist, 2).unwrap();
        assert!((b.lower - (1.0 - 0.063_514_6)).abs() < 1e-6);
        assert!((b.upper - (1.0 - 0.063_508_50)).abs() < 1e-6);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn subcritical_bounds_are_zero() {
        let b = survival_bounds_plus(&bernoulli(0.4), 2).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert_eq!(b.verdict.outcome, Outcome::DiesOut);
        let b = survival_bounds_full(&bernoulli(0.4), 2).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn bernoulli_bounds_collapse() {
        let b = survival_bounds_plus(&bernoulli(0.7), 2).unwrap();
        assert!((b.lower - 4.0 / 7.0).abs() < 1e-12);
        assert!((b.upper - 4.0 / 7.0).abs() < 1e-12);
        let f = survival_bounds_full(&bernoulli(0.7), 2).unwrap();
        let exact = 0.7 * (1.0 - (3.0f64 / 7.0).powi(3));
        assert!((f.lower - exact).abs() < 1e-12);
        assert!((f.upper - exact).abs() < 1e-12);
        assert!((exact - 0.644_898).abs() < 1e-6);
    }

    #[test]
    fn full_bounds_binomial_examples() {
        let b = survival_bounds_full(&RadiusDistribution::binomial(4, 0.5).unwrap(), 2).unwrap();
        assert!((b.lower - 0.937_435_919).abs() < 1e-8, "{b:?}");
        assert!((b.upper - 0.937_435_962).abs() < 1e-8, "{b:?}");
        let b = survival_bounds_full(&RadiusDistribution::binomial(4, 0.25).unwrap(), 4).unwrap();
        assert!((b.lower - 0.682_158_629).abs() < 1e-8, "{b:?}");
        assert!((b.upper - 0.682_158_630).abs() < 1e-8, "{b:?}");
    }

    #[test]
    fn bernoulli_exact_against_oracle() {
        assert_eq!(bernoulli_exact(0.5, 2).unwrap(), 0.0);
        assert_eq!(bernoulli_exact(0.2, 3).unwrap(), 0.0);
        for d in [2u32, 3] {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let psi = bernoulli_psi_oracle(p, d);
                let oracle = p * (1.0 - psi.powi(d as i32 + 1));
                let got = bernoulli_exact(p, d).unwrap();
                assert!(
                    (got - oracle).abs() < 1e-10,
                    "p={p} d={d}: {got} vs {oracle}"
                );
                let full = survival_bounds_full(&bernoulli(p), d).unwrap();
                assert!((full.lower - got).abs() < 1e-10);
                assert!((full.upper - got).abs() < 1e-10);
            }
        }
        assert!(bernoulli_exact(1.0 - 1e-9, 2).unwrap() > 1.0 - 1e-6);
        assert!(bernoulli_exact(1.0, 2).is_err());
    }

    #[test]
    fn bernoulli_bounds_monotone_in_p() {
        let mut prev = [0.0f64; 4];
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let plus = survival_bounds_plus(&bernoulli(p), 2).unwrap();
            let full = survival_bounds_full(&bernoulli(p), 2).unwrap();
            let now = [plus.lower, plus.upper, full.lower, full.upper];
            for (a, b) in prev.iter().zip(&now) {
                assert!(b + 1e-14 >= *a, "p={p}");
            }
            assert!((plus.lower - plus.upper).abs() < 1e-12);
            assert!((full.lower - full.upper).abs() < 1e-12);
            prev = now;
        }
    }

    #[test]
    fn inconclusive_still_reports_interval() {
        let g = RadiusDistribution::geometric(0.27).unwrap();
        let b = survival_bounds_full(&g, 2).unwrap();
        assert_eq!(b.verdict.outcome, Outcome::Inconclusive);
        assert_eq!(b.lower, 0.0);
        assert!(b.upper > 0.0);
    }

    #[test]
    fn degenerate_and_bad_degree() {
        assert!(matches!(
            classify_plus(&bernoulli(0.0), 2),
            Err(Error::DegenerateRadius { .. })
        ));
        assert!(matches!(
            survival_bounds_full(&bernoulli(0.5), 1),
            Err(Error::InvalidDegree(1))
        ));
    }
}
