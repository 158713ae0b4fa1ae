//! Empirical quantile transformation to a uniform or standard-normal target.
//!
//! A [`QuantileMap`] keeps sorted reference values (at most
//! [`MAX_REFERENCES`] evenly spaced order statistics of the fit sample).
//! Reference `j` of `m` sits at cumulative probability `j / (m - 1)`; values
//! between references are linearly interpolated, values equal to a run of tied
//! references map to the midpoint of the run, and results are clipped to
//! `[eps, 1 - eps]`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_REFERENCES: usize = 1000;
pub const DEFAULT_CLIP: f64 = 1e-7;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

// Acklam's rational approximation for the lower half, refined below.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

/// Quantile for `p` in `(0, 0.5]`.
fn lower_quantile(p: f64) -> f64 {
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // One Halley step against the erfc-based CDF.
    let e = 0.5 * libm::erfc(-x / SQRT_2) - p;
    let u = e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Standard normal quantile function.
pub fn inv_normal_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < u < 1, got {u}")));
    }
    if u == 0.5 {
        Ok(0.0)
    } else if u < 0.5 {
        Ok(lower_quantile(u))
    } else {
        // 1 - u is exact for u in [0.5, 1).
        Ok(-lower_quantile(1.0 - u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantileMapRepr", into = "QuantileMapRepr")]
pub struct QuantileMap {
    references: Vec<f64>,
    n: usize,
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
struct QuantileMapRepr {
    references: Vec<f64>,
    n: usize,
    epsilon: f64,
}

impl From<QuantileMap> for QuantileMapRepr {
    fn from(q: QuantileMap) -> Self {
        Self {
            references: q.references,
            n: q.n,
            epsilon: q.epsilon,
        }
    }
}

impl TryFrom<QuantileMapRepr> for QuantileMap {
    type Error = Error;

    fn try_from(r: QuantileMapRepr) -> Result<Self> {
        if r.references.len() < 2 || r.n < r.references.len().min(2) {
            return Err(Error::Model("quantile map needs at least 2 references".into()));
        }
        if r.references.iter().any(|v| !v.is_finite())
            || r.references.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Model("quantile references must be finite and sorted".into()));
        }
        if !(r.epsilon > 0.0 && r.epsilon < 0.5) {
            return Err(Error::Model(format!("invalid clip epsilon {}", r.epsilon)));
        }
        Ok(QuantileMap {
            references: r.references,
            n: r.n,
            epsilon: r.epsilon,
        })
    }
}

impl QuantileMap {
    pub fn fit(values: &[f64]) -> Result<Self> {
        Self::fit_with(values, MAX_REFERENCES, DEFAULT_CLIP)
    }

    pub fn fit_with(values: &[f64], max_references: usize, epsilon: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Fit(format!(
                "quantile map needs at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Fit(format!("non-finite value {bad} in quantile fit")));
        }
        if max_references < 2 {
            return Err(Error::Fit("max_references must be at least 2".into()));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Fit(format!("clip epsilon must lie in (0, 0.5), got {epsilon}")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let references = if n <= max_references {
            sorted
        } else {
            let steps = max_references - 1;
            let mut refs: Vec<f64> = (0..max_references)
                .map(|j| {
                    let num = j * (n - 1);
                    let lo = num / steps;
                    let rem = num % steps;
                    if rem == 0 {
                        sorted[lo]
                    } else {
                        let frac = rem as f64 / steps as f64;
                        let (a, b) = (sorted[lo], sorted[lo + 1]);
                        (a + frac * (b - a)).clamp(a, b)
                    }
                })
                .collect();
            for j in 1..refs.len() {
                if refs[j] < refs[j - 1] {
                    refs[j] = refs[j - 1];
                }
            }
            refs
        };
        Ok(Self {
            references,
            n,
            epsilon,
        })
    }

    pub fn references(&self) -> &[f64] {
        &self.references
    }

    pub fn fit_size(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Empirical CDF value of `x`, clipped to `[eps, 1 - eps]`.
    pub fn to_uniform(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("cannot transform non-finite value {x}")));
        }
        let r = &self.references;
        let m = r.len();
        let step = (m - 1) as f64;
        let lo = r.partition_point(|&v| v < x);
        let hi = r.partition_point(|&v| v <= x);
        let u = if hi == 0 {
            0.0
        } else if lo == m {
            1.0
        } else if lo < hi {
            (lo as f64 + (hi - 1) as f64) / 2.0 / step
        } else {
            let (a, b) = (r[lo - 1], r[lo]);
            ((lo - 1) as f64 + (x - a) / (b - a)) / step
        };
        Ok(u.clamp(self.epsilon, 1.0 - self.epsilon))
    }

    /// `inv_normal_cdf(to_uniform(x))`.
    pub fn to_normal(&self, x: f64) -> Result<f64> {
        inv_normal_cdf(self.to_uniform(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: bisection on statrs' erfc, solved in the smaller tail.
    fn bisect_quantile(u: f64) -> f64 {
        let (tail, sign) = if u < 0.5 { (u, -1.0) } else { (1.0 - u, 1.0) };
        let upper_tail = |z: f64| 0.5 * statrs::function::erf::erfc(z / SQRT_2);
        let (mut lo, mut hi) = (0.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if upper_tail(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sign * 0.5 * (lo + hi)
    }

    #[test]
    fn inv_normal_examples() {
        assert_eq!(inv_normal_cdf(0.5).unwrap(), 0.0);
        let z975 = inv_normal_cdf(0.975).unwrap();
        assert!((z975 - bisect_quantile(0.975)).abs() < 1e-9);
        assert!((z975 - 1.959964).abs() < 1e-6);
        let z05 = inv_normal_cdf(0.05).unwrap();
        assert!((z05 - bisect_quantile(0.05)).abs() < 1e-9);
        assert!((z05 + 1.644854).abs() < 1e-6);
        assert!((z05 + inv_normal_cdf(0.95).unwrap()).abs() < 1e-9);
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(inv_normal_cdf(bad).is_err());
        }
    }

    #[test]
    fn inv_normal_tails() {
        for u in [1e-10, 1e-7, 1e-3, 0.02, 0.3, 0.7, 0.98, 1.0 - 1e-7, 1.0 - 1e-10] {
            let z = inv_normal_cdf(u).unwrap();
            assert!((z - bisect_quantile(u)).abs() < 1e-9, "u = {u}: {z}");
        }
    }

    #[test]
    fn fit_sorts_small_samples() {
        let q = QuantileMap::fit(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(q.references(), &[1.0, 2.0, 3.0]);
        assert_eq!(q.fit_size(), 3);
        let c = QuantileMap::fit(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(c.references(), &[5.0, 5.0, 5.0]);
        assert_eq!(c.to_uniform(5.0).unwrap(), 0.5);
        assert!(matches!(QuantileMap::fit(&[1.0, f64::NAN]), Err(Error::Fit(_))));
        assert!(matches!(QuantileMap::fit(&[1.0]), Err(Error::Fit(_))));
    }

    #[test]
    fn subsampling_keeps_extremes() {
        let values: Vec<f64> = (0..5000).map(|i| (i as f64).sqrt()).collect();
        let q = QuantileMap::fit(&values).unwrap();
        assert_eq!(q.references().len(), MAX_REFERENCES);
        assert_eq!(q.references()[0], 0.0);
        assert_eq!(*q.references().last().unwrap(), 4999f64.sqrt());
        assert!(q.references().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn uniform_and_normal_examples() {
        let values: Vec<f64> = (0..101).map(|i| i as f64 * 0.5).collect();
        let q = QuantileMap::fit(&values).unwrap();
        assert_eq!(q.to_uniform(25.0).unwrap(), 0.5);
        assert_eq!(q.to_normal(25.0).unwrap(), 0.0);
        assert_eq!(q.to_uniform(1e9).unwrap(), 1.0 - DEFAULT_CLIP);
        let p95 = values[95];
        assert!((q.to_uniform(p95).unwrap() - 0.95).abs() <= 1.0 / 101.0);
        assert!((q.to_normal(p95).unwrap() - bisect_quantile(0.95)).abs() < 1e-9);
        let floor = q.to_normal(-1.0).unwrap();
        assert!((floor - bisect_quantile(DEFAULT_CLIP)).abs() < 1e-9);
        assert!((floor + 5.199).abs() < 1e-3);
        assert!(q.to_uniform(f64::INFINITY).is_err());
    }

    #[test]
    fn ties_map_to_plateau_midpoint() {
        let q = QuantileMap::fit(&[1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        // tied references 1..=3 of 0..=4 -> (1/4 + 3/4) / 2
        assert_eq!(q.to_uniform(2.0).unwrap(), 0.5);
        assert_eq!(q.to_uniform(1.5).unwrap(), 0.125);
    }

    proptest! {
        #[test]
        fn transforms_are_monotone(
            values in prop::collection::vec(-100.0f64..100.0, 2..300),
            mut probes in prop::collection::vec(-150.0f64..150.0, 2..40),
        ) {
            let q = QuantileMap::fit_with(&values, 50, DEFAULT_CLIP).unwrap();
            probes.sort_by(f64::total_cmp);
            for w in probes.windows(2) {
                prop_assert!(q.to_uniform(w[0]).unwrap() <= q.to_uniform(w[1]).unwrap());
                prop_assert!(q.to_normal(w[0]).unwrap() <= q.to_normal(w[1]).unwrap());
            }
        }

        #[test]
        fn ranks_preserved_on_distinct_fit_values(values in prop::collection::btree_set(-1000i64..1000, 2..200)) {
            let values: Vec<f64> = values.into_iter().rev().map(|v| v as f64).collect();
            let q = QuantileMap::fit(&values).unwrap();
            let mut by_value: Vec<usize> = (0..values.len()).collect();
            by_value.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let transformed: Vec<f64> = values.iter().map(|&v| q.to_normal(v).unwrap()).collect();
            for w in by_value.windows(2) {
                prop_assert!(transformed[w[0]] < transformed[w[1]]);
            }
        }

        #[test]
        fn inv_normal_symmetric(u in 1e-10f64..0.5) {
            let a = inv_normal_cdf(u).unwrap();
            let b = inv_normal_cdf(1.0 - u).unwrap();
            prop_assert!((a + b).abs() < 1e-9);
        }
    }
}
