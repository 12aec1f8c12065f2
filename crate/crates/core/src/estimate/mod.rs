//! Asymptotic-variance, ESS and efficiency estimates from trajectories.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::kernels::Trajectory;
use crate::{Error, Result};

/// Batch-means estimate of `var(φ, P) = lim n · var(mean)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub var: f64,
    /// `var · √(2/(a − 1))` for `a` batches.
    pub se: f64,
    pub batches: usize,
    pub batch_len: usize,
}

/// Mean, accumulated as offsets from the first value so constant inputs are
/// reproduced exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Variance with denominator `n − 1`.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Splits `series` into `batches` consecutive batches of equal length
/// (dropping the remainder at the end).
pub fn batch_means_var(series: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 batches, got {batches}"
        )));
    }
    if series.len() < 2 * batches {
        return Err(Error::InsufficientData(format!(
            "{} values for {batches} batches",
            series.len()
        )));
    }
    let b = series.len() / batches;
    let means: Vec<f64> = series.chunks_exact(b).take(batches).map(mean).collect();
    let var = (b as f64 * sample_variance(&means)).max(0.0);
    Ok(BatchMeans {
        var,
        se: var * (2.0 / (batches as f64 - 1.0)).sqrt(),
        batches,
        batch_len: b,
    })
}

/// Batch means with `⌊√n⌋` batches.
pub fn batch_means_default(series: &[f64]) -> Result<BatchMeans> {
    let a = (series.len() as f64).sqrt().floor() as usize;
    batch_means_var(series, a.max(2))
}

/// Affine cost `c₀ + c₁ m` per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c0: f64,
    pub c1: f64,
}

impl CostModel {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !(c0 >= 0.0) || !(c1 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cost model needs c0 >= 0 and c1 > 0, got ({c0}, {c1})"
            )));
        }
        Ok(Self { c0, c1 })
    }

    pub fn per_iteration(&self, m: usize) -> f64 {
        self.c0 + self.c1 * m as f64
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c0: 0.0, c1: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub m: usize,
    pub n: usize,
    pub phi: String,
    pub var_pi: f64,
    pub var: f64,
    pub var_se: f64,
    pub ess: f64,
    pub ess_star: f64,
    pub emp_eff: f64,
    pub accept_rate: f64,
    /// 90% bounds on `ESS*` from the batch-means standard error.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// ESS, ESS per weight draw and ESS per unit of `cost` for test function
/// `index` of `traj`. `var_pi` is `Var_π(φ)`; pass `None` to use the
/// trajectory's empirical variance.
pub fn ess_and_cost(
    traj: &Trajectory,
    index: usize,
    label: &str,
    var_pi: Option<f64>,
    cost: CostModel,
    m: usize,
) -> Result<EfficiencyRecord> {
    let series = &traj.phi[index];
    let n = series.len();
    let bm = batch_means_default(series)?;
    if !(bm.var > 0.0) {
        return Err(Error::Degenerate(format!(
            "zero variance estimate for `{label}`"
        )));
    }
    let var_pi = var_pi.unwrap_or_else(|| sample_variance(series));
    let ess_of = |v: f64| n as f64 * var_pi / v;
    let ess = ess_of(bm.var);
    let nm = (n * m) as f64;
    let z = z_value(0.90);
    let hi_var = bm.var + z * bm.se;
    let lo_var = bm.var - z * bm.se;
    Ok(EfficiencyRecord {
        m,
        n,
        phi: label.to_string(),
        var_pi,
        var: bm.var,
        var_se: bm.se,
        ess,
        ess_star: ess / nm,
        emp_eff: ess / (n as f64 * cost.per_iteration(m)),
        accept_rate: traj.acceptance_rate(),
        ci_lo: ess_of(hi_var) / nm,
        ci_hi: if lo_var > 0.0 {
            ess_of(lo_var) / nm
        } else {
            f64::INFINITY
        },
    })
}

/// One line of an efficiency table: replicate means with a 90% interval on
/// the study's headline efficiency (`ESS*` or the per-cost efficiency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub m: usize,
    pub phi: String,
    pub ess: f64,
    pub ess_star: f64,
    pub emp_eff: f64,
    pub accept_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicates: usize,
}

/// The record with the smallest `ESS*`.
pub fn min_efficiency(records: &[EfficiencyRecord]) -> Option<&EfficiencyRecord> {
    records
        .iter()
        .min_by(|a, b| a.ess_star.total_cmp(&b.ess_star))
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn disjoint_above(&self, other: &Interval) -> bool {
        self.lo > other.hi
    }
}

/// Normal-theory interval `mean ± z · sd/√k` across `k ≥ 3` replicates.
pub fn replicate_ci(values: &[f64], level: f64) -> Result<Interval> {
    if values.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} replicates; at least 3 needed",
            values.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level}")));
    }
    let mean = mean(values);
    let se = (sample_variance(values) / values.len() as f64).sqrt();
    let half = z_value(level) * se;
    Ok(Interval {
        mean,
        se,
        lo: mean - half,
        hi: mean + half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, &[]);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_series_has_zero_variance() {
        let bm = batch_means_var(&[2.5; 100], 10).unwrap();
        assert_eq!(bm.var, 0.0);
    }

    #[test]
    fn iid_normals() {
        let bm = batch_means_var(&normals(100_000, 1), 100).unwrap();
        assert!((bm.var - 1.0).abs() < 3.0 * bm.se, "{bm:?}");
    }

    #[test]
    fn ar1_long_run_variance() {
        let rho = 0.5;
        let eta = normals(200_000, 2);
        let mut x = 0.0;
        let series: Vec<f64> = eta
            .iter()
            .map(|e| {
                x = rho * x + e;
                x
            })
            .collect();
        let exact = 1.0 / (1.0 - rho * rho) * (1.0 + rho) / (1.0 - rho);
        let bm = batch_means_default(&series).unwrap();
        assert!((bm.var - exact).abs() < 3.0 * bm.se, "{bm:?} vs {exact}");
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            batch_means_var(&[1.0, 2.0, 3.0], 2),
            Err(Error::InsufficientData(_))
        ));
        assert!(batch_means_var(&[1.0; 10], 1).is_err());
    }

    fn iid_trajectory(n: usize) -> Trajectory {
        Trajectory {
            phi: vec![normals(n, 9)],
            accepted: vec![true; n],
            alpha: vec![1.0; n],
            cost_units: vec![1; n],
            meta: None,
        }
    }

    #[test]
    fn ess_definitions() {
        let t = iid_trajectory(40_000);
        let bm = batch_means_default(&t.phi[0]).unwrap();
        let r = ess_and_cost(&t, 0, "phi", Some(bm.var), CostModel::default(), 1).unwrap();
        assert!((r.ess - 40_000.0).abs() < 1e-6);
        assert!((r.ess_star - 1.0).abs() < 1e-12);
        assert_eq!(r.emp_eff, r.ess_star);
        assert!(r.ci_lo <= r.ess_star && r.ess_star <= r.ci_hi);
        let r3 = ess_and_cost(
            &t,
            0,
            "phi",
            Some(1.0),
            CostModel::new(2.0, 1.0).unwrap(),
            3,
        )
        .unwrap();
        assert!((r3.ess_star - r3.ess / (3.0 * 40_000.0)).abs() < 1e-12);
        assert!((r3.emp_eff * 5.0 - r3.ess_star * 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_trajectory_is_an_error() {
        let mut t = iid_trajectory(100);
        t.phi[0] = vec![1.0; 100];
        assert!(matches!(
            ess_and_cost(&t, 0, "c", Some(1.0), CostModel::default(), 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn replicate_intervals() {
        let flat = replicate_ci(&[0.4, 0.4, 0.4], 0.9).unwrap();
        assert_eq!((flat.lo, flat.hi), (0.4, 0.4));
        let ci = replicate_ci(&[1.0, 2.0, 3.0], 0.9).unwrap();
        assert_eq!(ci.mean, 2.0);
        assert!((ci.se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((ci.hi - (2.0 + 1.645 / 3f64.sqrt())).abs() < 1e-3);
        assert!(replicate_ci(&[1.0, 2.0], 0.9).is_err());
    }

    #[test]
    fn z_quantile() {
        assert!((z_value(0.90) - 1.6448536269514722).abs() < 1e-9);
    }
}
