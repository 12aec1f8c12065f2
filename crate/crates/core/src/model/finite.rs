use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::scalar::{exact_dot, exact_sum, Scalar};
use super::PmModel;
use crate::rng::ChainRng;
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-12;

/// Target on an enumerated state space, stored as unnormalised masses.
#[derive(Debug, Clone)]
pub struct FiniteTarget {
    labels: Vec<String>,
    mass: Vec<Scalar>,
    pi: Vec<f64>,
}

impl FiniteTarget {
    pub fn new(labels: Vec<String>, mass: Vec<Scalar>) -> Result<Self> {
        if mass.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "finite target needs at least 2 states, got {}",
                mass.len()
            )));
        }
        if labels.len() != mass.len() {
            return Err(Error::InvalidModel(
                "label count differs from mass count".into(),
            ));
        }
        if let Some(bad) = mass
            .iter()
            .find(|m| !(m.value() > 0.0 && m.value().is_finite()))
        {
            return Err(Error::InvalidModel(format!(
                "target masses must be strictly positive, found {bad}"
            )));
        }
        let total: f64 = mass.iter().map(Scalar::value).sum();
        let pi = mass.iter().map(|m| m.value() / total).collect();
        Ok(Self { labels, mass, pi })
    }

    /// Target with default labels `1..=n`.
    pub fn from_masses(mass: &[f64]) -> Result<Self> {
        let labels = (1..=mass.len()).map(|i| i.to_string()).collect();
        Self::new(labels, mass.iter().copied().map(Scalar::float).collect())
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn masses(&self) -> &[Scalar] {
        &self.mass
    }

    /// Normalised probabilities.
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `E_π[φ]` and `Var_π(φ)` for a function on the states.
    pub fn mean_var(&self, phi: &[f64]) -> (f64, f64) {
        let mean: f64 = self.pi.iter().zip(phi).map(|(p, f)| p * f).sum();
        let var = self
            .pi
            .iter()
            .zip(phi)
            .map(|(p, f)| p * (f - mean).powi(2))
            .sum();
        (mean, var)
    }
}

/// Row-stochastic proposal matrix `q(x, x')`.
#[derive(Debug, Clone)]
pub struct FiniteProposal {
    rows: Vec<Vec<Scalar>>,
    q: Vec<Vec<f64>>,
    cum: Vec<Vec<f64>>,
}

impl FiniteProposal {
    pub fn new(rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "proposal row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|q| !(q.value() >= 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "proposal row {i} has a negative entry"
                )));
            }
            let unit = match exact_sum(row) {
                Some(s) => s == 1.into(),
                None => (row.iter().map(Scalar::value).sum::<f64>() - 1.0).abs() < UNIT_TOL,
            };
            if !unit {
                return Err(Error::InvalidModel(format!(
                    "proposal row {i} does not sum to 1"
                )));
            }
        }
        let q: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(Scalar::value).collect())
            .collect();
        let cum = q.iter().map(|r| cumulative(r)).collect();
        Ok(Self { rows, q, cum })
    }

    pub fn from_matrix(q: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            q.iter()
                .map(|r| r.iter().copied().map(Scalar::float).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self, x: usize, y: usize) -> f64 {
        self.q[x][y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.q[x]
    }

    pub fn rows(&self) -> &[Vec<Scalar>] {
        &self.rows
    }

    pub fn sample(&self, x: usize, rng: &mut ChainRng) -> usize {
        sample_cumulative(&self.cum[x], rng)
    }
}

/// Law of a single weight at one point: atoms `(w_j, p_j)`.
#[derive(Debug, Clone)]
pub struct AtomTable {
    atoms: Vec<(Scalar, Scalar)>,
    values: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl AtomTable {
    pub fn new(atoms: Vec<(Scalar, Scalar)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidModel("empty atom table".into()));
        }
        if atoms
            .iter()
            .any(|(w, p)| !(w.value() >= 0.0 && w.value().is_finite() && p.value() >= 0.0))
        {
            return Err(Error::InvalidModel(
                "weight atoms and probabilities must be nonnegative".into(),
            ));
        }
        let probs: Vec<Scalar> = atoms.iter().map(|a| a.1).collect();
        let unit_prob = match exact_sum(&probs) {
            Some(s) => s == 1.into(),
            None => (probs.iter().map(Scalar::value).sum::<f64>() - 1.0).abs() < UNIT_TOL,
        };
        if !unit_prob {
            return Err(Error::InvalidModel(
                "atom probabilities do not sum to 1".into(),
            ));
        }
        let unit_mean = match exact_dot(&atoms) {
            Some(m) => m == 1.into(),
            None => {
                let m: f64 = atoms.iter().map(|(w, p)| w.value() * p.value()).sum();
                (m - 1.0).abs() < UNIT_TOL
            }
        };
        if !unit_mean {
            return Err(Error::InvalidModel("weight atoms must have mean 1".into()));
        }
        let values: Vec<f64> = atoms.iter().map(|a| a.0.value()).collect();
        let probs: Vec<f64> = atoms.iter().map(|a| a.1.value()).collect();
        let cum = cumulative(&probs);
        Ok(Self {
            atoms,
            values,
            probs,
            cum,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(w, p)| (Scalar::float(w), Scalar::float(p)))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[(Scalar, Scalar)] {
        &self.atoms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn sample(&self, rng: &mut ChainRng) -> f64 {
        self.values[sample_cumulative(&self.cum, rng)]
    }
}

/// Uniform law over a permutation-closed set of equal-length tuples.
#[derive(Debug, Clone)]
pub struct TupleSet {
    tuples: Vec<Vec<Scalar>>,
    values: Vec<Vec<f64>>,
}

impl TupleSet {
    pub fn new(tuples: Vec<Vec<Scalar>>) -> Result<Self> {
        let Some(len) = tuples.first().map(Vec::len) else {
            return Err(Error::InvalidModel("empty tuple set".into()));
        };
        if len == 0 || tuples.iter().any(|t| t.len() != len) {
            return Err(Error::InvalidModel(
                "tuples must share one positive length".into(),
            ));
        }
        if tuples
            .iter()
            .flatten()
            .any(|w| !(w.value() >= 0.0 && w.value().is_finite()))
        {
            return Err(Error::InvalidModel(
                "tuple entries must be nonnegative".into(),
            ));
        }
        let mut seen = HashSet::new();
        let mut unique = Vec::new();
        for t in tuples {
            if seen.insert(bits(&t)) {
                unique.push(t);
            }
        }
        for t in &unique {
            for i in 0..len.saturating_sub(1) {
                let mut swapped = t.clone();
                swapped.swap(i, i + 1);
                if !seen.contains(&bits(&swapped)) {
                    return Err(Error::InvalidModel(
                        "tuple set is not closed under permutations".into(),
                    ));
                }
            }
        }
        let flat: Vec<Scalar> = unique.iter().flatten().copied().collect();
        let count = (unique.len() * len) as i64;
        let unit_mean = match exact_sum(&flat) {
            Some(s) => s == count.into(),
            None => {
                (flat.iter().map(Scalar::value).sum::<f64>() / count as f64 - 1.0).abs() < UNIT_TOL
            }
        };
        if !unit_mean {
            return Err(Error::InvalidModel(
                "tuple coordinates must have mean 1".into(),
            ));
        }
        let values = unique
            .iter()
            .map(|t| t.iter().map(Scalar::value).collect())
            .collect();
        Ok(Self {
            tuples: unique,
            values,
        })
    }

    pub fn from_values(tuples: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            tuples
                .iter()
                .map(|t| t.iter().copied().map(Scalar::float).collect())
                .collect(),
        )
    }

    pub fn tuple_len(&self) -> usize {
        self.values[0].len()
    }

    pub fn tuples(&self) -> &[Vec<Scalar>] {
        &self.tuples
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

fn bits(t: &[Scalar]) -> Vec<u64> {
    t.iter().map(|w| w.value().to_bits()).collect()
}

/// Exchangeable weight laws on an enumerated state space, one table per
/// state.
#[derive(Debug, Clone)]
pub enum WeightModel {
    /// `W_1, ..., W_r` i.i.d. from a per-state atom table.
    IndependentFinite(Vec<AtomTable>),
    /// `(W_1, ..., W_L)` uniform over a permutation-closed tuple set; for
    /// `r < L` the first `r` coordinates are used.
    ExchangeableFinite(Vec<TupleSet>),
}

impl WeightModel {
    pub fn kind(&self) -> &'static str {
        match self {
            WeightModel::IndependentFinite(_) => "independent-finite",
            WeightModel::ExchangeableFinite(_) => "exchangeable-finite",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            WeightModel::IndependentFinite(t) => t.len(),
            WeightModel::ExchangeableFinite(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Degenerate `W ≡ 1` at every one of `n` states.
    pub fn unit(n: usize) -> Self {
        let table = AtomTable::new(vec![(Scalar::ratio(1, 1), Scalar::ratio(1, 1))])
            .expect("unit table is valid");
        WeightModel::IndependentFinite(vec![table; n])
    }

    /// Largest supported `r` (`None` when unbounded).
    pub fn max_count(&self) -> Option<usize> {
        match self {
            WeightModel::IndependentFinite(_) => None,
            WeightModel::ExchangeableFinite(sets) => sets.iter().map(TupleSet::tuple_len).min(),
        }
    }

    pub fn check_count(&self, r: usize) -> Result<()> {
        if r == 0 {
            return Err(Error::UnsupportedCount { r, len: 0 });
        }
        match self.max_count() {
            Some(len) if r > len => Err(Error::UnsupportedCount { r, len }),
            _ => Ok(()),
        }
    }

    /// `E[W_1]` at `x`.
    pub fn mean(&self, x: usize) -> f64 {
        match self {
            WeightModel::IndependentFinite(t) => t[x]
                .values
                .iter()
                .zip(&t[x].probs)
                .map(|(w, p)| w * p)
                .sum(),
            WeightModel::ExchangeableFinite(t) => {
                let v = &t[x].values;
                v.iter().map(|t| t[0]).sum::<f64>() / v.len() as f64
            }
        }
    }

    /// Draw an exchangeable vector `(W_1, ..., W_r)` at `x`.
    pub fn sample_weights(&self, x: usize, r: usize, rng: &mut ChainRng) -> Result<Vec<f64>> {
        self.check_count(r)?;
        let mut out = Vec::with_capacity(r);
        self.fill(x, r, rng, &mut out);
        Ok(out)
    }

    pub(crate) fn fill(&self, x: usize, r: usize, rng: &mut ChainRng, out: &mut Vec<f64>) {
        out.clear();
        match self {
            WeightModel::IndependentFinite(t) => {
                out.extend((0..r).map(|_| t[x].sample(rng)));
            }
            WeightModel::ExchangeableFinite(t) => {
                let set = &t[x].values;
                let pick = rng.random_range(0..set.len());
                out.extend_from_slice(&set[pick][..r]);
            }
        }
    }

    /// Draw `(W_1 + ... + W_r) / r` at `x`. Two-atom independent tables use a
    /// single binomial draw, so the cost in random numbers is O(1) in `r`.
    pub fn sample_average(&self, x: usize, r: usize, rng: &mut ChainRng) -> f64 {
        match self {
            WeightModel::IndependentFinite(t) if t[x].values.len() == 2 => {
                let table = &t[x];
                let heavy = Binomial::new(r as u64, table.probs[1])
                    .expect("probability in [0,1]")
                    .sample(rng) as f64;
                let n = r as f64;
                (heavy * table.values[1] + (n - heavy) * table.values[0]) / n
            }
            _ => {
                let mut buf = Vec::with_capacity(r);
                self.fill(x, r, rng, &mut buf);
                buf.iter().sum::<f64>() / r as f64
            }
        }
    }

    /// Joint law of `(W_1, ..., W_r)` at `x`, as `(tuple, probability)` pairs
    /// with positive probability. Independent tables are enumerated in
    /// lexicographic atom order.
    pub fn joint_law(&self, x: usize, r: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        self.check_count(r)?;
        Ok(match self {
            WeightModel::IndependentFinite(t) => {
                let table = &t[x];
                let mut law: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                for _ in 0..r {
                    let mut next = Vec::with_capacity(law.len() * table.values.len());
                    for (tuple, p) in &law {
                        for (w, q) in table.values.iter().zip(&table.probs) {
                            if *q > 0.0 {
                                let mut t = tuple.clone();
                                t.push(*w);
                                next.push((t, p * q));
                            }
                        }
                    }
                    law = next;
                }
                merge_tuples(law)
            }
            WeightModel::ExchangeableFinite(t) => {
                let set = &t[x].values;
                let p = 1.0 / set.len() as f64;
                merge_tuples(set.iter().map(|v| (v[..r].to_vec(), p)).collect())
            }
        })
    }

    /// Law of the average `(W_1 + ... + W_r) / r` at `x`, sorted by value with
    /// numerically equal averages merged.
    pub fn average_law(&self, x: usize, r: usize) -> Result<Vec<(f64, f64)>> {
        self.check_count(r)?;
        let raw: Vec<(f64, f64)> = match self {
            WeightModel::IndependentFinite(t) => {
                let table = &t[x];
                let mut sums = vec![(0.0, 1.0)];
                for _ in 0..r {
                    let mut next = Vec::with_capacity(sums.len() * table.values.len());
                    for &(s, p) in &sums {
                        for (w, q) in table.values.iter().zip(&table.probs) {
                            if *q > 0.0 {
                                next.push((s + w, p * q));
                            }
                        }
                    }
                    sums = merge_values(next);
                }
                sums.into_iter().map(|(s, p)| (s / r as f64, p)).collect()
            }
            WeightModel::ExchangeableFinite(t) => {
                let set = &t[x].values;
                let p = 1.0 / set.len() as f64;
                set.iter()
                    .map(|v| (v[..r].iter().sum::<f64>() / r as f64, p))
                    .collect()
            }
        };
        Ok(merge_values(raw))
    }
}

fn merge_values(mut law: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    law.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(law.len());
    for (v, p) in law {
        match out.last_mut() {
            Some(last) if (last.0 - v).abs() <= MERGE_TOL * last.0.abs().max(1.0) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

fn merge_tuples(law: Vec<(Vec<f64>, f64)>) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(law.len());
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for (t, p) in law {
        match index.get(&bits_f64(&t)) {
            Some(&i) => out[i].1 += p,
            None => {
                index.insert(bits_f64(&t), out.len());
                out.push((t, p));
            }
        }
    }
    out
}

fn bits_f64(t: &[f64]) -> Vec<u64> {
    t.iter().map(|w| w.to_bits()).collect()
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|q| {
            acc += q;
            acc
        })
        .collect();
    // Guard the final bucket against rounding so every u < 1 lands somewhere.
    if let Some(last) = p.iter().rposition(|q| *q > 0.0) {
        for c in &mut out[last..] {
            *c = f64::INFINITY;
        }
    }
    out
}

fn sample_cumulative(cum: &[f64], rng: &mut ChainRng) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|c| *c <= u)
}

/// Finite target, proposal and weight model on a common state space.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    pub target: FiniteTarget,
    pub proposal: FiniteProposal,
    pub weights: WeightModel,
}

impl FiniteModel {
    pub fn new(
        target: FiniteTarget,
        proposal: FiniteProposal,
        weights: WeightModel,
    ) -> Result<Self> {
        let n = target.len();
        if proposal.len() != n || weights.len() != n {
            return Err(Error::InvalidModel(format!(
                "target has {n} states but proposal has {} and weights {}",
                proposal.len(),
                weights.len()
            )));
        }
        Ok(Self {
            target,
            proposal,
            weights,
        })
    }

    pub fn num_states(&self) -> usize {
        self.target.len()
    }

    /// `r(x, y) = π(y) q(y, x) / {π(x) q(x, y)}`.
    pub fn mh_ratio(&self, x: usize, y: usize) -> Result<f64> {
        crate::kernels::mh_ratio(&self.target, &self.proposal, x, y)
    }
}

impl PmModel for FiniteModel {
    type Point = usize;

    fn propose(&self, x: &usize, rng: &mut ChainRng) -> usize {
        self.proposal.sample(*x, rng)
    }

    fn log_mh_ratio(&self, x: &usize, y: &usize) -> Result<f64> {
        self.mh_ratio(*x, *y).map(f64::ln)
    }

    fn check_count(&self, r: usize) -> Result<()> {
        self.weights.check_count(r)
    }

    fn draw_weights(&self, x: &usize, r: usize, rng: &mut ChainRng, out: &mut Vec<f64>) {
        self.weights.fill(*x, r, rng, out);
    }

    fn draw_average(&self, x: &usize, r: usize, rng: &mut ChainRng) -> f64 {
        self.weights.sample_average(*x, r, rng)
    }
}
