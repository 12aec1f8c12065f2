use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::matrix::{KernelMatrix, StateKey};
use crate::kernels::pm_acceptance;
use crate::model::{window_average, FiniteModel};
use crate::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Which extended-space kernel to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddedKind {
    /// `K'` uniform, acceptance on `s`-window averages.
    S,
    /// `K' ∝ A(w', k')`, acceptance on full sums.
    M,
}

fn check_cap(states: usize, cap: usize) -> Result<()> {
    if states > cap {
        return Err(Error::StateSpaceTooLarge { states, cap });
    }
    Ok(())
}

fn log_ratio(model: &FiniteModel, x: usize, y: usize) -> f64 {
    model
        .mh_ratio(x, y)
        .map(f64::ln)
        .unwrap_or(f64::NEG_INFINITY)
}

fn fill_diagonal(p: &mut DMatrix<f64>) {
    for i in 0..p.nrows() {
        let off: f64 = (0..p.ncols()).filter(|&j| j != i).map(|j| p[(i, j)]).sum();
        p[(i, i)] = 1.0 - off;
    }
}

/// Plain Metropolis–Hastings matrix on the x-space, with `π` cached.
pub fn build_mh_matrix(model: &FiniteModel) -> Result<KernelMatrix> {
    let n = model.num_states();
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if y != x && model.proposal.q(x, y) > 0.0 {
                let a = model.mh_ratio(x, y)?.min(1.0);
                p[(x, y)] = model.proposal.q(x, y) * a;
            }
        }
    }
    fill_diagonal(&mut p);
    let pi = DVector::from_column_slice(model.target.pi());
    KernelMatrix::new((0..n).map(|x| StateKey::Point { x }).collect(), p)?.with_stationary(pi)
}

/// Averaged kernel `P_r` on states `(x, w̄)` with positive `π̃` mass, ordered
/// by `x` then `w̄`. The cached stationary vector is
/// `π̃(x, w̄) ∝ π(x) P_x(W̄ = w̄) w̄`.
pub fn build_pm_matrix(model: &FiniteModel, r: usize, cap: usize) -> Result<KernelMatrix> {
    let nx = model.num_states();
    let laws: Vec<Vec<(f64, f64)>> = (0..nx)
        .map(|x| {
            model.weights.average_law(x, r).map(|law| {
                law.into_iter()
                    .filter(|(w, p)| *w > 0.0 && *p > 0.0)
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    let total: usize = laws.iter().map(Vec::len).sum();
    check_cap(total, cap)?;

    let mut states = Vec::with_capacity(total);
    let mut offset = Vec::with_capacity(nx);
    for (x, law) in laws.iter().enumerate() {
        offset.push(states.len());
        states.extend(law.iter().map(|&(w, _)| StateKey::Averaged { x, w }));
    }
    let pi_x = model.target.pi();
    let mut pi = DVector::from_iterator(
        total,
        laws.iter()
            .enumerate()
            .flat_map(|(x, law)| law.iter().map(move |(w, p)| pi_x[x] * p * w)),
    );
    pi /= pi.sum();

    let mut p = DMatrix::zeros(total, total);
    for x in 0..nx {
        for (a, &(w, _)) in laws[x].iter().enumerate() {
            let i = offset[x] + a;
            for y in 0..nx {
                let q = model.proposal.q(x, y);
                if q <= 0.0 {
                    continue;
                }
                let lr = log_ratio(model, x, y);
                for (b, &(w_new, prob)) in laws[y].iter().enumerate() {
                    let j = offset[y] + b;
                    if j != i {
                        p[(i, j)] += q * prob * pm_acceptance(lr, w, w_new);
                    }
                }
            }
        }
    }
    fill_diagonal(&mut p);
    KernelMatrix::new(states, p)?.with_stationary(pi)
}

/// Extended kernel `P̄_s` or `P̄_m` on states `(x, w, k)` with
/// `A(w, k) > 0`, ordered by `x`, then by the enumeration order of the joint
/// weight law, then by `k`. The cached stationary vector is
/// `π̄(x, w, k) = π(x) q_x(w) A(w, k) / m`.
pub fn build_embedded_matrix(
    model: &FiniteModel,
    s: usize,
    m: usize,
    which: EmbeddedKind,
    cap: usize,
) -> Result<KernelMatrix> {
    if s == 0 || s > m {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= s <= m, got s = {s}, m = {m}"
        )));
    }
    let nx = model.num_states();
    let laws: Vec<Vec<(Vec<f64>, f64)>> = (0..nx)
        .map(|x| model.weights.joint_law(x, m))
        .collect::<Result<_>>()?;
    let upper: usize = laws.iter().map(|l| l.len() * m).sum();
    check_cap(upper, cap)?;

    // Proposal targets, with positive or null windows, per x.
    struct Target {
        w_index: usize,
        k: usize,
        window: f64,
        total: f64,
        prob: f64,
    }
    let mut states = Vec::new();
    let mut pi_vals = Vec::new();
    let mut index: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut targets: Vec<Vec<Target>> = Vec::with_capacity(nx);
    let pi_x = model.target.pi();
    for (x, law) in laws.iter().enumerate() {
        let mut t = Vec::with_capacity(law.len() * m);
        for (wi, (w, prob)) in law.iter().enumerate() {
            let total: f64 = w.iter().sum();
            for k in 1..=m {
                let window = window_average(w, k, s);
                if window > 0.0 {
                    index.insert((x, wi, k), states.len());
                    states.push(StateKey::Extended { x, w: w.clone(), k });
                    pi_vals.push(pi_x[x] * prob * window / m as f64);
                }
                t.push(Target {
                    w_index: wi,
                    k,
                    window,
                    total,
                    prob: *prob,
                });
            }
        }
        targets.push(t);
    }
    let n = states.len();
    let mut pi = DVector::from_vec(pi_vals);
    pi /= pi.sum();

    let mut p = DMatrix::zeros(n, n);
    for x in 0..nx {
        for from in &targets[x] {
            let Some(&i) = index.get(&(x, from.w_index, from.k)) else {
                continue;
            };
            for y in 0..nx {
                let q = model.proposal.q(x, y);
                if q <= 0.0 {
                    continue;
                }
                let lr = log_ratio(model, x, y);
                for to in &targets[y] {
                    let Some(&j) = index.get(&(y, to.w_index, to.k)) else {
                        continue;
                    };
                    if j == i {
                        continue;
                    }
                    let entry = match which {
                        EmbeddedKind::S => {
                            q * to.prob / m as f64 * pm_acceptance(lr, from.window, to.window)
                        }
                        EmbeddedKind::M => {
                            q * to.prob * to.window / to.total
                                * pm_acceptance(lr, from.total, to.total)
                        }
                    };
                    p[(i, j)] += entry;
                }
            }
        }
    }
    fill_diagonal(&mut p);
    KernelMatrix::new(states, p)?.with_stationary(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomTable, FiniteProposal, FiniteTarget, TupleSet, WeightModel};

    fn indep() -> FiniteModel {
        let target = FiniteTarget::from_masses(&[2.0, 1.0]).unwrap();
        let proposal = FiniteProposal::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let weights = WeightModel::IndependentFinite(vec![
            AtomTable::from_pairs(&[(1.0, 1.0)]).unwrap(),
            AtomTable::from_pairs(&[(0.0, 0.75), (4.0, 0.25)]).unwrap(),
        ]);
        FiniteModel::new(target, proposal, weights).unwrap()
    }

    fn assert_matrix(k: &KernelMatrix, expected: &[Vec<f64>]) {
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(k.p()[(i, j)], *v, "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn counterexample_matrices_are_exact() {
        let model = indep();
        let p1 = build_pm_matrix(&model, 1, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(p1.states().len(), 2);
        assert_matrix(&p1, &[vec![0.75, 0.25], vec![0.5, 0.5]]);
        let p2 = build_pm_matrix(&model, 2, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(
            p2.states(),
            &[
                StateKey::Averaged { x: 0, w: 1.0 },
                StateKey::Averaged { x: 1, w: 2.0 },
                StateKey::Averaged { x: 1, w: 4.0 },
            ]
        );
        assert_matrix(
            &p2,
            &[
                vec![9.0 / 16.0, 3.0 / 8.0, 1.0 / 16.0],
                vec![1.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.5],
            ],
        );
    }

    #[test]
    fn unit_weights_reduce_to_mh() {
        let target = FiniteTarget::from_masses(&[1.0, 3.0, 2.0]).unwrap();
        let proposal = FiniteProposal::from_matrix(&[
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.4, 0.2],
            vec![0.1, 0.6, 0.3],
        ])
        .unwrap();
        let model = FiniteModel::new(target, proposal, WeightModel::unit(3)).unwrap();
        let mh = build_mh_matrix(&model).unwrap();
        for r in [1, 3] {
            let pm = build_pm_matrix(&model, r, DEFAULT_STATE_CAP).unwrap();
            assert!((pm.p() - mh.p()).amax() < 1e-15);
        }
    }

    #[test]
    fn matrices_satisfy_detailed_balance() {
        let model = indep();
        for r in 1..=3 {
            let k = build_pm_matrix(&model, r, DEFAULT_STATE_CAP).unwrap();
            let pi = k.cached_pi().unwrap();
            assert!(k.detailed_balance_defect(pi) < 1e-12);
        }
        for which in [EmbeddedKind::S, EmbeddedKind::M] {
            let k = build_embedded_matrix(&model, 1, 3, which, DEFAULT_STATE_CAP).unwrap();
            let pi = k.cached_pi().unwrap();
            assert!(k.detailed_balance_defect(pi) < 1e-12);
        }
    }

    #[test]
    fn antithetic_embedding_keeps_only_positive_windows() {
        let target = FiniteTarget::from_masses(&[2.0, 1.0]).unwrap();
        let proposal = FiniteProposal::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let set = TupleSet::from_values(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let model = FiniteModel::new(
            target,
            proposal,
            WeightModel::ExchangeableFinite(vec![set.clone(), set]),
        )
        .unwrap();
        let k = build_embedded_matrix(&model, 1, 2, EmbeddedKind::S, DEFAULT_STATE_CAP).unwrap();
        // Per x: (0,2) with k=2 and (2,0) with k=1.
        assert_eq!(k.len(), 4);
        for s in k.states() {
            if let StateKey::Extended { w, k, .. } = s {
                assert_eq!(w[k - 1], 2.0);
            }
        }
        let pi = k.cached_pi().unwrap();
        for v in pi.iter() {
            assert!(*v > 0.0);
        }
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn s_equal_m_one_matches_pm() {
        let model = indep();
        let emb = build_embedded_matrix(&model, 1, 1, EmbeddedKind::S, DEFAULT_STATE_CAP).unwrap();
        let pm = build_pm_matrix(&model, 1, DEFAULT_STATE_CAP).unwrap();
        assert!((emb.p() - pm.p()).amax() < 1e-15);
    }

    #[test]
    fn state_cap_is_enforced() {
        let model = indep();
        assert!(matches!(
            build_pm_matrix(&model, 4, 3),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        assert!(matches!(
            build_embedded_matrix(&model, 1, 4, EmbeddedKind::M, 10),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }
}
