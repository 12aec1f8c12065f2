use crate::kernels::pm_acceptance;
use crate::model::FiniteModel;
use crate::Result;

/// Stationary mean acceptance probability of `P_r`, enumerated over every
/// proposal event including self-proposals.
pub fn mean_acceptance_exact(model: &FiniteModel, r: usize) -> Result<f64> {
    let nx = model.num_states();
    let laws: Vec<Vec<(f64, f64)>> = (0..nx)
        .map(|x| model.weights.average_law(x, r))
        .collect::<Result<_>>()?;
    let pi = model.target.pi();
    let mut total = 0.0;
    let mut mass = 0.0;
    for x in 0..nx {
        for &(w, p) in &laws[x] {
            let weight = pi[x] * p * w;
            if weight <= 0.0 {
                continue;
            }
            mass += weight;
            let mut alpha = 0.0;
            for y in 0..nx {
                let q = model.proposal.q(x, y);
                if q <= 0.0 {
                    continue;
                }
                let lr = model.mh_ratio(x, y)?.ln();
                for &(w_new, p_new) in &laws[y] {
                    alpha += q * p_new * pm_acceptance(lr, w, w_new);
                }
            }
            total += weight * alpha;
        }
    }
    Ok(total / mass)
}
