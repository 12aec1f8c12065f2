use crate::{Error, Result};

/// Relative variance `Σ_{r=1}^{T} (1/m)^r (1 − 1/m)^{T−r} C_r` of a particle
/// filter likelihood estimate built from `m` particles.
pub fn pf_relative_variance(c: &[f64], m: usize) -> Result<f64> {
    if m == 0 || c.is_empty() {
        return Err(Error::InvalidConfig(
            "need m >= 1 and at least one time step".into(),
        ));
    }
    if let Some(bad) = c.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidConfig(format!("negative coefficient {bad}")));
    }
    let t = c.len() as i32;
    let inv = 1.0 / m as f64;
    Ok(c.iter()
        .enumerate()
        .map(|(i, ci)| {
            let r = i as i32 + 1;
            inv.powi(r) * (1.0 - inv).powi(t - r) * ci
        })
        .sum())
}
