use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::MarkovKernel;
use crate::rng::ChainRng;

/// Recorded output of `n` iterations: the test functions evaluated at the
/// state after each iteration, the accept decisions, the acceptance
/// probabilities and the weight draws spent per iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// `phi[j][i]` is test function `j` at iteration `i + 1`.
    pub phi: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    pub alpha: Vec<f64>,
    pub cost_units: Vec<usize>,
    pub meta: Option<TrajectoryMeta>,
}

/// Sidecar metadata written next to a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub stream: Vec<u64>,
    pub model_hash: String,
    pub r: usize,
    pub kernel: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.iter().filter(|a| **a).count() as f64 / self.len() as f64
    }

    pub fn total_cost(&self) -> usize {
        self.cost_units.iter().sum()
    }

    /// Drop the first `burn_in` iterations.
    pub fn discard(&mut self, burn_in: usize) {
        let b = burn_in.min(self.len());
        for series in &mut self.phi {
            series.drain(..b);
        }
        self.accepted.drain(..b);
        self.alpha.drain(..b);
        self.cost_units.drain(..b);
    }

    /// Columnar CSV `iter,accepted,alpha,cost_units,phi_1,...,phi_J`, keeping
    /// every `thin`-th iteration. Iterations are numbered from 1.
    pub fn write_csv<W: Write>(&self, mut out: W, thin: usize) -> io::Result<()> {
        let thin = thin.max(1);
        write!(out, "iter,accepted,alpha,cost_units")?;
        for j in 1..=self.phi.len() {
            write!(out, ",phi_{j}")?;
        }
        writeln!(out)?;
        for i in (thin - 1..self.len()).step_by(thin) {
            write!(
                out,
                "{},{},{},{}",
                i + 1,
                u8::from(self.accepted[i]),
                self.alpha[i],
                self.cost_units[i]
            )?;
            for series in &self.phi {
                write!(out, ",{}", series[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Run `n` iterations of `kernel` from `x0`, evaluating every test function
/// after each iteration.
pub fn run_chain<K: MarkovKernel>(
    kernel: &K,
    x0: K::State,
    n: usize,
    phis: &[&dyn Fn(&K::State) -> f64],
    rng: &mut ChainRng,
) -> Trajectory {
    assert!(n >= 1, "run_chain needs at least one iteration");
    let mut traj = Trajectory {
        phi: vec![Vec::with_capacity(n); phis.len()],
        accepted: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        cost_units: Vec::with_capacity(n),
        meta: None,
    };
    let cost = kernel.cost_units();
    let mut state = x0;
    for _ in 0..n {
        let out = kernel.step(&state, rng);
        state = out.state;
        traj.accepted.push(out.accepted);
        traj.alpha.push(out.alpha);
        traj.cost_units.push(cost);
        for (series, phi) in traj.phi.iter_mut().zip(phis) {
            series.push(phi(&state));
        }
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StepOutcome;
    use crate::rng::stream;

    struct Reject;

    impl MarkovKernel for Reject {
        type State = f64;
        fn step(&self, s: &f64, _: &mut ChainRng) -> StepOutcome<f64> {
            StepOutcome {
                state: *s,
                accepted: false,
                alpha: 0.0,
                proposed: s + 1.0,
            }
        }
        fn cost_units(&self) -> usize {
            1
        }
        fn name(&self) -> &'static str {
            "reject"
        }
    }

    #[test]
    fn always_reject_repeats_the_start() {
        let id = |s: &f64| *s;
        let t = run_chain(&Reject, 3.5, 1, &[&id], &mut stream(0, &[]));
        assert_eq!(t.phi, vec![vec![3.5]]);
        assert_eq!(t.accepted, vec![false]);
        assert_eq!(t.acceptance_rate(), 0.0);
    }

    #[test]
    fn csv_layout_and_thinning() {
        let id = |s: &f64| *s;
        let t = run_chain(&Reject, 1.0, 4, &[&id, &id], &mut stream(0, &[]));
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,accepted,alpha,cost_units,phi_1,phi_2\n2,0,0,1,1,1\n4,0,0,1,1,1\n"
        );
    }
}
