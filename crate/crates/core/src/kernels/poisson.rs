use rand_distr::{Distribution, Exp1};

use super::MarkovKernel;
use crate::rng::ChainRng;

/// The discrete chain embedded at the events of a unit-rate Poisson clock on
/// `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct PoissonPath<S> {
    pub initial: S,
    /// Strictly increasing event times in `(0, horizon)`.
    pub times: Vec<f64>,
    /// State after each event.
    pub states: Vec<S>,
    pub horizon: f64,
}

impl<S> PoissonPath<S> {
    pub fn events(&self) -> usize {
        self.times.len()
    }

    /// `(1/T) ∫_0^T φ(X(t)) dt`, exact for the piecewise-constant path.
    pub fn time_average(&self, phi: impl Fn(&S) -> f64) -> f64 {
        let mut integral = 0.0;
        let mut t_prev = 0.0;
        let mut current = phi(&self.initial);
        for (t, s) in self.times.iter().zip(&self.states) {
            integral += current * (t - t_prev);
            t_prev = *t;
            current = phi(s);
        }
        integral += current * (self.horizon - t_prev);
        integral / self.horizon
    }
}

/// Run `kernel` on a unit-rate Poisson clock up to `horizon`. Each event
/// first draws its exponential gap, then the kernel step.
pub fn poisson_run<K: MarkovKernel>(
    kernel: &K,
    x0: K::State,
    horizon: f64,
    rng: &mut ChainRng,
) -> PoissonPath<K::State> {
    assert!(horizon > 0.0, "horizon must be positive");
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut t = 0.0;
    let mut state = x0.clone();
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap;
        if t >= horizon {
            break;
        }
        state = kernel.step(&state, rng).state;
        times.push(t);
        states.push(state.clone());
    }
    PoissonPath {
        initial: x0,
        times,
        states,
        horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StepOutcome;
    use crate::rng::stream;

    struct Flip;

    impl MarkovKernel for Flip {
        type State = f64;
        fn step(&self, s: &f64, _: &mut ChainRng) -> StepOutcome<f64> {
            StepOutcome {
                state: 1.0 - s,
                accepted: true,
                alpha: 1.0,
                proposed: 1.0 - s,
            }
        }
        fn cost_units(&self) -> usize {
            1
        }
        fn name(&self) -> &'static str {
            "flip"
        }
    }

    #[test]
    fn short_horizon_without_events_is_constant() {
        let mut rng = stream(1, &[]);
        // Find a draw with no event before a tiny horizon.
        let path = poisson_run(&Flip, 0.25, 1e-12, &mut rng);
        assert_eq!(path.events(), 0);
        assert_eq!(path.time_average(|s| *s), 0.25);
    }

    #[test]
    fn event_count_has_mean_horizon() {
        let mut rng = stream(2, &[]);
        let reps = 2000;
        let horizon = 50.0;
        let total: usize = (0..reps)
            .map(|_| poisson_run(&Flip, 0.0, horizon, &mut rng).events())
            .sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - horizon).abs() < 4.0 * (horizon / reps as f64).sqrt());
    }

    #[test]
    fn times_increase_and_average_is_exact() {
        let mut rng = stream(3, &[]);
        let path = poisson_run(&Flip, 0.0, 20.0, &mut rng);
        assert!(path.times.windows(2).all(|w| w[0] < w[1]));
        let mut ones = 0.0;
        let mut prev = 0.0;
        let mut cur = 0.0;
        for (t, s) in path.times.iter().zip(&path.states) {
            ones += cur * (t - prev);
            prev = *t;
            cur = *s;
        }
        ones += cur * (20.0 - prev);
        assert!((path.time_average(|s| *s) - ones / 20.0).abs() < 1e-15);
    }
}
