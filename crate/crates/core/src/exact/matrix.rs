use std::fmt;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::{Error, Result};

const ROW_TOL: f64 = 1e-12;

/// Label of an enumerated state; `x` is a 0-based index into the target.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateKey {
    Point { x: usize },
    Averaged { x: usize, w: f64 },
    Extended { x: usize, w: Vec<f64>, k: usize },
}

impl StateKey {
    pub fn x(&self) -> usize {
        match self {
            StateKey::Point { x } | StateKey::Averaged { x, .. } | StateKey::Extended { x, .. } => {
                *x
            }
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKey::Point { x } => write!(f, "{}", x + 1),
            StateKey::Averaged { x, w } => write!(f, "({},{})", x + 1, w),
            StateKey::Extended { x, w, k } => {
                let w: Vec<String> = w.iter().map(|v| v.to_string()).collect();
                write!(f, "({},[{}],{})", x + 1, w.join(";"), k)
            }
        }
    }
}

/// Dense row-stochastic matrix over labelled states, optionally with its
/// stationary vector.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    states: Vec<StateKey>,
    p: DMatrix<f64>,
    pi: Option<DVector<f64>>,
}

impl KernelMatrix {
    pub fn new(states: Vec<StateKey>, p: DMatrix<f64>) -> Result<Self> {
        let n = states.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "matrix is {}x{} for {n} states",
                p.nrows(),
                p.ncols()
            )));
        }
        if p.iter().any(|v| !(*v >= -ROW_TOL)) {
            return Err(Error::InvalidModel(
                "negative transition probability".into(),
            ));
        }
        for (i, row) in p.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidModel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            states,
            p,
            pi: None,
        })
    }

    /// A matrix without state structure, labelled as plain points.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new((0..n).map(|x| StateKey::Point { x }).collect(), p)
    }

    /// Attach a stationary vector; it must satisfy `πP = π` within 1e-10.
    pub fn with_stationary(mut self, pi: DVector<f64>) -> Result<Self> {
        let resid = stationary_residual(&self.p, &pi);
        if resid > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "cached stationary vector has residual {resid:.3e}"
            )));
        }
        self.pi = Some(pi);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateKey] {
        &self.states
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn cached_pi(&self) -> Option<&DVector<f64>> {
        self.pi.as_ref()
    }

    /// The cached stationary vector, or a freshly solved one.
    pub fn pi(&self) -> Result<DVector<f64>> {
        match &self.pi {
            Some(pi) => Ok(pi.clone()),
            None => stationary_distribution(self),
        }
    }

    /// Lift a function of the x-coordinate to the enumerated states.
    pub fn lift(&self, phi_x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.states.iter().map(|s| phi_x[s.x()]))
    }

    /// `max |π_i P_ij − π_j P_ji|`.
    pub fn detailed_balance_defect(&self, pi: &DVector<f64>) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((pi[i] * self.p[(i, j)] - pi[j] * self.p[(j, i)]).abs());
            }
        }
        worst
    }

    /// Joint law of `(X_0, X_n)` in the x-coordinate when the chain starts
    /// from `π`; `num_x` is the size of the x-space.
    pub fn x_pair_law(&self, pi: &DVector<f64>, n: usize, num_x: usize) -> DMatrix<f64> {
        let mut pn = DMatrix::<f64>::identity(self.len(), self.len());
        for _ in 0..n {
            pn = &pn * &self.p;
        }
        let mut joint = DMatrix::zeros(num_x, num_x);
        for i in 0..self.len() {
            for j in 0..self.len() {
                joint[(self.states[i].x(), self.states[j].x())] += pi[i] * pn[(i, j)];
            }
        }
        joint
    }

    pub fn index_of(&self, key: &StateKey) -> Option<usize> {
        self.states.iter().position(|s| s == key)
    }
}

fn stationary_residual(p: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let pp = p.tr_mul(pi);
    (pp - pi).amax()
}

/// Number of closed communicating classes of the transition graph.
fn closed_classes(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && p[(i, j)] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let comps = tarjan_scc(&g);
    let mut owner = vec![0usize; n];
    for (c, comp) in comps.iter().enumerate() {
        for v in comp {
            owner[v.index()] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|v| g.neighbors(*v).all(|u| owner[u.index()] == *c))
        })
        .count()
}

/// Unique stationary vector of a chain with a single closed class.
pub fn stationary_distribution(kernel: &KernelMatrix) -> Result<DVector<f64>> {
    let p = kernel.p();
    let n = p.nrows();
    let closed = closed_classes(p);
    if closed != 1 {
        return Err(Error::Reducible(closed));
    }
    // (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&b).ok_or(Error::Singular(f64::INFINITY))?;
    // One step of iterative refinement.
    let r = &b - &a * &pi;
    if let Some(d) = lu.solve(&r) {
        pi += d;
    }
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-14 {
            *v = 0.0;
        }
    }
    let total = pi.sum();
    pi /= total;
    Ok(pi)
}
