//! The three optimizers: scheduled baseline SGD, SGD with Metropolis
//! accept/reject over a random learning-rate pick (sgd-sa), and the
//! derivative-free two-sided random-direction annealer (ssa).
//!
//! Steps are functional: they never mutate the incoming parameter vector,
//! and a rejected step hands the input back bitwise unchanged.

use crate::anneal::{self, AcceptanceDecision, CoolingState};
use crate::data::Minibatch;
use crate::error::{Error, Result};
use crate::nn::{self, GradientVector, NetworkSpec, ParameterVector};
use crate::rng::RngState;

/// Something a step can evaluate: the mean loss at a parameter vector.
pub trait Objective {
    fn loss(&self, w: &ParameterVector) -> Result<f64>;
}

/// An objective that also exposes the exact gradient.
pub trait GradientObjective: Objective {
    fn loss_and_gradient(&self, w: &ParameterVector) -> Result<(f64, GradientVector)>;
}

/// The training objective: mean softmax cross-entropy of a network on one
/// minibatch.
pub struct BatchObjective<'a> {
    pub spec: &'a NetworkSpec,
    pub batch: &'a Minibatch,
}

impl Objective for BatchObjective<'_> {
    fn loss(&self, w: &ParameterVector) -> Result<f64> {
        let logits = nn::forward(self.spec, w, &self.batch.inputs)?;
        nn::loss(&logits, &self.batch.targets)
    }
}

impl GradientObjective for BatchObjective<'_> {
    fn loss_and_gradient(&self, w: &ParameterVector) -> Result<(f64, GradientVector)> {
        nn::loss_and_gradient(self.spec, w, &self.batch.inputs, &self.batch.targets)
    }
}

/// Ordered set `H` of candidate learning rates: non-empty, positive, no
/// duplicates. Defaults to the fourteen-rate grid
/// `{0.9, …, 0.1, 0.09, …, 0.05}`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LearningRateSet {
    rates: Vec<f64>,
}

impl LearningRateSet {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidLearningRateSet("empty set".into()));
        }
        for &r in &rates {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::InvalidLearningRateSet(format!(
                    "rates must be positive and finite, got {r}"
                )));
            }
        }
        for (i, &r) in rates.iter().enumerate() {
            if rates[..i].contains(&r) {
                return Err(Error::InvalidLearningRateSet(format!("duplicate rate {r}")));
            }
        }
        Ok(LearningRateSet { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

impl Default for LearningRateSet {
    fn default() -> Self {
        LearningRateSet::new(vec![
            0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.09, 0.08, 0.07, 0.06, 0.05,
        ])
        .expect("default rate set is valid")
    }
}

/// What one annealed step did: which step size was tried (`eta_used` is the
/// chosen η, or ε for the derivative-free step), the loss at the current and
/// candidate points, the Metropolis decision, and the index of the chosen
/// rate in `H` (None for ssa).
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub eta_used: f64,
    pub eta_index: Option<usize>,
    pub loss_before: f64,
    pub loss_after: f64,
    pub decision: AcceptanceDecision,
    pub weights_changed: bool,
}

/// Plain gradient step `w - eta * grad`, leaving `w` untouched.
pub fn sgd_step(w: &ParameterVector, grad: &GradientVector, eta: f64) -> Result<ParameterVector> {
    if grad.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: grad.len(),
            context: "gradient length",
        });
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::InvalidStepSize(eta));
    }
    Ok(ParameterVector {
        values: w
            .values
            .iter()
            .zip(&grad.values)
            .map(|(wi, gi)| wi - eta * gi)
            .collect(),
    })
}

/// Rate for a 1-based epoch under a piecewise-constant schedule given as
/// `(epoch span, rate)` pairs, e.g. `[(30, 0.1), (40, 0.01), (30, 0.001)]`.
pub fn scheduled_lr(epoch: usize, schedule: &[(usize, f64)]) -> Result<f64> {
    let span: usize = schedule.iter().map(|&(s, _)| s).sum();
    if epoch == 0 || epoch > span {
        return Err(Error::EpochBeyondSchedule { epoch, span });
    }
    let mut remaining = epoch;
    for &(s, rate) in schedule {
        if remaining <= s {
            return Ok(rate);
        }
        remaining -= s;
    }
    unreachable!("epoch within total span")
}

/// One annealed SGD step: compute loss and gradient at `w`, pick η uniformly
/// from `rates`, form the candidate `w - η v`, re-evaluate on the same
/// objective, and Metropolis-accept the candidate against the current loss.
///
/// Returns the next parameter vector (the candidate if accepted, otherwise
/// the input, bitwise unchanged) together with the step record.
pub fn sgdsa_step<O: GradientObjective>(
    objective: &O,
    w: ParameterVector,
    rates: &LearningRateSet,
    cooling: &CoolingState,
    rng_lr: &mut RngState,
    rng_accept: &mut RngState,
) -> Result<(ParameterVector, StepOutcome)> {
    let (loss_before, grad) = objective.loss_and_gradient(&w)?;
    let eta_index = rng_lr.choice(rates.len())?;
    let eta = rates.rates()[eta_index];
    let candidate = sgd_step(&w, &grad, eta)?;
    let loss_after = objective.loss(&candidate)?;
    let decision = anneal::decide(loss_after - loss_before, cooling, rng_accept)?;
    let accepted = decision.accepted;
    let next = if accepted { candidate } else { w };
    Ok((
        next,
        StepOutcome {
            eta_used: eta,
            eta_index: Some(eta_index),
            loss_before,
            loss_after,
            decision,
            weights_changed: accepted,
        },
    ))
}

/// One derivative-free annealed step: draw a random direction with i.i.d.
/// standard-normal entries, evaluate the loss at `w - ε d` and `w + ε d`,
/// keep the better of the two (tie goes to `w - ε d`), and Metropolis-accept
/// it against the loss at `w`. Never computes a gradient.
pub fn ssa_step<O: Objective>(
    objective: &O,
    w: ParameterVector,
    epsilon: f64,
    cooling: &CoolingState,
    rng_direction: &mut RngState,
    rng_accept: &mut RngState,
) -> Result<(ParameterVector, StepOutcome)> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidStepSize(epsilon));
    }
    let loss_before = objective.loss(&w)?;
    let direction: Vec<f64> = (0..w.len()).map(|_| rng_direction.standard_normal()).collect();

    let shifted = |sign: f64| ParameterVector {
        values: w
            .values
            .iter()
            .zip(&direction)
            .map(|(wi, di)| wi + sign * epsilon * di)
            .collect(),
    };
    let minus = shifted(-1.0);
    let plus = shifted(1.0);
    let loss_minus = objective.loss(&minus)?;
    let loss_plus = objective.loss(&plus)?;
    let (candidate, loss_after) = if loss_minus <= loss_plus {
        (minus, loss_minus)
    } else {
        (plus, loss_plus)
    };

    let decision = anneal::decide(loss_after - loss_before, cooling, rng_accept)?;
    let accepted = decision.accepted;
    let next = if accepted { candidate } else { w };
    Ok((
        next,
        StepOutcome {
            eta_used: epsilon,
            eta_index: None,
            loss_before,
            loss_after,
            decision,
            weights_changed: accepted,
        },
    ))
}
