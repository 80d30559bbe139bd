//! Polymer models as path weights.
//!
//! Every model weight is a function of the incremental [`PathState`], and
//! factorises over steps: the weight after a step is the weight before times
//! `exp(step_log_weight)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{attraction_canonical, strip_log_factor, PathState, StepDelta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    /// `exp(-β H_n)`.
    DombJoyce { beta: f64 },
    /// `1{H_n = 0}`, the `β = ∞` limit.
    Saw,
    /// `exp(-(β-γ) H_n - (γ/2) G_n)`, requires `0 <= γ < β`.
    Attraction { beta: f64, gamma: f64 },
    /// Self-avoiding walk on `Z × {-L..L}` with the vertical coordinate
    /// integrated out: weight `P(H_n = 0 | horizontal path)`.
    Strip {
        #[serde(rename = "L")]
        width: u32,
    },
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::DombJoyce { beta } => write!(f, "domb_joyce(beta={beta})"),
            Model::Saw => write!(f, "saw"),
            Model::Attraction { beta, gamma } => write!(f, "attraction(beta={beta}, gamma={gamma})"),
            Model::Strip { width } => write!(f, "strip(L={width})"),
        }
    }
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::DombJoyce { beta } if !(beta >= 0.0 && beta.is_finite()) => Err(Error::param(
                format!("β must be finite and >= 0 (use the saw model for β = ∞), got {beta}"),
            )),
            Model::Attraction { beta, gamma } => {
                if !(gamma >= 0.0 && beta.is_finite()) {
                    Err(Error::param(format!("need finite β and γ >= 0, got β={beta}, γ={gamma}")))
                } else if gamma >= beta {
                    Err(Error::param(format!(
                        "γ={gamma} >= β={beta} is the collapsed phase, not supported"
                    )))
                } else {
                    Ok(())
                }
            }
            Model::Strip { width: 0 } => Err(Error::param("strip width L must be >= 1")),
            _ => Ok(()),
        }
    }

    /// True when some paths get weight exactly zero.
    pub fn has_hard_constraint(&self) -> bool {
        matches!(self, Model::Saw | Model::Strip { .. })
    }

    pub fn strip_width(&self) -> Option<u32> {
        match *self {
            Model::Strip { width } => Some(width),
            _ => None,
        }
    }

    /// A fresh zero-step state configured for this model.
    pub fn initial_state(&self, reach: usize) -> PathState {
        let s = PathState::with_reach(reach);
        match self.strip_width() {
            Some(w) => s.with_strip(w),
            None => s,
        }
    }

    /// `ln` of the model weight of the path held in `state`.
    pub fn log_weight(&self, state: &PathState) -> f64 {
        let e = state.energy();
        match *self {
            Model::DombJoyce { beta } => {
                if e.h == 0 {
                    0.0
                } else {
                    -beta * e.h as f64
                }
            }
            Model::Saw => {
                if e.h == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Model::Attraction { beta, gamma } => -attraction_canonical(&e, beta, gamma),
            Model::Strip { .. } => state.strip_log_weight(),
        }
    }

    /// Change of `ln` weight caused by a step with occupations `d`.
    ///
    /// The attraction weight of the zero-step path is `exp(-γ)` (from
    /// `G_0 = 2`); increments are relative to that.
    pub fn step_log_weight(&self, d: &StepDelta) -> f64 {
        match *self {
            Model::DombJoyce { beta } => {
                if d.here == 0 {
                    0.0
                } else {
                    -beta * d.dh() as f64
                }
            }
            Model::Saw => {
                if d.here == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Model::Attraction { beta, gamma } => {
                -(beta - gamma) * d.dh() as f64 - 0.5 * gamma * d.dg() as f64
            }
            Model::Strip { width } => strip_log_factor(d.here, width),
        }
    }

    /// `ln` weight of the zero-step path.
    pub fn initial_log_weight(&self) -> f64 {
        match *self {
            Model::Attraction { gamma, .. } => -gamma,
            _ => 0.0,
        }
    }

    /// Interaction strength entering the weak-coupling scalings: `β` for
    /// Domb-Joyce, `β - γ` for attraction, `1/(4L+2)` for the strip.
    pub fn effective_beta(&self) -> f64 {
        match *self {
            Model::DombJoyce { beta } => beta,
            Model::Saw => f64::INFINITY,
            Model::Attraction { beta, gamma } => beta - gamma,
            Model::Strip { width } => 1.0 / (4.0 * width as f64 + 2.0),
        }
    }
}
