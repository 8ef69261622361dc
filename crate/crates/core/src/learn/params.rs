//! Mapping between a model and the vector of values the optimizer moves.

use serde::{Deserialize, Serialize};

use crate::dbp::{tied_lengths, LEssfmModel};
use crate::error::{Error, Result};
use crate::learn::backprop::ParamGrads;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Every length and every coefficient independently.
    Free,
    /// Receiver-side split plus one coefficient vector shared by all steps;
    /// interior lengths stay at `L / N_s` and the total stays fixed.
    Tied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Length,
    Coeff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub tying: Parameterization,
    pub total_km: f64,
    /// Entries kept at their initial value.
    pub frozen: Vec<bool>,
}

impl ParamSpace {
    pub fn new(tying: Parameterization, model: &LEssfmModel) -> Self {
        let len = match tying {
            Parameterization::Free => model.num_params(),
            Parameterization::Tied => 1 + model.filter_halflen + 1,
        };
        ParamSpace {
            tying,
            total_km: model.total_length_km(),
            frozen: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    /// Freeze everything except the listed entries.
    pub fn only(mut self, free: &[usize]) -> Self {
        self.frozen.iter_mut().enumerate().for_each(|(i, f)| *f = !free.contains(&i));
        self
    }

    pub fn groups(&self, model: &LEssfmModel) -> Vec<Group> {
        let lengths = match self.tying {
            Parameterization::Free => model.lengths_km.len(),
            Parameterization::Tied => 1,
        };
        (0..self.len()).map(|i| if i < lengths { Group::Length } else { Group::Coeff }).collect()
    }

    pub fn encode(&self, model: &LEssfmModel) -> Vec<f64> {
        match self.tying {
            Parameterization::Free => model.flat_params(),
            Parameterization::Tied => std::iter::once(model.lengths_km[0]).chain(model.coeffs[0].iter().copied()).collect(),
        }
    }

    pub fn decode(&self, theta: &[f64], template: &LEssfmModel) -> Result<LEssfmModel> {
        if theta.len() != self.len() {
            return Err(Error::InvalidArgument(format!("expected {} values, got {}", self.len(), theta.len())));
        }
        let mut model = template.clone();
        match self.tying {
            Parameterization::Free => model.set_flat_params(theta)?,
            Parameterization::Tied => {
                model.lengths_km = tied_lengths(model.num_steps, self.total_km, theta[0]);
                model.coeffs.iter_mut().for_each(|c| c.copy_from_slice(&theta[1..]));
            }
        }
        Ok(model)
    }

    /// Gradient with respect to the optimizer vector, zero on frozen entries.
    pub fn pull_back(&self, g: &ParamGrads) -> Vec<f64> {
        let mut out = match self.tying {
            Parameterization::Free => g.flat(),
            Parameterization::Tied => {
                let last = g.lengths.len() - 1;
                let mut v = vec![g.lengths[0] - g.lengths[last]];
                let taps = g.coeffs[0].len();
                v.extend((0..taps).map(|k| g.coeffs.iter().map(|c| c[k]).sum::<f64>()));
                v
            }
        };
        for (v, &f) in out.iter_mut().zip(&self.frozen) {
            if f {
                *v = 0.0;
            }
        }
        out
    }
}
