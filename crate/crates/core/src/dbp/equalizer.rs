use crate::dbp::complexity::Structure;
use crate::dbp::edc::Edc;
use crate::dbp::engine::lessfm_forward;
use crate::dbp::model::{EqualizerKind, LEssfmModel};
use crate::dbp::transfer::GvdSign;
use crate::dsp::ols::EdgePolicy;
use crate::dsp::Field;
use crate::error::Result;
use crate::fiber::{back_propagate, plan_steps, FiberSpec, PropagationConfig};

/// A receiver-side compensator that maps a received field to an equalized one
/// at the same rate.
pub trait Equalizer: Send + Sync {
    fn label(&self) -> String;
    fn equalize(&self, rx: &Field) -> Result<Field>;
    /// Block structure used for complexity accounting, if countable.
    fn structure(&self) -> Option<Structure>;
    fn model(&self) -> Option<&LEssfmModel> {
        None
    }
}

impl Equalizer for Edc {
    fn label(&self) -> String {
        EqualizerKind::Edc.name().into()
    }

    fn equalize(&self, rx: &Field) -> Result<Field> {
        self.apply(rx, GvdSign::Backward, EdgePolicy::Circular)
    }

    fn structure(&self) -> Option<Structure> {
        Some(Structure {
            kind: EqualizerKind::Edc,
            num_steps: 0,
            num_pols: 1,
        })
    }
}

impl Equalizer for LEssfmModel {
    fn label(&self) -> String {
        self.kind.name().into()
    }

    fn equalize(&self, rx: &Field) -> Result<Field> {
        lessfm_forward(self, rx, GvdSign::Backward)
    }

    fn structure(&self) -> Option<Structure> {
        Some(Structure::of_model(self))
    }

    fn model(&self) -> Option<&LEssfmModel> {
        Some(self)
    }
}

/// Fine-step inverse of the span on the whole periodic frame. The received
/// field is first brought back to the fiber-output power plane; steps are
/// planned from its peak power at the fiber input.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealDbp {
    pub fiber: FiberSpec,
    pub solver: PropagationConfig,
    pub amplifier_gain_db: f64,
}

impl Equalizer for IdealDbp {
    fn label(&self) -> String {
        "ideal_dbp".into()
    }

    fn equalize(&self, rx: &Field) -> Result<Field> {
        let mut at_output = rx.clone();
        at_output.scale(10f64.powf(-self.amplifier_gain_db / 20.0));
        let steps = plan_steps(&self.fiber, rx.peak_power(), &self.solver)?;
        let mut out = back_propagate(&at_output, &self.fiber, self.solver.mode, &steps)?;
        out.center_freq_offset = rx.center_freq_offset;
        Ok(out)
    }

    fn structure(&self) -> Option<Structure> {
        None
    }
}
