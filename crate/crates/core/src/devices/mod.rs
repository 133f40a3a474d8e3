//! Generator, induction-motor and static-load models.
//!
//! All parameters are on the common system base. Each model is a pure
//! function of its state and the terminal voltage phasor `V∠θ`.

mod generator;
mod load;
mod motor;

pub use generator::{Dispatch, GeneratorParams, GeneratorState, MachineInputs, SynchronousMachine};
pub use load::{static_load_equiv, StaticLoad};
pub use motor::{motor_equiv_admittance, MotorParams, MotorState};

use crate::error::{Error, Result};

pub(crate) fn check_voltage(bus: usize, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveVoltage { bus, v })
    }
}
