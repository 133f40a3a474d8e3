use crate::error::Result;

use super::check_voltage;

/// Exponential static load `P = p0 V^α`, `Q = q0 V^β`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticLoad {
    pub bus: usize,
    pub p0: f64,
    pub q0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl StaticLoad {
    pub fn power(&self, v: f64) -> Result<(f64, f64)> {
        check_voltage(self.bus, v)?;
        Ok((self.p0 * v.powf(self.alpha), self.q0 * v.powf(self.beta)))
    }

    /// `(∂P/∂V, ∂Q/∂V)`.
    pub fn power_slope(&self, v: f64) -> Result<(f64, f64)> {
        check_voltage(self.bus, v)?;
        Ok((
            self.alpha * self.p0 * v.powf(self.alpha - 1.0),
            self.beta * self.q0 * v.powf(self.beta - 1.0),
        ))
    }

    /// Shunt conductance and susceptance that draw the same power at `v`.
    pub fn equivalent(&self, v: f64) -> Result<(f64, f64)> {
        let (p, q) = self.power(v)?;
        static_load_equiv(p, q, v)
    }
}

/// `(G, B) = (P / V², −Q / V²)`.
pub fn static_load_equiv(p: f64, q: f64, v: f64) -> Result<(f64, f64)> {
    check_voltage(0, v)?;
    let v2 = v * v;
    Ok((p / v2, -q / v2))
}
