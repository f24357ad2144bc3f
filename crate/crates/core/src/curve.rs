//! Sampled trade-off curves shared by the oracle and the variational engine.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    /// Budget `t` in NATS or Lagrange multiplier `beta`.
    pub x: f64,
    pub loss: f64,
    pub complexity: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[0].x < w[1].x)) {
            return Err(Error::param("curve abscissas must be strictly increasing"));
        }
        Ok(Curve { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `(t_or_beta, loss_nats, complexity_nats)` rows after a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_or_beta,loss_nats,complexity_nats")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.loss, p.complexity)?;
        }
        Ok(())
    }
}
