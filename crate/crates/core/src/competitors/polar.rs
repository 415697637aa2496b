//! Persistence/rotational decomposition of the step velocity.

use crate::error::{Error, Result};
use crate::geo::wrap_angle;
use crate::hmm::ObservationSequence;
use crate::scalar::Scalar;
use crate::trajectory::KinematicSeries;

/// Per-step (vp, vr) in knots. The last step has no next heading and is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpeed {
    pub vp: Vec<f64>,
    pub vr: Vec<f64>,
    pub valid: Vec<bool>,
}

impl PolarSpeed {
    pub fn len(&self) -> usize {
        self.vp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vp.is_empty()
    }

    /// Two-dimensional observations (vp, vr) for the DMARP model.
    pub fn observations<T: Scalar>(&self) -> ObservationSequence<T> {
        let data = self.vp.iter().zip(&self.vr).flat_map(|(&p, &r)| [T::lit(p), T::lit(r)]).collect();
        ObservationSequence::new(2, data, self.valid.clone()).expect("polar series has consistent lengths")
    }
}

/// vp = v·cos φ and vr = v·sin φ, with φ the wrapped turn from heading t to heading t + 1.
pub fn polar_speeds(kin: &KinematicSeries) -> Result<PolarSpeed> {
    let n = kin.len();
    if n < 2 {
        return Err(Error::SequenceTooShort);
    }
    let mut out = PolarSpeed {
        vp: vec![0.0; n],
        vr: vec![0.0; n],
        valid: vec![false; n],
    };
    for t in 0..n - 1 {
        let phi = wrap_angle(kin.heading[t + 1] - kin.heading[t]).to_radians();
        let v = kin.speed[t];
        out.vp[t] = v * phi.cos();
        out.vr[t] = v * phi.sin();
        out.valid[t] = kin.valid[t] && kin.valid[t + 1];
    }
    out.vp[n - 1] = kin.speed[n - 1];
    Ok(out)
}
