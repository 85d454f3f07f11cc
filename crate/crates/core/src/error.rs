use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("demand {demand} outside [0, {capacity}]")]
    DemandOutOfRange { demand: f64, capacity: f64 },
    #[error("quantity {quantity} outside bid curve domain [0, {capacity}]")]
    QuantityOutOfRange { quantity: f64, capacity: f64 },
    #[error("correlation {0} outside [-1, 1]")]
    CorrelationOutOfRange(f64),
    #[error("strip rows have different lengths ({upper} vs {lower})")]
    StripLengthMismatch { upper: usize, lower: usize },
    #[error("heat rate {heat_rate} outside admissible range [{lower}, {upper}]")]
    HeatRateOutOfRange { heat_rate: f64, lower: f64, upper: f64 },
    #[error("demand {demand} outside the {region} region [{lower}, {upper}]")]
    OutsideRegion { region: &'static str, demand: f64, lower: f64, upper: f64 },
    #[error("demand density is not normalised: total mass {0}")]
    DensityNotNormalised(f64),
    #[error("marginal set is empty")]
    EmptyMarginalSet,
    #[error("forward price must be positive, got {0}")]
    NonPositiveForward(f64),
    #[error("degenerate moment targets: {0}")]
    DegenerateTargets(&'static str),
    #[error("quadrature did not reach tolerance (estimated error {0})")]
    QuadratureTolerance(f64),
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason })
    }
}
