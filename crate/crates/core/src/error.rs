use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown distribution kind `{0}`")]
    UnknownKind(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("quadrature failed to converge (achieved error bound {error:e})")]
    Quadrature { error: f64 },
    #[error("conditioning event X > {threshold} has zero probability")]
    EmptyConditioning { threshold: f64 },
    #[error("operation requires a heavy-tailed model")]
    LightTailed,
    #[error("no density available for this model")]
    NoDensity,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("record does not describe an exceedance")]
    NotHit,
    #[error("big-jump proposal is degenerate: all index weights vanish")]
    DegenerateProposal,
    #[error("every simulated path was inconclusive")]
    AllInconclusive,
    #[error("sample is empty")]
    EmptySample,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
