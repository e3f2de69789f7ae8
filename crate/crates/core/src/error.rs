use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge on [{lower}, {upper}]: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        lower: f64,
        upper: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("degenerate normalization: B(n) = {0}")]
    DegenerateNormalization(f64),

    #[error("overflow in moment recursion at k = {k} (a_n = {a_n})")]
    Overflow { k: usize, a_n: f64 },

    #[error("Poisson mean {0:e} exceeds the supported maximum of 1e12")]
    PoissonMean(f64),

    #[error("explosion cap exceeded at generation {generation}: population {population}")]
    ExplosionCap { generation: usize, population: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypotheses not met: {0}")]
    ConditionFailed(String),
}
