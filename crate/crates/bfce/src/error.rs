use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("filter is not empty (s = {s}, ones = {ones}); batch filling requires a fresh filter")]
    FilterNotEmpty { s: u64, ones: u64 },

    #[error(
        "false-positive probability {t} at counter state {s} is degenerate (>= 1 - 2^-40); \
         the filter is saturated beyond the correction model's validity"
    )]
    DegenerateFpp { t: f64, s: u64 },

    #[error(
        "exact false-positive evaluation out of range (m = {m}, k*n = {kn}; limits m <= 64, \
         k*n <= 256); use the approximate model instead"
    )]
    ExactFppOutOfRange { m: u64, kn: u64 },

    #[error("filter is saturated (all {m} bits set); the fill-ratio estimate is unbounded")]
    SaturatedFilter { m: u64 },

    #[error("stream exhausted at counter state {reached} before reaching {needed}")]
    StreamExhausted { reached: u64, needed: u64 },

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error(
        "only the approximate-by-counter model is representable in the serialization format"
    )]
    ModelNotSerializable,
}
