use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("LFSR register is all zero")]
    DegenerateState,
    #[error("invalid taps: {0}")]
    InvalidTaps(String),
    #[error("key too short: {bits} bits, at least {min} required")]
    KeyTooShort { bits: usize, min: usize },
    #[error("invalid hex key: {0}")]
    InvalidHex(String),
    #[error("slot index {index} out of range for frame of {frame_slots} slots")]
    SlotOutOfRange { index: usize, frame_slots: usize },
    #[error("cannot draw {k} distinct slots from a frame of {s}")]
    TooManySlots { k: usize, s: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("{name} = {value} outside domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("Reed-Solomon decode failure")]
    RsDecodeFailure,
    #[error("LDPC decode did not converge in {iterations} iterations")]
    LdpcDecodeFailure { iterations: usize },
    #[error("{stage} stage failed in block {block}: {source}")]
    Stage {
        stage: &'static str,
        block: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("target BER {target:e} not reached within [{lo}, {hi}] dB (BER {ber_at_hi:e} at {hi} dB)")]
    BracketExhausted {
        target: f64,
        lo: f64,
        hi: f64,
        ber_at_hi: f64,
    },
    #[error("CSV schema mismatch: expected columns [{expected}], found [{found}]")]
    Schema { expected: String, found: String },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain { name, value, domain }
}
