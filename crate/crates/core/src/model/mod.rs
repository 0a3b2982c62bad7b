//! Domain types and canonical wire formats shared by every component.

mod command;
mod fieldbus;
mod measurement;
mod profile;

use thiserror::Error;

pub use command::{Command, CommandVerb};
pub use fieldbus::{
    crc16_modbus, decode_fieldbus_frame, encode_fieldbus_frame, FieldbusFrame, FRAME_LEN,
    FRAME_SYNC,
};
pub use measurement::{
    decode_measurement, encode_measurement, format_value, ConnectionPattern, Measurement, Origin,
    MAX_UNIT_LEN,
};
pub use profile::{
    size_class_bands, validate_plant_profile, Band, LatencyBudget, PlantProfile,
    ProfileViolation, SizeClass,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("malformed measurement line: {0:?}")]
    MalformedLine(String),
    #[error("unknown connection pattern {0:?}")]
    UnknownPattern(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid latency budget: {0}")]
    InvalidBudget(String),
    #[error("bad sync byte {0:#04x}")]
    BadSync(u8),
    #[error("crc mismatch: expected {expected:#06x}, found {found:#06x}")]
    BadCrc { expected: u16, found: u16 },
    #[error("short frame: {0} bytes")]
    ShortFrame(usize),
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
}
