//! Simulated fieldbus frame.
//!
//! Layout (10 bytes):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 1    | sync, always `0xA5`                     |
//! | 1      | 1    | unit id                                 |
//! | 2      | 2    | register, big-endian                    |
//! | 4      | 4    | raw value, signed, big-endian           |
//! | 8      | 2    | CRC-16/MODBUS of bytes 0..8, little-endian |

use super::ModelError;

pub const FRAME_SYNC: u8 = 0xA5;
pub const FRAME_LEN: usize = 10;

/// CRC-16/MODBUS: reflected polynomial 0x8005 (0xA001), init 0xFFFF, no final xor.
pub fn crc16_modbus(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= u16::from(byte);
        for _ in 0..8 {
            if crc & 1 != 0 {
                crc = (crc >> 1) ^ 0xA001;
            } else {
                crc >>= 1;
            }
        }
    }
    crc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldbusFrame {
    pub unit_id: u8,
    pub register: u16,
    pub raw_value: i32,
}

impl FieldbusFrame {
    pub fn new(unit_id: u8, register: u16, raw_value: i32) -> Self {
        FieldbusFrame {
            unit_id,
            register,
            raw_value,
        }
    }

    pub fn encode(&self) -> [u8; FRAME_LEN] {
        encode_fieldbus_frame(self.unit_id, self.register, self.raw_value)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        decode_fieldbus_frame(bytes)
    }
}

pub fn encode_fieldbus_frame(unit_id: u8, register: u16, raw_value: i32) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[0] = FRAME_SYNC;
    out[1] = unit_id;
    out[2..4].copy_from_slice(&register.to_be_bytes());
    out[4..8].copy_from_slice(&raw_value.to_be_bytes());
    let crc = crc16_modbus(&out[..8]);
    out[8..10].copy_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_fieldbus_frame(bytes: &[u8]) -> Result<FieldbusFrame, ModelError> {
    if bytes.len() < FRAME_LEN {
        return Err(ModelError::ShortFrame(bytes.len()));
    }
    if bytes.len() > FRAME_LEN {
        return Err(ModelError::TrailingBytes(bytes.len() - FRAME_LEN));
    }
    if bytes[0] != FRAME_SYNC {
        return Err(ModelError::BadSync(bytes[0]));
    }
    let expected = crc16_modbus(&bytes[..8]);
    let found = u16::from_le_bytes([bytes[8], bytes[9]]);
    if expected != found {
        return Err(ModelError::BadCrc { expected, found });
    }
    Ok(FieldbusFrame {
        unit_id: bytes[1],
        register: u16::from_be_bytes([bytes[2], bytes[3]]),
        raw_value: i32::from_be_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]),
    })
}
