//! Canonical north-bound measurement and its single-line text encoding.
//!
//! Every reading that leaves a gateway (or a device agent) travels as one
//! line of the form
//!
//! ```text
//! MEAS|tenant|device|sensor|ts_us|value|unit|pattern\n
//! ```
//!
//! The value is rendered with nine significant digits in positional
//! notation, so the same measurement always produces the same bytes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const MAX_UNIT_LEN: usize = 16;
const SIGNIFICANT_DIGITS: usize = 9;

/// Where a protocol translation agent runs when attaching an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConnectionPattern {
    PlatformSideAgent,
    DeviceAgent,
    DeviceLibs,
    StandardAgent,
    OpcUaAgent,
    SpecialGatewayAgent,
    HwIntercept,
}

impl ConnectionPattern {
    pub const ALL: [ConnectionPattern; 7] = [
        ConnectionPattern::PlatformSideAgent,
        ConnectionPattern::DeviceAgent,
        ConnectionPattern::DeviceLibs,
        ConnectionPattern::StandardAgent,
        ConnectionPattern::OpcUaAgent,
        ConnectionPattern::SpecialGatewayAgent,
        ConnectionPattern::HwIntercept,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConnectionPattern::PlatformSideAgent => "PLATFORM_SIDE_AGENT",
            ConnectionPattern::DeviceAgent => "DEVICE_AGENT",
            ConnectionPattern::DeviceLibs => "DEVICE_LIBS",
            ConnectionPattern::StandardAgent => "STANDARD_AGENT",
            ConnectionPattern::OpcUaAgent => "OPC_UA_AGENT",
            ConnectionPattern::SpecialGatewayAgent => "SPECIAL_GATEWAY_AGENT",
            ConnectionPattern::HwIntercept => "HW_INTERCEPT",
        }
    }
}

impl fmt::Display for ConnectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConnectionPattern {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConnectionPattern::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ModelError::UnknownPattern(s.to_string()))
    }
}

/// Origin of a measurement: one of the seven attachment patterns, or a
/// device speaking the platform protocol natively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Native,
    Via(ConnectionPattern),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Native => f.write_str("native"),
            Origin::Via(p) => f.write_str(p.as_str()),
        }
    }
}

impl FromStr for Origin {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "native" {
            Ok(Origin::Native)
        } else {
            s.parse().map(Origin::Via)
        }
    }
}

impl From<ConnectionPattern> for Origin {
    fn from(p: ConnectionPattern) -> Self {
        Origin::Via(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub tenant_id: String,
    pub device_id: String,
    pub sensor_id: String,
    pub timestamp_us: u64,
    pub value: f64,
    pub unit: String,
    pub origin: Origin,
}

impl Measurement {
    pub fn new(
        tenant_id: impl Into<String>,
        device_id: impl Into<String>,
        sensor_id: impl Into<String>,
        timestamp_us: u64,
        value: f64,
        unit: impl Into<String>,
        origin: Origin,
    ) -> Result<Self, ModelError> {
        let m = Measurement {
            tenant_id: tenant_id.into(),
            device_id: device_id.into(),
            sensor_id: sensor_id.into(),
            timestamp_us,
            value,
            unit: unit.into(),
            origin,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, id) in [
            ("tenant_id", &self.tenant_id),
            ("device_id", &self.device_id),
            ("sensor_id", &self.sensor_id),
        ] {
            if id.is_empty() {
                return Err(ModelError::InvalidMeasurement(format!("{field} is empty")));
            }
            check_field_chars(field, id)?;
        }
        if !self.value.is_finite() {
            return Err(ModelError::InvalidMeasurement(format!(
                "value {} is not finite",
                self.value
            )));
        }
        if self.unit.len() > MAX_UNIT_LEN {
            return Err(ModelError::InvalidMeasurement(format!(
                "unit {:?} longer than {MAX_UNIT_LEN}",
                self.unit
            )));
        }
        check_field_chars("unit", &self.unit)
    }

    /// The fields that must agree regardless of how the reading reached the
    /// platform.
    pub fn payload_key(&self) -> (&str, &str, &str, u64, u64, &str) {
        (
            &self.tenant_id,
            &self.device_id,
            &self.sensor_id,
            self.timestamp_us,
            self.value.to_bits(),
            &self.unit,
        )
    }

    pub fn encode(&self) -> Result<String, ModelError> {
        encode_measurement(self)
    }
}

fn check_field_chars(field: &str, s: &str) -> Result<(), ModelError> {
    if s.contains(['|', '\n', '\r']) {
        return Err(ModelError::InvalidMeasurement(format!(
            "{field} {s:?} contains a reserved character"
        )));
    }
    Ok(())
}

/// Renders `value` with nine significant digits, never in exponent form.
pub fn format_value(value: f64) -> String {
    // `{:e}` rounds correctly to the requested digit count; re-place the
    // decimal point from its exponent.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    let mut out = String::with_capacity(digits.len() + 4);
    if neg {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

pub fn encode_measurement(m: &Measurement) -> Result<String, ModelError> {
    m.validate()?;
    Ok(format!(
        "MEAS|{}|{}|{}|{}|{}|{}|{}\n",
        m.tenant_id,
        m.device_id,
        m.sensor_id,
        m.timestamp_us,
        format_value(m.value),
        m.unit,
        m.origin
    ))
}

pub fn decode_measurement(line: &str) -> Result<Measurement, ModelError> {
    let body = line.strip_suffix('\n').unwrap_or(line);
    let fields: Vec<&str> = body.split('|').collect();
    if fields.len() != 8 || fields[0] != "MEAS" {
        return Err(ModelError::MalformedLine(line.to_string()));
    }
    let timestamp_us = fields[4]
        .parse()
        .map_err(|_| ModelError::MalformedLine(line.to_string()))?;
    let value = fields[5]
        .parse()
        .map_err(|_| ModelError::MalformedLine(line.to_string()))?;
    Measurement::new(
        fields[1],
        fields[2],
        fields[3],
        timestamp_us,
        value,
        fields[6],
        fields[7].parse()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meas(ts: u64, value: f64, unit: &str, origin: Origin) -> Measurement {
        Measurement::new("t1", "d1", "s1", ts, value, unit, origin).unwrap()
    }

    #[test]
    fn zero_value_line() {
        let line = encode_measurement(&meas(0, 0.0, "degC", Origin::Native)).unwrap();
        assert_eq!(line, "MEAS|t1|d1|s1|0|0.00000000|degC|native\n");
    }

    #[test]
    fn standard_agent_line() {
        let m = meas(1000, 123.4, "bar", ConnectionPattern::StandardAgent.into());
        let line = encode_measurement(&m).unwrap();
        assert!(line.contains("|1000|123.400000|bar|STANDARD_AGENT"), "{line}");
        assert_eq!(decode_measurement(&line).unwrap(), m);
    }

    #[test]
    fn value_rendering() {
        assert_eq!(format_value(1.0), "1.00000000");
        assert_eq!(format_value(-2.5), "-2.50000000");
        assert_eq!(format_value(0.00123), "0.00123000000");
        assert_eq!(format_value(123456789.0), "123456789");
        assert_eq!(format_value(1.5e12), "1500000000000");
        assert_eq!(format_value(0.1 + 0.2), "0.300000000");
    }

    #[test]
    fn invariants_rejected() {
        let bad = [
            Measurement::new("", "d", "s", 0, 1.0, "u", Origin::Native),
            Measurement::new("t", "d", "s", 0, f64::NAN, "u", Origin::Native),
            Measurement::new("t", "d", "s", 0, f64::INFINITY, "u", Origin::Native),
            Measurement::new("t", "d", "s", 0, 1.0, "x".repeat(17), Origin::Native),
            Measurement::new("t|x", "d", "s", 0, 1.0, "u", Origin::Native),
        ];
        for m in bad {
            assert!(matches!(m, Err(ModelError::InvalidMeasurement(_))));
        }
    }

    #[test]
    fn malformed_lines() {
        assert!(decode_measurement("MEAS|t|d|s|0|1.0|u\n").is_err());
        assert!(decode_measurement("XXXX|t|d|s|0|1.0|u|native\n").is_err());
        assert!(decode_measurement("MEAS|t|d|s|-1|1.0|u|native\n").is_err());
        assert!(decode_measurement("MEAS|t|d|s|0|1.0|u|CARRIER_PIGEON\n").is_err());
    }

    fn origin_strategy() -> impl Strategy<Value = Origin> {
        prop_oneof![
            Just(Origin::Native),
            (0usize..7).prop_map(|i| Origin::Via(ConnectionPattern::ALL[i])),
        ]
    }

    proptest! {
        // Values carry at most nine significant digits, the precision the
        // wire format preserves.
        #[test]
        fn text_round_trip(
            tenant in "[a-z][a-z0-9_-]{0,8}",
            device in "[a-z][a-z0-9_-]{0,8}",
            sensor in "[a-z][a-z0-9_.-]{0,8}",
            ts in 0u64..=u64::MAX / 2,
            mantissa in -999_999_999i64..=999_999_999,
            scale in 0u32..12,
            unit in "[a-zA-Z%/]{0,16}",
            origin in origin_strategy(),
        ) {
            let value = mantissa as f64 / 10f64.powi(scale as i32);
            let m = Measurement::new(tenant, device, sensor, ts, value, unit, origin).unwrap();
            let line = encode_measurement(&m).unwrap();
            prop_assert!(line.ends_with('\n'));
            prop_assert_eq!(decode_measurement(&line).unwrap(), m);
        }
    }
}
