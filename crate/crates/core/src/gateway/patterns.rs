//! Hop and translation topology of each connection pattern, plus the
//! passive two-wire bus tap used by hardware interception.

use std::collections::BTreeMap;

use super::{translate, DeviceContext, GatewayError, TranslationRuleSet};
use crate::model::{
    decode_fieldbus_frame, encode_fieldbus_frame, ConnectionPattern, FieldbusFrame, Measurement, Origin, FRAME_LEN,
    FRAME_SYNC,
};
use crate::netsim::EdgeTier;

/// One logical reading taken on a device at `at_us`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawReading {
    pub unit_id: u8,
    pub register: u16,
    pub raw_value: i32,
    pub at_us: u64,
}

/// Link and processing delays along the device → gateway → cloud path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteProfile {
    /// Fieldbus (or bus tap) delay from the device to the gateway tier.
    pub device_to_gateway_us: u64,
    pub gateway_to_cloud_us: u64,
    /// Time an agent spends translating one frame, at whatever tier.
    pub translate_us: u64,
    /// Per-frame queueing before a cloud-side agent picks the frame up.
    pub cloud_queue_us: u64,
}

impl Default for RouteProfile {
    fn default() -> Self {
        RouteProfile {
            device_to_gateway_us: 2_000,
            gateway_to_cloud_us: 150_000,
            translate_us: 500,
            cloud_queue_us: 100_000,
        }
    }
}

/// Rule sets installed at each tier, `None` meaning no agent runs there.
#[derive(Debug, Clone, Copy)]
pub struct RouteContext<'a> {
    pub device: &'a DeviceContext,
    pub device_rules: Option<&'a TranslationRuleSet>,
    pub gateway_rules: Option<&'a TranslationRuleSet>,
    pub cloud_rules: Option<&'a TranslationRuleSet>,
    pub profile: RouteProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub measurement: Measurement,
    pub arrival_us: u64,
    pub translated_at: EdgeTier,
    pub hops: Vec<EdgeTier>,
}

/// Tier hosting the translation agent for `pattern`.
pub fn translating_tier(pattern: ConnectionPattern) -> EdgeTier {
    match pattern {
        ConnectionPattern::PlatformSideAgent => EdgeTier::Cloud,
        ConnectionPattern::DeviceAgent | ConnectionPattern::DeviceLibs => EdgeTier::Device,
        ConnectionPattern::StandardAgent
        | ConnectionPattern::OpcUaAgent
        | ConnectionPattern::SpecialGatewayAgent
        | ConnectionPattern::HwIntercept => EdgeTier::Gateway,
    }
}

/// Carries one reading to the platform the way `pattern` prescribes.
///
/// Payload fields depend only on the reading and the rule that maps it;
/// the pattern decides where that rule is applied, which frames cross the
/// wire, and when the platform sees the result.
pub fn route_via_pattern(pattern: ConnectionPattern, reading: RawReading, ctx: &RouteContext<'_>) -> Result<Routed, GatewayError> {
    let tier = translating_tier(pattern);
    let rules = match tier {
        EdgeTier::Device => ctx.device_rules,
        EdgeTier::Gateway => ctx.gateway_rules,
        _ => ctx.cloud_rules,
    }
    .ok_or(GatewayError::MissingAgent { pattern, tier })?;

    let frame = if tier == EdgeTier::Device {
        FieldbusFrame::new(reading.unit_id, reading.register, reading.raw_value)
    } else {
        decode_fieldbus_frame(&encode_fieldbus_frame(reading.unit_id, reading.register, reading.raw_value))?
    };
    let measurement = translate(&frame, rules, reading.at_us, ctx.device, Origin::Via(pattern))?;

    let p = ctx.profile;
    let arrival_us = reading.at_us
        + p.device_to_gateway_us
        + p.gateway_to_cloud_us
        + p.translate_us
        + if tier == EdgeTier::Cloud { p.cloud_queue_us } else { 0 };
    Ok(Routed {
        measurement,
        arrival_us,
        translated_at: tier,
        hops: vec![EdgeTier::Device, EdgeTier::Gateway, EdgeTier::Cloud],
    })
}

/// A shared two-wire fieldbus segment. Every transmitted frame reaches the
/// legitimate master; taps receive copies and can never write.
#[derive(Debug, Clone, Default)]
pub struct TwoWireBus {
    master: Vec<u8>,
    taps: Vec<Vec<u8>>,
}

impl TwoWireBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attach_tap(&mut self) -> usize {
        self.taps.push(Vec::new());
        self.taps.len() - 1
    }

    pub fn transmit(&mut self, bytes: &[u8]) {
        self.master.extend_from_slice(bytes);
        for tap in &mut self.taps {
            tap.extend_from_slice(bytes);
        }
    }

    pub fn master_stream(&self) -> &[u8] {
        &self.master
    }

    /// Hands the bytes a tap has seen since the last call.
    pub fn drain_tap(&mut self, tap: usize) -> Vec<u8> {
        std::mem::take(&mut self.taps[tap])
    }
}

/// Gateway-tier agent that decodes a tapped byte stream.
#[derive(Debug, Clone)]
pub struct HwInterceptTap {
    rules: TranslationRuleSet,
    devices: BTreeMap<u8, DeviceContext>,
    pending: Vec<u8>,
    pub skipped_bytes: u64,
    pub unmapped: u64,
}

impl HwInterceptTap {
    pub fn new(rules: TranslationRuleSet) -> Self {
        HwInterceptTap {
            rules,
            devices: BTreeMap::new(),
            pending: Vec::new(),
            skipped_bytes: 0,
            unmapped: 0,
        }
    }

    /// Attributes frames with `unit_id` to a registered device.
    pub fn bind(&mut self, unit_id: u8, device: DeviceContext) {
        self.devices.insert(unit_id, device);
    }

    /// Feeds tapped bytes and returns every complete, valid, mapped frame as
    /// a measurement. Garbage is skipped one byte at a time until a frame
    /// decodes again.
    pub fn feed(&mut self, bytes: &[u8], now_us: u64) -> Vec<Measurement> {
        self.pending.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut at = 0;
        while self.pending.len() - at >= FRAME_LEN {
            let chunk = &self.pending[at..at + FRAME_LEN];
            let frame = match (chunk[0] == FRAME_SYNC).then(|| decode_fieldbus_frame(chunk)) {
                Some(Ok(f)) => f,
                _ => {
                    at += 1;
                    self.skipped_bytes += 1;
                    continue;
                }
            };
            at += FRAME_LEN;
            let translated = self
                .devices
                .get(&frame.unit_id)
                .ok_or(GatewayError::UnmappedRegister {
                    unit_id: frame.unit_id,
                    register: frame.register,
                })
                .and_then(|dev| translate(&frame, &self.rules, now_us, dev, Origin::Via(ConnectionPattern::HwIntercept)));
            match translated {
                Ok(m) => out.push(m),
                Err(_) => self.unmapped += 1,
            }
        }
        self.pending.drain(..at);
        out
    }
}
