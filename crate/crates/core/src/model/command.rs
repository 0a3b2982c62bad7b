use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommandVerb {
    Stop,
    Resume,
    SetParam,
    UpdateConfig,
}

impl fmt::Display for CommandVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandVerb::Stop => "STOP",
            CommandVerb::Resume => "RESUME",
            CommandVerb::SetParam => "SET_PARAM",
            CommandVerb::UpdateConfig => "UPDATE_CONFIG",
        })
    }
}

/// South-bound instruction to a device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub device_id: String,
    pub verb: CommandVerb,
    pub payload: BTreeMap<String, String>,
    pub issued_at_us: u64,
    pub deadline_us: Option<u64>,
}

impl Command {
    pub fn new(
        device_id: impl Into<String>,
        verb: CommandVerb,
        issued_at_us: u64,
        deadline_us: Option<u64>,
    ) -> Result<Self, ModelError> {
        if let Some(d) = deadline_us {
            if d <= issued_at_us {
                return Err(ModelError::InvalidCommand(format!(
                    "deadline {d} not after issue time {issued_at_us}"
                )));
            }
        }
        Ok(Command {
            device_id: device_id.into(),
            verb,
            payload: BTreeMap::new(),
            issued_at_us,
            deadline_us,
        })
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.payload.insert(key.into(), value.into());
        self
    }

    /// `CMD|device|verb|issued|deadline|k=v,...` with `-` for no deadline.
    pub fn encode(&self) -> String {
        let deadline = self
            .deadline_us
            .map_or_else(|| "-".to_string(), |d| d.to_string());
        let params: Vec<String> = self.payload.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "CMD|{}|{}|{}|{}|{}\n",
            self.device_id,
            self.verb,
            self.issued_at_us,
            deadline,
            params.join(",")
        )
    }

    pub fn decode(line: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::InvalidCommand(format!("malformed line {line:?}"));
        let f: Vec<&str> = line.strip_suffix('\n').unwrap_or(line).split('|').collect();
        let ["CMD", device_id, verb, issued, deadline, params] = f[..] else {
            return Err(bad());
        };
        let verb = match verb {
            "STOP" => CommandVerb::Stop,
            "RESUME" => CommandVerb::Resume,
            "SET_PARAM" => CommandVerb::SetParam,
            "UPDATE_CONFIG" => CommandVerb::UpdateConfig,
            _ => return Err(bad()),
        };
        let issued: u64 = issued.parse().map_err(|_| bad())?;
        let deadline = match deadline {
            "-" => None,
            d => Some(d.parse().map_err(|_| bad())?),
        };
        let mut cmd = Command::new(device_id, verb, issued, deadline)?;
        for kv in params.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            cmd = cmd.with_param(k, v);
        }
        Ok(cmd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deadline_must_follow_issue() {
        assert!(Command::new("r1", CommandVerb::Stop, 10, Some(10)).is_err());
        assert!(Command::new("r1", CommandVerb::Stop, 10, Some(9)).is_err());
        let c = Command::new("r1", CommandVerb::Stop, 10, Some(11)).unwrap();
        assert_eq!(c.encode(), "CMD|r1|STOP|10|11|\n");
        let c = Command::new("r1", CommandVerb::SetParam, 5, None)
            .unwrap()
            .with_param("b", "2")
            .with_param("a", "1");
        assert_eq!(c.encode(), "CMD|r1|SET_PARAM|5|-|a=1,b=2\n");
        assert_eq!(Command::decode(&c.encode()).unwrap(), c);
        assert!(Command::decode("CMD|r1|JUMP|5|-|").is_err());
        assert!(Command::decode("CMD|r1|STOP|5|3|").is_err());
    }
}
