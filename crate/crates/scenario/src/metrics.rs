//! Metrics CSV and the report rendered from it.
//!
//! Each row starts with its record type; every type has a fixed column set,
//! announced once by a `#`-prefixed header line before its first row.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::schema::AssertionSpec;

pub const RECORD_COLUMNS: [(&str, &str); 11] = [
    ("meta", "key,value"),
    ("metric", "name,value"),
    ("meas", "tenant,device,sensor,count"),
    ("reaction", "placement,fault_id,robot,injected_us,command_arrival_us,latency_us,deadline_met"),
    ("throughput", "second,max_queue_depth"),
    ("schedule", "device,send_time_us,reason"),
    ("lifetime", "device,policy,messages_per_day,lifetime_days,lifetime_years"),
    ("api", "code,count"),
    ("ruleset", "gateway,version,translated"),
    ("aggregate", "device,sensor,from_us,to_us,count,min,max,mean"),
    ("check", "name,metric,op,threshold,actual,result"),
];

fn columns_of(record: &str) -> &'static str {
    RECORD_COLUMNS
        .iter()
        .find(|(r, _)| *r == record)
        .map(|(_, c)| *c)
        .unwrap_or_else(|| panic!("undeclared record type {record}"))
}

fn clean(field: &str) -> String {
    field.replace([',', '\n'], ";")
}

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    csv: String,
    announced: Vec<&'static str>,
    values: BTreeMap<String, String>,
}

impl Metrics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row(&mut self, record: &'static str, fields: &[String]) {
        let columns = columns_of(record);
        debug_assert_eq!(columns.split(',').count(), fields.len(), "{record} column count");
        if !self.announced.contains(&record) {
            self.announced.push(record);
            let _ = writeln!(self.csv, "#{record},{columns}");
        }
        self.csv.push_str(record);
        for f in fields {
            self.csv.push(',');
            self.csv.push_str(&clean(f));
        }
        self.csv.push('\n');
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.row("meta", &[key.to_string(), value.to_string()]);
    }

    pub fn metric(&mut self, name: &str, value: impl ToString) {
        let v = value.to_string();
        self.values.insert(name.to_string(), v.clone());
        self.row("metric", &[name.to_string(), v]);
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(|v| v.parse().ok())
    }

    /// Appends one `check` row per assertion; true iff all hold.
    pub fn check_all(&mut self, assertions: &[AssertionSpec]) -> bool {
        let mut all = true;
        for a in assertions {
            let actual = self.value(&a.metric);
            let pass = actual.is_some_and(|x| a.op.holds(x, a.value));
            all &= pass;
            self.row(
                "check",
                &[
                    a.name.clone(),
                    a.metric.clone(),
                    a.op.as_str().to_string(),
                    a.value.to_string(),
                    actual.map_or_else(|| "missing".to_string(), |x| x.to_string()),
                    if pass { "PASS" } else { "FAIL" }.to_string(),
                ],
            );
        }
        all
    }

    pub fn csv(&self) -> &str {
        &self.csv
    }

    pub fn into_csv(self) -> String {
        self.csv
    }
}

/// Human-readable summary built from the metrics CSV alone.
pub fn render_report(csv: &str) -> String {
    let mut meta = Vec::new();
    let mut metrics = Vec::new();
    let mut checks = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for line in csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        match f[0] {
            "meta" if f.len() == 3 => meta.push((f[1], f[2])),
            "metric" if f.len() == 3 => metrics.push((f[1], f[2])),
            "check" if f.len() == 7 => checks.push(f),
            other => *counts.entry(other).or_default() += 1,
        }
    }
    let mut out = String::new();
    for (k, v) in &meta {
        let _ = writeln!(out, "{k:>10}: {v}");
    }
    if !counts.is_empty() {
        let parts: Vec<String> = counts.iter().map(|(k, n)| format!("{k}={n}")).collect();
        let _ = writeln!(out, "{:>10}: {}", "records", parts.join(" "));
    }
    out.push_str("\nmetrics\n");
    let width = metrics.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &metrics {
        let _ = writeln!(out, "  {k:<width$}  {v}");
    }
    out.push_str("\nchecks\n");
    let passed = checks.iter().filter(|c| c[6] == "PASS").count();
    for c in &checks {
        let _ = writeln!(out, "  {}  {}: {} {} {} (actual {})", c[6], c[1], c[2], c[3], c[4], c[5]);
    }
    if checks.is_empty() {
        out.push_str("  (none declared)\n");
    }
    let verdict = if passed == checks.len() { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "\nverdict: {verdict} ({passed}/{} checks)", checks.len());
    out
}
