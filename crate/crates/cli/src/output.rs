use std::collections::BTreeMap;
use std::path::Path;

use ivcoarse::bounds::{format_fixed, rational_string, BoundResult, BoundsError, FarkasCertificate};
use ivcoarse::data::{hex_digest, DataError, Estimand, Scenario};
use ivcoarse::inference::{BootstrapSpec, InferenceError};
use ivcoarse::oracle::OracleError;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

pub const REPORT_SCHEMA: &str = "ivcoarse-report/1";

#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputEcho {
    pub fn read(role: &str, path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let echo = Self { role: role.into(), path: path.display().to_string(), sha256: hex_digest(&bytes) };
        Ok((echo, bytes))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<InputEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimand: Option<Estimand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSpec>,
    pub format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub slack: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, Value>,
}

/// One run, as printed with `--format json`.
#[derive(Debug, Clone, Serialize)]
pub struct Document {
    pub schema: &'static str,
    pub version: &'static str,
    pub config_echo: RunConfig,
    pub results: Value,
    pub diagnostics: Value,
    pub content_hash: String,
}

impl Document {
    pub fn new(config: RunConfig, results: Value, diagnostics: Value) -> Self {
        let body = json!({
            "schema": REPORT_SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "config_echo": config,
            "results": results,
            "diagnostics": diagnostics,
        });
        let content_hash = hex_digest(body.to_string().as_bytes());
        Self {
            schema: REPORT_SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            config_echo: config,
            results,
            diagnostics,
            content_hash,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

pub fn number(r: &BigRational) -> Value {
    json!({
        "exact": rational_string(r),
        "value": r.to_f64(),
        "rounded": format_fixed(r, 2),
    })
}

pub fn interval(b: &BoundResult) -> Value {
    json!({ "lower": number(&b.lower), "upper": number(&b.upper), "method": b.method })
}

pub fn float_interval(lower: f64, upper: f64) -> Value {
    json!({ "lower": lower, "upper": upper, "rounded": [fixed(lower), fixed(upper)] })
}

/// Two decimals, ties upward.
pub fn fixed(v: f64) -> String {
    match BigRational::from_float(v) {
        Some(r) => format_fixed(&r, 2),
        None => v.to_string(),
    }
}

pub fn certificate(c: &FarkasCertificate) -> Value {
    json!({
        "inequality": c.describe(),
        "weights": c.weights.iter().map(|(cell, w)| json!({
            "z": cell.z, "x": c.levels[cell.x], "y": cell.y, "weight": rational_string(w)
        })).collect::<Vec<_>>(),
        "constant": rational_string(&c.constant),
        "violation": rational_string(&c.observed),
    })
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Infeasible(String, Option<Value>),
    Cap(String),
    Failed(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(..) => 3,
            CliError::Cap(_) => 4,
            CliError::Failed(_) | CliError::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Infeasible(..) => "infeasible",
            CliError::Cap(_) => "cap-exceeded",
            CliError::Failed(_) => "verification-failed",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Infeasible(m, _)
            | CliError::Cap(m)
            | CliError::Failed(m)
            | CliError::Internal(m) => m,
        }
    }

    pub fn diagnostics(&self) -> Value {
        let mut d = json!({ "error": { "kind": self.kind(), "message": self.message() } });
        if let CliError::Infeasible(_, Some(cert)) = self {
            d["error"]["farkas"] = cert.clone();
        }
        d
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match &e {
            BoundsError::Infeasible(c) => CliError::Infeasible(e.to_string(), Some(certificate(c))),
            BoundsError::CapExceeded(_) => CliError::Cap(e.to_string()),
            BoundsError::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Bounds(b) => b.into(),
            InferenceError::Data(d) => d.into(),
            InferenceError::InvalidSpec(_) => CliError::Input(e.to_string()),
            InferenceError::TooManyInfeasible { .. } => CliError::Infeasible(e.to_string(), None),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Bounds(b) => b.into(),
            OracleError::Data(d) => d.into(),
            OracleError::Response(r) => CliError::Input(r.to_string()),
        }
    }
}

impl From<ivcoarse::response::ResponseError> for CliError {
    fn from(e: ivcoarse::response::ResponseError) -> Self {
        CliError::Input(e.to_string())
    }
}
