use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Realized exposure before coarsening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExposureValue {
    Numeric(f64),
    Label(String),
}

impl fmt::Display for ExposureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureValue::Numeric(v) => write!(f, "{v}"),
            ExposureValue::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub z: String,
    pub x_star: ExposureValue,
    pub y: u8,
}

/// A record whose exposure has been mapped to its analysis level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoarsenedRecord {
    pub z: String,
    pub x: String,
    pub y: u8,
}

/// Reads `z,x_star,y` records from delimited text with a header row.
///
/// Columns are located by header name, so extra columns are ignored. A numeric
/// `x_star` is stored as [`ExposureValue::Numeric`], anything else as a label.
/// When `instrument_levels` is given, every `z` must be one of them.
pub fn load_records<R: Read>(reader: R, instrument_levels: Option<&[String]>) -> Result<Vec<RawRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DataError::MalformedRow { line: 1, reason: e.to_string() })?.clone();
    let column =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()));
    let (zc, xc, yc) = (column("z")?, column("x_star")?, column("y")?);

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| -> Result<String, DataError> {
            match row.get(idx) {
                Some(v) if !v.is_empty() => Ok(v.to_string()),
                _ => Err(DataError::MalformedRow { line, reason: format!("missing value for `{name}`") }),
            }
        };
        let z = field(zc, "z")?;
        if let Some(levels) = instrument_levels {
            if !levels.contains(&z) {
                return Err(DataError::UnknownInstrument { line, label: z });
            }
        }
        let raw_x = field(xc, "x_star")?;
        let x_star = match raw_x.parse::<f64>() {
            Ok(v) if v.is_finite() => ExposureValue::Numeric(v),
            Ok(_) => return Err(DataError::MalformedRow { line, reason: format!("non-finite exposure `{raw_x}`") }),
            Err(_) => ExposureValue::Label(raw_x),
        };
        let raw_y = field(yc, "y")?;
        let y = match raw_y.as_str() {
            "0" => 0,
            "1" => 1,
            _ => return Err(DataError::BadOutcome { line, value: raw_y }),
        };
        out.push(RawRecord { z, x_star, y });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_well_formed_rows() {
        let text = "z,x_star,y\n0,0.1,1\n1,7.5,0\n1,none,1\n";
        let recs = load_records(text.as_bytes(), None).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].x_star, ExposureValue::Numeric(0.1));
        assert_eq!(recs[2].x_star, ExposureValue::Label("none".into()));
    }

    #[test]
    fn outcome_outside_binary_names_the_line() {
        let text = "z,x_star,y\n0,0.1,1\n0,0.3,2\n";
        let err = load_records(text.as_bytes(), None).unwrap_err();
        assert_eq!(err, DataError::BadOutcome { line: 3, value: "2".into() });
    }

    #[test]
    fn missing_values_are_rejected() {
        let text = "z,x_star,y\n0,,1\n";
        assert!(matches!(load_records(text.as_bytes(), None), Err(DataError::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn unknown_instrument_label() {
        let levels = vec!["0".to_string(), "1".to_string()];
        let text = "y,x_star,z\n1,0.1,0\n0,0.2,2\n";
        let err = load_records(text.as_bytes(), Some(&levels)).unwrap_err();
        assert_eq!(err, DataError::UnknownInstrument { line: 3, label: "2".into() });
    }

    #[test]
    fn header_must_declare_roles() {
        let text = "a,b,c\n0,1,0\n";
        assert_eq!(load_records(text.as_bytes(), None).unwrap_err(), DataError::MissingColumn("z".into()));
    }
}
