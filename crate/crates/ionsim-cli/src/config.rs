use crate::error::CliError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming the directory under which run directories are created.
pub const OUTPUT_ROOT_VAR: &str = "IONSIM_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "ionsim-out";
const MAX_SWEEP_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// On-disk run description. `params` is validated against the scenario schema later.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: String,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::schema("config", e.message()))?;
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            let message = e.into_inner().to_string();
            match missing_field(&message) {
                Some(field) => CliError::schema(field, "required field is missing"),
                None => CliError::schema(if path == "." { "config".to_string() } else { path }, message),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub params: toml::Table,
    pub seed: u64,
    pub output: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn default_output(scenario: &str) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUTPUT_ROOT.into());
        root.join(scenario)
    }
}

/// Deserialize a params table into a scenario schema, reporting the failing field path.
pub fn parse_params<T: DeserializeOwned>(params: &toml::Table) -> Result<T, CliError> {
    let value = toml::Value::Table(params.clone());
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let mut message = e.into_inner().to_string();
        let mut path = if inner == "." { "params".to_string() } else { format!("params.{inner}") };
        if let Some(field) = missing_field(&message) {
            path = format!("{path}.{field}");
            message = "required field is missing".into();
        }
        CliError::schema(path, message)
    })
}

fn missing_field(message: &str) -> Option<&str> {
    message.strip_prefix("missing field `")?.split('`').next()
}

/// A list of sweep values, written as a scalar, an array, `"start:stop:step"` (inclusive)
/// or `"log:from:to:count"` (geometric).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Sweep(pub Vec<f64>);

impl Sweep {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSweep {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl<'de> Deserialize<'de> for Sweep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSweep::deserialize(d)
            .map_err(|_| serde::de::Error::custom("expected a number, an array or a range string"))?;
        let values = match raw {
            RawSweep::One(x) => vec![x],
            RawSweep::Many(v) => v,
            RawSweep::Text(s) => parse_range(&s).map_err(serde::de::Error::custom)?,
        };
        if values.is_empty() {
            return Err(serde::de::Error::custom("sweep is empty"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(serde::de::Error::custom("sweep values must be finite"));
        }
        Ok(Sweep(values))
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["log", from, to, count] => {
            let (a, b) = (number(from)?, number(to)?);
            let n: usize = count.trim().parse().map_err(|_| format!("`{count}` is not a point count"))?;
            if !(a > 0.0 && b > 0.0) || n == 0 || n > MAX_SWEEP_POINTS {
                return Err(format!("bad geometric range `{text}`"));
            }
            Ok(ionsim::fkim::geometric_grid(a, b, n))
        }
        [start, stop, step] => {
            let (a, b, s) = (number(start)?, number(stop)?, number(step)?);
            if s == 0.0 || (b - a) * s < 0.0 {
                return Err(format!("step in `{text}` does not reach the end point"));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize + 1;
            if n > MAX_SWEEP_POINTS {
                return Err(format!("`{text}` expands to more than {MAX_SWEEP_POINTS} points"));
            }
            Ok((0..n).map(|k| a + k as f64 * s).collect())
        }
        [single] if single.contains(',') => single.split(',').map(number).collect(),
        [single] => Ok(vec![number(single)?]),
        _ => Err(format!("unrecognised range `{text}`")),
    }
}

/// Turn trailing `--key value` pairs into a params table. Keys are kebab-case on the command
/// line and snake_case in the table; a leading bare word becomes `mode`.
pub fn params_from_args(args: &[String]) -> Result<toml::Table, CliError> {
    let mut table = toml::Table::new();
    let mut it = args.iter().peekable();
    if let Some(first) = it.peek() {
        if !first.starts_with("--") {
            table.insert("mode".into(), toml::Value::String(it.next().unwrap().clone()));
        }
    }
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(CliError::schema("args", format!("unexpected argument `{arg}`")));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match it.peek() {
                Some(v) if !v.starts_with("--") => (flag.to_string(), it.next().unwrap().clone()),
                _ => (flag.to_string(), "true".to_string()),
            },
        };
        let key = key.replace('-', "_");
        if table.contains_key(&key) {
            return Err(CliError::schema(format!("params.{key}"), "given more than once"));
        }
        table.insert(key, scalar(&value));
    }
    Ok(table)
}

fn scalar(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(x) = text.parse::<f64>() {
        return toml::Value::Float(x);
    }
    match text {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(text.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_expand_inclusively() {
        assert_eq!(parse_range("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_range("0:6.28:0.1").unwrap().len(), 63);
        assert_eq!(parse_range("3,1,2").unwrap(), vec![3.0, 1.0, 2.0]);
        assert_eq!(parse_range("log:0.01:1:3").unwrap().len(), 3);
        assert!(parse_range("1:0:0.5").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("a:b").is_err());
    }

    #[test]
    fn flags_become_params() {
        let args: Vec<String> = ["scan", "--f-mhz", "1", "--species=Yb-171", "--phi", "0:1:0.5", "--excited"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let t = params_from_args(&args).unwrap();
        assert_eq!(t["mode"].as_str(), Some("scan"));
        assert_eq!(t["f_mhz"].as_integer(), Some(1));
        assert_eq!(t["species"].as_str(), Some("Yb-171"));
        assert_eq!(t["phi"].as_str(), Some("0:1:0.5"));
        assert_eq!(t["excited"].as_bool(), Some(true));
        assert!(params_from_args(&["--n".into(), "1".into(), "--n".into(), "2".into()]).is_err());
    }
}
