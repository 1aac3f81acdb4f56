//! Config resolution: defaults, then a JSON file, then command-line flags.

use std::path::Path;

use fbcode_core::harness::round_g9;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// Prefix of the line that embeds the resolved config in every artifact.
pub const CONFIG_PREFIX: &str = "# config: ";

const MAX_GRID_POINTS: usize = 10_000;

/// `v`, `a,b,c` or the inclusive range `start:stop:step`, in dB.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("'{t}' is not a number in SNR grid '{s}'")))?;
        if v.is_nan() {
            return Err(CliError::usage(format!("NaN in SNR grid '{s}'")));
        }
        Ok(v)
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [one] => one.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
                return Err(CliError::usage(format!("grid '{s}' needs start <= stop and step > 0")));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            if n > MAX_GRID_POINTS {
                return Err(CliError::usage(format!("grid '{s}' has more than {MAX_GRID_POINTS} points")));
            }
            (0..n).map(|i| round_g9(a + i as f64 * step)).collect()
        }
        _ => return Err(CliError::usage(format!("SNR grid '{s}' must be 'v', 'a,b,..' or 'start:stop:step'"))),
    };
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::usage(format!("SNR grid '{s}' must be strictly increasing")));
    }
    Ok(grid)
}

/// `noiseless` or a feedback SNR in dB.
pub fn parse_fb(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("noiseless") {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| CliError::usage(format!("feedback must be 'noiseless' or a dB value, got '{s}'")))
}

/// The config object in `path`: either a JSON document or an artifact
/// carrying a `# config: ` line.
pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        // a plain config, a JSON artifact, or JSON lines led by the artifact object
        let first = text.lines().next().unwrap_or_default();
        let v: Value = serde_json::from_str(&text)
            .or_else(|_| serde_json::from_str(first))
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        return match v {
            Value::Object(mut m) if m.contains_key("tool") => m
                .remove("config")
                .ok_or_else(|| CliError::usage(format!("{} has no config", path.display()))),
            other => Ok(other),
        };
    }
    let json = text
        .lines()
        .find_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .ok_or_else(|| CliError::usage(format!("{} is neither JSON nor an artifact with a config line", path.display())))?;
    serde_json::from_str(json).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn overlay(base: &mut Map<String, Value>, top: Value, origin: &str) -> Result<()> {
    match top {
        Value::Object(m) => {
            for (k, v) in m {
                if !base.contains_key(&k) {
                    return Err(CliError::usage(format!("unknown {origin} key '{k}'")));
                }
                base.insert(k, v);
            }
            Ok(())
        }
        _ => Err(CliError::usage(format!("{origin} must be a JSON object"))),
    }
}

/// `C::default()`, overridden by the file at `file`, overridden by every
/// flag that `flags` serializes.
pub fn resolve<C, F>(file: Option<&Path>, flags: &F) -> Result<C>
where
    C: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let Value::Object(mut merged) = serde_json::to_value(C::default()).expect("config serializes") else {
        unreachable!("configs are structs")
    };
    if let Some(path) = file {
        overlay(&mut merged, read_config_file(path)?, "config")?;
    }
    overlay(&mut merged, serde_json::to_value(flags).expect("flags serialize"), "flag")?;
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage(format!("invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-1").unwrap(), vec![-1.0]);
        assert_eq!(parse_grid("-2:-0.5:0.5").unwrap(), vec![-2.0, -1.5, -1.0, -0.5]);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_grid("0:1:0.1").unwrap()[3], 0.3);
        assert_eq!(parse_grid("-1.5,-1,-0.5").unwrap(), vec![-1.5, -1.0, -0.5]);
        for bad in ["", "a", "1:0:1", "0:1:0", "0:1", "1,0", "0:1e9:1e-9"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn feedback() {
        assert_eq!(parse_fb("noiseless").unwrap(), None);
        assert_eq!(parse_fb("10").unwrap(), Some(10.0));
        assert!(parse_fb("loud").is_err());
    }

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        a: u32,
        b: String,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self { a: 1, b: "x".into() }
        }
    }

    #[derive(Serialize)]
    struct DemoFlags {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<u32>,
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"a": 5, "b": "file"}"#).unwrap();
        let c: Demo = resolve(Some(&p), &DemoFlags { a: None }).unwrap();
        assert_eq!(c, Demo { a: 5, b: "file".into() });
        let c: Demo = resolve(Some(&p), &DemoFlags { a: Some(9) }).unwrap();
        assert_eq!(c.a, 9);
        let c: Demo = resolve(None, &DemoFlags { a: None }).unwrap();
        assert_eq!(c, Demo::default());

        std::fs::write(&p, "# fbcode\n# config: {\"a\": 7}\nrow\n").unwrap();
        assert_eq!(resolve::<Demo, _>(Some(&p), &DemoFlags { a: None }).unwrap().a, 7);
        std::fs::write(&p, r#"{"zzz": 1}"#).unwrap();
        assert!(resolve::<Demo, _>(Some(&p), &DemoFlags { a: None }).is_err());
        assert!(matches!(
            resolve::<Demo, _>(Some(&dir.path().join("missing")), &DemoFlags { a: None }),
            Err(CliError::Io(_))
        ));
    }
}
