use crate::error::{Error, Result};

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; keys may be written with or without a leading `--`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("config line {}: expected key = value", i + 1)));
        };
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", i + 1)));
        }
        out.push((key.replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

/// Turns config entries into long command-line options.
pub fn config_args(entries: &[(String, String)]) -> Vec<String> {
    entries
        .iter()
        .flat_map(|(k, v)| [format!("--{k}"), v.clone()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_prefixes() {
        let text = "# grid\nseed = 7\n--epochs=60,80\n\nsentiment_mode = frozen_lstm\n";
        let kv = parse_config(text).unwrap();
        assert_eq!(
            kv,
            vec![
                ("seed".to_string(), "7".to_string()),
                ("epochs".into(), "60,80".into()),
                ("sentiment-mode".into(), "frozen_lstm".into())
            ]
        );
        assert_eq!(config_args(&kv[..1]), vec!["--seed", "7"]);
        assert!(parse_config("seed 7").unwrap_err().is_config());
    }
}
