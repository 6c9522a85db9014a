//! `key = value` config files. Each entry becomes `--key value` inserted
//! right after the subcommand, so flags given on the command line win.

use std::fs;
use std::path::Path;

use crate::args::SUBCOMMANDS;
use crate::error::{CliError, CliResult};

/// Converts config text to flag tokens. `true` yields a bare flag and
/// `false` drops the entry.
pub fn config_to_flags(text: &str) -> CliResult<Vec<String>> {
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') {
            return Err(CliError::Usage(format!(
                "config line {}: invalid key '{key}'",
                lineno + 1
            )));
        }
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => {
                flags.push(format!("--{key}"));
                flags.push(v.trim_matches('"').to_string());
            }
        }
    }
    Ok(flags)
}

/// Removes `--config FILE` from `argv` and splices the file's flags in
/// after the subcommand token.
pub fn expand_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config_path = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| CliError::Usage("--config needs a file path".into()))?;
            config_path = Some(path);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config_path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(Path::new(&path))?;
    let flags = config_to_flags(&text)?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|p| p + 2)
        .ok_or_else(|| CliError::Usage("--config given without a subcommand".into()))?;
    rest.splice(at..at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_from_text() {
        let text = "# training\nsteps = 300\nlr=0.1\ntarget_psnr = 30 # early stop\njson = true\nquiet = false\n";
        assert_eq!(
            config_to_flags(text).unwrap(),
            ["--steps", "300", "--lr", "0.1", "--target-psnr", "30", "--json"]
        );
        assert!(config_to_flags("steps 300").is_err());
    }

    #[test]
    fn spliced_after_subcommand() {
        let dir = std::env::temp_dir().join(format!("mpmqir-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "steps = 5\n").unwrap();
        let argv: Vec<String> = ["mpmqir", "--jobs", "2", "compress", "--config", path.to_str().unwrap(), "x.pgm"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            expand_config(argv).unwrap(),
            ["mpmqir", "--jobs", "2", "compress", "--steps", "5", "x.pgm"]
        );
    }
}
