//! `key=value` config files and run manifests.
//!
//! A config file supplies flag values for one subcommand; its entries are
//! spliced into the argument list just after the subcommand name, so any flag
//! given on the command line (which comes later) overrides them. A manifest
//! is a config file that also records `command=` and `version=`, listing
//! every flag of the command that produced an output, defaults included.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgMatches, Command};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Keys that describe a manifest rather than set a flag.
const RESERVED: [&str; 2] = ["command", "version"];

/// Global flags that are never recorded or injected.
const GLOBAL: [&str; 2] = ["config", "verbose"];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value, got {line:?}", origin.display(), i + 1))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                bail!("{}:{}: empty key", origin.display(), i + 1);
            }
            entries.push((key, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path)
    }

    /// Flag form of the entries: `--key value`, bare `--key` for `true`,
    /// nothing for `false`.
    fn to_flags(&self) -> Vec<OsString> {
        let mut out = Vec::new();
        for (k, v) in &self.entries {
            if RESERVED.contains(&k.as_str()) || GLOBAL.contains(&k.as_str()) {
                continue;
            }
            match v.as_str() {
                "true" => out.push(format!("--{k}").into()),
                "false" => {}
                _ => {
                    out.push(format!("--{k}").into());
                    out.push(v.into());
                }
            }
        }
        out
    }
}

/// Usage problems found while rewriting the argument list.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Removes `--name VALUE` or `--name=VALUE` from `args`, returning the value.
fn take_option(args: &mut Vec<String>, name: &str) -> Result<Option<String>> {
    let flag = format!("--{name}");
    let prefix = format!("--{name}=");
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--" {
            break;
        }
        if args[i] == flag {
            if i + 1 >= args.len() {
                return Err(usage(format!("{flag} needs a value")));
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(v) = args[i].strip_prefix(&prefix) {
            found = Some(v.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

/// Position just after the subcommand path (e.g. `gen grassy`), found by
/// walking `cmd`'s subcommand tree over the non-flag tokens.
fn subcommand_end(cmd: &Command, args: &[String]) -> Option<usize> {
    let mut current = cmd;
    let mut end = None;
    let mut i = 1;
    while i < args.len() {
        let tok = &args[i];
        if tok == "--" {
            break;
        }
        if tok.starts_with('-') {
            // global `-v` style flags take no value; `--config` was removed already
            i += 1;
            continue;
        }
        match current.find_subcommand(tok) {
            Some(sub) => {
                current = sub;
                end = Some(i + 1);
                if !current.has_subcommands() {
                    break;
                }
            }
            None if end.is_some() => break,
            None => return None,
        }
        i += 1;
    }
    end
}

/// Expands `--config FILE` and `gen --from-manifest FILE` into ordinary flags.
pub fn preprocess(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut args = Vec::with_capacity(argv.len());
    for a in argv {
        args.push(
            a.into_string()
                .map_err(|a| usage(format!("argument is not valid UTF-8: {a:?}")))?,
        );
    }

    let gen_pos = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1);
    if gen_pos.is_some_and(|p| args[p] == "gen") {
        if let Some(path) = take_option(&mut args, "from-manifest")? {
            let kv = KeyValues::read(Path::new(&path)).map_err(|e| usage(e.to_string()))?;
            let command = kv
                .get("command")
                .ok_or_else(|| usage(format!("{path}: manifest has no command= line")))?;
            let words: Vec<&str> = command.split_whitespace().collect();
            if words.len() != 2 || words[0] != "gen" {
                return Err(usage(format!("{path}: not a gen manifest (command={command})")));
            }
            let p = gen_pos.expect("checked");
            if args.get(p + 1).is_some_and(|a| a == "grassy" || a == "planted") {
                if args[p + 1] != words[1] {
                    return Err(usage(format!(
                        "manifest is for `gen {}`, not `gen {}`",
                        words[1],
                        args[p + 1]
                    )));
                }
                args.remove(p + 1);
            }
            let mut spliced: Vec<String> = vec![words[1].to_string()];
            spliced.extend(kv.to_flags().into_iter().map(|s| s.into_string().expect("utf-8")));
            args.splice(p + 1..p + 1, spliced);
        }
    }

    if let Some(path) = take_option(&mut args, "config")? {
        let kv = KeyValues::read(Path::new(&path)).map_err(|e| usage(e.to_string()))?;
        let at = subcommand_end(cmd, &args).ok_or_else(|| usage("--config needs a subcommand to apply to"))?;
        let flags: Vec<String> = kv
            .to_flags()
            .into_iter()
            .map(|s| s.into_string().expect("utf-8"))
            .collect();
        args.splice(at..at, flags);
    }
    Ok(args.into_iter().map(OsString::from).collect())
}

/// Manifest text for the innermost subcommand of `matches`: the command
/// path, the tool version, then every flag with its effective raw value.
pub fn manifest(root: &Command, matches: &ArgMatches) -> String {
    let mut path = Vec::new();
    let mut cmd = root;
    let mut m = matches;
    while let Some((name, sub_m)) = m.subcommand() {
        path.push(name.to_string());
        cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
        m = sub_m;
    }
    let mut out = String::new();
    writeln!(out, "command={}", path.join(" ")).expect("string write");
    writeln!(out, "version={}", env!("CARGO_PKG_VERSION")).expect("string write");
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        if GLOBAL.contains(&long) || RESERVED.contains(&long) || long == "help" || long == "from-manifest" {
            continue;
        }
        let Ok(Some(raw)) = m.try_get_raw(id) else { continue };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        if values.is_empty() {
            continue;
        }
        writeln!(out, "{long}={}", values.join(",")).expect("string write");
    }
    out
}

pub fn write_manifest(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_underscores() {
        let kv = KeyValues::parse("# run\nbatch_size = 64\n\nmode=joint\n", Path::new("c.txt")).unwrap();
        assert_eq!(kv.get("batch-size"), Some("64"));
        assert_eq!(kv.get("mode"), Some("joint"));
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KeyValues::parse("epochs 3\n", Path::new("c.txt")).is_err());
    }

    #[test]
    fn booleans_become_bare_flags() {
        let kv = KeyValues::parse(
            "timing=true\ncheck-determinism=false\ncommand=eval\nk=3\n",
            Path::new("c"),
        )
        .unwrap();
        let flags: Vec<String> = kv.to_flags().into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(flags, ["--timing", "--k", "3"]);
    }

    #[test]
    fn take_option_handles_both_spellings() {
        let mut a: Vec<String> = ["cfs", "train", "--config=x", "--k", "2"].map(String::from).to_vec();
        assert_eq!(take_option(&mut a, "config").unwrap().as_deref(), Some("x"));
        assert_eq!(a, ["cfs", "train", "--k", "2"]);
        let mut b: Vec<String> = ["cfs", "--config", "y", "train"].map(String::from).to_vec();
        assert_eq!(take_option(&mut b, "config").unwrap().as_deref(), Some("y"));
        assert_eq!(b, ["cfs", "train"]);
    }
}
