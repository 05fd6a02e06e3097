//! Policy files.
//!
//! ```text
//! prmrl-policy 1
//! task indoor
//! limit 1
//! features track_width=0.5
//! seed 7
//! fitness 0.96 0.41
//! params 2 1.2 2 0.5 1.5 0.3 0.2 0.3 0.3 0.9
//! ```
//!
//! Aerial files use `features pendulum_length=0.62 gravity=9.81`. `seed` and
//! `fitness` may be `none`. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Features, Fitness, Policy};
use crate::error::{Error, Result};
use crate::sim::Task;

const MAGIC: &str = "prmrl-policy";
const VERSION: u32 = 1;

pub fn render_policy(policy: &Policy) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "task {}", policy.task());
    let _ = writeln!(s, "limit {}", policy.limit());
    match policy.features() {
        Features::Indoor { track_width } => {
            let _ = writeln!(s, "features track_width={track_width}");
        }
        Features::Aerial {
            pendulum_length,
            gravity,
        } => {
            let _ = writeln!(s, "features pendulum_length={pendulum_length} gravity={gravity}");
        }
    }
    match policy.training_seed {
        Some(seed) => {
            let _ = writeln!(s, "seed {seed}");
        }
        None => s.push_str("seed none\n"),
    }
    match policy.fitness {
        Some(f) => {
            let _ = writeln!(s, "fitness {} {}", f.success_rate, f.mean_return);
        }
        None => s.push_str("fitness none\n"),
    }
    s.push_str("params");
    for p in policy.params() {
        let _ = write!(s, " {p}");
    }
    s.push('\n');
    s
}

pub fn parse_policy(text: &str, source: &str) -> Result<Policy> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, msg: String| Error::parse(source, line, msg);
    let field = |idx: usize, key: &str| -> Result<&str> {
        let raw = lines
            .get(idx)
            .ok_or_else(|| err(idx + 1, format!("unexpected end of file, expected `{key}`")))?;
        let (k, rest) = raw.split_once(' ').unwrap_or((raw, ""));
        if k != key {
            return Err(err(idx + 1, format!("expected `{key}`, got `{k}`")));
        }
        Ok(rest.trim())
    };
    let num = |line: usize, v: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| err(line, format!("not a number: `{v}`")))
    };

    let header = field(0, MAGIC)?;
    if header != VERSION.to_string() {
        return Err(Error::VersionMismatch {
            kind: "policy",
            found: header.to_string(),
            expected: VERSION,
        });
    }
    let task: Task = field(1, "task")?.parse().map_err(|e: Error| err(2, e.to_string()))?;
    let limit = num(3, field(2, "limit")?)?;

    let feature_text = field(3, "features")?;
    let mut kv = std::collections::BTreeMap::new();
    for item in feature_text.split_whitespace() {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| err(4, format!("expected key=value, got `{item}`")))?;
        kv.insert(k, num(4, v)?);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| err(4, format!("missing feature `{k}`")));
    let features = match task {
        Task::Indoor => Features::Indoor {
            track_width: get("track_width")?,
        },
        Task::Aerial => Features::Aerial {
            pendulum_length: get("pendulum_length")?,
            gravity: get("gravity")?,
        },
    };

    let seed = match field(4, "seed")? {
        "none" => None,
        v => Some(v.parse::<u64>().map_err(|_| err(5, format!("bad seed `{v}`")))?),
    };
    let fitness = match field(5, "fitness")? {
        "none" => None,
        v => {
            let parts: Vec<&str> = v.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(err(6, "fitness needs success_rate and mean_return".into()));
            }
            Some(Fitness {
                success_rate: num(6, parts[0])?,
                mean_return: num(6, parts[1])?,
            })
        }
    };
    let params = field(6, "params")?
        .split_whitespace()
        .map(|v| num(7, v))
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, extra)) = lines.iter().enumerate().skip(7).find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(i + 1, format!("unexpected trailing content `{extra}`")));
    }

    let mut policy = Policy::new(task, params, limit, features).map_err(|e| err(7, e.to_string()))?;
    policy.training_seed = seed;
    policy.fitness = fitness;
    Ok(policy)
}

pub fn save_policy(policy: &Policy, path: &Path) -> Result<()> {
    fs::write(path, render_policy(policy))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    let text = fs::read_to_string(path)?;
    parse_policy(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AerialParams, IndoorParams};

    #[test]
    fn round_trip_both_tasks() {
        let mut indoor = Policy::reference_indoor(&IndoorParams::default());
        indoor.training_seed = Some(42);
        indoor.fitness = Some(Fitness {
            success_rate: 0.95,
            mean_return: 0.1 + 0.2,
        });
        let aerial = Policy::reference_aerial(&AerialParams::default());
        for p in [indoor, aerial] {
            let back = parse_policy(&render_policy(&p), "mem").unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn version_and_truncation_errors() {
        let text = render_policy(&Policy::reference_indoor(&IndoorParams::default()));
        let bumped = text.replacen("prmrl-policy 1", "prmrl-policy 9", 1);
        assert!(matches!(parse_policy(&bumped, "m"), Err(Error::VersionMismatch { .. })));
        let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        match parse_policy(&truncated, "m") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let short = text.replace("params 2 ", "params ");
        match parse_policy(&short, "m") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        let p = Policy::reference_aerial(&AerialParams::default());
        save_policy(&p, &path).unwrap();
        assert_eq!(load_policy(&path).unwrap(), p);
    }
}
