//! `key=value` text files: map sidecars and scenario configs.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear once.
//!
//! A scenario file tunes the simulators:
//!
//! ```text
//! dt=0.2                  # control period, seconds
//! sensor_sigma=0.1        # LIDAR range noise, metres
//! v_max=1.0               # wheel speed bound, m/s
//! track_width=0.5         # wheel separation, metres
//! a_max=5.0               # aerial acceleration bound, m/s^2
//! pendulum_length=0.62    # load cable length, metres
//! displacement_bound_deg=45
//! obstacle_height=3.0     # aerial extrusion height, metres
//! ceiling=6.0             # aerial altitude ceiling, metres
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::dynamics::{AerialParams, IndoorParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, line_no, format!("expected key=value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::parse(source, line_no, "empty key"));
            }
            if entries.insert(k.to_string(), (line_no, v.to_string())).is_some() {
                return Err(Error::parse(source, line_no, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::parse(&self.source, *line, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(&self.source, *line, format!("`{key}`: not a number: `{v}`"))),
        }
    }
}

/// Simulator settings for both tasks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScenarioConfig {
    pub indoor: IndoorParams,
    pub aerial: AerialParams,
}

const SCENARIO_KEYS: &[&str] = &[
    "dt",
    "aerial_dt",
    "sensor_sigma",
    "v_max",
    "track_width",
    "a_max",
    "pendulum_length",
    "gravity",
    "displacement_bound_deg",
    "obstacle_height",
    "ceiling",
    "floor",
];

impl ScenarioConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let kv = KeyValues::parse(text, source)?;
        kv.reject_unknown(SCENARIO_KEYS)?;
        let mut cfg = ScenarioConfig::default();
        let set = |key: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = kv.f64(key)? {
                *slot = v;
            }
            Ok(())
        };
        set("dt", &mut cfg.indoor.dt)?;
        set("sensor_sigma", &mut cfg.indoor.sensor_sigma)?;
        set("v_max", &mut cfg.indoor.v_max)?;
        set("track_width", &mut cfg.indoor.track_width)?;
        set("aerial_dt", &mut cfg.aerial.dt)?;
        set("a_max", &mut cfg.aerial.a_max)?;
        set("pendulum_length", &mut cfg.aerial.pendulum_length)?;
        set("gravity", &mut cfg.aerial.gravity)?;
        let mut bound_deg = cfg.aerial.displacement_bound.to_degrees();
        set("displacement_bound_deg", &mut bound_deg)?;
        cfg.aerial.displacement_bound = bound_deg.to_radians();
        set("obstacle_height", &mut cfg.aerial.obstacle_height)?;
        set("ceiling", &mut cfg.aerial.ceiling)?;
        set("floor", &mut cfg.aerial.floor)?;
        cfg.indoor.validate()?;
        cfg.aerial.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}
