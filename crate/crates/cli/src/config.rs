//! Run configuration: a TOML document checked against a fixed key schema.
//!
//! Parsing is fail-closed. Unknown keys, type mismatches and invariant
//! violations are errors naming the offending key.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};
use wkg_core::diagnostics::{DiagnosticsConfig, MAX_ORDER_CAP, MIN_FIT_TIME, SOBOLEV_ORDER};
use wkg_core::fields::{Bump, Component, CouplingTensors, InitialDataSpec, NullStructure, Profile, RandomBumps, Target};
use wkg_core::grid::make_grid;

/// Environment variable that replaces `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "WKG_OUTPUT_DIR";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown key \"{key}\"{}", suggestion.as_ref().map(|s| format!(" (did you mean \"{s}\"?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("missing required key \"{0}\"")]
    Missing(String),
    #[error("key \"{key}\": expected {expected}, found {found}")]
    Type { key: String, expected: &'static str, found: &'static str },
    #[error("key \"{key}\": {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    /// The configuration key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Syntax(_) => None,
            Self::UnknownKey { key, .. } | Self::Type { key, .. } | Self::Invalid { key, .. } => Some(key),
            Self::Missing(key) => Some(key),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    Integer,
    Float,
    Bool,
    String,
    FloatPair,
    FloatMatrix3,
    StringList,
    Table,
    TableList,
}

impl ValueKind {
    fn name(self) -> &'static str {
        match self {
            Self::Integer => "integer",
            Self::Float => "float",
            Self::Bool => "boolean",
            Self::String => "string",
            Self::FloatPair => "array of 2 floats",
            Self::FloatMatrix3 => "3x3 array of floats",
            Self::StringList => "array of strings",
            Self::Table => "table",
            Self::TableList => "array of tables",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KeySpec {
    pub key: &'static str,
    pub kind: ValueKind,
    pub required: bool,
    pub default: Option<&'static str>,
    pub description: &'static str,
}

const fn req(key: &'static str, kind: ValueKind, description: &'static str) -> KeySpec {
    KeySpec { key, kind, required: true, default: None, description }
}

const fn opt(key: &'static str, kind: ValueKind, default: Option<&'static str>, description: &'static str) -> KeySpec {
    KeySpec { key, kind, required: false, default, description }
}

use ValueKind as K;

/// Every accepted key. Entries of `initial_data.bumps` use the `[]` suffix.
pub const SCHEMA: &[KeySpec] = &[
    opt("seed", K::Integer, Some("0"), "seed for randomized initial data"),
    req("grid", K::Table, "spatial grid"),
    req("grid.n", K::Integer, "nodes per axis; even, at least 8"),
    req("grid.L", K::Float, "half length: the domain is [-L, L)^2"),
    req("time", K::Table, "time stepping"),
    opt("time.dt", K::Float, Some("half the grid spacing, L / n"), "step size, > 0"),
    req("time.T", K::Float, "run length, > 0 and a multiple of record_every"),
    req("time.record_every", K::Float, "time between records; a multiple of dt"),
    opt("time.checkpoint_every", K::Float, None, "time between checkpoints; a multiple of dt"),
    opt("couplings", K::Table, None, "coefficients of the quadratic forms"),
    opt("couplings.c1", K::Float, Some("0"), "Q0 coefficient in the wave equation"),
    opt("couplings.c2", K::Float, Some("0"), "Q0 coefficient in the Klein-Gordon equation"),
    opt("couplings.c1ab", K::FloatMatrix3, Some("zeros"), "Q_ab coefficients in the wave equation"),
    opt("couplings.c2ab", K::FloatMatrix3, Some("zeros"), "Q_ab coefficients in the Klein-Gordon equation"),
    opt("couplings.null_structure", K::String, Some("standard"), "standard | broken-time-product"),
    opt("initial_data", K::Table, None, "initial data at t = 0"),
    opt("initial_data.epsilon", K::Float, Some("1"), "multiplies every amplitude"),
    opt("initial_data.bumps", K::TableList, Some("[]"), "explicit bumps"),
    req("initial_data.bumps[].kind", K::String, "gaussian | modulated-gaussian"),
    req("initial_data.bumps[].target", K::String, "w | v"),
    opt("initial_data.bumps[].component", K::String, Some("value"), "value | velocity"),
    req("initial_data.bumps[].amplitude", K::Float, "peak amplitude before epsilon scaling"),
    opt("initial_data.bumps[].center", K::FloatPair, Some("[0, 0]"), "center"),
    req("initial_data.bumps[].width", K::Float, "Gaussian width: exp(-|x-c|^2 / width^2)"),
    opt("initial_data.bumps[].wavevector", K::FloatPair, None, "carrier wavevector, modulated-gaussian only"),
    opt("initial_data.bumps[].phase", K::Float, Some("0"), "carrier phase, modulated-gaussian only"),
    opt("initial_data.random", K::Table, None, "seeded random Gaussian bumps"),
    req("initial_data.random.count", K::Integer, "number of bumps"),
    req("initial_data.random.amplitude", K::Float, "amplitudes drawn from [-amplitude, amplitude]"),
    req("initial_data.random.width", K::Float, "width of every bump"),
    req("initial_data.random.spread", K::Float, "centers drawn from the disk of this radius"),
    opt("diagnostics", K::Table, None, "recorded observables"),
    opt("diagnostics.order_cap", K::Integer, Some("2"), "largest vector-field word length, at most 3"),
    opt("diagnostics.delta", K::Float, Some("0.05"), "bootstrap growth exponent"),
    opt("diagnostics.delta0", K::Float, Some("0.1"), "ghost-weight time exponent"),
    opt("diagnostics.decay_window", K::FloatPair, Some("[10, 80]"), "fit window [t_min, t_max], t_min >= 5"),
    opt("diagnostics.enable_sobolev", K::Bool, Some("false"), "record global Sobolev ratios; needs order_cap 3"),
    opt("diagnostics.enable_decomposition", K::Bool, Some("true"), "record decomposition and reconstruction residuals"),
    opt("diagnostics.track_excess_energy", K::Bool, Some("false"), "record top-order energy of w minus its free evolution"),
    opt("output", K::Table, None, "artifacts"),
    opt("output.directory", K::String, Some("output"), "output directory; overridden by WKG_OUTPUT_DIR"),
    opt("output.formats", K::StringList, Some("[\"csv\", \"json\", \"svg\"]"), "subset of csv, json, svg"),
];

fn spec_for(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

fn suggest(key: &str) -> Option<String> {
    SCHEMA
        .iter()
        .filter(|s| !matches!(s.kind, K::Table | K::TableList))
        .map(|s| (strsim::normalized_damerau_levenshtein(key, s.key), s.key))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k.to_string())
}

/// `a[3].b` becomes `a[].b`.
fn strip_indices(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut in_index = false;
    for c in key.chars() {
        match c {
            '[' => {
                in_index = true;
                out.push(c);
            }
            ']' => {
                in_index = false;
                out.push(c);
            }
            _ if in_index => {}
            _ => out.push(c),
        }
    }
    out
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn float_array(v: &Value, len: usize) -> Option<Vec<f64>> {
    let a = v.as_array()?;
    (a.len() == len).then(|| a.iter().map(as_float).collect::<Option<Vec<_>>>())?
}

fn matches_kind(v: &Value, kind: ValueKind) -> bool {
    match kind {
        K::Integer => v.is_integer(),
        K::Float => as_float(v).is_some(),
        K::Bool => v.is_bool(),
        K::String => v.is_str(),
        K::FloatPair => float_array(v, 2).is_some(),
        K::FloatMatrix3 => v
            .as_array()
            .is_some_and(|rows| rows.len() == 3 && rows.iter().all(|r| float_array(r, 3).is_some())),
        K::StringList => v.as_array().is_some_and(|a| a.iter().all(Value::is_str)),
        K::Table => v.is_table(),
        K::TableList => v.as_array().is_some_and(|a| a.iter().all(Value::is_table)),
    }
}

fn first_leaf(prefix: &str, v: &Value) -> String {
    match v {
        Value::Table(t) => match t.iter().next() {
            Some((k, inner)) => first_leaf(&format!("{prefix}.{k}"), inner),
            None => prefix.to_string(),
        },
        _ => prefix.to_string(),
    }
}

/// Checks keys and types of `table`. `schema_prefix` uses `[]` for list
/// entries, `shown_prefix` their indices.
fn check_table(table: &Table, schema_prefix: &str, shown_prefix: &str) -> Result<()> {
    let join = |p: &str, k: &str| if p.is_empty() { k.to_string() } else { format!("{p}.{k}") };
    for (k, v) in table {
        let skey = join(schema_prefix, k);
        let shown = join(shown_prefix, k);
        let Some(spec) = spec_for(&skey) else {
            let leaf = first_leaf(&shown, v);
            let suggestion = suggest(&strip_indices(&leaf));
            return Err(ConfigError::UnknownKey { key: leaf, suggestion });
        };
        if !matches_kind(v, spec.kind) {
            return Err(ConfigError::Type { key: shown, expected: spec.kind.name(), found: type_name(v) });
        }
        match (spec.kind, v) {
            (K::Table, Value::Table(t)) => check_table(t, &skey, &shown)?,
            (K::TableList, Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    if let Value::Table(t) = item {
                        check_table(t, &format!("{skey}[]"), &format!("{shown}[{i}]"))?;
                    }
                }
            }
            _ => {}
        }
    }
    // Required keys directly below this level.
    for spec in SCHEMA.iter().filter(|s| s.required) {
        let parent = spec.key.rsplit_once('.').map_or("", |p| p.0);
        if parent == schema_prefix {
            let name = spec.key.rsplit('.').next().unwrap_or(spec.key);
            if !table.contains_key(name) {
                return Err(ConfigError::Missing(join(shown_prefix, name)));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub record_every: f64,
    pub checkpoint_every: Option<f64>,
}

impl TimeConfig {
    pub fn steps_per_record(&self) -> u64 {
        (self.record_every / self.dt).round() as u64
    }

    pub fn steps_per_checkpoint(&self) -> Option<u64> {
        self.checkpoint_every.map(|c| (c / self.dt).round() as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub couplings: CouplingTensors,
    pub initial_data: InitialDataSpec,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

struct Doc<'a>(&'a Table);

impl Doc<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        let mut cur = self.0;
        let mut parts = key.split('.').peekable();
        while let Some(p) = parts.next() {
            let v = cur.get(p)?;
            if parts.peek().is_none() {
                return Some(v);
            }
            cur = v.as_table()?;
        }
        None
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

fn get_f64(t: &Table, key: &str, default: Option<f64>, shown: &str) -> Result<f64> {
    match Doc(t).get(key) {
        Some(v) => {
            let x = as_float(v).expect("type checked");
            if !x.is_finite() {
                return Err(invalid(shown, format!("must be finite, got {x}")));
            }
            Ok(x)
        }
        None => default.ok_or_else(|| ConfigError::Missing(shown.to_string())),
    }
}

fn positive(x: f64, key: &str) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(key, format!("must be positive, got {x}")))
    }
}

fn non_negative_int(t: &Table, key: &str, default: i64) -> Result<u64> {
    let i = Doc(t).get(key).and_then(Value::as_integer).unwrap_or(default);
    u64::try_from(i).map_err(|_| invalid(key, format!("must be non-negative, got {i}")))
}

fn pair(v: &Value) -> [f64; 2] {
    let a = float_array(v, 2).expect("type checked");
    [a[0], a[1]]
}

fn matrix(v: Option<&Value>) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    if let Some(rows) = v.and_then(Value::as_array) {
        for (i, r) in rows.iter().enumerate() {
            let r = float_array(r, 3).expect("type checked");
            m[i] = [r[0], r[1], r[2]];
        }
    }
    m
}

/// True when `x` is a whole multiple of `unit` up to round-off.
fn is_multiple(x: f64, unit: f64) -> bool {
    let q = x / unit;
    (q - q.round()).abs() <= 1e-9 * q.abs().max(1.0)
}

fn parse_bump(t: &Table, shown: &str) -> Result<Bump> {
    let s = |k: &str| t.get(k).and_then(Value::as_str);
    let key = |k: &str| format!("{shown}.{k}");
    let target = match s("target") {
        Some("w") => Target::W,
        Some("v") => Target::V,
        other => return Err(invalid(&key("target"), format!("expected \"w\" or \"v\", got {other:?}"))),
    };
    let component = match s("component").unwrap_or("value") {
        "value" => Component::Value,
        "velocity" => Component::Velocity,
        other => return Err(invalid(&key("component"), format!("expected \"value\" or \"velocity\", got \"{other}\""))),
    };
    let profile = match s("kind") {
        Some("gaussian") => {
            for k in ["wavevector", "phase"] {
                if t.contains_key(k) {
                    return Err(invalid(&key(k), "only allowed for kind = \"modulated-gaussian\""));
                }
            }
            Profile::Gaussian
        }
        Some("modulated-gaussian") => Profile::ModulatedGaussian {
            wavevector: pair(t.get("wavevector").ok_or_else(|| ConfigError::Missing(key("wavevector")))?),
            phase: get_f64(t, "phase", Some(0.0), &key("phase"))?,
        },
        other => {
            return Err(invalid(&key("kind"), format!("expected \"gaussian\" or \"modulated-gaussian\", got {other:?}")))
        }
    };
    Ok(Bump {
        profile,
        target,
        component,
        amplitude: get_f64(t, "amplitude", None, &key("amplitude"))?,
        center: t.get("center").map(pair).unwrap_or([0.0, 0.0]),
        width: positive(get_f64(t, "width", None, &key("width"))?, &key("width"))?,
    })
}

impl RunConfig {
    /// Parses and validates a TOML document. The output-directory environment
    /// override is not applied here; see [`RunConfig::apply_env`].
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
        check_table(&table, "", "")?;
        let doc = Doc(&table);
        let f = |key: &str, default: Option<f64>| get_f64(&table, key, default, key);

        let n_raw = doc.get("grid.n").and_then(Value::as_integer).expect("required");
        let n = usize::try_from(n_raw).map_err(|_| invalid("grid.n", format!("must be positive, got {n_raw}")))?;
        let half_length = positive(f("grid.L", None)?, "grid.L")?;
        make_grid(n, half_length).map_err(|e| invalid(if n % 2 != 0 || n < 8 { "grid.n" } else { "grid.L" }, e.to_string()))?;

        let dt = positive(f("time.dt", Some(half_length / n as f64))?, "time.dt")?;
        let t_final = positive(f("time.T", None)?, "time.T")?;
        let record_every = positive(f("time.record_every", None)?, "time.record_every")?;
        if !is_multiple(record_every, dt) {
            return Err(invalid("time.record_every", format!("{record_every} is not a multiple of time.dt = {dt}")));
        }
        if !is_multiple(t_final, record_every) {
            return Err(invalid("time.T", format!("{t_final} is not a multiple of time.record_every = {record_every}")));
        }
        let checkpoint_every = match doc.get("time.checkpoint_every") {
            None => None,
            Some(_) => {
                let c = positive(f("time.checkpoint_every", None)?, "time.checkpoint_every")?;
                if !is_multiple(c, dt) {
                    return Err(invalid("time.checkpoint_every", format!("{c} is not a multiple of time.dt = {dt}")));
                }
                Some(c)
            }
        };

        let null_structure = match doc.get("couplings.null_structure").and_then(Value::as_str).unwrap_or("standard") {
            "standard" => NullStructure::Standard,
            "broken-time-product" => NullStructure::BrokenTimeProduct,
            other => {
                return Err(invalid(
                    "couplings.null_structure",
                    format!("expected \"standard\" or \"broken-time-product\", got \"{other}\""),
                ))
            }
        };
        let couplings = CouplingTensors {
            c1: f("couplings.c1", Some(0.0))?,
            c2: f("couplings.c2", Some(0.0))?,
            c1ab: matrix(doc.get("couplings.c1ab")),
            c2ab: matrix(doc.get("couplings.c2ab")),
            null_structure,
        };
        if couplings.c1ab.iter().chain(&couplings.c2ab).flatten().any(|x| !x.is_finite()) {
            return Err(invalid("couplings", "entries must be finite"));
        }

        let seed = non_negative_int(&table, "seed", 0)?;
        let epsilon = f("initial_data.epsilon", Some(1.0))?;
        let mut bumps = Vec::new();
        if let Some(items) = doc.get("initial_data.bumps").and_then(Value::as_array) {
            for (i, item) in items.iter().enumerate() {
                bumps.push(parse_bump(item.as_table().expect("type checked"), &format!("initial_data.bumps[{i}]"))?);
            }
        }
        let random = match doc.get("initial_data.random").and_then(Value::as_table) {
            None => None,
            Some(r) => {
                let k = |s: &str| format!("initial_data.random.{s}");
                Some(RandomBumps {
                    count: non_negative_int(r, "count", 0).map_err(|_| invalid(&k("count"), "must be non-negative"))? as usize,
                    amplitude: get_f64(r, "amplitude", None, &k("amplitude"))?,
                    width: positive(get_f64(r, "width", None, &k("width"))?, &k("width"))?,
                    spread: get_f64(r, "spread", None, &k("spread"))?,
                })
            }
        };
        let initial_data = InitialDataSpec { bumps, random, seed }.scaled(epsilon);

        let defaults = DiagnosticsConfig::default();
        let order_cap = non_negative_int(&table, "diagnostics.order_cap", defaults.order_cap as i64)? as usize;
        if order_cap > MAX_ORDER_CAP {
            return Err(invalid("diagnostics.order_cap", format!("{order_cap} exceeds the maximum {MAX_ORDER_CAP}")));
        }
        let flag = |key: &str, default: bool| doc.get(key).and_then(Value::as_bool).unwrap_or(default);
        let diagnostics = DiagnosticsConfig {
            order_cap,
            delta: positive(f("diagnostics.delta", Some(defaults.delta))?, "diagnostics.delta")?,
            delta0: positive(f("diagnostics.delta0", Some(defaults.delta0))?, "diagnostics.delta0")?,
            decay_window: doc.get("diagnostics.decay_window").map(pair).unwrap_or(defaults.decay_window),
            enable_sobolev: flag("diagnostics.enable_sobolev", defaults.enable_sobolev),
            enable_decomposition: flag("diagnostics.enable_decomposition", defaults.enable_decomposition),
            track_excess_energy: flag("diagnostics.track_excess_energy", defaults.track_excess_energy),
        };
        if diagnostics.enable_sobolev && order_cap < SOBOLEV_ORDER {
            return Err(invalid(
                "diagnostics.enable_sobolev",
                format!("requires diagnostics.order_cap >= {SOBOLEV_ORDER}, got {order_cap}"),
            ));
        }
        let [a, b] = diagnostics.decay_window;
        if !(a >= MIN_FIT_TIME && b > a) {
            return Err(invalid("diagnostics.decay_window", format!("need {MIN_FIT_TIME} <= t_min < t_max, got [{a}, {b}]")));
        }

        let directory = PathBuf::from(doc.get("output.directory").and_then(Value::as_str).unwrap_or("output"));
        let formats = match doc.get("output.formats").and_then(Value::as_array) {
            None => vec![Format::Csv, Format::Json, Format::Svg],
            Some(items) => items
                .iter()
                .map(|v| match v.as_str() {
                    Some("csv") => Ok(Format::Csv),
                    Some("json") => Ok(Format::Json),
                    Some("svg") => Ok(Format::Svg),
                    other => Err(invalid("output.formats", format!("unknown format {other:?}"))),
                })
                .collect::<Result<_>>()?,
        };

        Ok(Self {
            seed,
            grid: GridConfig { n, half_length },
            time: TimeConfig { dt, t_final, record_every, checkpoint_every },
            couplings,
            initial_data,
            diagnostics,
            output: OutputConfig { directory, formats },
        })
    }

    /// Replaces the output directory from the environment when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output.directory = PathBuf::from(dir);
        }
    }
}
