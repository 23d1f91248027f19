//! Sweep specification files.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are
//! comma-separated and integer lists accept inclusive ranges `a..b` or
//! `a..b:step`.
//!
//! ```text
//! model   = sine              # curie_weiss | sine | random_orthogonal
//! betas   = 0.5, 1.0
//! ns      = 7..21:2
//! engine  = auto              # exact | mc | auto (exact up to n = 20)
//! outputs = factorization_gap, h_var
//! ```
//!
//! Optional keys: `seed`, `signs` (`alternating`, `positive` or a list of
//! ±1), `lambdas`, `sweeps`, `burn_in`, `chains`, `thinning`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use orthospin_core::{ModelSpec, SignPattern};

/// Largest size for which `auto` picks exact enumeration.
pub const AUTO_EXACT_MAX: usize = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("line {line}: {field}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub field: String,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exact,
    MC,
    Auto,
}

impl Engine {
    pub fn resolve(self, n: usize) -> Engine {
        match self {
            Engine::Auto if n <= AUTO_EXACT_MAX => Engine::Exact,
            Engine::Auto => Engine::MC,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Output {
    LogZ,
    FreeEnergy,
    HMean,
    HVar,
    TwoPoint,
    FactorizationGap,
    StarredSum2,
    StarredSum3,
    LemmaTerms,
    Subadditivity,
    MgfCheck,
}

impl Output {
    pub const ALL: [Output; 11] = [
        Output::LogZ,
        Output::FreeEnergy,
        Output::HMean,
        Output::HVar,
        Output::TwoPoint,
        Output::FactorizationGap,
        Output::StarredSum2,
        Output::StarredSum3,
        Output::LemmaTerms,
        Output::Subadditivity,
        Output::MgfCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Output::LogZ => "log_z",
            Output::FreeEnergy => "free_energy",
            Output::HMean => "h_mean",
            Output::HVar => "h_var",
            Output::TwoPoint => "two_point",
            Output::FactorizationGap => "factorization_gap",
            Output::StarredSum2 => "starred_sum_2",
            Output::StarredSum3 => "starred_sum_3",
            Output::LemmaTerms => "lemma_terms",
            Output::Subadditivity => "subadditivity",
            Output::MgfCheck => "mgf_check",
        }
    }
}

impl FromStr for Output {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Output::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Output::ALL.iter().map(|o| o.as_str()).collect();
                format!(
                    "unknown output {s:?} (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    /// Measured sweeps per chain, burn-in excluded.
    pub sweeps: u64,
    /// `None` selects the size-dependent default.
    pub burn_in: Option<u64>,
    pub chains: usize,
    pub thinning: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            sweeps: 20_000,
            burn_in: None,
            chains: 4,
            thinning: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub model: ModelSpec,
    pub seed: u64,
    pub betas: Vec<f64>,
    pub ns: Vec<usize>,
    pub engine: Engine,
    pub outputs: BTreeSet<Output>,
    pub lambdas: Vec<f64>,
    pub mc: McSettings,
}

impl SweepSpec {
    pub fn model_name(&self) -> &'static str {
        self.model.kind().as_str()
    }
}

const KEYS: [&str; 12] = [
    "model", "seed", "signs", "betas", "ns", "engine", "outputs", "lambdas", "sweeps", "burn_in",
    "chains", "thinning",
];

pub fn parse(text: &str) -> Result<SweepSpec, ConfigError> {
    let mut seen: Vec<(&str, usize, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |field: &str, msg: String| ConfigError {
            line: line_no,
            field: field.to_string(),
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("syntax", "expected `key = value`".into()))?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(err(
                key,
                format!("unknown key (expected one of {})", KEYS.join(", ")),
            ));
        }
        if let Some(prev) = seen.iter().find(|s| s.0 == key) {
            return Err(err(
                key,
                format!("duplicate key, first set on line {}", prev.1),
            ));
        }
        if value.is_empty() {
            return Err(err(key, "empty value".into()));
        }
        seen.push((key, line_no, value));
    }
    let get = |key: &str| seen.iter().find(|s| s.0 == key).map(|s| (s.1, s.2));
    let required = |key: &str| {
        get(key).ok_or_else(|| ConfigError {
            line: 0,
            field: key.to_string(),
            msg: "required key missing".into(),
        })
    };

    let seed = match get("seed") {
        Some((line, v)) => v
            .parse::<u64>()
            .map_err(|e| wrap("seed", line)(e.to_string()))?,
        None => 1,
    };
    let signs = match get("signs") {
        None | Some((_, "alternating")) => SignPattern::Alternating,
        Some((_, "positive")) => SignPattern::AllPositive,
        Some((line, v)) => SignPattern::Explicit(
            split_list(v)
                .map(|s| match s {
                    "1" | "+1" => Ok(1),
                    "-1" => Ok(-1),
                    other => Err(wrap("signs", line)(format!("expected ±1, got {other:?}"))),
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    let (line, v) = required("model")?;
    let model = match v {
        "curie_weiss" => ModelSpec::CurieWeiss,
        "sine" => ModelSpec::Sine,
        "random_orthogonal" => ModelSpec::RandomOrthogonal {
            seed,
            signs: signs.clone(),
        },
        other => {
            return Err(wrap("model", line)(format!(
                "unknown model {other:?} (expected curie_weiss, sine or random_orthogonal)"
            )))
        }
    };
    if get("signs").is_some() && !matches!(model, ModelSpec::RandomOrthogonal { .. }) {
        let (line, _) = get("signs").unwrap();
        return Err(wrap("signs", line)(
            "only meaningful for random_orthogonal".into(),
        ));
    }

    let (line, v) = required("betas")?;
    let betas = parse_floats(v).map_err(wrap("betas", line))?;
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(wrap("betas", line)(format!(
            "beta must be finite and non-negative, got {b}"
        )));
    }
    let (line, v) = required("ns")?;
    let ns = parse_sizes(v).map_err(wrap("ns", line))?;
    if let Some(n) = ns.iter().find(|&&n| n < 2) {
        return Err(wrap("ns", line)(format!(
            "sizes must be at least 2, got {n}"
        )));
    }
    if let SignPattern::Explicit(s) = &signs {
        if let Some(n) = ns.iter().find(|&&n| n != s.len()) {
            let (line, _) = get("signs").unwrap();
            return Err(wrap("signs", line)(format!(
                "{} signs given but the sweep includes n = {n}",
                s.len()
            )));
        }
    }

    let engine = match get("engine") {
        None | Some((_, "auto")) => Engine::Auto,
        Some((_, "exact")) => Engine::Exact,
        Some((_, "mc")) => Engine::MC,
        Some((line, other)) => {
            return Err(wrap("engine", line)(format!(
                "unknown engine {other:?} (expected exact, mc or auto)"
            )))
        }
    };
    let (line, v) = required("outputs")?;
    let outputs = split_list(v)
        .map(Output::from_str)
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(wrap("outputs", line))?;
    let lambdas = match get("lambdas") {
        Some((line, v)) => parse_floats(v).map_err(wrap("lambdas", line))?,
        None => vec![0.0],
    };

    let mut mc = McSettings::default();
    let int = |key: &'static str| -> Result<Option<u64>, ConfigError> {
        get(key)
            .map(|(line, v)| v.parse::<u64>().map_err(|e| wrap(key, line)(e.to_string())))
            .transpose()
    };
    if let Some(v) = int("sweeps")? {
        mc.sweeps = v;
    }
    mc.burn_in = int("burn_in")?;
    if let Some(v) = int("chains")? {
        mc.chains = v as usize;
    }
    if let Some(v) = int("thinning")? {
        mc.thinning = v;
    }
    Ok(SweepSpec {
        model,
        seed,
        betas,
        ns,
        engine,
        outputs,
        lambdas,
        mc,
    })
}

fn wrap(key: &'static str, line: usize) -> impl Fn(String) -> ConfigError {
    move |msg| ConfigError {
        line,
        field: key.to_string(),
        msg,
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_floats(v: &str) -> Result<Vec<f64>, String> {
    split_list(v)
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect()
}

fn parse_sizes(v: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in split_list(v) {
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("not an integer: {s:?}"))
        };
        match item.split_once("..") {
            None => out.push(int(item)?),
            Some((lo, rest)) => {
                let (hi, step) = match rest.split_once(':') {
                    Some((hi, step)) => (int(hi)?, int(step)?),
                    None => (int(rest)?, 1),
                };
                let lo = int(lo)?;
                if step == 0 || hi < lo {
                    return Err(format!("empty range {item:?}"));
                }
                out.extend((lo..=hi).step_by(step));
            }
        }
    }
    let mut sorted = out.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err("sizes must be distinct".into());
    }
    Ok(out)
}
