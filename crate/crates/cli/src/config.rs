//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Values given with `--set` replace
//! values from the file, and `--seed` replaces both.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use hawkes_core::experiments::{ExperimentConfig, GraphPolicy, DEFAULT_TARGET_COUNT};
use hawkes_core::simulator::DEFAULT_EVENT_CAP;
use hawkes_core::{GraphMode, Kernel};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "N",
    "K",
    "p",
    "mu",
    "kernel.type",
    "kernel.a",
    "kernel.b",
    "mode",
    "T",
    "q",
    "replicas",
    "seed",
    "event_cap",
    "graph",
    "target",
    "replica",
    "events",
    "limits.graphs",
    "sweep.deltas",
    "toy.gamma",
    "toy.N",
    "toy.m_t",
    "toy.replicas",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub mu: f64,
    pub kernel_a: f64,
    pub kernel_b: f64,
    pub mode: GraphMode,
    /// `None` until resolved by the horizon search.
    pub horizon: Option<f64>,
    pub q: f64,
    pub replicas: usize,
    pub seed: u64,
    pub event_cap: usize,
    pub graph: GraphPolicy,
    pub target: f64,
    pub replica: u64,
    pub events: Option<String>,
    pub limit_graphs: usize,
    pub sweep_deltas: Vec<f64>,
    pub toy_gamma: f64,
    pub toy_n: usize,
    pub toy_m_t: f64,
    pub toy_replicas: usize,
}

/// Raw assignments before typing, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignments(BTreeMap<String, String>);

impl Assignments {
    pub fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_assignment(line)
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", number + 1)))?;
            map.insert(key, value);
        }
        let a = Assignments(map);
        a.check_keys()?;
        Ok(a)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    /// Applies `key=value` overrides.
    pub fn apply<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), CliError> {
        for o in overrides {
            let (key, value) = split_assignment(o.as_ref())
                .ok_or_else(|| CliError::Config(format!("--set {}: expected key=value", o.as_ref())))?;
            self.0.insert(key, value);
        }
        self.check_keys()
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.0.insert(key.to_string(), value);
    }

    fn check_keys(&self) -> Result<(), CliError> {
        match self.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!("{k}: unknown key"))),
            None => Ok(()),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key}: cannot parse {v:?}: {e}")))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("{key}: required key is missing")))
    }

    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let n: usize = self.required("N")?;
        let kernel_type: String = self.get("kernel.type")?.unwrap_or_else(|| "exp".into());
        if kernel_type != "exp" {
            return Err(CliError::Config(format!(
                "kernel.type: only \"exp\" is supported, got {kernel_type:?}"
            )));
        }
        let graph = match self.get::<String>("graph")?.as_deref() {
            None | Some("resample") => GraphPolicy::Resample,
            Some("fixed") => GraphPolicy::Fixed,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "graph: expected resample or fixed, got {other:?}"
                )))
            }
        };
        let sweep_deltas = match self.0.get("sweep.deltas") {
            None => (1..=15).map(f64::from).collect(),
            Some(list) => list
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        CliError::Config(format!("sweep.deltas: cannot parse {s:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let cfg = RunConfig {
            n,
            k: self.get("K")?.unwrap_or(n),
            p: self.required("p")?,
            mu: self.get("mu")?.unwrap_or(1.0),
            kernel_a: self.get("kernel.a")?.unwrap_or(2.0),
            kernel_b: self.get("kernel.b")?.unwrap_or(1.0),
            mode: self.get("mode")?.unwrap_or(GraphMode::Independent),
            horizon: self.get("T")?,
            q: self.get("q")?.unwrap_or(12.0),
            replicas: self.get("replicas")?.unwrap_or(100),
            seed: self.get("seed")?.unwrap_or(0),
            event_cap: self.get("event_cap")?.unwrap_or(DEFAULT_EVENT_CAP),
            graph,
            target: self.get("target")?.unwrap_or(DEFAULT_TARGET_COUNT),
            replica: self.get("replica")?.unwrap_or(0),
            events: self.get("events")?,
            limit_graphs: self.get("limits.graphs")?.unwrap_or(1000),
            sweep_deltas,
            toy_gamma: self.get("toy.gamma")?.unwrap_or(1.0),
            toy_n: self.get("toy.N")?.unwrap_or(n),
            toy_m_t: self.get("toy.m_t")?.unwrap_or(100.0),
            toy_replicas: self.get("toy.replicas")?.unwrap_or(10_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn split_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then(|| (k.to_string(), v.to_string()))
}

fn invalid(key: &str, msg: String) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(invalid("N", "must be at least 1".into()));
        }
        if self.k == 0 || self.k > self.n {
            return Err(invalid("K", format!("must lie in 1..={} (N), got {}", self.n, self.k)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.kernel_a > 0.0 && self.kernel_a.is_finite()) {
            return Err(invalid("kernel.a", format!("must be positive, got {}", self.kernel_a)));
        }
        if !(self.kernel_b > 0.0 && self.kernel_b.is_finite()) {
            return Err(invalid("kernel.b", format!("must be positive, got {}", self.kernel_b)));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("T", format!("must be positive, got {t}")));
            }
        }
        if !(self.q > 3.0) {
            return Err(invalid("q", format!("must exceed 3, got {}", self.q)));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1".into()));
        }
        if self.event_cap == 0 {
            return Err(invalid("event_cap", "must be at least 1".into()));
        }
        if !(self.target > 0.0) {
            return Err(invalid("target", format!("must be positive, got {}", self.target)));
        }
        if self.limit_graphs == 0 {
            return Err(invalid("limits.graphs", "must be at least 1".into()));
        }
        if self.sweep_deltas.is_empty() || self.sweep_deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(invalid("sweep.deltas", "must be a non-empty list of positive values".into()));
        }
        if !(self.toy_gamma > 0.0) {
            return Err(invalid("toy.gamma", format!("must be positive, got {}", self.toy_gamma)));
        }
        if self.toy_n == 0 {
            return Err(invalid("toy.N", "must be at least 1".into()));
        }
        if !(self.toy_m_t > 0.0) {
            return Err(invalid("toy.m_t", format!("must be positive, got {}", self.toy_m_t)));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::exponential(self.kernel_a, self.kernel_b).expect("validated kernel parameters")
    }

    /// Experiment configuration; `horizon` must already be resolved.
    pub fn experiment(&self, horizon: f64) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            k: self.k,
            p: self.p,
            mu: self.mu,
            kernel: self.kernel(),
            mode: self.mode,
            horizon,
            q: self.q,
            seed: self.seed,
            graph_policy: self.graph,
            event_cap: self.event_cap,
        }
    }

    /// Resolved configuration echo, one `key=value` per line in `KEYS` order.
    pub fn echo(&self, horizon: Option<f64>) -> Vec<(String, String)> {
        let fmt = crate::output::format_f64;
        let deltas: Vec<String> = self.sweep_deltas.iter().map(|d| fmt(*d)).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("N", self.n.to_string()),
            ("K", self.k.to_string()),
            ("p", fmt(self.p)),
            ("mu", fmt(self.mu)),
            ("kernel.type", "exp".into()),
            ("kernel.a", fmt(self.kernel_a)),
            ("kernel.b", fmt(self.kernel_b)),
            ("mode", self.mode.to_string()),
            ("T", horizon.or(self.horizon).map(fmt).unwrap_or_default()),
            ("q", fmt(self.q)),
            ("replicas", self.replicas.to_string()),
            ("seed", self.seed.to_string()),
            ("event_cap", self.event_cap.to_string()),
            (
                "graph",
                match self.graph {
                    GraphPolicy::Resample => "resample".into(),
                    GraphPolicy::Fixed => "fixed".into(),
                },
            ),
            ("target", fmt(self.target)),
            ("replica", self.replica.to_string()),
            ("events", self.events.clone().unwrap_or_default()),
            ("limits.graphs", self.limit_graphs.to_string()),
            ("sweep.deltas", deltas.join(",")),
            ("toy.gamma", fmt(self.toy_gamma)),
            ("toy.N", self.toy_n.to_string()),
            ("toy.m_t", fmt(self.toy_m_t)),
            ("toy.replicas", self.toy_replicas.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = Assignments::parse_text("N = 250\np = 0.35\n").unwrap().into_config().unwrap();
        assert_eq!(cfg.q, 12.0);
        assert_eq!(cfg.k, 250);
        assert_eq!(cfg.mu, 1.0);
        assert_eq!((cfg.kernel_a, cfg.kernel_b), (2.0, 1.0));
        assert_eq!(cfg.mode, GraphMode::Independent);
        assert_eq!(cfg.replicas, 100);
        assert_eq!(cfg.horizon, None);
    }

    #[test]
    fn k_above_n_names_k() {
        let err = Assignments::parse_text("N=250\np=0.35\nK=500").unwrap().into_config().unwrap_err();
        assert!(err.to_string().starts_with("K:"), "{err}");
    }

    #[test]
    fn errors_name_the_key() {
        let unknown = Assignments::parse_text("N=3\np=0.5\nlambda=2").unwrap_err();
        assert!(unknown.to_string().starts_with("lambda:"), "{unknown}");
        let bad = Assignments::parse_text("N=3\np=abc").unwrap().into_config().unwrap_err();
        assert!(bad.to_string().starts_with("p:"), "{bad}");
        let missing = Assignments::parse_text("p=0.5").unwrap().into_config().unwrap_err();
        assert!(missing.to_string().starts_with("N:"), "{missing}");
        let q = Assignments::parse_text("N=3\np=0.5\nq=3").unwrap().into_config().unwrap_err();
        assert!(q.to_string().starts_with("q:"), "{q}");
        let kt = Assignments::parse_text("N=3\np=0.5\nkernel.type=power").unwrap().into_config().unwrap_err();
        assert!(kt.to_string().starts_with("kernel.type:"), "{kt}");
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut a = Assignments::parse_text("N=10 # comment\np=0.5\nseed=3\n\n").unwrap();
        a.apply(&["seed=7", "mode = symmetric"]).unwrap();
        let cfg = a.into_config().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.mode, GraphMode::Symmetric);
    }

    #[test]
    fn malformed_line_is_reported() {
        assert!(Assignments::parse_text("N 10").is_err());
    }
}
