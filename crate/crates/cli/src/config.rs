//! Pipeline configuration: defaults, then a `key = value` file with
//! `[section]` headers, then command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub graph: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionSettings {
    pub theta: f64,
    pub sparse_sample_ratio: f64,
    pub mask_fraction: f64,
    pub mask_token: f64,
    /// Switches node selection to the convergence-bound threshold rule.
    pub epsilon: Option<f64>,
    /// Hop count for the threshold rule; defaults to the propagation depth.
    pub k: Option<usize>,
    /// Decay-rate override for the threshold rule on large graphs.
    pub lambda2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingSettings {
    pub c_norm: f64,
    pub use_eigen: bool,
    pub power_tol: f64,
    pub power_max: usize,
    pub k_order: usize,
    pub cluster_variant: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationSettings {
    pub k: usize,
    pub scheme: String,
    pub beta: f64,
    pub omega: f64,
    pub rho: f64,
    pub mode: String,
    pub depths: Option<PathBuf>,
    pub fixed_r: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSettings {
    pub k: Option<usize>,
    pub dense: bool,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSettings {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub degree_threshold: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub seed: u64,
    pub symmetrize: bool,
    pub skip_correction: bool,
    pub run_analysis: bool,
    pub run_probe: bool,
    pub correction: CorrectionSettings,
    pub encoding: EncodingSettings,
    pub propagation: PropagationSettings,
    pub analysis: AnalysisSettings,
    pub probe: ProbeSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths {
                graph: None,
                features: None,
                labels: None,
                split: None,
                out: PathBuf::from("atp-out"),
            },
            seed: 0,
            symmetrize: false,
            skip_correction: false,
            run_analysis: true,
            run_probe: true,
            correction: CorrectionSettings {
                theta: 0.10,
                sparse_sample_ratio: 0.2,
                mask_fraction: 0.5,
                mask_token: 0.0,
                epsilon: None,
                k: None,
                lambda2: None,
            },
            encoding: EncodingSettings {
                c_norm: 0.3,
                use_eigen: true,
                power_tol: 1e-10,
                power_max: 10_000,
                k_order: 1,
                cluster_variant: "literal".into(),
            },
            propagation: PropagationSettings {
                k: 3,
                scheme: "s2gc".into(),
                beta: 0.15,
                omega: 1.0,
                rho: 1.0,
                mode: "sum".into(),
                depths: None,
                fixed_r: None,
            },
            analysis: AnalysisSettings {
                k: None,
                dense: false,
                method: "power".into(),
            },
            probe: ProbeSettings {
                lr: 0.1,
                epochs: 300,
                l2: 1e-4,
                degree_threshold: 3,
                train_fraction: 0.3,
                val_fraction: 0.2,
            },
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::input("config", format!("{key} = {value:?}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> CliResult<T> {
    v.parse().map_err(|_| bad(key, v, what))
}

fn flag(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "a boolean")),
    }
}

fn opt_num<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> CliResult<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        num(key, v, what).map(Some)
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl PipelineConfig {
    /// Sets `section.key`; unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> CliResult<()> {
        let v = v.trim();
        let real = "a number";
        let count = "a non-negative integer";
        match key {
            "paths.graph" => self.paths.graph = opt_path(v),
            "paths.features" => self.paths.features = opt_path(v),
            "paths.labels" => self.paths.labels = opt_path(v),
            "paths.split" => self.paths.split = opt_path(v),
            "paths.out" => self.paths.out = PathBuf::from(v),
            "pipeline.seed" => self.seed = num(key, v, count)?,
            "pipeline.symmetrize" => self.symmetrize = flag(key, v)?,
            "pipeline.skip_correction" => self.skip_correction = flag(key, v)?,
            "pipeline.analyze" => self.run_analysis = flag(key, v)?,
            "pipeline.probe" => self.run_probe = flag(key, v)?,
            "correction.theta" => self.correction.theta = num(key, v, real)?,
            "correction.sparse_sample_ratio" => self.correction.sparse_sample_ratio = num(key, v, real)?,
            "correction.mask_fraction" => self.correction.mask_fraction = num(key, v, real)?,
            "correction.mask_token" => self.correction.mask_token = num(key, v, real)?,
            "correction.epsilon" => self.correction.epsilon = opt_num(key, v, real)?,
            "correction.k" => self.correction.k = opt_num(key, v, count)?,
            "correction.lambda2" => self.correction.lambda2 = opt_num(key, v, real)?,
            "encoding.c_norm" => self.encoding.c_norm = num(key, v, real)?,
            "encoding.use_eigen" => self.encoding.use_eigen = flag(key, v)?,
            "encoding.power_tol" => self.encoding.power_tol = num(key, v, real)?,
            "encoding.power_max" => self.encoding.power_max = num(key, v, count)?,
            "encoding.k_order" => self.encoding.k_order = num(key, v, count)?,
            "encoding.cluster_variant" => match v {
                "literal" | "standard" => self.encoding.cluster_variant = v.into(),
                _ => return Err(bad(key, v, "literal or standard")),
            },
            "propagation.k" => self.propagation.k = num(key, v, count)?,
            "propagation.scheme" => match v {
                "sgc" | "s2gc" | "gbp" | "heat" | "concat" => self.propagation.scheme = v.into(),
                _ => return Err(bad(key, v, "sgc, s2gc, gbp, heat or concat")),
            },
            "propagation.beta" => self.propagation.beta = num(key, v, real)?,
            "propagation.omega" => self.propagation.omega = num(key, v, real)?,
            "propagation.rho" => self.propagation.rho = num(key, v, real)?,
            "propagation.mode" => match v {
                "sum" | "concat" => self.propagation.mode = v.into(),
                _ => return Err(bad(key, v, "sum or concat")),
            },
            "propagation.depths" => self.propagation.depths = opt_path(v),
            "propagation.fixed_r" => self.propagation.fixed_r = opt_num(key, v, real)?,
            "analysis.k" => self.analysis.k = opt_num(key, v, count)?,
            "analysis.dense" => self.analysis.dense = flag(key, v)?,
            "analysis.method" => match v {
                "power" | "dense" => self.analysis.method = v.into(),
                _ => return Err(bad(key, v, "power or dense")),
            },
            "probe.lr" => self.probe.lr = num(key, v, real)?,
            "probe.epochs" => self.probe.epochs = num(key, v, count)?,
            "probe.l2" => self.probe.l2 = num(key, v, real)?,
            "probe.degree_threshold" => self.probe.degree_threshold = num(key, v, count)?,
            "probe.train_fraction" => self.probe.train_fraction = num(key, v, real)?,
            "probe.val_fraction" => self.probe.val_fraction = num(key, v, real)?,
            _ => return Err(CliError::input("config", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file. Keys outside a section belong to `pipeline`;
    /// relative paths resolve against the file's directory.
    pub fn apply_text(&mut self, text: &str, base: Option<&Path>) -> CliResult<()> {
        let mut section = String::from("pipeline");
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::input("config", format!("line {}: expected key = value", i + 1)));
            };
            let key = format!("{section}.{}", k.trim());
            let mut value = v.trim().trim_matches('"').to_string();
            if let Some(base) = base {
                let is_path = key.starts_with("paths.") || key == "propagation.depths";
                if is_path && !value.is_empty() && Path::new(&value).is_relative() {
                    value = base.join(&value).to_string_lossy().into_owned();
                }
            }
            self.set(&key, &value)
                .map_err(|e| CliError::input("config", format!("line {}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path.parent())?;
        Ok(cfg)
    }

    pub fn correction_k(&self) -> usize {
        self.correction.k.unwrap_or(self.propagation.k)
    }

    pub fn analysis_k(&self) -> usize {
        self.analysis.k.unwrap_or(self.propagation.k)
    }

    /// Serializes every setting in a form [`apply_text`](Self::apply_text) reads back.
    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| o.as_ref().map_or(String::new(), |p| p.display().to_string());
        let o = |o: Option<f64>| o.map_or(String::new(), |v| v.to_string());
        let u = |o: Option<usize>| o.map_or(String::new(), |v| v.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "[paths]");
        let _ = writeln!(s, "graph = {}", p(&self.paths.graph));
        let _ = writeln!(s, "features = {}", p(&self.paths.features));
        let _ = writeln!(s, "labels = {}", p(&self.paths.labels));
        let _ = writeln!(s, "split = {}", p(&self.paths.split));
        let _ = writeln!(s, "out = {}", self.paths.out.display());
        let _ = writeln!(s, "\n[pipeline]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "symmetrize = {}", self.symmetrize);
        let _ = writeln!(s, "skip_correction = {}", self.skip_correction);
        let _ = writeln!(s, "analyze = {}", self.run_analysis);
        let _ = writeln!(s, "probe = {}", self.run_probe);
        let c = &self.correction;
        let _ = writeln!(s, "\n[correction]");
        let _ = writeln!(s, "theta = {}", c.theta);
        let _ = writeln!(s, "sparse_sample_ratio = {}", c.sparse_sample_ratio);
        let _ = writeln!(s, "mask_fraction = {}", c.mask_fraction);
        let _ = writeln!(s, "mask_token = {}", c.mask_token);
        let _ = writeln!(s, "epsilon = {}", o(c.epsilon));
        let _ = writeln!(s, "k = {}", u(c.k));
        let _ = writeln!(s, "lambda2 = {}", o(c.lambda2));
        let e = &self.encoding;
        let _ = writeln!(s, "\n[encoding]");
        let _ = writeln!(s, "c_norm = {}", e.c_norm);
        let _ = writeln!(s, "use_eigen = {}", e.use_eigen);
        let _ = writeln!(s, "power_tol = {}", e.power_tol);
        let _ = writeln!(s, "power_max = {}", e.power_max);
        let _ = writeln!(s, "k_order = {}", e.k_order);
        let _ = writeln!(s, "cluster_variant = {}", e.cluster_variant);
        let pr = &self.propagation;
        let _ = writeln!(s, "\n[propagation]");
        let _ = writeln!(s, "k = {}", pr.k);
        let _ = writeln!(s, "scheme = {}", pr.scheme);
        let _ = writeln!(s, "beta = {}", pr.beta);
        let _ = writeln!(s, "omega = {}", pr.omega);
        let _ = writeln!(s, "rho = {}", pr.rho);
        let _ = writeln!(s, "mode = {}", pr.mode);
        let _ = writeln!(s, "depths = {}", p(&pr.depths));
        let _ = writeln!(s, "fixed_r = {}", o(pr.fixed_r));
        let a = &self.analysis;
        let _ = writeln!(s, "\n[analysis]");
        let _ = writeln!(s, "k = {}", u(a.k));
        let _ = writeln!(s, "dense = {}", a.dense);
        let _ = writeln!(s, "method = {}", a.method);
        let b = &self.probe;
        let _ = writeln!(s, "\n[probe]");
        let _ = writeln!(s, "lr = {}", b.lr);
        let _ = writeln!(s, "epochs = {}", b.epochs);
        let _ = writeln!(s, "l2 = {}", b.l2);
        let _ = writeln!(s, "degree_threshold = {}", b.degree_threshold);
        let _ = writeln!(s, "train_fraction = {}", b.train_fraction);
        let _ = writeln!(s, "val_fraction = {}", b.val_fraction);
        s
    }
}
