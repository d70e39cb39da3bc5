//! Pipeline stages. Each stage reads its inputs from the output directory,
//! checks their manifests and writes its own artifacts with manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use atp_core::correction::{apply_mask, select_nodes_epsilon, MaskParams, MaskPlan};
use atp_core::encoding::{encode, EncodingConfig, KernelCoefficients};
use atp_core::graph::{FeatureMatrix, LabelVector, Symmetry};
use atp_core::io;
use atp_core::probe::{degree_group_report, train_probe, ProbeConfig, SplitSpec};
use atp_core::propagation::{
    propagate, KernelSpec, NodeWiseOperator, OutputMode, PropagatedFeatures, PropagationConfig,
    Scheme,
};
use atp_core::spectral::{convergence_report, verify_bound, EigenMethod};
use atp_core::{Features, Graph};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, ExitKind};
use crate::manifest::{config_hash, read_artifact, sha256_hex, sub_seed, write_artifact};

pub const GRAPH: &str = "graph.edges";
pub const FEATURES: &str = "features.atpf";
pub const LABELS: &str = "labels.txt";
pub const SPLIT: &str = "split.txt";
pub const CORRECTED: &str = "corrected.edges";
pub const CORRECTION_REPORT: &str = "correction_report.txt";
pub const KERNEL: &str = "kernel.csv";
pub const PROPAGATED: &str = "propagated.atpf";
pub const ANALYSIS: &str = "analysis.csv";
pub const ANALYSIS_SUMMARY: &str = "analysis_summary.txt";
pub const PROBE_SUMMARY: &str = "probe_summary.txt";
pub const PROBE_GROUPS: &str = "probe_groups.csv";

/// Inputs the `probe` stage reads instead of pipeline artifacts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeInputs {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub split: Option<PathBuf>,
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.out.join(name)
}

fn core(stage: &'static str) -> impl Fn(atp_core::Error) -> CliError {
    move |e| CliError::from_core(stage, e)
}

fn read_input(stage: &'static str, path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::input(stage, format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(stage: &'static str, p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::input(stage, format!("no {what} path given")))
}

fn serialize(stage: &'static str, f: impl FnOnce(&mut Vec<u8>) -> atp_core::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(core(stage))?;
    Ok(buf)
}

fn parse_graph(stage: &'static str, path: &Path, bytes: &[u8]) -> CliResult<Graph> {
    io::read_edge_list(bytes, None, Symmetry::Reject).map_err(|e| CliError::at_path(stage, path, e))
}

/// Loads `graph.edges` and returns it with its manifest hash.
fn load_graph_artifact(stage: &'static str, cfg: &PipelineConfig) -> CliResult<(Graph, String)> {
    let path = out(cfg, GRAPH);
    let (bytes, m) = read_artifact(stage, &path)?;
    Ok((parse_graph(stage, &path, &bytes)?, m.config_hash))
}

/// The graph propagation runs on: `corrected.edges`, or `graph.edges` when
/// correction is skipped.
fn load_working_graph(stage: &'static str, cfg: &PipelineConfig) -> CliResult<(Graph, String)> {
    if cfg.skip_correction {
        return load_graph_artifact(stage, cfg);
    }
    let path = out(cfg, CORRECTED);
    if !path.exists() {
        return Err(CliError::dependency(
            stage,
            format!("{} not found; run `correct` first or pass --skip-correction", path.display()),
        ));
    }
    let (bytes, m) = read_artifact(stage, &path)?;
    Ok((parse_graph(stage, &path, &bytes)?, m.config_hash))
}

fn write_graph(stage: &'static str, path: &Path, g: &Graph, hash: &str, params: &str) -> CliResult<()> {
    let bytes = serialize(stage, |b| io::write_edge_list(g, b))?;
    write_artifact(stage, path, &bytes, hash, params)
}

/// Reads the raw inputs and writes them in canonical form: `graph.edges`,
/// `features.atpf`, and when labels are given `labels.txt` and `split.txt`
/// (a seeded random split unless a split file is supplied).
pub fn ingest(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    const S: &str = "ingest";
    let graph_path = required(S, &cfg.paths.graph, "graph")?;
    let features_path = required(S, &cfg.paths.features, "features")?;
    let features_bytes = read_input(S, features_path)?;
    let x: Features = io::load_features(features_path).map_err(|e| CliError::at_path(S, features_path, e))?;
    let graph_bytes = read_input(S, graph_path)?;
    let symmetry = if cfg.symmetrize { Symmetry::Max } else { Symmetry::Reject };
    let g: Graph = io::read_edge_list(&graph_bytes[..], Some(x.rows()), symmetry)
        .map_err(|e| CliError::at_path(S, graph_path, e))?;
    if g.node_count() != x.rows() {
        return Err(CliError::input(
            S,
            format!("graph has {} nodes but features have {} rows", g.node_count(), x.rows()),
        ));
    }
    if g.has_self_loops() {
        return Err(CliError::input(S, format!("{}: self-loops are added by the pipeline, not the input", graph_path.display())));
    }

    fs::create_dir_all(&cfg.paths.out).map_err(|e| {
        CliError::new(S, ExitKind::Internal, format!("{}: {e}", cfg.paths.out.display()))
    })?;
    let mut written = Vec::new();

    let gp = format!("symmetrize = {}", cfg.symmetrize);
    let gh = config_hash("ingest.graph", &gp, &[&sha256_hex(&graph_bytes)]);
    let path = out(cfg, GRAPH);
    write_graph(S, &path, &g, &gh, &gp)?;
    written.push(path);

    let fh = config_hash("ingest.features", "", &[&sha256_hex(&features_bytes)]);
    let bytes = serialize(S, |b| io::write_atpf(&x, b))?;
    let path = out(cfg, FEATURES);
    write_artifact(S, &path, &bytes, &fh, "")?;
    written.push(path);

    if let Some(labels_path) = &cfg.paths.labels {
        let label_bytes = read_input(S, labels_path)?;
        let labels = io::read_labels(&label_bytes[..]).map_err(|e| CliError::at_path(S, labels_path, e))?;
        if labels.len() != g.node_count() {
            return Err(CliError::input(
                S,
                format!("{}: {} labels for {} nodes", labels_path.display(), labels.len(), g.node_count()),
            ));
        }
        let lh = config_hash("ingest.labels", "", &[&sha256_hex(&label_bytes)]);
        let bytes = serialize(S, |b| io::write_labels(&labels, b))?;
        let path = out(cfg, LABELS);
        write_artifact(S, &path, &bytes, &lh, "")?;
        written.push(path);

        let (split, sp, upstream) = match &cfg.paths.split {
            Some(split_path) => {
                let split_bytes = read_input(S, split_path)?;
                let split = io::read_split(&split_bytes[..]).map_err(|e| CliError::at_path(S, split_path, e))?;
                (split, String::new(), sha256_hex(&split_bytes))
            }
            None => {
                let seed = sub_seed(cfg.seed, "split");
                let split = SplitSpec::random(&labels, cfg.probe.train_fraction, cfg.probe.val_fraction, seed)
                    .map_err(core(S))?;
                let sp = format!(
                    "train_fraction = {}\nval_fraction = {}\nseed = {seed}",
                    cfg.probe.train_fraction, cfg.probe.val_fraction
                );
                (split, sp, lh.clone())
            }
        };
        split.validate(&labels, g.node_count()).map_err(core(S))?;
        let sh = config_hash("ingest.split", &sp, &[&upstream]);
        let bytes = serialize(S, |b| io::write_split(&split, b))?;
        let path = out(cfg, SPLIT);
        write_artifact(S, &path, &bytes, &sh, &sp)?;
        written.push(path);
    }
    Ok(written)
}

pub fn correct(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    const S: &str = "correct";
    let (g, upstream) = load_graph_artifact(S, cfg)?;
    let c = &cfg.correction;
    let params = MaskParams {
        theta: c.theta,
        sparse_sample_ratio: c.sparse_sample_ratio,
        edge_mask_fraction: c.mask_fraction,
        mask_token: c.mask_token,
        seed: sub_seed(cfg.seed, "correct"),
    };
    let mut text = String::new();
    let _ = writeln!(text, "mask_fraction = {}", c.mask_fraction);
    let _ = writeln!(text, "mask_token = {}", c.mask_token);
    let _ = writeln!(text, "seed = {}", params.seed);
    let plan = match c.epsilon {
        Some(eps) => {
            let k = cfg.correction_k();
            let _ = writeln!(text, "epsilon = {eps}\nk = {k}");
            if let Some(l) = c.lambda2 {
                let _ = writeln!(text, "lambda2 = {l}");
            }
            let selected = select_nodes_epsilon(&g, eps, k, c.lambda2).map_err(core(S))?;
            MaskPlan::with_selection(&g, params, selected).map_err(core(S))?
        }
        None => {
            let _ = writeln!(text, "theta = {}\nsparse_sample_ratio = {}", c.theta, c.sparse_sample_ratio);
            MaskPlan::resolve(&g, params).map_err(core(S))?
        }
    };
    let (corrected, report) = apply_mask(&g, &plan).map_err(core(S))?;
    let hash = config_hash(S, &text, &[&upstream]);
    let path = out(cfg, CORRECTED);
    write_graph(S, &path, &corrected, &hash, &text)?;
    let rpath = out(cfg, CORRECTION_REPORT);
    write_artifact(S, &rpath, report.to_text().as_bytes(), &hash, &text)?;
    Ok(vec![path, rpath])
}

pub fn encoding_config(cfg: &PipelineConfig) -> CliResult<EncodingConfig<f64>> {
    let e = &cfg.encoding;
    Ok(EncodingConfig {
        use_eigen: e.use_eigen,
        c_norm: e.c_norm,
        power_iter_tol: e.power_tol,
        power_iter_max: e.power_max,
        k_order: e.k_order,
        cluster_variant: e.cluster_variant.parse().map_err(core("encode"))?,
    })
}

pub fn encode_stage(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    const S: &str = "encode";
    let (g, upstream) = load_working_graph(S, cfg)?;
    let ec = encoding_config(cfg)?;
    let kernel = encode(&g, &ec).map_err(core(S))?;
    let e = &cfg.encoding;
    let text = format!(
        "c_norm = {}\nuse_eigen = {}\npower_tol = {}\npower_max = {}\nk_order = {}\ncluster_variant = {}",
        e.c_norm, e.use_eigen, e.power_tol, e.power_max, e.k_order, e.cluster_variant
    );
    let hash = config_hash(S, &text, &[&upstream]);
    let path = out(cfg, KERNEL);
    write_artifact(S, &path, kernel.to_csv().as_bytes(), &hash, &text)?;
    Ok(vec![path])
}

fn scheme(cfg: &PipelineConfig) -> (Scheme<f64>, String) {
    let p = &cfg.propagation;
    match p.scheme.as_str() {
        "sgc" => (Scheme::Sgc, "scheme = sgc".into()),
        "gbp" => (Scheme::Gbp { beta: p.beta }, format!("scheme = gbp\nbeta = {}", p.beta)),
        "heat" => (
            Scheme::Heat { omega: p.omega, rho: p.rho },
            format!("scheme = heat\nomega = {}\nrho = {}", p.omega, p.rho),
        ),
        "concat" => (Scheme::Concat, "scheme = concat".into()),
        _ => (Scheme::S2gc, "scheme = s2gc".into()),
    }
}

fn read_depths(stage: &'static str, path: &Path) -> CliResult<(Vec<usize>, String)> {
    let bytes = read_input(stage, path)?;
    let text = String::from_utf8_lossy(&bytes);
    let depths = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| {
                CliError::input(stage, format!("{}: line {}: expected a hop count", path.display(), i + 1))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((depths, sha256_hex(&bytes)))
}

fn propagated_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(PROPAGATED))
        })
        .collect();
    files.sort();
    files
}

pub fn hop_path(cfg: &PipelineConfig, hop: usize) -> PathBuf {
    out(cfg, &format!("{PROPAGATED}.hop{hop}"))
}

pub fn propagate_stage(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    const S: &str = "propagate";
    let (g, graph_hash) = load_working_graph(S, cfg)?;
    let fpath = out(cfg, FEATURES);
    let (fbytes, fm) = read_artifact(S, &fpath)?;
    let x: Features = io::read_atpf(&fbytes[..]).map_err(|e| CliError::at_path(S, &fpath, e))?;

    let p = &cfg.propagation;
    let (scheme, mut text) = scheme(cfg);
    let _ = write!(text, "\nk = {}\nmode = {}", p.k, p.mode);
    let mut upstream = vec![graph_hash, fm.config_hash];
    let kernel = match p.fixed_r {
        Some(r) => {
            let _ = write!(text, "\nfixed_r = {r}");
            KernelSpec::Fixed(r)
        }
        None => {
            let kpath = out(cfg, KERNEL);
            if !kpath.exists() {
                return Err(CliError::dependency(
                    S,
                    format!("{} not found; run `encode` first or pass --fixed-r", kpath.display()),
                ));
            }
            let (kbytes, km) = read_artifact(S, &kpath)?;
            let text = String::from_utf8_lossy(&kbytes);
            let k = KernelCoefficients::<f64>::from_csv(&text, None).map_err(|e| CliError::at_path(S, &kpath, e))?;
            upstream.push(km.config_hash);
            KernelSpec::from(&k)
        }
    };
    let mut pc = PropagationConfig::new(p.k, scheme);
    if p.mode == "concat" {
        pc.mode = OutputMode::Concat;
    }
    if let Some(dpath) = &p.depths {
        let (depths, digest) = read_depths(S, dpath)?;
        let _ = write!(text, "\ndepths = {digest}");
        pc = pc.with_depths(depths);
    }
    let op = NodeWiseOperator::build(&g, &kernel, 1.0).map_err(core(S))?;
    let result = propagate(&op, &x, &pc).map_err(core(S))?;

    let refs: Vec<&str> = upstream.iter().map(String::as_str).collect();
    let hash = config_hash(S, &text, &refs);
    for stale in propagated_files(&cfg.paths.out) {
        let _ = fs::remove_file(stale);
    }
    let mut written = Vec::new();
    match result {
        PropagatedFeatures::Sum(y) => {
            let path = out(cfg, PROPAGATED);
            let bytes = serialize(S, |b| io::write_atpf(&y, b))?;
            write_artifact(S, &path, &bytes, &hash, &text)?;
            written.push(path);
        }
        PropagatedFeatures::Concat(hops) => {
            for (i, y) in hops.iter().enumerate() {
                let path = hop_path(cfg, i);
                let bytes = serialize(S, |b| io::write_atpf(y, b))?;
                write_artifact(S, &path, &bytes, &hash, &text)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

pub fn analyze_stage(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    const S: &str = "analyze";
    let (g, upstream) = load_working_graph(S, cfg)?;
    let looped = g.add_self_loops(1.0).map_err(core(S))?;
    let k = cfg.analysis_k();
    let report = if cfg.analysis.dense {
        verify_bound(&looped, k).map_err(core(S))?
    } else {
        let method = match cfg.analysis.method.as_str() {
            "dense" => EigenMethod::Dense,
            _ => EigenMethod::PowerDeflate,
        };
        convergence_report(&looped, k, method).map_err(core(S))?
    };
    let text = format!("k = {k}\ndense = {}\nmethod = {}", cfg.analysis.dense, cfg.analysis.method);
    let hash = config_hash(S, &text, &[&upstream]);
    let path = out(cfg, ANALYSIS);
    write_artifact(S, &path, report.to_csv().as_bytes(), &hash, &text)?;
    let spath = out(cfg, ANALYSIS_SUMMARY);
    write_artifact(S, &spath, report.summary().as_bytes(), &hash, &text)?;
    Ok(vec![path, spath])
}

fn hstack(blocks: &[Features]) -> CliResult<Features> {
    let n = blocks.first().map_or(0, FeatureMatrix::rows);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| blocks.iter().flat_map(|b| b.row(i).iter().copied()).collect())
        .collect();
    FeatureMatrix::from_rows(&rows).map_err(core("probe"))
}

/// Trains the probe on the propagated features (or `inputs.features`) and
/// writes an accuracy summary and a degree-group CSV on the test set.
pub fn probe_stage(cfg: &PipelineConfig, inputs: &ProbeInputs) -> CliResult<Vec<PathBuf>> {
    const S: &str = "probe";
    let mut upstream = Vec::new();
    let x: Features = match &inputs.features {
        Some(path) => {
            upstream.push(sha256_hex(&read_input(S, path)?));
            io::load_features(path).map_err(|e| CliError::at_path(S, path, e))?
        }
        None => {
            let files: Vec<PathBuf> = propagated_files(&cfg.paths.out)
                .into_iter()
                .filter(|p| p.extension().and_then(|e| e.to_str()) != Some("manifest"))
                .collect();
            let sum = out(cfg, PROPAGATED);
            let files = if files.contains(&sum) {
                vec![sum]
            } else {
                (0..files.len()).map(|i| hop_path(cfg, i)).collect()
            };
            if files.is_empty() {
                return Err(CliError::dependency(
                    S,
                    format!("no {PROPAGATED} in {}; run `propagate` first or pass --features", cfg.paths.out.display()),
                ));
            }
            let mut blocks = Vec::new();
            for path in &files {
                let (bytes, m) = read_artifact(S, path)?;
                upstream.push(m.config_hash);
                blocks.push(io::read_atpf(&bytes[..]).map_err(|e| CliError::at_path(S, path, e))?);
            }
            if blocks.len() == 1 {
                blocks.pop().expect("one block")
            } else {
                hstack(&blocks)?
            }
        }
    };
    let labels: LabelVector = match &inputs.labels {
        Some(path) => {
            let bytes = read_input(S, path)?;
            upstream.push(sha256_hex(&bytes));
            io::read_labels(&bytes[..]).map_err(|e| CliError::at_path(S, path, e))?
        }
        None => {
            let path = out(cfg, LABELS);
            let (bytes, m) = read_artifact(S, &path)?;
            upstream.push(m.config_hash);
            io::read_labels(&bytes[..]).map_err(|e| CliError::at_path(S, &path, e))?
        }
    };
    let split: SplitSpec = match &inputs.split {
        Some(path) => {
            let bytes = read_input(S, path)?;
            upstream.push(sha256_hex(&bytes));
            io::read_split(&bytes[..]).map_err(|e| CliError::at_path(S, path, e))?
        }
        None => {
            let path = out(cfg, SPLIT);
            let (bytes, m) = read_artifact(S, &path)?;
            upstream.push(m.config_hash);
            io::read_split(&bytes[..]).map_err(|e| CliError::at_path(S, &path, e))?
        }
    };

    let b = &cfg.probe;
    let pc = ProbeConfig {
        learning_rate: b.lr,
        epochs: b.epochs,
        l2: b.l2,
        seed: sub_seed(cfg.seed, "probe"),
    };
    let model = train_probe(&x, &labels, &split, &pc).map_err(core(S))?;
    let acc = |nodes: &[usize]| -> CliResult<Option<f64>> {
        if nodes.is_empty() {
            Ok(None)
        } else {
            model.evaluate(&x, &labels, nodes).map(Some).map_err(core(S))
        }
    };
    let fmt = |a: Option<f64>| a.map_or_else(|| "absent".to_string(), |v| v.to_string());

    let text = format!(
        "lr = {}\nepochs = {}\nl2 = {}\nseed = {}\ndegree_threshold = {}",
        b.lr, b.epochs, b.l2, pc.seed, b.degree_threshold
    );
    let mut summary = String::new();
    let _ = writeln!(summary, "classes: {}", model.classes);
    let _ = writeln!(summary, "train_size: {}", split.train.len());
    let _ = writeln!(summary, "val_size: {}", split.val.len());
    let _ = writeln!(summary, "test_size: {}", split.test.len());
    let _ = writeln!(summary, "final_train_loss: {}", model.log.last().map_or(f64::NAN, |l| l.train_loss));
    let _ = writeln!(summary, "train_accuracy: {}", fmt(acc(&split.train)?));
    let _ = writeln!(summary, "val_accuracy: {}", fmt(acc(&split.val)?));
    let _ = writeln!(summary, "test_accuracy: {}", fmt(acc(&split.test)?));

    // groups use the raw pre-mask degrees of graph.edges when it is available
    let mut groups_csv = None;
    if out(cfg, GRAPH).exists() {
        let (g, gh) = load_graph_artifact(S, cfg)?;
        upstream.push(gh);
        if g.node_count() == x.rows() && labels.len() == x.rows() {
            let predicted = model.predict(&x).map_err(core(S))?;
            let mut preds = vec![None; x.rows()];
            for &i in &split.test {
                preds[i] = Some(predicted[i]);
            }
            let r = degree_group_report(&preds, &labels, &g, b.degree_threshold).map_err(core(S))?;
            let _ = writeln!(summary, "low_deg_accuracy: {}", fmt(r.low.map(|g| g.accuracy)));
            let _ = writeln!(summary, "low_deg_size: {}", r.low.map_or(0, |g| g.size));
            let _ = writeln!(summary, "high_deg_accuracy: {}", fmt(r.high.map(|g| g.accuracy)));
            let _ = writeln!(summary, "high_deg_size: {}", r.high.map_or(0, |g| g.size));
            groups_csv = Some(r.to_csv());
        }
    }
    let refs: Vec<&str> = upstream.iter().map(String::as_str).collect();
    let hash = config_hash(S, &text, &refs);
    let path = out(cfg, PROBE_SUMMARY);
    write_artifact(S, &path, summary.as_bytes(), &hash, &text)?;
    let mut written = vec![path];
    if let Some(csv) = groups_csv {
        let gpath = out(cfg, PROBE_GROUPS);
        write_artifact(S, &gpath, csv.as_bytes(), &hash, &text)?;
        written.push(gpath);
    }
    Ok(written)
}

/// Runs every enabled stage in order through the same code paths as the
/// individual subcommands.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let mut written = ingest(cfg)?;
    if !cfg.skip_correction {
        written.extend(correct(cfg)?);
    }
    if cfg.propagation.fixed_r.is_none() {
        written.extend(encode_stage(cfg)?);
    }
    written.extend(propagate_stage(cfg)?);
    if cfg.run_analysis {
        written.extend(analyze_stage(cfg)?);
    }
    if cfg.run_probe && cfg.paths.labels.is_some() {
        written.extend(probe_stage(cfg, &ProbeInputs::default())?);
    }
    Ok(written)
}
