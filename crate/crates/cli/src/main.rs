use std::path::PathBuf;
use std::process::ExitCode;

use atp_cli::dataset::{self, DatasetSpec, FeatureKind};
use atp_cli::{stages, CliError, CliResult, PipelineConfig, ProbeInputs};
use atp_core::generate::GraphKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "atp", version, about = "ATP graph propagation precompute pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw inputs and write canonical graph, feature, label and split artifacts.
    Ingest {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Mask edges of high-degree and sampled nodes.
    Correct {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        mask: MaskFlags,
        /// Hop count for the epsilon rule (defaults to the propagation depth).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compute local node context encodings and kernel coefficients.
    Encode {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        skip: Skip,
        #[command(flatten)]
        enc: EncodeFlags,
    },
    /// Propagate features with the node-wise operator.
    Propagate {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        skip: Skip,
        #[command(flatten)]
        prop: PropagateFlags,
    },
    /// Spectral convergence report for the working graph.
    Analyze {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        skip: Skip,
        /// Hop count for the bounds (defaults to the propagation depth).
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        an: AnalyzeFlags,
    },
    /// Train and evaluate the linear probe.
    Probe {
        #[command(flatten)]
        base: Base,
        /// Feature file to use instead of the propagated artifacts.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Label file to use instead of labels.txt.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Split file (train:/val:/test: lines) to use instead of split.txt.
        #[arg(long)]
        split: Option<PathBuf>,
        #[command(flatten)]
        probe: ProbeFlags,
    },
    /// Run every stage in order.
    Pipeline {
        #[command(flatten)]
        base: Base,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        skip: Skip,
        #[command(flatten)]
        mask: MaskFlags,
        #[command(flatten)]
        enc: EncodeFlags,
        #[command(flatten)]
        prop: PropagateFlags,
        #[command(flatten)]
        an: AnalyzeFlags,
        #[command(flatten)]
        probe: ProbeFlags,
        #[arg(long)]
        no_analyze: bool,
        #[arg(long)]
        no_probe: bool,
    },
    /// Write a synthetic graph, features and labels.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Base {
    /// Config file with `key = value` lines and `[section]` headers.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Inputs {
    /// Edge list, "u v [w]" per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Features as CSV or ATPF.
    #[arg(long)]
    features: Option<PathBuf>,
    /// One class id per line, -1 for unlabeled.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    /// Accept directed input, keeping the larger weight of each pair.
    #[arg(long)]
    symmetrize: bool,
}

#[derive(Args)]
struct Skip {
    /// Use graph.edges directly instead of corrected.edges.
    #[arg(long)]
    skip_correction: bool,
}

#[derive(Args)]
struct MaskFlags {
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sparse_sample_ratio: Option<f64>,
    #[arg(long)]
    mask_fraction: Option<f64>,
    #[arg(long)]
    mask_token: Option<f64>,
    /// Select nodes whose convergence bound exceeds this value.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Decay-rate override for --epsilon on large graphs.
    #[arg(long)]
    lambda2: Option<f64>,
}

#[derive(Args)]
struct EncodeFlags {
    #[arg(long)]
    c_norm: Option<f64>,
    #[arg(long)]
    no_eigen: bool,
    #[arg(long)]
    power_tol: Option<f64>,
    #[arg(long)]
    power_max: Option<usize>,
    #[arg(long)]
    k_order: Option<usize>,
    #[arg(long, value_enum)]
    cluster_variant: Option<ClusterVariantArg>,
}

#[derive(Args)]
struct PropagateFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// One hop count per line.
    #[arg(long)]
    depths: Option<PathBuf>,
    /// Same kernel coefficient for every node; skips encoding.
    #[arg(long)]
    fixed_r: Option<f64>,
}

#[derive(Args)]
struct AnalyzeFlags {
    /// Check the bounds against dense walk powers (at most 2000 nodes).
    #[arg(long)]
    dense: bool,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args)]
struct ProbeFlags {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    degree_threshold: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Node count (leaf count for a star).
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Comma-separated block sizes for sbm.
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, value_enum, default_value_t = FeatureArg::Random)]
    feature_kind: FeatureArg,
    #[arg(long, default_value_t = 8)]
    dims: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sgc,
    S2gc,
    Gbp,
    Heat,
    Concat,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sum,
    Concat,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Power,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusterVariantArg {
    Literal,
    Standard,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Path,
    Cycle,
    Star,
    Complete,
    Er,
    Sbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    Random,
    Onehot,
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// `section.key = value` pairs collected from flags.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn opt<T: ToString>(&mut self, key: &'static str, v: &Option<T>) {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
    }

    fn path(&mut self, key: &'static str, v: &Option<PathBuf>) {
        if let Some(v) = v {
            self.0.push((key, v.display().to_string()));
        }
    }

    fn on(&mut self, key: &'static str, set: bool, value: &str) {
        if set {
            self.0.push((key, value.to_string()));
        }
    }

    fn base(&mut self, b: &Base) {
        self.path("paths.out", &b.out);
        self.opt("pipeline.seed", &b.seed);
    }

    fn inputs(&mut self, i: &Inputs) {
        self.path("paths.graph", &i.graph);
        self.path("paths.features", &i.features);
        self.path("paths.labels", &i.labels);
        self.path("paths.split", &i.split);
        self.on("pipeline.symmetrize", i.symmetrize, "true");
    }

    fn skip(&mut self, s: &Skip) {
        self.on("pipeline.skip_correction", s.skip_correction, "true");
    }

    fn mask(&mut self, m: &MaskFlags) {
        self.opt("correction.theta", &m.theta);
        self.opt("correction.sparse_sample_ratio", &m.sparse_sample_ratio);
        self.opt("correction.mask_fraction", &m.mask_fraction);
        self.opt("correction.mask_token", &m.mask_token);
        self.opt("correction.epsilon", &m.epsilon);
        self.opt("correction.lambda2", &m.lambda2);
    }

    fn enc(&mut self, e: &EncodeFlags) {
        self.opt("encoding.c_norm", &e.c_norm);
        self.on("encoding.use_eigen", e.no_eigen, "false");
        self.opt("encoding.power_tol", &e.power_tol);
        self.opt("encoding.power_max", &e.power_max);
        self.opt("encoding.k_order", &e.k_order);
        self.opt("encoding.cluster_variant", &e.cluster_variant.map(value_name));
    }

    fn prop(&mut self, p: &PropagateFlags) {
        self.opt("propagation.k", &p.k);
        self.opt("propagation.scheme", &p.scheme.map(value_name));
        self.opt("propagation.beta", &p.beta);
        self.opt("propagation.omega", &p.omega);
        self.opt("propagation.rho", &p.rho);
        self.opt("propagation.mode", &p.mode.map(value_name));
        self.path("propagation.depths", &p.depths);
        self.opt("propagation.fixed_r", &p.fixed_r);
    }

    fn an(&mut self, a: &AnalyzeFlags) {
        self.on("analysis.dense", a.dense, "true");
        self.opt("analysis.method", &a.method.map(value_name));
    }

    fn probe(&mut self, p: &ProbeFlags) {
        self.opt("probe.lr", &p.lr);
        self.opt("probe.epochs", &p.epochs);
        self.opt("probe.l2", &p.l2);
        self.opt("probe.degree_threshold", &p.degree_threshold);
    }
}

fn config(base: &Base, overrides: Overrides) -> CliResult<PipelineConfig> {
    let mut cfg = match &base.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for (key, value) in overrides.0 {
        cfg.set(key, &value)?;
    }
    Ok(cfg)
}

fn generate(args: &GenerateArgs) -> CliResult<Vec<PathBuf>> {
    let kind = match args.kind {
        KindArg::Path => GraphKind::Path { n: args.n },
        KindArg::Cycle => GraphKind::Cycle { n: args.n },
        KindArg::Star => GraphKind::Star { leaves: args.n },
        KindArg::Complete => GraphKind::Complete { n: args.n },
        KindArg::Er => GraphKind::ErdosRenyi { n: args.n, p: args.p },
        KindArg::Sbm => {
            if args.blocks.is_empty() {
                return Err(CliError::input("generate", "--blocks is required for sbm"));
            }
            GraphKind::Sbm {
                block_sizes: args.blocks.clone(),
                p_in: args.p_in,
                p_out: args.p_out,
            }
        }
    };
    let features = match args.feature_kind {
        FeatureArg::Random => FeatureKind::Random { dims: args.dims },
        FeatureArg::Onehot => FeatureKind::OneHot { noise: args.noise },
    };
    let spec = DatasetSpec { kind, features, seed: args.seed };
    let files = dataset::write(&spec, &args.out)?;
    Ok([Some(files.graph), Some(files.features), files.labels].into_iter().flatten().collect())
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut o = Overrides::default();
    match &cli.command {
        Command::Ingest { base, inputs } => {
            o.base(base);
            o.inputs(inputs);
            stages::ingest(&config(base, o)?)
        }
        Command::Correct { base, mask, k } => {
            o.base(base);
            o.mask(mask);
            o.opt("correction.k", k);
            stages::correct(&config(base, o)?)
        }
        Command::Encode { base, skip, enc } => {
            o.base(base);
            o.skip(skip);
            o.enc(enc);
            stages::encode_stage(&config(base, o)?)
        }
        Command::Propagate { base, skip, prop } => {
            o.base(base);
            o.skip(skip);
            o.prop(prop);
            stages::propagate_stage(&config(base, o)?)
        }
        Command::Analyze { base, skip, k, an } => {
            o.base(base);
            o.skip(skip);
            o.opt("analysis.k", k);
            o.an(an);
            stages::analyze_stage(&config(base, o)?)
        }
        Command::Probe { base, features, labels, split, probe } => {
            o.base(base);
            o.probe(probe);
            let inputs = ProbeInputs {
                features: features.clone(),
                labels: labels.clone(),
                split: split.clone(),
            };
            stages::probe_stage(&config(base, o)?, &inputs)
        }
        Command::Pipeline { base, inputs, skip, mask, enc, prop, an, probe, no_analyze, no_probe } => {
            o.base(base);
            o.inputs(inputs);
            o.skip(skip);
            o.mask(mask);
            o.enc(enc);
            o.prop(prop);
            o.an(an);
            o.probe(probe);
            o.on("pipeline.analyze", *no_analyze, "false");
            o.on("pipeline.probe", *no_probe, "false");
            stages::run_pipeline(&config(base, o)?)
        }
        Command::Generate(args) => generate(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
