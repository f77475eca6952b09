//! Command-line surface: generate | split | train | rank | evaluate |
//! gradcheck. Every run writes one manifest; primary outputs are
//! byte-identical across runs with the same inputs and seeds.

use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate, expected_random_hits_at_k, make_regular_split, make_zero_shot_split, rank_candidates,
    MetricReport, ScoreMode, SplitKind,
};
use crate::graph::CompanyGraph;
use crate::io::{
    export_embeddings_tsv, format_config, load_embeddings, load_graph, load_model, load_queries,
    parse_config_file, save_embeddings, save_graph, save_model, save_split, write_atomic,
    RunManifest, SplitFiles,
};
use crate::linalg::DenseMatrix;
use crate::model::{
    embed, gradient_check, train, Activation, JpecConfig, JpecModel, NormMode, TrainReport,
};
use crate::sampling::{sample_negatives, NegativeSampleSpec};
use crate::synth::{generate, SynthSpec};
use clap::{Args, Parser, Subcommand};
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Seed offset separating the negative-sampling stream from weight init.
const NEGATIVE_SEED_SALT: u64 = 0x4e45_4700;

#[derive(Parser, Debug)]
#[command(
    name = "jpec",
    version,
    about = "Competitor retrieval from supply-chain knowledge graphs via joint proximity embedding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic planted-industry dataset
    Generate(GenerateArgs),
    /// Hold out competitor edges for evaluation (regular or zero-shot)
    Split(SplitArgs),
    /// Train a model on a graph
    Train(TrainArgs),
    /// Rank candidate competitors for given query companies
    Rank(RankArgs),
    /// Score ranked retrieval against held-out competitor edges
    Evaluate(EvaluateArgs),
    /// Verify analytic gradients against central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Output directory for nodes.tsv, supply.tsv, competitors.tsv, industries.tsv
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 6)]
    pub industries: usize,
    #[arg(long, default_value_t = 16)]
    pub attr_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub attr_noise: f64,
    /// Competitor edge probability within an industry
    #[arg(long, default_value_t = 0.3)]
    pub competitor_prob: f64,
    /// Base directed supply edge probability (scaled by the industry flow matrix)
    #[arg(long, default_value_t = 0.2)]
    pub supply_prob: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// Node attribute file: `id <TAB> f1 <TAB> ... <TAB> fd`
    #[arg(long)]
    pub nodes: PathBuf,
    /// Directed supply edge file: `src_id <TAB> dst_id`
    #[arg(long)]
    pub supply: PathBuf,
    /// Undirected competitor edge file: `id_a <TAB> id_b`
    #[arg(long)]
    pub competitors: PathBuf,
    /// Skip one header line in each input file
    #[arg(long, default_value_t = false)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// regular: hold out edges; zero-shot: strip nodes of all competitor edges
    #[arg(long)]
    pub kind: String,
    /// Edge fraction (regular) or labeled-node fraction (zero-shot)
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    /// Minimum held-out competitors for a node to become a query
    #[arg(long, default_value_t = 5)]
    pub min_competitors: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for train_competitors.tsv, queries.tsv, removed_edges.tsv
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// key=value config file; command-line flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub encoder_dims: Option<Vec<usize>>,
    /// Comma-separated per-layer activations (relu, tanh, identity)
    #[arg(long)]
    pub activations: Option<String>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// row (directed propagation) or symmetric (classic GCN on A ∨ Aᵀ)
    #[arg(long)]
    pub norm_mode: Option<String>,
    #[arg(long)]
    pub negative_ratio: Option<f64>,
    /// Global gradient-norm clip; 0 disables
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Sample negatives over all nodes instead of only labeled ones
    #[arg(long, default_value_t = false)]
    pub negatives_over_all_nodes: bool,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
    /// Also write embeddings of the training graph
    #[arg(long)]
    pub embeddings_out: Option<PathBuf>,
    /// Also write embeddings as TSV for inspection
    #[arg(long)]
    pub embeddings_tsv_out: Option<PathBuf>,
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    /// Trained model file (embeds the graph given by --nodes/--supply/--competitors)
    #[arg(long, conflicts_with = "embeddings")]
    pub model: Option<PathBuf>,
    /// Precomputed embedding file (alternative to --model)
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long)]
    pub supply: Option<PathBuf>,
    #[arg(long)]
    pub competitors: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    pub header: bool,
    /// Comma-separated query company ids
    #[arg(long, value_delimiter = ',')]
    pub queries: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, default_value = "neg-sq-euclidean")]
    pub score: String,
    /// Exclude each query's known competitors (from --competitors) from its list
    #[arg(long, default_value_t = false)]
    pub exclude_known: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, conflicts_with = "embeddings")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub supply: PathBuf,
    /// Training competitor edges (the split's train_competitors.tsv)
    #[arg(long)]
    pub train_competitors: PathBuf,
    /// Query manifest: `query_id <TAB> held_out_id` per row
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = false)]
    pub header: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5, 10])]
    pub ks: Vec<usize>,
    #[arg(long, default_value = "neg-sq-euclidean")]
    pub score: String,
    /// Keep each query's training competitors in its candidate pool
    #[arg(long, default_value_t = false)]
    pub unfiltered: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_query_out: Option<PathBuf>,
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "gradcheck.manifest.tsv")]
    pub manifest_out: PathBuf,
}

/// Run a parsed command. Returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Split(args) => cmd_split(args),
        Command::Train(args) => cmd_train(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_generate(args: GenerateArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("generate");
    let spec = SynthSpec {
        n: args.nodes,
        industries: args.industries,
        attr_dim: args.attr_dim,
        attr_noise: args.attr_noise,
        intra_competitor_prob: args.competitor_prob,
        supply_edge_prob: args.supply_prob,
        seed: args.seed,
    };
    let (graph, industries) = generate(&spec)?;
    ensure_dir(&args.out_dir)?;
    let nodes = args.out_dir.join("nodes.tsv");
    let supply = args.out_dir.join("supply.tsv");
    let competitors = args.out_dir.join("competitors.tsv");
    let industries_path = args.out_dir.join("industries.tsv");
    save_graph(&graph, &nodes, &supply, &competitors)?;
    let mut ind = String::new();
    let labels = graph
        .node_labels
        .as_ref()
        .expect("synth graphs are labeled");
    for (i, &g) in industries.iter().enumerate() {
        let _ = writeln!(ind, "{}\t{}", labels[i], g);
    }
    write_atomic(&industries_path, ind.as_bytes())?;

    manifest.config("nodes", args.nodes);
    manifest.config("industries", args.industries);
    manifest.config("attr_dim", args.attr_dim);
    manifest.config("attr_noise", args.attr_noise);
    manifest.config("competitor_prob", args.competitor_prob);
    manifest.config("supply_prob", args.supply_prob);
    manifest.seed("graph", args.seed);
    for p in [&nodes, &supply, &competitors, &industries_path] {
        manifest.output(p)?;
    }
    println!(
        "generated {} nodes, {} supply edges, {} competitor edges -> {}",
        graph.n,
        graph.supply_edges.len(),
        graph.competitor_edges.len(),
        args.out_dir.display()
    );
    let manifest_path = args
        .manifest_out
        .unwrap_or_else(|| args.out_dir.join("manifest.tsv"));
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn load_graph_with_manifest(
    graph_args: &GraphArgs,
    manifest: &mut RunManifest,
) -> Result<CompanyGraph> {
    for p in [
        &graph_args.nodes,
        &graph_args.supply,
        &graph_args.competitors,
    ] {
        manifest.input(p)?;
    }
    let loaded = load_graph(
        &graph_args.nodes,
        &graph_args.supply,
        &graph_args.competitors,
        graph_args.header,
    )?;
    manifest.warn_all(&loaded.warnings);
    Ok(loaded.graph)
}

fn cmd_split(args: SplitArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("split");
    let kind = SplitKind::parse(&args.kind)?;
    let graph = load_graph_with_manifest(&args.graph, &mut manifest)?;
    let split = match kind {
        SplitKind::Regular => {
            make_regular_split(&graph, args.fraction, args.min_competitors, args.seed)?
        }
        SplitKind::ZeroShot => {
            make_zero_shot_split(&graph, args.fraction, args.min_competitors, args.seed)?
        }
    };
    ensure_dir(&args.out_dir)?;
    let files = SplitFiles::in_dir(&args.out_dir);
    save_split(&split, &files)?;
    manifest.config("kind", kind.as_str());
    manifest.config("fraction", args.fraction);
    manifest.config("min_competitors", args.min_competitors);
    manifest.seed("split", args.seed);
    for p in [
        &files.train_competitors,
        &files.queries,
        &files.removed_edges,
    ] {
        manifest.output(p)?;
    }
    println!(
        "{} split: removed {} competitor edges, {} query nodes -> {}",
        kind.as_str(),
        split.removed_edges.len(),
        split.queries.len(),
        args.out_dir.display()
    );
    let manifest_path = args
        .manifest_out
        .unwrap_or_else(|| args.out_dir.join("manifest.tsv"));
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn effective_config(args: &TrainArgs, input_dim: usize) -> Result<JpecConfig> {
    let mut cfg = JpecConfig::default_for_input(input_dim);
    if let Some(path) = &args.config {
        cfg = parse_config_file(path, cfg)?;
    }
    if let Some(dims) = &args.encoder_dims {
        cfg.encoder_dims = dims.clone();
    }
    if let Some(acts) = &args.activations {
        cfg.activations = acts
            .split(',')
            .map(|p| Activation::parse(p.trim()))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = args.margin {
        cfg.margin = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.norm_mode {
        cfg.norm_mode = NormMode::parse(v)?;
    }
    if let Some(v) = args.negative_ratio {
        cfg.negative_ratio = v;
    }
    if let Some(v) = args.grad_clip {
        cfg.grad_clip = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn format_report_tsv(report: &TrainReport) -> String {
    let mut out =
        String::from("# epoch\tl_pos\tl_neg\tl_first\tl_second\tweight_sq\tregularizer\ttotal\n");
    for rec in &report.epochs {
        let l = &rec.loss;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            rec.epoch, l.l_pos, l.l_neg, l.l_first, l.l_second, l.weight_sq, l.regularizer, l.total
        );
    }
    if let Some(l) = report.final_loss {
        let _ = writeln!(
            out,
            "final\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.l_pos, l.l_neg, l.l_first, l.l_second, l.weight_sq, l.regularizer, l.total
        );
    }
    out
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("train");
    if let Some(cfg_path) = &args.config {
        manifest.input(cfg_path)?;
    }
    let graph = load_graph_with_manifest(&args.graph, &mut manifest)?;
    let cfg = effective_config(&args, graph.attr.cols())?;
    for line in format_config(&cfg).lines() {
        if let Some((k, v)) = line.split_once('=') {
            manifest.config(k, v);
        }
    }
    manifest.config(
        "negatives_restricted_to_labeled",
        !args.negatives_over_all_nodes,
    );
    manifest.seed("config", cfg.seed);

    let neg_seed = cfg.seed.wrapping_add(NEGATIVE_SEED_SALT);
    manifest.seed("negative_sampling", neg_seed);
    let negatives = sample_negatives(
        &graph,
        &NegativeSampleSpec {
            ratio: cfg.negative_ratio,
            seed: neg_seed,
            restrict_to_labeled: !args.negatives_over_all_nodes,
        },
    )?;
    let (model, report) = train(&graph, &negatives, &cfg)?;

    save_model(&model, &args.model_out)?;
    write_atomic(&args.report_out, format_report_tsv(&report).as_bytes())?;
    manifest.output(&args.model_out)?;
    manifest.output(&args.report_out)?;
    if args.embeddings_out.is_some() || args.embeddings_tsv_out.is_some() {
        let y = embed(&model, &graph)?;
        if let Some(emb_path) = &args.embeddings_out {
            save_embeddings(&y, graph.node_labels.as_deref(), cfg.seed, emb_path)?;
            manifest.output(emb_path)?;
        }
        if let Some(tsv_path) = &args.embeddings_tsv_out {
            export_embeddings_tsv(&y, graph.node_labels.as_deref(), tsv_path)?;
            manifest.output(tsv_path)?;
        }
    }
    match (report.initial_total(), report.final_total()) {
        (Some(initial), Some(fin)) => println!(
            "trained {} epochs on {} nodes ({} positive, {} negative pairs); loss {initial:.4} -> {fin:.4}",
            cfg.epochs,
            graph.n,
            graph.competitor_edges.len(),
            negatives.len()
        ),
        _ => println!("initialized model (0 epochs) on {} nodes", graph.n),
    }
    let manifest_path = args
        .manifest_out
        .unwrap_or_else(|| manifest_sibling(&args.model_out));
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn manifest_sibling(primary: &Path) -> PathBuf {
    let mut name = primary
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".manifest.tsv");
    primary.with_file_name(name)
}

/// Embeddings plus the id mapping, from either a model (embedding the given
/// graph) or a saved embedding file.
fn resolve_embeddings(
    model_path: Option<&PathBuf>,
    embeddings_path: Option<&PathBuf>,
    graph: Option<&CompanyGraph>,
    manifest: &mut RunManifest,
) -> Result<(DenseMatrix, Vec<String>, Option<JpecModel>)> {
    match (model_path, embeddings_path) {
        (Some(path), None) => {
            manifest.input(path)?;
            let graph = graph.ok_or_else(|| {
                Error::InvalidConfig(
                    "--model requires --nodes, --supply, and --competitors to embed".to_string(),
                )
            })?;
            let loaded = load_model(path)?;
            manifest.warn_all(&loaded.warnings);
            let y = embed(&loaded.model, graph)?;
            let ids = graph
                .node_labels
                .clone()
                .unwrap_or_else(|| (0..graph.n).map(|i| format!("n{i}")).collect());
            Ok((y, ids, Some(loaded.model)))
        }
        (None, Some(path)) => {
            manifest.input(path)?;
            let loaded = load_embeddings(path)?;
            manifest.warn_all(&loaded.warnings);
            let n = loaded.matrix.rows();
            let ids = loaded
                .ids
                .unwrap_or_else(|| (0..n).map(|i| format!("n{i}")).collect());
            Ok((loaded.matrix, ids, None))
        }
        _ => Err(Error::InvalidConfig(
            "exactly one of --model or --embeddings is required".to_string(),
        )),
    }
}

fn cmd_rank(args: RankArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("rank");
    let score = ScoreMode::parse(&args.score)?;
    if args.queries.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one query id is required".to_string(),
        ));
    }
    if args.top_k == 0 {
        return Err(Error::InvalidConfig(
            "--top-k must be at least 1".to_string(),
        ));
    }

    let graph = match (&args.nodes, &args.supply, &args.competitors) {
        (Some(n), Some(s), Some(c)) => {
            let graph_args = GraphArgs {
                nodes: n.clone(),
                supply: s.clone(),
                competitors: c.clone(),
                header: args.header,
            };
            Some(load_graph_with_manifest(&graph_args, &mut manifest)?)
        }
        (None, None, None) => None,
        _ => {
            return Err(Error::InvalidConfig(
                "--nodes, --supply, and --competitors must be given together".to_string(),
            ))
        }
    };
    let (y, ids, _) = resolve_embeddings(
        args.model.as_ref(),
        args.embeddings.as_ref(),
        graph.as_ref(),
        &mut manifest,
    )?;
    let index: HashMap<&str, usize> = ids.iter().map(|s| s.as_str()).zip(0..).collect();
    if args.exclude_known && graph.is_none() {
        return Err(Error::InvalidConfig(
            "--exclude-known needs the graph files to know existing competitors".to_string(),
        ));
    }

    let pool: Vec<usize> = (0..y.rows()).collect();
    let mut out = String::new();
    for qid in &args.queries {
        let q = *index.get(qid.as_str()).ok_or_else(|| Error::UnknownId {
            path: PathBuf::from("<--queries>"),
            line: 0,
            id: qid.clone(),
        })?;
        let filter: BTreeSet<usize> = if args.exclude_known {
            graph
                .as_ref()
                .expect("checked above")
                .competitor_neighbors(q)
                .into_iter()
                .collect()
        } else {
            BTreeSet::new()
        };
        let ranked = rank_candidates(&y, q, &pool, score, &filter)?;
        for (rank, (&c, &s)) in ranked
            .candidates
            .iter()
            .zip(&ranked.scores)
            .take(args.top_k)
            .enumerate()
        {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", qid, rank + 1, ids[c], s);
        }
    }
    write_atomic(&args.out, out.as_bytes())?;
    manifest.config("top_k", args.top_k);
    manifest.config("score", score.as_str());
    manifest.config("exclude_known", args.exclude_known);
    manifest.config("queries", args.queries.join(","));
    manifest.output(&args.out)?;
    println!(
        "ranked top-{} candidates for {} queries -> {}",
        args.top_k,
        args.queries.len(),
        args.out.display()
    );
    let manifest_path = args
        .manifest_out
        .unwrap_or_else(|| manifest_sibling(&args.out));
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn format_metrics_tsv(report: &MetricReport, chance: &[(usize, f64)]) -> String {
    let mut out = String::from("# metric\tvalue\n");
    let _ = writeln!(out, "queries\t{}", report.queries);
    for (k, v) in &report.hits_at_k {
        let _ = writeln!(out, "hits@{k}\t{v}");
    }
    for (k, v) in &report.hits_at_k_by_k {
        let _ = writeln!(out, "hits_by_k@{k}\t{v}");
    }
    let _ = writeln!(out, "mrr\t{}", report.mrr);
    let _ = writeln!(out, "map\t{}", report.map);
    for (k, v) in chance {
        let _ = writeln!(out, "chance_hits@{k}\t{v}");
    }
    out
}

fn format_per_query_tsv(report: &MetricReport, ids: &[String], ks: &[usize]) -> String {
    let mut out = String::from("# query\trelevant\tpool\tfirst_relevant_rank");
    for k in ks {
        let _ = write!(out, "\thits@{k}");
    }
    out.push_str("\tap\n");
    for o in &report.per_query {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}",
            ids[o.node],
            o.relevant_count,
            o.pool_size,
            o.first_relevant_rank
                .map_or("-".to_string(), |r| r.to_string())
        );
        for k in ks {
            let _ = write!(out, "\t{}", o.hits[k]);
        }
        let _ = writeln!(out, "\t{}", o.average_precision);
    }
    out
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("evaluate");
    let score = ScoreMode::parse(&args.score)?;
    let graph_args = GraphArgs {
        nodes: args.nodes.clone(),
        supply: args.supply.clone(),
        competitors: args.train_competitors.clone(),
        header: args.header,
    };
    let train_graph = load_graph_with_manifest(&graph_args, &mut manifest)?;
    let (y, ids, _) = resolve_embeddings(
        args.model.as_ref(),
        args.embeddings.as_ref(),
        Some(&train_graph),
        &mut manifest,
    )?;
    manifest.input(&args.queries)?;
    let queries = load_queries(&args.queries, &train_graph)?;
    let filtered = !args.unfiltered;
    let report = evaluate(&y, &train_graph, &queries, &args.ks, score, filtered)?;

    let mut ks_sorted = args.ks.clone();
    ks_sorted.sort_unstable();
    ks_sorted.dedup();
    let chance: Vec<(usize, f64)> = ks_sorted
        .iter()
        .map(|&k| {
            let mut acc = 0.0;
            for o in &report.per_query {
                acc += expected_random_hits_at_k(o.pool_size, o.relevant_count, k);
            }
            (k, acc / report.per_query.len() as f64)
        })
        .collect();

    write_atomic(&args.out, format_metrics_tsv(&report, &chance).as_bytes())?;
    manifest.output(&args.out)?;
    if let Some(per_query) = &args.per_query_out {
        write_atomic(
            per_query,
            format_per_query_tsv(&report, &ids, &ks_sorted).as_bytes(),
        )?;
        manifest.output(per_query)?;
    }
    manifest.config(
        "ks",
        ks_sorted
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.config("score", score.as_str());
    manifest.config("filtered", filtered);

    println!(
        "evaluation over {} queries, candidate pool = all companies{}:",
        report.queries,
        if filtered {
            " minus each query's known training competitors"
        } else {
            ""
        }
    );
    for (k, v) in &report.hits_at_k {
        let chance_v = chance
            .iter()
            .find(|(ck, _)| ck == k)
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        println!(
            "  hits@{k:<4} {v:.4}   (chance {chance_v:.4}, by-k {:.4})",
            report.hits_at_k_by_k[k]
        );
    }
    println!("  mrr      {:.4}", report.mrr);
    println!("  map      {:.4}", report.map);
    let manifest_path = args
        .manifest_out
        .unwrap_or_else(|| manifest_sibling(&args.out));
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("gradcheck");
    manifest.config("eps", args.eps);
    manifest.config("tol", args.tol);
    manifest.seed("instance", args.seed);

    let base_cfg = |margin: f64, beta: f64, seed: u64| JpecConfig {
        encoder_dims: vec![4, 5, 2],
        activations: vec![Activation::Relu, Activation::Identity],
        margin,
        beta,
        lambda: 1e-3,
        learning_rate: 0.01,
        epochs: 0,
        seed,
        norm_mode: NormMode::Row,
        negative_ratio: 1.0,
        grad_clip: 0.0,
    };
    let mut worst: f64 = 0.0;
    for (scenario, (label, beta, active)) in [
        ("inactive-hinge", 1.0, false),
        ("active-hinge", 1.0, true),
        ("beta-zero", 0.0, true),
    ]
    .into_iter()
    .enumerate()
    {
        let instance_seed = args.seed.wrapping_add(scenario as u64);
        let spec = SynthSpec {
            n: 6,
            industries: 2,
            attr_dim: 4,
            attr_noise: 0.3,
            intra_competitor_prob: 1.0,
            supply_edge_prob: 0.5,
            seed: instance_seed,
        };
        let (graph, _) = generate(&spec)?;
        let negatives = sample_negatives(
            &graph,
            &NegativeSampleSpec {
                ratio: 0.5,
                seed: instance_seed.wrapping_add(NEGATIVE_SEED_SALT),
                restrict_to_labeled: true,
            },
        )?;
        // place the margin on the requested hinge branch at the init point
        let probe_cfg = base_cfg(0.0, beta, instance_seed);
        let probe = crate::model::total_loss(
            &JpecModel::init(probe_cfg.clone())?,
            &crate::model::Propagators::for_graph(&graph, probe_cfg.norm_mode)?,
            &graph.attr,
            &crate::graph::competitor_pair_sets(&graph, &negatives)?.0,
            &negatives,
        )?;
        let margin = if active {
            2.0 * probe.l_neg
        } else {
            0.5 * probe.l_neg
        };
        let cfg = base_cfg(margin, beta, instance_seed);
        let check = gradient_check(&graph, &negatives, &cfg, args.eps)?;
        println!(
            "{label}: max relative error {:.3e} over {} entries (worst at {} entry {})",
            check.max_rel_error, check.entries_checked, check.worst_entry.0, check.worst_entry.1
        );
        manifest.config(&format!("max_rel_error.{label}"), check.max_rel_error);
        worst = worst.max(check.max_rel_error);
    }
    let pass = worst < args.tol;
    println!(
        "gradcheck {}: max relative error {:.3e} (tolerance {:.1e})",
        if pass { "PASS" } else { "FAIL" },
        worst,
        args.tol
    );
    manifest.config("max_rel_error", worst);
    manifest.config("pass", pass);
    manifest.write(&args.manifest_out)?;
    Ok(if pass { 0 } else { 1 })
}
