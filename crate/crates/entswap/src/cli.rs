//! Command-line front end: ingest, fit, sweep, select, swap, eval.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use entswap_core::contingency::{build_table, frequency_counts, marginalize};
use entswap_core::corpus::{semantic_chunk, suppress_direct_identifiers, Chunk, Corpus};
use entswap_core::embedding::{Embedder, EmbeddingRequest};
use entswap_core::evaluation::{accuracy, mcnemar, pair_predictions, Condition, PairedTable};
use entswap_core::ewens_pitman::{fit_mle, pop_unique_ratio};
use entswap_core::mixture::{assign, fit_em, Family};
use entswap_core::risk_utility::{
    best_under_risk_cap, collect_sweep, frontier, monte_carlo_measures, optimal_release, subsets, sweep_subset,
    validate_sweep, Pipeline, RiskUtilityPoint, SweepConfig, TradeoffLine,
};
use entswap_core::swap::{sequential_swap, suppress_category, Constraints, Release, Role};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::formats::{self, SweepRow};
use crate::provider::{Memoized, Provider, ProviderKind};
use crate::rules::Rule;

#[derive(Debug, Parser)]
#[command(name = "entswap", version, about = "Named-entity swapping with risk-utility release selection")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an ingest file, suppress direct identifiers, fill embeddings.
    Ingest(IngestArgs),
    /// Fit the spherical mixture to the chunk embeddings.
    Fit(FitArgs),
    /// Score sequential swap trajectories for every category subset.
    Sweep(SweepArgs),
    /// Pick a release from a sweep CSV.
    Select(SelectArgs),
    /// Apply a release to a corpus.
    Swap(SwapArgs),
    /// Accuracy and McNemar's test for pre/post predictions.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stats report JSON; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Treat records as sentences and merge them per document at this
    /// breakpoint percentile.
    #[arg(long)]
    pub chunk_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(short = 'K', long = "components")]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-subset Ewens-Pitman fits and points as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub eligible: Option<Vec<String>>,
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long)]
    pub max_swaps: Option<usize>,
    #[arg(long = "n-pop", value_delimiter = ',')]
    pub n_pops: Option<Vec<f64>>,
    #[arg(long)]
    pub same_cluster: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Trade-off slope.
    #[arg(short = 'a', long)]
    pub a: Option<f64>,
    /// Trade-off intercept.
    #[arg(short = 'c', long)]
    pub c: Option<f64>,
    /// Pick the highest-utility release with DR at most this value instead.
    #[arg(long)]
    pub risk_cap: Option<f64>,
    /// Population size to select at when the sweep has several.
    #[arg(long = "n-pop")]
    pub n_pop: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub release: Option<PathBuf>,
    /// Needed for the same-cluster constraint and for scoring.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// DU/DR of the release, averaged over M runs; needs the model.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction CSVs (chunk_id, predicted, truth, condition, run).
    #[arg(long = "pred", num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Selected release as written by `select` and read by `swap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSpec {
    #[serde(default)]
    pub release_id: String,
    #[serde(rename = "J", default)]
    pub j: Vec<String>,
    #[serde(rename = "N", default)]
    pub n_pop: Option<f64>,
    #[serde(rename = "DU", default)]
    pub du: Option<f64>,
    #[serde(rename = "DR", default)]
    pub dr: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(flatten)]
    pub release: Release,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = Some(t);
    }
    if let Some(k) = cli.provider {
        config.provider.kind = k;
    }
    config.validate()?;
    let explicit_seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&config, a),
        Command::Fit(a) => cmd_fit(config, a),
        Command::Sweep(a) => cmd_sweep(config, a),
        Command::Select(a) => cmd_select(&config, a),
        Command::Swap(a) => cmd_swap(&config, a, explicit_seed),
        Command::Eval(a) => cmd_eval(&config, a),
    }
}

fn need(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| AppError::Config(format!("no {what} path given (flag or [paths] entry)")))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => formats::write_string(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn thread_pool(config: &RunConfig) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads.filter(|t| *t > 0) {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| AppError::Config(format!("thread pool: {e}")))
}

/// Embeds the chunks whose embedding is missing.
fn fill_embeddings<E: Embedder>(chunks: &mut [Chunk], embedder: &E) -> Result<usize> {
    let todo: Vec<usize> = (0..chunks.len()).filter(|&i| chunks[i].embedding.is_none()).collect();
    if todo.is_empty() {
        return Ok(0);
    }
    let requests = todo
        .iter()
        .map(|&i| EmbeddingRequest::new(chunks[i].id.clone(), chunks[i].text.clone()))
        .collect::<entswap_core::Result<Vec<_>>>()?;
    let vectors = embedder.embed(&requests)?;
    if vectors.len() != todo.len() {
        return Err(entswap_core::Error::LengthMismatch {
            expected: todo.len(),
            got: vectors.len(),
        }
        .into());
    }
    for (i, v) in todo.iter().zip(vectors) {
        chunks[*i].embedding = Some(v);
    }
    Ok(todo.len())
}

/// Drops embeddings of chunks whose text changed.
fn invalidate_changed(before: &Corpus, after: Vec<Chunk>) -> Vec<Chunk> {
    after
        .into_iter()
        .zip(before.chunks())
        .map(|(mut c, b)| {
            if c.text != b.text {
                c.embedding = None;
            }
            c
        })
        .collect()
}

/// Merges consecutive sentences of each document into breakpoint chunks.
/// Documents keep their first-appearance order.
fn merge_sentences(corpus: &Corpus, threshold: f64) -> Result<Vec<Chunk>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_doc: BTreeMap<&str, Vec<&Chunk>> = BTreeMap::new();
    for c in corpus.chunks() {
        let doc = c.doc_id.as_str();
        if !by_doc.contains_key(doc) {
            order.push(doc);
        }
        by_doc.entry(doc).or_default().push(c);
    }
    let mut out = Vec::new();
    for doc in order {
        let sentences = &by_doc[doc];
        let embeddings = sentences
            .iter()
            .map(|s| {
                s.embedding.clone().ok_or_else(|| entswap_core::Error::Validation {
                    record: s.id.clone(),
                    reason: "sentence without embedding".into(),
                })
            })
            .collect::<entswap_core::Result<Vec<_>>>()?;
        for (k, range) in semantic_chunk(&embeddings, threshold)?.into_iter().enumerate() {
            let part = &sentences[range];
            if part.len() == 1 {
                out.push(part[0].clone());
                continue;
            }
            let mut entities: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for s in part {
                for (cat, list) in &s.entities {
                    let slot = entities.entry(cat.clone()).or_default();
                    for e in list {
                        if !slot.contains(e) {
                            slot.push(e.clone());
                        }
                    }
                }
            }
            out.push(Chunk {
                id: format!("{doc}#{k}"),
                doc_id: doc.to_string(),
                text: part.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" "),
                entities,
                embedding: None,
            });
        }
    }
    Ok(out)
}

fn cmd_ingest(config: &RunConfig, args: IngestArgs) -> Result<()> {
    let input = need(args.input, &config.paths.input, "ingest input")?;
    let out = need(args.out, &config.paths.corpus, "corpus output")?;
    let report_path = args.report.or_else(|| config.paths.ingest_report.clone());
    let threshold = args.chunk_threshold.or(config.ingest.chunk_threshold);

    let mut corpus = formats::read_corpus(&input)?;
    let records_in = corpus.len();
    let provider = Provider::from_config(&config.provider, corpus.dim())?;

    let mut replacements = 0;
    let mut entities_dropped = 0;
    if !config.suppress.is_empty() {
        let rules = config.suppress.iter().map(Rule::from_spec).collect::<Result<Vec<_>>>()?;
        let s = suppress_direct_identifiers(&corpus, &rules)?;
        replacements += s.replacements;
        entities_dropped += s.entities_dropped;
        let chunks = invalidate_changed(&corpus, s.corpus.into_chunks());
        corpus = Corpus::new(corpus.categories().to_vec(), corpus.dim(), chunks)?;
    }
    let mut suppressed_categories = Vec::new();
    for (cat, role) in &config.roles {
        if *role != Role::C {
            continue;
        }
        let placeholder = format!("[{cat}]");
        let s = suppress_category(&corpus, cat, &placeholder)?;
        entities_dropped += s.entities_dropped;
        suppressed_categories.push(json!({"category": cat, "placeholder": placeholder, "chunks_changed": s.chunks_changed}));
        let chunks = invalidate_changed(&corpus, s.corpus.into_chunks());
        corpus = Corpus::new(corpus.categories().to_vec(), corpus.dim(), chunks)?;
    }

    let mut chunks = corpus.chunks().to_vec();
    let mut embedded = fill_embeddings(&mut chunks, &provider)?;
    if let Some(t) = threshold {
        let sentences = Corpus::new(corpus.categories().to_vec(), corpus.dim(), chunks)?;
        chunks = merge_sentences(&sentences, t)?;
        embedded += fill_embeddings(&mut chunks, &provider)?;
    }
    let corpus = Corpus::new(corpus.categories().to_vec(), corpus.dim(), chunks)?;
    formats::write_corpus(&out, &corpus)?;

    let counts: BTreeMap<String, usize> = corpus.entity_counts().into_iter().collect();
    let report = json!({
        "n": corpus.len(),
        "m": corpus.num_documents(),
        "p": corpus.categories().len(),
        "d": corpus.dim(),
        "records_in": records_in,
        "categories": corpus.categories(),
        "entity_counts": counts,
        "replacements": replacements,
        "entities_dropped": entities_dropped,
        "suppressed_categories": suppressed_categories,
        "embedded": embedded,
        "chunk_threshold": threshold,
    });
    if corpus.num_documents() < 2 {
        log::warn!("corpus has fewer than two documents; no swap is possible");
    }
    emit(report_path.as_deref(), &formats::json(&report))
}

fn cmd_fit(mut config: RunConfig, args: FitArgs) -> Result<()> {
    let input = need(args.input, &config.paths.corpus, "corpus")?;
    let out = need(args.out, &config.paths.model, "model output")?;
    let trace_path = args.trace.or_else(|| config.paths.trace.clone());
    let m = &mut config.mixture;
    m.family = args.family.unwrap_or(m.family);
    m.k = args.k.unwrap_or(m.k);
    m.eps = args.eps.unwrap_or(m.eps);
    m.tol = args.tol.unwrap_or(m.tol);
    m.max_iter = args.max_iter.unwrap_or(m.max_iter);
    config.validate()?;

    let corpus = formats::read_corpus(&input)?;
    let xs = corpus.embeddings()?;
    let fit = fit_em(&xs, &config.em_config())?;
    formats::write_string(&out, &formats::model_json(&fit.model))?;
    if let Some(p) = &trace_path {
        formats::write_string(p, &formats::trace_csv(&fit.trace))?;
    }
    let last = fit.trace.last().copied().unwrap_or(f64::NAN);
    log::info!(
        "fitted {} K={} in {} iterations, log-likelihood {last}",
        fit.model.family(),
        fit.model.k(),
        fit.trace.len().saturating_sub(1)
    );
    if !fit.converged {
        return Err(entswap_core::Error::NonConvergence(format!(
            "no convergence within {} iterations (final log-likelihood {last}, re-seeds per component {:?})",
            config.mixture.max_iter, fit.reseeds
        ))
        .into());
    }
    Ok(())
}

fn sweep_config(config: &RunConfig, args: &SweepArgs, corpus: &Corpus) -> SweepConfig {
    let s = &config.sweep;
    let mut eligible = args.eligible.clone().unwrap_or_else(|| s.eligible.clone());
    if eligible.is_empty() {
        eligible = corpus
            .categories()
            .iter()
            .filter(|c| !config.roles.contains_key(*c))
            .cloned()
            .collect();
    }
    SweepConfig {
        eligible,
        subset_size: args.subset_size.unwrap_or(s.subset_size),
        max_swaps: args.max_swaps.unwrap_or(s.max_swaps),
        n_pops: args.n_pops.clone().unwrap_or_else(|| s.n_pops.clone()),
        roles: config.roles.clone(),
        same_cluster: args.same_cluster.unwrap_or(s.same_cluster),
        seed: config.seed,
    }
}

fn cmd_sweep(config: RunConfig, args: SweepArgs) -> Result<()> {
    let input = need(args.input.clone(), &config.paths.corpus, "corpus")?;
    let model_path = need(args.model.clone(), &config.paths.model, "model")?;
    let out = need(args.out.clone(), &config.paths.sweep, "sweep output")?;
    let report_path = args.report.clone().or_else(|| config.paths.sweep_report.clone());

    let corpus = formats::read_corpus(&input)?;
    let model = formats::read_model(&model_path)?;
    let xs = corpus.embeddings()?;
    let memberships = assign(&model, &xs);
    let sweep = sweep_config(&config, &args, &corpus);
    validate_sweep(corpus.categories(), &sweep)?;
    let embedder = Memoized::new(Provider::from_config(&config.provider, corpus.dim())?);
    let pipeline = Pipeline::new(&corpus, &model, &memberships, &embedder)?;

    let js = subsets(&sweep.eligible, sweep.subset_size);
    let outcomes = thread_pool(&config)?.install(|| {
        js.into_par_iter()
            .map(|j| {
                let r = sweep_subset(&pipeline, &j, &sweep);
                (j, r)
            })
            .collect::<Vec<_>>()
    });
    let result = collect_sweep(outcomes);
    let rows: Vec<SweepRow> = result
        .points()
        .iter()
        .map(|p| SweepRow::new(p, model.family(), model.k(), model.eps()))
        .collect();
    formats::write_string(&out, &formats::sweep_csv(&rows)?)?;
    if let Some(p) = &report_path {
        formats::write_string(p, &formats::json(&result))?;
    }
    for s in &result.subsets {
        if s.exhausted {
            log::warn!("{}: ran out of swappable pairs", s.j.join("+"));
        }
    }
    if result.subsets.is_empty() {
        let reasons: Vec<String> = result.skipped.iter().map(|(j, r)| format!("{}: {r}", j.join("+"))).collect();
        return Err(AppError::Config(format!("every category subset failed: {}", reasons.join("; "))));
    }
    Ok(())
}

fn cmd_select(config: &RunConfig, args: SelectArgs) -> Result<()> {
    let sweep_path = need(args.sweep, &config.paths.sweep, "sweep CSV")?;
    let out = args.out.or_else(|| config.paths.release.clone());
    let rows = formats::read_sweep_csv(&sweep_path)?;
    let n_values: BTreeSet<u64> = rows.iter().map(|r| r.n_pop.to_bits()).collect();
    let n_pop = match args.n_pop.or(config.select.n_pop) {
        Some(n) => Some(n),
        None if n_values.len() > 1 => {
            return Err(AppError::Config("sweep has several population sizes; choose one with --n-pop".into()))
        }
        None => None,
    };
    let points: Vec<RiskUtilityPoint> = rows
        .iter()
        .filter(|r| n_pop.is_none_or(|n| r.n_pop == n))
        .map(SweepRow::point)
        .collect();
    let a = args.a.or(config.select.a);
    let c = args.c.or(config.select.c).unwrap_or(0.0);
    let cap = args.risk_cap.or(config.select.risk_cap);
    let chosen = match (cap, a) {
        (Some(cap), _) => best_under_risk_cap(&points, cap)
            .ok_or_else(|| AppError::Config(format!("no release with DR ≤ {cap}")))?,
        (None, Some(a)) => optimal_release(&frontier(&points), &TradeoffLine::new(a, c)?)?,
        (None, None) => return Err(AppError::Config("select needs -a or --risk-cap".into())),
    };
    let row = rows
        .iter()
        .find(|r| r.point().release_id == chosen.release_id)
        .expect("chosen point comes from the rows");
    let mut roles: BTreeMap<String, Role> = config.roles.clone();
    for cat in &chosen.j {
        roles.insert(cat.clone(), Role::S);
    }
    let spec = ReleaseSpec {
        release_id: chosen.release_id.clone(),
        j: chosen.j.clone(),
        n_pop: Some(chosen.n_pop),
        du: Some(chosen.du),
        dr: Some(chosen.dr),
        a: if cap.is_none() { a } else { None },
        c: if cap.is_none() { Some(c) } else { None },
        release: Release {
            swap_count: chosen.swap_count,
            roles,
            constraints: Constraints {
                cross_document: true,
                same_cluster: config.sweep.same_cluster,
            },
            seed: chosen.seed,
        },
    };
    log::info!(
        "selected {} (DU {}, DR {}, {} K={})",
        spec.release_id,
        chosen.du,
        chosen.dr,
        row.family,
        row.k
    );
    emit(out.as_deref(), &formats::json(&spec))
}

fn cmd_swap(config: &RunConfig, args: SwapArgs, explicit_seed: Option<u64>) -> Result<()> {
    let input = need(args.input, &config.paths.corpus, "corpus")?;
    let release_path = need(args.release, &config.paths.release, "release")?;
    let out = need(args.out, &config.paths.swapped, "swapped corpus output")?;
    let log_path = args.log.or_else(|| config.paths.swap_log.clone());
    let model_path = args.model.or_else(|| config.paths.model.clone());

    let corpus = formats::read_corpus(&input)?;
    let text = formats::read_to_string(&release_path)?;
    let mut spec: ReleaseSpec = serde_json::from_str(&text).map_err(|e| AppError::parse(&release_path, e))?;
    for cat in corpus.categories() {
        spec.release.roles.entry(cat.clone()).or_insert(Role::U);
    }
    if let Some(s) = explicit_seed {
        spec.release.seed = s;
    }
    let release = spec.release.clone();
    release.validate(corpus.categories())?;

    let model = model_path.as_deref().map(formats::read_model).transpose()?;
    let memberships = match &model {
        Some(m) => Some(assign(m, &corpus.embeddings()?)),
        None if release.constraints.same_cluster && release.swap_count > 0 => {
            return Err(AppError::Config("same-cluster release needs --model".into()))
        }
        None => None,
    };
    let run = sequential_swap(&corpus, memberships.as_ref(), &release)?;
    let state = run.last();
    formats::write_corpus(&out, &state.corpus)?;
    if let Some(p) = &log_path {
        formats::write_string(p, &formats::swap_log_jsonl(&state.records))?;
    }
    if run.exhausted {
        log::warn!(
            "ran out of swappable pairs: {} of {} swaps applied",
            state.swap_count(),
            release.swap_count
        );
    }

    let Some(report_path) = args.report else {
        return Ok(());
    };
    let mut report = json!({
        "release_id": spec.release_id,
        "requested": release.swap_count,
        "completed": state.swap_count(),
        "exhausted": run.exhausted,
        "swapped_chunks": state.swapped_chunk_ids.len(),
    });
    if let (Some(model), Some(memberships)) = (&model, &memberships) {
        let j = if spec.j.is_empty() {
            release.swapped_categories(corpus.categories())
        } else {
            spec.j.clone()
        };
        let n_pop = spec.n_pop.unwrap_or(config.sweep.n_pops[0]);
        let counts = frequency_counts(&marginalize(&build_table(&corpus), &j)?);
        let mle = fit_mle(&counts)?;
        let est = pop_unique_ratio(&mle.params, n_pop, counts.n(), counts.s1())?;
        let embedder = Provider::from_config(&config.provider, corpus.dim())?;
        let pipeline = Pipeline::new(&corpus, model, memberships, &embedder)?;
        let mc = monte_carlo_measures(&pipeline, &release, &j, est.p_hat, config.sweep.m)?;
        report["J"] = json!(j);
        report["N"] = json!(n_pop);
        report["p_hat"] = json!(est.p_hat);
        report["M"] = json!(config.sweep.m);
        report["DU"] = json!(mc.mean_du);
        report["DR"] = json!(mc.mean_dr);
        report["draws"] = json!(mc.draws);
    }
    formats::write_string(&report_path, &formats::json(&report))
}

fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

fn cmd_eval(config: &RunConfig, args: EvalArgs) -> Result<()> {
    let out = args.out.or_else(|| config.paths.eval_report.clone());
    let sets = formats::read_predictions(&args.predictions)?;
    let runs: BTreeSet<u32> = sets.keys().map(|(_, r)| *r).collect();
    let mut per_run = Vec::new();
    let mut pre_acc = Vec::new();
    let mut post_acc = Vec::new();
    let mut tables = Vec::new();
    for run in runs {
        let (Some(pre), Some(post)) = (sets.get(&(Condition::Pre, run)), sets.get(&(Condition::Post, run))) else {
            return Err(AppError::Config(format!("run {run} lacks a pre or post prediction set")));
        };
        let table = pair_predictions(pre, post)?;
        let (a_pre, a_post) = (accuracy(pre)?, accuracy(post)?);
        pre_acc.push(a_pre);
        post_acc.push(a_post);
        tables.push(table);
        per_run.push(json!({"run": run, "pre_accuracy": a_pre, "post_accuracy": a_post, "table": table}));
    }
    if tables.is_empty() {
        return Err(entswap_core::Error::Empty("prediction sets").into());
    }
    let total: PairedTable = tables.iter().copied().sum();
    let (pre_mean, pre_sd) = mean_sd(&pre_acc);
    let (post_mean, post_sd) = mean_sd(&post_acc);
    let statistics = match mcnemar(&total) {
        Ok(m) => json!(m),
        Err(e) => json!({"undefined": e.to_string()}),
    };
    let mut report = json!({
        "runs": per_run.len(),
        "pre_accuracy": {"mean": pre_mean},
        "post_accuracy": {"mean": post_mean},
        "table": total,
        "total": total.total(),
        "mcnemar": statistics,
        "per_run": per_run,
    });
    if let (Some(a), Some(b)) = (pre_sd, post_sd) {
        report["pre_accuracy"]["sd"] = json!(a);
        report["post_accuracy"]["sd"] = json!(b);
    }
    emit(out.as_deref(), &formats::json(&report))
}
