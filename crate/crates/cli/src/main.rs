use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use hybridclust::dissim::Measure;
use hybridclust::functional::{IntegrationContext, IntegrationMode};
use hybridclust::io::{self, Metadata, ModelFile, Table};
use hybridclust::merge::{elbow_curve, run_to_c, ClusterState, Dendrogram, Merger};
use hybridclust::mixture::{select_model, Criterion, EmConfig, MixtureDensity};
use hybridclust::properties::{self, PropertyKind};
use hybridclust::simlab::{self, ExperimentSettings, Family, ScenarioC, Size};
use hybridclust::{Dataset, Error};

#[derive(Parser, Debug)]
#[command(name = "hybridclust", version, about = "Gaussian mixture fitting and density-based hierarchical merging")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Base seed for EM starts, sampling and simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// auto, quadrature or importance.
    #[arg(long, global = true, default_value = "auto")]
    integration: String,
    /// Importance-sampling draws.
    #[arg(long, global = true, default_value_t = 100_000)]
    is_samples: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a Gaussian mixture with K chosen by BIC or AIC.
    Fit(FitArgs),
    /// Merge a fitted model's components down to a number of clusters.
    Merge(MergeArgs),
    /// Check the six properties for each dissimilarity measure.
    Properties(PropertiesArgs),
    /// Run repeated simulation experiments.
    Simulate(SimulateArgs),
    /// Misclassification report for a model against labelled data.
    Eval(EvalArgs),
    /// Old Faithful: K = 4 fit and the first SE and Bhat merges.
    DemoFaithful(DemoArgs),
}

#[derive(Args, Debug, Clone)]
struct EmArgs {
    /// EM restarts per K.
    #[arg(long, default_value_t = 10)]
    em_reps: usize,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig { reps: self.em_reps, max_iter: self.max_iter, ..EmConfig::default() }
    }
}

#[derive(Args, Debug, Clone)]
struct Format {
    /// Input layout: csv (header row), wdbc (UCI wdbc.data) or yeast (UCI yeast.data).
    #[arg(long, default_value = "csv")]
    format: String,
    /// 0-based feature indices for wdbc and yeast input (default: all).
    #[arg(long, value_delimiter = ',')]
    features: Vec<usize>,
    /// Yeast classes to keep (default: all).
    #[arg(long, value_delimiter = ',')]
    classes: Vec<String>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated feature column names (default: all).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[command(flatten)]
    format: Format,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    #[arg(long, default_value = "bic")]
    criterion: String,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Optional CSV of MAP component labels.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MergeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "klinf")]
    measure: String,
    #[arg(long)]
    clusters: usize,
    /// Output prefix: writes PREFIX.json, PREFIX.csv and PREFIX_elbow.csv.
    #[arg(long, default_value = "dendrogram")]
    out: PathBuf,
    /// Data to label with the final clusters (writes PREFIX_labels.csv).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[command(flatten)]
    format: Format,
}

#[derive(Args, Debug)]
struct PropertiesArgs {
    /// Restrict to one measure.
    #[arg(long)]
    measure: Option<String>,
    /// Include limit traces in the output.
    #[arg(long)]
    trace: bool,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "small")]
    size: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "bic")]
    criteria: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "se,wse,js,err,bhat,kldiv,klinf")]
    measures: Vec<String>,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 25)]
    kmax: usize,
    #[command(flatten)]
    em: EmArgs,
    /// Per-rep CSV; the summary goes to the same stem with `.summary.json`.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a trailing `label` column.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[command(flatten)]
    format: Format,
    #[arg(long, value_delimiter = ',', default_value = "se,wse,js,err,bhat,kldiv,klinf")]
    measures: Vec<String>,
    /// Final cluster count (default: number of classes).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[command(flatten)]
    em: EmArgs,
    /// Directory for the lagged data, model and report.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("HYBRIDCLUST_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

type Res<T> = hybridclust::Result<T>;

fn run(cli: Cli) -> Res<()> {
    let g = cli.global;
    match cli.command {
        Command::Fit(a) => fit(&g, a),
        Command::Merge(a) => merge(&g, a),
        Command::Properties(a) => properties_cmd(&g, a),
        Command::Simulate(a) => simulate(&g, a),
        Command::Eval(a) => eval(&g, a),
        Command::DemoFaithful(a) => demo(&g, a),
    }
}

fn integration(g: &Global) -> Res<IntegrationContext> {
    let mode: IntegrationMode = g.integration.parse()?;
    let ctx = IntegrationContext { mode, is_samples: g.is_samples, seed: g.seed, ..IntegrationContext::default() };
    ctx.validate()?;
    Ok(ctx)
}

fn settings_json(g: &Global, extra: serde_json::Value) -> serde_json::Value {
    let mut v = json!({ "integration": g.integration, "is_samples": g.is_samples });
    if let (Some(base), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        base.extend(more);
    }
    v
}

fn parse_measures(names: &[String]) -> Res<Vec<Measure>> {
    names.iter().map(|n| n.trim().to_ascii_lowercase().parse()).collect()
}

fn load_table(path: &Path, columns: &[String], format: &Format) -> Res<(Table, Dataset)> {
    let t = match format.format.as_str() {
        "csv" => io::read_csv_path(path)?,
        "wdbc" => {
            let f = if format.features.is_empty() { (0..30).collect() } else { format.features.clone() };
            io::read_wdbc_path(path, &f)?
        }
        "yeast" => {
            let f = if format.features.is_empty() { (0..8).collect() } else { format.features.clone() };
            let classes: Vec<&str> = format.classes.iter().map(String::as_str).collect();
            io::read_yeast(std::fs::File::open(path)?, &f, &classes)?
        }
        other => return Err(Error::InvalidParameter(format!("unknown input format `{other}`"))),
    };
    let data = if columns.is_empty() {
        t.data.clone()
    } else {
        let idx = columns
            .iter()
            .map(|c| {
                t.columns
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::InvalidParameter(format!("no column named `{c}`")))
            })
            .collect::<Res<Vec<_>>>()?;
        t.data.select_columns(&idx)?
    };
    Ok((t, data))
}

/// Writes via a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Res<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Res<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn labels_csv(labels: &[usize]) -> String {
    let mut s = String::from("label\n");
    for l in labels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

fn fit(g: &Global, a: FitArgs) -> Res<()> {
    let (_, data) = load_table(&a.input, &a.columns, &a.format)?;
    let criterion: Criterion = a.criterion.parse()?;
    let model = select_model(&data, a.kmin, a.kmax, criterion, g.seed, &a.em.config())?;
    let meta = Metadata::new(
        g.seed,
        settings_json(
            g,
            json!({
                "command": "fit", "input": a.input, "columns": a.columns, "kmin": a.kmin, "kmax": a.kmax,
                "criterion": criterion.name(), "em_reps": a.em.em_reps, "max_iter": a.em.max_iter,
                "format": a.format.format, "features": a.format.features, "classes": a.format.classes,
            }),
        ),
    );
    write_atomic(&a.out, &to_json(&ModelFile::from_fitted(&model, meta))?)?;
    if let Some(p) = &a.labels_out {
        write_atomic(p, &labels_csv(&model.map_labels))?;
    }
    println!("K = {} ({} = {:.4}, logL = {:.4})", model.k(), criterion, model.score(criterion), model.log_likelihood);
    println!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct DendrogramFile<'a> {
    schema: &'static str,
    #[serde(flatten)]
    dendrogram: &'a Dendrogram,
    final_clusters: Vec<Vec<usize>>,
    metadata: Metadata,
}

fn merge_model(mix: &MixtureDensity, measure: Measure, c: usize, ctx: IntegrationContext) -> Res<(ClusterState, Dendrogram)> {
    let merger = Merger::new(ctx, mix)?;
    run_to_c(&ClusterState::from_mixture(mix), measure, c, &merger)
}

fn merge(g: &Global, a: MergeArgs) -> Res<()> {
    let file = ModelFile::load(&a.model)?;
    let mix = file.to_mixture()?;
    let measure: Measure = a.measure.to_ascii_lowercase().parse()?;
    let (state, dendro) = merge_model(&mix, measure, a.clusters, integration(g)?)?;
    let meta = Metadata::new(
        g.seed,
        settings_json(g, json!({"command": "merge", "model": a.model, "measure": measure.name(), "clusters": a.clusters})),
    );
    let out = DendrogramFile {
        schema: "hybridclust.dendrogram/1",
        dendrogram: &dendro,
        final_clusters: state.subclusters().iter().map(|s| s.members.iter().copied().collect()).collect(),
        metadata: meta,
    };
    write_atomic(&with_suffix(&a.out, ".json"), &to_json(&out)?)?;
    write_atomic(&with_suffix(&a.out, ".csv"), &dendro.to_csv())?;
    if !dendro.records.is_empty() {
        let mut elbow = String::from("remaining,normalized_value\n");
        for (r, v) in elbow_curve(&dendro)? {
            elbow.push_str(&format!("{r},{v:e}\n"));
        }
        write_atomic(&with_suffix(&a.out, "_elbow.csv"), &elbow)?;
    }
    for r in &dendro.records {
        println!("step {}: merge {} + {} -> {} ({} = {:.6e}, {} left)", r.step, r.merged.0, r.merged.1, r.new_id, measure.label(), r.value, r.remaining);
    }
    if dendro.records.is_empty() {
        println!("model already has {} components; nothing to merge", mix.len());
    }
    if let Some(input) = &a.input {
        let (_, data) = load_table(input, &a.columns, &a.format)?;
        let comp = mix.map_assign(&data)?;
        write_atomic(&with_suffix(&a.out, "_labels.csv"), &labels_csv(&state.relabel(&comp)?))?;
    }
    Ok(())
}

fn properties_cmd(g: &Global, a: PropertiesArgs) -> Res<()> {
    let measures = match &a.measure {
        Some(m) => vec![m.to_ascii_lowercase().parse()?],
        None => Measure::ALL.to_vec(),
    };
    let mut ctx = integration(g)?;
    if ctx.mode == IntegrationMode::Auto {
        ctx.mode = IntegrationMode::Quadrature;
    }
    let mut table = properties::table_for(&measures, &ctx);
    print!("{}", table.render());
    if !a.trace {
        table.rows.iter_mut().flatten().for_each(|v| v.limit_trace.clear());
    } else {
        for v in table.rows.iter().flatten() {
            println!("{} {}:", v.measure, v.property.name());
            for t in &v.limit_trace {
                println!("  {} {:e} {:.10e}", t.series, t.parameter, t.value);
            }
        }
    }
    if let Some(path) = &a.json {
        let body = json!({
            "schema": "hybridclust.properties/1",
            "properties": PropertyKind::ALL.iter().map(|p| p.name()).collect::<Vec<_>>(),
            "measures": table.rows.iter().filter_map(|r| r.first().map(|v| v.measure)).collect::<Vec<_>>(),
            "matrix": table.matrix(),
            "verdicts": table.rows,
            "metadata": Metadata::new(g.seed, settings_json(g, json!({"command": "properties", "trace": a.trace}))),
        });
        write_atomic(path, &to_json(&body)?)?;
    }
    Ok(())
}

fn simulate(g: &Global, a: SimulateArgs) -> Res<()> {
    let family: Family = a.dist.parse()?;
    let size: Size = a.size.parse()?;
    let scn = ScenarioC::new(family, a.dim, size)?;
    let measures = parse_measures(&a.measures)?;
    let criteria = a.criteria.iter().map(|c| c.parse()).collect::<Res<Vec<Criterion>>>()?;
    let mut ctx = integration(g)?;
    if ctx.mode == IntegrationMode::Auto {
        ctx.mode = IntegrationMode::Importance;
    }
    let settings = ExperimentSettings { em: a.em.config(), k_min: a.kmin, k_max: a.kmax, integration: ctx };
    let result = simlab::run_experiment(&scn, &measures, &criteria, a.reps, a.clusters, g.seed, &settings)?;
    write_atomic(&a.out, &result.rows_csv())?;
    let meta = Metadata::new(
        g.seed,
        settings_json(
            g,
            json!({
                "command": "simulate", "dist": family.name(), "dim": a.dim, "size": size.name(), "reps": a.reps,
                "clusters": a.clusters, "kmin": a.kmin, "kmax": a.kmax, "em_reps": a.em.em_reps,
                "max_iter": a.em.max_iter, "integration_resolved": format!("{:?}", ctx.mode).to_ascii_lowercase(),
            }),
        ),
    );
    let summary = json!({
        "schema": "hybridclust.simulation/1",
        "summaries": result.summaries,
        "failures": result.failures,
        "metadata": meta,
    });
    write_atomic(&with_suffix(&a.out, ".summary.json"), &to_json(&summary)?)?;
    println!("{:<6} {:<7} {:>12} {:>10} {:>5} {:>5}", "crit", "measure", "mean_excess", "ci95", "reps", "fail");
    for s in &result.summaries {
        println!(
            "{:<6} {:<7} {:>12.5} {:>10.5} {:>5} {:>5}",
            s.criterion, s.measure, s.mean_excess, s.ci_half_width, s.reps, s.failures
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    measure: &'static str,
    misclass: f64,
    min_misclass: f64,
    excess: f64,
}

fn eval(g: &Global, a: EvalArgs) -> Res<()> {
    let file = ModelFile::load(&a.model)?;
    let mix = file.to_mixture()?;
    let (table, data) = load_table(&a.input, &a.columns, &a.format)?;
    let (truth, classes) =
        table.label_indices().ok_or_else(|| Error::Labels("input needs a trailing `label` column".into()))?;
    let c = a.clusters.unwrap_or(classes.len());
    let noise = vec![false; truth.len()];
    let comp = mix.map_assign(&data)?;
    let min_mis = simlab::min_misclassification(&comp, mix.len(), &truth, &noise)?;
    let ctx = integration(g)?;
    let merger = Merger::new(ctx, &mix)?;
    let start = ClusterState::from_mixture(&mix);
    let mut rows = Vec::new();
    for m in parse_measures(&a.measures)? {
        let (end, _) = run_to_c(&start, m, c, &merger)?;
        let mis = simlab::misclassification_indexed(&end.relabel(&comp)?, c, &truth, &noise)?;
        rows.push(EvalRow { measure: m.name(), misclass: mis, min_misclass: min_mis, excess: mis - min_mis });
    }
    println!("K = {}, C = {c}, minimum misclassification = {min_mis:.5}", mix.len());
    for r in &rows {
        println!("{:<7} misclass {:.5} excess {:.5}", r.measure, r.misclass, r.excess);
    }
    if let Some(out) = &a.out {
        let body = json!({
            "schema": "hybridclust.eval/1",
            "K": mix.len(),
            "clusters": c,
            "classes": classes,
            "results": rows,
            "metadata": Metadata::new(g.seed, settings_json(g, json!({"command": "eval", "model": a.model, "input": a.input, "format": a.format.format, "features": a.format.features}))),
        });
        write_atomic(out, &to_json(&body)?)?;
    }
    Ok(())
}

fn demo(g: &Global, a: DemoArgs) -> Res<()> {
    let faithful = io::faithful();
    let data = io::lagged_pairs(&faithful.data, 0)?;
    let model = select_model(&data, a.k, a.k, Criterion::Bic, g.seed, &a.em.config())?;
    let mut ctx = integration(g)?;
    if ctx.mode == IntegrationMode::Auto {
        ctx.mode = IntegrationMode::Quadrature;
    }
    let merger = Merger::new(ctx, &model.mixture)?;
    let start = ClusterState::from_mixture(&model.mixture);
    let (_, se) = run_to_c(&start, Measure::Se, a.k - 1, &merger)?;
    let (_, bhat) = run_to_c(&start, Measure::Bhat, a.k - 1, &merger)?;
    let pair = |d: &Dendrogram| d.records[0].merged;
    let (se_pair, bhat_pair) = (pair(&se), pair(&bhat));
    println!("Old Faithful lagged eruption lengths: {} pairs, K = {}", data.n_rows(), model.k());
    for (i, (w, c)) in model.mixture.terms().enumerate() {
        println!("  component {i}: weight {w:.3}, mean ({:.3}, {:.3})", c.mean()[0], c.mean()[1]);
    }
    println!("first SE merge:   {} + {} ({:.6e})", se_pair.0, se_pair.1, se.records[0].value);
    println!("first Bhat merge: {} + {} ({:.6e})", bhat_pair.0, bhat_pair.1, bhat.records[0].value);
    println!("first merges {}", if se_pair != bhat_pair { "differ" } else { "agree" });
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("previous,current\n");
        for r in data.rows() {
            csv.push_str(&format!("{},{}\n", r[0], r[1]));
        }
        write_atomic(&dir.join("faithful_lagged.csv"), &csv)?;
        let meta = Metadata::new(g.seed, settings_json(g, json!({"command": "demo-faithful", "k": a.k})));
        write_atomic(&dir.join("faithful_model.json"), &to_json(&ModelFile::from_fitted(&model, meta.clone()))?)?;
        let report = json!({
            "schema": "hybridclust.demo/1",
            "K": model.k(),
            "se_first_merge": [se_pair.0, se_pair.1],
            "se_value": se.records[0].value,
            "bhat_first_merge": [bhat_pair.0, bhat_pair.1],
            "bhat_value": bhat.records[0].value,
            "differ": se_pair != bhat_pair,
            "metadata": meta,
        });
        write_atomic(&dir.join("faithful_demo.json"), &to_json(&report)?)?;
    }
    Ok(())
}
