use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use latent_gfl_core::admm::{fit_from, select_lambda as run_selection, AdmmState, FitConfig, FitMonitor, IterationRecord, Phase, SelectConfig};
use latent_gfl_core::graph::{Graph, NodeSeries};
use latent_gfl_core::metrics::{evaluate as score, Scores};
use latent_gfl_core::pipeline::{cluster_points, run_gfl, run_kmeans_baseline, KChoice, PipelineConfig};
use latent_gfl_core::simgen::{run_scenario, GraphSpec, ScenarioSpec};
use serde::Serialize;

use crate::docs::{ConfigDoc, HistoryRow, MuDoc, RunManifest, ScenarioDoc, StateDoc};
use crate::error::{CliError, Result};
use crate::io;
use crate::{BatchArgs, ClusterArgs, DataArgs, EvaluateArgs, FitArgs, ScenarioArgs, SelectArgs, SimulateArgs};

/// Accumulates wall time per fit phase and logs each iteration to stderr.
#[derive(Default)]
struct Timer {
    current: Option<Instant>,
    totals: BTreeMap<String, f64>,
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Sampling => "sampling",
        Phase::Decoder => "decoder",
        Phase::Mu => "mu",
        Phase::Nu => "nu",
        Phase::Dual => "dual",
    }
}

impl Timer {
    fn add(&mut self, key: &str, secs: f64) {
        *self.totals.entry(key.to_string()).or_default() += secs;
    }
}

impl FitMonitor for Timer {
    fn phase_started(&mut self, _iteration: usize, _phase: Phase) {
        self.current = Some(Instant::now());
    }

    fn phase_finished(&mut self, _iteration: usize, phase: Phase) {
        if let Some(t) = self.current.take() {
            self.add(phase_name(phase), t.elapsed().as_secs_f64());
        }
    }

    fn iteration_finished(&mut self, r: &IterationRecord) {
        eprintln!(
            "iter {:>3}  residual {:.4e}  objective {:.4e}  max|w| {:.3e}",
            r.iteration, r.primal_residual, r.objective, r.max_abs_dual
        );
    }
}

fn load_data(data: &DataArgs, manifest: &mut RunManifest) -> Result<(Graph, NodeSeries)> {
    let series = io::read_series(&data.series, data.header)?;
    let graph = io::load_graph(&data.edges, data.header, series.n_nodes())?;
    manifest.input(&data.series)?;
    manifest.input(&data.edges)?;
    Ok((graph, series))
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::invalid(format!("grid must look like 12x12, got `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    Ok((r, c))
}

fn scenario_spec(args: &ScenarioArgs, seed: u64) -> Result<ScenarioSpec> {
    let mut spec = if let Some(path) = &args.spec {
        let doc: ScenarioDoc = io::read_json(path)?;
        ScenarioSpec::from(&doc).with_seed(seed)
    } else {
        let scenario = args.scenario.ok_or_else(|| CliError::invalid("either --scenario or --spec is required"))?;
        let grid = args.grid.as_deref().map(parse_grid).transpose()?;
        if grid.is_some() && scenario != 2 {
            return Err(CliError::invalid("--grid only applies to scenario 2"));
        }
        let n_nodes = match (scenario, grid, args.n_nodes) {
            (2, Some((r, c)), _) => r * c,
            (2, None, Some(n)) => n,
            (2, None, None) => 144,
            (_, _, Some(n)) => n,
            _ => 120,
        };
        match (grid, &args.sizes) {
            (None, None) => ScenarioSpec::preset(scenario, n_nodes, seed).map_err(|e| CliError::invalid(e.to_string()))?,
            _ => custom_spec(scenario, grid, args.sizes.as_deref(), args.n_nodes, seed)?,
        }
    };
    if let Some(n) = args.series_len {
        spec.n = n;
    }
    Ok(spec)
}

/// A preset's parameters with a different geometry.
fn custom_spec(scenario: u8, grid: Option<(usize, usize)>, sizes: Option<&[usize]>, n_nodes: Option<usize>, seed: u64) -> Result<ScenarioSpec> {
    let mut spec = match scenario {
        1 => ScenarioSpec::scenario1(120, seed),
        2 => ScenarioSpec::scenario2(12, seed),
        3 => ScenarioSpec::scenario3(120, seed),
        _ => return Err(CliError::invalid(format!("unknown scenario {scenario}"))),
    }
    .map_err(|e| CliError::invalid(e.to_string()))?;
    if let Some((rows, cols)) = grid {
        spec.graph = GraphSpec::Grid { rows, cols };
    }
    match sizes {
        Some(s) => {
            if s.len() != spec.means.len() {
                return Err(CliError::invalid(format!(
                    "scenario {scenario} has {} clusters, got {} sizes",
                    spec.means.len(),
                    s.len()
                )));
            }
            spec.cluster_sizes = s.to_vec();
        }
        None if scenario == 2 => {
            return Err(CliError::invalid("a custom grid needs --sizes for its four regions"));
        }
        None => {}
    }
    if n_nodes.is_some_and(|n| n != spec.n_nodes()) {
        return Err(CliError::invalid("--n-nodes disagrees with the sum of --sizes"));
    }
    Ok(spec)
}

fn n_clusters(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let t = Instant::now();
    let spec = scenario_spec(&args.scenario, args.seed)?;
    let sc = run_scenario(&spec).map_err(|e| CliError::invalid(e.to_string()))?;
    let out = &args.out;
    let mut manifest = RunManifest::new("simulate", args.seed);
    manifest.scenario = Some(ScenarioDoc::from(&spec));
    let paths = [out.join("edges.tsv"), out.join("series.csv"), out.join("labels.csv"), out.join("scenario.json")];
    io::write_edges(&paths[0], &sc.graph)?;
    io::write_series(&paths[1], &sc.series)?;
    io::write_labels(&paths[2], &sc.labels)?;
    io::write_json(&paths[3], &ScenarioDoc::from(&spec))?;
    for p in &paths {
        manifest.output(p)?;
    }
    manifest.detail("n_nodes", sc.graph.n_nodes());
    manifest.detail("n_edges", sc.graph.n_edges());
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    io::write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "{} nodes, {} edges, {} clusters, series length {}",
        sc.graph.n_nodes(),
        sc.graph.n_edges(),
        n_clusters(&sc.labels),
        sc.series.len()
    );
    Ok(())
}

fn write_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(HistoryRow::from(r)).map_err(|e| CliError::parse(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::parse(path, e))?;
    io::write_bytes(path, &bytes)
}

fn mu_doc(state: &AdmmState, lambda: f64) -> MuDoc {
    let d = state.latent_dim();
    MuDoc {
        n_nodes: state.mu.len() / d,
        latent_dim: d,
        lambda,
        mu: state.mu.chunks(d).map(<[f64]>::to_vec).collect(),
    }
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let t = Instant::now();
    let mut manifest = RunManifest::new("fit", args.model.seed);
    let (graph, series) = load_data(&args.data, &mut manifest)?;
    let (mut cfg, state) = match &args.resume {
        Some(path) => {
            let doc: StateDoc = io::read_json(path)?;
            manifest.input(path)?;
            let mut cfg = FitConfig::from(&doc.config);
            if let Some(total) = args.model.admm_iters {
                cfg.admm_iters = total;
            }
            (cfg, doc.state()?)
        }
        None => {
            let cfg = args.model.config();
            cfg.validate()?;
            let state = AdmmState::initial(&graph, series.len(), &cfg)?;
            (cfg, state)
        }
    };
    let total_iters = cfg.admm_iters;
    if state.iteration > total_iters {
        return Err(CliError::invalid(format!(
            "checkpoint already has {} iterations, more than the requested {total_iters}",
            state.iteration
        )));
    }
    cfg.admm_iters = total_iters - state.iteration;
    let mut timer = Timer::default();
    let result = fit_from(state, &graph, &series, &cfg, &mut timer)?;
    cfg.admm_iters = total_iters;

    let out = &args.out;
    let paths = [out.join("mu.json"), out.join("history.csv"), out.join("state.json")];
    io::write_json(&paths[0], &mu_doc(&result.state, cfg.lambda))?;
    write_history(&paths[1], &result.history)?;
    io::write_json(&paths[2], &StateDoc::new(&result.state, &cfg))?;
    for p in &paths {
        manifest.output(p)?;
    }
    manifest.config = Some(ConfigDoc::from(&cfg));
    manifest.timings = timer.totals;
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    if let Some(last) = result.history.last() {
        manifest.detail("final_primal_residual", last.primal_residual);
        manifest.detail("final_objective", last.objective);
    }
    io::write_json(&out.join("manifest.json"), &manifest)?;
    println!("fitted {} iterations, lambda {}", result.state.iteration, cfg.lambda);
    Ok(())
}

#[derive(Serialize)]
struct ScoreRow {
    lambda: f64,
    heldout_loglik: Option<f64>,
}

#[derive(Serialize)]
struct SelectionDoc {
    lambda: f64,
    scores: Vec<ScoreRow>,
    held_out: Vec<usize>,
}

pub fn select_lambda(args: &SelectArgs) -> Result<()> {
    let t = Instant::now();
    let mut manifest = RunManifest::new("select-lambda", args.model.seed);
    let (graph, series) = load_data(&args.data, &mut manifest)?;
    let cfg = args.model.config();
    let select = SelectConfig {
        holdout_frac: args.holdout,
        score_samples: args.score_samples,
    };
    let sel = run_selection(&graph, &series, &args.lambdas, &select, &cfg)?;
    let doc = SelectionDoc {
        lambda: sel.lambda,
        scores: sel
            .scores
            .iter()
            .map(|s| ScoreRow {
                lambda: s.lambda,
                heldout_loglik: s.heldout_loglik.is_finite().then_some(s.heldout_loglik),
            })
            .collect(),
        held_out: sel.held_out.clone(),
    };
    let path = args.out.join("selection.json");
    io::write_json(&path, &doc)?;
    manifest.output(&path)?;
    manifest.config = Some(ConfigDoc::from(&sel.config));
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    io::write_json(&args.out.join("manifest.json"), &manifest)?;
    for s in &sel.scores {
        println!("lambda {:<6} heldout_loglik {:.4}", s.lambda, s.heldout_loglik);
    }
    println!("selected lambda {}", sel.lambda);
    Ok(())
}

#[derive(Serialize)]
struct KRow {
    k: usize,
    silhouette: f64,
    inertia: f64,
}

#[derive(Serialize)]
struct ClustersDoc {
    k: usize,
    inertia: f64,
    silhouette: f64,
    centroids: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_table: Option<Vec<KRow>>,
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let t = Instant::now();
    let mut manifest = RunManifest::new("cluster", args.seed);
    let doc: MuDoc = io::read_json(&args.mu)?;
    manifest.input(&args.mu)?;
    let data = doc.flat()?;
    let n = doc.n_nodes;
    if n < 2 {
        return Err(CliError::invalid("clustering needs at least two nodes"));
    }
    let choice = match args.k {
        Some(k) => KChoice::Fixed(k),
        None => KChoice::Silhouette { k_max: args.k_max.min(n) },
    };
    let (res, table) = cluster_points(&data, doc.latent_dim, choice, args.restarts, args.seed)?;
    let out = &args.out;
    let labels_path = out.join("labels.csv");
    let clusters_path = out.join("clusters.json");
    io::write_labels(&labels_path, &res.labels)?;
    io::write_json(
        &clusters_path,
        &ClustersDoc {
            k: res.k,
            inertia: res.inertia,
            silhouette: res.silhouette,
            centroids: res.centroids.chunks(doc.latent_dim).map(<[f64]>::to_vec).collect(),
            k_table: table.map(|t| {
                t.iter()
                    .map(|s| KRow {
                        k: s.k,
                        silhouette: s.silhouette,
                        inertia: s.inertia,
                    })
                    .collect()
            }),
        },
    )?;
    manifest.output(&labels_path)?;
    manifest.output(&clusters_path)?;
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    io::write_json(&out.join("manifest.json"), &manifest)?;
    println!("k {} silhouette {:.4} inertia {:.4}", res.k, res.silhouette, res.inertia);
    Ok(())
}

const SCORE_HEADER: &str = "seed,scenario,method,nmi,ari,acc,hom,com,pur";

fn score_row(seed: u64, scenario: &str, method: &str, s: &Scores) -> String {
    format!(
        "{seed},{scenario},{method},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        s.nmi, s.ari, s.acc, s.hom, s.com, s.pur
    )
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| CliError::io(path, e))?;
    let text = if fresh { format!("{SCORE_HEADER}\n{line}\n") } else { format!("{line}\n") };
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = io::read_labels(&args.truth)?;
    let pred = io::read_labels(&args.pred)?;
    let s = score(&truth, &pred).map_err(|e| CliError::invalid(e.to_string()))?;
    let row = score_row(args.seed, &args.scenario, &args.method, &s);
    println!("{SCORE_HEADER}\n{row}");
    if let Some(path) = &args.out {
        append_line(path, &row)?;
    }
    Ok(())
}

/// Mean and sample standard deviation.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn summary_table(rows: &[(String, Scores)]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for (m, _) in rows {
        if !methods.contains(&m.as_str()) {
            methods.push(m);
        }
    }
    let metric = |s: &Scores, i: usize| [s.nmi, s.ari, s.acc, s.hom, s.com, s.pur][i];
    let mut out = format!("{:<8}", "method");
    for name in ["NMI", "ARI", "ACC", "HOM", "COM", "PUR"] {
        out += &format!(" {name:>16}");
    }
    out.push('\n');
    for m in methods {
        out += &format!("{m:<8}");
        let scores: Vec<&Scores> = rows.iter().filter(|(r, _)| r == m).map(|(_, s)| s).collect();
        for i in 0..6 {
            let xs: Vec<f64> = scores.iter().map(|s| 100.0 * metric(s, i)).collect();
            let (mean, sd) = mean_sd(&xs);
            out += &format!(" {:>16}", format!("{mean:.2}% ({sd:.2})"));
        }
        out.push('\n');
    }
    out
}

pub fn batch(args: &BatchArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(CliError::invalid("--reps must be positive"));
    }
    let t = Instant::now();
    let base_seed = args.model.seed;
    let base = scenario_spec(&args.scenario, base_seed)?;
    let mut manifest = RunManifest::new("batch", base_seed);
    manifest.scenario = Some(ScenarioDoc::from(&base));
    let out: PathBuf = args.out.clone();
    let runs_path = out.join("runs.csv");
    let mut lines = vec![format!("{SCORE_HEADER},lambda,k")];
    let mut rows: Vec<(String, Scores)> = Vec::new();
    let label = format!("{}", base.scenario);
    for r in 0..args.reps {
        let seed = base_seed + r as u64;
        let sc = run_scenario(&base.with_seed(seed)).map_err(|e| CliError::invalid(e.to_string()))?;
        let true_k = n_clusters(&sc.labels);
        let k = match args.select_k {
            Some(k_max) => KChoice::Silhouette {
                k_max: k_max.min(sc.graph.n_nodes()),
            },
            None => KChoice::Fixed(true_k),
        };
        let mut fit_cfg = args.model.config();
        fit_cfg.seed = seed;
        let mut pc = PipelineConfig::new(fit_cfg, args.lambdas.clone(), k);
        pc.select = SelectConfig {
            holdout_frac: args.holdout,
            score_samples: args.score_samples,
        };
        pc.kmeans_restarts = args.restarts;

        let rep_t = Instant::now();
        let base_run = run_kmeans_baseline(&sc.series, k, args.restarts, seed)?;
        let gfl = run_gfl(&sc.graph, &sc.series, &pc)?;
        for (method, labels, lambda, k) in [
            ("kmeans", &base_run.labels, f64::NAN, base_run.k),
            ("gfl", &gfl.clusters.labels, gfl.lambda, gfl.clusters.k),
        ] {
            let s = score(&sc.labels, labels).map_err(|e| CliError::invalid(e.to_string()))?;
            let lambda = if lambda.is_nan() { String::new() } else { lambda.to_string() };
            lines.push(format!("{},{lambda},{k}", score_row(seed, &label, method, &s)));
            rows.push((method.to_string(), s));
        }
        eprintln!("replication {} (seed {seed}) done in {:.1}s, lambda {}", r + 1, rep_t.elapsed().as_secs_f64(), gfl.lambda);
        manifest.timings.insert(format!("replication_{}", r + 1), rep_t.elapsed().as_secs_f64());
    }
    lines.push(String::new());
    io::write_bytes(&runs_path, lines.join("\n").as_bytes())?;
    let table = summary_table(&rows);
    let table_path = out.join("summary.txt");
    io::write_bytes(&table_path, table.as_bytes())?;
    manifest.output(&runs_path)?;
    manifest.output(&table_path)?;
    manifest.config = Some(ConfigDoc::from(&args.model.config()));
    manifest.detail("lambdas", &args.lambdas);
    manifest.detail("reps", args.reps);
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    io::write_json(&out.join("manifest.json"), &manifest)?;
    print!("{table}");
    Ok(())
}
