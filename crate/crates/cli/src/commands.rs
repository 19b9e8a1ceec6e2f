use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use contagion_core::graph::{build_graph_with, RateDenominator};
use contagion_core::ingest::{parse_events, split_periods, split_train_test, write_events, NodeTable, PeriodMode};
use contagion_core::predict::{all_predictors, evaluate_prediction};
use contagion_core::sim::{self, draw_ground_truth, generate_corpus, remove_events, substream, GroundTruth};
use contagion_core::solver::{jacobian_spectral_radius, solve, SpectralOptions};
use contagion_core::stats::{
    correlation, null_pvalue_rewire, null_pvalue_weights, stylized_facts, NullTest, Statistic,
};
use contagion_core::superspread::{precision_at, realized_sizes, seed_score, Aggregate};
use contagion_core::{
    CascadeStore, CorrMethod, Delimiter, Digraph, DiffusionGraph, Direction, EvalReport, ScoreVector, SeedMetric,
    SimConfig, SolverConfig,
};
use serde_json::json;

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::CliError;

pub fn dispatch(cfg: RunConfig) -> Result<(), CliError> {
    match cfg.subcommand.as_str() {
        "ingest" => ingest(cfg),
        "simulate" => simulate(cfg),
        "solve" => solve_cmd(cfg),
        "predict" => predict(cfg),
        "superspread" => superspread(cfg),
        "stats" => stats(cfg),
        "nulltest" => nulltest(cfg),
        "pipeline" => pipeline(cfg),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

fn solver_config(cfg: &RunConfig) -> Result<SolverConfig, CliError> {
    let s = SolverConfig {
        initial: cfg.get("initial")?,
        damping: cfg.get("damping")?,
        tolerance: cfg.get("tolerance")?,
        max_iter: cfg.get("max-iter")?,
    };
    s.validate()?;
    Ok(s)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn load_events(cfg: &RunConfig) -> Result<(CascadeStore, contagion_core::ParseReport), CliError> {
    let path = cfg.path("events")?;
    let delimiter = match cfg.get::<String>("delimiter")?.as_str() {
        "auto" => Delimiter::from_path(&path),
        "comma" => Delimiter::Comma,
        "tab" => Delimiter::Tab,
        other => return Err(CliError::config(format!("unknown delimiter `{other}`"))),
    };
    Ok(parse_events(open(&path)?, delimiter)?)
}

fn diffusion_graph(cfg: &RunConfig, store: &CascadeStore) -> Result<DiffusionGraph, CliError> {
    let g = build_graph_with(store, cfg.get::<RateDenominator>("rate-denominator")?)?;
    let min: u32 = cfg.get("min-count")?;
    Ok(if min > 1 { g.filter_edges_min_count(min)? } else { g })
}

fn periods(cfg: &RunConfig, store: &CascadeStore) -> Result<Vec<CascadeStore>, CliError> {
    Ok(split_periods(store, cfg.get("periods")?, cfg.get::<PeriodMode>("period-mode")?)?)
}

fn solve_report(scores: &ScoreVector) -> serde_json::Value {
    json!({
        "iterations": scores.iterations,
        "converged": scores.converged,
        "oscillating": scores.oscillating,
        "final_residual": scores.final_residual,
        "excluded_influence": scores.influence_excluded.iter().filter(|&&x| x).count(),
        "excluded_susceptibility": scores.susceptibility_excluded.iter().filter(|&&x| x).count(),
        "warnings": scores.warnings,
    })
}

fn reports(out: &mut Artifacts, stem: &str, reports: &[EvalReport]) -> Result<(), CliError> {
    if out.wants_json() {
        out.write_json(&format!("{stem}.json"), &json!({ "reports": reports }))?;
    }
    if out.wants_csv() {
        out.write_csv(&format!("{stem}.csv"), |w| {
            for (k, r) in reports.iter().enumerate() {
                r.write_csv(&mut *w, k == 0)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn ingest(cfg: RunConfig) -> Result<(), CliError> {
    let (store, report) = load_events(&cfg)?;
    let g = diffusion_graph(&cfg, &store)?;
    let mut out = Artifacts::create(&cfg)?;
    out.write_json(
        "ingest.json",
        &json!({ "parse": report, "store": store.summary(), "n_edges": g.n_edges() }),
    )?;
    out.write_csv("edges.csv", |w| g.write_edges(store.nodes(), w))?;
    out.write_csv("nodes.csv", |w| g.write_nodes(store.nodes(), w))?;
    Ok(())
}

struct Simulated {
    topology: Digraph,
    truth: GroundTruth,
    store: CascadeStore,
}

fn run_simulation(cfg: &RunConfig, seed: u64) -> Result<Simulated, CliError> {
    let n: usize = cfg.get("nodes")?;
    let topology = Digraph::erdos_renyi(n, cfg.get("mean-degree")?, &mut substream(seed, sim::TOPOLOGY_STREAM))?;
    let truth = draw_ground_truth(n, seed)?;
    let sim_cfg = SimConfig {
        cascades_per_seed: cfg.get("cascades-per-seed")?,
        rng_seed: seed,
        max_steps: cfg.opt("max-steps")?.unwrap_or(usize::MAX),
    };
    let mut store = generate_corpus(&topology, &truth, &sim_cfg)?;
    let remove: f64 = cfg.get("remove-fraction")?;
    if remove > 0.0 {
        store = remove_events(&store, remove, seed)?;
    }
    Ok(Simulated { topology, truth, store })
}

fn write_simulation(out: &mut Artifacts, s: &Simulated) -> Result<(), CliError> {
    out.write_csv("events.csv", |w| write_events(&s.store, w, Delimiter::Comma))?;
    out.write_json(
        "truth.json",
        &json!({
            "rng_seed": s.truth.rng_seed,
            "node_ids": s.store.nodes().ids(),
            "influence": s.truth.influence,
            "susceptibility": s.truth.susceptibility,
        }),
    )?;
    let ids = s.store.nodes().ids();
    out.write_csv("topology.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["src", "dst", "p"])?;
        for (i, j) in s.topology.edges() {
            csv.write_record([&ids[i as usize], &ids[j as usize], &s.truth.probability(i, j).to_string()])?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn simulate(mut cfg: RunConfig) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let s = run_simulation(&cfg, seed)?;
    let mut out = Artifacts::create(&cfg)?;
    write_simulation(&mut out, &s)?;
    out.write_json("simulate.json", &json!({ "store": s.store.summary(), "n_edges": s.topology.n_edges() }))
}

/// Weighted edge list with `src,dst,omega` columns.
fn load_edges(path: &Path) -> Result<(DiffusionGraph, Arc<NodeTable>), CliError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?);
    let headers = reader.headers().map_err(contagion_core::Error::from)?.clone();
    let col = |name: &'static str| {
        headers.iter().position(|h| h.trim() == name).ok_or(contagion_core::Error::MissingColumn(name))
    };
    let (src, dst, w) = (col("src")?, col("dst")?, col("omega")?);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(contagion_core::Error::from)?;
        let weight: f64 = rec[w]
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("bad omega `{}` in {}", &rec[w], path.display())))?;
        rows.push((rec[src].trim().to_owned(), rec[dst].trim().to_owned(), weight));
    }
    let mut ids: Vec<String> = rows.iter().flat_map(|(a, b, _)| [a.clone(), b.clone()]).collect();
    ids.sort();
    ids.dedup();
    let nodes = Arc::new(NodeTable::from_sorted(ids)?);
    let edges: Vec<_> = rows
        .iter()
        .map(|(a, b, w)| (nodes.get(a).expect("interned"), nodes.get(b).expect("interned"), *w))
        .collect();
    Ok((DiffusionGraph::from_weighted_edges(nodes.len(), &edges)?, nodes))
}

fn solve_cmd(cfg: RunConfig) -> Result<(), CliError> {
    let solver = solver_config(&cfg)?;
    let (g, nodes) = match (cfg.opt::<String>("edges")?, cfg.opt::<String>("events")?) {
        (Some(p), None) => load_edges(Path::new(&p))?,
        (None, Some(_)) => {
            let (store, _) = load_events(&cfg)?;
            (diffusion_graph(&cfg, &store)?, store.node_table())
        }
        _ => return Err(CliError::config("give exactly one of --events and --edges")),
    };
    let scores = solve(&g, &solver)?;
    let mut report = solve_report(&scores);
    if cfg.get::<bool>("spectral")? && !scores.fully_excluded().count().eq(&g.n_nodes()) && g.n_edges() > 0 {
        let opts = SpectralOptions { damping: cfg.get("spectral-damping")?, ..Default::default() };
        report["spectrum"] = serde_json::to_value(jacobian_spectral_radius(&g, &scores, &opts)?)
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let mut out = Artifacts::create(&cfg)?;
    out.write_csv("scores.csv", |w| scores.write_csv(nodes.ids(), w))?;
    out.write_json("solve.json", &report)
}

fn prediction_reports(
    train: &DiffusionGraph,
    test: &DiffusionGraph,
    solver: &SolverConfig,
    direction: Direction,
    period: usize,
) -> Result<Vec<EvalReport>, CliError> {
    let scores = solve(train, solver)?;
    let mut out = Vec::new();
    for pred in all_predictors(train, &scores, direction)? {
        for method in [CorrMethod::Pearson, CorrMethod::Spearman] {
            let mut r = evaluate_prediction(&pred, test, method)?;
            r.meta("period", period);
            out.push(r);
        }
    }
    Ok(out)
}

fn predict(cfg: RunConfig) -> Result<(), CliError> {
    let solver = solver_config(&cfg)?;
    let (store, _) = load_events(&cfg)?;
    let parts = periods(&cfg, &store)?;
    let direction: Direction = cfg.get("direction")?;
    let mut all = Vec::new();
    for t in 0..parts.len() - 1 {
        let train = diffusion_graph(&cfg, &parts[t])?;
        let test = build_graph_with(&parts[t + 1], cfg.get("rate-denominator")?)?;
        match prediction_reports(&train, &test, &solver, direction, t) {
            Ok(r) => all.extend(r),
            Err(e) => log::warn!("period {t} skipped: {e}"),
        }
    }
    if all.is_empty() {
        return Err(CliError::Core(contagion_core::Error::Empty("no period could be evaluated".into())));
    }
    let mut out = Artifacts::create(&cfg)?;
    reports(&mut out, "predict", &all)
}

fn superspread_report(
    g: &DiffusionGraph,
    scores: &ScoreVector,
    test: &CascadeStore,
    fraction: f64,
    aggregate: Aggregate,
) -> Result<(EvalReport, Vec<Vec<f64>>, BTreeMap<u32, f64>), CliError> {
    let sizes = realized_sizes(test, aggregate);
    let mut report = EvalReport::new("superspread");
    report.meta("fraction", fraction).meta("n_seeds", sizes.len());
    let mut columns = Vec::new();
    for m in SeedMetric::ALL {
        let ranking = seed_score(m, g, scores)?;
        report.push(format!("precision({m})"), precision_at(&ranking, &sizes, fraction)?, sizes.len());
        columns.push(ranking.scores);
    }
    Ok((report, columns, sizes))
}

fn superspread(cfg: RunConfig) -> Result<(), CliError> {
    let solver = solver_config(&cfg)?;
    let (store, _) = load_events(&cfg)?;
    let (train, test) = split_train_test(&store, cfg.get("train-fraction")?)?;
    let g = diffusion_graph(&cfg, &train)?;
    let scores = solve(&g, &solver)?;
    let (report, columns, sizes) =
        superspread_report(&g, &scores, &test, cfg.get("fraction")?, cfg.get("aggregate")?)?;
    let mut out = Artifacts::create(&cfg)?;
    reports(&mut out, "superspread", std::slice::from_ref(&report))?;
    let ids = store.nodes().ids();
    out.write_csv("seeds.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["node_id".to_owned()];
        header.extend(SeedMetric::ALL.iter().map(|m| m.to_string()));
        header.push("realized_size".into());
        csv.write_record(&header)?;
        for (i, id) in ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(columns.iter().map(|c| c[i].to_string()));
            row.push(sizes.get(&(i as u32)).map(|s| s.to_string()).unwrap_or_default());
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

fn period_stats(g: &DiffusionGraph, scores: &ScoreVector, period: usize, quantile: f64) -> Vec<EvalReport> {
    let mut corr = EvalReport::new("correlations");
    corr.meta("period", period);
    for stat in Statistic::node_level().into_iter().chain(Statistic::assortativity()) {
        match stat.evaluate(g.topology(), scores) {
            Ok(c) if !c.degenerate => {
                corr.push(stat.to_string(), c.value, c.n);
            }
            Ok(_) => log::warn!("period {period}: {stat} is degenerate"),
            Err(e) => log::warn!("period {period}: {stat}: {e}"),
        }
    }
    let mut out = vec![corr];
    match stylized_facts(scores, g.topology(), quantile) {
        Ok(mut facts) => {
            facts.meta("period", period);
            out.push(facts);
        }
        Err(e) => log::warn!("period {period}: stylized facts skipped: {e}"),
    }
    out
}

fn stats(cfg: RunConfig) -> Result<(), CliError> {
    let solver = solver_config(&cfg)?;
    let quantile: f64 = cfg.get("quantile")?;
    let (store, _) = load_events(&cfg)?;
    let mut all = Vec::new();
    for (t, part) in periods(&cfg, &store)?.iter().enumerate() {
        let g = build_graph_with(part, cfg.get("rate-denominator")?)?;
        let scores = solve(&g, &solver)?;
        all.extend(period_stats(&g, &scores, t, quantile));
    }
    let mut out = Artifacts::create(&cfg)?;
    reports(&mut out, "stats", &all)
}

fn nulltest(mut cfg: RunConfig) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let solver = solver_config(&cfg)?;
    let n_real: usize = cfg.get("realizations")?;
    let (weights, rewire) = match cfg.get::<String>("model")?.as_str() {
        "weights" => (true, false),
        "rewire" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::config(format!("unknown null model `{other}`"))),
    };
    let statistics: Vec<Statistic> = match cfg.opt::<String>("statistics")? {
        Some(list) => list.split(';').map(|s| s.trim().parse()).collect::<Result<_, _>>()?,
        None => Statistic::node_level().into_iter().chain(Statistic::assortativity()).collect(),
    };
    let (store, _) = load_events(&cfg)?;
    let g = build_graph_with(&store, cfg.get("rate-denominator")?)?;
    let scores = solve(&g, &solver)?;
    let mut tests: Vec<(&str, NullTest)> = Vec::new();
    for stat in &statistics {
        if weights {
            tests.push(("weights", null_pvalue_weights(&g, stat, n_real, seed, &solver)?));
        }
        if rewire {
            tests.push(("rewire", null_pvalue_rewire(g.topology(), &scores, stat, n_real, seed)?));
        }
    }
    let mut out = Artifacts::create(&cfg)?;
    if out.wants_json() {
        let list: Vec<_> = tests.iter().map(|(m, t)| json!({ "model": m, "test": t })).collect();
        out.write_json("nulltest.json", &json!({ "tests": list }))?;
    }
    if out.wants_csv() {
        out.write_csv("nulltest.csv", |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["statistic", "model", "original", "p_greater", "p_less", "n_valid", "n_dropped"])?;
            for (m, t) in &tests {
                csv.write_record([
                    t.statistic.clone(),
                    m.to_string(),
                    t.original.to_string(),
                    t.p_greater.to_string(),
                    t.p_less.to_string(),
                    t.realizations.len().to_string(),
                    t.n_dropped.to_string(),
                ])?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    correlation(a, b, CorrMethod::Pearson, false).map(|c| c.value).unwrap_or(f64::NAN)
}

fn pipeline(mut cfg: RunConfig) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let solver = solver_config(&cfg)?;
    let sim = run_simulation(&cfg, seed)?;
    let mut out = Artifacts::create(&cfg)?;
    write_simulation(&mut out, &sim)?;

    // Re-read the written log so the run goes through the ingest path.
    let events_path = out.dir().join("events.csv");
    let (store, _) = parse_events(open(&events_path)?, Delimiter::Comma)?;
    let denominator: RateDenominator = cfg.get("rate-denominator")?;
    let g = build_graph_with(&store, denominator)?;
    let scores = solve(&g, &solver)?;
    out.write_csv("scores.csv", |w| scores.write_csv(store.nodes().ids(), w))?;

    let topo = &sim.topology;
    let truth = &sim.truth;
    let f: Vec<f64> = (0..topo.n_nodes() as u32)
        .map(|i| topo.out_neighbors(i).iter().map(|&j| truth.probability(i, j)).sum())
        .collect();
    let mut gt = vec![0.0; topo.n_nodes()];
    for (i, j) in topo.edges() {
        gt[j as usize] += truth.probability(i, j);
    }
    let k_out: Vec<f64> = topo.out_degrees().into_iter().map(|k| k as f64).collect();
    let k_in: Vec<f64> = topo.in_degrees().into_iter().map(|k| k as f64).collect();
    let (ih, sh) = (&scores.influence, &scores.susceptibility);
    let row = [
        ("n_nodes", topo.n_nodes() as f64),
        ("n_edges", g.n_edges() as f64),
        ("iterations", scores.iterations as f64),
        ("r(I_hat,I)", pearson(ih, &truth.influence)),
        ("r(I_hat,f)", pearson(ih, &f)),
        ("r(I_hat,k_out)", pearson(ih, &k_out)),
        ("r(S_hat,S)", pearson(sh, &truth.susceptibility)),
        ("r(S_hat,g)", pearson(sh, &gt)),
        ("r(S_hat,k_in)", pearson(sh, &k_in)),
    ];
    out.write_csv("reconstruction.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(row.iter().map(|(k, _)| *k))?;
        csv.write_record(row.iter().map(|(_, v)| v.to_string()))?;
        csv.flush()?;
        Ok(())
    })?;
    out.write_json("solve.json", &solve_report(&scores))?;

    let mut evaluation = Vec::new();
    let halves = split_periods(&store, 2, PeriodMode::EqualDuration)?;
    let min: u32 = cfg.get("min-count")?;
    let train = build_graph_with(&halves[0], denominator)?.filter_edges_min_count(min)?;
    let test = build_graph_with(&halves[1], denominator)?;
    match prediction_reports(&train, &test, &solver, Direction::In, 0) {
        Ok(r) => evaluation.extend(r),
        Err(e) => log::warn!("prediction skipped: {e}"),
    }

    let (train, test) = split_train_test(&store, cfg.get("train-fraction")?)?;
    let g_train = build_graph_with(&train, denominator)?;
    let train_scores = solve(&g_train, &solver)?;
    let (report, _, _) = superspread_report(&g_train, &train_scores, &test, cfg.get("fraction")?, Aggregate::Mean)?;
    evaluation.push(report);
    evaluation.extend(period_stats(&g, &scores, 0, cfg.get("quantile")?));
    reports(&mut out, "evaluation", &evaluation)
}
