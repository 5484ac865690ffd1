//! End-to-end acceptance checks. Runs as a plain binary so that every check
//! prints one PASS/FAIL line even when cargo captures test output.
//!
//! Pass substrings as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- lorenz`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::Rng;

use neuralgc::autodiff::Tensor;
use neuralgc::datagen::{
    chronological_split, load_edge_list, load_replicated_panel, standard_scale, write_panel_csv, LaggedDataset,
    Lorenz96Config, TimeSeriesPanel, VarConfig,
};
use neuralgc::evaluation::{aupr, auroc, min_max_scale, threshold_gc, GCEstimate};
use neuralgc::experiment::{run_dir, run_experiment, window_dir_name, ExperimentConfig, ExperimentReport, Task};
use neuralgc::models::{
    lekvar_forward, var_forward, Body, KernelMode, Model, ModelConfig, ModelKind, ModelParams, ModelSpec,
    WindowBatch,
};
use neuralgc::penalties::{
    decoupled_l1, evaluate, group_lasso, hierarchical_group_lasso, penalty_value, sparse_group_lasso, LaggedGroup,
    PenaltyConfig, PenaltyKind,
};
use neuralgc::rng::stream;
use neuralgc::selfcheck::gradient_suite;

type Check = fn() -> Result<String, String>;

/// One tuned operating point per model: learning rate, λ, epochs, batch
/// size and whether inputs are standardized.
struct Point {
    model: &'static str,
    lr: f64,
    lambda: f64,
    epochs: usize,
    batch: usize,
    standardize: bool,
}

const VAR3_POINTS: [Point; 6] = [
    Point { model: "VAR", lr: 0.01, lambda: 1e-3, epochs: 200, batch: 1024, standardize: false },
    Point { model: "LeKVAR", lr: 0.01, lambda: 3e-3, epochs: 1000, batch: 1024, standardize: false },
    Point { model: "cMLP", lr: 0.05, lambda: 1e-2, epochs: 200, batch: 1024, standardize: true },
    Point { model: "cMLPwF", lr: 0.05, lambda: 3e-3, epochs: 1000, batch: 1024, standardize: true },
    Point { model: "cLSTM", lr: 0.03, lambda: 1e-2, epochs: 500, batch: 1024, standardize: true },
    Point { model: "cLSTMwF", lr: 0.03, lambda: 2e-2, epochs: 200, batch: 50, standardize: true },
];

const LOW_DATA_POINT: Point = Point { model: "VAR", lr: 0.01, lambda: 3e-3, epochs: 200, batch: 1024, standardize: false };
const LORENZ_POINT: Point = Point { model: "cMLP", lr: 0.05, lambda: 1e-2, epochs: 200, batch: 1024, standardize: true };
const LAG_POINT: Point = Point { model: "cLSTMwF", lr: 0.03, lambda: 2e-2, epochs: 200, batch: 50, standardize: true };

const SEEDS: [u64; 3] = [0, 1, 2];

fn config(task: Task, point: &Point, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(task, vec![point.model.to_string()], SEEDS.to_vec(), out);
    cfg.lr_grid = vec![point.lr];
    cfg.lambda_grid = vec![point.lambda];
    cfg.train.epochs = point.epochs;
    cfg.train.batch_size = point.batch;
    cfg.standardize = point.standardize;
    cfg
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, String> {
    let report = run_experiment(cfg).map_err(|e| e.to_string())?;
    if !report.all_completed() {
        return Err(format!("failed runs: {:?}", report.failures));
    }
    Ok(report)
}

fn per_seed(report: &ExperimentReport, f: fn(&neuralgc::experiment::RunRecord) -> Option<f64>) -> Vec<f64> {
    report.runs.iter().filter_map(f).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn var3_saturation() -> Result<String, String> {
    let dir = tempdir()?;
    let mut lines = Vec::new();
    let mut ok = true;
    for point in &VAR3_POINTS {
        let start = Instant::now();
        let report = run(&config(Task::Var3, point, dir.path()))?;
        let (roc, pr) = (per_seed(&report, |r| r.auroc), per_seed(&report, |r| r.aupr));
        let pass = mean(&roc) >= 0.95 && mean(&pr) >= 0.95;
        ok &= pass;
        lines.push(format!(
            "{} auroc {:.3} {} aupr {:.3} {} ({:.0}s){}",
            point.model,
            mean(&roc),
            fmt(&roc),
            mean(&pr),
            fmt(&pr),
            start.elapsed().as_secs_f64(),
            if pass { "" } else { " below 0.95" }
        ));
    }
    let text = lines.join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn var3_low_data() -> Result<String, String> {
    let dir = tempdir()?;
    let mut cfg = config(Task::Var3, &LOW_DATA_POINT, dir.path());
    cfg.var = VarConfig { length: 100, ..VarConfig::default() };
    let report = run(&cfg)?;
    let roc = per_seed(&report, |r| r.auroc);
    let m = mean(&roc);
    let text = format!("VAR T=100 mean auroc {m:.3} {}", fmt(&roc));
    if (0.70..=0.90).contains(&m) {
        Ok(text)
    } else {
        Err(format!("{text} outside [0.70, 0.90]"))
    }
}

fn lorenz96_improves_with_length() -> Result<String, String> {
    let dir = tempdir()?;
    let mut means = Vec::new();
    for length in [250, 1500] {
        let mut cfg = config(Task::Lorenz96, &LORENZ_POINT, &dir.path().join(length.to_string()));
        cfg.lorenz = Lorenz96Config { length, ..Lorenz96Config::default() };
        let report = run(&cfg)?;
        means.push(mean(&per_seed(&report, |r| r.auroc)));
    }
    let (short, long) = (means[0], means[1]);
    let text = format!("cMLP auroc T=250 {short:.3}, T=1500 {long:.3}, gain {:.3}", long - short);
    if long >= 0.95 && long - short >= 0.05 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn lag_recovery() -> Result<String, String> {
    let dir = tempdir()?;
    let hits = |report: &ExperimentReport| report.runs.iter().filter(|r| r.lag_recovery == Some(true)).count();

    let mut cfg = config(Task::Var3, &LAG_POINT, &dir.path().join("lstm"));
    cfg.var = VarConfig { causal_lags: vec![3, 4, 5], ..VarConfig::default() };
    let lstm = run(&cfg)?;
    let wf = VAR3_POINTS.iter().find(|p| p.model == "cMLPwF").expect("listed");
    let mlp = run(&config(Task::Var3, wf, &dir.path().join("mlp")))?;

    let (a, b) = (hits(&lstm), hits(&mlp));
    let rows = |r: &ExperimentReport| {
        r.runs
            .iter()
            .map(|run| fmt(run.mean_lag_scores.as_deref().unwrap_or(&[])))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let text = format!(
        "cLSTMwF lags {{3,4,5}} {a}/3 hits {}; cMLPwF lags {{1,2,3}} {b}/3 hits {}",
        rows(&lstm),
        rows(&mlp)
    );
    if a >= 2 && b >= 2 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn random_batch(n: usize, k: usize, p: usize, seed: u64) -> WindowBatch {
    let mut rng = stream(seed, "acceptance.batch");
    let v = (0..n * k * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    WindowBatch::new(v, k, p).expect("valid shape")
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn scale_first_layer(model: &mut Model, c: f64) {
    let ModelParams::Component { net, .. } = model.params_mut() else {
        unreachable!("component model")
    };
    let w = match &mut net.body {
        Body::Mlp(layers) => &mut layers[0].weight,
        Body::Lstm(layers) => &mut layers[0].w_ih,
    };
    let scaled: Vec<f64> = w.values().iter().map(|x| c * x).collect();
    w.set_values(scaled).expect("finite");
}

fn scale_series_factor(model: &mut Model, c: f64) {
    let ModelParams::Component { factors: Some(f), .. } = model.params_mut() else {
        unreachable!("decoupled model")
    };
    f.v = Tensor::vector(f.v.values().iter().map(|x| c * x).collect()).expect("finite");
}

fn degeneracy_and_normalization() -> Result<String, String> {
    let (p, k) = (4, 3);
    let batch = random_batch(64, k, p, 1);
    let mut rng = stream(2, "acceptance.targets");
    let targets: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l1 = PenaltyConfig::new(PenaltyKind::DecoupledL1, 1.0);
    let mut worst_data = 0.0f64;
    let mut worst_pred = 0.0f64;
    let mut notes = Vec::new();
    for spec in ["cMLPwF", "cLSTMwF"] {
        let spec: ModelSpec = spec.parse().map_err(|e: neuralgc::Error| e.to_string())?;
        let mut cfg = ModelConfig::new(spec, p, k, Some(0)).map_err(|e| e.to_string())?;

        cfg.weight_normalization = false;
        let mut model = Model::new(cfg.clone(), 5).map_err(|e| e.to_string())?;
        let data0 = mse(&model.predict(&batch).map_err(|e| e.to_string())?, &targets);
        let pen0 = penalty_value(&model, &l1).map_err(|e| e.to_string())?;
        let c = 0.5;
        scale_series_factor(&mut model, c);
        scale_first_layer(&mut model, 1.0 / c);
        let data1 = mse(&model.predict(&batch).map_err(|e| e.to_string())?, &targets);
        let pen1 = penalty_value(&model, &l1).map_err(|e| e.to_string())?;
        worst_data = worst_data.max((data1 - data0).abs());
        if pen1 >= pen0 {
            return Err(format!("{spec}: penalty did not decrease ({pen0} -> {pen1})"));
        }
        notes.push(format!("{spec} penalty {pen0:.3} -> {pen1:.3}"));

        cfg.weight_normalization = true;
        let base = Model::new(cfg, 5).map_err(|e| e.to_string())?;
        let y0 = base.predict(&batch).map_err(|e| e.to_string())?;
        for c in [0.1, 10.0] {
            let mut m = base.clone();
            scale_first_layer(&mut m, c);
            let y = m.predict(&batch).map_err(|e| e.to_string())?;
            let d = y.iter().zip(&y0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_pred = worst_pred.max(d);
        }
    }
    let text = format!(
        "unnormalized data term change {worst_data:.1e}; {}; normalized prediction change {worst_pred:.1e}",
        notes.join(", ")
    );
    if worst_data <= 1e-12 && worst_pred <= 1e-12 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn lekvar_identity_reduces_to_var() -> Result<String, String> {
    let (p, k) = (10, 5);
    let spec = ModelSpec::new(ModelKind::LeKVar, false);
    let mut cfg = ModelConfig::new(spec, p, k, None).map_err(|e| e.to_string())?;
    cfg.kernel = KernelMode::Identity;
    let model = Model::new(cfg, 11).map_err(|e| e.to_string())?;
    let ModelParams::LeKVar(params) = model.params() else {
        unreachable!("LeKVAR params")
    };
    let batch = random_batch(1000, k, p, 3);
    let var = var_forward(&params.var, &batch).map_err(|e| e.to_string())?;
    let direct = lekvar_forward(params, KernelMode::Identity, true, &batch).map_err(|e| e.to_string())?;
    let through_model = model.predict(&batch).map_err(|e| e.to_string())?;
    let worst = var
        .iter()
        .zip(&direct)
        .zip(&through_model)
        .map(|((v, d), m)| (v - d).abs().max((v - m).abs()))
        .fold(0.0, f64::max);
    let text = format!("max |LeKVAR - VAR| over 1000 windows {worst:.1e}");
    if worst <= 1e-12 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn gradient_checks() -> Result<String, String> {
    let report = gradient_suite(100, 0).map_err(|e| e.to_string())?;
    let worst = report
        .iter()
        .max_by(|a, b| a.worst.total_cmp(&b.worst))
        .expect("nonempty suite");
    let failed: Vec<String> = report
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{} {:.1e}", c.name, c.worst))
        .collect();
    let text = format!("{} cases x 100 points, worst {} {:.1e}", report.len(), worst.name, worst.worst);
    if failed.is_empty() {
        Ok(text)
    } else {
        Err(format!("{text}; failed: {}", failed.join(", ")))
    }
}

fn auroc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                twice_wins += match si.partial_cmp(&sj) {
                    Some(std::cmp::Ordering::Greater) => 2,
                    Some(std::cmp::Ordering::Equal) => 1,
                    _ => 0,
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn aupr_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let positives = labels.iter().filter(|&&l| l == 1).count() as i64;
    let mut total = Ratio::<i64>::from_integer(0);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == 1 {
            let ranked = scores.iter().filter(|&&x| x >= s).count() as i64;
            let hits = scores.iter().zip(labels).filter(|(&x, &l)| x >= s && l == 1).count() as i64;
            total += Ratio::new(hits, ranked);
        }
    }
    (total / positives).to_f64().expect("finite")
}

fn lagged(ids: &[neuralgc::autodiff::NodeId], lags: usize) -> Vec<LaggedGroup> {
    ids.iter().map(|&node| LaggedGroup { node, num_lags: lags }).collect()
}

fn penalty_hand_cases() -> Result<usize, String> {
    let gl = |w: &[Vec<f64>]| evaluate(w, |g, ids| group_lasso(g, ids));
    let sgl = |w: &[Vec<f64>], lags: usize, alpha: f64| {
        evaluate(w, |g, ids| sparse_group_lasso(g, &lagged(ids, lags), alpha))
    };
    // Lag blocks are padded with zeros to a common width, which leaves
    // every norm unchanged.
    let hgl = |w: &[Vec<f64>], lags: usize| evaluate(w, |g, ids| hierarchical_group_lasso(g, &lagged(ids, lags)));
    let l1 = |v: Vec<f64>, q: Vec<f64>, lv: f64, lq: f64| evaluate(&[v, q], |g, ids| decoupled_l1(g, ids[0], ids[1], lv, lq));

    let w = vec![vec![0.3, -1.2, 0.7, 2.0], vec![1.0, 1.0, -0.5, 0.25]];
    let cases: Vec<(&str, neuralgc::Result<f64>, f64)> = vec![
        ("group lasso [3,4]", gl(&[vec![3.0, 4.0]]), 5.0),
        ("group lasso zeros", gl(&[vec![0.0, 0.0], vec![0.0]]), 0.0),
        ("group lasso [1,0],[0,2]", gl(&[vec![1.0, 0.0], vec![0.0, 2.0]]), 3.0),
        ("sparse group lasso α=0.5", sgl(&[vec![3.0, 4.0, 0.0, 0.0]], 2, 0.5), 5.0),
        ("sparse group lasso α=1", sgl(&w, 2, 1.0), gl(&w).map_err(|e| e.to_string())?),
        ("sparse group lasso zeros", sgl(&[vec![0.0; 4]], 2, 0.3), 0.0),
        ("hierarchical (3,4),(0)", hgl(&[vec![3.0, 4.0, 0.0, 0.0]], 2), 5.0),
        ("hierarchical (0),(3,4)", hgl(&[vec![0.0, 0.0, 3.0, 4.0]], 2), 10.0),
        ("hierarchical zeros", hgl(&[vec![0.0; 6]], 3), 0.0),
        ("decoupled l1", l1(vec![1.0, -2.0], vec![3.0], 1.0, 1.0), 6.0),
        ("decoupled l1 λ=0", l1(vec![1.0, -2.0], vec![3.0], 0.0, 0.0), 0.0),
        ("decoupled l1 v=0", l1(vec![0.0, 0.0], vec![3.0, -1.0], 1.0, 0.0), 0.0),
    ];
    for (name, got, want) in &cases {
        let got = got.as_ref().map_err(|e| format!("{name}: {e}"))?;
        if got != want {
            return Err(format!("{name}: got {got}, expected {want}"));
        }
    }
    Ok(cases.len())
}

fn metric_and_penalty_oracles() -> Result<String, String> {
    let mut rng = stream(77, "acceptance.metrics");
    let mut checked = 0;
    let mut with_ties = 0;
    while checked < 1000 {
        let n = rng.random_range(2..=12);
        let levels = rng.random_range(1..=n);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.37).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            continue;
        }
        let roc = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let pr = aupr(&scores, &labels).map_err(|e| e.to_string())?;
        if roc != auroc_oracle(&scores, &labels) || pr != aupr_oracle(&scores, &labels) {
            return Err(format!("mismatch on scores {scores:?} labels {labels:?}"));
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        with_ties += usize::from(sorted.len() < n);
        checked += 1;
    }
    let penalties = penalty_hand_cases()?;
    Ok(format!(
        "1000 metric instances exact ({with_ties} with ties); {penalties} penalty cases exact"
    ))
}

fn determinism() -> Result<String, String> {
    let dir = tempdir()?;
    let make = |sub: &str| {
        let mut cfg = ExperimentConfig::new(
            Task::Var3,
            vec!["VAR".into(), "cMLPwF".into()],
            vec![0, 1],
            dir.path().join(sub),
        );
        cfg.var = VarConfig { num_series: 5, length: 300, ..VarConfig::default() };
        cfg.lr_grid = vec![0.01, 0.05];
        cfg.lambda_grid = vec![1e-3, 1e-2];
        cfg.train.epochs = 20;
        cfg.standardize = true;
        cfg
    };
    let (a, b) = (make("a"), make("b"));
    run(&a)?;
    run(&b)?;
    let mut compared = 0;
    for model in ["VAR", "cMLPwF"] {
        for seed in [0, 1] {
            for file in ["gc_scores.csv", "gc_scaled.csv", "gc_binary.csv", "lag_scores.csv"] {
                let read = |cfg: &ExperimentConfig| fs::read(run_dir(cfg, model, seed).join(file)).map_err(|e| e.to_string());
                if read(&a)? != read(&b)? {
                    return Err(format!("{model} seed {seed} {file} differs between runs"));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} GC files byte-identical across two runs"))
}

const REPLICATED: &str = "\
Time\tG1\tG2\tG3
0\t1\t2\t3
1\t1.1\t2.1\t3.1
2\t1.2\t2.2\t3.2

0\t5\t6\t7
1\t5.1\t6.1\t7.1
2\t5.2\t6.2\t7.2
";

fn replicated_and_sliding_window() -> Result<String, String> {
    let dir = tempdir()?;
    let e = |e: neuralgc::Error| e.to_string();

    // Replicated panel: round trip and replicate-aware windows.
    let path = dir.path().join("replicated.tsv");
    fs::write(&path, REPLICATED).map_err(|e| e.to_string())?;
    let panel = load_replicated_panel(&path).map_err(e)?;
    if panel.replicate_lengths() != [3, 3] || panel.series_names() != ["G1", "G2", "G3"] {
        return Err(format!("replicates {:?} names {:?}", panel.replicate_lengths(), panel.series_names()));
    }
    if panel.data()[4] != [5.1, 6.1, 7.1] {
        return Err(format!("row 4 read as {:?}", panel.data()[4]));
    }
    let ds = LaggedDataset::from_panel(&panel, 1).map_err(e)?;
    if ds.len() != 4 || ds.window(2) != [5.0, 6.0, 7.0] {
        return Err(format!("{} windows, third {:?}", ds.len(), ds.window(2)));
    }
    let edges = dir.path().join("edges.tsv");
    fs::write(&edges, "G1\tG2\t1\nG3\tG1\t0\nG2\tG3\t1\n").map_err(|e| e.to_string())?;
    let truth = load_edge_list(&edges, panel.series_names()).map_err(e)?;
    if truth != vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0]] {
        return Err(format!("edge list read as {truth:?}"));
    }

    // Sliding window: counts, split sizes, scaling and thresholding.
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|t| {
            let x = t as f64 * 0.1;
            vec![x.sin(), (0.7 * x).cos() + 0.01 * x, (0.3 * x).sin() * x.cos()]
        })
        .collect();
    let panel = TimeSeriesPanel::new(rows, TimeSeriesPanel::default_names(3)).map_err(e)?;
    let csv = dir.path().join("eeg.csv");
    write_panel_csv(&csv, &panel).map_err(e)?;
    let mut cfg = ExperimentConfig::sliding_window_protocol(&csv, dir.path().join("out"));
    cfg.sliding.window_len = 200;
    cfg.train.epochs = 3;
    cfg.lr_grid = vec![0.01];
    cfg.lambda_grid = vec![1e-3];
    let report = run(&cfg)?;
    let starts: Vec<f64> = report.windows.iter().map(|w| w.start_seconds).collect();
    if starts != [0.0, 1.0, 2.0, 3.0] {
        return Err(format!("window starts {starts:?}"));
    }
    if let Some(w) = report.windows.iter().find(|w| (w.train_samples, w.val_samples) != (147, 50)) {
        return Err(format!("window {} split {}/{}", w.index, w.train_samples, w.val_samples));
    }

    let windows = panel.sliding_windows(200, 0.5, Some(100.0)).map_err(e)?;
    let ds = LaggedDataset::from_panel(&windows[1], cfg.max_lag).map_err(e)?;
    let (train, _) = chronological_split(ds.len(), cfg.sliding.val_fraction).map_err(e)?;
    let (scaled, _) = standard_scale(&ds, &train).map_err(e)?;
    let width = scaled.lags() * scaled.series();
    let mut worst = 0.0f64;
    for c in 0..width {
        let col: Vec<f64> = train.iter().map(|&n| scaled.window(n)[c]).collect();
        let m = mean(&col);
        let sd = (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        worst = worst.max(m.abs()).max((sd - 1.0).abs());
    }
    if worst > 1e-10 {
        return Err(format!("scaled training inputs deviate by {worst:.1e}"));
    }

    let run_path = run_dir(&cfg, "cMLPwF", 0);
    for w in &report.windows {
        let wdir = run_path.join("windows").join(window_dir_name(w.start_seconds));
        let scores = neuralgc::datagen::read_panel_csv(&wdir.join("gc_scores.csv")).map_err(e)?;
        let est = GCEstimate {
            kind: ModelKind::CMlpWf,
            series_scores: scores.data().to_vec(),
            lag_scores: None,
            threshold: None,
            binary: None,
        };
        let expect = threshold_gc(&est, 0.5).map_err(e)?.binary.expect("thresholded");
        let text = fs::read_to_string(wdir.join("gc_binary.csv")).map_err(|e| e.to_string())?;
        let got: Vec<Vec<u8>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|c| c.parse().unwrap_or(9)).collect())
            .collect();
        if got != expect {
            return Err(format!("window {}: binary matrix differs from thresholded scores", w.index));
        }
        if scores.data().iter().any(|row| min_max_scale(row).iter().any(|x| !(0.0..=1.0).contains(x))) {
            return Err("scaled scores outside [0, 1]".into());
        }
    }
    Ok(format!(
        "replicated fixture exact; {} windows at {starts:?} s, split 147/50, scaling within {worst:.1e}, thresholds match",
        report.windows.len()
    ))
}

const CHECKS: [(u8, &str, Check); 10] = [
    (1, "var3-saturation", var3_saturation),
    (2, "var3-low-data", var3_low_data),
    (3, "lorenz96-length", lorenz96_improves_with_length),
    (4, "lag-recovery", lag_recovery),
    (5, "degeneracy", degeneracy_and_normalization),
    (6, "lekvar-identity", lekvar_identity_reduces_to_var),
    (7, "gradients", gradient_checks),
    (8, "metric-oracles", metric_and_penalty_oracles),
    (9, "determinism", determinism),
    (10, "replicated-and-sliding", replicated_and_sliding_window),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (id, name, _) in CHECKS {
            println!("{id}-{name}: test");
        }
        return;
    }
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in CHECKS {
        let label = format!("{id}-{name}");
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {label}: PASS ({secs:.0}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("acceptance {label}: FAIL ({secs:.0}s) {detail}");
            }
        }
    }
    println!("acceptance: {} of {ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
