//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use burden_forecast::expr::{paper_model, parse, DomainError, Expr};
use burden_forecast::forecast::{forecast, trend, Direction};
use burden_forecast::ingest::{standardize_columns, TimeIndexMap};
use burden_forecast::metrics::compute_metrics;
use burden_forecast::pca::{
    component_scores, eigen_decompose, explained_variance, fit_pca, retain_components, Retention, SymMatrix,
};
use burden_forecast::ingest::Group;
use burden_forecast::pipeline::{run_pipeline, PipelineConfig};
use burden_forecast::sr::variation::init_individual;
use burden_forecast::sr::{run_search, select_model, Criterion, SrConfig, TrainingSet};
use burden_forecast::synthetic::synthetic_burden;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    check((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} +/- {tol}"))
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || format!("{what} took {elapsed:.1?}, limit {limit:?}"))
}

/// Eigenvalue lists with the given leading entries; the
/// remainder shares the leftover trace equally.
fn completed(leading: &[f64], p: usize) -> Vec<f64> {
    let rest = (p as f64 - leading.iter().sum::<f64>()) / (p - leading.len()) as f64;
    let mut v = leading.to_vec();
    v.resize(p, rest);
    v
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-10.0..10.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn explained_variance_arithmetic() -> Outcome {
    let (f, c) = explained_variance(&completed(&[4.439, 1.266], 7), 7);
    close(100.0 * f[0], 63.4, 0.05, "communicable PC1 %")?;
    close(100.0 * f[1], 18.1, 0.05, "communicable PC2 %")?;
    close(100.0 * c[1], 81.5, 0.1, "communicable cumulative %")?;
    let (f, _) = explained_variance(&completed(&[9.625], 10), 10);
    close(100.0 * f[0], 96.2, 0.05, "non-communicable PC1 %")?;
    let (f, _) = explained_variance(&completed(&[3.245, 1.421], 6), 6);
    close(100.0 * f[0], 54.1, 0.05, "injury PC1 %")?;
    close(100.0 * f[1], 23.7, 0.05, "injury PC2 %")?;
    Ok(format!("63.4/18.1/81.5, 96.2, 54.1/23.7 (computed {:.2}/{:.2})", 100.0 * f[0], 100.0 * f[1]))
}

fn kaiser_retention() -> Outcome {
    let kept = [
        retain_components(&completed(&[4.439, 1.266], 7), Retention::Kaiser),
        retain_components(&completed(&[9.625], 10), Retention::Kaiser),
        retain_components(&completed(&[3.245, 1.421], 6), Retention::Kaiser),
    ];
    check(kept == [2, 1, 2], || format!("retained {kept:?}, want [2, 1, 2]"))?;
    Ok(format!("retained {kept:?}"))
}

fn loading_norms() -> Outcome {
    let reference = [-0.329, 0.451, 0.199, -0.222, 0.424, 0.451, 0.465];
    let ss: f64 = reference.iter().map(|x| x * x).sum();
    close(ss, 1.0, 0.01, "reference PC1 sum of squares")?;

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let n = rng.random_range(2..=10);
        let a = random_symmetric(&mut rng, n);
        let eig = eigen_decompose(&SymMatrix::from_rows(&a).map_err(|e| e.to_string())?)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        for i in 0..n {
            for j in i..n {
                let dot: f64 = (0..n).map(|k| eig.vectors[i][k] * eig.vectors[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
                close(dot, want, 1e-9, &format!("trial {trial} <v{i}, v{j}>"))?;
            }
        }
        let mut frob = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| eig.vectors[k][i] * eig.values[k] * eig.vectors[k][j]).sum();
                frob += (r - a[i][j]).powi(2);
            }
        }
        close(frob.sqrt(), 0.0, 1e-9, &format!("trial {trial} reconstruction"))?;
    }
    within(start.elapsed(), Duration::from_secs(30), "1000 decompositions")?;
    Ok(format!("reference sum of squares {ss:.4}; worst orthonormality error {worst:.1e}"))
}

fn eigen_oracle() -> Outcome {
    // roots of the characteristic polynomial of [[a, b], [b, c]]
    let (a, b, c) = (2.0_f64, 1.0_f64, 2.0_f64);
    let mid = (a + c) / 2.0;
    let rad = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let eig = eigen_decompose(&SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap()).map_err(|e| e.to_string())?;
    close(eig.values[0], mid + rad, 1e-12, "lambda 1")?;
    close(eig.values[1], mid - rad, 1e-12, "lambda 2")?;
    let diag = eigen_decompose(&SymMatrix::diagonal(&[5.0, 2.0, 1.0])).map_err(|e| e.to_string())?;
    check(diag.values == [5.0, 2.0, 1.0], || format!("diag(5,2,1) gave {:?}", diag.values))?;
    Ok(format!("(3, 1) and {:?}", diag.values))
}

fn score_variance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let names: Vec<String> = (0..7).map(|j| format!("c{j}")).collect();
    let years: Vec<i32> = (1990..2017).collect();
    for trial in 0..100 {
        let cols: Vec<Vec<f64>> = (0..7)
            .map(|_| {
                let drift = rng.random_range(-1.0..1.0);
                (0..27).map(|i| drift * f64::from(i) + rng.random_range(0.0..10.0)).collect()
            })
            .collect();
        let z = standardize_columns(names.clone(), &cols).map_err(|e| e.to_string())?;
        let model = fit_pca(&z, Group::Communicable, Retention::Fixed(7)).map_err(|e| e.to_string())?;
        let scores = component_scores(&z, &model, &years).map_err(|e| e.to_string())?;
        for (k, s) in scores.iter().enumerate() {
            let n = s.scores.len() as f64;
            let mean = s.scores.iter().sum::<f64>() / n;
            let var = s.scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            worst = worst.max((var - model.eigenvalues[k]).abs());
            close(var, model.eigenvalues[k], 1e-6, &format!("trial {trial} component {}", k + 1))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(30), "100 datasets")?;
    Ok(format!("worst |var - lambda| {worst:.1e}"))
}

fn builtin_model_values() -> Outcome {
    let npc = paper_model("NPC").map_err(|e| e.to_string())?;
    let want = 9.32 + 0.16 * 10.0 + 0.02 * 100.0 - 0.0005 * 1000.0;
    close(npc.eval(10.0).map_err(|e| e.to_string())?, want, 1e-9, "model 3 at t=10")?;
    close(want, 12.42, 1e-9, "hand value for model 3")?;
    let cpc2 = paper_model("CPC2").map_err(|e| e.to_string())?;
    close(cpc2.eval(0.0).map_err(|e| e.to_string())?, 1.62 + 0.04, 1e-9, "model 2 at t=0")?;
    let cpc1 = paper_model("CPC1").map_err(|e| e.to_string())?;
    check(cpc1.eval(0.0) == Err(DomainError::DivByZero), || format!("model 1 at t=0 gave {:?}", cpc1.eval(0.0)))?;
    Ok("12.42, 1.66, division by zero".into())
}

fn trend_reproduction() -> Outcome {
    let map = TimeIndexMap::new(1989);
    let cpc1 = |t: f64| 6.31 + 14.73 / t + 14.59 / t.powi(2) + 6.63 * t.cos() / t.powi(3) - 1.63e-6 * t.powi(4);
    let ipc1 =
        |t: f64| 1.479 + 0.10 * t - 0.12 * t.ln() - 6.72e-5 * t.powi(3) - 0.0002 * t.powi(2) * (0.39 * t).sin();
    let npc = |t: f64| 9.32 + 0.16 * t + 0.02 * t * t - 0.0005 * t.powi(3);
    let cases: [(&str, std::ops::RangeInclusive<i32>, &dyn Fn(f64) -> f64, Direction); 3] = [
        ("CPC1", 2017..=2020, &cpc1, Direction::Decreasing),
        ("IPC1", 2018..=2020, &ipc1, Direction::Decreasing),
        ("NPC", 2017..=2019, &npc, Direction::Increasing),
    ];
    let mut summary = Vec::new();
    for (id, years, oracle, want) in cases {
        let fit_end = *years.start() - 1;
        let e = paper_model(id).map_err(|e| e.to_string())?;
        let table = forecast(id, &e, years, map, fit_end).map_err(|e| e.to_string())?;
        for row in &table.rows {
            close(row.value, oracle(f64::from(row.t)), 1e-9, &format!("{id} {}", row.year))?;
        }
        let deltas: Vec<f64> = table.rows.windows(2).map(|w| w[1].value - w[0].value).collect();
        let independent = match want {
            Direction::Decreasing => deltas.iter().all(|d| *d < 0.0),
            _ => deltas.iter().all(|d| *d > 0.0),
        };
        let verdict = trend(&table).map_err(|e| e.to_string())?;
        check(independent && verdict.direction == want, || {
            format!("{id}: verdict {:?}, deltas {deltas:?}", verdict.direction)
        })?;
        summary.push(format!("{id} {}", verdict.direction.as_str()));
    }
    close(cpc1(28.0), 5.852, 1e-3, "CPC1 at t=28")?;
    Ok(summary.join(", "))
}

fn metrics_identities() -> Outcome {
    let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    close(m.r2, 1.0, 1e-12, "perfect r2")?;
    close(m.r.unwrap_or(f64::NAN), 1.0, 1e-12, "perfect r")?;
    check(m.mse == 0.0 && m.mae == 0.0, || "perfect mse/mae not zero".into())?;
    let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).map_err(|e| e.to_string())?;
    close(m.r2, 0.0, 1e-12, "mean predictor r2")?;
    let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    close(m.mse, 1.0 / 3.0, 1e-12, "mse")?;
    close(m.mae, 1.0 / 3.0, 1e-12, "mae")?;
    close(m.r2, 0.5, 1e-12, "r2")?;
    // r = cov / (sd sd): cov = 1.5, var(obs) = 1, var(pred) = 7/3 (sample)
    let oracle = 1.5 / (1.0 * (7.0_f64 / 3.0).sqrt());
    close(m.r.unwrap_or(f64::NAN), oracle, 1e-12, "r oracle")?;
    close(oracle, 0.9820, 1e-4, "r")?;
    Ok(format!("r = {oracle:.4}"))
}

fn series(f: impl Fn(f64) -> f64) -> TrainingSet {
    let t: Vec<f64> = (1..=27).map(f64::from).collect();
    let y = t.iter().map(|&t| f(t)).collect();
    TrainingSet::new(t, y).unwrap()
}

fn sr_recovery() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let cfg = SrConfig { seed: 42, ..SrConfig::default() };

    let line = series(|t| 3.0 + 2.0 * t);
    let start = Instant::now();
    let front = pool.install(|| run_search(&line, &cfg)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60), "linear search")?;
    let hit = front.entries().iter().find(|e| e.mse < 1e-6 && e.complexity <= 5);
    let hit = hit.ok_or_else(|| {
        let summary: Vec<String> = front.entries().iter().map(|e| format!("{} ({}, {:e})", e.expr, e.complexity, e.mse)).collect();
        format!("no entry with mse < 1e-6 and complexity <= 5: {}", summary.join("; "))
    })?;
    let hit = format!("{} (mse {:.1e}, cx {})", hit.expr, hit.mse, hit.complexity);

    let again = pool.install(|| run_search(&line, &cfg)).map_err(|e| e.to_string())?;
    let a = serde_json::to_string(&front).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&again).map_err(|e| e.to_string())?;
    check(a == b, || "repeat run produced a different front".into())?;

    let quad = series(|t| 1.0 + 0.5 * t + 0.1 * t * t);
    let start = Instant::now();
    let front = pool.install(|| run_search(&quad, &cfg)).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(60), "quadratic search")?;
    // The default rule returns the simplest entry above 0.99, which for this
    // target is a cheaper approximation; recovery is judged with the
    // threshold set to the accuracy demanded here.
    let simplest = select_model(&front, &quad, Criterion::default()).map_err(|e| e.to_string())?;
    check(simplest.metrics.r2 >= 0.99, || format!("default selection r2 {}", simplest.metrics.r2))?;
    let chosen = select_model(&front, &quad, Criterion::MinComplexityAboveR2(0.9999)).map_err(|e| e.to_string())?;
    check(chosen.metrics.r2 > 0.9999, || format!("quadratic selected {} with r2 {}", chosen.expr, chosen.metrics.r2))?;
    Ok(format!(
        "{hit} in {elapsed:.1?}; quadratic {} r2 {:.6} (default rule: {} r2 {:.4})",
        chosen.expr, chosen.metrics.r2, simplest.expr, simplest.metrics.r2
    ))
}

fn pipeline_property() -> Outcome {
    let start = Instant::now();
    let (table, _) = synthetic_burden(7, 0.01).map_err(|e| e.to_string())?;
    let report = run_pipeline(&table, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(180), "pipeline")?;
    let labels: Vec<&str> = report.indices.iter().map(|i| i.index.as_str()).collect();
    check(labels == ["CPC1", "CPC2", "NPC", "IPC1", "IPC2"], || format!("indices {labels:?}"))?;
    let mut summary = Vec::new();
    for index in &report.indices {
        check(index.r2 >= 0.99, || format!("{} r2 {} < 0.99: {}", index.index, index.r2, index.expression))?;
        let e: Expr = parse(&index.expression).map_err(|e| format!("{}: {e}", index.index))?;
        for row in &index.rows {
            let v = e.eval(f64::from(row.t)).map_err(|e| format!("{} {}: {e}", index.index, row.year))?;
            close(v, row.value, 1e-9, &format!("{} {} re-evaluation", index.index, row.year))?;
        }
        summary.push(format!("{} {:.4}", index.index, index.r2));
    }
    Ok(format!("r2 {} in {:.1?}", summary.join(", "), start.elapsed()))
}

fn round_trip_and_totality() -> Outcome {
    let start = Instant::now();
    let cfg = SrConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ts: Vec<f64> = [0.0, 1e-300, 0.5, 1.0, 27.0, 31.0, -3.5, 1e6, 1e300, -1e300].to_vec();
    let mut defined = 0usize;
    for i in 0..10_000 {
        let e = init_individual(&mut rng, &cfg, i);
        let text = e.to_string();
        let back = parse(&text).map_err(|err| format!("`{text}` failed to parse: {err}"))?;
        check(back == e, || format!("`{text}` reparsed as `{back}`"))?;
        for &t in &ts {
            if let Ok(v) = e.eval(t) {
                check(v.is_finite(), || format!("`{text}` at {t} gave {v}"))?;
                defined += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(30), "10,000 trees")?;
    Ok(format!("10000 trees, {defined} finite evaluations"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("explained-variance arithmetic", explained_variance_arithmetic),
        ("Kaiser retention", kaiser_retention),
        ("loading norms and orthonormality", loading_norms),
        ("eigen oracle", eigen_oracle),
        ("score variance", score_variance),
        ("built-in model values", builtin_model_values),
        ("trend directions", trend_reproduction),
        ("metrics identities", metrics_identities),
        ("symbolic regression recovery", sr_recovery),
        ("end-to-end pipeline", pipeline_property),
        ("round trip and totality", round_trip_and_totality),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", n + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
