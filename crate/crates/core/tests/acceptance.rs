//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use flowsurrogate::dataset::{split, SplitRatios};
use flowsurrogate::field::{abc_snapshot, Grid3};
use flowsurrogate::mlp::{
    batch_jacobian, init_mlp, lm_br_step, train_from, update_evidence_hyperparams, Batch, MlpModel,
    NormalEquations, StopReason, TrainConfig,
};
use flowsurrogate::nsops::{curl, divergence, momentum_residual, VectorField};
use flowsurrogate::pipeline::{self, PipelineConfig, REFERENCE_ACCURACY};
use flowsurrogate::rng::SplitMix64;
use flowsurrogate::som::{find_bmu, hit_map, init_som, quantization_error, train_som, SomConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed <= budget, || {
        format!("took {elapsed:.2?}, budget {budget:.2?}")
    })
}

fn split_sizes() -> Outcome {
    let t = Instant::now();
    let p = split(4096, 0, SplitRatios::default()).map_err(|e| e.to_string())?;
    let sizes = p.sizes();
    let elapsed = t.elapsed();
    ensure(sizes == (2867, 614, 615), || format!("sizes {sizes:?}"))?;
    within_budget(elapsed, Duration::from_millis(1))?;
    Ok(format!("sizes {sizes:?}"))
}

fn abc_residual() -> Outcome {
    let t = Instant::now();
    let n = 32;
    let grid = Grid3::cube(n).map_err(|e| e.to_string())?;
    let snap = abc_snapshot(grid, 1.0, 1.0, 1.0, 1.0, 0.7).map_err(|e| e.to_string())?;
    let r = momentum_residual(&snap).map_err(|e| e.to_string())?;
    let h = grid.spacing()[0];
    let lambda = (2.0 - 2.0 * h.cos()) / (h * h);
    let err = r.axpy(-lambda, &snap.velocity()).max_abs();
    ensure(err <= 0.02, || format!("max residual error {err:e} > 0.02"))?;
    within_budget(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("max |R - lambda_h v| = {err:.3e}"))
}

fn div_curl_identity() -> Outcome {
    let t = Instant::now();
    let grid = Grid3::cube(16).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(seed);
        let comps = [(); 3].map(|_| (0..grid.len()).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>());
        let a = VectorField::new(grid, comps).map_err(|e| e.to_string())?;
        let c = curl(&a);
        let ratio = divergence(&c).max_abs() / c.max_abs();
        ensure(ratio <= 1e-12, || format!("seed {seed}: ratio {ratio:e}"))?;
        worst = worst.max(ratio);
    }
    within_budget(t.elapsed(), Duration::from_secs(1))?;
    Ok(format!("worst max|div curl A| / max|curl A| = {worst:.3e}"))
}

fn fd_entry(m: &MlpModel, x: &[f64], o: usize, c: usize, step: f64) -> f64 {
    let mut p = m.params().to_vec();
    p[c] += step;
    let plus = MlpModel::from_params(m.layer_sizes(), p.clone()).unwrap();
    p[c] -= 2.0 * step;
    let minus = MlpModel::from_params(m.layer_sizes(), p).unwrap();
    (plus.forward(x).unwrap()[o] - minus.forward(x).unwrap()[o]) / (2.0 * step)
}

fn scalar_batch() -> Batch {
    Batch {
        inputs: vec![vec![1.0], vec![2.0]],
        targets: vec![vec![2.0], vec![4.0]],
    }
}

fn trainer_correctness() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let m = init_mlp(&[7, 10, 3], seed).map_err(|e| e.to_string())?;
        let mut rng = SplitMix64::new(100 + seed);
        let inputs: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..7).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let targets = vec![vec![0.0; 3]; 32];
        let (j, _) = batch_jacobian(&m, &inputs, &targets).map_err(|e| e.to_string())?;
        for (s, x) in inputs.iter().enumerate() {
            for o in 0..3 {
                for c in 0..m.num_weights() {
                    let an = j[(s * 3 + o, c)];
                    let rel = (an - fd_entry(&m, x, o, c, 1e-6)).abs() / an.abs().max(1.0);
                    ensure(rel <= 1e-6, || format!("model {seed} sample {s} entry ({o},{c}): {rel:e}"))?;
                    worst = worst.max(rel);
                }
            }
        }
    }

    // y = w x + b from (w, b) = (0, 0) on {(1,2),(2,4)}; two rows fix two
    // parameters, so the evidence update after the exact fit has no data
    // degrees of freedom left and the model is read after the first epoch
    let model = MlpModel::from_params(&[1, 1], vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 1,
        mu0: 1e-12,
        alpha0: 0.0,
        beta0: 1.0,
        ..TrainConfig::default()
    };
    let (fit, trace) = train_from(model, &scalar_batch(), None, &cfg).map_err(|e| e.to_string())?;
    let w = fit.params()[0];
    ensure((w - 2.0).abs() <= 1e-8, || format!("w = {w}"))?;
    ensure(fit.params()[1].abs() <= 1e-8, || format!("b = {}", fit.params()[1]))?;
    ensure(trace.epochs_run() <= 2, || format!("{} epochs", trace.epochs_run()))?;

    // the same fixture through a single raw step
    let ne = NormalEquations::new(
        &DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        &DVector::from_vec(vec![2.0, 4.0]),
    );
    let step = lm_br_step(&DVector::from_vec(vec![0.0]), &ne, 1e-12, 0.0, 1.0).map_err(|e| e.to_string())?;
    ensure((step[0] - 2.0).abs() <= 1e-8, || format!("single step w = {}", step[0]))?;

    within_budget(t.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "worst Jacobian rel err {worst:.2e}; LM w = {w} after {} epoch(s)",
        trace.epochs_run()
    ))
}

fn evidence_updates() -> Outcome {
    let t = Instant::now();
    let ev0 = update_evidence_hyperparams(&DMatrix::identity(4, 4), 1.0, 1.0, 0.0, 1.0, 10)
        .map_err(|e| e.to_string())?;
    ensure(ev0.gamma == 4.0, || format!("alpha = 0 gave gamma {}", ev0.gamma))?;
    let ev = update_evidence_hyperparams(&DMatrix::from_element(1, 1, 1.0), 1.0, 2.0, 1.0, 1.0, 4)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    ensure((ev.gamma - 0.5).abs() <= 1e-12, || format!("gamma {}", ev.gamma))?;
    ensure((ev.alpha - 0.125).abs() <= 1e-12, || format!("alpha' {}", ev.alpha))?;
    within_budget(elapsed, Duration::from_millis(1))?;
    Ok(format!("gamma = {}, alpha' = {}", ev.gamma, ev.alpha))
}

fn mu_explosion() -> Outcome {
    let t = Instant::now();
    let mut rng = SplitMix64::new(11);
    let inputs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]).collect();
    let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![1.5 * x[0] - 0.5 * x[1] + 0.25]).collect();
    let batch = Batch { inputs, targets };
    let cfg = TrainConfig {
        max_epochs: 500,
        mu_max: 1e10,
        ..TrainConfig::default()
    };
    let model = init_mlp(&[2, 1], 3).map_err(|e| e.to_string())?;
    let (_, trace) = train_from(model, &batch, None, &cfg).map_err(|e| e.to_string())?;
    let epochs = trace.epochs_run();
    ensure(trace.stop_reason == StopReason::MuExceeded, || {
        format!("stop reason {:?} after {epochs} epochs", trace.stop_reason)
    })?;
    ensure(epochs < 500, || format!("{epochs} epochs"))?;
    within_budget(t.elapsed(), Duration::from_secs(30))?;
    Ok(format!("MuExceeded after {epochs} of 500 epochs"))
}

fn som_properties() -> Outcome {
    let t = Instant::now();

    let x = vec![0.4, -1.2, 2.5, 0.0];
    let corners = vec![vec![-2.0; 4], vec![3.0; 4]];
    let som = init_som(4, 4, 4, &corners, 5).map_err(|e| e.to_string())?;
    let cfg = SomConfig {
        rows: 4,
        cols: 4,
        epochs: 100,
        ..SomConfig::default()
    };
    let trained = train_som(&som, &vec![x.clone(); 10], &cfg).map_err(|e| e.to_string())?;
    let bmu = &trained.weights[find_bmu(&trained, &x)];
    let dist = bmu.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    ensure(dist <= 1e-6, || format!("single vector: BMU distance {dist:e}"))?;

    let mut worst_gain = f64::NEG_INFINITY;
    for seed in [1u64, 2, 3] {
        let mut rng = SplitMix64::new(seed);
        let data: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.next_f64()]).collect();
        let cfg = SomConfig {
            rows: 1,
            cols: 8,
            seed,
            ..SomConfig::default()
        };
        let som = init_som(1, 8, 1, &data, seed).map_err(|e| e.to_string())?;
        let trained = train_som(&som, &data, &cfg).map_err(|e| e.to_string())?;
        let w: Vec<f64> = trained.weights.iter().map(|v| v[0]).collect();
        let up = w.windows(2).all(|p| p[1] >= p[0]);
        let down = w.windows(2).all(|p| p[1] <= p[0]);
        ensure(up || down, || format!("seed {seed}: not monotone {w:?}"))?;

        let total: u64 = hit_map(&trained, &data).iter().flatten().sum();
        ensure(total == data.len() as u64, || format!("seed {seed}: {total} hits"))?;

        let (q0, q1) = (quantization_error(&som, &data), quantization_error(&trained, &data));
        ensure(q1 <= q0, || format!("seed {seed}: QE {q0} -> {q1}"))?;
        worst_gain = worst_gain.max(q1 - q0);

        let mut rng = SplitMix64::new(seed + 40);
        let cloud: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let som = init_som(8, 8, 4, &cloud, seed).map_err(|e| e.to_string())?;
        let trained = train_som(&som, &cloud, &SomConfig { seed, ..SomConfig::default() })
            .map_err(|e| e.to_string())?;
        let total: u64 = hit_map(&trained, &cloud).iter().flatten().sum();
        ensure(total == cloud.len() as u64, || format!("8x8 seed {seed}: {total} hits"))?;
        let (q0, q1) = (quantization_error(&som, &cloud), quantization_error(&trained, &cloud));
        ensure(q1 <= q0, || format!("8x8 seed {seed}: QE {q0} -> {q1}"))?;
    }
    within_budget(t.elapsed(), Duration::from_secs(30))?;
    Ok(format!("BMU distance {dist:.1e}; 1x8 monotone on 3/3 seeds"))
}

fn end_to_end() -> Outcome {
    let cfg = PipelineConfig::reproduction();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let report = pipeline::run_two_tier(&cfg).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let again = pipeline::run_two_tier(&cfg).map_err(|e| e.to_string())?;

    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    pipeline::write_report(&report, &a).map_err(|e| e.to_string())?;
    pipeline::write_report(&again, &b).map_err(|e| e.to_string())?;
    let bytes_a = std::fs::read(&a).map_err(|e| e.to_string())?;
    let bytes_b = std::fs::read(&b).map_err(|e| e.to_string())?;
    ensure(bytes_a == bytes_b, || "reports differ between runs".into())?;
    ensure(report.snapshots.len() == 6, || format!("{} snapshots", report.snapshots.len()))?;

    let taus: Vec<f64> = report.mean_validation_brackets.iter().map(|b| b.tau).collect();
    ensure(taus == [0.05, 0.10, 0.25], || format!("brackets {taus:?}"))?;
    for s in &report.snapshots {
        let sizes = (s.sizes.train, s.sizes.validation, s.sizes.test);
        ensure(sizes == (2867, 614, 615), || format!("{}: sizes {sizes:?}", s.source))?;
        ensure(s.epochs_run <= cfg.mlp.max_epochs, || format!("{}: {} epochs", s.source, s.epochs_run))?;
        for acc in s.validation_brackets.iter().map(|b| b.accuracy).chain([s.validation_accuracy, s.test_accuracy]) {
            ensure((0.0..=1.0).contains(&acc), || format!("{}: accuracy {acc}", s.source))?;
        }
        println!(
            "    {}: epochs {} stop {:?} final mu {:.3e} val acc {:.4} test acc {:.4}",
            s.source, s.epochs_run, s.stop_reason, s.final_mu, s.validation_accuracy, s.test_accuracy
        );
    }
    ensure(report.reference_accuracy == REFERENCE_ACCURACY, || "reference value missing".into())?;
    within_budget(elapsed, Duration::from_secs(600))?;

    let brackets: Vec<String> = report
        .mean_validation_brackets
        .iter()
        .map(|b| format!("tau={:.2}: {:.4}", b.tau, b.accuracy))
        .collect();
    Ok(format!(
        "{:.1?} per run, deterministic; mean validation accuracy {} (reference {})",
        elapsed,
        brackets.join(", "),
        report.reference_accuracy
    ))
}

fn pgm_fixture() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fixture.pgm");
    pipeline::render_pgm(&[vec![0.0, 1.0], vec![2.0, 3.0]], &path).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    ensure(bytes == b"P2\n2 2\n255\n0 85\n170 255\n", || {
        format!("got {:?}", String::from_utf8_lossy(&bytes))
    })?;
    Ok("pixels 0 85 170 255, byte-exact".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("split reproduction", split_sizes),
        ("ABC momentum residual", abc_residual),
        ("div curl identity", div_curl_identity),
        ("trainer correctness", trainer_correctness),
        ("evidence updates", evidence_updates),
        ("mu explosion", mu_explosion),
        ("SOM properties", som_properties),
        ("end-to-end harness", end_to_end),
        ("PGM rendering", pgm_fixture),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[{}] PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[{}] FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
