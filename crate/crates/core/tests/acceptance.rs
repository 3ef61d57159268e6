//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tpe_as::baselines::{run_baseline, BaselineKind};
use tpe_as::harness::{self, report, ExperimentConfig, RunOptions};
use tpe_as::objective::{importance_weight, lambda_schedule};
use tpe_as::optimizer::{OptimizerConfig, Schedule};
use tpe_as::portfolio::{
    PortfolioBlackbox, ScenarioKind, ScenarioSpec, StrategyKind, StrategySpec,
};
use tpe_as::tpe::{split_history, top_count, TrialFlags};
use tpe_as::{
    run, summarize, Config, History, KdeModel, Mode, ParamDomain, ParamSpace, TrialRecord,
};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn schedule_exactness() -> Outcome {
    let first = lambda_schedule(1, 500).unwrap();
    let half = lambda_schedule(250, 500).unwrap();
    let end = lambda_schedule(500, 500).unwrap();
    let values: Vec<f64> = (1..=1000)
        .map(|t| lambda_schedule(t, 500).unwrap())
        .collect();
    let monotone = values.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        first < 1e-4 && (half - 0.5).abs() <= 1e-12 && end == 1.0 && monotone,
        format!("lambda(1)={first:.3e} lambda(250)={half} lambda(500)={end} monotone={monotone}"),
    )
}

fn clipping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut ok = true;
    for eps in [0.1, 0.2, 0.35] {
        for _ in 0..10_000 {
            let ratio = 10f64.powf(rng.random_range(-6.0..=6.0));
            let w = importance_weight(ratio, 1.0, eps).unwrap();
            ok &= (1.0 - eps..=1.0 + eps).contains(&w);
            worst = worst.max((w - 1.0).abs() - eps);
        }
        ok &= importance_weight(0.37, 0.37, eps).unwrap() == 1.0;
    }
    outcome(
        ok,
        format!("max excess over band {worst:.1e}, ratio 1 -> 1"),
    )
}

fn kde_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        let lo = rng.random_range(-5.0..5.0);
        let width = rng.random_range(0.1..10.0);
        let k = rng.random_range(2..=6);
        let labels: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let space = ParamSpace::new(vec![
            ParamDomain::continuous("x", lo, lo + width),
            ParamDomain::categorical("c", labels),
        ])
        .unwrap();
        let n = rng.random_range(5..=30);
        // members clustered in part of the domain so the density is far from flat
        let members: Vec<Config> = (0..n)
            .map(|_| {
                let c = space.sample_uniform(&mut rng);
                let x = lo + (c[0].as_f64() - lo) * 0.4;
                Config::new(vec![tpe_as::Value::Real(x), c[1]])
            })
            .collect();
        let kde = KdeModel::fit(&members, &space, 0.1).unwrap();
        // uniform proposal: integral = volume * E[p(X)], volume = width * k
        let mut mc_rng = ChaCha8Rng::seed_from_u64(100 + s);
        let samples = 100_000;
        let sum: f64 = (0..samples)
            .map(|_| kde.density(&space.sample_uniform(&mut mc_rng)).unwrap())
            .sum();
        let integral = sum / samples as f64 * width * k as f64;
        worst = worst.max((integral - 1.0).abs());
    }
    outcome(
        worst <= 0.05,
        format!("max |integral - 1| = {worst:.4} over 10 spaces"),
    )
}

fn split_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let space = ParamSpace::new(vec![ParamDomain::continuous("x", 0.0, 1.0)]).unwrap();
    let mut failures = Vec::new();
    for h in 0..200 {
        let n = rng.random_range(2..=500);
        let mut history = History::new();
        for step in 1..=n {
            // coarse rounding produces plenty of ties at the threshold
            let j: f64 = (rng.random_range(-3.0f64..3.0) * 4.0).round() / 4.0;
            history
                .push(TrialRecord {
                    step,
                    config: space.sample_uniform(&mut rng),
                    f_value: j,
                    j_score: j,
                    log_proposal_density: 0.0,
                    lambda_used: 0.0,
                    flags: TrialFlags::default(),
                })
                .unwrap();
        }
        let (good, bad) = split_history(&history, 0.15).unwrap();
        let expected = ((0.15 * n as f64).ceil() as usize).max(2);
        let min_good = good.iter().map(|t| t.j_score).fold(f64::INFINITY, f64::min);
        let max_bad = bad
            .iter()
            .map(|t| t.j_score)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut steps: Vec<usize> = good.iter().chain(&bad).map(|t| t.step).collect();
        steps.sort_unstable();
        let partition = steps == (1..=n).collect::<Vec<_>>();
        if good.len() != expected
            || top_count(n, 0.15) != expected
            || min_good < max_bad
            || !partition
        {
            failures.push(h);
        }
    }
    outcome(
        failures.is_empty(),
        format!("200 histories, failing: {failures:?}"),
    )
}

fn hybrid_blackbox(seed: u64) -> PortfolioBlackbox {
    PortfolioBlackbox::new(
        StrategySpec::preset(StrategyKind::ThresholdHybrid),
        &ScenarioSpec::preset(ScenarioKind::HighVolatility, seed),
    )
    .unwrap()
}

fn mode_reduction() -> Outcome {
    let mut identical = true;
    for seed in [0, 1] {
        let mut bb = hybrid_blackbox(seed + 1000);
        let space = bb.space().clone();
        let base = OptimizerConfig {
            budget: 100,
            seed,
            ..OptimizerConfig::default()
        };
        let zero = run(
            &OptimizerConfig {
                schedule: Schedule::Zero,
                ..base.clone()
            },
            &space,
            &mut bb,
        )
        .unwrap();
        let conventional = run(
            &OptimizerConfig {
                mode: Mode::Conventional,
                ..base
            },
            &space,
            &mut bb,
        )
        .unwrap();
        let bytes =
            |h: &History| serde_json::to_vec(&harness::trial_lines(h, &space).unwrap()).unwrap();
        identical &= zero == conventional && bytes(&zero) == bytes(&conventional);
    }
    outcome(
        identical,
        "eta=100, seeds 0 and 1, trial logs compared byte for byte",
    )
}

fn quadratic(c: &Config) -> tpe_as::Result<f64> {
    Ok(-(c[0].as_f64() - 0.3).powi(2) - (c[1].as_f64() - 0.7).powi(2))
}

fn quadratic_competence() -> Outcome {
    let space = ParamSpace::new(vec![
        ParamDomain::continuous("x1", 0.0, 1.0),
        ParamDomain::continuous("x2", 0.0, 1.0),
    ])
    .unwrap();
    let grid = 1001;
    let mut oracle = f64::NEG_INFINITY;
    for i in 0..grid {
        for j in 0..grid {
            let c = Config::new(vec![
                tpe_as::Value::Real(i as f64 / (grid - 1) as f64),
                tpe_as::Value::Real(j as f64 / (grid - 1) as f64),
            ]);
            oracle = oracle.max(quadratic(&c).unwrap());
        }
    }
    let best = |h: &History| summarize(h).unwrap().max_f;
    let opt = |seed| OptimizerConfig {
        budget: 200,
        seed,
        ..OptimizerConfig::default()
    };
    let mut random: Vec<f64> = (0..5)
        .map(|s| {
            best(
                &run_baseline(BaselineKind::RandomSearch, &opt(s), &space, &mut quadratic).unwrap(),
            )
        })
        .collect();
    let random_per_seed = random.clone();
    random.sort_by(f64::total_cmp);
    let random_median = random[2];

    let mut pass = true;
    let mut detail = format!("oracle {oracle:.4}, random median {random_median:.5}");
    for mode in [Mode::Adaptive, Mode::Conventional] {
        let bests: Vec<f64> = (0..5)
            .map(|s| {
                best(&run(&OptimizerConfig { mode, ..opt(s) }, &space, &mut quadratic).unwrap())
            })
            .collect();
        let close = bests.iter().filter(|b| **b >= oracle - 0.02).count();
        let beats = bests.iter().filter(|b| **b > random_median).count();
        let paired = bests
            .iter()
            .zip(&random_per_seed)
            .filter(|(t, r)| t > r)
            .count();
        pass &= close >= 4 && beats >= 4;
        detail += &format!("; {mode:?}: within 0.02 {close}/5, beats random median {beats}/5 (per-seed {paired}/5)");
    }
    outcome(pass, detail)
}

const ABLATION_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn ablation_config(output_dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        method: vec!["tpe_as".into(), "tpe_conventional".into()],
        strategy: vec!["threshold_hybrid".into()],
        scenario: vec!["high_volatility".into()],
        optimizer: OptimizerConfig {
            budget: 500,
            ..OptimizerConfig::default()
        },
        seeds: ABLATION_SEEDS.to_vec(),
        output_dir: output_dir.to_path_buf(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    report::quantile(&v, 0.5)
}

fn ablation_direction(dir: &Path) -> Outcome {
    let outcome_run =
        harness::run_experiment(&ablation_config(dir), &RunOptions::default()).unwrap();
    if !outcome_run.all_ok() {
        return outcome(false, format!("runs failed: {:?}", outcome_run.failures));
    }
    let pick = |method: harness::Method, f: fn(&harness::SummaryRow) -> Option<f64>| {
        median(
            outcome_run
                .rows
                .iter()
                .filter(|r| r.method == method)
                .filter_map(f)
                .collect(),
        )
    };
    let as_var = pick(harness::Method::TpeAs, |r| r.variance_f);
    let conv_var = pick(harness::Method::TpeConventional, |r| r.variance_f);
    let as_max = pick(harness::Method::TpeAs, |r| r.max_f);
    let conv_max = pick(harness::Method::TpeConventional, |r| r.max_f);
    let var_ok = as_var <= 0.7 * conv_var;
    let max_ok = as_max >= 0.95 * conv_max;
    outcome(
        var_ok && max_ok,
        format!(
            "median variance_f {as_var:.3} vs {conv_var:.3} (ratio {:.3}, need <= 0.7: {}); \
             median max_f {as_max:.3} vs {conv_max:.3} (ratio {:.3}, need >= 0.95: {})",
            as_var / conv_var,
            if var_ok { "ok" } else { "no" },
            as_max / conv_max,
            if max_ok { "ok" } else { "no" },
        ),
    )
}

fn determinism_and_audit(first: &Path, second: &Path) -> Outcome {
    let rerun = harness::run_experiment(&ablation_config(second), &RunOptions::default()).unwrap();
    let mut differing = Vec::new();
    for row in &rerun.rows {
        let a = fs::read(first.join(&row.trial_log)).unwrap();
        let b = fs::read(second.join(&row.trial_log)).unwrap();
        if a != b {
            differing.push(row.trial_log.clone());
        }
    }
    let mismatches: Vec<_> = [first, second]
        .iter()
        .flat_map(|d| harness::audit(&d.join(harness::SUMMARY_FILE)).unwrap())
        .collect();
    outcome(
        differing.is_empty() && mismatches.is_empty(),
        format!(
            "{} trial logs re-run, {} differ; {} audit mismatches over {} summary rows",
            rerun.rows.len(),
            differing.len(),
            mismatches.len(),
            2 * rerun.rows.len()
        ),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");

    let criteria: Vec<Criterion> = vec![
        ("1 schedule exactness", Box::new(schedule_exactness)),
        ("2 clipping", Box::new(clipping)),
        ("3 KDE normalization", Box::new(kde_normalization)),
        ("4 split correctness", Box::new(split_correctness)),
        ("5 mode reduction", Box::new(mode_reduction)),
        ("6 quadratic competence", Box::new(quadratic_competence)),
        (
            "7 ablation direction",
            Box::new(|| ablation_direction(&first)),
        ),
        (
            "8 determinism and audit",
            Box::new(|| determinism_and_audit(&first, &second)),
        ),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let result = check();
        failed += usize::from(!result.pass);
        println!(
            "{} criterion {name}: {} ({:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
