//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use resgld::config::ScenarioConfig;
use resgld::diagnostics::{discretization_sweep, w2_empirical_vs_analytic, SweepSettings, SweepTable};
use resgld::presets::preset;
use resgld::rng::{Purpose, RandomSource, Stream};
use resgld::run::{simulate, write_artifacts, RunSummary, METRICS_FILE, SAMPLES_FILE, SWAPS_FILE};
use resgld::target::EnergyModel;
use resgld::verify;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summaries(name: &str) -> Vec<RunSummary> {
    SEEDS
        .par_iter()
        .map(|&seed| {
            let cfg = ScenarioConfig { seed, ..preset(name).unwrap() };
            simulate(&cfg).unwrap().summary
        })
        .collect()
}

fn median_w2(name: &str) -> f64 {
    median(summaries(name).iter().map(|s| s.final_w2.unwrap()).collect())
}

fn unbiasedness() -> Outcome {
    let start = Instant::now();
    let checks = verify::unbiasedness(11, 1_000_000).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let passed = checks.iter().all(|c| c.passed) && secs < 10.0;
    let mut detail: Vec<String> = checks.iter().map(|c| c.detail.clone()).collect();
    detail.push(format!("{secs:.2}s (limit 10s)"));
    Outcome {
        name: "swap-estimator unbiasedness",
        passed,
        detail: detail.join("; "),
    }
}

fn sa_consistency() -> Outcome {
    let start = Instant::now();
    let checks = verify::sa_consistency(12).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        name: "SA consistency",
        passed: checks[0].passed && secs < 1.0,
        detail: format!("{}; {secs:.3}s (limit 1s)", checks[0].detail),
    }
}

/// Median over seeds of W2 between 1e5 exact draws and the analytic target.
fn statistical_floor(cfg: &ScenarioConfig) -> f64 {
    let floors = SEEDS
        .iter()
        .map(|&seed| {
            let mut rng = Stream::new(seed, 0, Purpose::Auxiliary);
            let draws: Vec<f64> = (0..100_000).map(|_| cfg.model.mixture.sample(&mut rng)).collect();
            w2_empirical_vs_analytic(&draws, &cfg.model.mixture, cfg.quantile_grid).unwrap()
        })
        .collect();
    median(floors)
}

fn ordering(family: &str, name: &'static str) -> Outcome {
    let cfg = preset(&format!("{family}-resgld")).unwrap();
    let adaptive = median_w2(&format!("{family}-resgld"));
    let naive = median_w2(&format!("{family}-naive"));
    let sgld = median_w2(&format!("{family}-sgld"));
    let floor = statistical_floor(&cfg);
    let passed = adaptive < naive && adaptive < sgld && adaptive <= 5.0 * floor;
    Outcome {
        name,
        passed,
        detail: format!(
            "median W2 resgld {adaptive:.4}, naive {naive:.4}, sgld {sgld:.4}; floor {floor:.4}, \
             resgld/floor {:.2} (limit 5)",
            adaptive / floor
        ),
    }
}

fn gm3_swap_rates() -> Outcome {
    let bands = [("gm3-F2", 0.001, 0.016), ("gm3-F4", 0.03, 0.14), ("gm3-Finf", 0.30, 0.60)];
    let mut passed = true;
    let mut detail = Vec::new();
    for (name, lo, hi) in bands {
        let f = median(summaries(name).iter().map(|s| s.accept_fraction).collect());
        let ok = (lo..=hi).contains(&f);
        passed &= ok;
        detail.push(format!("{name} {:.3}% in [{:.1}%, {:.1}%]", 100.0 * f, 100.0 * lo, 100.0 * hi));
    }
    let f1: Vec<u64> = summaries("gm3-F1").iter().map(|s| s.swap_accepts).collect();
    let f1_median = median(f1.iter().map(|&a| a as f64).collect());
    passed &= f1_median <= 5.0;
    detail.push(format!("gm3-F1 accepts per seed {f1:?}, median {f1_median} (limit 5)"));
    Outcome {
        name: "gm3 swap rates",
        passed,
        detail: detail.join("; "),
    }
}

fn representation_equivalence() -> Outcome {
    let check = &verify::representation_equivalence(13, 10_000).unwrap()[0];
    Outcome {
        name: "representation equivalence",
        passed: check.passed,
        detail: check.detail.clone(),
    }
}

/// Nonincreasing W2 as eta halves, allowing one inversion no larger than
/// the floor plus two combined standard errors; nondecreasing in gradient
/// noise at eta = 0.05.
fn sweep_verdict(t: &SweepTable, settings: &SweepSettings) -> (bool, String) {
    let mut etas = settings.etas.clone();
    etas.sort_by(|a, b| b.total_cmp(a));
    let noiseless: Vec<_> = etas.iter().map(|&e| t.cell(e, 0.0).unwrap()).collect();
    let mut inversions = 0;
    let mut within_band = true;
    for w in noiseless.windows(2) {
        let (coarse, fine) = (w[0], w[1]);
        if fine.w2_mean > coarse.w2_mean {
            inversions += 1;
            let band = t.floor.w2_mean + 2.0 * coarse.w2_stderr.hypot(fine.w2_stderr);
            within_band &= fine.w2_mean - coarse.w2_mean <= band;
        }
    }
    let at_005: Vec<_> = settings.grad_noise_stds.iter().map(|&g| t.cell(0.05, g).unwrap()).collect();
    let noise_ok = at_005.windows(2).all(|w| w[1].w2_mean >= w[0].w2_mean);
    let fmt = |rows: &[&resgld::diagnostics::SweepRow]| {
        rows.iter()
            .map(|r| format!("{:.4}±{:.4}", r.w2_mean, r.w2_stderr))
            .collect::<Vec<_>>()
            .join(" ")
    };
    (
        inversions <= 1 && within_band && noise_ok,
        format!(
            "eta {:?}: {} ({inversions} inversion(s)); noise {:?} at eta 0.05: {}; floor {:.4}; {} seeds/cell",
            etas,
            fmt(&noiseless),
            settings.grad_noise_stds,
            fmt(&at_005),
            t.floor.w2_mean,
            settings.n_runs * settings.n_repeats
        ),
    )
}

fn discretization_scaling() -> Outcome {
    let settings = SweepSettings::default();
    let table = discretization_sweep(&preset("discretization").unwrap(), &settings).unwrap();
    let (passed, detail) = sweep_verdict(&table, &settings);
    Outcome {
        name: "discretization scaling",
        passed,
        detail,
    }
}

fn fd_gradient() -> Outcome {
    let mut worst = 0.0f64;
    for (i, name) in ["gm1-resgld", "gm2-resgld", "gm3-F1"].iter().enumerate() {
        let mixture = preset(name).unwrap().model.mixture;
        let model = EnergyModel::exact(mixture.clone());
        let (lo, hi) = mixture.span(4.0);
        let mut rng = Stream::new(i as u64, 0, Purpose::Auxiliary);
        for _ in 0..100 {
            let x = lo + (hi - lo) * rng.uniform();
            let h = 1e-5 * x.abs().max(1.0);
            let fd = (model.exact_energy(x + h).unwrap() - model.exact_energy(x - h).unwrap()) / (2.0 * h);
            let g = model.exact_gradient(x).unwrap();
            worst = worst.max((fd - g).abs() / g.abs());
        }
    }
    Outcome {
        name: "gradient correctness",
        passed: worst < 1e-6,
        detail: format!("max relative error {worst:.2e} over 300 points (limit 1e-6)"),
    }
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut mismatched = Vec::new();
    for name in ["gm1-resgld", "gm2-naive", "gm3-F4", "gm1-sgld"] {
        let cfg = ScenarioConfig {
            seed: 7,
            iterations: 20_000,
            ..preset(name).unwrap()
        };
        let outs: Vec<_> = dirs
            .iter()
            .map(|d| {
                let dir = d.path().join(name);
                write_artifacts(&simulate(&cfg).unwrap(), &dir).unwrap();
                dir
            })
            .collect();
        for file in [SAMPLES_FILE, METRICS_FILE, SWAPS_FILE] {
            let read = |d: &Path| std::fs::read(d.join(file)).unwrap();
            if read(&outs[0]) != read(&outs[1]) {
                mismatched.push(format!("{name}/{file}"));
            }
        }
    }
    Outcome {
        name: "determinism",
        passed: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            "4 presets x 3 CSVs byte-identical across reruns".into()
        } else {
            format!("differing: {}", mismatched.join(", "))
        },
    }
}

fn main() -> ExitCode {
    // Timed criteria first, before the parallel workload competes for cores.
    let mut outcomes = vec![unbiasedness(), sa_consistency()];
    let heavy: Vec<fn() -> Outcome> = vec![
        || ordering("gm1", "gm1 ordering"),
        || ordering("gm2", "gm2 heavy-tail ordering"),
        gm3_swap_rates,
        representation_equivalence,
        discretization_scaling,
        fd_gradient,
        determinism,
    ];
    outcomes.extend(heavy.into_par_iter().map(|f| f()).collect::<Vec<_>>());

    println!();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("\nacceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
