//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use negassoc::dependence_check::{is_na, DependenceConfig};
use negassoc::discrete_laws::{
    class_q_pmf, condition_n_joint, efron_monotone_check, geometric_truncated, is_ulc, poisson_binomial, Pmf,
    DEFAULT_MASS_FLOOR,
};
use negassoc::harness::concentration::{chebyshev_bound, chernoff_bound, kolmogorov_bound_check};
use negassoc::harness::{run, ExperimentConfig};
use negassoc::multiaffine::{is_strongly_rayleigh, polarize, product_measure, verify_witness, StabilityConfig, StabilityWitness, SubsetMeasure};
use negassoc::ordering::{binomial_void_superadditivity, poisson_domination_report};
use negassoc::pointproc::{
    dpp_count_law, dpp_exact_law, dpp_single_cell_law, exact_count_law, DppSampler, MixedSampledProcess,
    PartitionModel, PointProcess,
};

const COV_TOL: f64 = 1e-10;

type Outcome = Result<String, String>;

fn na_cfg() -> DependenceConfig {
    DependenceConfig { tol: COV_TOL, ..Default::default() }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// NA of the count vector of every process in `taus`, over random
/// partitions with 2 or 3 cells.
fn na_of_mixed(rng: &mut ChaCha8Rng, taus: &[Pmf]) -> Result<f64, String> {
    let mut worst = f64::NEG_INFINITY;
    for (k, tau) in taus.iter().enumerate() {
        let m = rng.random_range(2..=3);
        let part = random_partition(rng, m);
        let law = exact_count_law(&MixedSampledProcess::new(tau.clone(), part.clone())).map_err(|e| e.to_string())?;
        let v = is_na(&law.law, &na_cfg()).map_err(|e| e.to_string())?;
        worst = worst.max(v.max_value);
        ensure(v.holds(), || format!("instance {k}: tau {:?}, q {:?}: {:?}", tau.probs(), part.q(), v.witness))?;
    }
    Ok(worst)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let taus: Vec<Pmf> = (0..50)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let ps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            if rng.random::<bool>() {
                class_q_pmf(uniform_in(&mut rng, 0.0, 1.0), &ps, DEFAULT_MASS_FLOOR).unwrap().0
            } else {
                poisson_binomial(&ps).unwrap()
            }
        })
        .collect();
    let worst = na_of_mixed(&mut rng, &taus)?;
    Ok(format!("50/50 class-Q processes are NA (largest up-set covariance {worst:.3e})"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut taus: Vec<Pmf> = (0..8).map(|_| random_ulc_not_real_rooted(&mut rng)).collect();
    while taus.len() < 50 {
        let n = rng.random_range(1..=3);
        taus.push(random_ulc(&mut rng, n));
    }
    let nrr = taus.iter().filter(|t| !real_rooted(t)).count();
    ensure(nrr >= 5, || format!("only {nrr} non-real-rooted instances"))?;
    let worst = na_of_mixed(&mut rng, &taus)?;
    Ok(format!("50/50 ULC processes are NA, {nrr} with non-real-rooted pgf (largest covariance {worst:.3e})"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for k in 0..200 {
        let n = rng.random_range(1..=10);
        let ps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let p = poisson_binomial(&ps).map_err(|e| e.to_string())?;
        let c = is_ulc(&p).map_err(|e| e.to_string())?;
        ensure(c.holds, || format!("instance {k}: ps {ps:?} fails at {:?}", c.first_violation))?;
    }
    Ok("200/200 Poisson-binomial laws are ULC".into())
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    // (a) diagonal recovery
    let mut worst_a = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let w: Vec<f64> = (0..=n).map(|_| rng.random::<f64>()).collect();
        let tau = Pmf::from_weights(w).unwrap();
        let diag = polarize(&tau).map_err(|e| e.to_string())?.diagonal();
        for (k, d) in diag.iter().enumerate() {
            worst_a = worst_a.max((d - tau.prob(k)).abs());
        }
    }
    ensure(worst_a <= 1e-12, || format!("diagonal recovery error {worst_a:e}"))?;
    // (b) binomial polarizes to the product measure
    let mut worst_b = 0.0f64;
    for n in 1..=10 {
        for p in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
            let pol = polarize(&Pmf::binomial(n, p).unwrap()).map_err(|e| e.to_string())?;
            let prod = product_measure(&vec![p; n]).map_err(|e| e.to_string())?;
            for (a, b) in pol.coeffs().iter().zip(prod.coeffs()) {
                let rel = if *b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
                worst_b = worst_b.max(rel);
            }
        }
    }
    ensure(worst_b <= 1e-14, || format!("binomial vs product relative error {worst_b:e}"))?;
    // (c) NA of polarized ULC laws
    for k in 0..40 {
        let n = rng.random_range(1..=4);
        let tau = random_ulc(&mut rng, n);
        let law = polarize(&tau).and_then(|m| m.to_joint()).map_err(|e| e.to_string())?;
        let v = is_na(&law, &na_cfg()).map_err(|e| e.to_string())?;
        ensure(v.holds(), || format!("polarized ULC instance {k} ({:?}) not NA", tau.probs()))?;
    }
    Ok(format!(
        "diagonal error {worst_a:.1e}; binomial = product measure up to relative {worst_b:.1e}; 40/40 polarized ULC laws NA"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for k in 0..20 {
        let n = rng.random_range(1..=6);
        let ps: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let m = product_measure(&ps).map_err(|e| e.to_string())?;
        let cfg = StabilityConfig { seed: k, ..Default::default() };
        let v = is_strongly_rayleigh(&m, &cfg).map_err(|e| e.to_string())?;
        ensure(!v.violated(), || format!("product measure {ps:?} flagged: {:?}", v.witness))?;
    }
    let mu = SubsetMeasure::probability(2, vec![(0b00, 0.5), (0b11, 0.5)]).map_err(|e| e.to_string())?;
    let v = is_strongly_rayleigh(&mu, &StabilityConfig::default()).map_err(|e| e.to_string())?;
    let w = v.witness.clone().ok_or("0.5 + 0.5 z1 z2 not flagged")?;
    ensure(verify_witness(&mu, &w, 1e-10), || "witness does not re-verify".into())?;
    let slack = match &w {
        StabilityWitness::Rayleigh { exact_slack, .. } => *exact_slack,
        other => return Err(format!("expected a Rayleigh witness, got {other:?}")),
    };
    ensure(slack <= -0.25 + 1e-10, || format!("recomputed slack {slack}"))?;
    Ok(format!("20/20 product measures pass; 0.5 + 0.5 z1 z2 violated with exact slack {slack}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let draws = 100_000usize;
    let mut worst_mass = 0.0f64;
    let mut worst_pb = 0.0f64;
    let mut worst_z = 0.0f64;
    for k in 0..20 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=n.min(3));
        let d = random_dpp(&mut rng, n, m);
        let law = dpp_exact_law(&d).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((law.raw_total - 1.0).abs());
        let counts = dpp_count_law(&d).map_err(|e| e.to_string())?;
        for cell in 0..m {
            let pb = dpp_single_cell_law(&d, cell).map_err(|e| e.to_string())?;
            let marg = counts.law.marginal_pmf(cell).map_err(|e| e.to_string())?;
            for j in 0..=pb.bound().max(marg.bound()) {
                worst_pb = worst_pb.max((pb.prob(j) - marg.prob(j)).abs());
            }
        }
        let v = is_na(&counts.law, &na_cfg()).map_err(|e| e.to_string())?;
        ensure(v.holds(), || format!("kernel {k}: count vector not NA: {:?}", v.witness))?;
        let sampler = DppSampler::new(&d).map_err(|e| e.to_string())?;
        let mut freq = vec![0usize; 1 << n];
        for rep in 0..draws as u64 {
            let mut r = negassoc::harness::mc::replication_rng(7_000 + k as u64, rep);
            let mask: usize = sampler.sample(&mut r).iter().map(|i| 1 << i).sum();
            freq[mask] += 1;
        }
        for (mask, p) in law.probs.iter().enumerate() {
            let hat = freq[mask] as f64 / draws as f64;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let z = if sd > 0.0 { (hat - p).abs() / sd } else if hat == 0.0 { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
            ensure(z <= 4.0, || format!("kernel {k}, subset {mask:#b}: frequency {hat} vs {p} ({z:.2} sd)"))?;
        }
    }
    ensure(worst_mass <= 1e-10, || format!("subset law mass off by {worst_mass:e}"))?;
    ensure(worst_pb <= 1e-10, || format!("single-cell law off by {worst_pb:e}"))?;
    Ok(format!(
        "20 kernels: mass error {worst_mass:.1e}, single-cell error {worst_pb:.1e}, all NA, worst sampler deviation {worst_z:.2} sd"
    ))
}

fn domination_ok(p: &PointProcess, what: &str) -> Result<f64, String> {
    let r = poisson_domination_report(p).map_err(|e| e.to_string())?;
    let slack = r.min_slack();
    ensure(r.pass && slack >= -1e-10, || format!("{what}: report fails, min slack {slack:e}"))?;
    Ok(slack)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for n in 1..=6 {
        for p in [0.1, 0.5, 0.9] {
            for q in [vec![0.5], vec![0.2, 0.3], vec![0.3, 0.3, 0.4], vec![0.1, 0.2, 0.3]] {
                let proc_ = PointProcess::Mixed(MixedSampledProcess::new(
                    Pmf::binomial(n, p).unwrap(),
                    PartitionModel::new(q.clone()).unwrap(),
                ));
                worst = worst.min(domination_ok(&proc_, &format!("Binomial({n}, {p}), q {q:?}"))?);
                count += 1;
            }
        }
    }
    for k in 0..20 {
        let n = rng.random_range(1..=5);
        let tau = random_ulc(&mut rng, n);
        let m = rng.random_range(1..=3);
        let proc_ = PointProcess::Mixed(MixedSampledProcess::new(tau.clone(), random_partition(&mut rng, m)));
        worst = worst.min(domination_ok(&proc_, &format!("ULC instance {k} {:?}", tau.probs()))?);
    }
    for k in 0..20 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=n.min(3));
        let proc_ = PointProcess::Dpp(random_dpp(&mut rng, n, m));
        worst = worst.min(domination_ok(&proc_, &format!("DPP instance {k}"))?);
    }
    Ok(format!("{count} binomial, 20 ULC and 20 DPP reports pass (min slack {worst:.2e})"))
}

fn criterion_8() -> Outcome {
    let mut worst_void = f64::INFINITY;
    let mut worst_phi = f64::INFINITY;
    for n in 1..=10 {
        for i in 1..=10 {
            let p = i as f64 / 10.0;
            for j in 1..=10 {
                let q = j as f64 / 20.0;
                let r = binomial_void_superadditivity(n, p, q, q).map_err(|e| e.to_string())?;
                worst_void = worst_void.min(r.void.slack);
                worst_phi = worst_phi.min(r.phi.slack);
                ensure(r.void.holds(), || format!("void bound fails at n={n}, p={p}, q={q}"))?;
                ensure(r.phi.slack >= -1e-12, || format!("phi not superadditive at n={n}, p={p}: {:?}", r.phi))?;
            }
        }
    }
    Ok(format!("1000 grid points: min void slack {worst_void:.2e}, min phi slack {worst_phi:.2e}"))
}

fn criterion_9() -> Outcome {
    let mut checked = 0;
    for p in [0.3, 0.5, 0.7] {
        let (g, _) = geometric_truncated(p, DEFAULT_MASS_FLOOR).map_err(|e| e.to_string())?;
        let laws = [g.clone(), g];
        for s in 0..=8 {
            let joint = condition_n_joint(&laws, s).map_err(|e| e.to_string())?;
            let v = is_na(&joint, &na_cfg()).map_err(|e| e.to_string())?;
            ensure(v.holds(), || format!("geometric({p}) pair given sum {s}: {:?}", v.witness))?;
            checked += 1;
        }
    }
    let bern = Pmf::new(vec![0.6, 0.4]).unwrap();
    let (geo, _) = geometric_truncated(0.5, 1.0 - 1e-9).map_err(|e| e.to_string())?;
    let inputs: [(&str, Vec<Pmf>); 2] = [("Bernoulli", vec![bern; 4]), ("geometric", vec![geo; 3])];
    for (name, laws) in inputs {
        let sum = efron_monotone_check(&laws, |x| x.iter().sum::<usize>() as f64).map_err(|e| e.to_string())?;
        let first = efron_monotone_check(&laws, |x| x[0] as f64).map_err(|e| e.to_string())?;
        ensure(sum.holds, || format!("{name}: coordinate-sum phi fails at {:?}", sum.violation))?;
        ensure(first.holds, || format!("{name}: first-coordinate phi fails at {:?}", first.violation))?;
    }
    Ok(format!("{checked} conditional laws NA; Efron monotonicity holds for Bernoulli and geometric inputs"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut checks = 0;
    for k in 0..100 {
        let n = rng.random_range(1..=6);
        let tau = if k % 2 == 0 { random_ulc(&mut rng, n) } else { Pmf::binomial(n, rng.random()).unwrap() };
        let m = rng.random_range(1..=3);
        let law = exact_count_law(&MixedSampledProcess::new(tau, random_partition(&mut rng, m)))
            .map_err(|e| e.to_string())?;
        let eps = [0.25, 0.5, 1.0, 2.0][k % 4];
        for cell in 0..m {
            let r = chebyshev_bound(&law, cell, eps).map_err(|e| e.to_string())?;
            ensure(r.holds(), || format!("Chebyshev violated: {r:?}"))?;
            checks += 1;
            for t in [0.1, 0.5, 1.0, 2.0] {
                for r in chernoff_bound(&law, cell, eps, t).map_err(|e| e.to_string())? {
                    ensure(r.holds(), || format!("Chernoff violated: {r:?}"))?;
                    checks += 1;
                }
            }
        }
    }
    let mut kol = Vec::new();
    for k in 0..10u64 {
        let cells = rng.random_range(3..=5);
        let n = rng.random_range(2..=8);
        let tau = random_ulc(&mut rng, n);
        let proc_ = PointProcess::Mixed(MixedSampledProcess::new(tau, PartitionModel::new(vec![1.0 / cells as f64; cells]).unwrap()));
        let b: Vec<f64> = (1..=cells).map(|i| i as f64).collect();
        let eps = [0.5, 1.0][k as usize % 2];
        let start = (k % 2 == 1).then_some(2);
        let r = kolmogorov_bound_check(&proc_, &b, eps, start, 100_000, 9_000 + k).map_err(|e| e.to_string())?;
        ensure(r.holds(), || format!("Kolmogorov check {k} fails: {r:?}"))?;
        kol.push(r.slack);
    }
    let min_kol = kol.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("{checks} exact Chebyshev/Chernoff bounds hold; 10/10 Kolmogorov checks hold (min slack {min_kol:.3})"))
}

fn criterion_11() -> Outcome {
    let configs = [
        r#"{"schema_version":1,"seed":11,"scenario":{"kind":"na-check","process":{"type":"mixed","tau":[0,1],"partition":[0.3,0.7]}}}"#,
        r#"{"schema_version":1,"seed":11,"scenario":{"kind":"sr-check","measure":{"n":2,"entries":[[0,0.5],[3,0.5]]},"stability":{"grid_points_per_pair":500,"lines":100}}}"#,
        r#"{"schema_version":1,"seed":11,"scenario":{"kind":"domination","process":{"type":"dpp","kernel":[[0.5,0.3],[0.3,0.5]]}}}"#,
        r#"{"schema_version":1,"seed":11,"reps":5000,"scenario":{"kind":"concentration","process":{"type":"mixed","tau":{"kind":"binomial","params":{"n":4,"p":0.5}},"partition":[0.25,0.25,0.25,0.25]},"eps":1.0,"b":[1,2,3,4],"start":2}}"#,
        r#"{"schema_version":1,"seed":11,"reps":2000,"scenario":{"kind":"sample","process":{"type":"dpp","kernel":[[0.5,0.3],[0.3,0.5]]},"emit_draws":true}}"#,
    ];
    for text in configs {
        let cfg = ExperimentConfig::parse(text).map_err(|e| e.to_string())?;
        let a = run(&cfg).map_err(|e| e.to_string())?.to_json();
        let b = run(&cfg).map_err(|e| e.to_string())?.to_json();
        ensure(a == b, || format!("{} reports differ", cfg.scenario.name()))?;
    }
    // through the binary, written to disk
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, configs[3]).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(tag);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_negassoc"))
            .args(["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.code() == Some(0), || format!("run exited with {status}"))?;
        outputs.push(std::fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "CLI reports differ".into())?;
    Ok(format!("{} scenario configs and one CLI run reproduce byte for byte", configs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("NA of class-Q mixed sampled processes", criterion_1),
        ("NA of ULC mixed sampled processes", criterion_2),
        ("Poisson-binomial laws are ULC", criterion_3),
        ("polarization", criterion_4),
        ("Rayleigh machinery", criterion_5),
        ("determinantal suite", criterion_6),
        ("Poisson domination", criterion_7),
        ("binomial void superadditivity", criterion_8),
        ("conditioning suite", criterion_9),
        ("concentration bounds", criterion_10),
        ("reproducibility", criterion_11),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        total += took;
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.1}s]", i + 1, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{:.1}s]", i + 1, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed [{:.1}s]", criteria.len() - failed, total.as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
