//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p chancert-cli --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use chancert_cli::config::{MubCount, RunConfig, WitnessName};
use chancert_cli::sweep::{sweep_mstm, SweepOptions, SweepRow};
use chancert_core::choi_oracle::{equivalence_check, known_sn_channel, max_certified, soundness_violations};
use chancert_core::correlations::{mix, CorrelationTensor};
use chancert_core::witness::{certify, closed_form_certified};
use chancert_core::{build_mstm, svd, ComplexMatrix, FiberSpec, Mstm, MubFamily, NoiseModel, Rng, WitnessKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

struct Report {
    failures: usize,
}

impl Report {
    fn run(&mut self, number: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(_) if elapsed > budget => ("FAIL", format!("over the {:.0?} budget", budget)),
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            self.failures += 1;
        }
        println!("{status} criterion {number} ({name}): {detail} [{:.2?}]", elapsed);
    }
}

fn sweep(
    mstm: &Mstm,
    preset: &str,
    dims: Vec<usize>,
    witnesses: Vec<WitnessName>,
    mub_m: Vec<MubCount>,
    noisy: bool,
) -> Result<Vec<SweepRow>, String> {
    let mut config = RunConfig::preset(preset).expect("known preset");
    config.fiber = mstm.spec().cloned().expect("simulated fiber");
    config.dims = dims;
    config.witnesses = witnesses;
    config.mub_m = mub_m;
    if !noisy {
        config.noise = NoiseModel::None;
    }
    sweep_mstm(mstm, &config, &SweepOptions::default()).map_err(|e| e.to_string())
}

fn find(rows: &[SweepRow], d: usize, witness: &str, m: usize) -> Result<usize, String> {
    rows.iter()
        .find(|r| r.d == d && r.witness == witness && r.m == m)
        .map(|r| r.certified_n)
        .ok_or_else(|| format!("missing row d={d} {witness} m={m}"))
}

fn noiseless_exactness() -> Outcome {
    let mstm = build_mstm(&FiberSpec::graded_2m().monochromatic()).map_err(|e| e.to_string())?;
    let dims = vec![2, 3, 5, 7, 11, 13];
    let all = vec![WitnessName::PtSteering, WitnessName::FtBavaresco, WitnessName::FtMorelli];
    let rows = sweep(
        &mstm,
        "paper-2m",
        dims.clone(),
        all,
        vec![MubCount::Fixed(2), MubCount::Fixed(3), MubCount::DPlusOne],
        false,
    )?;
    let expected = dims.len() * 5 - 1; // m=3 and d+1 coincide at d=2
    if rows.len() != expected {
        return Err(format!("{} rows, expected {expected}", rows.len()));
    }
    if let Some(r) = rows.iter().find(|r| r.certified_n != r.d) {
        return Err(format!("{} m={} at d={} certified {}", r.witness, r.m, r.d, r.certified_n));
    }
    Ok(format!("{} (d, witness, m) combinations all certify d", rows.len()))
}

fn choi_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 4, 5] {
        let gap = equivalence_check(d, 100, &mut Rng::from_seed(d as u64)).map_err(|e| e.to_string())?;
        worst = worst.max(gap);
    }
    if worst > 1e-9 {
        return Err(format!("max |Δ| = {worst:.3e}"));
    }
    Ok(format!("400 random two-Kraus channels, max |Δ| = {worst:.2e}"))
}

fn soundness() -> Outcome {
    let mut checked = 0;
    for d in 2..=6usize {
        for k in 1..=d {
            let base = known_sn_channel(d, k).map_err(|e| e.to_string())?;
            let (n, kind) = max_certified(&base).map_err(|e| e.to_string())?;
            if n > k {
                return Err(format!("{kind} certifies {n} on known_sn_channel({d}, {k})"));
            }
            let seed = 0xA11CE + (d * 16 + k) as u64;
            let v = soundness_violations(d, k, 500, &mut Rng::from_seed(seed)).map_err(|e| e.to_string())?;
            if v > 0 {
                return Err(format!("{v} violations at d={d}, k={k}"));
            }
            checked += 500;
        }
    }
    Ok(format!("{checked} dressed channels over d <= 6 and every k, zero violations"))
}

fn depolarizing_threshold() -> Outcome {
    let mut compared = 0;
    for d in [4usize, 9, 16] {
        let kinds = [
            WitnessKind::FtBavaresco,
            WitnessKind::PtSteering,
            WitnessKind::FtMorelli(2),
            WitnessKind::FtMorelli(3),
            WitnessKind::FtMorelli(d + 1),
        ];
        for step in 0..=100 {
            let p = step as f64 / 100.0;
            let c = mix(&CorrelationTensor::perfect(d, d + 1), p);
            for kind in kinds {
                let r = certify(&c.truncated(kind.num_bases()).map_err(|e| e.to_string())?, kind)
                    .map_err(|e| e.to_string())?;
                let closed = closed_form_certified(kind, d, r.lhs);
                if closed != r.certified_n {
                    return Err(format!("{kind} d={d} p={p}: scan {} vs closed form {closed}", r.certified_n));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} (d, p, witness) points agree exactly"))
}

fn table_one(mstm_2m: &Mstm, mstm_5m: &Mstm) -> Outcome {
    let witnesses = vec![WitnessName::PtSteering, WitnessName::FtBavaresco];
    let two = vec![MubCount::Fixed(2)];
    let rows_5m = sweep(mstm_5m, "paper-5m", vec![13, 89], witnesses.clone(), two.clone(), true)?;
    let rows_2m = sweep(mstm_2m, "paper-2m", vec![29, 131], witnesses, two, true)?;
    let pt_5m = find(&rows_5m, 13, "pt_steering", 2)?;
    let pt_2m = find(&rows_2m, 29, "pt_steering", 2)?;
    let ft_2m = find(&rows_2m, 131, "ft_bavaresco", 2)?;
    let ft_5m = find(&rows_5m, 89, "ft_bavaresco", 2)?;
    let detail = format!("5 m PT d=13: {pt_5m}; 2 m PT d=29: {pt_2m}; 2 m FT d=131: {ft_2m}; 5 m FT d=89: {ft_5m}");
    let within = |n: usize, target: f64| (n as f64 - target).abs() <= 0.25 * target;
    let ok = (3..=5).contains(&pt_5m) && (7..=11).contains(&pt_2m) && within(ft_2m, 59.0) && within(ft_5m, 26.0);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mub_count_monotone(mstm_5m: &Mstm) -> Outcome {
    let dims = vec![5, 13, 29, 53];
    let ms = vec![MubCount::Fixed(2), MubCount::Fixed(3), MubCount::Fixed(5), MubCount::DPlusOne];
    let rows = sweep(mstm_5m, "paper-5m", dims.clone(), vec![WitnessName::FtMorelli], ms.clone(), true)?;
    let mut summary = Vec::new();
    for &d in &dims {
        let series: Vec<usize> =
            ms.iter().map(|m| find(&rows, d, "ft_morelli", m.resolve(d))).collect::<Result<_, _>>()?;
        if series.windows(2).any(|w| w[1] < w[0]) {
            return Err(format!("d={d}: {series:?} decreases in m"));
        }
        summary.push(format!("d={d} {series:?}"));
    }
    let ideal = build_mstm(&FiberSpec::graded_5m().monochromatic()).map_err(|e| e.to_string())?;
    let rows = sweep(&ideal, "paper-5m", dims.clone(), vec![WitnessName::FtMorelli], vec![MubCount::DPlusOne], false)?;
    for &d in &dims {
        let n = find(&rows, d, "ft_morelli", d + 1)?;
        if n != d {
            return Err(format!("noiseless d={d}, m=d+1 certified {n}"));
        }
    }
    Ok(format!("{}; m=d+1 noiseless certifies d", summary.join(", ")))
}

fn invariant_suites() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let primes = [2usize, 3, 5, 7, 11, 13, 17, 19];
    let mut names = Vec::new();

    runner
        .run(&(0..primes.len(), 0usize..100), |(i, extra)| {
            let d = primes[i];
            let f = MubFamily::prime_family(d, 2 + extra % d).unwrap();
            prop_assert!(f.unbiasedness_error() <= 1e-9);
            Ok(())
        })
        .map_err(|e| format!("MUB unbiasedness: {e}"))?;
    names.push("MUB unbiasedness");

    runner
        .run(&(2usize..16, 1usize..6, any::<u64>(), 0.0f64..=1.0), |(d, m, seed, p)| {
            let mut rng = Rng::from_seed(seed);
            let raw = (0..m * d * d).map(|_| rng.uniform() + 1e-6).collect();
            let c = CorrelationTensor::from_raw(d, m, raw).unwrap();
            prop_assert!(c.normalization_error() <= 1e-9);
            prop_assert!(mix(&c, p).normalization_error() <= 1e-9);
            Ok(())
        })
        .map_err(|e| format!("tensor normalization: {e}"))?;
    names.push("tensor normalization");

    runner
        .run(&(1usize..20, 1usize..20, any::<u64>()), |(r, c, seed)| {
            let mut rng = Rng::from_seed(seed);
            let a = ComplexMatrix::from_fn(r, c, |_, _| rng.complex_normal());
            prop_assert!(svd(&a).unwrap().reconstruct().max_abs_diff(&a) <= 1e-8);
            Ok(())
        })
        .map_err(|e| format!("SVD reconstruction: {e}"))?;
    names.push("SVD reconstruction");

    runner
        .run(&(2usize..12, any::<u64>(), 0.0f64..=1.0, 0.0f64..=1.0), |(d, seed, p, q)| {
            let mut rng = Rng::from_seed(seed);
            let raw = (0..2 * d * d).map(|_| rng.uniform() + 1e-6).collect();
            let c = CorrelationTensor::from_raw(d, 2, raw).unwrap();
            let a = mix(&mix(&c, p), q);
            let b = mix(&c, p * q);
            let gap = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(gap <= 1e-12);
            Ok(())
        })
        .map_err(|e| format!("noise semigroup: {e}"))?;
    names.push("noise semigroup");

    Ok(format!("{} with 256 cases each", names.join(", ")))
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    report.run(1, "noiseless exactness", Duration::from_secs(10), noiseless_exactness);
    report.run(2, "Choi-state equivalence", Duration::from_secs(60), choi_equivalence);
    report.run(3, "soundness on known Schmidt-number channels", Duration::from_secs(600), soundness);
    report.run(4, "depolarizing threshold inversion", Duration::from_secs(60), depolarizing_threshold);

    let mut fibers: Option<(Mstm, Mstm)> = None;
    report.run(5, "fiber certification against the experiment", Duration::from_secs(900), || {
        let both = (build_mstm(&FiberSpec::graded_2m()), build_mstm(&FiberSpec::graded_5m()));
        let (a, b) = match both {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Err(format!("fiber simulation failed: {e}")),
        };
        let outcome = table_one(&a, &b);
        fibers = Some((a, b));
        outcome
    });
    report.run(6, "certified dimension grows with MUB count", Duration::from_secs(900), || match &fibers {
        Some((_, mstm_5m)) => mub_count_monotone(mstm_5m),
        None => Err("no 5 m fiber simulation".into()),
    });
    report.run(7, "invariant suites", Duration::from_secs(120), invariant_suites);

    if report.failures == 0 {
        println!("acceptance: all 7 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 7 criteria fail", report.failures);
        ExitCode::FAILURE
    }
}
