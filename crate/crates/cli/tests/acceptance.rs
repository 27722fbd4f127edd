//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/support/brute_force.rs"]
mod brute_force;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use brute_force::{label, labels, subsets, SmallDag};
use immortal_cli::{replicate_seed, run_experiment, write_report, ExperimentConfig, ExperimentReport, Format};
use immortal_core::cohort::rng::CounterRng;
use immortal_core::cohort::{
    enumerate_exact, exact_true_effect, simulate_cohort, CompetingConfig, ScenarioConfig,
};
use immortal_core::dag::{is_d_separated, open_paths, BiasKind, Dag, VariableId};
use immortal_core::design_library::{build_design_dag, verify_claims, FigureId};
use immortal_core::estimators::{
    cumulative_incidence, expand_records, fit_discrete_hazard, logistic_log_likelihood,
    newton_raphson_logistic, EstimatorId, HAZARD_MAX_ITER, HAZARD_TOLERANCE,
};
use immortal_core::study_designs::{
    apply_design, exact_dataset, exact_design_totals, AnalysisDataset, DesignId, DesignParams,
};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

/// Horizon-4 scenario used throughout.
fn scenario(n_subjects: usize, log_effect: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_subjects,
        horizon: 4,
        frailty_prevalence: 0.3,
        award_probability: 0.5,
        award_delay: 0.4,
        base_death_hazard: 0.05,
        log_effect,
        log_frailty_effect: 2f64.ln(),
        competing: None,
        eligibility_age: 2,
    }
}

/// Competing-risk pair with a strong shared cause; the first has no
/// competing event and the same primary-event hazard.
fn competing_pair() -> (ScenarioConfig, ScenarioConfig) {
    let mut plain = scenario(20_000, 0.0);
    plain.frailty_prevalence = 0.5;
    plain.log_frailty_effect = 5f64.ln();
    plain.base_death_hazard = 0.02;
    let mut competing = plain.clone();
    competing.competing = Some(CompetingConfig {
        base_outcome_hazard: 0.02,
        base_cr_hazard: 0.15,
        log_effect_on_cr: 0.0,
    });
    (plain, competing)
}

fn params(c: &ScenarioConfig) -> DesignParams {
    DesignParams::new(c.horizon)
        .with_tau(c.eligibility_age)
        .with_window(c.eligibility_age)
}

fn exact_estimand(design: DesignId, c: &ScenarioConfig) -> f64 {
    let dist = enumerate_exact(c).unwrap();
    exact_design_totals(design, &dist, &params(c)).unwrap().log_rate_ratio()
}

fn exact_bias(design: DesignId, c: &ScenarioConfig) -> f64 {
    exact_estimand(design, c) - exact_true_effect(c).unwrap().value
}

fn structural_suite() -> Outcome {
    let start = Instant::now();
    let expected = [
        (FigureId::Fig1b, BiasKind::Confounding),
        (FigureId::Fig1d, BiasKind::Selection),
        (FigureId::Fig2b, BiasKind::Composite),
        (FigureId::Fig2d, BiasKind::Selection),
        (FigureId::Fig3b, BiasKind::Confounding),
        (FigureId::Fig3d, BiasKind::Selection),
        (FigureId::FigS1, BiasKind::None),
        (FigureId::FigS2, BiasKind::None),
        (FigureId::FigS3, BiasKind::Selection),
    ];
    let mut claims = 0;
    for (figure, kind) in expected {
        let spec = figure.spec();
        let got = build_design_dag(&spec).unwrap().classify().unwrap().kind;
        ensure(got == kind, || format!("{figure}: {got}, expected {kind}"))?;
        let report = verify_claims(&spec).unwrap();
        if let Some(c) = report.claims.iter().find(|c| !c.pass) {
            return Err(format!("{figure}: claim `{}` observed {}", c.description, c.observed));
        }
        claims += report.claims.len();
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("9 figures, {claims} claims, {:.0?}", start.elapsed()))
}

fn random_dag(rng: &CounterRng, case: u64) -> SmallDag {
    let n = 2 + (rng.uniform(case, 0) * 6.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.uniform(case, 1 + i as u64) * (i + 1) as f64) as usize;
        order.swap(i, j);
    }
    let mut edges = BTreeSet::new();
    let mut k = 100;
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform(case, k) < 0.5 {
                edges.insert((order[i], order[j]));
            }
            k += 1;
        }
    }
    SmallDag { n, edges }
}

fn to_dag(d: &SmallDag) -> Dag {
    Dag::new(
        (0..d.n).map(|i| VariableId::new(label(i), "")),
        d.edges
            .iter()
            .map(|&(a, b)| (VariableId::new(label(a), ""), VariableId::new(label(b), ""))),
        std::iter::empty(),
    )
    .unwrap()
}

fn dsep_oracle() -> Outcome {
    let start = Instant::now();
    let rng = CounterRng::new(2024);
    let mut queries = 0usize;
    for case in 0..200 {
        let d = random_dag(&rng, case);
        let dag = to_dag(&d);
        for x in 0..d.n {
            for y in 0..d.n {
                if x == y {
                    continue;
                }
                let pool: Vec<usize> = (0..d.n).filter(|&v| v != x && v != y).collect();
                for zs in subsets(&pool) {
                    let (xs, ys) = (BTreeSet::from([x]), BTreeSet::from([y]));
                    let expected = d.separated(&xs, &ys, &zs);
                    let got = is_d_separated(&dag, &labels(&xs), &labels(&ys), &labels(&zs)).unwrap();
                    ensure(got == expected, || {
                        format!("dag {:?}: {x} vs {y} given {zs:?}", d.edges)
                    })?;
                    let paths = open_paths(&dag, &label(x), &label(y), &labels(&zs)).unwrap();
                    ensure(paths.iter().all(|p| !p.is_open()) == expected, || {
                        format!("open_paths disagrees on {:?}", d.edges)
                    })?;
                    queries += 1;
                }
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("200 DAGs, {queries} queries, 0 disagreements, {:.1?}", start.elapsed()))
}

/// Shared Monte Carlo run for the two null-scenario criteria.
fn null_experiment() -> ExperimentReport {
    let config = ExperimentConfig::new(
        scenario(10_000, 0.0),
        &[
            (DesignId::EverExposedFull, EstimatorId::RateRatio),
            (DesignId::SurvivorEligibility, EstimatorId::RateRatio),
        ],
        200,
        31,
        10_000,
    );
    run_experiment(&config).unwrap()
}

fn bias_direction(report: &ExperimentReport, elapsed: Duration) -> Outcome {
    let exact = exact_estimand(DesignId::EverExposedFull, &scenario(1, 0.0));
    ensure(exact.exp() < 1.0, || format!("exact rate ratio {}", exact.exp()))?;
    let row = &report.rows[0];
    let mc = row.sd / (row.replicates as f64).sqrt();
    let gap = (row.mean - exact).abs();
    ensure(gap < 3.0 * mc, || format!("MC mean {} vs exact {exact}: gap {gap} > 3 x {mc}", row.mean))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "exact RR {:.4}, MC mean log {:.4} vs exact {:.4} (mc error {:.4}), {:.1?}",
        exact.exp(),
        row.mean,
        exact,
        mc,
        elapsed
    ))
}

fn null_eligibility(report: &ExperimentReport) -> Outcome {
    let exact = exact_estimand(DesignId::SurvivorEligibility, &scenario(1, 0.0));
    ensure((exact.exp() - 1.0).abs() < 1e-10, || format!("exact rate ratio {}", exact.exp()))?;
    let row = &report.rows[1];
    let mc = row.sd / (row.replicates as f64).sqrt();
    ensure(row.mean.abs() < 3.0 * mc, || format!("MC bias {} vs 3 x {mc}", row.mean))?;
    Ok(format!(
        "exact RR - 1 = {:.1e}, MC bias {:.4} (mc error {:.4})",
        exact.exp() - 1.0,
        row.mean,
        mc
    ))
}

fn opposite_direction() -> Outcome {
    let mut c = scenario(1, -0.3);
    c.log_frailty_effect = 3f64.ln();
    let estimand = exact_estimand(DesignId::SurvivorEligibility, &c);
    let truth = exact_true_effect(&c).unwrap().value;
    ensure(estimand > truth, || format!("estimand {estimand} <= truth {truth}"))?;
    Ok(format!("estimand {estimand:.4} > truth {truth:.4}"))
}

fn m_bias_magnitude() -> Outcome {
    let c = scenario(1, -0.3);
    let m = exact_bias(DesignId::SurvivorEligibility, &c);
    let conf = exact_bias(DesignId::EverExposedFull, &c);
    ensure(m.abs() < conf.abs(), || format!("|{m}| >= |{conf}|"))?;
    Ok(format!(
        "|{m:.4}| < |{conf:.4}| on the default scenario (scenario-specific)"
    ))
}

fn partial_fix() -> Outcome {
    let c = scenario(1, 0.0);
    let partial = exact_bias(DesignId::ExcludeImmortalExposure, &c);
    let full = exact_bias(DesignId::EverExposedFull, &c);
    ensure(partial.signum() == full.signum() && partial != 0.0, || {
        format!("signs differ: {partial} vs {full}")
    })?;
    ensure(partial.abs() < full.abs(), || format!("|{partial}| >= |{full}|"))?;
    Ok(format!("0 < |{partial:.4}| < |{full:.4}|, same sign"))
}

fn competing_worsens() -> Outcome {
    let (plain, competing) = competing_pair();
    let without = exact_bias(DesignId::EverExposedFull, &plain);
    let with = exact_bias(DesignId::EverExposedFull, &competing);
    ensure(with.abs() > without.abs(), || format!("|{with}| <= |{without}|"))?;
    Ok(format!(
        "with competing event {with:.4}, without {without:.4} (scenario-specific)"
    ))
}

fn corrections_config(log_effect: f64) -> ExperimentConfig {
    ExperimentConfig::new(
        scenario(20_000, log_effect),
        &[
            (DesignId::PersonTimeSplit, EstimatorId::RateRatio),
            (DesignId::TimeDependent, EstimatorId::DiscreteHazard),
            (DesignId::SequentialTrials, EstimatorId::RateRatio),
            (DesignId::IttAligned, EstimatorId::RateRatio),
        ],
        500,
        97,
        200_000,
    )
}

fn corrections(reports: &[ExperimentReport], elapsed: Duration) -> Outcome {
    let mut parts = Vec::new();
    for report in reports {
        for row in &report.rows {
            ensure(row.bias.abs() < 0.05, || {
                format!("{}/{}: bias {}", row.design, row.estimator, row.bias)
            })?;
            if row.design == DesignId::IttAligned {
                ensure(row.bias.abs() < 3.0 * row.mc_error, || {
                    format!("baseline contrast bias {} vs 3 x {}", row.bias, row.mc_error)
                })?;
            }
            parts.push(format!("{:+.4}", row.bias));
        }
    }
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:.1?}"))?;
    Ok(format!("biases [{}], {:.1?}", parts.join(" "), elapsed))
}

/// Largest central-difference gradient of the mean log-likelihood,
/// evaluated on binomial cells.
fn fd_gradient(data: &AnalysisDataset, frailty: Option<&[u8]>, beta: &[f64]) -> f64 {
    let mut cells = std::collections::BTreeMap::<(u8, Option<u8>), (f64, f64)>::new();
    for r in expand_records(data, frailty).unwrap() {
        let cell = cells.entry((r.exposed, r.u)).or_default();
        cell.0 += r.weight * f64::from(r.event);
        cell.1 += r.weight;
    }
    let x: Vec<Vec<f64>> = cells
        .keys()
        .map(|&(e, u)| {
            let mut v = vec![1.0, f64::from(e)];
            v.extend(u.map(f64::from));
            v
        })
        .collect();
    let y: Vec<f64> = cells.values().map(|(e, n)| e / n).collect();
    let w: Vec<f64> = cells.values().map(|(_, n)| *n).collect();
    let h = 1e-5;
    (0..beta.len())
        .map(|j| {
            let (mut up, mut down) = (beta.to_vec(), beta.to_vec());
            up[j] += h;
            down[j] -= h;
            ((logistic_log_likelihood(&x, &y, &w, &up) - logistic_log_likelihood(&x, &y, &w, &down))
                / (2.0 * h))
                .abs()
        })
        .fold(0.0, f64::max)
}

fn numeric_core(corrections: &[ExperimentReport]) -> Outcome {
    // Closed-form 2x2: exposed 3 events in 10 periods, unexposed 2 in 12.
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (exposed, events, periods) in [(1.0, 3, 10), (0.0, 2, 12)] {
        for i in 0..periods {
            x.push(vec![1.0, exposed]);
            y.push(u8::from(i < events));
        }
    }
    let fit = newton_raphson_logistic(&x, &y, HAZARD_TOLERANCE, HAZARD_MAX_ITER).unwrap();
    let log_or = ((3.0f64 / 7.0) / (2.0 / 10.0)).ln();
    let se = (1.0 / 3.0 + 1.0 / 7.0 + 1.0 / 2.0 + 1.0 / 10.0f64).sqrt();
    ensure((fit.coefficients[1] - log_or).abs() < 1e-8, || {
        format!("log OR {} vs {log_or}", fit.coefficients[1])
    })?;
    ensure((fit.se(1) - se).abs() < 1e-8, || format!("se {} vs {se}", fit.se(1)))?;

    // Refit every hazard model of the corrections runs and audit its gradient.
    let mut audited = 0usize;
    let mut worst = 0.0f64;
    for report in corrections {
        let c = &report.config;
        for (i, run) in c.designs.iter().enumerate() {
            if run.estimator == EstimatorId::RateRatio {
                continue;
            }
            let results: Vec<Result<f64, String>> = (0..c.replicates)
                .into_par_iter()
                .map(|r| {
                    let cohort = simulate_cohort(&c.scenario, replicate_seed(c.master_seed, r)).unwrap();
                    let frailty: Vec<u8> = cohort.iter().map(|h| h.u).collect();
                    let data = apply_design(run.design, &cohort, &run.params).unwrap();
                    let u = (run.estimator == EstimatorId::DiscreteHazardAdjusted).then_some(&frailty[..]);
                    let fit = fit_discrete_hazard(&data, u).map_err(|e| e.to_string())?;
                    if fit.estimate != report.estimates[i][r] {
                        return Err(format!("replicate {r} refit differs"));
                    }
                    Ok(fd_gradient(&data, u, &fit.fit.coefficients))
                })
                .collect();
            for g in results {
                let g = g?;
                worst = worst.max(g);
                audited += 1;
            }
        }
    }
    ensure(worst < 10.0 * HAZARD_TOLERANCE, || format!("gradient {worst}"))?;

    // CIF normalization on every competing-risk dataset in the suite.
    let (_, competing) = competing_pair();
    let mut worst_norm = 0.0f64;
    let mut curves = 0usize;
    let mut check = |data: &AnalysisDataset| -> Result<(), String> {
        for c in cumulative_incidence(data).strata {
            worst_norm = worst_norm.max(c.normalization_error());
            for i in 0..c.grid.len() {
                ensure(c.cif_outcome[i] <= c.naive_outcome[i] + 1e-15, || {
                    format!("{}: CIF above naive curve", data.design)
                })?;
            }
            curves += 1;
        }
        Ok(())
    };
    let dist = enumerate_exact(&competing).unwrap();
    for design in DesignId::ALL.into_iter().filter(|&d| d != DesignId::Ptdm) {
        check(&exact_dataset(design, &dist, &params(&competing)).unwrap())?;
    }
    let cohort = simulate_cohort(&competing, 5).unwrap();
    for design in DesignId::ALL {
        check(&apply_design(design, &cohort, &params(&competing).with_seed(5)).unwrap())?;
    }
    ensure(worst_norm < 1e-9, || format!("normalization error {worst_norm}"))?;
    Ok(format!(
        "2x2 exact to 1e-8; {audited} fits, max FD gradient {worst:.1e}; {curves} CIF curves, max error {worst_norm:.1e}"
    ))
}

fn determinism() -> Outcome {
    let mut scenario = scenario(5_000, -0.3);
    scenario.competing = Some(CompetingConfig {
        base_outcome_hazard: 0.03,
        base_cr_hazard: 0.05,
        log_effect_on_cr: 0.1,
    });
    let config = ExperimentConfig::new(
        scenario,
        &[
            (DesignId::EverExposedFull, EstimatorId::RateRatio),
            (DesignId::Ptdm, EstimatorId::RateRatio),
            (DesignId::TimeDependent, EstimatorId::DiscreteHazardAdjusted),
            (DesignId::SequentialTrials, EstimatorId::RateRatio),
            (DesignId::IttAligned, EstimatorId::RateRatio),
        ],
        40,
        123,
        20_000,
    );
    let dir = tempfile::tempdir().unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = single.install(|| run_experiment(&config)).unwrap();
    let b = run_experiment(&config).unwrap();
    let formats = [Format::Csv, Format::Svg];
    write_report(&a, &dir.path().join("a"), &formats).unwrap();
    write_report(&b, &dir.path().join("b"), &formats).unwrap();
    for f in ["report.csv", "report.svg", "provenance.txt"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        ensure(x == y, || format!("{f} differs"))?;
    }
    Ok("report.csv, report.svg, provenance.txt identical across thread counts".into())
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut run = |n: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2}: {title}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {n:>2}: {title}: {why}");
            }
        }
    };

    run(1, "structural suite", &mut structural_suite);
    run(2, "d-separation oracle equivalence", &mut dsep_oracle);

    let start = Instant::now();
    let null = catch_unwind(null_experiment).ok();
    let null_elapsed = start.elapsed();
    run(3, "exact bias direction favours winners", &mut || {
        bias_direction(null.as_ref().ok_or("null experiment failed")?, null_elapsed)
    });
    run(4, "null eligibility design is unbiased", &mut || {
        null_eligibility(null.as_ref().ok_or("null experiment failed")?)
    });
    run(5, "selection bias opposes the true effect", &mut opposite_direction);
    run(6, "M-bias smaller than confounding bias", &mut m_bias_magnitude);
    run(7, "excluding immortal time is a partial fix", &mut partial_fix);
    run(8, "competing risks worsen bias", &mut competing_worsens);

    let start = Instant::now();
    let corrected: Option<Vec<ExperimentReport>> = catch_unwind(|| {
        [0.0, -0.3]
            .into_iter()
            .map(|b| run_experiment(&corrections_config(b)).unwrap())
            .collect()
    })
    .ok();
    let corrected_elapsed = start.elapsed();
    run(9, "corrected designs recover the truth", &mut || {
        corrections(corrected.as_deref().ok_or("experiment failed")?, corrected_elapsed)
    });
    run(10, "numeric core", &mut || {
        numeric_core(corrected.as_deref().ok_or("experiment failed")?)
    });
    run(11, "determinism", &mut determinism);

    if failures == 0 {
        println!("acceptance: all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 11 criteria fail");
        ExitCode::FAILURE
    }
}
