//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use idla_core::aggregation::{init_idla, run_idla, FlowSnapshot, ReferenceSampler, WalkObserver};
use idla_core::analysis::{
    compare_growth, ks_two_sample, measure_run, tentacle_scan, ReferenceTrack,
};
use idla_core::harmonic::{
    build_h, build_omega, martingale_observer, mean_value_discrepancy, poisson_tilde,
    sup_mean_value_discrepancy, DiskPole, PoleContext, PoleEntry,
};
use idla_core::lattice::{sites_in, Resolution, Site, SiteBox, SiteSet, STEPS};
use idla_core::potential::{estimate_c, PotentialTable};
use idla_core::rng::{derive_seed, particle_rng, StepSource};
use idla_core::sources::{discretize, FlowSpec, SourceSequence};
use idla_lab::campaign::{run_campaign, write_campaign_csv};
use idla_lab::commands::{harmonic_verify, kernel, sandpile, scaling, HarmonicReport};
use idla_lab::config::ExperimentConfig;
use rayon::prelude::*;
use serde_json::json;
use tempfile::TempDir;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, passed: bool, detail: String) -> Outcome {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} {id:>2} {name}: {detail}");
    Outcome {
        id,
        name,
        passed,
        detail,
    }
}

fn config(v: serde_json::Value) -> ExperimentConfig {
    serde_json::from_value(v).expect("valid config")
}

fn res(m: u32) -> Resolution {
    Resolution::new(i64::from(m)).unwrap()
}

fn pole_angle(k: usize, poles: usize) -> f64 {
    0.1 + k as f64 * TAU / poles as f64
}

fn field_box(pole: &DiskPole, m: Resolution) -> SiteBox {
    SiteBox::around(
        Site::new(0, 0),
        (pole.radius * m.as_f64()).ceil() as i32 + 8,
    )
}

struct Pole {
    pole: DiskPole,
    ctx: PoleContext,
}

fn example1_pole(spec: &FlowSpec, seq: &SourceSequence, c: f64, theta: f64) -> Pole {
    let pole = DiskPole::new(spec, seq.m, spec.total(), theta).unwrap();
    let ctx = pole.context(seq.m, c, 1.5, seq).unwrap();
    Pole { pole, ctx }
}

fn kernel_criteria(cache: &Path, out: &Path) -> Vec<Outcome> {
    let cfg = config(json!({ "kind": "kernel" }));
    let clock = Instant::now();
    let r = kernel(&cfg, out, cache).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let check = |name: &str| r.checks.iter().find(|c| c.name == name).unwrap().passed;
    let exact = check("max |laplacian g| away from 0")
        && check("laplacian g(0)")
        && check("g(1,0)")
        && check("g(1,1)");
    vec![
        outcome(
            1,
            "potential kernel exactness",
            exact && !r.cache_hit && secs < 10.0,
            format!(
                "L = {}, residual {:.1e}, laplacian at 0 = {:.15}, built in {secs:.2} s",
                r.half_width, r.residual, r.origin_laplacian
            ),
        ),
        outcome(
            2,
            "expansion constants",
            (1.02..=1.04).contains(&r.lambda) && r.c1 <= 1.0,
            format!("lambda = {:.7}, C1 = {:.4}", r.lambda, r.c1),
        ),
        outcome(
            3,
            "directional constant c",
            r.c >= 0.15 && r.directions == 32,
            format!(
                "c = {:.4} over {} directions (lattice-only estimate {:.4})",
                r.c, r.directions, r.c_lattice
            ),
        ),
    ]
}

fn harmonic_suite(cache: &Path, out: &Path) -> HarmonicReport {
    let cfg = config(json!({
        "kind": "harmonic-verify",
        "m": [16, 32],
        "harmonic": { "poles": 16, "green_m": [16, 32, 64] }
    }));
    harmonic_verify(&cfg, out, cache).unwrap()
}

fn pole_suite_criterion(r: &HarmonicReport) -> Outcome {
    let check = |name: &str| {
        r.poles
            .iter()
            .all(|p| p.checks.iter().find(|c| c.name == name).unwrap().passed)
    };
    let h_ok = r.poles.iter().all(|p| (1.0..=2.0).contains(&p.h_at_pole));
    let (h_min, h_max) = r.poles.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| {
        (a.min(p.h_at_pole), b.max(p.h_at_pole))
    });
    let c1_at = |m: u32| {
        r.poles
            .iter()
            .filter(|p| p.m == m)
            .map(|p| p.c1)
            .fold(0.0, f64::max)
    };
    let c1 = r.c1.unwrap_or(f64::NAN);
    outcome(
        4,
        "pole field suite",
        r.poles.len() == 32 && h_ok && check("harmonicity residual of H") && c1.is_finite(),
        format!(
            "{} poles, H(zeta) in [{h_min:.3}, {h_max:.3}], single C1 = {c1:.3} (max {:.3} at m=16, {:.3} at m=32)",
            r.poles.len(),
            c1_at(16),
            c1_at(32)
        ),
    )
}

/// Walk from `start` inside `interior`; 1 when it steps into `zeta` from
/// `inward`, 0 when it leaves any other way.
fn slit_walk(
    interior: &SiteSet,
    zeta: Site,
    inward: Site,
    start: Site,
    seed: u64,
    index: u64,
) -> f64 {
    let mut steps = StepSource::new(particle_rng(seed, index));
    let mut z = start;
    loop {
        let (dx, dy) = STEPS[steps.next_dir()];
        let next = z.offset(dx, dy);
        if !interior.contains(next) {
            return f64::from(u8::from(next == zeta && z == inward));
        }
        z = next;
    }
}

fn poisson_criterion(r: &HarmonicReport, table: &PotentialTable) -> Outcome {
    const WALKS: u64 = 100_000;
    const SITES: usize = 10;
    let spec = FlowSpec::concentric_disks(1);
    let m = res(16);
    let seq = discretize(&spec, m).unwrap();
    let c = estimate_c(table, 32);
    let per_pole: Vec<usize> = (0..16)
        .into_par_iter()
        .map(|k| {
            let p = example1_pole(&spec, &seq, c, pole_angle(k, 16));
            let d_tau = p.pole.interior();
            let slit = poisson_tilde(&p.ctx, &d_tau, PoleEntry::Slit).unwrap();
            let mut inner = d_tau.clone();
            inner.remove(p.ctx.zeta);
            let far: Vec<Site> = inner.iter().filter(|z| z.dist(p.ctx.zeta) > 2.0).collect();
            let stride = far.len() / SITES;
            let mut within = 0;
            for (i, &z) in far.iter().step_by(stride).take(SITES).enumerate() {
                let seed = derive_seed(5, &[k as u64, i as u64]);
                let hits: f64 = (0..WALKS)
                    .map(|w| slit_walk(&inner, p.ctx.zeta, p.ctx.inward(), z, seed, w))
                    .sum();
                let est = hits / WALKS as f64;
                let exact = slit.get(z).unwrap();
                let se = (exact * (1.0 - exact) / WALKS as f64).sqrt();
                if (est - exact).abs() <= 3.0 * se + 1e-12 {
                    within += 1;
                }
            }
            within
        })
        .collect();
    let mc_ok = per_pole.iter().all(|&w| w * 100 >= 95 * SITES);
    let worst = per_pole.iter().copied().min().unwrap_or(0);

    let ratio_ok = r.poles.iter().all(|p| {
        let ok = |name: &str| p.checks.iter().find(|c| c.name == name).unwrap().passed;
        ok("last-exit ratio spread") && ok("last-exit ratio")
    });
    let (rmin, rmax) = r.poles.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| {
        (a.min(p.ratio_min), b.max(p.ratio_max))
    });
    let green = r.green.as_ref().unwrap();
    let green_ok = green.checks.iter().all(|c| c.passed);
    outcome(
        5,
        "Poisson kernel and Green's function",
        mc_ok && ratio_ok && green_ok,
        format!(
            "Monte Carlo within 3 SE at >= {worst}/{SITES} sites per pole (16 poles, m=16, {WALKS} walks); \
             last-exit ratio in [{rmin:.4}, {rmax:.4}]; Green error ratios {:?}, rate {:.2}",
            green.convergence.ratios.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            green.convergence.rate
        ),
    )
}

fn mean_value_criterion(table: &PotentialTable) -> Outcome {
    const POLES: usize = 16;
    let spec = FlowSpec::concentric_disks(1);
    let c = estimate_c(table, 32);
    let ms = [16u32, 32, 64, 128];
    let per_m: Vec<(f64, f64)> = ms
        .iter()
        .map(|&m| {
            let seq = discretize(&spec, res(m)).unwrap();
            let initial = sites_in(&spec.d0, res(m)).unwrap();
            let sums = (0..POLES)
                .into_par_iter()
                .map(|k| {
                    let p = example1_pole(&spec, &seq, c, pole_angle(k, POLES));
                    let h = build_h(table, &p.ctx, field_box(&p.pole, res(m))).unwrap();
                    let h_disc =
                        sup_mean_value_discrepancy(&h, &spec, &seq, p.ctx.tau, 40).unwrap();
                    let d_tau = p.pole.interior();
                    let slit = poisson_tilde(&p.ctx, &d_tau, PoleEntry::Slit).unwrap();
                    let mut inner = d_tau.clone();
                    inner.remove(p.ctx.zeta);
                    let prefix: Vec<Site> = (0..seq.count_through(p.ctx.tau))
                        .map(|i| seq.site(i))
                        .collect();
                    let pt_disc = mean_value_discrepancy(&slit, &inner, &initial, &prefix).unwrap();
                    (h_disc, pt_disc)
                })
                .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            (sums.0 / POLES as f64, sums.1 / POLES as f64)
        })
        .collect();
    let mf: Vec<f64> = ms.iter().map(|&m| f64::from(m)).collect();
    let h_disc: Vec<f64> = per_m.iter().map(|v| v.0).collect();
    let pt_disc: Vec<f64> = per_m.iter().map(|v| v.1).collect();
    let growth = compare_growth(&mf, &h_disc).unwrap();
    let c_prime = pt_disc[0] / mf[0].sqrt();
    let envelope_ok = pt_disc
        .iter()
        .zip(&mf)
        .all(|(d, m)| *d <= c_prime * m.sqrt() * (1.0 + 1e-12));
    outcome(
        6,
        "mean-value discrepancies",
        growth.log_preferred() && envelope_ok,
        format!(
            "H discrepancy {h_disc:.3?} (AIC log {:.2} vs power {:.2}); Poisson kernel discrepancy {pt_disc:.3?} vs C' m^0.5 with C' = {c_prime:.4}",
            growth.log.aic, growth.power.aic
        ),
    )
}

fn martingale_criterion(table: &PotentialTable) -> Outcome {
    const RUNS: u64 = 200;
    let spec = FlowSpec::concentric_disks(1);
    let m = res(32);
    let seq = discretize(&spec, m).unwrap();
    let c = estimate_c(table, 32);
    let mut lines = Vec::new();
    let mut ok = true;
    for k in [0, 4, 8, 12] {
        let p = example1_pole(&spec, &seq, c, pole_angle(k, 16));
        let h = build_h(table, &p.ctx, field_box(&p.pole, m)).unwrap();
        let omega = build_omega(&p.ctx, &h, &p.pole.interior()).unwrap();
        let t_final = seq.count_through(p.ctx.tau);
        let values: Vec<f64> = (0..RUNS)
            .into_par_iter()
            .map(|run| {
                let mut state = init_idla(&spec, m, derive_seed(77, &[k as u64, run])).unwrap();
                let mut obs = martingale_observer(&h, &seq);
                run_idla(
                    &mut state,
                    &seq,
                    t_final,
                    Some(&omega.omega),
                    &mut [&mut obs as &mut dyn WalkObserver],
                )
                .unwrap();
                obs.trace.value
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        ok &= mean.abs() <= 3.0 * se;
        lines.push(format!("pole {k}: {mean:+.4} (SE {se:.4})"));
    }
    outcome(
        7,
        "martingale mean",
        ok,
        format!("{RUNS} runs at m=32; {}", lines.join(", ")),
    )
}

fn scaling_criterion(out: &Path) -> Outcome {
    let cfg = config(json!({
        "kind": "scaling",
        "m": [16, 32, 64, 128],
        "trials": 20,
        "seed": 2024
    }));
    let clock = Instant::now();
    let r = scaling(&cfg, out).unwrap();
    let f = &r.fit;
    let excludes = !(f.ci_low..=f.ci_high).contains(&0.3);
    let violations: Vec<usize> = r.envelope.levels.iter().map(|l| l.violations).collect();
    outcome(
        8,
        "fluctuation scaling",
        f.beta >= 0.55 && excludes && r.envelope.holds(),
        format!(
            "beta = {:.4}, 95% CI [{:.4}, {:.4}]; envelope C = {:.3}, violations {violations:?} of 20; {} runs in {:.0} s",
            f.beta,
            f.ci_low,
            f.ci_high,
            r.envelope.c_hat,
            r.runs,
            clock.elapsed().as_secs_f64()
        ),
    )
}

fn quadrature_criterion(out: &Path) -> Outcome {
    let example1 = config(json!({ "kind": "sandpile", "m": [64, 128] }));
    let asym_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sandpile.json");
    let mut asymmetric = ExperimentConfig::load(&asym_path).unwrap();
    asymmetric.m = vec![64, 128];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, cfg) in [("Example 1", example1), ("asymmetric", asymmetric)] {
        let dir = out.join(label.replace(' ', "-"));
        std::fs::create_dir_all(&dir).unwrap();
        let r = sandpile(&cfg, &dir).unwrap();
        let (lo, hi) = (&r.levels[0], &r.levels[1]);
        let mut worst = f64::INFINITY;
        for (h, d64) in &lo.quadrature {
            let d128 = hi.quadrature.iter().find(|(g, _)| g == h).unwrap().1;
            if d64.max(d128) < 1e-9 {
                continue;
            }
            let gain = d64 / d128;
            worst = worst.min(gain);
            if gain < 1.7 {
                ok = false;
                parts.push(format!(
                    "{label} {}: {d64:.2e} -> {d128:.2e} ({gain:.2}x)",
                    h.name()
                ));
            }
        }
        parts.push(format!("{label} smallest reduction {worst:.3}x"));
    }
    outcome(9, "quadrature identity", ok, parts.join("; "))
}

fn campaign_values(out: &Path, seed: u64, reverse_ties: bool) -> Vec<f64> {
    let cfg =
        config(json!({ "m": [32], "trials": 200, "seed": seed, "reverse_ties": reverse_ties }));
    run_campaign(&cfg, out)
        .unwrap()
        .runs
        .iter()
        .map(|r| r.summary.max_fluctuation)
        .collect()
}

fn abelian_criterion(out: &Path) -> Outcome {
    let a = campaign_values(&out.join("forward"), 101, false);
    let b = campaign_values(&out.join("reversed"), 202, true);
    let ks = ks_two_sample(&a, &b).unwrap();
    outcome(
        10,
        "source-order invariance",
        a.len() == 200 && b.len() == 200 && !ks.rejects(0.01),
        format!(
            "KS statistic {:.4}, p = {:.3} (200 vs 200 at m=32)",
            ks.statistic, ks.p_value
        ),
    )
}

fn tentacle_criterion() -> Outcome {
    let spec = FlowSpec::concentric_disks(1);
    let m = res(64);
    let seq = discretize(&spec, m).unwrap();
    let sampler = ReferenceSampler::new(spec.clone(), m);
    let track: ReferenceTrack<FlowSnapshot> = ReferenceTrack::new(&spec, &sampler, m, 20).unwrap();
    let events: Vec<usize> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let run = measure_run(&spec, &seq, derive_seed(303, &[t]), &track).unwrap();
            tentacle_scan(
                &run.initial,
                &spec.d0,
                &run.audit.landings,
                m,
                0.05,
                &[8.0 / 64.0],
            )
            .unwrap()
            .total_events()
        })
        .collect();
    let total: usize = events.iter().sum();
    outcome(
        11,
        "thin tentacles",
        total == 0,
        format!("{total} events over 100 runs at m=64, b = 0.05, r = 8/m"),
    )
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((
                    p.strip_prefix(root).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn determinism_criterion(out: &Path) -> Outcome {
    let cfg = config(json!({ "m": [16, 32], "trials": 4, "seed": 404 }));
    let dirs = [out.join("first"), out.join("second")];
    for d in &dirs {
        let c = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| run_campaign(&cfg, d))
            .unwrap();
        write_campaign_csv(&c, d).unwrap();
    }
    let (a, b) = (tree_bytes(&dirs[0]), tree_bytes(&dirs[1]));
    outcome(
        12,
        "determinism",
        !a.is_empty() && a == b,
        format!("{} CSV files compared byte for byte", a.len()),
    )
}

fn main() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("cache");
    let out = |name: &str| {
        let p = tmp.path().join(name);
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    let clock = Instant::now();
    let mut results = kernel_criteria(&cache, &out("kernel"));
    let report = harmonic_suite(&cache, &out("harmonic"));
    results.push(pole_suite_criterion(&report));
    let (table, _) = PotentialTable::cached(&cache, report.table_half_width.max(300)).unwrap();
    results.push(poisson_criterion(&report, &table));
    results.push(mean_value_criterion(&table));
    results.push(martingale_criterion(&table));
    results.push(scaling_criterion(&out("scaling")));
    results.push(quadrature_criterion(&out("sandpile")));
    results.push(abelian_criterion(&out("abelian")));
    results.push(tentacle_criterion());
    results.push(determinism_criterion(&out("determinism")));

    let failed: Vec<&Outcome> = results.iter().filter(|o| !o.passed).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0} s",
        results.len() - failed.len(),
        results.len(),
        clock.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed criterion {} ({}): {}", o.id, o.name, o.detail);
        }
        std::process::exit(1);
    }
}
