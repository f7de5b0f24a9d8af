//! End-to-end acceptance checks. Each check prints one PASS or FAIL line; the process exits
//! non-zero if any check fails. A positional argument runs only the checks whose name
//! contains it.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use bochner_ls::basis::{eval_tensor, PolynomialFamily};
use bochner_ls::harness::{run_recovery_experiment, ExperimentConfig, RateReport};
use bochner_ls::indexing::{
    enumerate_threshold, lq_norm_inverse_sigma, truncate_expansion, CRule,
    CoefficientTable, MultiIndex, Rho, WeightSpec,
};
use bochner_ls::least_squares::{
    assemble_design, gram_diagnostics, operator_norm_tensor_check,
    operator_norm_tensor_check_complex, solve_bochner, solve_scalar,
};
use bochner_ls::pde::{solve_fem, CoefficientField, FemMesh, Psi, Rhs};
use bochner_ls::sampling::{
    default_target, draw_samples, draw_samples_with, subsample, InverseCdf, NuSpec, SamplerTables, Scheme,
};
use bochner_ls::Error;
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

trait Ctx<T> {
    fn ctx(self, what: &str) -> Result<T, String>;
}

impl<T> Ctx<T> for bochner_ls::Result<T> {
    fn ctx(self, what: &str) -> Result<T, String> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Hermite with lognormal weights and Legendre with affine weights, optionally restricted to
/// the first `dims` coordinates.
fn family_specs(dims: Option<u32>) -> Vec<(&'static str, PolynomialFamily, WeightSpec)> {
    let cut = |rho: Rho| match dims {
        Some(d) => rho.truncated(d),
        None => rho,
    };
    vec![
        (
            "hermite",
            PolynomialFamily::hermite(),
            WeightSpec::lognormal(6, cut(Rho::geometric(2.0)), 1.0).unwrap(),
        ),
        (
            "legendre",
            PolynomialFamily::legendre(),
            WeightSpec::affine(cut(Rho::geometric(3.0)), CRule::Legendre, 1.0).unwrap(),
        ),
    ]
}

fn pool_size(m: usize) -> usize {
    let mf = m as f64;
    (20.0 * mf * mf.ln().max(1.0)).ceil() as usize
}

fn orthonormality_and_parseval() -> Outcome {
    let cases = [
        ("hermite", PolynomialFamily::hermite(), common::gaussian_rule(20.0, 160)),
        ("jacobi(0,0)", PolynomialFamily::jacobi(0.0, 0.0).unwrap(), common::uniform_rule(40)),
        ("jacobi(1,0.5)", PolynomialFamily::jacobi(1.0, 0.5).unwrap(), common::jacobi_one_half_rule(70)),
    ];
    let mut worst_gram = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for (name, fam, rule) in &cases {
        let library = fam.quadrature(31).ctx("quadrature")?;
        for (label, nodes, weights) in [
            ("oracle rule", &rule.nodes, &rule.weights),
            ("library rule", &library.nodes, &library.weights),
        ] {
            let values: Vec<Vec<f64>> = nodes
                .iter()
                .map(|&y| (0..=30).map(|k| fam.eval(k, y).unwrap()).collect())
                .collect();
            for i in 0..=30 {
                for j in 0..=i {
                    let g: f64 = values.iter().zip(weights).map(|(v, w)| w * v[i] * v[j]).sum();
                    let dev = (g - if i == j { 1.0 } else { 0.0 }).abs();
                    worst_gram = worst_gram.max(dev);
                    ensure(dev <= 1e-10, || format!("{name} ({label}): Gram[{i}][{j}] = {g:e}"))?;
                }
            }
        }

        // two-dimensional expansions against a tensor rule
        let rule2 = match *name {
            "hermite" => common::gaussian_rule(14.0, 56),
            _ => rule.clone(),
        };
        let table: Vec<Vec<f64>> = rule2
            .nodes
            .iter()
            .map(|&y| (0..=6).map(|k| fam.eval(k, y).unwrap()).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let mut terms: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            while terms.len() < 6 {
                terms.insert((rng.random_range(0..=6), rng.random_range(0..=6)), rng.random_range(-1.0..1.0));
            }
            let exact: f64 = terms.values().map(|c| c * c).sum();
            let mut norm2 = 0.0;
            for (a, wa) in table.iter().zip(&rule2.weights) {
                for (b, wb) in table.iter().zip(&rule2.weights) {
                    let f: f64 = terms.iter().map(|(&(i, j), c)| c * a[i] * b[j]).sum();
                    norm2 += wa * wb * f * f;
                }
            }
            let dev = (norm2 - exact).abs();
            worst_parseval = worst_parseval.max(dev);
            ensure(dev <= 1e-10, || format!("{name}: expansion {trial} has |f|^2 = {norm2}, sum = {exact}"))?;
            for &(i, j) in terms.keys() {
                let y = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
                let t = eval_tensor(*fam, &MultiIndex::from_dense(&[i as u32, j as u32]), &y).ctx("eval_tensor")?;
                let p = fam.eval(i, y[0]).unwrap() * fam.eval(j, y[1]).unwrap();
                ensure((t - p).abs() <= 1e-13 * p.abs().max(1.0), || format!("{name}: tensor value {t} vs {p}"))?;
            }
        }
    }
    Ok(format!("max Gram deviation {worst_gram:.1e}, max Parseval deviation {worst_parseval:.1e}"))
}

fn density_normalization() -> Outcome {
    let layouts = [(1usize, 1u32), (4, 2), (16, 3), (1, 3), (4, 1), (16, 2)];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (m, dims) in layouts {
        for (name, fam, spec) in family_specs(Some(dims)) {
            let nu = NuSpec::new(fam, &spec, m).ctx("nu")?;
            let active = nu.active_dims().max(1);
            let rules: Vec<_> = (1..=active as u32)
                .map(|j| {
                    let deg = nu
                        .basis
                        .indices()
                        .iter()
                        .chain(nu.tail_set.indices())
                        .map(|s| s.get(j))
                        .max()
                        .unwrap_or(0);
                    fam.quadrature(deg as usize + 1)
                })
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let eval = nu.evaluator();
            let mut total = 0.0;
            let mut idx = vec![0usize; active];
            'outer: loop {
                let y: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| rules[j].nodes[i]).collect();
                let w: f64 = idx.iter().enumerate().map(|(j, &i)| rules[j].weights[i]).product();
                total += w * eval.density(&y).ctx("density")?;
                for j in 0..active {
                    idx[j] += 1;
                    if idx[j] < rules[j].nodes.len() {
                        continue 'outer;
                    }
                    idx[j] = 0;
                }
                break;
            }
            let dev = (total - 1.0).abs();
            worst = worst.max(dev);
            count += 1;
            ensure(dev <= 1e-6, || format!("{name}, m = {m}, {dims} dims: integral {total}"))?;
        }
    }
    Ok(format!("{count} configurations, max |integral - 1| = {worst:.1e}"))
}

fn oracle_density(fam: PolynomialFamily, max_deg: usize) -> impl Fn(f64, &[(usize, f64)]) -> f64 {
    move |y: f64, mix: &[(usize, f64)]| {
        let (phi, base) = if fam == PolynomialFamily::hermite() {
            (common::hermite_all(max_deg, y), common::gaussian_pdf(y))
        } else {
            (common::legendre_all(max_deg, y), 0.5)
        };
        base * mix.iter().map(|&(k, c)| c * phi[k] * phi[k]).sum::<f64>()
    }
}

fn ks_passes(fam: PolynomialFamily, max_deg: usize, mix: &[(usize, f64)], mut draw: impl FnMut(u64) -> Vec<f64>) -> usize {
    let density = oracle_density(fam, max_deg);
    let lower = if fam == PolynomialFamily::hermite() {
        -((4.0 * max_deg as f64 + 2.0).sqrt() + 10.0)
    } else {
        -1.0
    };
    (0..10u64)
        .filter(|&seed| {
            let mut xs = draw(seed);
            xs.sort_by(f64::total_cmp);
            let cdf = common::cdf_at_sorted(&xs, lower, 0.05, |y| density(y, mix));
            common::ks_statistic(&cdf) < common::ks_critical_1pct(xs.len())
        })
        .count()
}

fn sampler_fidelity() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut summary = Vec::new();
    for (name, fam, spec) in family_specs(Some(1)) {
        for k in [0usize, 1, 2, 5] {
            let table = InverseCdf::new(fam, k).ctx("inverse cdf")?;
            let passes = ks_passes(fam, k, &[(k, 1.0)], |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * k as u64 + seed);
                (0..DRAWS).map(|_| table.quantile(rng.random())).collect()
            });
            ensure(passes >= 9, || format!("{name} degree {k}: {passes}/10 seeds pass"))?;
            summary.push(format!("{name} k={k} {passes}/10"));
        }
        let nu = NuSpec::new(fam, &spec, 4).ctx("nu")?;
        let mut mix: Vec<(usize, f64)> = nu
            .basis
            .indices()
            .iter()
            .map(|s| (s.get(1) as usize, if nu.has_tail() { 0.5 } else { 1.0 } / nu.m as f64))
            .collect();
        mix.extend(
            nu.tail_set
                .iter()
                .filter(|_| nu.has_tail())
                .map(|(s, sigma)| (s.get(1) as usize, 0.5 * sigma.powi(-2) / nu.tail_mass_retained)),
        );
        let mut failure = None;
        let passes = ks_passes(fam, nu.max_degree(), &mix, |seed| {
            match draw_samples(&nu, DRAWS, seed, 1, Scheme::IidSchemeI) {
                Ok(plan) => plan.points().iter().map(|p| p[0]).collect(),
                Err(e) => {
                    failure = Some(e.to_string());
                    vec![f64::NAN]
                }
            }
        });
        if let Some(e) = failure {
            return Err(format!("{name} mixture: {e}"));
        }
        ensure(passes >= 9, || format!("{name} mixture: {passes}/10 seeds pass"))?;
        summary.push(format!("{name} mixture {passes}/10"));
    }
    Ok(summary.join(", "))
}

fn random_monotone_spec(rng: &mut ChaCha8Rng, t: usize) -> WeightSpec {
    let q = rng.random_range(0.5..1.5);
    match t % 3 {
        0 => WeightSpec::affine(Rho::geometric(rng.random_range(1.5..4.0)), CRule::Legendre, q),
        1 => WeightSpec::affine(
            Rho::power(rng.random_range(1.5..3.0), rng.random_range(3.0..4.0) / q),
            CRule::Unit,
            q,
        ),
        _ => WeightSpec::lognormal(rng.random_range(5..=6), Rho::geometric(rng.random_range(2.0..4.0)), q),
    }
    .unwrap()
}

fn cardinality_and_truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tightest_card = 0.0f64;
    let mut tightest_tail = 0.0f64;
    for t in 0..50 {
        let raw = random_monotone_spec(&mut rng, t);
        let spec = raw.normalized(1e-8).ctx("normalize")?;
        let norm = lq_norm_inverse_sigma(&spec, 1e-8).ctx("lq norm")?;
        ensure(norm.value <= 1.0 + 1e-8, || format!("spec {t}: normalized norm {}", norm.value))?;
        for xi in [2.0, 8.0, 32.0, 128.0] {
            let lam = enumerate_threshold(&spec, xi).ctx("threshold")?;
            ensure(lam.len() as f64 <= xi, || format!("spec {t}: |Lambda({xi})| = {}", lam.len()))?;
            tightest_card = tightest_card.max(lam.len() as f64 / xi);

            let big = enumerate_threshold(&spec, 4.0 * xi).ctx("threshold")?;
            let mut coeffs = CoefficientTable::new(2);
            for s in big.indices() {
                coeffs.entries.push((s.clone(), vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]));
            }
            let weighted: f64 = coeffs
                .entries
                .iter()
                .map(|(s, v)| spec.sigma(s).unwrap().powi(2) * (v[0] * v[0] + v[1] * v[1]))
                .sum();
            for (_, v) in coeffs.entries.iter_mut() {
                for x in v.iter_mut() {
                    *x /= weighted.sqrt();
                }
            }
            let kept: f64 = truncate_expansion(&coeffs, &lam).coefficients().iter().map(|x| x * x).sum();
            let dropped: f64 = coeffs
                .entries
                .iter()
                .filter(|(s, _)| !lam.contains(s))
                .map(|(_, v)| v[0] * v[0] + v[1] * v[1])
                .sum();
            let total = coeffs.squared_norm();
            ensure((kept + dropped - total).abs() <= 1e-12 * total.max(1e-300), || {
                format!("spec {t}: kept {kept} + dropped {dropped} != {total}")
            })?;
            let bound = xi.powf(-2.0 / spec.q);
            ensure(dropped <= bound, || format!("spec {t}, xi {xi}: tail {dropped:e} > {bound:e}"))?;
            tightest_tail = tightest_tail.max(dropped / bound);
        }
    }
    Ok(format!(
        "50 specs x 4 thresholds; max |Lambda|/xi = {tightest_card:.3}, max tail/bound = {tightest_tail:.3}"
    ))
}

fn tensor_lift_norms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for complex in [false, true] {
        for trial in 0..100 {
            let (k, s, d) = (rng.random_range(1..=12), rng.random_range(1..=12), rng.random_range(1..=5));
            let sigmas: Vec<f64> = (0..s).map(|_| rng.random_range(1.0..10.0)).collect();
            let entries: Vec<(f64, f64)> = (0..k * s)
                .map(|_| {
                    let re = rng.random_range(-1.0..1.0);
                    let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
                    (re, im)
                })
                .collect();
            let norms = if complex {
                let a = Mat::from_fn(k, s, |i, j| {
                    let (re, im) = entries[i * s + j];
                    c64::new(re, im)
                });
                operator_norm_tensor_check_complex(a.as_ref(), &sigmas, d)
            } else {
                let a = Mat::from_fn(k, s, |i, j| entries[i * s + j].0);
                operator_norm_tensor_check(a.as_ref(), &sigmas, d)
            }
            .ctx("tensor check")?;
            let gap = (norms.scalar_norm - norms.lifted_norm).abs();
            worst = worst.max(gap);
            ensure(gap <= 1e-9 * norms.scalar_norm.max(1.0), || {
                format!("complex={complex} trial {trial}: {} vs {}", norms.scalar_norm, norms.lifted_norm)
            })?;
            // the spectral norm lies between the largest column norm and the Frobenius norm
            let col = |j: usize| -> f64 {
                (0..k)
                    .map(|i| {
                        let (re, im) = entries[i * s + j];
                        (re * re + im * im) / sigmas[j].powi(2)
                    })
                    .sum::<f64>()
            };
            let frob = (0..s).map(col).sum::<f64>().sqrt();
            let widest = (0..s).map(col).fold(0.0, f64::max).sqrt();
            ensure(
                norms.scalar_norm <= frob * (1.0 + 1e-12) && norms.scalar_norm >= widest * (1.0 - 1e-12),
                || format!("complex={complex} trial {trial}: norm {} outside [{widest}, {frob}]", norms.scalar_norm),
            )?;
        }
    }
    Ok(format!("200 instances, max |scalar - lifted| = {worst:.1e}"))
}

fn least_squares_exactness() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (name, fam, spec) in family_specs(None) {
        for m in [4usize, 16, 64] {
            let nu = NuSpec::new(fam, &spec, m).ctx("nu")?;
            let dims = nu.active_dims().max(1);
            let mut found = None;
            for seed in 0..10 {
                let plan = draw_samples(&nu, pool_size(m), seed, dims, Scheme::IidSchemeI).ctx("draw")?;
                let design = assemble_design(fam, &nu.basis, &plan).ctx("design")?;
                if gram_diagnostics(&design).lambda_min >= 0.5 {
                    found = Some((plan, design));
                    break;
                }
            }
            let (plan, design) = found.ok_or(format!("{name}, m = {m}: no plan with lambda_min >= 0.5"))?;
            let truth: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let values_of = |c: &[f64]| -> Vec<f64> {
                plan.points()
                    .iter()
                    .map(|y| {
                        nu.basis
                            .indices()
                            .iter()
                            .zip(c)
                            .map(|(s, c)| c * eval_tensor(fam, s, y).unwrap())
                            .sum()
                    })
                    .collect()
            };
            let approx = solve_scalar(&design, &values_of(&truth)).ctx("solve")?;
            let err: f64 = approx.coefficients().iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let rel = err / truth.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(rel);
            ensure(rel <= 1e-9, || format!("{name}, m = {m}: relative error {rel:e}"))?;

            if m == 16 {
                let d = 7;
                let columns: Vec<Vec<f64>> = (0..d)
                    .map(|_| values_of(&(0..m).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
                    .collect();
                let samples = Mat::from_fn(plan.len(), d, |i, c| columns[c][i]);
                let joint = solve_bochner(&design, samples.as_ref()).ctx("bochner")?;
                for (c, col) in columns.iter().enumerate() {
                    let single = solve_scalar(&design, col).ctx("solve")?;
                    for i in 0..m {
                        ensure(joint.row(i)[c].to_bits() == single.row(i)[0].to_bits(), || {
                            format!("{name}: column {c}, coefficient {i} differs between joint and scalar solves")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("max relative coefficient error {worst:.1e}; d = 7 columns bitwise equal"))
}

fn gram_concentration() -> Outcome {
    let m = 16;
    let mut summary = Vec::new();
    for (name, fam, spec) in family_specs(None) {
        let nu = NuSpec::new(fam, &spec, m).ctx("nu")?;
        let dims = nu.active_dims().max(1);
        let tables = SamplerTables::new(fam, nu.max_degree()).ctx("tables")?;
        let mut good = 0;
        for seed in 0..100 {
            let plan = draw_samples_with(&nu, &tables, pool_size(m), seed, dims, Scheme::IidForSubsampling)
                .ctx("draw")?;
            if gram_diagnostics(&assemble_design(fam, &nu.basis, &plan).ctx("design")?).lambda_min >= 0.5 {
                good += 1;
            }
        }
        ensure(good >= 95, || format!("{name}: {good}/100 trials with lambda_min >= 0.5"))?;
        summary.push(format!("{name} {good}/100"));
    }
    Ok(summary.join(", "))
}

fn subsampling_guarantee() -> Outcome {
    let mut summary = Vec::new();
    for (name, fam, spec) in family_specs(None) {
        for m in [8usize, 16, 32] {
            let nu = NuSpec::new(fam, &spec, m).ctx("nu")?;
            let dims = nu.active_dims().max(1);
            let tables = SamplerTables::new(fam, nu.max_degree()).ctx("tables")?;
            let mut lowest = f64::INFINITY;
            for trial in 0..100u64 {
                let mut result = None;
                for attempt in 0..2u64 {
                    let seed = trial + 1000 * attempt;
                    let plan = draw_samples_with(&nu, &tables, pool_size(m), seed, dims, Scheme::IidForSubsampling)
                        .ctx("draw")?;
                    match subsample(&plan, fam, &nu.basis, default_target(m)) {
                        Err(Error::IllConditionedInput { .. }) => continue,
                        other => {
                            result = Some(other);
                            break;
                        }
                    }
                }
                let sub = result
                    .ok_or(format!("{name}, m = {m}, trial {trial}: full Gram ill-conditioned twice"))?
                    .map_err(|e| format!("{name}, m = {m}, trial {trial}: {e}"))?;
                ensure(sub.len() <= default_target(m), || format!("{name}, m = {m}: {} points", sub.len()))?;
                let g = gram_diagnostics(&assemble_design(fam, &nu.basis, &sub).ctx("design")?);
                ensure(g.lambda_min >= 1.0 / 66.0 && g.lambda_min > 0.0, || {
                    format!("{name}, m = {m}, trial {trial}: lambda_min {}", g.lambda_min)
                })?;
                lowest = lowest.min(g.lambda_min);
            }
            summary.push(format!("{name} m={m} min lambda {lowest:.3}"));
        }
    }
    Ok(format!("100/100 trials each; {}", summary.join(", ")))
}

fn run_config(text: &str) -> Result<RateReport, String> {
    let config = ExperimentConfig::from_text(text).ctx("config")?;
    run_recovery_experiment(&config).ctx("experiment")
}

fn describe(report: &RateReport) -> String {
    report
        .rows
        .iter()
        .map(|r| format!("{}:{:.2e}", r.n, r.rmse))
        .collect::<Vec<_>>()
        .join(" ")
}

fn synthetic_rates() -> Outcome {
    let grid = "experiment.n_grid = 64,128,256,512,1024,2048,4096,8192\n";
    let mut summary = Vec::new();
    for (rho, q, bound) in [("geometric:2", "1", -0.75), ("geometric:4", "0.6666666666666666", -1.1)] {
        let text = format!("{grid}experiment.scheme = i\nweights.kind = affine\nweights.rho = {rho}\nweights.q = {q}\n");
        let report = run_config(&text)?;
        let slope = report
            .fitted_slope
            .ok_or(format!("rho {rho}: no slope ({}) {}", report.fit_status, describe(&report)))?;
        ensure(slope <= bound, || format!("rho {rho}: slope {slope:.3} > {bound} ({})", describe(&report)))?;
        summary.push(format!("rho {rho} q {q}: slope {slope:.3}"));
    }
    Ok(summary.join("; "))
}

fn pde_rates() -> Outcome {
    let text = "experiment.target = pde_lognormal
experiment.scheme = ii
experiment.n_grid = 64,128,256,512,1024,2048
experiment.test_count = 2000
field.psi = sine
field.theta = 3
field.J = 8
mesh.nh = 256
weights.eta = 8
weights.rho = power:1,1
sampling.oversampling = 4
sampling.tail_tol = 1e-3
";
    let report = run_config(text)?;
    for r in &report.rows {
        ensure(r.status == "ok" || r.status == "exact", || format!("n = {}: status {}", r.n, r.status))?;
    }
    ensure(report.rows.windows(2).all(|w| w[1].rmse < w[0].rmse), || {
        format!("rmse not decreasing: {}", describe(&report))
    })?;
    let slope = report
        .fitted_slope
        .ok_or(format!("no slope ({}) {}", report.fit_status, describe(&report)))?;
    ensure(slope <= -0.6, || format!("slope {slope:.3} > -0.6 ({})", describe(&report)))?;
    Ok(format!("slope {slope:.3}; {}", describe(&report)))
}

fn fem_correctness() -> Outcome {
    let flat = CoefficientField::lognormal(vec![Psi::Sine {
        amplitude: 1.0,
        mode: 1,
    }]);
    let mut worst = 0.0f64;
    for nh in [2usize, 7, 64, 256, 1000] {
        let mesh = FemMesh::new(nh).ctx("mesh")?;
        let sol = solve_fem(&flat, &[0.0], Rhs::constant(1.0), mesh).ctx("solve")?;
        for i in 0..=nh {
            let x = mesh.node(i);
            let dev = (sol.nodal(i) - 0.5 * x * (1.0 - x)).abs();
            worst = worst.max(dev);
            ensure(dev <= 1e-12, || format!("nh = {nh}, node {i}: deviation {dev:e}"))?;
        }
    }

    // a(x) = exp(0.7 sin(pi x)), f = 1: a u' = c - x with c = (int x/a) / (int 1/a)
    let y = 0.7;
    let field = CoefficientField::lognormal(vec![Psi::Sine {
        amplitude: 1.0,
        mode: 1,
    }]);
    let a = |x: f64| (y * (std::f64::consts::PI * x).sin()).exp();
    let (gx, gw) = common::composite(0.0, 1.0, 200, 20);
    let inv: f64 = gx.iter().zip(&gw).map(|(x, w)| w / a(*x)).sum();
    let first: f64 = gx.iter().zip(&gw).map(|(x, w)| w * x / a(*x)).sum();
    let c = first / inv;
    let du = |x: f64| (c - x) / a(x);
    let (qx, qw) = common::gauss_legendre(10);
    let mut points = Vec::new();
    for nh in [16usize, 32, 64, 128, 256, 512] {
        let mesh = FemMesh::new(nh).ctx("mesh")?;
        let sol = solve_fem(&field, &[y], Rhs::constant(1.0), mesh).ctx("solve")?;
        let h = mesh.h();
        let mut err2 = 0.0;
        for e in 0..nh {
            let slope = (sol.nodal(e + 1) - sol.nodal(e)) / h;
            let lo = mesh.node(e);
            for (t, w) in qx.iter().zip(&qw) {
                let x = lo + 0.5 * h * (t + 1.0);
                err2 += 0.5 * h * w * (slope - du(x)).powi(2);
            }
        }
        points.push((h, err2.sqrt()));
    }
    let rate = common::log_log_slope(&points);
    ensure((0.9..=1.1).contains(&rate), || format!("energy-error slope {rate:.3}: {points:?}"))?;
    Ok(format!("nodal deviation {worst:.1e}; energy-error slope {rate:.3}"))
}

fn read_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|entry| {
            let path = entry.map_err(|e| e.to_string())?.path();
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            Ok((path.file_name().unwrap().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Outcome {
    let root: PathBuf = std::env::temp_dir().join(format!("bochner-ls-determinism-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let runs: [(&str, &str, &[&str]); 6] = [
        ("widths", "experiment.widths_count = 12\nexperiment.widths_xi = 40\n", &[]),
        ("sample", "experiment.sample_m = 8\nexperiment.sample_count = 300\n", &[]),
        ("sample", "experiment.sample_m = 8\nexperiment.sample_count = 300\n", &["--scheme", "ii"]),
        ("recover", "experiment.n = 1024\n", &[]),
        (
            "pde",
            "experiment.target = pde_lognormal\nexperiment.scheme = ii\nexperiment.n = 32\nexperiment.test_count = 100\nfield.J = 4\nmesh.nh = 32\nweights.eta = 8\nweights.rho = power:1,1\nsampling.oversampling = 8\nsampling.tail_tol = 1e-3\n",
            &[],
        ),
        ("rates", "experiment.n_grid = 64,128,256,512,1024\n", &[]),
    ];
    let bin = env!("CARGO_BIN_EXE_bochner-ls");
    let mut checked = 0;
    for (k, (sub, config, extra)) in runs.iter().enumerate() {
        let conf = root.join(format!("run{k}.conf"));
        std::fs::write(&conf, config).map_err(|e| e.to_string())?;
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for threads in ["1", "8"] {
            for rep in 0..2 {
                let out = root.join(format!("run{k}-t{threads}-{rep}"));
                let status = Command::new(bin)
                    .arg(sub)
                    .arg("--config")
                    .arg(&conf)
                    .arg("--out")
                    .arg(&out)
                    .arg("--seed")
                    .arg("17")
                    .arg("--quiet")
                    .args(*extra)
                    .env("RAYON_NUM_THREADS", threads)
                    .status()
                    .map_err(|e| e.to_string())?;
                ensure(status.success(), || format!("{sub} {extra:?} exited with {status}"))?;
                let files = read_outputs(&out)?;
                ensure(!files.is_empty(), || format!("{sub} wrote no files"))?;
                match &reference {
                    None => reference = Some(files),
                    Some(r) => ensure(*r == files, || {
                        format!("{sub} {extra:?}: output differs with {threads} threads, run {rep}")
                    })?,
                }
                checked += 1;
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(format!("{checked} runs over 6 invocations, byte-identical per invocation"))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks: [(&str, fn() -> Outcome); 12] = [
        ("orthonormality_and_parseval", orthonormality_and_parseval),
        ("density_normalization", density_normalization),
        ("sampler_fidelity", sampler_fidelity),
        ("cardinality_and_truncation", cardinality_and_truncation),
        ("tensor_lift_norms", tensor_lift_norms),
        ("least_squares_exactness", least_squares_exactness),
        ("gram_concentration", gram_concentration),
        ("subsampling_guarantee", subsampling_guarantee),
        ("synthetic_rates", synthetic_rates),
        ("pde_rates", pde_rates),
        ("fem_correctness", fem_correctness),
        ("cli_determinism", cli_determinism),
    ];
    let (mut passed, mut failed) = (0, 0);
    for (name, check) in checks {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => {
                passed += 1;
                println!("PASS {name} [{secs:.1}s] {detail}");
            }
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s] {reason}");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
