//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (visible with --nocapture). Heavy propagations
//! are shared between criteria through an in-process cache, so running
//! the whole file costs far less than the sum of its parts. The thermal
//! large-cat criterion is in the slow suite: `cargo test -- --ignored`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use catsim::analytic::{cat_density, mixture_density, IdealCatSpec};
use catsim::fock::FockDensityMatrix;
use catsim::liouvillian::SuperOperator;
use catsim::orthopoly::{clenshaw_hermite_sum, laguerre_clenshaw, scaled_laguerre_clenshaw};
use catsim::params::{ScaledParams, TimeUnit};
use catsim::propagator::{evolve, EvolutionPlan, MonitorTolerances};
use catsim::signatures::{
    purity, wigner_clenshaw, wigner_displaced_parity, wigner_negativity, GridSpec,
    NegativityMethod,
};
use catsim_cli::config::RunSpec;
use catsim_cli::presets::{self, ComparisonRow, PresetId};
use catsim_cli::runner::{execute, ExecuteOptions, RunOutcome, CERTIFICATION_REL_TOL};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------
// Shared run cache and reporting helpers
// ---------------------------------------------------------------------

static CACHE: OnceLock<Mutex<HashMap<String, Arc<RunOutcome>>>> = OnceLock::new();

fn cached_run(key: &str, spec: &RunSpec) -> Arc<RunOutcome> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(key) {
        return hit.clone();
    }
    eprintln!("[acceptance] running cell {key}");
    let opts = ExecuteOptions {
        deterministic: false,
        out_dir: None,
    };
    let outcome = Arc::new(execute(spec, &opts).unwrap_or_else(|e| panic!("cell {key}: {e}")));
    cache
        .lock()
        .unwrap()
        .entry(key.to_string())
        .or_insert(outcome)
        .clone()
}

fn preset_outcomes(id: PresetId) -> Vec<(String, RunOutcome)> {
    presets::cells(id)
        .unwrap()
        .iter()
        .map(|c| (c.id.clone(), (*cached_run(&c.id, &c.spec)).clone()))
        .collect()
}

fn preset_rows(id: PresetId) -> Vec<ComparisonRow> {
    let cells = presets::cells(id).unwrap();
    let outcomes = preset_outcomes(id);
    presets::evaluate(id, &cells, &outcomes)
}

fn row_summary(rows: &[ComparisonRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "{} {} = {} vs {}{}",
                r.cell,
                r.quantity,
                r.computed_text,
                r.target,
                if r.pass { "" } else { " <-- FAIL" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion(n: u32, description: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n:02} {verdict}: {description}");
    assert!(pass, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------------
// Criteria 1-5: published-table reproductions through the presets
// ---------------------------------------------------------------------

#[test]
fn criterion_01_formation_times_lossless() {
    let rows = preset_rows(PresetId::Table1);
    let outcomes = preset_outcomes(PresetId::Table1);
    let cutoffs: Vec<usize> = outcomes
        .iter()
        .map(|(_, o)| o.manifest.resolved.cutoff)
        .collect();
    let pass = rows.iter().all(|r| r.pass) && cutoffs == vec![40, 60, 150];
    criterion(
        1,
        "lossless formation times at alpha0 = 2.5, 5, 10 (cutoffs 40/60/150)",
        pass,
        &format!("cutoffs {cutoffs:?}; {}", row_summary(&rows)),
    );
}

#[test]
fn criterion_02_lifetimes_with_damping() {
    let rows = preset_rows(PresetId::Table2);
    let pass = rows.iter().all(|r| r.pass) && rows.len() == 9;
    criterion(
        2,
        "damped-cat lifetimes: 9 (g, alpha0) cells within 5%",
        pass,
        &row_summary(&rows),
    );
}

#[test]
fn criterion_03_kerr_formation_times() {
    let rows = preset_rows(PresetId::Table3);
    let formation: Vec<&ComparisonRow> = rows
        .iter()
        .filter(|r| r.quantity == "formation time")
        .collect();
    let pass = rows.iter().all(|r| r.pass) && formation.len() == 8;
    criterion(
        3,
        "Kerr formation times within quoted windows (chi = 0, 1, 2, 5)",
        pass,
        &row_summary(&rows),
    );
}

#[test]
fn criterion_04_threshold_lifetime_pattern() {
    let mut rows = preset_rows(PresetId::Table4);
    rows.extend(preset_rows(PresetId::Table5));
    let zeros = rows
        .iter()
        .filter(|r| r.target.contains("0 (exact)"))
        .count();
    let pass = rows.iter().all(|r| r.pass) && zeros == 8;
    criterion(
        4,
        "zero lifetimes at g = 1, 1.5 (exact) and 5% agreement at g = 2.5",
        pass,
        &row_summary(&rows),
    );
}

#[test]
fn criterion_05_experiment_transient_negativity() {
    let rows = preset_rows(PresetId::Fig12Experiment);
    let pass = rows.iter().all(|r| r.pass);
    criterion(
        5,
        "experiment regime: peak delta in [0.02, 0.03] near scaled time 0.5, never a full cat",
        pass,
        &row_summary(&rows),
    );
}

// ---------------------------------------------------------------------
// Criterion 6: ideal-state benchmarks
// ---------------------------------------------------------------------

#[test]
fn criterion_06_ideal_cat_benchmarks() {
    let alpha = Complex64::new(2.0, 0.0);
    let grid = GridSpec::centered(6.0, 0.005).unwrap();
    let even = cat_density(&IdealCatSpec::even(alpha), 40).unwrap();
    let map = wigner_clenshaw(&even, &grid).unwrap();
    let trap = wigner_negativity(&map, NegativityMethod::Trapezoid).delta;
    let gl = wigner_negativity(&map, NegativityMethod::GaussLobatto).delta;
    let rounds = |d: f64| (d * 1e4).round() as i64 == 2937;

    let mix = mixture_density(alpha, 0.5, 40).unwrap();
    let mix_map = wigner_clenshaw(&mix, &grid).unwrap();
    let mix_trap = wigner_negativity(&mix_map, NegativityMethod::Trapezoid).delta;
    let mix_gl = wigner_negativity(&mix_map, NegativityMethod::GaussLobatto).delta;

    let a25 = Complex64::new(2.5, 0.0);
    let p = purity(&mixture_density(a25, 0.5, 40).unwrap());
    let p_ref = (2.0 + (-4.0 * a25.norm_sqr()).exp()) / 4.0;

    let pass = rounds(trap)
        && rounds(gl)
        && mix_trap.abs() <= 1e-6
        && mix_gl.abs() <= 1e-6
        && (p - p_ref).abs() <= 1e-10;
    criterion(
        6,
        "ideal even cat delta = 0.2937 (4 sig figs), mixture delta = 0, mixture purity analytic",
        pass,
        &format!(
            "trap {trap:.7}, gl {gl:.7}, mixture {mix_trap:.2e}/{mix_gl:.2e}, \
             purity {p:.12} vs {p_ref:.12}"
        ),
    );
}

// ---------------------------------------------------------------------
// Criterion 7: independent oracles
// ---------------------------------------------------------------------

type Mat = Vec<Complex64>;

fn mat_mul(n: usize, a: &Mat, b: &Mat) -> Mat {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Dense matrix exponential by scaling and squaring with a Taylor core:
/// the scaled norm is below 1/4, where 30 terms reach machine precision.
fn expm(n: usize, a: &Mat) -> Mat {
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm1 > 0.25 {
        (norm1 / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(s as i32);
    let scaled: Mat = a.iter().map(|v| v * scale).collect();
    let mut result = vec![Complex64::new(0.0, 0.0); n * n];
    let mut term = result.clone();
    for i in 0..n {
        result[i * n + i] = Complex64::new(1.0, 0.0);
        term[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for k in 1..=30 {
        term = mat_mul(n, &term, &scaled);
        let inv_k = 1.0 / k as f64;
        for v in term.iter_mut() {
            *v *= inv_k;
        }
        for (r, t) in result.iter_mut().zip(term.iter()) {
            *r += t;
        }
    }
    for _ in 0..s {
        result = mat_mul(n, &result, &result);
    }
    result
}

/// Dense Liouvillian matrix in the row-major vec(rho) convention.
fn dense_liouvillian(op: &SuperOperator, nc: usize) -> Mat {
    let d = nc * nc;
    let mut l = vec![Complex64::new(0.0, 0.0); d * d];
    let mut basis = Array2::zeros((nc, nc));
    let mut image = Array2::zeros((nc, nc));
    for a in 0..nc {
        for b in 0..nc {
            basis[[a, b]] = Complex64::new(1.0, 0.0);
            op.apply_into(&basis, &mut image);
            let j = a * nc + b;
            for p in 0..nc {
                for q in 0..nc {
                    l[(p * nc + q) * d + j] = image[[p, q]];
                }
            }
            basis[[a, b]] = Complex64::new(0.0, 0.0);
        }
    }
    l
}

fn rk4_vs_expm_max_diff(rho0: &FockDensityMatrix, op: &SuperOperator, t: f64) -> f64 {
    let nc = op.cutoff();
    let d = nc * nc;
    let plan = EvolutionPlan::new(t, 5e-6)
        .unwrap()
        .with_snapshots(&[t])
        .unwrap()
        // Loose monitors: the tiny oracle cutoff leaks trace through the
        // truncation boundary by design, identically on both sides of the
        // comparison.
        .with_monitors(MonitorTolerances {
            trace_tol: 1e-3,
            tail_tol: 0.5,
            hermiticity_tol: 1e-9,
        });
    let result = evolve(op, rho0, &plan).unwrap();
    let rk4 = &result.snapshots.last().unwrap().rho;

    let l = dense_liouvillian(op, nc);
    let lt: Mat = l.iter().map(|v| v * t).collect();
    let propagator = expm(d, &lt);
    let mut vec0 = vec![Complex64::new(0.0, 0.0); d];
    for a in 0..nc {
        for b in 0..nc {
            vec0[a * nc + b] = rho0.data()[[a, b]];
        }
    }
    let mut diff = 0.0f64;
    for i in 0..d {
        let mut dot = Complex64::new(0.0, 0.0);
        for j in 0..d {
            dot += propagator[i * d + j] * vec0[j];
        }
        let delta = (dot - rk4.data()[[i / nc, i % nc]]).norm();
        diff = diff.max(delta);
    }
    diff
}

fn random_density(nc: usize, rng: &mut ChaCha8Rng) -> FockDensityMatrix {
    let mut gauss = || {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let mut a = Array2::zeros((nc, nc));
    for i in 0..nc {
        for j in 0..nc {
            a[[i, j]] = Complex64::new(gauss(), gauss());
        }
    }
    // rho = A A^dagger / tr is Hermitian and positive by construction.
    let adj = a.t().mapv(|v| v.conj());
    let mut rho = a.dot(&adj);
    let trace: Complex64 = (0..nc).map(|i| rho[[i, i]]).sum();
    rho.mapv_inplace(|v| v / trace);
    FockDensityMatrix::from_matrix(rho).unwrap()
}

#[test]
fn criterion_07_oracle_equivalence() {
    // (a) RK4 against a dense matrix-exponential oracle, every generator
    // term active, two initial states.
    let params = ScaledParams::new(2.0, 1.0, 0.5, 0.3, 0.2).unwrap();
    let nc = 6;
    let op = SuperOperator::build(&params, nc, TimeUnit::Tau).unwrap();
    let mut mixed = Array2::zeros((nc, nc));
    mixed[[0, 0]] = Complex64::new(0.6, 0.0);
    mixed[[2, 2]] = Complex64::new(0.4, 0.0);
    mixed[[0, 2]] = Complex64::new(0.1, 0.05);
    mixed[[2, 0]] = Complex64::new(0.1, -0.05);
    let mixed = FockDensityMatrix::from_matrix(mixed).unwrap();
    let coherent = FockDensityMatrix::coherent(nc, Complex64::new(0.6, -0.3)).unwrap();
    let diff_mixed = rk4_vs_expm_max_diff(&mixed, &op, 0.05);
    let diff_coherent = rk4_vs_expm_max_diff(&coherent, &op, 0.05);

    // (b) Series evaluator against displaced parity at random points.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random_density(60, &mut rng);
    let grid = GridSpec::centered(5.0, 0.5).unwrap();
    let map = wigner_clenshaw(&rho, &grid).unwrap();
    let axis = grid.axis();
    let picks: Vec<(usize, usize)> = (0..20)
        .map(|_| {
            (
                rng.gen_range(0..axis.len()),
                rng.gen_range(0..axis.len()),
            )
        })
        .collect();
    let points: Vec<Complex64> = picks
        .iter()
        .map(|&(i, j)| Complex64::new(axis[i], axis[j]))
        .collect();
    let parity = wigner_displaced_parity(&rho, &points).unwrap();
    let evaluator_diff = picks
        .iter()
        .zip(parity.iter())
        .map(|(&(i, j), w)| (map.values()[[i, j]] - w).abs())
        .fold(0.0f64, f64::max);

    // (c) Clenshaw sums against naive term-by-term summation.
    let clenshaw_rel = clenshaw_vs_naive_max_rel(&mut rng);

    let pass = diff_mixed <= 1e-8
        && diff_coherent <= 1e-8
        && evaluator_diff <= 1e-9
        && clenshaw_rel <= 1e-10;
    criterion(
        7,
        "RK4 = expm (1e-8), series Wigner = displaced parity (1e-9), Clenshaw = naive (1e-10)",
        pass,
        &format!(
            "expm diffs {diff_mixed:.2e}/{diff_coherent:.2e}, evaluators {evaluator_diff:.2e}, \
             clenshaw {clenshaw_rel:.2e}"
        ),
    );
}

/// Weighted Hermite functions by the plain forward recurrence; safe for
/// the moderate arguments used here.
fn naive_hermite(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if n_max == 0 {
        return out;
    }
    out.push(x * std::f64::consts::SQRT_2 * h0);
    for k in 1..n_max {
        let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * out[k]
            - (k as f64 / (k as f64 + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Scaled Laguerre functions E_n^l(z) by the forward recurrence, written
/// against the explicit three-term relation.
fn naive_scaled_laguerre(l: usize, z: f64, n_max: usize) -> Vec<f64> {
    let lf = l as f64;
    let mut ln_l_factorial = 0.0;
    for k in 1..=l {
        ln_l_factorial += (k as f64).ln();
    }
    let e0 = if l == 0 {
        (-0.5 * z).exp()
    } else if z == 0.0 {
        0.0
    } else {
        (0.5 * (lf * z.ln() - ln_l_factorial) - 0.5 * z).exp()
    };
    let r = |k: f64| ((k + 1.0) / (k + 1.0 + lf)).sqrt();
    let mut out = vec![e0];
    if n_max == 0 {
        return out;
    }
    out.push((lf + 1.0 - z) * r(0.0) * e0);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + lf + 1.0 - z) * r(kf) * out[k]
            - (kf + lf) * r(kf) * r(kf - 1.0) * out[k - 1])
            / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Plain associated Laguerre polynomials by the forward recurrence.
fn naive_laguerre(l: usize, z: f64, n_max: usize) -> Vec<f64> {
    let lf = l as f64;
    let mut out = vec![1.0];
    if n_max == 0 {
        return out;
    }
    out.push(lf + 1.0 - z);
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + lf + 1.0 - z) * out[k] - (kf + lf) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

fn clenshaw_vs_naive_max_rel(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    let mut coeffs = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };

    // Hermite series at several arguments and rotation angles.
    let c = coeffs(61);
    for &x in &[-4.2, -1.3, 0.0, 0.7, 3.9] {
        let h = naive_hermite(60, x);
        for &theta in &[0.0, 0.7, PI / 2.0] {
            let naive: Complex64 = c
                .iter()
                .enumerate()
                .map(|(n, cn)| cn * Complex64::from_polar(h[n], -theta * n as f64))
                .sum();
            let scale: f64 = c
                .iter()
                .enumerate()
                .map(|(n, cn)| cn.norm() * h[n].abs())
                .sum();
            let cl = clenshaw_hermite_sum(&c, x, theta);
            worst = worst.max((cl - naive).norm() / scale.max(1e-300));
        }
    }

    // Scaled Laguerre series across orders and arguments.
    for &(l, z) in &[(0usize, 0.5f64), (1, 4.0), (3, 17.0)] {
        let w = coeffs(60);
        let e = naive_scaled_laguerre(l, z, 59);
        let naive: Complex64 = w.iter().zip(e.iter()).map(|(wn, en)| wn * en).sum();
        let scale: f64 = w.iter().zip(e.iter()).map(|(wn, en)| wn.norm() * en.abs()).sum();
        let cl = scaled_laguerre_clenshaw(l, &w, z);
        worst = worst.max((cl - naive).norm() / scale.max(1e-300));
    }

    // Plain Laguerre series in the moderate regime it is intended for.
    let w = coeffs(25);
    let lagn = naive_laguerre(2, 3.2, 24);
    let naive: Complex64 = w.iter().zip(lagn.iter()).map(|(wn, ln)| wn * ln).sum();
    let scale: f64 = w
        .iter()
        .zip(lagn.iter())
        .map(|(wn, ln)| wn.norm() * ln.abs())
        .sum();
    let cl = laguerre_clenshaw(2, &w, 3.2);
    worst = worst.max((cl - naive).norm() / scale.max(1e-300));

    worst
}

// ---------------------------------------------------------------------
// Criteria 8-9: run-wide audits over the criteria 1-5 cache
// ---------------------------------------------------------------------

fn table_outcomes() -> Vec<(String, RunOutcome)> {
    let mut all = Vec::new();
    for id in [
        PresetId::Table1,
        PresetId::Table2,
        PresetId::Table3,
        PresetId::Table4,
        PresetId::Table5,
        PresetId::Fig12Experiment,
    ] {
        all.extend(preset_outcomes(id));
    }
    all
}

#[test]
fn criterion_08_conservation_suite() {
    let outcomes = table_outcomes();
    let mut failures = Vec::new();
    for (id, o) in &outcomes {
        let c = &o.manifest.conservation;
        if c.max_trace_deviation >= 1e-8 {
            failures.push(format!("{id}: trace deviation {:.2e}", c.max_trace_deviation));
        }
        if c.max_hermiticity_defect >= 1e-12 {
            failures.push(format!(
                "{id}: hermiticity defect {:.2e}",
                c.max_hermiticity_defect
            ));
        }
        let lossless = o.manifest.spec.params.to_scaled().unwrap().is_lossless();
        if lossless {
            match c.parity_drift {
                Some(d) if d < 1e-12 => {}
                Some(d) => failures.push(format!("{id}: parity drift {d:.2e}")),
                None => failures.push(format!("{id}: lossless run missing parity audit")),
            }
        }
        if o.manifest.spec.signatures.wigner {
            match c.marginal_max_diff {
                Some(d) if d < 2e-3 => {}
                Some(d) => failures.push(format!("{id}: marginal mismatch {d:.2e}")),
                None => failures.push(format!("{id}: missing marginal audit")),
            }
        }
    }
    criterion(
        8,
        &format!(
            "conservation on all {} runs: trace 1e-8, hermiticity 1e-12, parity 1e-12, marginals 2e-3",
            outcomes.len()
        ),
        failures.is_empty(),
        &failures.join("; "),
    );
}

#[test]
fn criterion_09_dual_integrator_agreement() {
    let outcomes = table_outcomes();
    let mut failures = Vec::new();
    let mut comparable = 0usize;
    for (id, o) in &outcomes {
        if o.manifest.certification.is_empty() {
            failures.push(format!("{id}: no certification entries"));
        }
        for entry in &o.manifest.certification {
            if entry.comparable {
                comparable += 1;
                if entry.rel_diff > CERTIFICATION_REL_TOL {
                    failures.push(format!(
                        "{id}@{}: trapezoid {:.6e} vs lobatto {:.6e} (rel {:.2e})",
                        entry.label, entry.delta_trapezoid, entry.delta_gauss_lobatto, entry.rel_diff
                    ));
                }
            }
        }
    }
    if comparable == 0 {
        failures.push("no comparable certification entries at all".into());
    }
    criterion(
        9,
        &format!(
            "trapezoid and Gauss-Lobatto negativities agree to 4 significant figures \
             ({comparable} certified snapshots)"
        ),
        failures.is_empty(),
        &failures.join("; "),
    );
}

// ---------------------------------------------------------------------
// Criterion 10: threshold property
// ---------------------------------------------------------------------

fn threshold_spec(alpha0: f64, chi: f64) -> RunSpec {
    let p = ScaledParams::from_g_alpha0(1.0, alpha0, chi, 0.0, 0.0).unwrap();
    let (t_end, cutoff, tail_tol) = if alpha0 > 5.0 {
        (0.8, 150, 5e-5)
    } else {
        (2.5, 40, 1e-8)
    };
    let mut spec = RunSpec::new(
        format!("threshold-a{alpha0}-chi{chi}"),
        &p,
        TimeUnit::ScriptT,
        t_end,
    );
    spec.cutoff = Some(cutoff);
    spec.monitors.tail_tol = tail_tol;
    spec
}

#[test]
fn criterion_10_threshold_property() {
    let mut failures = Vec::new();
    for alpha0 in [2.5, 10.0] {
        for chi in [0.0, 5.0, 10.0] {
            let spec = threshold_spec(alpha0, chi);
            let outcome = cached_run(&spec.label.clone(), &spec);
            if outcome.manifest.measurements.ever_cat {
                failures.push(format!(
                    "g=1 alpha0={alpha0} chi={chi}: cat verdict true (peak delta {:?})",
                    outcome.manifest.measurements.peak_delta
                ));
            }
        }
    }
    // Above threshold the same pipeline must say yes: reuse damped cells.
    let table2 = presets::cells(PresetId::Table2).unwrap();
    for id in ["table2-g2.5-alpha2.5", "table2-g2.5-alpha5"] {
        let cell = table2.iter().find(|c| c.id == id).unwrap();
        let outcome = cached_run(id, &cell.spec);
        if !outcome.manifest.measurements.ever_cat {
            failures.push(format!("{id}: expected a cat verdict above threshold"));
        }
    }
    criterion(
        10,
        "g = 1 never yields a cat verdict (alpha0 in {2.5, 10}, chi in {0, 5, 10}); g = 2.5 does",
        failures.is_empty(),
        &failures.join("; "),
    );
}

// ---------------------------------------------------------------------
// Criterion 11: thermal large cat (slow suite)
// ---------------------------------------------------------------------

#[test]
#[ignore = "hours-scale propagation at cutoff ~520; run with --ignored"]
fn criterion_11_thermal_fringe_degradation() {
    let rows = preset_rows(PresetId::Sec7LargeCat);
    let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
    criterion(
        11,
        "large cat at alpha0 = 20: fringes at N = 0, visibility drop > 30% at N = 0.5",
        pass,
        &row_summary(&rows),
    );
}
