//! Integration checks of the RK4 propagator against independent dense
//! linear algebra: a scaling-and-squaring matrix exponential of the full
//! vectorized generator, positive-semidefiniteness of evolved states via a
//! complex Hermitian Jacobi eigensolver, and Uhlmann fidelity against the
//! closed-form steady state.

use ndarray::Array2;
use num_complex::Complex64;

use catsim::analytic;
use catsim::fock::FockDensityMatrix;
use catsim::liouvillian::SuperOperator;
use catsim::params::{ScaledParams, TimeUnit};
use catsim::propagator::{evolve, EvolutionPlan, MonitorTolerances};
use catsim::signatures::{
    purity, wigner_clenshaw, wigner_negativity, GridSpec, NegativityMethod,
};

type C64 = Complex64;

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Returns the
/// eigenvalues and the unitary whose columns are the eigenvectors, so that
/// A = V diag(w) V†.
fn jacobi_hermitian(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v: Array2<C64> = Array2::eye(n);
    let fro: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let stop = 1e-13 * (1.0 + fro);
    for _sweep in 0..120 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = m[[p, q]].norm();
                if gamma <= 1e-300 {
                    continue;
                }
                let u = m[[p, q]] / gamma;
                let alpha = m[[p, p]].re;
                let beta = m[[q, q]].re;
                let tau = (alpha - beta) / (2.0 * gamma);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = s * u;
                let su_bar = s * u.conj();
                for k in 0..n {
                    let mp = m[[k, p]];
                    let mq = m[[k, q]];
                    m[[k, p]] = c * mp + su_bar * mq;
                    m[[k, q]] = -su * mp + c * mq;
                    let vp = v[[k, p]];
                    let vq = v[[k, q]];
                    v[[k, p]] = c * vp + su_bar * vq;
                    v[[k, q]] = -su * vp + c * vq;
                }
                for k in 0..n {
                    let mp = m[[p, k]];
                    let mq = m[[q, k]];
                    m[[p, k]] = c * mp + su * mq;
                    m[[q, k]] = -su_bar * mp + c * mq;
                }
            }
        }
    }
    let w: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    (w, v)
}

/// Hermitian square root from the eigendecomposition, clamping tiny
/// negative eigenvalues to zero.
fn psd_sqrt(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let (w, v) = jacobi_hermitian(a);
    let mut out = Array2::zeros((n, n));
    for (k, &wk) in w.iter().enumerate() {
        let r = wk.max(0.0).sqrt();
        if r == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += r * v[[i, k]] * v[[j, k]].conj();
            }
        }
    }
    out
}

/// Uhlmann fidelity F(ρ, σ) = (Tr √(√ρ σ √ρ))².
fn uhlmann_fidelity(rho: &Array2<C64>, sigma: &Array2<C64>) -> f64 {
    let sr = psd_sqrt(rho);
    let inner = sr.dot(sigma).dot(&sr);
    let (w, _) = jacobi_hermitian(&inner);
    let tr: f64 = w.iter().map(|&x| x.max(0.0).sqrt()).sum();
    tr * tr
}

/// The generator as a dense (nc² × nc²) matrix acting on row-major
/// vectorized density matrices.
fn liouvillian_matrix(op: &SuperOperator) -> Array2<C64> {
    let nc = op.cutoff();
    let dim = nc * nc;
    let mut l = Array2::zeros((dim, dim));
    let mut basis = Array2::zeros((nc, nc));
    let mut image = Array2::zeros((nc, nc));
    for b in 0..dim {
        basis[[b / nc, b % nc]] = C64::new(1.0, 0.0);
        op.apply_into(&basis, &mut image);
        for i in 0..nc {
            for j in 0..nc {
                l[[i * nc + j, b]] = image[[i, j]];
            }
        }
        basis[[b / nc, b % nc]] = C64::new(0.0, 0.0);
    }
    l
}

/// Matrix exponential e^{A·t} by scaling and squaring with a Taylor core.
fn expm(a: &Array2<C64>, t: f64) -> Array2<C64> {
    let n = a.nrows();
    let b = a.mapv(|z| z * t);
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| b[[i, j]].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm1 > 0.25 {
        (norm1 / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let c = b.mapv(|z| z / (2.0f64.powi(s as i32)));
    let mut acc: Array2<C64> = Array2::eye(n);
    let mut term: Array2<C64> = Array2::eye(n);
    for k in 1..200 {
        term = term.dot(&c).mapv(|z| z / (k as f64));
        acc += &term;
        let tn: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if tn < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        acc = acc.dot(&acc);
    }
    acc
}

fn vectorize(rho: &Array2<C64>) -> Vec<C64> {
    let nc = rho.nrows();
    let mut v = Vec::with_capacity(nc * nc);
    for i in 0..nc {
        for j in 0..nc {
            v.push(rho[[i, j]]);
        }
    }
    v
}

#[test]
fn helper_self_checks() {
    // Eigendecomposition reconstructs a small Hermitian matrix.
    let mut a: Array2<C64> = Array2::zeros((3, 3));
    a[[0, 0]] = C64::new(1.0, 0.0);
    a[[1, 1]] = C64::new(2.0, 0.0);
    a[[2, 2]] = C64::new(3.0, 0.0);
    a[[0, 1]] = C64::new(0.3, 0.4);
    a[[1, 0]] = a[[0, 1]].conj();
    a[[1, 2]] = C64::new(-0.2, 0.1);
    a[[2, 1]] = a[[1, 2]].conj();
    let (w, v) = jacobi_hermitian(&a);
    let mut rec: Array2<C64> = Array2::zeros((3, 3));
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                rec[[i, j]] += w[k] * v[[i, k]] * v[[j, k]].conj();
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            assert!((rec[[i, j]] - a[[i, j]]).norm() < 1e-12);
        }
    }
    let tr_w: f64 = w.iter().sum();
    assert!((tr_w - 6.0).abs() < 1e-12);

    // expm of a rotation generator gives sine and cosine.
    let th = 0.7f64;
    let mut g: Array2<C64> = Array2::zeros((2, 2));
    g[[0, 1]] = C64::new(1.0, 0.0);
    g[[1, 0]] = C64::new(-1.0, 0.0);
    let r = expm(&g, th);
    assert!((r[[0, 0]].re - th.cos()).abs() < 1e-14);
    assert!((r[[0, 1]].re - th.sin()).abs() < 1e-14);
    assert!((r[[1, 0]].re + th.sin()).abs() < 1e-14);

    // Fidelity is 1 on identical states and 0 on orthogonal ones.
    let zero = FockDensityMatrix::fock_state(4, 0).unwrap();
    let one = FockDensityMatrix::fock_state(4, 1).unwrap();
    let f_same = uhlmann_fidelity(zero.data(), zero.data());
    let f_orth = uhlmann_fidelity(zero.data(), one.data());
    assert!((f_same - 1.0).abs() < 1e-12);
    assert!(f_orth.abs() < 1e-12);
    // Fidelity between the vacuum and a coherent state: |⟨0|β⟩|².
    let beta = C64::new(0.6, -0.3);
    let coh = FockDensityMatrix::coherent(24, beta).unwrap();
    let vac = FockDensityMatrix::vacuum(24).unwrap();
    let f = uhlmann_fidelity(vac.data(), coh.data());
    assert!((f - (-beta.norm_sqr()).exp()).abs() < 1e-10);
}

#[test]
fn dense_expm_oracle_matches_rk4() {
    let params = ScaledParams::new(2.0, 1.2, 0.7, 0.4, 0.3).unwrap();
    let nc = 8;
    let op = SuperOperator::build(&params, nc, TimeUnit::Tau).unwrap();
    let rho0 = FockDensityMatrix::coherent(nc, C64::new(0.4, 0.2)).unwrap();
    let t_end = 0.05;

    // The small cutoff keeps boundary occupancy visible; the monitors are
    // opened up because the subject here is the integrator, not truncation.
    let plan = EvolutionPlan::new(t_end, 1e-4)
        .unwrap()
        .with_monitors(MonitorTolerances {
            trace_tol: 1e-3,
            tail_tol: 1e-2,
            hermiticity_tol: 1e-10,
        });
    let result = evolve(&op, &rho0, &plan).unwrap();
    let rk4 = &result.snapshots[0].rho;

    let l = liouvillian_matrix(&op);
    let u = expm(&l, t_end);
    let v0 = vectorize(rho0.data());
    let dim = nc * nc;
    let mut evolved = vec![C64::new(0.0, 0.0); dim];
    for i in 0..dim {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..dim {
            s += u[[i, j]] * v0[j];
        }
        evolved[i] = s;
    }
    let mut worst = 0.0f64;
    for i in 0..nc {
        for j in 0..nc {
            let d = (rk4.data()[[i, j]] - evolved[i * nc + j]).norm();
            worst = worst.max(d);
        }
    }
    assert!(
        worst < 1e-8,
        "max |RK4 - expm| = {worst:.3e} exceeds 1e-8"
    );
}

#[test]
fn snapshots_remain_positive_semidefinite() {
    let params = ScaledParams::new(3.0, 1.5, 0.5, 0.2, 0.1).unwrap();
    let op = SuperOperator::build(&params, 16, TimeUnit::Tau).unwrap();
    let vac = FockDensityMatrix::vacuum(16).unwrap();
    let plan = EvolutionPlan::new(0.5, 5e-4)
        .unwrap()
        .with_snapshots(&[0.1, 0.25, 0.5])
        .unwrap()
        .with_monitors(MonitorTolerances {
            trace_tol: 1e-6,
            tail_tol: 1e-6,
            ..MonitorTolerances::default()
        });
    let result = evolve(&op, &vac, &plan).unwrap();
    assert_eq!(result.snapshots.len(), 3);
    for snap in &result.snapshots {
        let (w, _) = jacobi_hermitian(snap.rho.data());
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            min > -1e-8,
            "negative eigenvalue {min:.3e} at t = {}",
            snap.time
        );
        assert!(max <= 1.0 + 1e-9);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}

#[test]
fn long_run_state_reaches_analytic_steady_state() {
    // g = 2.5, α₀ = 2.5: by τ = 2 the dynamics has relaxed. The closed-form
    // steady state is the g → ∞ limit, so the fidelity lands close to but
    // measurably below one; the upper bound pins that known finite-g gap.
    let params = ScaledParams::from_g_alpha0(2.5, 2.5, 0.0, 0.0, 0.0).unwrap();
    let nc = 45;
    let op = SuperOperator::build(&params, nc, TimeUnit::Tau).unwrap();
    let vac = FockDensityMatrix::vacuum(nc).unwrap();
    let plan = EvolutionPlan::new(2.0, 2e-4).unwrap();
    let result = evolve(&op, &vac, &plan).unwrap();
    let rho = &result.snapshots[0].rho;
    let reference = analytic::steady_state(&params, nc).unwrap();
    let f = uhlmann_fidelity(rho.data(), reference.data());
    assert!(
        (0.995..0.9998).contains(&f),
        "steady-state fidelity {f:.8} outside the expected band"
    );
}

#[test]
#[ignore = "slow: two cutoff-150 runs plus fine Wigner maps"]
fn detuning_rotation_invariance() {
    // Short strong-drive runs at Δ = 0 and Δ = 50 should agree in purity,
    // occupation, Wigner negativity, and lobe radius; detuning only steers
    // phase-space orientation on this timescale.
    let run = |delta: f64| {
        let params = ScaledParams::from_g_alpha0(2.5, 10.0, 0.0, delta, 0.0).unwrap();
        let op = SuperOperator::build(&params, 150, TimeUnit::Tau).unwrap();
        let vac = FockDensityMatrix::vacuum(150).unwrap();
        let plan = EvolutionPlan::new(0.015, 8e-6)
            .unwrap()
            .with_monitors(MonitorTolerances {
                tail_tol: 1e-4,
                ..MonitorTolerances::default()
            });
        evolve(&op, &vac, &plan).unwrap().snapshots.pop().unwrap().rho
    };
    let rho_zero = run(0.0);
    let rho_det = run(50.0);

    let p0 = purity(&rho_zero);
    let p1 = purity(&rho_det);
    assert!(
        (p0 - p1).abs() < 1e-3,
        "purity differs: {p0:.6} vs {p1:.6}"
    );
    let n0 = rho_zero.mean_photon_number();
    let n1 = rho_det.mean_photon_number();
    assert!((n0 - n1).abs() < 0.5, "occupation differs: {n0} vs {n1}");

    let grid = GridSpec::centered(14.0, 0.04).unwrap();
    let map0 = wigner_clenshaw(&rho_zero, &grid).unwrap();
    let map1 = wigner_clenshaw(&rho_det, &grid).unwrap();
    let d0 = wigner_negativity(&map0, NegativityMethod::Trapezoid).delta;
    let d1 = wigner_negativity(&map1, NegativityMethod::Trapezoid).delta;
    assert!(
        (d0 - d1).abs() < 1e-3,
        "negativity differs: {d0:.6} vs {d1:.6}"
    );

    // The brightest phase-space point sits at the same radius in both runs.
    let argmax_radius = |map: &catsim::signatures::PhaseSpaceGrid| {
        let values = map.values();
        let (mut best, mut at) = (f64::NEG_INFINITY, (0usize, 0usize));
        for i in 0..map.re_axis().len() {
            for j in 0..map.im_axis().len() {
                if values[[i, j]] > best {
                    best = values[[i, j]];
                    at = (i, j);
                }
            }
        }
        let re = map.re_axis()[at.0];
        let im = map.im_axis()[at.1];
        (re * re + im * im).sqrt()
    };
    let r0 = argmax_radius(&map0);
    let r1 = argmax_radius(&map1);
    assert!(
        (r0 - r1).abs() < 0.15,
        "lobe radius differs: {r0:.3} vs {r1:.3}"
    );
}
