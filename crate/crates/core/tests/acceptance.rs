//! Acceptance gate at desk scale (L = 12). Prints one line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use bondtomo::bipartition::{crossed_bond_vector, enumerate_representatives, geometry_degeneracy, masks_with_popcount};
use bondtomo::entanglement::{entropy_bits, haar_random_state, schmidt_spectrum, EIGENVALUE_FLOOR};
use bondtomo::experiment::{
    haar_references, run_protocol, run_spectral_diagnostics, run_tomography, ConservationAudit, ExperimentConfig,
    FitSlice, Protocol, RunOutput,
};
use bondtomo::spectral_stats::{goe_surrogate_ratios, poisson_surrogate_ratios};
use bondtomo::spin_basis::{sample_rng, Basis, StateVector};
use bondtomo::tomography::{build_design_matrix, fit_bond_tensions};
use faer::{c64, Mat, Side};
use rand::Rng;

const L: usize = 12;
const SAMPLES: usize = 200;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn config(protocol: Protocol, times: Vec<f64>) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(protocol, L);
    c.times = times;
    c.n_samples = SAMPLES;
    c.master_seed = 2024;
    c
}

fn fit_at(fits: &[FitSlice], time: f64) -> &FitSlice {
    fits.iter().find(|f| f.time == time).expect("slice present")
}

fn mutual_info_at(run: &RunOutput, time: f64, j: usize) -> f64 {
    run.mutual_info.iter().find(|m| m.time == time && m.j == j).expect("record present").mean_i
}

fn half_chain_at(run: &RunOutput, time: f64) -> f64 {
    run.half_chain.iter().find(|h| h.time == time).expect("record present").mean_s
}

fn fits_for(run: &RunOutput) -> Vec<FitSlice> {
    run_tomography(L, run.config.protocol, run.records_for(L / 2).expect("n0 = L/2 recorded")).expect("fit")
}

fn fmt_omega(w: &[f64]) -> String {
    w.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn bipartition_table(g: &mut Gate) {
    let n16 = [1, 8, 21, 72, 147, 280, 375, 257];
    let m16 = [1, 8, 21, 70, 137, 246, 327, 254];
    let n12 = [1, 6, 12, 29, 38, 35];
    let m12 = [1, 6, 12, 28, 35, 35];
    let mut ok = true;
    let mut max_deg = 0;
    for (len, n, m) in [(16, &n16[..], &m16[..]), (12, &n12[..], &m12[..])] {
        for n0 in 1..=len / 2 {
            let s = enumerate_representatives(len, n0).expect("valid slice");
            ok &= s.count() == n[n0 - 1] && s.unique_geometries() == m[n0 - 1];
            max_deg = max_deg.max(geometry_degeneracy(&s));
        }
    }
    g.check(
        "bipartition table",
        ok && max_deg <= 3,
        format!("N/M counts for L = 12, 16 {}; max degeneracy {max_deg}", if ok { "match" } else { "differ" }),
    );
}

fn sum_rule(g: &mut Gate) {
    let mut violations = 0u64;
    let mut checked = 0u64;
    for len in [8usize, 12, 16] {
        for n0 in 0..=len {
            for mask in masks_with_popcount(len, n0) {
                checked += 1;
                if crossed_bond_vector(mask, len).total() as usize != n0 * (len - n0) {
                    violations += 1;
                }
            }
        }
    }
    g.check("sum rule", violations == 0, format!("{checked} masks, {violations} violations"));
}

fn dense_entropy(psi: &StateVector, mask: u32) -> f64 {
    let len = psi.len();
    let a: Vec<usize> = (0..len).filter(|&i| mask >> i & 1 == 1).collect();
    let b: Vec<usize> = (0..len).filter(|&i| mask >> i & 1 == 0).collect();
    let index = |ia: usize, ib: usize| -> usize {
        let mut k = 0;
        for (p, &s) in a.iter().enumerate() {
            k |= (ia >> p & 1) << s;
        }
        for (p, &s) in b.iter().enumerate() {
            k |= (ib >> p & 1) << s;
        }
        k
    };
    let amp = psi.amplitudes();
    let (da, db) = (1usize << a.len(), 1usize << b.len());
    let rho = Mat::<c64>::from_fn(da, da, |i, j| (0..db).map(|k| amp[index(i, k)] * amp[index(j, k)].conj()).sum());
    let eig = rho.self_adjoint_eigenvalues(Side::Lower).expect("Hermitian eigenvalues");
    eig.iter().filter(|&&l| l >= EIGENVALUE_FLOOR).map(|&l| -l * l.log2()).sum()
}

fn entropy_oracle(g: &mut Gate) {
    let mut rng = sample_rng(77, 0);
    let basis = Basis::full(6).expect("L = 6");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let psi = haar_random_state(basis.clone(), &mut rng);
        for mask in 1..63u32 {
            let s = entropy_bits(&schmidt_spectrum(&psi, mask).expect("valid mask"));
            worst = worst.max((s - dense_entropy(&psi, mask)).abs());
        }
    }
    g.check("entropy oracle", worst <= 1e-10, format!("max |S_svd - S_dense| = {worst:.2e} over 100 states x 62 masks"));
}

fn level_statistics(g: &mut Gate) {
    let mut thermal = ExperimentConfig::new(Protocol::NnThermal, L);
    thermal.n_samples = SAMPLES;
    thermal.master_seed = 31;
    let r = run_spectral_diagnostics(&thermal).expect("spectra");
    let m = r.mean_r.mean;
    g.check(
        "level statistics H_NN W=0.5",
        (m - 0.531).abs() <= 0.010,
        format!("mean r = {m:.4} +- {:.4} over {SAMPLES} realizations (target 0.531 +- 0.010)", r.mean_r.stderr),
    );

    let mut mbl = thermal.clone();
    mbl.w = 5.0;
    let r = run_spectral_diagnostics(&mbl).expect("spectra");
    let m = r.mean_r.mean;
    g.check(
        "level statistics H_NN W=5.0",
        (0.386..=0.40).contains(&m),
        format!("mean r = {m:.4} +- {:.4} (target [0.386, 0.40])", r.mean_r.stderr),
    );

    let mut rng = sample_rng(32, 0);
    let p = poisson_surrogate_ratios(100_000, &mut rng).expect("surrogate");
    g.check(
        "level statistics Poisson surrogate",
        (p.mean_r - 0.386).abs() <= 0.005,
        format!("mean r = {:.4} from 1e5 uniform levels (target 0.386 +- 0.005)", p.mean_r),
    );

    let goe = goe_surrogate_ratios(200, 100, &mut rng).expect("surrogate");
    g.check(
        "level statistics GOE surrogate",
        (goe.mean_r - 0.536).abs() <= 0.010,
        format!("mean r = {:.4} from 100 GOE(200) samples (target 0.536 +- 0.010)", goe.mean_r),
    );
}

fn audit_line(g: &mut Gate, name: &str, a: &ConservationAudit) {
    let energy_ok = a.max_energy_drift_rel.map_or(true, |e| e <= 1e-8);
    let sector_ok = a.max_sector_leakage.map_or(true, |s| s == 0.0);
    g.check(
        &format!("conservation audit {name}"),
        a.max_norm_drift <= 1e-10 && energy_ok && sector_ok,
        format!(
            "norm drift {:.1e}, energy drift/|H| {}, sector leakage {}",
            a.max_norm_drift,
            a.max_energy_drift_rel.map_or("n/a".into(), |e| format!("{e:.1e}")),
            a.max_sector_leakage.map_or("n/a".into(), |s| format!("{s:.1e}")),
        ),
    );
}

fn fit_properties(g: &mut Gate) {
    let mut rng = sample_rng(55, 0);
    let mut worst_coef = 0.0f64;
    let mut worst_r2 = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut worst_shift = 0.0f64;
    for (len, n0) in [(12, 4), (12, 5), (12, 6), (16, 7), (16, 8)] {
        let set = enumerate_representatives(len, n0).expect("slice");
        let x = build_design_matrix(&set).expect("design");
        for _ in 0..20 {
            let coef: Vec<f64> = (0..len / 2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = set
                .iter()
                .map(|(_, geo)| coef[0] + geo.predictors().iter().zip(&coef[1..]).map(|(&n, w)| w * n as f64).sum::<f64>())
                .collect();
            let fit = fit_bond_tensions(&x, &y).expect("fit");
            worst_coef = worst_coef.max((fit.s0 - coef[0]).abs());
            for (a, b) in fit.omega.iter().zip(&coef[1..]) {
                worst_coef = worst_coef.max((a - b).abs());
            }
            worst_r2 = worst_r2.max((fit.r2 - 1.0).abs());

            let noisy: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
            let a = fit_bond_tensions(&x, &noisy).expect("fit");
            for j in 0..x.ncols() {
                let dot: f64 = (0..x.nrows()).map(|i| x.get(i, j) * a.residuals[i]).sum();
                worst_orth = worst_orth.max(dot.abs());
            }
            let shift = rng.random_range(-10.0..10.0);
            let shifted: Vec<f64> = noisy.iter().map(|v| v + shift).collect();
            let b = fit_bond_tensions(&x, &shifted).expect("fit");
            for (p, q) in a.omega.iter().zip(&b.omega) {
                worst_shift = worst_shift.max((p - q).abs());
            }
            worst_shift = worst_shift.max((a.r2 - b.r2).abs()).max((b.s0 - a.s0 - shift).abs());
        }
    }
    g.check(
        "fit recovery",
        worst_coef <= 1e-9 && worst_r2 <= 1e-12,
        format!("max coefficient error {worst_coef:.1e}, max |R2 - 1| {worst_r2:.1e}"),
    );
    g.check("fit residual orthogonality", worst_orth <= 1e-8, format!("max |X^T r| = {worst_orth:.1e}"));
    g.check("fit shift invariance", worst_shift <= 1e-9, format!("max change in omega/R2 under shifts {worst_shift:.1e}"));
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut g = Gate { failures: 0 };

    bipartition_table(&mut g);
    sum_rule(&mut g);
    entropy_oracle(&mut g);
    fit_properties(&mut g);
    level_statistics(&mut g);

    // NN thermal tomography
    let nn = run_protocol(&config(Protocol::NnThermal, vec![0.1, 2.0, 1000.0])).expect("nn_thermal run");
    audit_line(&mut g, "nn_thermal", &nn.audit);
    let nn_fits = fits_for(&nn);
    let late = fit_at(&nn_fits, 1000.0);
    let early = fit_at(&nn_fits, 0.1);
    let h_late = late.fit.hierarchy().unwrap_or(f64::NAN);
    let h_early = early.fit.hierarchy().unwrap_or(f64::NAN);
    g.check(
        "NN thermal t=1000",
        late.fit.r2 >= 0.99 && h_late >= 3.0,
        format!("R2 = {:.5}, omega1/max(omega_j>1) = {h_late:.2}, omega = [{}]", late.fit.r2, fmt_omega(&late.fit.omega)),
    );
    let larger = early.fit.omega[0].abs() > late.fit.omega[0].abs();
    g.check(
        "NN thermal t=0.1",
        early.fit.r2 >= 0.995 && h_early >= 3.0 && larger,
        format!(
            "R2 = {:.5}, hierarchy = {h_early:.2}, omega1 = {:.4} vs late {:.4}, omega = [{}]",
            early.fit.r2,
            early.fit.omega[0],
            late.fit.omega[0],
            fmt_omega(&early.fit.omega)
        ),
    );
    let thermal_hcee = half_chain_at(&nn, 1000.0);
    let thermal_omega1 = late.fit.omega[0];

    // NNN signature
    let nnn = run_protocol(&config(Protocol::NnnThermal, vec![1000.0])).expect("nnn run");
    audit_line(&mut g, "nnn_thermal", &nnn.audit);
    let nnn_fit = &fits_for(&nnn)[0];
    let w_ratio = nnn_fit.fit.omega[1] / nnn_fit.fit.omega[0];
    let i_ratio = mutual_info_at(&nnn, 1000.0, 2) / mutual_info_at(&nnn, 1000.0, 1);
    g.check(
        "NNN signature",
        (0.5..=2.0).contains(&w_ratio) && (0.5..=2.0).contains(&i_ratio),
        format!("omega2/omega1 = {w_ratio:.3}, I2/I1 = {i_ratio:.3}, omega = [{}]", fmt_omega(&nnn_fit.fit.omega)),
    );

    // featureless saturation
    let haar = &haar_references(L, &[L / 2], 4000, 99).expect("Haar reference")[0];
    for (protocol, depth) in [(Protocol::Rqc, 1500.0), (Protocol::Floquet, 100.0)] {
        let run = run_protocol(&config(protocol, vec![depth])).expect("run");
        audit_line(&mut g, protocol.name(), &run.audit);
        let fit = &fits_for(&run)[0];
        let max_omega = fit.fit.omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let recs = run.records_for(L / 2).expect("records");
        let worst_z = recs
            .iter()
            .map(|r| (r.mean_s - haar.sector_mean).abs() / r.stderr.hypot(haar.sector_stderr))
            .fold(0.0f64, f64::max);
        g.check(
            &format!("featureless {protocol} at {depth}"),
            max_omega < 0.02 && worst_z <= 3.0,
            format!(
                "max |omega| = {max_omega:.4}, worst |S - S_Haar| = {worst_z:.2} sigma over {} reps (Haar {:.4} +- {:.4})",
                recs.len(),
                haar.sector_mean,
                haar.sector_stderr
            ),
        );
    }

    // MBL contrast
    let mbl = run_protocol(&config(Protocol::Mbl, vec![1e12])).expect("mbl run");
    audit_line(&mut g, "mbl", &mbl.audit);
    let mbl_fit = &fits_for(&mbl)[0];
    let mbl_hcee = half_chain_at(&mbl, 1e12);
    g.check(
        "MBL contrast",
        mbl_hcee < 0.5 * thermal_hcee && mbl_fit.fit.omega[0] >= 5.0 * thermal_omega1,
        format!(
            "HCEE {mbl_hcee:.3} vs thermal {thermal_hcee:.3}; omega1 {:.4} vs thermal {thermal_omega1:.4} (x{:.1})",
            mbl_fit.fit.omega[0],
            mbl_fit.fit.omega[0] / thermal_omega1
        ),
    );

    println!(
        "{} criteria failed; elapsed {:.0} s",
        g.failures,
        start.elapsed().as_secs_f64()
    );
    if g.failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
