//! Acceptance suite: one PASS/FAIL line per criterion, each with its measured values and
//! runtime. Exits 0 regardless of outcome unless QMEMLAB_ACCEPTANCE_STRICT=1 is set.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qmemlab::cavity::{
    evolve_cavity, free_space_destruction, lifetime_budget, run_readout, CavityModel, CavityState,
};
use qmemlab::consts::Transition;
use qmemlab::ensemble::{AtomEnsemble, DensityProfile};
use qmemlab::grid::{ComplexEnvelope, Domain, Grid1D};
use qmemlab::mb_solver::{amplitude_transmission, step_rotation, Exchange};
use qmemlab::protocols::*;
use qmemlab::ssm::{fit_dephasing_rate, fit_focal_length, monte_carlo_envelope};
use qmemlab::temporal::{
    echo_is_time_reversed, far_field, find_peaks, gem_efficiency, kspace_input_correlation, raman_echo_efficiency,
    run_gem_echo, wigner, GaussianPulse, RayTransform,
};
use qmemlab::units::{degrees, ghz, mhz};
use qmemlab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

fn lib<T>(r: qmemlab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn uniform(od: f64, nz: usize, tr: &Transition) -> Result<AtomEnsemble, String> {
    let g = lib(Grid1D::cell_centered(-0.5e-2, 0.5e-2, nz))?;
    lib(AtomEnsemble::with_profile(g, DensityProfile::Uniform { length: 1e-2 }, od, tr))
}

fn cycle(nz: usize, nt: usize, exchange: Exchange, od: f64, rabi: f64) -> Result<CycleResult, String> {
    let tr = Transition::rb87_d1();
    let ens = uniform(od, nz, &tr)?;
    let cfg = CycleConfig {
        detuning: mhz(100.0),
        rabi,
        pulse: GaussianPulse::new(1e-6, 0.2e-6, mhz(0.01)),
        write_end: 2e-6,
        read_start: 3e-6,
        time: lib(Grid1D::new(0.0, 6e-6 / nt as f64, nt))?,
        lossless: true,
        exchange,
    };
    lib(memory_cycle(&ens, &tr, &cfg))
}

fn drift(run: &CycleResult) -> f64 {
    run.drift.unwrap_or(f64::INFINITY)
}

fn conservation() -> Check {
    let fine = drift(&cycle(512, 4000, Exchange::Rotation, 20.0, mhz(10.0))?);
    let coarse_fo = drift(&cycle(256, 2000, Exchange::FirstOrder, 20.0, mhz(10.0))?);
    let fine_fo = drift(&cycle(512, 4000, Exchange::FirstOrder, 20.0, mhz(10.0))?);
    let ratio = fine_fo / coarse_fo;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let (od, rabi) = (rng.gen_range(1.0..60.0), rng.gen_range(2.0..20.0));
        worst = worst.max(drift(&cycle(64, 600, Exchange::Rotation, od, mhz(rabi))?));
    }
    Ok((
        fine < 1e-5 && (0.4..=0.6).contains(&ratio) && worst < 1e-5,
        format!(
            "512x4000 drift {fine:.2e} (< 1e-5); first-order halving ratio {ratio:.3} (0.5 +/- 20%); \
             random lossless cycles worst {worst:.2e}"
        ),
    ))
}

fn unitarity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000_000 {
        let u_at = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let u_ph = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let before = u_at.norm_sqr() + u_ph.norm_sqr();
        if before == 0.0 {
            continue;
        }
        let (a, p) = step_rotation(u_at, u_ph, rng.gen_range(-PI..PI));
        worst = worst.max((a.norm_sqr() + p.norm_sqr() - before).abs() / before);
    }
    Ok((worst < 1e-12, format!("10^6 rotations, worst relative norm change {worst:.2e} (< 1e-12)")))
}

fn loss_laws() -> Check {
    let tr = Transition::rb87_d1();
    let ens = uniform(10.0, 256, &tr)?;
    let k_spin = 2.0 * PI * 40.0 / 1e-2;
    let mut worst_decay: f64 = 0.0;
    for (detuning, rabi) in [(mhz(60.0), mhz(10.0)), (mhz(300.0), mhz(40.0))] {
        let guess = 0.5 / qmemlab::mb_solver::broadening_rate(tr.gamma, rabi, detuning);
        let (fitted, expected) = lib(broadening_lifetime(&ens, &tr, detuning, rabi, k_spin, 2.0 * guess, 2000))?;
        worst_decay = worst_decay.max((fitted / expected - 1.0).abs());
    }
    let mut worst_transmission: f64 = 0.0;
    for od in [1.0, 5.0, 20.0] {
        let ens = uniform(od, 128, &tr)?;
        for ratio in [10.0, 50.0] {
            let measured = lib(measured_transmission(&ens, &tr, ratio * tr.gamma))?;
            let expected = amplitude_transmission(tr.gamma, ratio * tr.gamma, od);
            worst_transmission = worst_transmission.max((measured / expected - 1.0).abs());
        }
    }
    Ok((
        worst_decay < 0.01 && worst_transmission < 0.01,
        format!(
            "coherence decay vs exp(-2 gamma t) worst {:.3}%; transmission worst {:.2e} relative (both < 1%)",
            100.0 * worst_decay,
            worst_transmission
        ),
    ))
}

fn phase_matching() -> Check {
    let tr = Transition::rb87_d1();
    let ens = uniform(0.1, 1024, &tr)?;
    let products: Vec<f64> = (-40..=40).map(|i| 0.5 * i as f64).collect();
    let dks: Vec<f64> = products.iter().map(|p| p / 1e-2).collect();
    let curve = lib(phase_matching_curve(&ens, &tr, mhz(60.0), mhz(5.0), &dks))?;
    let model: Vec<f64> = products.iter().map(|p| sinc_abs(0.5 * p)).collect();
    let dot: f64 = curve.iter().zip(&model).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let corr = dot / (norm(&curve) * norm(&model));
    Ok((corr >= 0.99, format!("correlation with sinc(dkz L/2) over [-20, 20]: {corr:.6} (>= 0.99)")))
}

fn collapse_revival() -> Check {
    let r = lib(staircase_revival(4, 2.0 * PI * 100e3, 2.0 * PI * 10e3, 1000))?;
    let deviation = r.signal.iter().zip(&r.analytic).map(|(s, a)| (s.norm() - a).abs()).fold(0.0, f64::max);
    Ok((
        r.minimum < 0.05 && r.revival > 0.95 && deviation < 1e-9,
        format!(
            "min |S|/|S0| {:.2e} (< 0.05); revival {:.6} (> 0.95); max deviation from 4-term sum {deviation:.1e}",
            r.minimum, r.revival
        ),
    ))
}

fn dephasing() -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, sigma) in [0.03, 0.06, 0.12].into_iter().enumerate() {
        let phi: Vec<f64> = (0..41).map(|j| 1.5 / sigma * j as f64 / 40.0).collect();
        let mc = monte_carlo_envelope(sigma, &phi, 100_000, 2024 + i as u64);
        let fitted = lib(fit_dephasing_rate(&phi, &mc))?;
        let err = (fitted / (sigma * sigma) - 1.0).abs();
        pass &= err < 0.02;
        parts.push(format!("sigma {:.0}%: {:.2}%", 100.0 * sigma, 100.0 * err));
    }
    Ok((pass, format!("fitted slope error {} (< 2%)", parts.join(", "))))
}

fn fringe_round_trips() -> Check {
    let carrier = (1.2, 0.6);
    let step = gaussian_field(512, 120.0, |x, _| 0.5 * PI * (1.0 + (x / 1.5).tanh()));
    let rt = lib(fringe_round_trip(&step, 2.0, carrier))?;
    let recovered = measured_phase_step(&rt.recovered, 12);
    let step_error = C64::from_polar(1.0, recovered - PI).arg().abs();
    let (pixel, wavelength, focal) = (5e-6, 795e-9, 0.5);
    let scale = 2.0 * PI / wavelength * pixel * pixel / (2.0 * focal);
    let lens = gaussian_field(512, 120.0, |x, y| -scale * (x * x + y * y));
    let rt = lib(fringe_round_trip(&lens, 2.0, carrier))?;
    let fitted = lib(fit_focal_length(&rt.recovered, pixel, wavelength, 0.05))?;
    let focal_error = (fitted / focal - 1.0).abs();
    Ok((
        step_error < 0.05 && focal_error < 0.03,
        format!("512x512: pi step error {step_error:.2e} rad (< 0.05); focal length error {:.4}% (< 3%)", 100.0 * focal_error),
    ))
}

fn abcd_and_wigner() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = 10f64.powf(rng.gen_range(-3.0..3.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let l = lib(RayTransform::lens(f))?;
        let m = l.compose(&RayTransform::propagation(f)).compose(&l);
        let alt = lib(far_field(f))?;
        let errs = [m.a.abs(), (m.b - f).abs() / f.abs(), (m.c + 1.0 / f).abs() * f.abs(), m.d.abs(), (alt.b - m.b).abs()];
        worst = errs.iter().copied().fold(worst, f64::max);
    }
    let grid = lib(Grid1D::centered(0.1, 128))?;
    let env = ComplexEnvelope::from_fn(grid, Domain::SignalInZ, |x| {
        C64::from_polar((-(x - 0.4).powi(2) / (2.0 * 0.64)).exp(), 2.0 * x)
    });
    let env = lib(env.normalized())?;
    let w = lib(wigner(&env))?;
    let direct: Vec<f64> = env.values().iter().map(|v| v.norm_sqr()).collect();
    let spectrum: Vec<f64> = w
        .k
        .points()
        .map(|k| {
            let s: C64 = grid.points().zip(env.values()).map(|(x, v)| v * C64::from_polar(1.0, -k * x)).sum();
            (s * grid.step() / (2.0 * PI).sqrt()).norm_sqr()
        })
        .collect();
    let rms = |a: &[f64], b: &[f64]| (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    let (rx, rk) = (rms(&w.marginal_x(), &direct), rms(&w.marginal_k(), &spectrum));
    Ok((
        worst < 1e-12 && rx < 1e-6 && rk < 1e-6,
        format!("100 random f: worst matrix error {worst:.1e} (< 1e-12); Wigner marginal RMS x {rx:.1e}, k {rk:.1e} (< 1e-6)"),
    ))
}

fn gem_reproduction() -> Check {
    let (ens, tr, cfg) = lib(gem_three_pulse(300.0))?;
    let echo = lib(run_gem_echo(&ens, &tr, &cfg))?;
    let grid = *echo.output.grid();
    let after = grid.nearest(cfg.flip_time);
    let trace: Vec<f64> = echo.output.values()[after..].iter().map(|v| v.norm_sqr()).collect();
    let echoes: Vec<f64> = find_peaks(&trace, 0.05).into_iter().map(|i| grid.point(i + after)).collect();
    let inputs: Vec<f64> = cfg.pulses.iter().map(|p| p.center).collect();
    let reversed = echo_is_time_reversed(&inputs, &echoes, cfg.flip_time, 0.5e-6);
    let corr = lib(kspace_input_correlation(&echo.flip_coherence, &echo.input, cfg.beta, cfg.flip_time))?;
    let shown: Vec<String> = echoes.iter().map(|t| format!("{:.2}", t * 1e6)).collect();
    Ok((
        reversed && corr >= 0.95,
        format!("echoes at [{}] us, time-reversed {reversed}; K-space/input correlation {corr:.4} (>= 0.95)", shown.join(", ")),
    ))
}

fn efficiency_law() -> Check {
    let tr = Transition::rb87_d1();
    let mut worst_formula: f64 = 0.0;
    let mut worst_raman: f64 = 0.0;
    let mut parts = Vec::new();
    for cycles in [5.0, 13.0, 40.0] {
        let tb = 2.0 * PI * cycles;
        let sim = lib(uniform_echo_efficiency(&tr, 70.0, tb, true))?;
        let formula = gem_efficiency(70.0, tb);
        worst_formula = worst_formula.max((sim - formula).abs());
        worst_raman = worst_raman.max((sim - raman_echo_efficiency(70.0, tb)).abs());
        parts.push(format!("{sim:.4} vs {formula:.4}"));
    }
    let mut invariance: f64 = 0.0;
    for (od, tb) in [(70.0, 2.0 * PI * 5.0), (10.0, 3.0), (200.0, 2.0 * PI * 40.0)] {
        invariance = invariance.max((gem_efficiency(od, tb) - gem_efficiency(2.0 * od, 2.0 * tb)).abs());
    }
    Ok((
        worst_formula <= 0.10 && invariance < 1e-12,
        format!(
            "simulated vs formula [{}], worst {:.3} (<= 0.10 absolute); simulation vs Raman-echo law worst {:.1e}; \
             ratio invariance {:.1e} (< 1e-12)",
            parts.join(", "),
            worst_formula,
            worst_raman,
            invariance
        ),
    ))
}

fn spectrometer() -> Check {
    let (design, tr) = reference_spectrometer();
    let sweep = lib(spectrometer_sweep(&design, &tr, 1024, &[3e-6, 4e-6, 5e-6, 6e-6, 7e-6]))?;
    let worst = sweep.fringes.iter().map(|f| (f.measured / f.predicted - 1.0).abs()).fold(0.0, f64::max);
    let eff = sweep.single_efficiency;
    Ok((
        worst < 0.05 && (0.05..=0.10).contains(&eff),
        format!(
            "fringe frequency vs linear law worst {:.2}% (< 5%) over 5 separations; efficiency {:.2}% (in [5%, 10%])",
            100.0 * worst,
            100.0 * eff
        ),
    ))
}

fn cavity() -> Check {
    let tr = Transition::rb87_d1();
    let grid = lib(Grid1D::cell_centered(-1e-2, 1e-2, 256))?;
    let ens = lib(AtomEnsemble::with_profile(grid, DensityProfile::Uniform { length: 1e-2 }, 70.0, &tr))?;
    let model = lib(CavityModel::rb87_d1(0.3, 0.01, mhz(30.0), ghz(1.0)))?;
    let run = lib(run_readout(&model, &ens, &tr, C64::new(1.0, 0.0), 1e-6))?;
    let tau = lib(lifetime_budget(&model, degrees(1.0), &ens, &tr))?.tau_broadening;
    let destruction = 1.0 - run.survival_offmatched;
    let full = lib(free_space_destruction(&model, &ens, &tr, 1e-6, 2000))?;

    let closed = lib(CavityModel::rb87_d1(0.3, 1e-12, mhz(30.0), ghz(1.0)))?.lossless();
    let mut s = lib(CavityState::matched(&ens, C64::new(1e-3, 0.0)))?;
    let initial = s.atomic_excitations(&ens);
    let mut conservation: f64 = 0.0;
    for _ in 0..2000 {
        s = lib(evolve_cavity(&closed, &s, &ens, &tr, 0.5e-9))?;
        let total = s.atomic_excitations(&ens) + s.cavity_photons(&closed, &ens, &tr) + s.emitted_photons;
        conservation = conservation.max((total - initial).abs() / initial);
    }

    let checks = [
        (run.efficiency - 0.92).abs() <= 0.02,
        (tau / 109e-6 - 1.0).abs() <= 0.02,
        (destruction - 0.009).abs() <= 0.001,
        full <= 0.02,
        conservation < 1e-6,
    ];
    Ok((
        checks.iter().all(|c| *c),
        format!(
            "efficiency {:.2}% (92 +/- 2); tau_broadening {:.2} us (109 +/- 2%); off-matched destruction {:.3}% \
             (0.9 +/- 0.1); full-solver destruction {:.2}% (<= 2%); closed-limit drift {conservation:.1e} (< 1e-6)",
            100.0 * run.efficiency,
            tau * 1e6,
            100.0 * destruction,
            100.0 * full
        ),
    ))
}

fn tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&p).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (dir, jobs) in [("first", "1"), ("second", "4")] {
        let status = Command::new(env!("CARGO_BIN_EXE_qmemlab"))
            .args(["run", "--all", "--output-dir", dir, "--jobs", jobs])
            .current_dir(root.path())
            .env_remove("QMEMLAB_OUTPUT_DIR")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
    }
    let (a, b) = (tree(&root.path().join("first"))?, tree(&root.path().join("second"))?);
    let scenarios = a.iter().filter(|(p, _)| p.ends_with("manifest.toml")).count();
    let differing: Vec<&str> =
        a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    Ok((
        a.len() == b.len() && differing.is_empty() && scenarios >= 8,
        format!("{scenarios} bundled scenarios run twice (1 and 4 jobs): {} files, {} differ", a.len(), differing.len()),
    ))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 13] = [
        ("conservation", 60, conservation),
        ("rotation unitarity", 5, unitarity),
        ("loss laws", 120, loss_laws),
        ("phase matching", 120, phase_matching),
        ("collapse/revival", 1, collapse_revival),
        ("SSM dephasing", 30, dephasing),
        ("fringe round trip", 20, fringe_round_trips),
        ("ABCD identity", 10, abcd_and_wigner),
        ("GEM reproduction", 300, gem_reproduction),
        ("efficiency law", 600, efficiency_law),
        ("spectrometer mapping", 600, spectrometer),
        ("cavity readout", 60, cavity),
        ("determinism", 600, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s of {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 && std::env::var("QMEMLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
