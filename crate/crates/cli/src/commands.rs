use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use storedlight_core::memory::{lifetime_upper_bound, storage_efficiency};
use storedlight_core::phase::{measure_shot, shot_windows, translation_phase, velocity_from_phase};
use storedlight_core::report::{fig3a, fig3b, fig3c, supp_fig2, write_measurements_csv, write_measurements_jsonl, Table};
use storedlight_core::rng::derive_seed;
use storedlight_core::stats::LineFit;
use storedlight_core::synth::{run_shot, GroundTruth};
use storedlight_core::trace_io::{decode_binary, load_trace, read_csv, write_binary, write_csv};
use storedlight_core::velocimetry::{
    averaging_study, calibrate_vibration, fit_alpha_vs_tau, run_all_sweeps, sensitivity, AlphaEstimate, Calibration,
};
use storedlight_core::{Error, ExperimentConfig, NoiseConfig, PhaseMeasurement, Regime, SensitivityReport, StageMotion};

use crate::manifest::OutputDir;
use crate::{CliError, Common, RegimeArg};

const CALIBRATION_LABEL: u64 = 0x6361_6c69;

const SWEEP_SEEDS: &str =
    "record seed = derive_seed(master_seed, [tau_s as f64 bits, velocity index, run, regime (0 rest, 1 motion)])";
const SHARED_REST_SEEDS: &str =
    "shared rest record seed = derive_seed(master_seed, [tau_s as f64 bits, 2^64-1, run, 0])";
const STREAM_SEEDS: &str =
    "per record: acquisition phases from derive_seed(record seed, [record label]); laser walk and detector noise from derive_seed(record seed, [stream label])";

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => match ExperimentConfig::load(path) {
            Err(Error::Io(e)) => return Err(CliError::io(path, e)),
            other => other?,
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if common.noiseless {
        cfg.noise = NoiseConfig::noiseless();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn table_bytes(t: &Table) -> Vec<u8> {
    t.to_bytes()
}

fn emit_summary(out: &mut OutputDir, name: &str, text: &str) -> Result<(), CliError> {
    print!("{text}");
    out.write(name, text.as_bytes())
}

pub fn config(write: Option<&Path>) -> Result<(), CliError> {
    let text = ExperimentConfig::default().to_toml_string();
    match write {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ShotRecord {
    shot: u64,
    record_seed: u64,
    truth: GroundTruth,
}

pub fn simulate(
    common: &Common,
    shot: u64,
    velocity: Option<f64>,
    storage_time: Option<f64>,
    csv: bool,
) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    if let Some(v) = velocity {
        cfg.stage.velocity = v;
    }
    if let Some(t) = storage_time {
        cfg.timing = cfg.timing.with_storage_time(t);
    }
    cfg.validate()?;
    let exp = cfg.experiment()?;
    let seed = derive_seed(cfg.master_seed, &[shot]);
    let s = run_shot(&exp, &cfg.stage, seed)?;

    let mut out = OutputDir::create(&cfg.output_dir)?;
    for (name, trace) in [("reference", &s.reference), ("probe", &s.probe)] {
        let mut bytes = Vec::new();
        write_binary(trace, &mut bytes)?;
        out.write(&format!("{name}.slvt"), &bytes)?;
        if csv {
            let mut bytes = Vec::new();
            write_csv(trace, &mut bytes)?;
            out.write(&format!("{name}.csv"), &bytes)?;
        }
    }
    let record = ShotRecord {
        shot,
        record_seed: seed,
        truth: s.truth,
    };
    let mut truth = serde_json::to_string_pretty(&record).expect("ground truth serializes");
    truth.push('\n');
    out.write("truth.json", truth.as_bytes())?;
    let config_text = cfg.to_toml_string();
    out.write("config.toml", config_text.as_bytes())?;
    let m = out.finish(
        "simulate",
        &config_text,
        cfg.master_seed,
        vec![
            format!("record seed = derive_seed(master_seed, [shot]) = derive_seed({}, [{shot}]) = {seed}", cfg.master_seed),
            STREAM_SEEDS.to_string(),
        ],
    )?;
    println!(
        "simulated shot {shot} (V = {} m/s, tau_s = {} s) into {} ({} files)",
        cfg.stage.velocity,
        exp.storage_time(),
        cfg.output_dir.display(),
        m.outputs.len()
    );
    Ok(())
}

pub struct ExtractArgs {
    pub common: Common,
    pub reference: PathBuf,
    pub probe: PathBuf,
    pub regime: RegimeArg,
    pub rest: Option<(PathBuf, PathBuf)>,
    pub storage_time: Option<f64>,
    pub window_length: Option<f64>,
    pub lenient: bool,
    pub output: Option<PathBuf>,
    pub jsonl: bool,
}

fn load(path: &Path, cfg: &ExperimentConfig) -> Result<storedlight_core::Trace, CliError> {
    match load_trace(path, cfg.trace.time_origin, cfg.trace.beat_frequency) {
        Err(Error::Io(e)) => Err(CliError::io(path, e)),
        other => Ok(other?),
    }
}

pub fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.storage_time {
        cfg.timing = cfg.timing.with_storage_time(t);
    }
    if let Some(w) = args.window_length {
        cfg.analysis.window_length = w;
    }
    cfg.validate()?;
    let exp = cfg.experiment()?;
    let windows = shot_windows(&exp, &cfg.analysis)?;
    let floor = cfg.analysis.amplitude_floor;

    let regime = match (args.regime, &args.rest) {
        (_, Some(_)) | (RegimeArg::Motion, None) => Regime::Motion,
        (RegimeArg::Rest, None) => Regime::Rest,
    };
    let mut shots = vec![(args.reference.clone(), args.probe.clone(), regime)];
    if let Some((r, p)) = &args.rest {
        shots.push((r.clone(), p.clone(), Regime::Rest));
    }

    let mut rows: Vec<PhaseMeasurement> = Vec::new();
    for (r, p, regime) in &shots {
        let reference = load(r, &cfg)?;
        let probe = load(p, &cfg)?;
        match measure_shot(&reference, &probe, &windows, *regime, floor) {
            Ok(m) => rows.push(m),
            Err(e @ Error::LowSignal { .. }) if args.lenient => {
                eprintln!("warning: skipping {}: {e}", p.display());
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut bytes = Vec::new();
    if args.jsonl {
        write_measurements_jsonl(&rows, &mut bytes)?;
    } else {
        write_measurements_csv(&rows, &mut bytes)?;
    }
    match &args.output {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| CliError::io(path, e))?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }

    if let [motion, rest] = rows.as_slice() {
        let dphi = translation_phase(motion, rest)?;
        let v = velocity_from_phase(dphi, cfg.physics.probe_wavenumber, exp.storage_time())?;
        eprintln!(
            "translation phase {dphi:.9} rad -> velocity {:.6e} m/s, displacement {:.6e} m (wrapped, |dphi| < pi)",
            v.velocity, v.displacement
        );
    }
    Ok(())
}

fn alpha_fit(sweeps: &[storedlight_core::SweepResult]) -> Result<Option<LineFit>, CliError> {
    let taus: Vec<f64> = sweeps.iter().map(|s| s.storage_time).collect();
    let alphas: Vec<f64> = sweeps.iter().map(|s| s.alpha).collect();
    let ses: Vec<f64> = sweeps.iter().map(|s| s.alpha_stderr).collect();
    match fit_alpha_vs_tau(&taus, &alphas, &ses) {
        Ok(f) => Ok(Some(f)),
        Err(Error::RankDeficient(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn sweep_seed_lines(cfg: &ExperimentConfig) -> Vec<String> {
    let mut lines = vec![SWEEP_SEEDS.to_string()];
    if cfg.sweep.rest_cadence == storedlight_core::velocimetry::RestCadence::SharedPerRun {
        lines.push(SHARED_REST_SEEDS.to_string());
    }
    lines.push(STREAM_SEEDS.to_string());
    lines
}

pub fn sweep(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let exp = cfg.experiment()?;
    let k = cfg.physics.probe_wavenumber;
    let sweeps = run_all_sweeps(&exp, &cfg.analysis, &cfg.sweep, cfg.master_seed)?;
    let fit = alpha_fit(&sweeps)?;
    let (slope, slope_se, intercept) = fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.slope, f.slope_stderr, f.intercept));

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("fig3a.csv", &table_bytes(&fig3a(&sweeps, k)))?;
    out.write("fig3b.csv", &table_bytes(&fig3b(&sweeps, slope, slope_se, intercept)))?;

    let mut s = String::new();
    writeln!(s, "velocity sweeps: {} storage times, {} velocities, {} x {} sequences per point", sweeps.len(), cfg.sweep.velocities.len(), cfg.sweep.scope_averages, cfg.sweep.runs).unwrap();
    for r in &sweeps {
        writeln!(
            s,
            "  tau_s = {:>5.2} us  alpha = {:8.4} +/- {:.4} rad/(m/s)  (k_P tau_s = {:8.4})  sigma_phi = {:.3} mrad",
            r.storage_time * 1e6,
            r.alpha,
            r.alpha_stderr,
            k * r.storage_time,
            r.sigma_phi * 1e3
        )
        .unwrap();
    }
    match fit {
        Some(f) => writeln!(
            s,
            "slope of alpha vs tau_s: {:.4} +/- {:.4} mrad/nm (k_P = {:.4} mrad/nm, deviation {:+.2}%)",
            f.slope * 1e-6,
            f.slope_stderr * 1e-6,
            k * 1e-6,
            (f.slope / k - 1.0) * 100.0
        )
        .unwrap(),
        None => writeln!(s, "slope of alpha vs tau_s: not fitted (fewer than two storage times)").unwrap(),
    }
    writeln!(s, "comparison: measured slope reported for the physical setup 7.31 +/- 0.33 mrad/nm").unwrap();
    emit_summary(&mut out, "sweep_summary.txt", &s)?;
    let config_text = cfg.to_toml_string();
    out.write("config.toml", config_text.as_bytes())?;
    out.finish("sweep", &config_text, cfg.master_seed, sweep_seed_lines(&cfg))?;
    Ok(())
}

fn describe(s: &mut String, r: &SensitivityReport) {
    writeln!(
        s,
        "  tau_s = {:>5.2} us  sigma_phi = {:.3} mrad  T = {:.4} ms  ideal: dV = {:.2} um/s, S = {:.3} um/s/sqrt(Hz)",
        r.storage_time * 1e6,
        r.sigma_phi * 1e3,
        r.integration_time * 1e3,
        r.ideal.delta_v * 1e6,
        r.ideal.sensitivity * 1e6
    )
    .unwrap();
    if let Some(m) = r.measured {
        writeln!(
            s,
            "  {:>17}measured alpha = {:.3} rad/(m/s): dV = {:.2} um/s, S = {:.3} um/s/sqrt(Hz)",
            "",
            m.alpha,
            m.delta_v * 1e6,
            m.sensitivity * 1e6
        )
        .unwrap();
    }
}

fn reports(
    cfg: &ExperimentConfig,
    sigma_phi: Option<f64>,
) -> Result<(Vec<SensitivityReport>, Vec<storedlight_core::SweepResult>), CliError> {
    let k = cfg.physics.probe_wavenumber;
    let beta = cfg.sweep.beta();
    let eps = cfg.sweep.sequence_overhead;
    if let Some(sigma) = sigma_phi {
        let reports = cfg
            .sweep
            .storage_times
            .iter()
            .map(|&tau| sensitivity(sigma, k, tau, beta, eps))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok((reports, Vec::new()));
    }
    let exp = cfg.experiment()?;
    let sweeps = run_all_sweeps(&exp, &cfg.analysis, &cfg.sweep, cfg.master_seed)?;
    let estimates: Vec<AlphaEstimate> = sweeps
        .iter()
        .map(|s| AlphaEstimate {
            storage_time: s.storage_time,
            alpha: s.alpha,
            stderr: s.alpha_stderr,
        })
        .collect();
    let reports = sweeps
        .iter()
        .map(|s| {
            let r = sensitivity(s.sigma_phi, k, s.storage_time, beta, eps)?.with_alpha_estimates(estimates.clone());
            if s.alpha > 0.0 {
                r.with_measured_alpha(s.alpha)
            } else {
                Ok(r)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((reports, sweeps))
}

pub fn sensitivity_cmd(
    common: &Common,
    sigma_phi: Option<f64>,
    calibrate: Option<(f64, u64)>,
) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut seeds = Vec::new();
    let mut s = String::new();

    if let Some((target, count)) = calibrate {
        if count == 0 {
            return Err(CliError::Usage("--calibration-seeds must be >= 1".into()));
        }
        let cal_seeds: Vec<u64> = (0..count).map(|i| derive_seed(cfg.master_seed, &[CALIBRATION_LABEL, i])).collect();
        let exp = cfg.experiment()?;
        let cal: Calibration = calibrate_vibration(
            &exp,
            &cfg.analysis,
            &cfg.sweep,
            cfg.timing.storage_time,
            target,
            (0.0, 1.5),
            12,
            &cal_seeds,
        )?;
        cfg.noise.vibration_rms_phase = cal.vibration_rms_phase;
        cfg.validate()?;
        let mut text = serde_json::to_string_pretty(&cal).expect("calibration serializes");
        text.push('\n');
        out.write("calibration.json", text.as_bytes())?;
        writeln!(
            s,
            "calibrated vibration RMS {:.6} rad: mean sigma_phi {:.3} mrad at tau_s = {} us (target {:.3} mrad, {} seeds)",
            cal.vibration_rms_phase,
            cal.sigma_phi * 1e3,
            cfg.timing.storage_time * 1e6,
            target * 1e3,
            count
        )
        .unwrap();
        seeds.push(format!(
            "calibration sweep seeds = derive_seed(master_seed, [{CALIBRATION_LABEL:#x}, i]) for i in 0..{count}"
        ));
    }

    let (reports, sweeps) = reports(&cfg, sigma_phi)?;
    out.write("fig3c.csv", &table_bytes(&fig3c(&reports)))?;

    writeln!(
        s,
        "sensitivity, beta = {} sequences, epsilon = {} us{}",
        cfg.sweep.beta(),
        cfg.sweep.sequence_overhead * 1e6,
        if sigma_phi.is_some() { ", fixed sigma_phi" } else { "" }
    )
    .unwrap();
    for r in &reports {
        describe(&mut s, r);
    }
    let at = cfg.timing.storage_time;
    let sigma_at = reports.iter().find(|r| r.storage_time == at).map(|r| r.sigma_phi);
    if let Some(sigma) = sigma_at {
        let r = sensitivity(sigma, cfg.physics.probe_wavenumber, at, cfg.sweep.beta(), cfg.sweep.sequence_overhead)?
            .with_measured_alpha(cfg.sweep.reference_alpha)?;
        let m = r.measured.expect("measured variant set");
        writeln!(
            s,
            "reference alpha {} rad/(m/s) at tau_s = {} us: dV = {:.2} um/s, S = {:.3} um/s/sqrt(Hz)",
            cfg.sweep.reference_alpha,
            at * 1e6,
            m.delta_v * 1e6,
            m.sensitivity * 1e6
        )
        .unwrap();
    }
    emit_summary(&mut out, "sensitivity_summary.txt", &s)?;
    let config_text = cfg.to_toml_string();
    out.write("config.toml", config_text.as_bytes())?;
    if !sweeps.is_empty() {
        seeds.extend(sweep_seed_lines(&cfg));
    }
    out.finish("sensitivity", &config_text, cfg.master_seed, seeds)?;
    Ok(())
}

pub fn averaging(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let exp = cfg.experiment()?;
    let points = averaging_study(
        &exp,
        &cfg.analysis,
        cfg.timing.storage_time,
        &cfg.sweep.averaging_counts,
        cfg.sweep.averaging_shots,
        cfg.master_seed,
    )?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("supp_fig2.csv", &table_bytes(&supp_fig2(&points)))?;

    let mut s = String::new();
    writeln!(
        s,
        "rest-record phase spread at tau_s = {} us, {} records per averaging count",
        cfg.timing.storage_time * 1e6,
        cfg.sweep.averaging_shots
    )
    .unwrap();
    for p in &points {
        writeln!(s, "  {:>5} averages: sigma_phi = {:8.3} +/- {:.3} mrad", p.averages, p.sigma_phi * 1e3, p.stderr * 1e3).unwrap();
    }
    if let Some(best) = points.iter().min_by(|a, b| a.sigma_phi.total_cmp(&b.sigma_phi)) {
        writeln!(s, "minimum at {} averages", best.averages).unwrap();
    }
    emit_summary(&mut out, "averaging_summary.txt", &s)?;
    let config_text = cfg.to_toml_string();
    out.write("config.toml", config_text.as_bytes())?;
    out.finish(
        "averaging",
        &config_text,
        cfg.master_seed,
        vec![
            "record seed = derive_seed(master_seed, [0x61766572, averages, record index])".to_string(),
            STREAM_SEEDS.to_string(),
        ],
    )?;
    Ok(())
}

fn selftest_checks() -> Result<Vec<(&'static str, bool, String)>, Error> {
    let mut checks = Vec::new();
    let cfg = ExperimentConfig::default();

    let text = cfg.to_toml_string();
    let back = ExperimentConfig::from_toml_str(&text)?;
    checks.push(("config round trip", back == cfg, format!("{} bytes of TOML", text.len())));

    let e0 = storage_efficiency(0.0, &cfg.memory)?;
    let e85 = storage_efficiency(8.5e-6, &cfg.memory)?;
    let life = lifetime_upper_bound(cfg.physics.ground_decoherence_rate)?;
    checks.push((
        "memory anchors",
        e0 == cfg.memory.eta0 && (0.025..=0.045).contains(&e85) && life > 0.0,
        format!("eta(0) = {e0}, eta(8.5 us) = {e85:.6}, lifetime bound {life:e} s"),
    ));

    let quiet = cfg.experiment()?.with_noise(NoiseConfig::noiseless())?;
    let windows = shot_windows(&quiet, &cfg.analysis)?;
    let rest = run_shot(&quiet, &StageMotion::at_rest(), 0)?;
    let mut ref_csv = Vec::new();
    let mut probe_csv = Vec::new();
    write_csv(&rest.reference, &mut ref_csv)?;
    write_csv(&rest.probe, &mut probe_csv)?;
    let m = measure_shot(&read_csv(&ref_csv[..])?, &read_csv(&probe_csv[..])?, &windows, Regime::Rest, 0.0)?;
    checks.push((
        "noiseless rest pipeline via CSV",
        m.delta_phi_p.abs() < 1e-9,
        format!("delta_phi_p = {:.3e} rad", m.delta_phi_p),
    ));

    let mut bin = Vec::new();
    write_binary(&rest.probe, &mut bin)?;
    let decoded = decode_binary(&bin)?;
    let mut again = Vec::new();
    write_binary(&decoded.clone().into_trace(cfg.trace.time_origin, cfg.trace.beat_frequency)?, &mut again)?;
    checks.push(("binary round trip", bin == again, format!("{} bytes", bin.len())));

    let v = 0.01;
    let moving = run_shot(&quiet, &StageMotion::new(v)?, 0)?;
    let mm = measure_shot(&moving.reference, &moving.probe, &windows, Regime::Motion, 0.0)?;
    let dphi = translation_phase(&mm, &m)?;
    let expect = storedlight_core::wrap_phase(-cfg.physics.probe_wavenumber * v * quiet.storage_time());
    checks.push((
        "translation phase at 10 mm/s",
        (dphi - expect).abs() < 1e-9,
        format!("{dphi:.12} rad vs {expect:.12}"),
    ));
    Ok(checks)
}

pub fn selftest() -> Result<(), CliError> {
    let checks = selftest_checks()?;
    let mut failed = 0;
    for (name, ok, detail) in &checks {
        println!("[{}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} self-test checks failed")));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
