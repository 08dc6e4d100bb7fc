//! Subcommand execution: resolve parameters, run the library pipelines,
//! write data files and the manifest.

use crate::args::*;
use crate::output::{resolve_out_dir, write_json, write_manifest, CsvTable};
use crate::spec::{parse_grid, parse_noise, parse_profile};
use crate::{CliError, CliResult};
use kryloscope::chain::{evolve_chain, EvolveConfig, Truncation};
use kryloscope::counting::{counting_function, free_energy_estimate, rate_function};
use kryloscope::fluctuations::{
    covariance_evolution, monte_carlo_covariance, susceptibility_sweep, McConfig, NoiseKernel,
    SweepConfig,
};
use kryloscope::models::ClosedFormModel;
use kryloscope::overlap::{overlap, overlap_moment};

use kryloscope::semiclassics::{classify_growth, h_eff, integrate_hamilton, HamiltonConfig};
use serde::Serialize;
use std::path::Path;

/// Outcome of a run: files were written; these flags were raised.
pub struct RunOutcome {
    pub flags: Vec<String>,
}

pub fn run(cli: &Cli) -> CliResult<RunOutcome> {
    let out_dir = resolve_out_dir(cli.out_dir.as_deref());
    let config_file: ConfigFile = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Evolve(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.evolve {
                args.merge_config(section);
            }
            run_evolve(&args, &out_dir)
        }
        Command::Fcs(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.fcs {
                args.merge_config(section);
            }
            run_fcs(&args, &out_dir)
        }
        Command::Semiclassics(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.semiclassics {
                args.merge_config(section);
            }
            run_semiclassics(&args, &out_dir)
        }
        Command::Classify(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.classify {
                args.merge_config(section);
            }
            run_classify(&args, &out_dir)
        }
        Command::Fluct(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.fluct {
                args.merge_config(section);
            }
            run_fluct(&args, &out_dir)
        }
        Command::Sweep(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.sweep {
                args.merge_config(section);
            }
            run_sweep(&args, &out_dir)
        }
        Command::Overlap(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.overlap {
                args.merge_config(section);
            }
            run_overlap(&args, &out_dir)
        }
        Command::Validate(args) => {
            let mut args = args.clone();
            if let Some(section) = &config_file.validate {
                args.merge_config(section);
            }
            run_validate(&args, &out_dir)
        }
    }
}

fn require<T: Clone>(value: &Option<T>, name: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("missing required parameter `{name}`")))
}

fn time_grid(tmax: f64, steps: usize) -> CliResult<Vec<f64>> {
    // The inverted comparison also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(tmax > 0.0) || steps == 0 {
        return Err(CliError::Config(format!(
            "need tmax > 0 and steps >= 1, got tmax={tmax}, steps={steps}"
        )));
    }
    Ok((0..=steps).map(|i| tmax * i as f64 / steps as f64).collect())
}

fn chi_grid(points: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (1..=points).map(|i| -PI + 2.0 * PI * i as f64 / points as f64).collect()
}

fn run_evolve(args: &EvolveArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        tmax: f64,
        steps: usize,
        leak_tol: f64,
        truncation: String,
        step_tol: f64,
        distributions: bool,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        tmax: require(&args.tmax, "tmax")?,
        steps: args.steps.unwrap_or(100),
        leak_tol: args.tol.unwrap_or(1e-9),
        truncation: args.truncation.clone().unwrap_or_else(|| "auto".into()),
        step_tol: args.step_tol.unwrap_or(1e-12),
        distributions: args.distributions.unwrap_or(false),
    };
    let truncation = match resolved.truncation.as_str() {
        "auto" => Truncation::Auto,
        other => Truncation::Fixed(other.parse().map_err(|e| {
            CliError::Config(format!("truncation must be `auto` or a site count: {e}"))
        })?),
    };
    let times = time_grid(resolved.tmax, resolved.steps)?;
    let config = EvolveConfig {
        truncation,
        leak_tol: resolved.leak_tol,
        norm_tol: 1e-9,
        step_tol: resolved.step_tol,
    };
    let traj = evolve_chain(&profile, &times, &config)?;

    let mut table = CsvTable::new(
        ["t", "K", "variance", "norm_drift", "boundary_leakage"]
            .map(String::from)
            .to_vec(),
    );
    for (ti, &t) in times.iter().enumerate() {
        table.push(vec![
            t,
            traj.complexity_at(ti),
            traj.variance(ti),
            traj.norm_drift()[ti],
            traj.boundary_leakage()[ti],
        ]);
    }
    table.write(&out_dir.join("evolve.csv"))?;
    let mut outputs = vec!["evolve.csv".to_string()];

    if resolved.distributions {
        let n = traj.truncation_n();
        let mut columns = vec!["t".to_string()];
        columns.extend((0..n).map(|i| format!("p{i}")));
        let mut dist = CsvTable::new(columns);
        for (ti, &t) in times.iter().enumerate() {
            let mut row = Vec::with_capacity(n + 1);
            row.push(t);
            row.extend(traj.distribution(ti));
            dist.push(row);
        }
        dist.write(&out_dir.join("distributions.csv"))?;
        outputs.push("distributions.csv".to_string());
    }

    let mut flags = Vec::new();
    if traj.flags().leakage_exceeded {
        flags.push("leakage_exceeded".to_string());
    }
    if traj.flags().norm_drift_exceeded {
        flags.push("norm_drift_exceeded".to_string());
    }
    write_manifest(out_dir, "evolve", resolved, flags.clone(), outputs)?;
    Ok(RunOutcome { flags })
}

fn run_fcs(args: &FcsArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        tmax: f64,
        steps: usize,
        chi_points: usize,
        cumulants: usize,
        s_max: f64,
        s_points: usize,
        leak_tol: f64,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        tmax: require(&args.tmax, "tmax")?,
        steps: args.steps.unwrap_or(60),
        chi_points: args.chi_points.unwrap_or(64),
        cumulants: args.cumulants.unwrap_or(4),
        s_max: args.s_max.unwrap_or(2.0),
        s_points: args.s_points.unwrap_or(81),
        leak_tol: args.tol.unwrap_or(1e-9),
    };
    if resolved.cumulants == 0 || resolved.cumulants > kryloscope::counting::MAX_CUMULANT {
        return Err(CliError::Config(format!(
            "cumulants must be in 1..={}, got {}",
            kryloscope::counting::MAX_CUMULANT,
            resolved.cumulants
        )));
    }
    let times = time_grid(resolved.tmax, resolved.steps)?;
    let config = EvolveConfig { leak_tol: resolved.leak_tol, ..EvolveConfig::default() };
    let traj = evolve_chain(&profile, &times, &config)?;
    let chis = chi_grid(resolved.chi_points);
    let mut report = counting_function(&traj, &chis)?;

    // Rate function at the final time by real tilting.
    let s_grid: Vec<f64> = (0..resolved.s_points)
        .map(|i| -resolved.s_max + 2.0 * resolved.s_max * i as f64 / (resolved.s_points - 1) as f64)
        .collect();
    let tilted = rate_function(&traj, times.len() - 1, &s_grid, None)?;
    report.tilted_rate = Some(tilted);

    let mut columns = vec!["t".to_string()];
    for i in 0..chis.len() {
        columns.push(format!("re_z{i}"));
        columns.push(format!("im_z{i}"));
    }
    for m in 1..=resolved.cumulants {
        columns.push(format!("kappa_{m}"));
    }
    let mut table = CsvTable::new(columns);
    for (ti, &t) in times.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + 2 * chis.len() + resolved.cumulants);
        row.push(t);
        for z in report.z_row(ti) {
            row.push(z.re);
            row.push(z.im);
        }
        row.extend(report.cumulants(ti, resolved.cumulants)?);
        table.push(row);
    }
    table.write(&out_dir.join("fcs.csv"))?;

    // Free-energy trend at the smallest positive chi.
    let ci_small = chis
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let trend = free_energy_estimate(&report, ci_small)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        chi_grid: &'a [f64],
        free_energy: &'a kryloscope::counting::FreeEnergyTrend,
        rate_function: &'a kryloscope::counting::RateFunctionSamples,
    }
    write_json(
        &out_dir.join("fcs_summary.json"),
        &Summary {
            chi_grid: &chis,
            free_energy: &trend,
            rate_function: report.tilted_rate.as_ref().unwrap(),
        },
    )?;

    let mut flags = Vec::new();
    if !traj.is_valid() {
        flags.push("trajectory_flagged".to_string());
    }
    write_manifest(
        out_dir,
        "fcs",
        resolved,
        flags.clone(),
        vec!["fcs.csv".into(), "fcs_summary.json".into()],
    )?;
    Ok(RunOutcome { flags })
}

fn run_semiclassics(args: &SemiclassicsArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        n0: f64,
        p0: f64,
        tmax: f64,
        steps: usize,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        n0: require(&args.n0, "n0")?,
        p0: require(&args.p0, "p0")?,
        tmax: require(&args.tmax, "tmax")?,
        steps: args.steps.unwrap_or(200),
    };
    let times = time_grid(resolved.tmax, resolved.steps)?;
    let traj = integrate_hamilton(
        &profile,
        resolved.n0,
        resolved.p0,
        &times,
        &HamiltonConfig::default(),
    )?;
    let mut table = CsvTable::new(["t", "n", "p", "H"].map(String::from).to_vec());
    for (i, &t) in traj.times().iter().enumerate() {
        table.push(vec![t, traj.n_path()[i], traj.p_path()[i], traj.conserved_h()[i]]);
    }
    table.write(&out_dir.join("semiclassics.csv"))?;

    #[derive(Serialize)]
    struct Summary {
        lyapunov_fit: Option<(f64, f64)>,
        energy_drift: f64,
        truncated: bool,
        h_eff_initial: f64,
    }
    let (h0, _) = h_eff(&profile, resolved.n0, resolved.p0);
    write_json(
        &out_dir.join("semiclassics_summary.json"),
        &Summary {
            lyapunov_fit: traj.lyapunov_fit(),
            energy_drift: traj.energy_drift(),
            truncated: traj.truncated(),
            h_eff_initial: h0,
        },
    )?;
    let mut flags = Vec::new();
    if traj.truncated() {
        flags.push("trajectory_truncated".to_string());
    }
    write_manifest(
        out_dir,
        "semiclassics",
        resolved,
        flags.clone(),
        vec!["semiclassics.csv".into(), "semiclassics_summary.json".into()],
    )?;
    Ok(RunOutcome { flags })
}

fn run_classify(args: &ClassifyArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        nmin: f64,
        nmax: f64,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        nmin: args.nmin.unwrap_or(10.0),
        nmax: args.nmax.unwrap_or(1e4),
    };
    let class = classify_growth(&profile, resolved.nmin, resolved.nmax)?;
    write_json(&out_dir.join("classification.json"), &class)?;
    println!("{}", serde_json::to_string_pretty(&class).unwrap());
    write_manifest(
        out_dir,
        "classify",
        resolved,
        vec![],
        vec!["classification.json".into()],
    )?;
    Ok(RunOutcome { flags: vec![] })
}

fn run_fluct(args: &FluctArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        n0: f64,
        p0: f64,
        tmax: f64,
        steps: usize,
        noise: String,
        mc_samples: usize,
        seed: Option<u64>,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        n0: args.n0.unwrap_or(1.0),
        p0: args.p0.unwrap_or(-std::f64::consts::FRAC_PI_2),
        tmax: require(&args.tmax, "tmax")?,
        steps: args.steps.unwrap_or(100),
        noise: args.noise.clone().unwrap_or_else(|| "identity".into()),
        mc_samples: args.mc_samples.unwrap_or(0),
        seed: args.seed,
    };
    let noise: NoiseKernel = parse_noise(&resolved.noise)?;
    if resolved.mc_samples > 0 && resolved.seed.is_none() {
        return Err(CliError::Config(
            "stochastic run: `seed` is required when mc_samples > 0".into(),
        ));
    }
    let times = time_grid(resolved.tmax, resolved.steps)?;
    let saddle = integrate_hamilton(
        &profile,
        resolved.n0,
        resolved.p0,
        &times,
        &HamiltonConfig::default(),
    )?;
    let mut report = covariance_evolution(&profile, &saddle, &noise)?;
    if resolved.mc_samples > 0 {
        let mc = monte_carlo_covariance(
            &profile,
            &saddle,
            &noise,
            &McConfig::new(resolved.mc_samples, resolved.seed.unwrap()),
        )?;
        report.mc_check = Some(mc);
    }

    let mut table = CsvTable::new(
        ["t", "n", "p", "a_nn", "a_np", "a_pn", "a_pp", "cov_nn", "cov_np", "cov_pp"]
            .map(String::from)
            .to_vec(),
    );
    for (i, &t) in report.times.iter().enumerate() {
        let a = report.stability[i];
        let c = report.covariance[i];
        table.push(vec![
            t,
            report.saddle_n[i],
            report.saddle_p[i],
            a[0][0],
            a[0][1],
            a[1][0],
            a[1][1],
            c[0],
            c[1],
            c[2],
        ]);
    }
    table.write(&out_dir.join("fluct.csv"))?;
    write_json(&out_dir.join("fluct_summary.json"), &report)?;

    let mut flags = Vec::new();
    if report.overflow_truncated {
        flags.push("covariance_overflow_truncated".to_string());
    }
    if saddle.truncated() {
        flags.push("saddle_truncated".to_string());
    }
    write_manifest(
        out_dir,
        "fluct",
        resolved,
        flags.clone(),
        vec!["fluct.csv".into(), "fluct_summary.json".into()],
    )?;
    Ok(RunOutcome { flags })
}

fn run_sweep(args: &SweepArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        h_grid: Vec<f64>,
        c: f64,
        alpha: f64,
        gamma: f64,
        n0: f64,
        quantum_tmax: f64,
        noise: String,
    }
    let resolved = Resolved {
        h_grid: parse_grid(&args.h_grid.clone().unwrap_or_else(|| "1,0.1,0.01,0.001".into()))?,
        c: args.c.unwrap_or(10.0),
        alpha: args.alpha.unwrap_or(1.0),
        gamma: args.gamma.unwrap_or(0.0),
        n0: args.n0.unwrap_or(1.0),
        quantum_tmax: args.quantum_tmax.unwrap_or(4.0),
        noise: args.noise.clone().unwrap_or_else(|| "identity".into()),
    };
    let config = SweepConfig {
        h_grid: resolved.h_grid.clone(),
        c: resolved.c,
        alpha: resolved.alpha,
        gamma: resolved.gamma,
        n0: resolved.n0,
        p0: -std::f64::consts::FRAC_PI_2,
        noise: parse_noise(&resolved.noise)?,
        quantum_t_max: resolved.quantum_tmax,
        quantum_leak_tol: 1e-9,
        post_escape_window: 4.0,
    };
    let report = susceptibility_sweep(&config)?;

    let mut table = CsvTable::new(
        [
            "h",
            "n_star",
            "t_star",
            "t_escape_empirical",
            "chi_hat",
            "kappa2_ratio_fixed_tref",
            "mean_rate",
            "quantum_k_final",
        ]
        .map(String::from)
        .to_vec(),
    );
    for p in &report.points {
        table.push(vec![
            p.h,
            p.n_star,
            p.t_star,
            p.t_escape_empirical.unwrap_or(f64::NAN),
            p.chi_hat,
            p.kappa2_ratio_fixed_tref,
            p.mean_rate,
            p.quantum_k_final,
        ]);
    }
    table.write(&out_dir.join("sweep.csv"))?;
    write_json(&out_dir.join("sweep_summary.json"), &report)?;

    let mut flags = Vec::new();
    for p in &report.points {
        if p.quantum_flagged {
            flags.push(format!("quantum_flagged_h_{}", p.h));
        }
    }
    write_manifest(
        out_dir,
        "sweep",
        resolved,
        flags.clone(),
        vec!["sweep.csv".into(), "sweep_summary.json".into()],
    )?;
    Ok(RunOutcome { flags })
}

fn run_overlap(args: &OverlapArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        profile: String,
        w: f64,
        moments: u32,
        tol: f64,
    }
    let profile_spec = require(&args.profile, "profile")?;
    let profile = parse_profile(&profile_spec)?;
    let resolved = Resolved {
        profile: profile_spec,
        w: require(&args.w, "w")?,
        moments: args.moments.unwrap_or(2),
        tol: args.tol.unwrap_or(1e-13),
    };
    let series = overlap(&profile, resolved.w, resolved.tol)?;
    let moments: Vec<f64> = (1..=resolved.moments)
        .map(|m| overlap_moment(&profile, resolved.w, m, resolved.tol))
        .collect::<Result<_, _>>()?;

    #[derive(Serialize)]
    struct Summary<'a> {
        w: f64,
        value: f64,
        ln_value: f64,
        truncation_n: usize,
        tail_estimate: f64,
        moments: &'a [f64],
    }
    let summary = Summary {
        w: series.w,
        value: series.value,
        ln_value: series.ln_value,
        truncation_n: series.truncation_n,
        tail_estimate: series.tail_estimate,
        moments: &moments,
    };
    write_json(&out_dir.join("overlap.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    write_manifest(out_dir, "overlap", resolved, vec![], vec!["overlap.json".into()])?;
    Ok(RunOutcome { flags: vec![] })
}

#[derive(Serialize)]
struct ValidationRow {
    model: String,
    quantity: String,
    max_error: f64,
    threshold: f64,
    pass: bool,
}

fn run_validate(args: &ValidateArgs, out_dir: &Path) -> CliResult<RunOutcome> {
    #[derive(Serialize)]
    struct Resolved {
        format: String,
        tmax: f64,
    }
    let resolved = Resolved {
        format: args.format.clone().unwrap_or_else(|| "text".into()),
        tmax: args.tmax.unwrap_or(2.0),
    };
    let times = time_grid(resolved.tmax, 20)?;
    let chis = chi_grid(32);
    let mut rows: Vec<ValidationRow> = Vec::new();

    // Square-root hopping vs the Poisson closed form.
    {
        let profile = parse_profile("sqrt:g=1")?;
        let model = ClosedFormModel::poisson(1.0)?;
        let traj = evolve_chain(&profile, &times, &EvolveConfig::default())?;
        let mut k_err = 0.0_f64;
        let mut p_err = 0.0_f64;
        for (ti, &t) in times.iter().enumerate() {
            let want = model.exact_k(t);
            let got = traj.complexity_at(ti);
            let rel = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
            k_err = k_err.max(rel);
            for (n, &pn) in traj.distribution(ti).iter().enumerate() {
                p_err = p_err.max((pn - model.exact_p(n, t)).abs());
            }
        }
        rows.push(ValidationRow {
            model: "sqrt_hopping(g=1)".into(),
            quantity: "K(t) relative error".into(),
            max_error: k_err,
            threshold: 1e-6,
            pass: k_err < 1e-6,
        });
        rows.push(ValidationRow {
            model: "sqrt_hopping(g=1)".into(),
            quantity: "P(n,t) entry error".into(),
            max_error: p_err,
            threshold: 1e-8,
            pass: p_err < 1e-8,
        });
    }

    // su(1,1) vs its closed forms.
    {
        let profile = parse_profile("su11:alpha=1,k=0.5")?;
        let model = ClosedFormModel::su11(1.0, 0.5)?;
        let traj = evolve_chain(&profile, &times, &EvolveConfig::default())?;
        let report = counting_function(&traj, &chis)?;
        let mut k_err = 0.0_f64;
        let mut z_err = 0.0_f64;
        for (ti, &t) in times.iter().enumerate() {
            let want = model.exact_k(t);
            let got = traj.complexity_at(ti);
            let rel = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
            k_err = k_err.max(rel);
            for (ci, &chi) in chis.iter().enumerate() {
                z_err = z_err.max((report.z(ti, ci) - model.exact_z(chi, t)).norm());
            }
        }
        rows.push(ValidationRow {
            model: "su11(alpha=1,k=1/2)".into(),
            quantity: "K(t) relative error".into(),
            max_error: k_err,
            threshold: 1e-5,
            pass: k_err < 1e-5,
        });
        rows.push(ValidationRow {
            model: "su11(alpha=1,k=1/2)".into(),
            quantity: "Z(chi,t) abs error".into(),
            max_error: z_err,
            threshold: 1e-6,
            pass: z_err < 1e-6,
        });
    }

    match resolved.format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&rows).unwrap()),
        _ => {
            println!(
                "{:<22} {:<26} {:>12} {:>10} {:>6}",
                "model", "quantity", "max error", "threshold", "pass"
            );
            for r in &rows {
                println!(
                    "{:<22} {:<26} {:>12.3e} {:>10.0e} {:>6}",
                    r.model,
                    r.quantity,
                    r.max_error,
                    r.threshold,
                    if r.pass { "yes" } else { "NO" }
                );
            }
        }
    }
    write_json(&out_dir.join("validate.json"), &rows)?;
    let flags: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("validation_failed: {} {}", r.model, r.quantity))
        .collect();
    write_manifest(out_dir, "validate", resolved, flags.clone(), vec!["validate.json".into()])?;
    Ok(RunOutcome { flags })
}
