//! Experiment drivers. Each one writes its artifacts into the output directory
//! and returns a JSON summary that ends up in `manifest.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use zeroflow_core::burgers::{
    check_mass_invariance, cole_hopf_crosscheck, converge_to_vy, solve_orbit, solve_v_family, FixedPointOptions,
};
use zeroflow_core::dynamics::{Nonlinearity, Propagator};
use zeroflow_core::ensemble::{
    bernoulli_ensemble, evolve_ensemble, gradient_energy, sign_fractions, BernoulliOptions, EvolveOptions,
};
use zeroflow_core::field::{self, make_grid, mass, Field};
use zeroflow_core::nodal::{balance_ledger, match_curves, LedgerWindow};
use zeroflow_core::suite::{self, allen_cahn_letter, SuiteOptions};
use zeroflow_core::trajectory::Trajectory;

use crate::config::{profile, Config, Experiment};
use crate::CliError;

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn note(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }
}

/// Outcome of a run: the summary always exists, the error decides the exit status.
pub struct RunReport {
    pub summary: Value,
    pub error: Option<CliError>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, CliError::exit_code)
    }
}

/// Runs a resolved config and writes `manifest.json` next to the artifacts.
pub fn run(config: &Config) -> Result<RunReport, CliError> {
    let experiment = config
        .experiment
        .ok_or_else(|| CliError::Config("no experiment selected".into()))?;
    fs::create_dir_all(&config.output)?;
    let mut art = Artifacts {
        dir: config.output.clone(),
        written: Vec::new(),
    };
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut summary = json!({});
    let result = match experiment {
        Experiment::Simulate => simulate(config, &mut art, &mut summary),
        Experiment::Balance => balance(config, &mut art, &mut summary),
        Experiment::Vfamily => vfamily(config, &mut art, &mut summary),
        Experiment::Colehopf => colehopf(config, &mut art, &mut summary),
        Experiment::Ensemble => ensemble(config, &mut art, &mut summary),
        Experiment::Allencahn => allencahn(config, &mut art, &mut summary),
        Experiment::Check => check(config, &mut art, &mut summary),
    };
    let error = result.err();
    let manifest = json!({
        "experiment": experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "elapsed_secs": clock.elapsed().as_secs_f64(),
        "status": match &error {
            None => "ok".to_string(),
            Some(e) => e.to_string(),
        },
        "exit_code": error.as_ref().map_or(0, CliError::exit_code),
        "config": config,
        "artifacts": art.written,
        "summary": summary,
    });
    let mut w = BufWriter::new(File::create(config.output.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(RunReport { summary, error })
}

fn setup(config: &Config) -> Result<(Nonlinearity, Propagator), CliError> {
    let nl = config.nonlinearity()?.build()?;
    let prop = Propagator::new(config.grid.spec()?, &nl, config.stepper.config()?)?;
    Ok((nl, prop))
}

fn fixed_point(config: &Config) -> FixedPointOptions {
    FixedPointOptions::new(config.tolerances.fixed_point, config.tolerances.max_iter)
}

fn simulate(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let sim = config.simulate.as_ref().expect("resolved");
    let (nl, prop) = setup(config)?;
    let u0 = profile("simulate.initial", &sim.initial, prop.grid())?;
    let tr = prop.evolve(&u0, sim.t0, sim.t1, &config.stepper.probes, config.stepper.snapshot_stride)?;
    tr.write_snapshots_csv(art.create("snapshots.csv")?)?;
    if !tr.probes.is_empty() {
        tr.write_probes_csv(art.create("probes.csv")?)?;
    }
    field::write_csv(tr.final_state(), art.create("final.csv")?)?;
    let fin = tr.final_state();
    *summary = json!({
        "steps": tr.steps(),
        "snapshots": tr.snapshots.len(),
        "mass_initial": mass(&u0),
        "mass_final": mass(fin),
        "min_final": fin.min(),
        "max_final": fin.max(),
    });
    if nl.is_burgers() {
        summary["mass_drift"] = json!(check_mass_invariance(&tr, &nl)?);
    }
    Ok(())
}

fn balance(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let b = config.balance.as_ref().expect("resolved");
    let (_, prop) = setup(config)?;
    let g = prop.grid();
    let u0 = profile("balance.u0", &b.u0, g)?;
    let v0 = profile("balance.v0", &b.v0, g)?;
    let mut probes = vec![b.x_left, b.x_right];
    probes.extend(config.stepper.probes.iter().copied());
    let stride = config.stepper.snapshot_stride;
    let u = prop.evolve(&u0, b.s, b.t, &probes, stride)?;
    let v = prop.evolve(&v0, b.s, b.t, &probes, stride)?;
    let window = LedgerWindow {
        x_left: b.x_left,
        x_right: b.x_right,
        s: b.s,
        t: b.t,
    };
    let w = Trajectory::difference(&u, &v)?;
    let curves = match_curves(&w, (b.x_left, b.x_right))?;
    curves.write_csv(art.create("curves.csv")?)?;
    let ledger = balance_ledger(&u, &v, window)?;
    ledger.write_jsonl(art.create("ledger.jsonl")?)?;
    *summary = serde_json::to_value(&ledger)?;
    Ok(())
}

fn vfamily(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let vf = config.vfamily.as_ref().expect("resolved");
    let (nl, prop) = setup(config)?;
    let opts = fixed_point(config);
    let family = solve_v_family(&nl, prop.grid(), &vf.ys, opts, &prop)?;
    family.write_archive(&art.note("family"))?;
    *summary = json!({
        "orbits": family.orbits,
        "min_gaps": family.min_gaps,
    });
    if let Some(src) = &vf.converge_from {
        let u0 = profile("vfamily.converge_from", src, prop.grid())?;
        let orbit = solve_orbit(&prop, &Field::constant(prop.grid(), mass(&u0)), opts)?;
        let series = converge_to_vy(&u0, &prop, &orbit, vf.max_iterates, vf.threshold)?;
        let mut w = art.create("convergence.csv")?;
        writeln!(w, "k,distance")?;
        for (k, d) in series.distances.iter().enumerate() {
            writeln!(w, "{k},{d:e}")?;
        }
        w.flush()?;
        summary["convergence"] = json!({
            "y": orbit.y,
            "reached": series.reached,
            "transient": series.transient(),
        });
        if series.reached.is_none() {
            return Err(CliError::Invariant(format!(
                "no convergence to v^{} within {} iterates",
                orbit.y, vf.max_iterates
            )));
        }
    }
    Ok(())
}

fn colehopf(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let ch = config.colehopf.as_ref().expect("resolved");
    let nlc = config.nonlinearity()?;
    if nlc.kind != crate::config::NonlinearityKind::Burgers {
        return Err(CliError::Config("colehopf needs [nonlinearity] kind = \"burgers\"".into()));
    }
    let (g_hat, time) = nlc.forcing_fn()?;
    let u0 = profile("colehopf.initial", &ch.initial, config.grid.spec()?)?;
    let err = cole_hopf_crosscheck(&u0, g_hat, time, ch.t_end, config.stepper.config()?)?;
    *summary = json!({ "relative_sup_error": err, "tolerance": config.tolerances.colehopf });
    let mut w = art.create("colehopf.json")?;
    serde_json::to_writer(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    if err > config.tolerances.colehopf {
        return Err(CliError::Invariant(format!(
            "Cole-Hopf error {err:e} above {:e}",
            config.tolerances.colehopf
        )));
    }
    Ok(())
}

fn ensemble(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let ec = config.ensemble.as_ref().expect("resolved");
    let (nl, prop) = setup(config)?;
    let grid = prop.grid();
    let letters = make_grid(ec.letter_cells, grid.points_per_cell())?;
    let p0 = profile("ensemble.p0", &ec.p0, letters)?;
    let p1 = profile("ensemble.p1", &ec.p1, letters)?;
    let opts = BernoulliOptions {
        prob_one: ec.prob_one,
        jitter: ec.jitter,
        ..BernoulliOptions::default()
    };
    let e = bernoulli_ensemble(&p0, &p1, grid.cells(), ec.count, config.seed, opts)?;
    let target = match ec.target_y {
        Some(y) => {
            let one = make_grid(1, grid.points_per_cell())?;
            let p1 = Propagator::new(one, &nl, config.stepper.config()?)?;
            let orbit = solve_orbit(&p1, &Field::constant(one, y), fixed_point(config))?;
            Some(orbit.profile.tile(grid.cells())?)
        }
        None => None,
    };
    let opts = EvolveOptions {
        tol: config.tolerances.z_mu,
        target: target.as_ref(),
        stop_below: ec.stop_below,
        ..EvolveOptions::new(ec.iterates)
    };
    let (report, out) = evolve_ensemble(&e, &prop, opts)?;
    e.write_manifest_jsonl(art.create("ensemble_initial.jsonl")?)?;
    out.write_manifest_jsonl(art.create("ensemble_final.jsonl")?)?;
    report.write_csv(art.create("report.csv")?)?;
    report.write_jsonl(art.create("report.jsonl")?)?;
    *summary = json!({
        "members": e.len(),
        "z_mu_initial": report.z_mu.first(),
        "z_mu_final": report.z_mu.last(),
        "zeta_hat": report.zeta_hat,
        "weakstar_final": report.weakstar_dist.last(),
        "violations": report.violations,
    });
    if !report.is_monotone() {
        return Err(CliError::Invariant(format!("Z_mu increased at iterates {:?}", report.violations)));
    }
    Ok(())
}

fn allencahn(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let ac = config.allencahn.as_ref().expect("resolved");
    let (nl, prop) = setup(config)?;
    let grid = prop.grid();
    let p0 = allen_cahn_letter(ac.letter_cells, grid.points_per_cell())?;
    let p1 = p0.map(|v| -v);
    let e = bernoulli_ensemble(&p0, &p1, grid.cells(), ac.count, config.seed, BernoulliOptions::default())?;
    let mut w = art.create("energy.csv")?;
    writeln!(w, "member,initial_energy,final_energy,max_increase")?;
    let mut finals = Vec::with_capacity(e.len());
    let mut worst = f64::NEG_INFINITY;
    for (i, m) in e.members().iter().enumerate() {
        let tr = prop.evolve(m, 0.0, ac.horizon, &[], 1)?;
        let energies = tr
            .snapshots
            .iter()
            .map(|s| gradient_energy(&s.field, &nl))
            .collect::<Result<Vec<_>, _>>()?;
        let rise = energies.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(rise);
        writeln!(w, "{i},{:e},{:e},{rise:e}", energies[0], energies[energies.len() - 1])?;
        finals.push(tr.final_state().clone());
    }
    w.flush()?;
    let out = e.derive(finals, format!("allen_cahn(t = {})", ac.horizon));
    out.write_manifest_jsonl(art.create("ensemble_final.jsonl")?)?;
    let (plus, minus) = sign_fractions(&out, ac.sign_tol);
    *summary = json!({
        "fraction_plus": plus,
        "fraction_minus": minus,
        "max_energy_increase": worst,
    });
    let mut w = art.create("fractions.json")?;
    serde_json::to_writer(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    if worst > config.tolerances.energy {
        return Err(CliError::Invariant(format!("energy increased by {worst:e} in one step")));
    }
    Ok(())
}

fn check(config: &Config, art: &mut Artifacts, summary: &mut Value) -> Result<(), CliError> {
    let ids = &config.check.as_ref().expect("resolved").criteria;
    if let Some(bad) = ids.iter().find(|i| !suite::CRITERIA.contains(i)) {
        return Err(CliError::Config(format!("unknown criterion {bad}")));
    }
    let mut w = art.create("suite.jsonl")?;
    let mut io_err = None;
    let results = suite::run(ids, SuiteOptions { seed: config.seed }, |r| {
        println!("{r}");
        if let Err(e) = serde_json::to_writer(&mut w, r).map_err(CliError::from).and_then(|_| {
            w.write_all(b"\n")?;
            w.flush().map_err(CliError::from)
        }) {
            io_err.get_or_insert(e);
        }
    });
    if let Some(e) = io_err {
        return Err(e);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    *summary = json!({
        "criteria": results.len(),
        "passed": results.len() - failed.len(),
        "failed": failed,
        "elapsed_secs": results.iter().map(|r| (r.id.to_string(), json!(r.elapsed_secs))).collect::<serde_json::Map<_, _>>(),
    });
    if !failed.is_empty() {
        return Err(CliError::Invariant(format!("criteria {failed:?} failed")));
    }
    Ok(())
}
