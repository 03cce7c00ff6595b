use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use evnum::harness::{
    check_ampacity_impact, relative_gap, run_dynamic_experiment, run_sweep, static_problem, DualBound, SweepParam,
    SweepSpec, ORACLE_TOL, STATIC_MINUTE,
};
use evnum::scenario::{run_scenario, ScenarioReport};
use evnum::{
    centralized_solve, dual_solve, dual_step_bound, parse_feeder, primal_solve, read_load_shapes, Algorithm, Feeder,
    LoadShapes, ScenarioConfig, SolverConfig,
};

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{write_manifest, write_output, Manifest};
use crate::{CheckArgs, Cli, Command, Common, DynamicArgs, SolveArgs, SweepArgs};

/// Exit status of a run that finished without converging.
const EXIT_NOT_CONVERGED: u8 = 2;

pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let cfg = match &cli.common.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let ctx = Context { common: &cli.common, cfg };
    match &cli.command {
        Command::Solve(args) => solve(&ctx, args),
        Command::Sweep(args) => sweep(&ctx, args),
        Command::Dynamic(args) => dynamic(&ctx, args),
        Command::CheckFeeder(args) => check_feeder(&ctx, args),
    }
}

struct Context<'a> {
    common: &'a Common,
    cfg: ConfigFile,
}

struct Inputs {
    lines: PathBuf,
    codes: Option<PathBuf>,
    loads: PathBuf,
    shapes_dir: PathBuf,
}

impl Context<'_> {
    fn inputs(&self) -> Result<Inputs, CliError> {
        let c = self.common;
        let data_dir: Option<PathBuf> = self.cfg.pick(c.data_dir.clone(), "data-dir")?;
        let from_dir = |name: &str| data_dir.as_ref().map(|d| d.join(name));
        let lines = self
            .cfg
            .pick(c.lines.clone(), "lines")?
            .or_else(|| from_dir("lines.csv"))
            .ok_or_else(|| CliError::Config("no feeder given: pass --data-dir or --lines and --loads".into()))?;
        let loads = self
            .cfg
            .pick(c.loads.clone(), "loads")?
            .or_else(|| from_dir("loads.csv"))
            .ok_or_else(|| CliError::Config("no loads file given: pass --data-dir or --loads".into()))?;
        let codes = self.cfg.pick(c.codes.clone(), "codes")?.or_else(|| from_dir("codes.csv").filter(|p| p.exists()));
        let shapes_dir = self
            .cfg
            .pick(c.shapes_dir.clone(), "shapes-dir")?
            .or(data_dir.clone())
            .unwrap_or_else(|| loads.parent().map(Path::to_path_buf).unwrap_or_default());
        Ok(Inputs { lines, codes, loads, shapes_dir })
    }

    /// Parses the feeder and its load shapes, recording input hashes.
    fn load(&self, manifest: &mut Manifest) -> Result<(Feeder, LoadShapes), CliError> {
        let inputs = self.inputs()?;
        let feeder = parse_feeder(&inputs.lines, inputs.codes.as_deref(), &inputs.loads)?;
        let shapes = read_load_shapes(&feeder, &inputs.shapes_dir)?;
        manifest.hash_file("input.lines", &inputs.lines)?;
        match &inputs.codes {
            Some(codes) => manifest.hash_file("input.codes", codes)?,
            None => manifest.set("input.codes", "builtin"),
        }
        manifest.hash_file("input.loads", &inputs.loads)?;
        let shape_files: Vec<PathBuf> = feeder.loads().iter().map(|l| inputs.shapes_dir.join(&l.shape_file)).collect();
        manifest.hash_files("input.shapes", &shape_files)?;
        Ok((feeder, shapes))
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.cfg.pick(self.common.out.clone(), "out")?.unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(dir)
    }

    fn algorithm(&self) -> Result<Option<String>, CliError> {
        self.cfg.pick(self.common.algorithm.clone(), "algorithm")
    }

    fn step_size(&self) -> Result<Option<f64>, CliError> {
        self.cfg.pick(self.common.step_size, "step-size")
    }

    fn seed(&self) -> Result<Option<u64>, CliError> {
        self.cfg.pick(self.common.seed, "seed")
    }

    fn solver_config(&self, step: f64) -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::new(step);
        if let Some(eps) = self.cfg.pick(self.common.epsilon, "epsilon")? {
            cfg = cfg.with_epsilon(eps);
        }
        if let Some(n) = self.cfg.pick(self.common.max_iters, "max-iters")? {
            cfg = cfg.with_max_iters(n);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_algorithm(name: &str) -> Result<Algorithm, CliError> {
    match name.parse::<Algorithm>()? {
        Algorithm::Uncontrolled => Err(CliError::Config("uncontrolled charging is only available in `dynamic`".into())),
        a => Ok(a),
    }
}

fn solve(ctx: &Context, args: &SolveArgs) -> Result<ExitCode, CliError> {
    let mut manifest = Manifest::new("solve");
    let algorithm = ctx.algorithm()?.unwrap_or_else(|| "primal".into());
    let minute = ctx.cfg.pick(args.minute, "minute")?.unwrap_or(STATIC_MINUTE);
    let stride = ctx.cfg.pick(args.trace_every, "trace-every")?.unwrap_or(1);
    let (feeder, shapes) = ctx.load(&mut manifest)?;
    let p = static_problem(&feeder, &shapes, minute)?;
    let out = ctx.out_dir()?;
    manifest.set("algorithm", &algorithm);
    manifest.set("minute", minute);
    manifest.set("chargers", p.num_chargers());
    manifest.set("links", p.num_links());
    write_output(&mut manifest, &out, "problem.csv", &p.to_snapshot())?;

    let reference = centralized_solve(&p, ORACLE_TOL)?;
    let (x, converged) = if algorithm == "centralized" {
        manifest.set("tolerance", ORACLE_TOL);
        manifest.set("newton_steps", reference.newton_steps);
        manifest.set("kkt_residual", format!("{:e}", reference.kkt_residual));
        (reference.x.clone(), true)
    } else {
        let alg = parse_algorithm(&algorithm)?;
        let step = ctx.step_size()?.unwrap_or_else(|| match alg {
            Algorithm::Dual => dual_step_bound(&p),
            _ => 1.0,
        });
        let cfg = ctx.solver_config(step)?;
        manifest.set("step_size", format!("{step:e}"));
        manifest.set("epsilon", format!("{:e}", cfg.epsilon));
        manifest.set("max_iters", cfg.max_iters);
        manifest.set("trace_every", stride);
        let trace = match alg {
            Algorithm::Dual => dual_solve(&p, &cfg)?.1,
            _ => primal_solve(&p, &cfg, None)?.1,
        };
        write_output(&mut manifest, &out, "trace.csv", &trace.to_csv_every(stride))?;
        manifest.set("termination", trace.termination.as_str());
        manifest.set("iterations", trace.iterations());
        manifest.set("worst_violation", format!("{:e}", trace.worst_violation()));
        let x = trace.records.last().map(|r| r.x.clone()).unwrap_or(trace.initial_x.clone());
        (x, trace.converged())
    };

    let objective = p.objective(&x);
    let gap = relative_gap(objective, reference.objective);
    let mut rates = String::from("charger_id,site,bus,rate_a\n");
    for (c, xi) in feeder.chargers().iter().zip(&x) {
        rates.push_str(&format!("{},{},{},{xi:?}\n", c.id, c.site, c.bus));
    }
    write_output(&mut manifest, &out, "rates.csv", &rates)?;
    manifest.set("objective", format!("{objective:?}"));
    manifest.set("final_gap", format!("{gap:e}"));
    write_manifest(&manifest, &out)?;

    println!(
        "{algorithm}: {} objective={objective:.9} gap={gap:.3e} max_violation={:.3e}",
        if converged { "converged" } else { "not converged" },
        p.max_violation(&x)
    );
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NOT_CONVERGED) })
}

fn sweep(ctx: &Context, args: &SweepArgs) -> Result<ExitCode, CliError> {
    let mut manifest = Manifest::new("sweep");
    let param: SweepParam = ctx
        .cfg
        .pick(args.param.clone(), "param")?
        .ok_or_else(|| CliError::Config("sweep needs --param (step-size, N or M)".into()))?
        .parse()?;
    let values: Vec<f64> = ctx
        .cfg
        .pick_list(args.values.as_deref(), "values")?
        .ok_or_else(|| CliError::Config("sweep needs --values".into()))?;
    let algorithm = parse_algorithm(&ctx.algorithm()?.unwrap_or_else(|| "dual".into()))?;

    let mut spec = SweepSpec::new(param, values, algorithm);
    spec.step_size = ctx.step_size()?;
    if let Some(b) = ctx.cfg.pick(args.dual_bound.clone(), "dual-bound")? {
        spec.dual_bound = b.parse::<DualBound>()?;
    }
    let solver = ctx.solver_config(1.0)?;
    spec.epsilon = solver.epsilon;
    spec.max_iters = solver.max_iters;
    spec.seed = ctx.seed()?.unwrap_or(spec.seed);
    spec.minute = ctx.cfg.pick(args.minute, "minute")?.unwrap_or(spec.minute);
    spec.jobs = ctx.cfg.pick(ctx.common.jobs, "jobs")?.unwrap_or(1);
    spec.validate()?;

    let (feeder, shapes) = ctx.load(&mut manifest)?;
    let out = ctx.out_dir()?;
    let result = run_sweep(&spec, &feeder, &shapes)?;

    manifest.set("param", param.as_str());
    manifest.set("values", spec.values.iter().map(|v| param.format_value(*v)).collect::<Vec<_>>().join(","));
    manifest.set("algorithm", algorithm.as_str());
    manifest.set("step_size", spec.step_size.map(|s| format!("{s:e}")).unwrap_or_else(|| "per-instance".into()));
    manifest.set("dual_bound", spec.dual_bound.as_str());
    manifest.set("epsilon", format!("{:e}", spec.epsilon));
    manifest.set("max_iters", spec.max_iters);
    manifest.set("seed", spec.seed);
    manifest.set("minute", spec.minute);
    manifest.set("config_hash", &result.config_hash);
    write_output(&mut manifest, &out, "sweep.csv", &result.to_csv())?;
    write_output(&mut manifest, &out, "curves.csv", &result.curves_csv())?;
    write_manifest(&manifest, &out)?;

    for r in &result.rows {
        println!(
            "{}={} step={:e} iterations={} iters_to_95={} final_gap={:.3e} stable={}",
            param.as_str(),
            param.format_value(r.value),
            r.step_size,
            r.iterations,
            r.iters_to_95.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            r.final_gap,
            r.stable
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn dynamic(ctx: &Context, args: &DynamicArgs) -> Result<ExitCode, CliError> {
    let mut manifest = Manifest::new("dynamic");
    let cfg = &ctx.cfg;
    let mut base = ScenarioConfig::new(Algorithm::Primal);
    base.seed = ctx.seed()?.unwrap_or(base.seed);
    base.arrival_rate = cfg.pick(args.arrival_rate, "arrival-rate")?.unwrap_or(base.arrival_rate);
    base.arrival_start_minute = cfg.pick(args.start_minute, "start-minute")?.unwrap_or(base.arrival_start_minute);
    base.iterations_per_minute =
        cfg.pick(args.iterations_per_minute, "iterations-per-minute")?.unwrap_or(base.iterations_per_minute);
    base.battery_kwh = cfg.pick(args.battery_kwh, "battery-kwh")?.unwrap_or(base.battery_kwh);
    base.charger_power_kw = cfg.pick(args.charger_kw, "charger-kw")?.unwrap_or(base.charger_power_kw);
    if let Some(lines) = cfg.pick_list::<usize>(args.report_lines.as_deref(), "report-lines")? {
        base.report_lines = lines;
    }
    base.validate()?;
    let dual_step = cfg.pick(args.dual_step_size, "dual-step-size")?;
    let primal_step = cfg.pick(args.primal_step_size, "primal-step-size")?;

    let (feeder, shapes) = ctx.load(&mut manifest)?;
    let out = ctx.out_dir()?;
    manifest.set("seed", base.seed);
    manifest.set("arrival_rate", base.arrival_rate);
    manifest.set("start_minute", base.arrival_start_minute);
    manifest.set("iterations_per_minute", base.iterations_per_minute);
    manifest.set("battery_kwh", base.battery_kwh);
    manifest.set("charger_kw", base.charger_power_kw);
    manifest.set("nominal_voltage", base.nominal_voltage);
    manifest.set("report_lines", base.report_lines.iter().map(usize::to_string).collect::<Vec<_>>().join(","));

    let reports: Vec<ScenarioReport> = match ctx.algorithm()? {
        Some(name) => {
            let algorithm: Algorithm = name.parse()?;
            let step = ctx.step_size()?.unwrap_or(algorithm.default_dynamic_step());
            manifest.set("algorithm", algorithm.as_str());
            manifest.set("step_size", format!("{step:e}"));
            let cfg = ScenarioConfig { algorithm, step_size: step, ..base };
            vec![run_scenario(&cfg, &feeder, &shapes)?]
        }
        None => {
            let cmp = run_dynamic_experiment(&base, dual_step, primal_step, &feeder, &shapes)?;
            manifest.set("algorithm", "dual,primal");
            manifest
                .set("dual_step_size", format!("{:e}", dual_step.unwrap_or(Algorithm::Dual.default_dynamic_step())));
            manifest.set(
                "primal_step_size",
                format!("{:e}", primal_step.unwrap_or(Algorithm::Primal.default_dynamic_step())),
            );
            write_output(&mut manifest, &out, "summary.csv", &cmp.summary_csv())?;
            vec![cmp.dual, cmp.primal]
        }
    };

    for r in &reports {
        let name = r.algorithm.as_str();
        write_output(&mut manifest, &out, &format!("{name}_lines.csv"), &r.lines_csv())?;
        write_output(&mut manifest, &out, &format!("{name}_sessions.csv"), &r.sessions_csv())?;
        write_output(&mut manifest, &out, &format!("{name}_minutes.csv"), &r.minutes_csv())?;
        let impact = check_ampacity_impact(r);
        write_output(&mut manifest, &out, &format!("{name}_impact.csv"), &impact.to_csv())?;
        println!(
            "{name}: violation_minutes={} overloaded_links={} energy_kwh={:.3} completed={}/{}",
            r.violation_minutes(),
            impact.violated.len(),
            r.total_energy_kwh(),
            r.completed_sessions(),
            r.sessions.len()
        );
    }
    write_manifest(&manifest, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn check_feeder(ctx: &Context, args: &CheckArgs) -> Result<ExitCode, CliError> {
    let mut manifest = Manifest::new("check-feeder");
    let (feeder, shapes) = ctx.load(&mut manifest)?;
    println!("source bus: {}", feeder.source_bus());
    println!("buses: {}", feeder.buses().len());
    println!("lines: {}", feeder.lines().len());
    println!("loads: {}", feeder.loads().len());
    println!("longest charger route: {} lines", feeder.max_route_len());
    let minute = ctx.cfg.pick(args.minute, "minute")?.unwrap_or(STATIC_MINUTE);
    let p = static_problem(&feeder, &shapes, minute)?;
    let tightest = p
        .capacity()
        .iter()
        .enumerate()
        .filter(|(l, _)| !p.routing().users(*l).is_empty())
        .min_by(|a, b| a.1.total_cmp(b.1));
    if let Some((l, c)) = tightest {
        println!("tightest headroom at minute {minute}: {} with {c:.3} A", feeder.lines()[l].id);
    }
    let peak = (0..evnum::MINUTES_PER_DAY)
        .map(|m| shapes.kw_at(&feeder, m).map(|kw| (kw.iter().sum::<f64>(), m)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    println!("peak base load: {:.3} kW at minute {}", peak.0, peak.1);
    Ok(ExitCode::SUCCESS)
}
