//! `cplab` command-line driver.

mod config;
mod output;
mod suites;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use cplab::lattice::{Evaluator, InsertionSet, LatticeSpec};
use cplab::parafermion::{all_plaquettes, dh_residual, CurrentField};
use cplab::weights::DisorderFactor;
use cplab::{build_weights, Error, Variant};

use config::{Cli, Command, OutputArgs, ReportArgs, RunConfig, SweepArgs, Target, VerifyArgs};
use output::{CurrentValue, SweepReport, SweepRow, VerifyReport};
use suites::Outcome;

const USAGE: u8 = 2;
const FAILED: u8 = 1;

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

/// Parameter problems found by the library count as usage errors; anything else is a failed run.
fn library_error(e: Error) -> ExitCode {
    match e {
        Error::InvalidParams(_) | Error::DimensionOverflow { .. } | Error::Lattice(_) => usage(e),
        _ => {
            eprintln!("run failed: {e}");
            ExitCode::from(FAILED)
        }
    }
}

fn elapsed(start: Instant, out: &OutputArgs) -> Option<f64> {
    (!out.deterministic).then(|| start.elapsed().as_secs_f64())
}

fn print_summary(out: &OutputArgs, title: &str, o: &Outcome) {
    let mut w = output::summary_sink(out);
    let passed = o.checks.iter().filter(|c| c.pass).count();
    let _ = writeln!(w, "{title}: {passed}/{} checks passed", o.checks.len());
    for c in o.checks.iter().filter(|c| !c.pass).take(10) {
        let _ = writeln!(w, "  FAIL {}: {:.3e} > {:.1e}", c.name, c.residual, c.tol);
    }
    for (k, v) in &o.values {
        let _ = writeln!(w, "  {k} = {v:.6e}");
    }
    for n in &o.notes {
        let _ = writeln!(w, "  note: {n}");
    }
}

fn finish(o: &Outcome) -> ExitCode {
    if o.passed() {
        return ExitCode::SUCCESS;
    }
    if let Some(c) = o.worst() {
        eprintln!("worst offender: {} residual {:.3e} (tol {:.1e})", c.name, c.residual, c.tol);
    }
    ExitCode::from(FAILED)
}

fn verify(args: VerifyArgs) -> ExitCode {
    let cfg = RunConfig::new(args.target, &args.model);
    if let Err(e) = cfg.validate() {
        return usage(e);
    }
    let start = Instant::now();
    let o = match suites::run(&cfg) {
        Ok(o) => o,
        Err(e) => return library_error(e),
    };
    let report = VerifyReport {
        schema: output::SCHEMA,
        command: "verify",
        config: &cfg,
        passed: o.passed(),
        worst: o.worst(),
        checks: &o.checks,
        values: &o.values,
        currents: &[],
        notes: &o.notes,
        wall_time_s: elapsed(start, &args.out),
    };
    if let Err(e) = output::write_verify(&args.out, &report) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(FAILED);
    }
    print_summary(&args.out, &format!("verify {}", target_name(cfg.target)), &o);
    finish(&o)
}

fn target_name(t: Target) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn sweep(args: SweepArgs) -> ExitCode {
    let values = match args.values() {
        Ok(v) => v,
        Err(e) => return usage(e),
    };
    let base = RunConfig::new(args.target, &args.model);
    let mut configs = Vec::with_capacity(values.len());
    for v in &values {
        let mut cfg = base.clone();
        cfg.set_axis(args.axis, *v);
        if let Err(e) = cfg.validate() {
            return usage(format!("at {v}: {e}"));
        }
        configs.push(cfg);
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(values.len());
    let mut summary = output::summary_sink(&args.out);
    for (v, cfg) in values.iter().zip(&configs) {
        let o = match suites::run(cfg) {
            Ok(o) => o,
            Err(e) => return library_error(e),
        };
        let row = SweepRow::new(*v, &o);
        let _ = writeln!(
            summary,
            "{v:.6e}  {}  worst {} {:.3e}",
            if row.passed { "pass" } else { "FAIL" },
            row.worst_check,
            row.worst_residual
        );
        rows.push(row);
    }
    let passed = rows.iter().all(|r| r.passed);
    let report = SweepReport {
        schema: output::SCHEMA,
        command: "sweep",
        config: &base,
        axis: args.axis,
        passed,
        rows: &rows,
        wall_time_s: elapsed(start, &args.out),
    };
    if let Err(e) = output::write_sweep(&args.out, &report) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(FAILED);
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        if let Some(r) = rows.iter().filter(|r| !r.passed).max_by(|a, b| a.worst_residual.total_cmp(&b.worst_residual)) {
            eprintln!("worst offender: {} at {} residual {:.3e}", r.worst_check, r.value, r.worst_residual);
        }
        ExitCode::from(FAILED)
    }
}

fn report_lattice(spec: &LatticeSpec, cfg: &RunConfig) -> cplab::Result<(Outcome, Vec<CurrentValue>)> {
    let lat = spec.build()?;
    let (r, s) = suites::pinned_pair(cfg)?;
    let table = build_weights(&r, &s)?;
    let ev = Evaluator::new(&lat, &table, cplab::lattice::Engine::Contract)?;
    let mut currents = Vec::new();
    for ins in &spec.insertions {
        let m = ins.midedge();
        let set = InsertionSet::new()
            .with_x(m.site, ins.variant.x_power())
            .with_tail(&lat, &ins.tail(), &DisorderFactor::new(&table, ins.variant))?;
        let v = ev.expectation(&set)?;
        currents.push(CurrentValue { variant: ins.variant.name().into(), site: ins.site, cell: ins.cell, re: v.re, im: v.im });
    }
    let mut o = Outcome::default();
    let tol = cfg.tol_or(1e-9);
    for v in Variant::ALL {
        let mut f = CurrentField::new(&lat, &table, v, cplab::lattice::Engine::Contract)?;
        let mut worst: f64 = 0.0;
        for pl in all_plaquettes(&lat) {
            worst = worst.max(dh_residual(&mut f, &pl)?.relative);
        }
        o.check(format!("{} relations", v.name()), worst, tol);
    }
    o.values.insert("z_re".into(), ev.z.re);
    o.values.insert("z_im".into(), ev.z.im);
    Ok((o, currents))
}

fn report(args: ReportArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", args.spec.display())),
    };
    let spec = match LatticeSpec::from_toml_str(&text) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let mut cfg = RunConfig::new(Target::Dh, &args.model);
    cfg.rows = spec.rows;
    cfg.cols = spec.cols;
    cfg.theta = Some(spec.theta);
    if let Err(e) = cfg.validate() {
        return usage(e);
    }
    let start = Instant::now();
    let (o, currents) = match report_lattice(&spec, &cfg) {
        Ok(x) => x,
        Err(e) => return library_error(e),
    };
    let rep = VerifyReport {
        schema: output::SCHEMA,
        command: "report",
        config: &cfg,
        passed: o.passed(),
        worst: o.worst(),
        checks: &o.checks,
        values: &o.values,
        currents: &currents,
        notes: &o.notes,
        wall_time_s: elapsed(start, &args.out),
    };
    if let Err(e) = output::write_verify(&args.out, &rep) {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(FAILED);
    }
    let mut w = output::summary_sink(&args.out);
    for c in &currents {
        let _ = writeln!(w, "<{} at {:?} / {:?}> = {:.10} {:+.10}i", c.variant, c.site, c.cell, c.re, c.im);
    }
    drop(w);
    print_summary(&args.out, "report", &o);
    finish(&o)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}
