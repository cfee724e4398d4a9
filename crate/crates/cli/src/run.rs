use std::fs;
use std::path::Path;

use rhythm::analysis::emit_report;
use rhythm::experiment::{Experiment, Overrides};

use crate::RunArgs;

pub fn cmd_run(args: &RunArgs) -> u8 {
    let mut exp = match Experiment::from_file(&args.scenario) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    exp.apply(&Overrides {
        seed: args.seed,
        r: args.r,
        p: args.p,
        tau_p_s: args.tau_p,
        gamma_s: args.gamma,
        trials: args.trials,
    });
    if let Err(e) = exp.validate() {
        eprintln!("error: {}: {e}", args.scenario.display());
        return 2;
    }
    log::info!("running {} from {}", exp.name(), args.scenario.display());
    let out = match exp.run() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match emit_report(&out.tables, &args.out) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    for (table, run) in out.tables.iter().zip(&out.runs) {
        let trace = args.out.join(format!("{}_trace.jsonl", table.name));
        let log = args.out.join(format!("{}_log.json", table.name));
        let written = write(&trace, &run.output.trace.to_jsonl()).and_then(|_| write(&log, &run.output.log.to_bytes()));
        if let Err(e) = written {
            eprintln!("error: {e}");
            return 2;
        }
    }
    for line in &out.summary {
        println!("{line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    0
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}
