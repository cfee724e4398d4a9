use rhythm::analysis::{check_oracles, sweep_grid, AnalysisError, AnalyticalParams, LinkKind};

use crate::VerifyArgs;

/// Self-to-self linking with the opt-in probability dropped.
fn faulty(kind: LinkKind, p: &AnalyticalParams) -> Result<f64, AnalysisError> {
    match kind {
        LinkKind::SelfToSelf => Ok(1.0 / (p.m + p.n) as f64),
        _ => kind.analytic(p),
    }
}

pub fn cmd_verify_formulas(args: &VerifyArgs) -> u8 {
    if args.trials == 0 {
        eprintln!("error: --trials must be >= 1");
        return 2;
    }
    let cells = sweep_grid();
    let analytic = |k: LinkKind, p: &AnalyticalParams| if args.inject_fault { faulty(k, p) } else { k.analytic(p) };
    let checks = match check_oracles(&cells, args.trials, args.seed, args.sigmas, analytic) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!(
        "{:<13} {:>4} {:>3} {:>4} {:>4} {:>12} {:>12} {:>11} {:>6}  result",
        "formula", "N", "M", "r", "K", "analytic", "empirical", "stderr", "z"
    );
    let mut failed = 0;
    for c in &checks {
        let ok = c.passed();
        failed += usize::from(!ok);
        println!(
            "{:<13} {:>4} {:>3} {:>4} {:>4} {:>12.8} {:>12.8} {:>11.3e} {:>6.2}  {}",
            c.kind.as_str(),
            c.params.n,
            c.params.m,
            c.params.r,
            c.params.k,
            c.analytic,
            c.empirical.estimate,
            c.empirical.std_error,
            c.z(),
            if ok { "pass" } else { "FAIL" }
        );
    }
    println!("{} cells, {} failed, tolerance {} SE, {} rounds per cell", checks.len(), failed, args.sigmas, args.trials);
    if failed > 0 {
        for c in checks.iter().filter(|c| !c.passed()) {
            eprintln!(
                "failing cell: {} N={} M={} r={} K={} (z={:.2})",
                c.kind, c.params.n, c.params.m, c.params.r, c.params.k, c.z()
            );
        }
        1
    } else {
        0
    }
}
