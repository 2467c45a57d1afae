use censurv::experiment::{reproduce, ReplicateMetrics, ReproduceConfig, Table};

use super::Outcome;
use crate::args::ReproduceArgs;
use crate::csvio::{fmt, write_rows};
use crate::error::{CliError, CliResult};

pub fn run(args: &ReproduceArgs) -> CliResult<Outcome> {
    let table: Table = args
        .table
        .parse()
        .map_err(|e: censurv::CensurvError| CliError::flag("--table", e.to_string()))?;
    if args.reps < 2 {
        return Err(CliError::flag("--reps", "needs at least 2 replicates"));
    }
    let config = ReproduceConfig {
        table,
        reps: args.reps,
        seed: args.seed,
        n_filter: args.n,
        rho_filter: args.rho,
        beta0_filter: args.beta0,
    };
    let results = reproduce(&config)?;

    let mut header = vec![
        "table",
        "row",
        "n",
        "beta0",
        "rho",
        "cox_terms",
        "reps_ok",
        "reps_failed",
    ];
    let se_names: Vec<String> = ReplicateMetrics::NAMES
        .iter()
        .map(|m| format!("{m}_se"))
        .collect();
    for (m, se) in ReplicateMetrics::NAMES.iter().zip(&se_names) {
        header.push(m);
        header.push(se);
    }
    let rows = results.iter().map(|r| {
        let mut row = vec![
            table.number().to_string(),
            r.spec.label(),
            r.spec.n.to_string(),
            fmt(r.spec.beta0),
            fmt(r.spec.rho),
            r.spec.terms.map(|t| t.to_string()).unwrap_or_default(),
            r.reps_ok.to_string(),
            r.reps_failed.to_string(),
        ];
        for c in &r.cells {
            row.push(fmt(c.mean));
            row.push(fmt(c.se));
        }
        row
    });
    write_rows(&args.out, &header, rows)?;

    for r in &results {
        let nri = r.cell("nri");
        println!(
            "{:<28} bias(cox) {:>7.4} bias(nb) {:>7.4} mse(cox) {:>7.4} mse(nb) {:>7.4} nri {:>7.4} (se {:.4}) [{} ok, {} failed]",
            r.spec.label(),
            r.cell("bias_cox").mean,
            r.cell("bias_nb").mean,
            r.cell("mse_cox").mean,
            r.cell("mse_nb").mean,
            nri.mean,
            nri.se,
            r.reps_ok,
            r.reps_failed
        );
        if let Some(first) = r.failure_messages.first() {
            eprintln!(
                "note: {}: {} replicate(s) failed, first: {first}",
                r.spec.label(),
                r.reps_failed
            );
        }
    }
    Ok(Outcome::new(&args.out, Vec::new(), &config).seed(args.seed))
}
