use censurv::simgen::{generate, ScenarioConfig, ScenarioVariant};

use super::Outcome;
use crate::args::SimulateArgs;
use crate::csvio::{write_dataset, write_truth};
use crate::error::{CliError, CliResult};

pub fn run(args: &SimulateArgs) -> CliResult<Outcome> {
    let variant: ScenarioVariant = args.scenario.parse()?;
    let mut config = match variant {
        ScenarioVariant::MisspecifiedEhr => {
            for (flag, given) in [
                ("--beta0", args.beta0.is_some()),
                ("--rho", args.rho.is_some()),
            ] {
                if given {
                    return Err(CliError::flag(
                        flag,
                        "not used by the misspecified-ehr scenario",
                    ));
                }
            }
            ScenarioConfig::misspecified(args.n.unwrap_or(5000))
        }
        _ => ScenarioConfig::new(
            variant,
            args.n.unwrap_or(1000),
            args.beta0.unwrap_or(0.0),
            args.rho.unwrap_or(0.0),
        ),
    };
    config.horizon = args.horizon;
    let sim = generate(&config, args.seed)?;
    write_dataset(&args.out, &sim.data)?;
    let mut outcome = Outcome::new(&args.out, Vec::new(), &config).seed(args.seed);
    if let Some(path) = &args.truth_out {
        write_truth(path, &sim.true_times, &sim.true_surv)?;
        outcome.outputs.push(path.clone());
    }
    Ok(outcome)
}
