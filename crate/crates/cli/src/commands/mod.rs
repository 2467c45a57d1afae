mod evaluate;
mod fit;
mod plotdata;
mod predict;
mod reproduce;
mod simulate;

use std::path::{Path, PathBuf};
use std::time::Instant;

use censurv::model_io::{deserialize_model, SavedModel};
use serde::Serialize;

use crate::args::Command;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// What a finished command reports for its manifest.
pub struct Outcome {
    pub out: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Outcome {
    pub fn new(out: &Path, inputs: Vec<PathBuf>, config: &impl Serialize) -> Self {
        Self {
            out: out.to_path_buf(),
            outputs: vec![out.to_path_buf()],
            inputs,
            seed: None,
            config: serde_json::to_value(config).expect("configurations serialize"),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

pub fn load_model(path: &Path) -> CliResult<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(deserialize_model(&text)?)
}

pub fn execute(command: Command, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let (name, outcome) = match command {
        Command::Simulate(a) => ("simulate", simulate::run(&a)?),
        Command::Fit(a) => ("fit", fit::run(&a)?),
        Command::Predict(a) => ("predict", predict::run(&a)?),
        Command::Evaluate(a) => ("evaluate", evaluate::run(&a)?),
        Command::Reproduce(a) => ("reproduce", reproduce::run(&a)?),
        Command::Plotdata(a) => ("plotdata", plotdata::run(&a)?),
        Command::Rerun(a) => return rerun(&a.manifest),
    };
    let manifest = RunManifest {
        command: name.to_string(),
        argv: argv.to_vec(),
        cwd: std::env::current_dir().map_err(|e| CliError::io(Path::new("."), e))?,
        config: outcome.config,
        seed: outcome.seed,
        threads: rayon::current_num_threads(),
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let path = manifest.write(&outcome.out)?;
    eprintln!(
        "wrote {} (manifest {})",
        outcome.out.display(),
        path.display()
    );
    Ok(())
}

fn rerun(path: &Path) -> CliResult<()> {
    let manifest = RunManifest::read(path)?;
    if manifest.argv.first().map(String::as_str) == Some("rerun") {
        return Err(CliError::flag("--manifest", "manifest records a rerun"));
    }
    std::env::set_current_dir(&manifest.cwd).map_err(|e| CliError::io(&manifest.cwd, e))?;
    let mut argv = vec!["censurv".to_string()];
    argv.extend(manifest.argv);
    crate::run(argv)
}
