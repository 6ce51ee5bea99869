use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use connectikit::io::{read_dataset, to_text, CheckpointFile};
use connectikit::optimizers::{dual_norm_check, train, OptimizerConfig, OptimizerKind, DEFAULT_SLACK};

use crate::config::Run;
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Args {
    /// Dataset file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// adamw, signum, normmomgd or muon.
    #[arg(long, default_value = "adamw")]
    pub optimizer: String,
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.9)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Stop once the loss drops below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub init_scale: f64,
    /// Muon: Newton-Schulz iterations instead of an exact SVD.
    #[arg(long)]
    pub newton_schulz: bool,
}

impl Args {
    pub fn optimizer_config(&self) -> CliResult<OptimizerConfig> {
        let kind = OptimizerKind::parse(&self.optimizer).map_err(|e| CliError::usage(e.to_string()))?;
        let cfg = OptimizerConfig {
            kind,
            eta: self.eta,
            lambda: self.lambda,
            mu: self.mu,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            steps: self.steps,
            tol: self.tol,
            newton_schulz: self.newton_schulz,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(a: &Args, run: &mut Run) -> CliResult<()> {
    let cfg = a.optimizer_config()?;
    let data_path = a.data.as_ref().ok_or_else(|| CliError::usage("--data is required"))?;
    let data = read_dataset(data_path)?;
    let res = train(&data, a.width, &cfg, run.seed(), a.init_scale)?;
    let final_loss = *res.trace.last().expect("trace holds the initial loss");
    let mut meta = Map::new();
    meta.insert("optimizer".into(), serde_json::to_value(&cfg).map_err(|e| CliError::usage(e.to_string()))?);
    meta.insert("seed".into(), Value::from(run.seed()));
    meta.insert("final_loss".into(), Value::from(final_loss));
    meta.insert("steps_run".into(), Value::from(res.trace.len() - 1));
    run.write("checkpoint.json", &to_text(&CheckpointFile::from_net(&res.net, meta))?)?;
    let mut csv = String::from("step,loss\n");
    for (k, l) in res.trace.iter().enumerate() {
        csv.push_str(&format!("{k},{l:e}\n"));
    }
    run.write("loss.csv", &csv)?;
    let report = if cfg.lambda > 0.0 {
        Some(dual_norm_check(&res.net, &cfg, DEFAULT_SLACK)?)
    } else {
        None
    };
    run.write("dual_norm.json", &to_text(&report)?)?;
    println!(
        "{}: {} steps, final loss {final_loss:e}",
        cfg.kind.name(),
        res.trace.len() - 1
    );
    if let Some(r) = report {
        println!(
            "dual norm check ({}): W {:.6}, alpha {:.6}, bound {:.6} x {}: {}",
            r.norm.name(),
            r.value_w,
            r.value_alpha,
            r.bound,
            1.0 + r.slack,
            if r.pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
