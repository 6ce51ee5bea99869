use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use connectikit::io::{profile_csv, read_checkpoint, read_dataset, to_text};
use connectikit::numerics::NormKind;
use connectikit::paths::{
    align_permutation, connect_intra, eval_path, linear_path, polychain_fit, AlignMode, PolychainConfig,
};
use connectikit::relu_net::RegSetSpec;

use crate::config::Run;
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Args {
    /// Start checkpoint.
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// End checkpoint.
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "linear", value_parser = PossibleValuesParser::new(["linear", "polychain", "constructive"]))]
    pub method: String,
    /// Permute the neurons of `b` onto `a` before interpolating.
    #[arg(long, default_value = "none", value_parser = PossibleValuesParser::new(["none", "weights", "activations"]))]
    pub align: String,
    /// Constraint norm of the regularized set: fro, op or max.
    #[arg(long, default_value = "fro")]
    pub norm: String,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1001)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub pc_eta: f64,
    #[arg(long, default_value_t = 2000)]
    pub pc_iters: usize,
    #[arg(long, default_value_t = 0.4)]
    pub t_lo: f64,
    #[arg(long, default_value_t = 0.6)]
    pub t_hi: f64,
}

fn need(p: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    p.clone().ok_or_else(|| CliError::usage(format!("--{flag} is required")))
}

pub fn run(args: &Args, run: &mut Run) -> CliResult<()> {
    let (a, _) = read_checkpoint(&need(&args.a, "a")?)?;
    let (b, _) = read_checkpoint(&need(&args.b, "b")?)?;
    let data = read_dataset(&need(&args.data, "data")?)?;
    a.check_same_shape(&b)?;
    if a.dim() != data.d() {
        return Err(CliError::usage(format!(
            "checkpoints have d = {} but the dataset has d = {}",
            a.dim(),
            data.d()
        )));
    }
    let norm = NormKind::parse(&args.norm)?;
    let spec = RegSetSpec::new(norm, args.lambda, a.width())?;
    let (b, perm) = match args.align.as_str() {
        "none" => (b, None),
        mode => {
            let (bb, p) = align_permutation(&a, &b, AlignMode::parse(mode)?, Some(&data))?;
            (bb, Some(p))
        }
    };
    let path = match args.method.as_str() {
        "linear" => linear_path(&a, &b)?,
        "polychain" => {
            let cfg = PolychainConfig {
                eta: args.pc_eta,
                iters: args.pc_iters,
                t_lo: args.t_lo,
                t_hi: args.t_hi,
                seed: run.seed(),
            };
            polychain_fit(&a, &b, &data, &cfg)?.path
        }
        _ => connect_intra(&a, &b, &data, &spec)?,
    };
    let prof = eval_path(&path, &data, &spec, args.samples)?;
    run.write("path.json", &to_text(&path)?)?;
    run.write("profile.csv", &profile_csv(&prof))?;
    let summary = json!({
        "method": args.method,
        "align": args.align,
        "permutation": perm,
        "segments": path.kinds(),
        "samples": args.samples,
        "barrier": prof.barrier,
        "max_loss": prof.max_loss,
        "max_R_W": prof.max_r_w,
        "max_R_alpha": prof.max_r_alpha,
        "radius": spec.radius(),
        "first_violation": prof.first_violation,
    });
    run.write("summary.json", &to_text(&summary)?)?;
    println!(
        "{} path ({} segments): barrier {:e}, max loss {:e}, max R_W {:.6}, max R_alpha {:.6}",
        args.method,
        path.len(),
        prof.barrier,
        prof.max_loss,
        prof.max_r_w,
        prof.max_r_alpha
    );
    Ok(())
}
