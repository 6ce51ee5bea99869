use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use connectikit::io::{from_text, parse_profile_csv, read_text};
use connectikit::numerics::singular_values;
use connectikit::paths::PiecewisePath;

use crate::config::Run;
use crate::svg::{histogram_panels, line_chart, Series};
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Args {
    /// Profile CSV; repeat to overlay several paths.
    #[arg(long)]
    pub profile: Vec<PathBuf>,
    /// Legend entry per profile, defaults to the file stem.
    #[arg(long)]
    pub label: Vec<String>,
    /// Path file for singular-value histograms.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Path parameters for the histogram panels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub spectra_t: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

fn label_for(args: &Args, k: usize) -> String {
    args.label.get(k).cloned().unwrap_or_else(|| {
        let p = &args.profile[k];
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match p.parent().and_then(|d| d.file_name()) {
            Some(dir) if stem == "profile" => dir.to_string_lossy().into_owned(),
            _ => stem,
        }
    })
}

pub fn run(args: &Args, run: &mut Run) -> CliResult<()> {
    if args.profile.is_empty() && args.path.is_none() {
        return Err(CliError::usage("give at least one --profile or a --path"));
    }
    if args.bins == 0 {
        return Err(CliError::usage("--bins must be positive"));
    }
    let mut barrier = Vec::new();
    let mut srank = Vec::new();
    for (k, p) in args.profile.iter().enumerate() {
        let rows = parse_profile_csv(&read_text(p)?)?;
        if rows.len() < 2 {
            return Err(CliError::usage(format!("{} has fewer than two rows", p.display())));
        }
        let (l0, l1) = (rows[0][1], rows[rows.len() - 1][1]);
        let label = label_for(args, k);
        barrier.push(Series {
            label: label.clone(),
            points: rows.iter().map(|r| (r[0], r[1] - ((1.0 - r[0]) * l0 + r[0] * l1))).collect(),
        });
        srank.push(Series {
            label,
            points: rows.iter().map(|r| (r[0], r[4])).collect(),
        });
    }
    if !barrier.is_empty() {
        run.write(
            "barrier.svg",
            &line_chart("Loss barrier along the path", "t", "L(t) - [(1-t)L(0) + tL(1)]", &barrier),
        )?;
        run.write("stable_rank.svg", &line_chart("Stable rank of W along the path", "t", "stable rank", &srank))?;
    }
    if let Some(pp) = &args.path {
        let path: PiecewisePath = from_text(&read_text(pp)?)?;
        let mut panels = Vec::new();
        for &t in &args.spectra_t {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::usage(format!("spectra t = {t} is outside [0, 1]")));
            }
            panels.push((format!("t = {t}"), singular_values(&path.eval(t).w)?));
        }
        run.write(
            "spectra.svg",
            &histogram_panels("Singular values of W", "singular value", &panels, args.bins),
        )?;
    }
    println!("report: {} profile(s){}", args.profile.len(), if args.path.is_some() { ", spectra" } else { "" });
    Ok(())
}
