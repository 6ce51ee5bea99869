use std::fmt::Write as _;
use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use connectikit::arrangement::patterns::pattern_string;
use connectikit::arrangement::{
    critical_width, enum_patterns, equalized_from_witness, inter_overlap_with, lambda2_star, lambda_fit_star_with,
    minimal_supports, regime_check, OverlapVerdict, RegimeInput, SearchOptions,
};
use connectikit::construction::{
    balanced_point, barrier_witness, build_construction, ladder_table, lambda_windows, norm_ladder, ComponentIndex,
};
use connectikit::io::{read_dataset, to_text, CheckpointFile};
use connectikit::numerics::NormKind;
use connectikit::relu_net::Dataset;

use crate::config::Run;
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Args {
    #[arg(value_parser = PossibleValuesParser::new(["patterns", "supports", "regime", "finite", "overlap"]))]
    pub mode: String,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Coordinate cap for the minimal-support search.
    #[arg(long, default_value_t = 8)]
    pub cap: u32,
    #[arg(long)]
    pub width: Option<usize>,
    /// Constraint norm: fro, op or max.
    #[arg(long, default_value = "fro")]
    pub norm: String,
    /// Smallest interpolating width, if known.
    #[arg(long)]
    pub m0: Option<usize>,
    /// Critical regularization for fitting, if known; estimated otherwise.
    #[arg(long)]
    pub lambda_fit: Option<f64>,
    /// Critical width m*, if known; computed from the supports otherwise (max norm).
    #[arg(long)]
    pub m_star: Option<usize>,
    /// Polyhedral constant M for the large-width regime (max norm).
    #[arg(long)]
    pub big_m: Option<f64>,
    /// Construction dimension (finite mode).
    #[arg(long)]
    pub d: Option<usize>,
    /// Construction parameter L, default sqrt(d)/2.
    #[arg(long)]
    pub l: Option<f64>,
    /// Second set of the overlap search.
    #[arg(long, default_value = "op")]
    pub norm2: String,
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Bisect the overlap threshold over lambda2 in [scan-lo, scan-hi].
    #[arg(long)]
    pub scan_lo: Option<f64>,
    #[arg(long)]
    pub scan_hi: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub scan_iters: usize,
}

impl Args {
    fn dataset(&self) -> CliResult<Dataset> {
        let p = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::usage(format!("--data is required for '{}'", self.mode)))?;
        Ok(read_dataset(p)?)
    }

    fn width(&self) -> CliResult<usize> {
        self.width
            .ok_or_else(|| CliError::usage(format!("--width is required for '{}'", self.mode)))
    }

    fn search(&self, seed: u64) -> SearchOptions {
        SearchOptions {
            restarts: self.restarts,
            seed,
            ..SearchOptions::default()
        }
    }
}

pub fn run(a: &Args, run: &mut Run) -> CliResult<()> {
    match a.mode.as_str() {
        "patterns" => patterns(a, run),
        "supports" => supports(a, run),
        "regime" => regime(a, run),
        "finite" => finite(a, run),
        _ => overlap(a, run),
    }
}

fn patterns(a: &Args, run: &mut Run) -> CliResult<()> {
    let data = a.dataset()?;
    let ps = enum_patterns(&data)?;
    let mut text = format!("P = {}\nmethod = {:?}\n", ps.count(), ps.method);
    for (p, w) in ps.patterns.iter().zip(&ps.witnesses) {
        let _ = writeln!(text, "{} witness {:?}", pattern_string(p), w);
    }
    run.write("patterns.txt", &text)?;
    println!("P = {}", ps.count());
    Ok(())
}

fn supports(a: &Args, run: &mut Run) -> CliResult<()> {
    let data = a.dataset()?;
    let ps = enum_patterns(&data)?;
    let z = minimal_supports(&ps, &data, a.lambda, a.cap)?;
    if z.supports.is_empty() {
        return Err(connectikit::Error::Precondition(format!(
            "no interpolator with supports up to cap {} at lambda = {}",
            a.cap, a.lambda
        ))
        .into());
    }
    let m_star = critical_width(&z.supports)?;
    let mut text = format!(
        "patterns: {}\nlambda = {}\ncap = {}\ntruncated = {}\nlp_calls = {}\nm* = {m_star}\n",
        ps.patterns.iter().map(|p| pattern_string(p)).collect::<Vec<_>>().join(" "),
        a.lambda,
        z.cap,
        z.truncated,
        z.lp_calls
    );
    for (k, (s, w)) in z.supports.iter().zip(&z.witnesses).enumerate() {
        let _ = writeln!(text, "Z_A[{k}]: t = {:?}, s = {:?}", s.t, s.s);
        let net = equalized_from_witness(w, s, a.lambda, s.total() as usize)?;
        let mut meta = Map::new();
        meta.insert("t".into(), json!(s.t));
        meta.insert("s".into(), json!(s.s));
        meta.insert("lambda".into(), Value::from(a.lambda));
        run.write(&format!("witness_{k}.json"), &to_text(&CheckpointFile::from_net(&net, meta))?)?;
    }
    run.write("supports.txt", &text)?;
    println!("|Z_A| = {}, m* = {m_star}{}", z.supports.len(), if z.truncated { " (truncated)" } else { "" });
    Ok(())
}

fn regime(a: &Args, run: &mut Run) -> CliResult<()> {
    let data = a.dataset()?;
    let m = a.width()?;
    let norm = NormKind::parse(&a.norm)?;
    let ps = enum_patterns(&data)?;
    let mut notes = Vec::new();
    let (m0, lambda_fit) = match (a.m0, a.lambda_fit) {
        (Some(m0), Some(lf)) => (m0, lf),
        (m0, lf) => {
            let fit = lambda_fit_star_with(&data, m, norm, &a.search(run.seed()))?;
            notes.push(format!(
                "lambda_fit estimated by multi-start search at width {m}: {} ({} restarts succeeded)",
                fit.lambda, fit.restarts_succeeded
            ));
            (m0.unwrap_or(m), lf.unwrap_or(fit.lambda))
        }
    };
    let m_star = match (a.m_star, norm) {
        (Some(ms), _) => Some(ms),
        (None, NormKind::MaxEntry) => {
            let z = minimal_supports(&ps, &data, a.lambda, a.cap)?;
            if z.supports.is_empty() {
                None
            } else {
                Some(critical_width(&z.supports)?)
            }
        }
        _ => None,
    };
    let inp = RegimeInput {
        p: ps.count(),
        m,
        lambda: a.lambda,
        norm,
        m0,
        lambda_fit,
        m_star,
        big_m: a.big_m,
    };
    let rep = regime_check(&inp)?;
    let out = json!({ "input": inp, "report": rep, "notes": notes });
    run.write("regime.json", &to_text(&out)?)?;
    println!("nonempty: {:?}, connected: {:?}", rep.nonempty, rep.connected);
    for r in rep.reasons.iter().chain(&rep.warnings).chain(&notes) {
        println!("  {r}");
    }
    Ok(())
}

fn finite(a: &Args, run: &mut Run) -> CliResult<()> {
    let d = a.d.ok_or_else(|| CliError::usage("--d is required for 'finite'"))?;
    let l = a.l.unwrap_or((d as f64).sqrt() / 2.0);
    let c = build_construction(d, l)?;
    let ladder = norm_ladder(&c)?;
    let mut csv = String::from("sigma_id,r_inf,r_op\n");
    for (id, ri, ro) in ladder_table(&c)? {
        let _ = writeln!(csv, "{id},{ri:e},{ro:e}");
    }
    run.write("ladder.csv", &csv)?;
    let windows = lambda_windows(&ladder)?;
    let start = balanced_point(&c, &ComponentIndex::h1(d), NormKind::MaxEntry)?;
    let end = balanced_point(&c, &ComponentIndex::h2(d), NormKind::Operator)?;
    let witness = barrier_witness(&c, |t| start.lincomb(1.0 - t, &end, t), 1e-12)?;
    let report = json!({
        "d": d,
        "L": l,
        "ladder": ladder,
        "windows": {
            "adamw": { "inverse": windows.adamw, "lambda_range": windows.adamw.lambda_range(), "lambda_mid": windows.adamw.mid_lambda() },
            "muon": { "inverse": windows.muon, "lambda_range": windows.muon.lambda_range(), "lambda_mid": windows.muon.mid_lambda() },
        },
        "barrier_witness": witness,
    });
    run.write("finite.json", &to_text(&report)?)?;
    println!(
        "d = {d}, L = {l}: r_inf {:.12} / {:.12}, r_op {:.12} / {:.12}",
        ladder.r_inf_1, ladder.r_inf_2, ladder.r_op_1, ladder.r_op_2
    );
    let (alo, ahi) = windows.adamw.lambda_range();
    let (mlo, mhi) = windows.muon.lambda_range();
    println!("AdamW lambda in ({alo:.6}, {ahi:.6}], Muon lambda in ({mlo:.6}, {mhi:.6}]");
    println!("linear path barrier: loss {:.6} at t = {:.9} (coordinate {})", witness.loss, witness.t_star, witness.coord);
    Ok(())
}

fn overlap(a: &Args, run: &mut Run) -> CliResult<()> {
    let data = a.dataset()?;
    let m = a.width()?;
    let (n1, n2) = (NormKind::parse(&a.norm)?, NormKind::parse(&a.norm2)?);
    let opts = a.search(run.seed());
    let verdict = inter_overlap_with(&data, m, (n1, a.lambda), (n2, a.lambda2), &opts)?;
    let scan = match (a.scan_lo, a.scan_hi) {
        (Some(lo), Some(hi)) => Some(lambda2_star(&data, m, n1, a.lambda, n2, lo, hi, a.scan_iters, &opts)?),
        (None, None) => None,
        _ => return Err(CliError::usage("--scan-lo and --scan-hi go together")),
    };
    if let OverlapVerdict::OverlapFound { witness } = &verdict {
        run.write("overlap_witness.json", &to_text(&CheckpointFile::from_net(&witness, Map::new()))?)?;
    }
    let out = json!({ "found": verdict.found(), "verdict": verdict, "lambda2_star": scan });
    run.write("overlap.json", &to_text(&out)?)?;
    match &verdict {
        OverlapVerdict::OverlapFound { .. } => println!("overlap found (certified witness)"),
        OverlapVerdict::NoneFound { best_residual } => {
            println!("no overlap found (heuristic; best residual {best_residual:e})")
        }
    }
    if let Some(s) = scan {
        println!("lambda2* ~ {}{}", s.value, if s.unbracketed { " (unbracketed)" } else { "" });
    }
    Ok(())
}
