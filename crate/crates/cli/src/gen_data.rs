use clap::builder::PossibleValuesParser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use connectikit::construction::build_construction;
use connectikit::io::{to_text, CheckpointFile, DatasetFile};
use connectikit::relu_net::{gen_teacher_data, Dataset};
use connectikit::Mat;

use crate::config::Run;
use crate::{CliError, CliResult};

#[derive(clap::Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Args {
    /// teacher: Gaussian inputs labelled by a random net; toy: X = [1; -1], y = 1;
    /// finite: the [A; -A] construction with unit targets.
    #[arg(long, default_value = "teacher", value_parser = PossibleValuesParser::new(["teacher", "toy", "finite"]))]
    pub mode: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub teacher_width: usize,
    /// Construction parameter L (finite mode), default sqrt(d)/2.
    #[arg(long)]
    pub l: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, flag: &str, mode: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::usage(format!("--{flag} is required in {mode} mode")))
}

fn write_data(run: &mut Run, data: &Dataset) -> CliResult<()> {
    run.write("data.json", &to_text(&DatasetFile::from_dataset(data))?)?;
    Ok(())
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn run(a: &Args, run: &mut Run) -> CliResult<()> {
    match a.mode.as_str() {
        "teacher" => {
            let n = need(a.n, "n", "teacher")?;
            let d = need(a.d, "d", "teacher")?;
            let (data, teacher) = gen_teacher_data(run.seed(), n, d, a.teacher_width)?;
            write_data(run, &data)?;
            let mut meta = Map::new();
            meta.insert("role".into(), Value::from("teacher"));
            meta.insert("seed".into(), Value::from(run.seed()));
            run.write("teacher.json", &to_text(&CheckpointFile::from_net(&teacher, meta))?)?;
            println!("teacher data: n = {n}, d = {d}, teacher width {}", a.teacher_width);
        }
        "toy" => {
            write_data(run, &Dataset::toy())?;
            println!("toy data: X = [1; -1], y = [1, 1]");
        }
        _ => {
            let d = need(a.d, "d", "finite")?;
            let l = a.l.unwrap_or((d as f64).sqrt() / 2.0);
            let c = build_construction(d, l)?;
            let residual = c.a.matmul(&c.b)?.max_abs_diff(&Mat::identity(d))?;
            write_data(run, &c.data)?;
            let bundle = json!({
                "d": d,
                "L": l,
                "B": rows(&c.b),
                "A": rows(&c.a),
                "ab_residual": residual,
            });
            run.write("construction.json", &to_text(&bundle)?)?;
            println!("finite construction: d = {d}, L = {l}, max |A B - I| = {residual:e}");
        }
    }
    Ok(())
}
