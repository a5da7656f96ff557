use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use tensorwino::{cost_report, default_points, format_ratio_2dp, synthesize_transforms, write_cost_csv, Counting};

use crate::common::{load_transform, write_output};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, required_unless_present = "transform")]
    output_size: Option<usize>,
    #[arg(long, required_unless_present = "transform")]
    kernel_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    ndim: usize,
    /// Channel counts A:B or A:B:STEP (inclusive); K = M on every row.
    #[arg(long, default_value = "1:1")]
    channels_range: String,
    /// Count used for the summary line; the CSV carries both.
    #[arg(long, default_value = "dense")]
    counting: Counting,
    /// Use a transform document instead of synthesizing one.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_range(text: &str) -> Result<Vec<usize>> {
    let parts = text
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .with_context(|| format!("bad number '{p}' in range '{text}'"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b, step) = match parts.as_slice() {
        [a] => (*a, *a, 1),
        [a, b] => (*a, *b, 1),
        [a, b, s] => (*a, *b, *s),
        _ => bail!("range must be A:B or A:B:STEP, got '{text}'"),
    };
    if a == 0 || b < a || step == 0 {
        bail!("range '{text}' must satisfy 1 <= A <= B and STEP >= 1");
    }
    Ok((a..=b).step_by(step).collect())
}

pub fn run(args: Args) -> Result<()> {
    let ts = match &args.transform {
        Some(p) => load_transform(p)?,
        None => {
            let (s, g) = (args.output_size.unwrap_or(0), args.kernel_size.unwrap_or(0));
            if s == 0 || g == 0 {
                bail!("sizes must be positive (S={s}, G={g})");
            }
            synthesize_transforms(s, g, &default_points(s + g - 1))?
        }
    };
    let reports = parse_range(&args.channels_range)?
        .into_iter()
        .map(|m| cost_report(m, m, &ts, args.ndim))
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_cost_csv(&mut buf, &reports)?;
    if let (Some(first), Some(last)) = (reports.first(), reports.last()) {
        let ratio = |r: &tensorwino::CostReport| match args.counting {
            Counting::Dense => r.ratio_dense(),
            Counting::Nonzero => r.ratio_sparse(),
        };
        eprintln!(
            "F({},{}) N={}: ratio {:.3} at M={} to {:.3} at M={}; ceiling {}",
            ts.s,
            ts.g,
            args.ndim,
            ratio(first),
            first.m,
            ratio(last),
            last.m,
            format_ratio_2dp(&first.speedup_theoretical)
        );
    }
    write_output(args.csv.as_ref(), &buf)
}
