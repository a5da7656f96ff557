use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use tensorwino::{avx_aware_size, default_points, synthesize_transforms, validate_transforms, InterpolationPoint};

use crate::common::{write_output, CheckFailed};

#[derive(clap::Args)]
pub struct Args {
    /// Outputs per tile (S). Chosen from the vector width when omitted.
    #[arg(long)]
    output_size: Option<usize>,
    /// Kernel extent (G).
    #[arg(long)]
    kernel_size: usize,
    /// Spatial rank used for vector-width sizing.
    #[arg(long, default_value_t = 1)]
    ndim: usize,
    /// Pick the smallest tile with D^ndim divisible by this width.
    #[arg(long)]
    vector_width: Option<usize>,
    /// Comma-separated points, e.g. "0,1,-1,1/2,inf".
    #[arg(long)]
    points: Option<String>,
    /// Output document; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_points(text: &str) -> Result<Vec<InterpolationPoint>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<InterpolationPoint>()
                .with_context(|| format!("invalid point '{p}'"))
        })
        .collect()
}

pub fn run(args: Args) -> Result<()> {
    let g = args.kernel_size;
    let s = match (args.output_size, args.vector_width) {
        (Some(s), _) => s,
        (None, Some(w)) => avx_aware_size(g, args.ndim, w)?.1,
        (None, None) => bail!("give --output-size or --vector-width"),
    };
    if s == 0 || g == 0 {
        bail!("sizes must be positive (S={s}, G={g})");
    }
    let points = match &args.points {
        Some(text) => parse_points(text)?,
        None => default_points(s + g - 1),
    };
    let ts = synthesize_transforms(s, g, &points)?;
    let report = validate_transforms(&ts)?;
    eprintln!("{report}");
    if !report.passed() {
        return Err(CheckFailed(format!("synthesized transforms failed validation: {report}")).into());
    }
    write_output(args.out.as_ref(), ts.to_document().as_bytes())
}
