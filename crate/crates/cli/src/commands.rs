use std::time::Instant;

use hankel_les::ensemble::sample_batch;
use hankel_les::moments::{
    gamma_lower_bound, limiting_covariance, limiting_moment, IntegratorConfig, LimitMomentResult,
};
use hankel_les::parallel::with_workers;
use hankel_les::stats::{empirical_moment, excess_kurtosis, histogram, skewness, HistogramBin};
use hankel_les::MomentEstimate;
use serde::Serialize;

use crate::config::{CovArgs, Format, IntegratorArgs, LimitArgs, RunConfig, SimulateArgs};
use crate::error::CliResult;
use crate::output::{csv_table, emit, json_record, suffixed};

#[derive(Serialize)]
struct MomentRow {
    p: u32,
    k: u32,
    value: f64,
    stderr: f64,
    reps: u64,
}

#[derive(Serialize)]
struct ShapeRow {
    p: u32,
    mean: MomentEstimate,
    skewness: MomentEstimate,
    excess_kurtosis: MomentEstimate,
}

#[derive(Serialize)]
struct HistogramRecord {
    p: u32,
    bins: Vec<HistogramBin>,
}

#[derive(Serialize)]
struct SimulateResults {
    moments: Vec<MomentRow>,
    shape: Vec<ShapeRow>,
    histograms: Vec<HistogramRecord>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut p: Vec<u32> = Vec::new();
    for &v in &args.p {
        if !p.contains(&v) {
            p.push(v);
        }
    }
    let mut config = RunConfig::base("simulate", &args.common);
    config.p = p.iter().map(|&v| v as u64).collect();
    config.k = args.k.iter().map(|&v| v as u64).collect();
    config.n = Some(args.n);
    config.reps = Some(args.reps);
    config.distribution = Some(args.dist.name().to_string());
    config.format = Some(args.format);
    config.hist = args.hist;
    config.hist_out = args.hist_out.as_ref().map(|p| p.display().to_string());

    let batch = with_workers(config.worker_count(), || {
        sample_batch(
            args.dist,
            args.n as usize,
            &p,
            args.reps as usize,
            args.common.seed,
        )
    })?;

    let mut moments = Vec::new();
    let mut shape = Vec::new();
    let mut histograms = Vec::new();
    for &pv in &p {
        for &k in &args.k {
            let m = empirical_moment(&batch, pv, k)?;
            moments.push(MomentRow {
                p: pv,
                k,
                value: m.value,
                stderr: m.stderr,
                reps: m.effort,
            });
        }
        let column = batch.column(pv)?;
        shape.push(ShapeRow {
            p: pv,
            mean: empirical_moment(&batch, pv, 1)?,
            skewness: skewness(&column)?,
            excess_kurtosis: excess_kurtosis(&column)?,
        });
        if let Some(bins) = args.hist {
            histograms.push(HistogramRecord {
                p: pv,
                bins: histogram(&batch, pv, bins as usize)?,
            });
        }
    }

    if let Some(path) = &args.hist_out {
        for h in &histograms {
            let target = if histograms.len() == 1 {
                path.clone()
            } else {
                suffixed(path, h.p)
            };
            emit(Some(&target), &csv_table(&h.bins)?)?;
        }
    }
    let text = match args.format {
        Format::Json => {
            let runtime = args.timing.then(|| started.elapsed().as_secs_f64());
            json_record(
                &config,
                SimulateResults {
                    moments,
                    shape,
                    histograms,
                },
                runtime,
            )?
        }
        Format::Csv => csv_table(&moments)?,
    };
    emit(args.common.out.as_deref(), &text)
}

fn integrator_config(args: &IntegratorArgs) -> IntegratorConfig {
    IntegratorConfig {
        samples: args.samples,
        seed: args.common.seed,
        partition_samples: args.partition_samples,
        breakdown: args.breakdown,
    }
}

fn integrator_echo(command: &str, args: &IntegratorArgs) -> RunConfig {
    let mut config = RunConfig::base(command, &args.common);
    config.samples = Some(args.samples);
    config.partition_samples = args.partition_samples;
    config.breakdown = Some(args.breakdown);
    config.format = Some(args.format);
    config
}

#[derive(Serialize)]
struct SummaryRow {
    degrees: String,
    k: usize,
    value: f64,
    stderr: f64,
    integration_stderr: f64,
    mode: &'static str,
    partition_count: u128,
}

fn summary_row(r: &LimitMomentResult) -> SummaryRow {
    use hankel_les::moments::SumMode;
    SummaryRow {
        degrees: r
            .degrees
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        k: r.k,
        value: r.value,
        stderr: r.stderr,
        integration_stderr: r.integration_stderr,
        mode: match r.mode {
            SumMode::Vanishing => "vanishing",
            SumMode::Exhaustive => "exhaustive",
            SumMode::PartitionSampling { .. } => "partition_sampling",
        },
        partition_count: r.partition_count,
    }
}

#[derive(Serialize)]
struct LimitEntry {
    #[serde(flatten)]
    result: LimitMomentResult,
    /// Lower bound on `β_k` for even `k`.
    gamma_lower_bound: Option<f64>,
}

#[derive(Serialize)]
struct LimitResults {
    moments: Vec<LimitEntry>,
}

#[derive(Serialize)]
struct CovResults<'a> {
    covariance: &'a LimitMomentResult,
}

fn write_results<T: Serialize>(
    config: &RunConfig,
    args: &IntegratorArgs,
    rows: &[LimitMomentResult],
    results: T,
    started: Instant,
) -> CliResult<()> {
    let text = match args.format {
        Format::Json => {
            let runtime = args.timing.then(|| started.elapsed().as_secs_f64());
            json_record(config, results, runtime)?
        }
        Format::Csv => csv_table(&rows.iter().map(summary_row).collect::<Vec<_>>())?,
    };
    emit(args.common.out.as_deref(), &text)
}

pub fn limit(args: &LimitArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut config = integrator_echo("limit", &args.integrator);
    config.p = vec![args.p];
    config.k = args.k.clone();
    let cfg = integrator_config(&args.integrator);
    let p = args.p as usize;
    let results = with_workers(config.worker_count(), || {
        args.k
            .iter()
            .map(|&k| limiting_moment(p, k as usize, &cfg))
            .collect::<hankel_les::Result<Vec<_>>>()
    })?;
    let entries: Vec<LimitEntry> = results
        .iter()
        .map(|r| LimitEntry {
            result: r.clone(),
            gamma_lower_bound: (r.k % 2 == 0).then(|| gamma_lower_bound(p, r.k / 2)),
        })
        .collect();
    write_results(
        &config,
        &args.integrator,
        &results,
        LimitResults { moments: entries },
        started,
    )
}

pub fn cov(args: &CovArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut config = integrator_echo("cov", &args.integrator);
    config.p = vec![args.p1, args.p2];
    let cfg = integrator_config(&args.integrator);
    let result = with_workers(config.worker_count(), || {
        limiting_covariance(args.p1 as usize, args.p2 as usize, &cfg)
    })?;
    let rows = [result];
    write_results(
        &config,
        &args.integrator,
        &rows,
        CovResults {
            covariance: &rows[0],
        },
        started,
    )
}
