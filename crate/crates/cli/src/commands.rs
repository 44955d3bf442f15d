use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmchan::channel::{generate_in_stream, realization_to_taps_with, ChannelRealization, Cluster};
use mmchan::metrics::{
    cluster_peak_to_average, coherence_bandwidth, frequency_response, rms_delay_spread,
};
use mmchan::pipeline::{
    default_noise_floor, extract_parameters_with, fit_report, partition_clusters, realization_parameters,
    threshold_taps, FitOutcome, FitReport, ParameterSamples, CANDIDATE_FAMILIES,
};
use mmchan::profiles::{
    builtin_profile, builtin_target, calibrate_profile, CalibrationOptions, Parameter, ProfileId,
    QuartileTarget, ScenarioProfile,
};
use mmchan::stats::{ecdf_points, mean, quartiles};
use mmchan::taps::{CaptureMeta, TapSeries, BEAM_PATTERNS};
use mmchan::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{CalibrateArgs, FitArgs, GenerateArgs, MetricsArgs, OutputFormat, ValidateArgs};
use crate::error::CliError;
use crate::formats::{
    fmt_f64, parse_profile, profile_json, read_to_string, read_traces, to_json, trace_line, NamedParams,
    RealizationRecord, RealizationsFile, SpecOut, SCHEMA_VERSION,
};
use crate::manifest::RunManifest;

/// Realizations generated per parallel batch.
const CHUNK: u64 = 4096;

/// A built-in id such as `tunnel-7`, or a path to a profile JSON file.
pub fn load_profile(name: &str) -> Result<ScenarioProfile, CliError> {
    if name.ends_with(".json") || Path::new(name).is_file() {
        return parse_profile(&read_to_string(Path::new(name))?);
    }
    let id: ProfileId = name.parse()?;
    Ok(builtin_profile(id)?.clone())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Metadata for synthetic capture `i`: 32 beams per location, as in a
/// beacon burst.
pub fn synthetic_meta(profile: &ScenarioProfile, i: u64) -> CaptureMeta {
    let beams = BEAM_PATTERNS as u64;
    CaptureMeta {
        location: format!("synthetic-{}", i / beams),
        beam_id: (i % beams) as u8,
        scenario: profile.id.scenario.to_string(),
        beamwidth_deg: profile.id.beamwidth_deg as f64,
        capture_index: i,
    }
}

/// Exported taps of realization `i` of `seed`.
pub fn synthetic_capture(profile: &ScenarioProfile, seed: u64, i: u64) -> mmchan::Result<TapSeries> {
    let r = generate_in_stream(profile, seed, i)?;
    realization_to_taps_with(&r, profile.tap_grid, synthetic_meta(profile, i))
}

/// Writes `n` captures as trace JSON lines. The bytes depend only on the
/// profile, `n` and `seed`.
pub fn write_taps_corpus(profile: &ScenarioProfile, n: u64, seed: u64, out: &mut impl Write) -> Result<(), CliError> {
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let lines = (start..end)
            .into_par_iter()
            .map(|i| synthetic_capture(profile, seed, i).map(|t| trace_line(&t)))
            .collect::<mmchan::Result<Vec<_>>>()?;
        for line in lines {
            writeln!(out, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
        }
        start = end;
    }
    Ok(())
}

fn realizations(profile: &ScenarioProfile, seed: u64, range: std::ops::Range<u64>) -> mmchan::Result<Vec<ChannelRealization>> {
    range
        .into_par_iter()
        .map(|i| generate_in_stream(profile, seed, i))
        .collect()
}

/// Writes realizations `0..n` of `seed` as one JSON document.
pub fn write_realizations_json(profile: &ScenarioProfile, n: u64, seed: u64, out: &mut impl Write) -> Result<(), CliError> {
    let file = RealizationsFile {
        schema_version: SCHEMA_VERSION,
        profile: profile.id.to_string(),
        seed,
        tap_grid: profile.tap_grid,
        realizations: realizations(profile, seed, 0..n)?
            .iter()
            .map(RealizationRecord::from_realization)
            .collect(),
    };
    writeln!(out, "{}", to_json(&file)).map_err(|e| CliError::Io(e.to_string()))
}

pub fn generate(args: &GenerateArgs, argv: &[String]) -> Result<(), CliError> {
    let profile = load_profile(&args.profile)?;
    let mut out = create(&args.out)?;
    match args.format {
        OutputFormat::TapsJsonl => write_taps_corpus(&profile, args.n, args.seed, &mut out)?,
        OutputFormat::RealizationsJson => write_realizations_json(&profile, args.n, args.seed, &mut out)?,
    }
    out.flush().map_err(|e| CliError::io(&args.out, e))?;

    let mut manifest = RunManifest::new("generate", argv);
    manifest.profile_ids.push(profile.id.to_string());
    manifest.seed = Some(args.seed);
    manifest.counts.insert("realizations".into(), args.n);
    manifest.outputs.push(display(&args.out));
    manifest.write_for(&args.out)?;
    println!("wrote {} realizations of {} to {}", args.n, profile.id, args.out.display());
    Ok(())
}

/// Thresholded and partitioned captures; captures with no tap above the
/// floor are dropped.
pub fn cluster_captures(
    traces: &[TapSeries],
    noise_floor: Option<f64>,
    gap_threshold: f64,
) -> Result<Vec<(CaptureMeta, Vec<Cluster>)>, CliError> {
    let clustered = traces
        .par_iter()
        .map(|t| {
            let floor = noise_floor.unwrap_or_else(|| default_noise_floor(t));
            match threshold_taps(t, floor) {
                Ok(kept) => Ok(Some((kept.meta.clone(), partition_clusters(&kept, gap_threshold)?))),
                Err(Error::EmptySeries) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<mmchan::Result<Vec<_>>>()?;
    Ok(clustered.into_iter().flatten().collect())
}

#[derive(Serialize)]
struct CandidateOut {
    family: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<NamedParams>,
    ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct ParameterOut {
    parameter: &'static str,
    n_samples: usize,
    quartiles: Option<[f64; 3]>,
    status: &'static str,
    chosen: Option<SpecOut>,
    ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    candidates: Vec<CandidateOut>,
}

#[derive(Serialize)]
struct IntraOut {
    n_samples: usize,
    quartiles: Option<[f64; 3]>,
}

#[derive(Serialize)]
struct ReportOut {
    schema_version: u32,
    input: String,
    scenario: String,
    beamwidth_deg: Option<f64>,
    captures: usize,
    dropped_captures: usize,
    gap_threshold: f64,
    noise_floor: Option<f64>,
    pooling: String,
    parameters: Vec<ParameterOut>,
    intra_path_delays: IntraOut,
}

fn parameter_out(report: &FitReport, parameter: Parameter) -> ParameterOut {
    let fit = report.get(parameter);
    let mut out = ParameterOut {
        parameter: parameter.as_str(),
        n_samples: fit.n_samples,
        quartiles: fit.quartiles,
        status: "selected",
        chosen: None,
        ks: None,
        message: None,
        candidates: Vec::new(),
    };
    match &fit.outcome {
        FitOutcome::Selected { best, scores } => {
            out.chosen = Some(SpecOut::new(*best));
            out.candidates = scores
                .iter()
                .map(|s| CandidateOut {
                    family: s.family.as_str(),
                    params: s.fit.as_ref().ok().map(|f| NamedParams(*f)),
                    ks: s.score,
                    error: s.fit.as_ref().err().map(ToString::to_string),
                })
                .collect();
            out.ks = scores
                .iter()
                .find(|s| s.fit.as_ref().ok() == Some(best))
                .and_then(|s| s.score);
        }
        FitOutcome::InsufficientData { needed, got } => {
            out.status = "insufficient_data";
            out.message = Some(format!("need at least {needed} samples, got {got}"));
        }
        FitOutcome::Failed(e) => {
            out.status = "failed";
            out.message = Some(e.to_string());
        }
    }
    out
}

fn common<T: PartialEq + Clone>(mut values: impl Iterator<Item = T>) -> Option<T> {
    let first = values.next()?;
    values.all(|v| v == first).then_some(first)
}

fn csv_path(args: &FitArgs) -> PathBuf {
    args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"))
}

pub fn fit(args: &FitArgs, argv: &[String]) -> Result<(), CliError> {
    if !(args.gap_threshold > 0.0) {
        return Err(CliError::Input(format!("gap threshold {} must be positive", args.gap_threshold)));
    }
    let traces = read_traces(&args.input)?;
    let clustered = cluster_captures(&traces, args.noise_floor, args.gap_threshold)?;
    if clustered.is_empty() {
        return Err(CliError::Input("no capture has a tap above the noise floor".into()));
    }
    let samples = extract_parameters_with(&clustered, args.pooling.into());
    let mut report = fit_report(&samples, &CANDIDATE_FAMILIES);
    report.scenario = common(traces.iter().map(|t| t.meta.scenario.clone())).unwrap_or_else(|| "mixed".into());
    let beamwidth = common(traces.iter().map(|t| t.meta.beamwidth_deg));
    report.beamwidth_deg = beamwidth.unwrap_or(f64::NAN);

    let out = ReportOut {
        schema_version: SCHEMA_VERSION,
        input: display(&args.input),
        scenario: report.scenario.clone(),
        beamwidth_deg: beamwidth,
        captures: clustered.len(),
        dropped_captures: traces.len() - clustered.len(),
        gap_threshold: args.gap_threshold,
        noise_floor: args.noise_floor,
        pooling: args.pooling.to_string(),
        parameters: Parameter::ALL.iter().map(|&p| parameter_out(&report, p)).collect(),
        intra_path_delays: IntraOut {
            n_samples: report.intra_path_delay_count,
            quartiles: report.intra_path_delay_quartiles,
        },
    };
    write_all(&args.out, &(to_json(&out) + "\n"))?;
    let csv = csv_path(args);
    write_ecdf_csv(&csv, &samples)?;

    print_fit_table(&report);
    let mut manifest = RunManifest::new("fit", argv);
    manifest.counts.insert("captures".into(), traces.len() as u64);
    manifest.tolerances.insert("gap_threshold".into(), args.gap_threshold);
    if let Some(floor) = args.noise_floor {
        manifest.tolerances.insert("noise_floor".into(), floor);
    }
    manifest.inputs.push(display(&args.input));
    manifest.outputs.extend([display(&args.out), display(&csv)]);
    manifest.write_for(&args.out)?;
    Ok(())
}

fn write_ecdf_csv(path: &Path, samples: &ParameterSamples) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["parameter", "value", "empirical_cdf"]).map_err(io)?;
    let columns = Parameter::ALL
        .iter()
        .map(|&p| (p.as_str(), samples.get(p)))
        .chain([("intra_path_delay", samples.intra_path_delays.as_slice())]);
    for (name, values) in columns {
        for (x, f) in ecdf_points(values) {
            w.write_record([name, &fmt_f64(x), &fmt_f64(f)]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn print_fit_table(report: &FitReport) {
    println!("{:<20} {:>9}  {:<16} {:>8}  quartiles", "parameter", "samples", "family", "ks");
    for fit in &report.parameters {
        let (family, ks) = match &fit.outcome {
            FitOutcome::Selected { best, scores } => {
                let ks = scores.iter().filter_map(|s| s.score).fold(f64::INFINITY, f64::min);
                (best.family().to_string(), format!("{ks:.5}"))
            }
            FitOutcome::InsufficientData { .. } => ("insufficient".into(), "-".into()),
            FitOutcome::Failed(_) => ("failed".into(), "-".into()),
        };
        let q = fit
            .quartiles
            .map(|q| format!("{:.4e} {:.4e} {:.4e}", q[0], q[1], q[2]))
            .unwrap_or_default();
        println!("{:<20} {:>9}  {:<16} {:>8}  {q}", fit.parameter, fit.n_samples, family, ks);
    }
}

/// Parameters of realizations `0..n` of `seed`, read directly from the
/// generated clusters.
pub fn simulate_parameters(profile: &ScenarioProfile, n: u64, seed: u64) -> mmchan::Result<ParameterSamples> {
    let mut out = ParameterSamples::default();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch = realization_parameters(&realizations(profile, seed, start..end)?);
        out.num_clusters.extend(batch.num_clusters);
        out.intercluster_delays.extend(batch.intercluster_delays);
        out.cluster_amplitudes.extend(batch.cluster_amplitudes);
        out.paths_per_cluster.extend(batch.paths_per_cluster);
        out.path_amplitudes.extend(batch.path_amplitudes);
        out.intra_path_delays.extend(batch.intra_path_delays);
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileCheck {
    pub parameter: &'static str,
    pub quartile: &'static str,
    pub target: f64,
    pub simulated: Option<f64>,
    /// Relative error, or absolute difference for counts.
    pub error: Option<f64>,
    pub metric: &'static str,
    pub pass: bool,
}

/// Compares simulated quartiles with the reference quartiles of `id`.
/// Counts pass within `count_tolerance` in absolute terms, everything else
/// within `tolerance` relative error.
pub fn check_quartiles(
    id: ProfileId,
    samples: &ParameterSamples,
    tolerance: f64,
    count_tolerance: f64,
) -> Result<Vec<QuartileCheck>, CliError> {
    let mut rows = Vec::new();
    for p in Parameter::ALL {
        let target = builtin_target(id, p)
            .ok_or_else(|| CliError::Input(format!("no reference quartiles for {id}")))?;
        let simulated = quartiles(samples.get(p));
        for (i, name) in ["q1", "q2", "q3"].into_iter().enumerate() {
            let t = target.as_array()[i];
            let s = simulated.map(|q| q[i]);
            let (error, metric, limit) = if p.is_count() {
                (s.map(|s| (s - t).abs()), "absolute", count_tolerance)
            } else {
                (s.map(|s| ((s - t) / t).abs()), "relative", tolerance)
            };
            rows.push(QuartileCheck {
                parameter: p.as_str(),
                quartile: name,
                target: t,
                simulated: s,
                error,
                metric,
                pass: error.is_some_and(|e| e <= limit),
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ValidationOut<'a> {
    schema_version: u32,
    profile: String,
    n: u64,
    seed: u64,
    tolerance: f64,
    count_tolerance: f64,
    pass: bool,
    checks: &'a [QuartileCheck],
}

pub fn validate(args: &ValidateArgs, argv: &[String]) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Input("--n must be positive".into()));
    }
    if !(args.tolerance >= 0.0 && args.count_tolerance >= 0.0) {
        return Err(CliError::Input("tolerances must be non-negative".into()));
    }
    let profile = load_profile(&args.profile)?;
    let samples = simulate_parameters(&profile, args.n, args.seed)?;
    let checks = check_quartiles(profile.id, &samples, args.tolerance, args.count_tolerance)?;
    let pass = checks.iter().all(|c| c.pass);

    println!(
        "{:<20} {:<3} {:>12} {:>12} {:>9}  result",
        "parameter", "q", "target", "simulated", "error"
    );
    for c in &checks {
        let fmt = |x: Option<f64>| x.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        let error = match (c.error, c.metric) {
            (Some(e), "relative") => format!("{:.1}%", 100.0 * e),
            (Some(e), _) => format!("{e:.2}"),
            (None, _) => "-".into(),
        };
        println!(
            "{:<20} {:<3} {:>12} {:>12} {:>9}  {}",
            c.parameter,
            c.quartile,
            format!("{:.4e}", c.target),
            fmt(c.simulated),
            error,
            if c.pass { "pass" } else { "FAIL" }
        );
    }

    if let Some(out) = &args.out {
        let report = ValidationOut {
            schema_version: SCHEMA_VERSION,
            profile: profile.id.to_string(),
            n: args.n,
            seed: args.seed,
            tolerance: args.tolerance,
            count_tolerance: args.count_tolerance,
            pass,
            checks: &checks,
        };
        write_all(out, &(to_json(&report) + "\n"))?;
        let mut manifest = RunManifest::new("validate", argv);
        manifest.profile_ids.push(profile.id.to_string());
        manifest.seed = Some(args.seed);
        manifest.counts.insert("realizations".into(), args.n);
        manifest.tolerances.insert("relative".into(), args.tolerance);
        manifest.tolerances.insert("count".into(), args.count_tolerance);
        manifest.outputs.push(display(out));
        manifest.write_for(out)?;
    }

    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Validation(format!(
            "{}: {failed} of {} quartiles outside tolerance",
            profile.id,
            checks.len()
        )));
    }
    Ok(())
}

/// Reads `{"parameter": [q1, q2, q3], ...}`.
pub fn parse_targets(text: &str) -> Result<BTreeMap<Parameter, QuartileTarget>, CliError> {
    let raw: BTreeMap<String, [f64; 3]> =
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("targets: {e}")))?;
    let mut out = BTreeMap::new();
    for (name, [q1, q2, q3]) in raw {
        let p: Parameter = name.parse()?;
        let ok = [q1, q2, q3].iter().all(|q| q.is_finite() && *q > 0.0) && q1 <= q2 && q2 <= q3;
        if !ok {
            return Err(CliError::Input(format!("targets: inconsistent {p} quartiles ({q1}, {q2}, {q3})")));
        }
        out.insert(
            p,
            QuartileTarget {
                q1,
                q2,
                q3,
                discretized: p.is_count(),
            },
        );
    }
    Ok(out)
}

pub fn calibrate(args: &CalibrateArgs, argv: &[String]) -> Result<(), CliError> {
    let id = ProfileId::new(args.scenario.parse()?, args.beamwidth);
    let targets = match &args.targets {
        Some(path) => parse_targets(&read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let profile = calibrate_profile(id, &targets)?;
    write_all(&args.out, &(profile_json(&profile) + "\n"))?;

    let mut manifest = RunManifest::new("calibrate", argv);
    manifest.profile_ids.push(id.to_string());
    manifest.seed = Some(CalibrationOptions::default().seed);
    manifest.tolerances.insert("residual".into(), args.threshold);
    if let Some(path) = &args.targets {
        manifest.inputs.push(display(path));
    }
    manifest.outputs.push(display(&args.out));
    manifest.write_for(&args.out)?;

    let mut over = Vec::new();
    for p in Parameter::ALL {
        let residual = profile.residuals.get(&p).copied().unwrap_or(f64::NAN);
        println!("{:<20} {:<60} residual {residual:.4}", p.as_str(), profile.spec(p).to_string());
        if !(residual <= args.threshold) {
            over.push(p.as_str());
        }
    }
    if !over.is_empty() {
        return Err(CliError::Validation(format!(
            "{id}: residual above {} for {}",
            args.threshold,
            over.join(", ")
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureMetrics {
    pub meta: CaptureMeta,
    pub rms_delay_spread: f64,
    pub coherence_bandwidth: f64,
    pub peak_to_average_mean: f64,
    pub peak_to_average_max: f64,
}

pub fn capture_metrics(
    taps: &TapSeries,
    bandwidth: f64,
    points: usize,
    threshold: f64,
    gap_threshold: f64,
) -> mmchan::Result<CaptureMetrics> {
    let response = frequency_response(taps, bandwidth, points)?;
    let ratios = cluster_peak_to_average(&partition_clusters(taps, gap_threshold)?);
    Ok(CaptureMetrics {
        meta: taps.meta.clone(),
        rms_delay_spread: rms_delay_spread(taps),
        coherence_bandwidth: coherence_bandwidth(&response, threshold)?,
        peak_to_average_mean: mean(&ratios).unwrap_or(1.0),
        peak_to_average_max: ratios.iter().copied().fold(1.0, f64::max),
    })
}

pub fn metrics(args: &MetricsArgs, argv: &[String]) -> Result<(), CliError> {
    let traces = read_traces(&args.input)?;
    let rows = traces
        .par_iter()
        .map(|t| capture_metrics(t, args.bandwidth, args.points, args.threshold, args.gap_threshold))
        .collect::<mmchan::Result<Vec<_>>>()?;

    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", args.out.display()));
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record([
        "capture_index",
        "location",
        "beam_id",
        "rms_delay_spread",
        "coherence_bandwidth",
        "peak_to_average_mean",
        "peak_to_average_max",
    ])
    .map_err(io)?;
    for r in &rows {
        w.write_record([
            r.meta.capture_index.to_string(),
            r.meta.location.clone(),
            r.meta.beam_id.to_string(),
            fmt_f64(r.rms_delay_spread),
            fmt_f64(r.coherence_bandwidth),
            fmt_f64(r.peak_to_average_mean),
            fmt_f64(r.peak_to_average_max),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(&args.out, e))?;

    let spreads: Vec<f64> = rows.iter().map(|r| r.rms_delay_spread).collect();
    let coherence: Vec<f64> = rows.iter().map(|r| r.coherence_bandwidth).collect();
    println!(
        "{} captures: mean RMS delay spread {:.4e} s, mean coherence bandwidth {:.4e} Hz (amplitude-only approximation)",
        rows.len(),
        mean(&spreads).unwrap_or(0.0),
        mean(&coherence).unwrap_or(0.0)
    );

    let mut manifest = RunManifest::new("metrics", argv);
    manifest.counts.insert("captures".into(), rows.len() as u64);
    manifest.tolerances.insert("bandwidth".into(), args.bandwidth);
    manifest.tolerances.insert("correlation_threshold".into(), args.threshold);
    manifest.tolerances.insert("gap_threshold".into(), args.gap_threshold);
    manifest.inputs.push(display(&args.input));
    manifest.outputs.push(display(&args.out));
    manifest.write_for(&args.out)?;
    Ok(())
}
