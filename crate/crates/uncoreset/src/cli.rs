//! File-based front end: ingestion, coreset building, verification, and
//! benchmark sweeps.
//!
//! Point files are JSON Lines (`{"id": 1, "locations": [[1.5], [2]]}`) or
//! CSV (`id,loc_index,x1..xd`), with coordinates kept exact: decimal
//! literals parse to exact rationals and non-decimal rationals round-trip as
//! `"p/q"` strings. Exit codes: 0 ok, 1 parse/consistency error, 2
//! unsupported family or dimension, 3 parameter out of range, 4 guarantee
//! violation (report still written).

use crate::coresets::{
    build_rc_disc, build_rc_sample, build_re_disc, build_re_sample, build_rq, rq_alpha,
    CoresetArtifact, CoresetKind, Method, MethodParams, SampleParams,
};
use crate::exact::{format_rat, parse_rat, rat_f64, Rat};
use crate::mergereduce::{MergeReduceParams, RoundEntry};
use crate::model::{PointId, UncertainPoint, UncertainPointSet};
use crate::ranges::{CoverConfig, FamilyDescriptor, FamilyKind};
use crate::verify::{
    measure_rc_error_with, measure_re_error_with, quantization_check_with, variance_report,
    ErrorReport,
};
use num_traits::ToPrimitive;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("unsupported family/dimension: {0}")]
    Unsupported(String),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("guarantee violation: {0}")]
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Unsupported(_) => 2,
            CliError::BadParameter(_) => 3,
            CliError::Violation(_) => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Jsonl,
    Csv,
}

pub fn detect_format(path: &Path) -> FileFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => FileFormat::Csv,
        _ => FileFormat::Jsonl,
    }
}

fn coord_from_json(v: &serde_json::Value) -> Result<Rat, CliError> {
    match v {
        serde_json::Value::Number(n) => {
            parse_rat(&n.to_string()).map_err(|e| CliError::Parse(e.to_string()))
        }
        serde_json::Value::String(s) => {
            parse_rat(s).map_err(|e| CliError::Parse(e.to_string()))
        }
        other => Err(CliError::Parse(format!("coordinate must be a number, got {other}"))),
    }
}

pub fn read_points_jsonl(text: &str) -> Result<UncertainPointSet, CliError> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::Parse(format!("line {}: {e}", lineno + 1)))?;
        let obj = v
            .as_object()
            .ok_or_else(|| CliError::Parse(format!("line {}: expected an object", lineno + 1)))?;
        for key in obj.keys() {
            if key != "id" && key != "locations" {
                return Err(CliError::Parse(format!(
                    "line {}: unknown field `{key}` (uniform 1/k probabilities are fixed; weights are not accepted)",
                    lineno + 1
                )));
            }
        }
        let id = obj
            .get("id")
            .and_then(serde_json::Value::as_i64)
            .ok_or_else(|| CliError::Parse(format!("line {}: missing integer id", lineno + 1)))?;
        let locs = obj
            .get("locations")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| CliError::Parse(format!("line {}: missing locations", lineno + 1)))?;
        let mut locations = Vec::with_capacity(locs.len());
        for loc in locs {
            let coords = loc.as_array().ok_or_else(|| {
                CliError::Parse(format!("line {}: location must be an array", lineno + 1))
            })?;
            locations.push(coords.iter().map(coord_from_json).collect::<Result<Vec<_>, _>>()?);
        }
        points.push(UncertainPoint::new(id, locations));
    }
    UncertainPointSet::new(points).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn write_points_jsonl(p: &UncertainPointSet) -> String {
    let mut out = String::new();
    for pt in p.points() {
        let locs: Vec<String> = pt
            .locations
            .iter()
            .map(|loc| {
                let coords: Vec<String> = loc
                    .iter()
                    .map(|c| {
                        let s = format_rat(c);
                        if s.contains('/') {
                            format!("\"{s}\"")
                        } else {
                            s
                        }
                    })
                    .collect();
                format!("[{}]", coords.join(","))
            })
            .collect();
        let _ = writeln!(out, "{{\"id\":{},\"locations\":[{}]}}", pt.id, locs.join(","));
    }
    out
}

pub fn read_points_csv(text: &str) -> Result<UncertainPointSet, CliError> {
    let mut rows: Vec<(PointId, usize, Vec<Rat>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("id,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(CliError::Parse(format!("line {}: need id,loc_index,coords", lineno + 1)));
        }
        let id: PointId = fields[0]
            .trim()
            .parse()
            .map_err(|_| CliError::Parse(format!("line {}: bad id", lineno + 1)))?;
        let loc_index: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| CliError::Parse(format!("line {}: bad loc_index", lineno + 1)))?;
        let coords = fields[2..]
            .iter()
            .map(|s| parse_rat(s).map_err(|e| CliError::Parse(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((id, loc_index, coords));
    }
    rows.sort_by_key(|(id, j, _)| (*id, *j));
    let mut points: Vec<UncertainPoint> = Vec::new();
    for (id, _, coords) in rows {
        match points.last_mut() {
            Some(last) if last.id == id => last.locations.push(coords),
            _ => points.push(UncertainPoint::new(id, vec![coords])),
        }
    }
    UncertainPointSet::new(points).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn write_points_csv(p: &UncertainPointSet) -> String {
    let mut out = String::from("id,loc_index");
    for i in 1..=p.dim() {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for pt in p.points() {
        for (j, loc) in pt.locations.iter().enumerate() {
            let _ = write!(out, "{},{}", pt.id, j);
            for c in loc {
                let _ = write!(out, ",{}", format_rat(c));
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_points(path: &Path) -> Result<UncertainPointSet, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    match detect_format(path) {
        FileFormat::Jsonl => read_points_jsonl(&text),
        FileFormat::Csv => read_points_csv(&text),
    }
}

pub fn write_points(path: &Path, p: &UncertainPointSet) -> Result<(), CliError> {
    let text = match detect_format(path) {
        FileFormat::Jsonl => write_points_jsonl(p),
        FileFormat::Csv => write_points_csv(p),
    };
    fs::write(path, text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Everything a command needs, resolved from flags. `UNCORESET_SEED`
/// overrides `seed` when set.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    pub coreset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub kind: CoresetKind,
    pub method: Method,
    pub family: FamilyKind,
    pub dim: usize,
    pub eps: f64,
    pub eps_prime: f64,
    pub delta: f64,
    pub c_samp: f64,
    pub c_size: f64,
    pub c_disc: f64,
    pub c_part: Option<f64>,
    pub beta: u32,
    pub seed: u64,
    pub budget: usize,
    pub eps_list: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::new(),
            coreset: None,
            output: None,
            kind: CoresetKind::Re,
            method: Method::Discrepancy,
            family: FamilyKind::HalfLine,
            dim: 1,
            eps: 0.1,
            eps_prime: 0.1,
            delta: 0.1,
            c_samp: 1.0,
            c_size: 1.0,
            c_disc: 4.0,
            c_part: None,
            beta: 2,
            seed: 0,
            budget: 100_000,
            eps_list: Vec::new(),
            methods: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn effective_seed(&self) -> u64 {
        match std::env::var("UNCORESET_SEED") {
            Ok(v) => v.parse().unwrap_or(self.seed),
            Err(_) => self.seed,
        }
    }

    fn family_descriptor(&self) -> Result<FamilyDescriptor, CliError> {
        match self.family {
            FamilyKind::HalfLine | FamilyKind::Interval if self.dim == 1 => {
                Ok(FamilyDescriptor::new(self.family, 1))
            }
            FamilyKind::Rect if self.dim >= 1 => Ok(FamilyDescriptor::rect(self.dim)),
            _ => Err(CliError::Unsupported(format!(
                "family {} in dimension {}",
                self.family, self.dim
            ))),
        }
    }

    fn check_supported(&self, f: &FamilyDescriptor) -> Result<(), CliError> {
        let rc_like = matches!(self.kind, CoresetKind::Rc);
        if rc_like
            && self.method == Method::Discrepancy
            && f.kind == FamilyKind::Rect
            && f.dim > 2
        {
            return Err(CliError::Unsupported(format!(
                "threshold-count reduction for rectangles needs dimension <= 2, got {}",
                f.dim
            )));
        }
        Ok(())
    }

    fn check_eps(&self) -> Result<(), CliError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(CliError::BadParameter(format!("eps = {}", self.eps)));
        }
        if self.kind == CoresetKind::Rq && !(self.eps_prime > 0.0 && self.eps_prime < 0.5) {
            return Err(CliError::BadParameter(format!("eps' = {}", self.eps_prime)));
        }
        Ok(())
    }

    fn merge_params(&self, seed: u64) -> MergeReduceParams {
        MergeReduceParams {
            beta: self.beta,
            gamma: None,
            omega: None,
            c_part: self.c_part,
            c_size: self.c_size,
            seed,
        }
    }

    fn cover_config(&self) -> CoverConfig {
        CoverConfig { budget: self.budget, ..CoverConfig::default() }
    }
}

#[derive(serde::Serialize)]
struct LedgerJson {
    rounds: Vec<RoundEntry>,
    #[serde(with = "crate::exact::serde_rat")]
    bound_sum: Rat,
    #[serde(with = "crate::exact::serde_rat")]
    error_sum: Rat,
}

#[derive(serde::Serialize)]
struct BuildMetadata {
    kind: CoresetKind,
    method: Method,
    family: FamilyKind,
    dim: usize,
    n: usize,
    k: usize,
    coreset_size: usize,
    eps: f64,
    eps_prime: Option<f64>,
    delta: Option<f64>,
    seed: u64,
    trivial: bool,
    rq_alpha: Option<f64>,
    rq_eps_measured: Option<String>,
    lifting: Option<crate::lifting::LiftingStats>,
    ledger: LedgerJson,
}

fn artifact_metadata(a: &CoresetArtifact, p: &UncertainPointSet) -> String {
    let meta = BuildMetadata {
        kind: a.kind,
        method: a.method,
        family: a.family.kind,
        dim: a.family.dim,
        n: p.len(),
        k: p.k(),
        coreset_size: a.subset.len(),
        eps: a.eps,
        eps_prime: a.rq.as_ref().map(|r| r.eps_prime),
        delta: a.sample.as_ref().map(|s| s.delta),
        seed: a.seed,
        trivial: a.trivial,
        rq_alpha: a.rq.as_ref().map(|r| r.alpha),
        rq_eps_measured: a.rq.as_ref().map(|r| format_rat(&r.eps_measured)),
        lifting: a.lifting.clone(),
        ledger: LedgerJson {
            bound_sum: a.ledger.iter().map(|e| e.bound.clone()).sum(),
            error_sum: a.ledger.iter().map(|e| e.error.clone()).sum(),
            rounds: a.ledger.clone(),
        },
    };
    serde_json::to_string_pretty(&meta).expect("serializable metadata")
}

fn build_artifact(
    p: &UncertainPointSet,
    cfg: &RunConfig,
    eps: f64,
    method: Method,
    seed: u64,
) -> Result<CoresetArtifact, CliError> {
    let f = cfg.family_descriptor()?;
    cfg.check_supported(&f)?;
    let sp = SampleParams { delta: cfg.delta, c_samp: cfg.c_samp };
    let mrp = cfg.merge_params(seed);
    let to_cli = |e: crate::coresets::CoresetError| match e {
        crate::coresets::CoresetError::BadEpsilon(x) => {
            CliError::BadParameter(format!("eps = {x}"))
        }
        crate::coresets::CoresetError::BadDelta(x) => {
            CliError::BadParameter(format!("delta = {x}"))
        }
        crate::coresets::CoresetError::BadEpsPrime(x) => {
            CliError::BadParameter(format!("eps' = {x}"))
        }
        crate::coresets::CoresetError::MergeReduce(m) => CliError::Unsupported(m.to_string()),
        crate::coresets::CoresetError::Verify(v) => CliError::Parse(v.to_string()),
    };
    match (cfg.kind, method) {
        (CoresetKind::Re, Method::Sample) => {
            build_re_sample(p, &f, eps, &sp, seed).map_err(to_cli)
        }
        (CoresetKind::Re, Method::Discrepancy) => {
            build_re_disc(p, &f, eps, &mrp).map_err(to_cli)
        }
        (CoresetKind::Rc, Method::Sample) => {
            build_rc_sample(p, &f, eps, &sp, seed).map_err(to_cli)
        }
        (CoresetKind::Rc, Method::Discrepancy) => {
            build_rc_disc(p, &f, eps, &mrp).map_err(to_cli)
        }
        (CoresetKind::Rq, Method::Sample) => {
            build_rq(p, &f, eps, cfg.eps_prime, &MethodParams::Sample(sp), seed).map_err(to_cli)
        }
        (CoresetKind::Rq, Method::Discrepancy) => {
            build_rq(p, &f, eps, cfg.eps_prime, &MethodParams::Discrepancy(mrp), seed)
                .map_err(to_cli)
        }
    }
}

/// Builds a coreset file plus a JSON metadata sidecar (`<output>.meta.json`).
pub fn cmd_build(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_eps()?;
    let f = cfg.family_descriptor()?;
    cfg.check_supported(&f)?;
    let p = read_points(&cfg.input)?;
    if p.dim() != cfg.dim {
        return Err(CliError::Parse(format!(
            "input dimension {} does not match --dim {}",
            p.dim(),
            cfg.dim
        )));
    }
    let seed = cfg.effective_seed();
    let artifact = build_artifact(&p, cfg, cfg.eps, cfg.method, seed)?;
    let out = cfg.output.clone().ok_or_else(|| CliError::Parse("missing output path".into()))?;
    write_points(&out, &artifact.subset)?;
    let meta_path = out.with_extension(format!(
        "{}.meta.json",
        out.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&meta_path, artifact_metadata(&artifact, &p))
        .map_err(|e| CliError::Parse(format!("{}: {e}", meta_path.display())))?;
    println!(
        "built {} coreset: {} of {} points -> {}",
        match cfg.kind {
            CoresetKind::Re => "expectation",
            CoresetKind::Rc => "threshold-count",
            CoresetKind::Rq => "quantile",
        },
        artifact.subset.len(),
        p.len(),
        out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct VerifyReportJson {
    kind: CoresetKind,
    family: FamilyKind,
    dim: usize,
    n: usize,
    k: usize,
    coreset_size: usize,
    eps_nominal: f64,
    max_re_error: String,
    re_argmax: Option<String>,
    sup_rc_error: String,
    rc_argmax: Option<String>,
    quantization: Option<QuantizationJson>,
    variance: Option<VarianceJson>,
    pass: bool,
    details: Vec<DetailJson>,
}

#[derive(serde::Serialize)]
struct QuantizationJson {
    eps_prime: f64,
    alpha: f64,
    pass: bool,
    pointwise_pass: bool,
    worst: Option<String>,
}

#[derive(serde::Serialize)]
struct VarianceJson {
    range: String,
    exact: String,
    decomposed: String,
    bound: String,
    within_bound: bool,
    groups: Vec<(usize, usize, String)>,
}

#[derive(serde::Serialize)]
struct DetailJson {
    range: String,
    error: String,
    tau: Option<String>,
}

fn details_json(rep: &ErrorReport, cap: usize) -> Vec<DetailJson> {
    rep.details
        .iter()
        .take(cap)
        .map(|d| DetailJson {
            range: d.range.to_string(),
            error: format_rat(&d.error),
            tau: d.tau.as_ref().map(format_rat),
        })
        .collect()
}

/// Verifies a coreset file against its original: exact measured errors, the
/// quantization verdict for quantile coresets, and the variance table. Exit
/// 4 when the nominal guarantee is violated; the report is written first.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.check_eps()?;
    let f = cfg.family_descriptor()?;
    let p = read_points(&cfg.input)?;
    let coreset_path =
        cfg.coreset.clone().ok_or_else(|| CliError::Parse("missing coreset path".into()))?;
    let t = read_points(&coreset_path)?;
    if t.k() != p.k() || t.dim() != p.dim() {
        return Err(CliError::Parse(format!(
            "coreset shape (k={}, d={}) differs from original (k={}, d={})",
            t.k(),
            t.dim(),
            p.k(),
            p.dim()
        )));
    }
    for pt in t.points() {
        match p.position_of(pt.id) {
            None => {
                return Err(CliError::Parse(format!(
                    "coreset point {} does not exist in the original set",
                    pt.id
                )))
            }
            Some(pos) if &p.points()[pos] != pt => {
                return Err(CliError::Parse(format!(
                    "coreset point {} has locations differing from the original",
                    pt.id
                )))
            }
            Some(_) => {}
        }
    }
    let cover_cfg = cfg.cover_config();
    let re = measure_re_error_with(&p, &t, &f, cover_cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    let rc = measure_rc_error_with(&p, &t, &f, cover_cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    let quant = if cfg.kind == CoresetKind::Rq {
        let alpha = rq_alpha(
            re.max_re_error.to_f64().unwrap_or(f64::NAN),
            cfg.eps_prime,
            t.len(),
        );
        let rep = quantization_check_with(
            &p,
            &t,
            &f,
            &rat_f64(cfg.eps_prime),
            &rat_f64(alpha),
            cover_cfg,
        )
        .map_err(|e| CliError::Parse(e.to_string()))?;
        Some((alpha, rep))
    } else {
        None
    };
    let variance = rc.rc_argmax.as_ref().map(|(r, _)| {
        let rep = variance_report(&t, r, &rc.sup_rc_error).expect("dimensions verified");
        VarianceJson {
            range: r.to_string(),
            exact: format_rat(&rep.exact),
            decomposed: format_rat(&rep.decomposed),
            bound: format_rat(&rep.bound),
            within_bound: rep.within_bound,
            groups: rep
                .groups
                .iter()
                .map(|g| (g.index, g.size, format_rat(&g.variance_contrib)))
                .collect(),
        }
    });

    let eps_rat = rat_f64(cfg.eps);
    let pass = match cfg.kind {
        CoresetKind::Re => re.max_re_error <= eps_rat,
        CoresetKind::Rc => rc.sup_rc_error <= eps_rat,
        CoresetKind::Rq => {
            re.max_re_error <= eps_rat && quant.as_ref().is_some_and(|(_, q)| q.pass)
        }
    };
    let report = VerifyReportJson {
        kind: cfg.kind,
        family: f.kind,
        dim: f.dim,
        n: p.len(),
        k: p.k(),
        coreset_size: t.len(),
        eps_nominal: cfg.eps,
        max_re_error: format_rat(&re.max_re_error),
        re_argmax: re.re_argmax.as_ref().map(ToString::to_string),
        sup_rc_error: format_rat(&rc.sup_rc_error),
        rc_argmax: rc.rc_argmax.as_ref().map(|(r, tau)| format!("{r} @ tau = {}", format_rat(tau))),
        quantization: quant.map(|(alpha, q)| QuantizationJson {
            eps_prime: cfg.eps_prime,
            alpha,
            pass: q.pass,
            pointwise_pass: q.pointwise_pass,
            worst: q.worst.map(|w| {
                format!("{} @ tau = {} (distance {})", w.range, format_rat(&w.tau), format_rat(&w.best_distance))
            }),
        }),
        variance,
        pass,
        details: details_json(&re, 64),
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable report");
    match &cfg.output {
        Some(path) => fs::write(path, &text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "measured error exceeds eps = {} (re {}, rc {})",
            cfg.eps,
            format_rat(&re.max_re_error),
            format_rat(&rc.sup_rc_error),
        )))
    }
}

/// Sweeps epsilon values and methods, emitting one CSV row per build:
/// `n,k,d,family,method,eps_nominal,coreset_size,eps_measured,wall_ms,ledger_sum`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.eps_list.is_empty() {
        return Err(CliError::BadParameter("empty eps sweep".into()));
    }
    let methods = if cfg.methods.is_empty() {
        vec![Method::Sample, Method::Discrepancy]
    } else {
        cfg.methods.clone()
    };
    let f = cfg.family_descriptor()?;
    let p = read_points(&cfg.input)?;
    let seed = cfg.effective_seed();
    let cover_cfg = cfg.cover_config();
    let mut csv =
        String::from("n,k,d,family,method,eps_nominal,coreset_size,eps_measured,wall_ms,ledger_sum\n");
    for &eps in &cfg.eps_list {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CliError::BadParameter(format!("eps = {eps}")));
        }
        for &method in &methods {
            let start = Instant::now();
            let artifact = build_artifact(&p, cfg, eps, method, seed)?;
            let wall_ms = start.elapsed().as_millis();
            let measured = match cfg.kind {
                CoresetKind::Rc => {
                    measure_rc_error_with(&p, &artifact.subset, &f, cover_cfg)
                        .map_err(|e| CliError::Parse(e.to_string()))?
                        .sup_rc_error
                }
                _ => {
                    measure_re_error_with(&p, &artifact.subset, &f, cover_cfg)
                        .map_err(|e| CliError::Parse(e.to_string()))?
                        .max_re_error
                }
            };
            let ledger_sum: Rat = artifact.ledger.iter().map(|e| e.bound.clone()).sum();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                p.len(),
                p.k(),
                p.dim(),
                f.kind,
                match method {
                    Method::Sample => "sample",
                    Method::Discrepancy => "discrepancy",
                },
                eps,
                artifact.subset.len(),
                measured.to_f64().unwrap_or(f64::NAN),
                wall_ms,
                ledger_sum.to_f64().unwrap_or(0.0),
            );
        }
    }
    match &cfg.output {
        Some(path) => fs::write(path, &csv)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}
