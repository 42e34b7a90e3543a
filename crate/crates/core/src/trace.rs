//! Per-iteration records, CSV persistence and run summaries.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::{fit_rate_from_trace, RateFit, RateModel};
use crate::error::{Error, Result};
use crate::objective::ProblemSpec;
use crate::solvers::SolverConfig;

pub const CSV_HEADER: &str = "k,fval,gap,gnorm,alpha,beta,step_norm,dist";

/// Measurements taken at iterate `x_k`, together with the step parameters
/// used to leave it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub fval: f64,
    /// `f(x_k) − f_*`; NaN when `f_*` is unknown.
    pub gap: f64,
    pub gnorm: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `‖x_k − x_{k−1}‖`.
    pub step_norm: f64,
    pub dist: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapTolerance,
    MaxIters,
    Stationary,
    Unknown,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GapTolerance => "gap_tolerance",
            StopReason::MaxIters => "max_iters",
            StopReason::Stationary => "stationary",
            StopReason::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub problem: Option<ProblemSpec>,
    pub config: Option<SolverConfig>,
    pub x0_seed: Option<u64>,
    pub stop_reason: StopReason,
    pub wall_ms: f64,
    /// Radius `R` around the solution assumed to contain every iterate, when
    /// a ball-local Lipschitz bound was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locality_radius: Option<f64>,
}

impl Default for TraceMeta {
    fn default() -> Self {
        TraceMeta {
            problem: None,
            config: None,
            x0_seed: None,
            stop_reason: StopReason::Unknown,
            wall_ms: 0.0,
            locality_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    records: Vec<IterationRecord>,
    pub meta: TraceMeta,
}

impl Trace {
    /// Fails on an empty record list or non-increasing `k`.
    pub fn new(records: Vec<IterationRecord>, meta: TraceMeta) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("trace has no records".into()));
        }
        if let Some(w) = records.windows(2).find(|w| w[1].k <= w[0].k) {
            return Err(Error::InvalidInput(format!(
                "trace iteration counters not strictly increasing ({} then {})",
                w[0].k, w[1].k
            )));
        }
        Ok(Trace { records, meta })
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace is nonempty")
    }
}

fn fmt_float(out: &mut String, v: f64) {
    // 17 significant digits: lossless for f64
    write!(out, "{v:.16e}").unwrap();
}

pub fn render_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        write!(out, "{}", r.k).unwrap();
        for v in [r.fval, r.gap, r.gnorm, r.alpha, r.beta, r.step_norm] {
            out.push(',');
            fmt_float(&mut out, v);
        }
        out.push(',');
        if let Some(d) = r.dist {
            fmt_float(&mut out, d);
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the CSV and its `<path>.meta.json` sidecar.
pub fn write_csv(trace: &Trace, path: &Path) -> Result<()> {
    write_atomic(path, render_csv(trace).as_bytes())?;
    let meta = serde_json::to_string_pretty(&trace.meta)? + "\n";
    write_atomic(&meta_path(path), meta.as_bytes())
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<IterationRecord>> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_owned(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((_, h)) => return Err(parse_err(1, format!("unexpected header `{h}`"))),
        None => return Err(parse_err(1, "empty file".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(parse_err(lineno, format!("expected 8 fields, found {}", fields.len())));
        }
        let k = fields[0]
            .parse::<usize>()
            .map_err(|e| parse_err(lineno, format!("k: {e}")))?;
        let mut nums = [0.0; 6];
        for (slot, (name, raw)) in nums
            .iter_mut()
            .zip(["fval", "gap", "gnorm", "alpha", "beta", "step_norm"].iter().zip(&fields[1..7]))
        {
            *slot = raw.parse::<f64>().map_err(|e| parse_err(lineno, format!("{name}: {e}")))?;
        }
        let dist = match fields[7] {
            "" => None,
            raw => Some(raw.parse::<f64>().map_err(|e| parse_err(lineno, format!("dist: {e}")))?),
        };
        records.push(IterationRecord {
            k,
            fval: nums[0],
            gap: nums[1],
            gnorm: nums[2],
            alpha: nums[3],
            beta: nums[4],
            step_norm: nums[5],
            dist,
        });
    }
    Ok(records)
}

/// Reads a trace CSV; metadata comes from the sidecar when it exists.
pub fn read_csv(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_csv(&text, path)?;
    let mp = meta_path(path);
    let meta = if mp.exists() {
        let raw = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        serde_json::from_str(&raw)?
    } else {
        TraceMeta::default()
    };
    Trace::new(records, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_gap: f64,
    pub final_dist: Option<f64>,
    pub iterations: usize,
    pub min_beta: f64,
    pub max_beta: f64,
    pub linear_rate: Option<RateFit>,
    pub power_rate: Option<RateFit>,
}

/// Aggregates over the recorded rows only, so the result depends on
/// `record_every` only through which rows were kept.
pub fn summarize(trace: &Trace) -> Summary {
    let last = trace.last();
    let (min_beta, max_beta) = trace
        .records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.beta), hi.max(r.beta)));
    Summary {
        final_gap: last.gap,
        final_dist: last.dist,
        iterations: last.k,
        min_beta,
        max_beta,
        linear_rate: fit_rate_from_trace(trace, RateModel::Linear).ok(),
        power_rate: fit_rate_from_trace(trace, RateModel::Power).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(k: usize) -> IterationRecord {
        IterationRecord {
            k,
            fval: 1.5,
            gap: 1.5,
            gnorm: 0.1,
            alpha: 0.98,
            beta: 0.0,
            step_norm: 0.0,
            dist: None,
        }
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(Trace::new(vec![], TraceMeta::default()).is_err());
        assert!(Trace::new(vec![rec(1), rec(1)], TraceMeta::default()).is_err());
    }

    #[test]
    fn single_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = Trace::new(vec![rec(0)], TraceMeta::default()).unwrap();
        write_csv(&t, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, t);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,fval,gap,gnorm,alpha,beta,step_norm,dist\n0,"));
        assert!(text.ends_with(",\n"));
        assert!(!text.contains('\r'));
        assert!(meta_path(&path).exists());
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{CSV_HEADER}\n0,1,1,1,1,1,1,\n1,1,oops,1,1,1,1,\n");
        match parse_csv(&text, Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("k,x\n", Path::new("x.csv")).is_err());
    }

    #[test]
    fn missing_file_carries_path() {
        let err = read_csv(Path::new("/nonexistent/dir/t.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/t.csv"));
    }

    #[test]
    fn summary_of_single_and_zero_beta() {
        let t = Trace::new(vec![rec(0)], TraceMeta::default()).unwrap();
        let s = summarize(&t);
        assert_eq!(s.final_gap, 1.5);
        assert_eq!(s.iterations, 0);
        let t = Trace::new((0..5).map(rec).collect(), TraceMeta::default()).unwrap();
        let s = summarize(&t);
        assert_eq!((s.min_beta, s.max_beta), (0.0, 0.0));
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), Just(0.0), Just(-0.0)]
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bitwise(
            rows in proptest::collection::vec(
                (finite(), finite(), finite(), finite(), finite(), finite(), proptest::option::of(finite())),
                1..20,
            )
        ) {
            let records: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(k, (fval, gap, gnorm, alpha, beta, step_norm, dist))| IterationRecord {
                    k: 3 * k,
                    fval, gap, gnorm, alpha, beta, step_norm, dist,
                })
                .collect();
            let t = Trace::new(records.clone(), TraceMeta::default()).unwrap();
            let back = parse_csv(&render_csv(&t), Path::new("mem")).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                prop_assert_eq!(a.k, b.k);
                for (x, y) in [(a.fval, b.fval), (a.gap, b.gap), (a.gnorm, b.gnorm), (a.alpha, b.alpha), (a.beta, b.beta), (a.step_norm, b.step_norm)] {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
                prop_assert_eq!(a.dist.map(f64::to_bits), b.dist.map(f64::to_bits));
            }
        }
    }
}
