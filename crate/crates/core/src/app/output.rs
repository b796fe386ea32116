//! Report files. Every file is written to a temporary sibling and renamed into
//! place, so readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytics::{hourly_expected_profit, Model};
use crate::{Error, Result, ScenarioSet, SolveReport};

/// Shortest decimal that parses back to the same `f64`. Negative zero prints
/// as `0`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:?}")
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io(path))
}

/// Builds a CSV in memory from a header and rows of preformatted cells.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Solver(format!("csv encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Solver(format!("csv encoding: {e}")))
}

pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)
        .map_err(|e| Error::Solver(format!("json encoding: {e}")))?;
    b.push(b'\n');
    Ok(b)
}

#[derive(Debug, Serialize)]
struct ConsumerSummary {
    consumer: usize,
    cost: f64,
    utility: f64,
    welfare: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    case: &'a str,
    model: &'a str,
    scenarios: usize,
    seed: u64,
    expected_profit: f64,
    revenue: f64,
    cost: f64,
    avg_tariff: f64,
    total_welfare: f64,
    consumers: Vec<ConsumerSummary>,
    max_kkt_residual: f64,
    hourly_expected_profit: Vec<f64>,
    solver: &'a crate::model::SolveMeta,
}

/// Writes `tariffs.csv`, `dispatch.csv`, `consumers.csv` and `summary.json`
/// into `dir`. Returns the written paths.
pub fn write_report(
    dir: &Path,
    case: &str,
    model: Model,
    seed: u64,
    s: &ScenarioSet,
    r: &SolveReport,
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let d = s.dims();
    let mut written = Vec::new();

    let tariffs = csv_bytes(
        &["hour", "tariff"],
        r.tariff
            .p
            .iter()
            .enumerate()
            .map(|(t, p)| vec![(t + 1).to_string(), fmt_num(*p)]),
    )?;
    let mut dispatch_rows = Vec::with_capacity(d.retailer_len());
    for w in 0..d.scenarios {
        for t in 0..d.hours {
            let k = d.r(t, w);
            dispatch_rows.push(vec![
                (w + 1).to_string(),
                (t + 1).to_string(),
                fmt_num(r.retailer.q_spot[k]),
                fmt_num(r.retailer.imbalance[k]),
                fmt_num(r.retailer.abs_imbalance[k]),
            ]);
        }
    }
    let dispatch = csv_bytes(&["scenario", "hour", "q_spot", "imbalance", "y"], dispatch_rows)?;
    let mut consumer_rows = Vec::with_capacity(d.consumer_len());
    for j in 0..d.consumers {
        for w in 0..d.scenarios {
            for t in 0..d.hours {
                let q = r.consumer.q(j, t, w);
                let sh = r.consumer.shift(j, t, w);
                let c = q + sh;
                let u = s.a(j, t, w) * c - 0.5 * s.b(j, t, w) * c * c;
                let welfare = u - r.prices.p[d.r(t, w)] * q;
                consumer_rows.push(vec![
                    (j + 1).to_string(),
                    (w + 1).to_string(),
                    (t + 1).to_string(),
                    fmt_num(q),
                    fmt_num(sh),
                    fmt_num(u),
                    fmt_num(welfare),
                ]);
            }
        }
    }
    let consumers = csv_bytes(
        &["consumer", "scenario", "hour", "q", "shift", "utility", "welfare"],
        consumer_rows,
    )?;
    let summary = Summary {
        case,
        model: model.as_str(),
        scenarios: d.scenarios,
        seed,
        expected_profit: r.expected_profit,
        revenue: r.revenue,
        cost: r.cost,
        avg_tariff: r.average_tariff(),
        total_welfare: r.total_welfare(),
        consumers: (0..d.consumers)
            .map(|j| ConsumerSummary {
                consumer: j + 1,
                cost: r.consumer_cost[j],
                utility: r.utility[j],
                welfare: r.welfare[j],
            })
            .collect(),
        max_kkt_residual: r.max_residual(),
        hourly_expected_profit: hourly_expected_profit(s, r),
        solver: &r.meta,
    };
    for (name, bytes) in [
        ("tariffs.csv", tariffs),
        ("dispatch.csv", dispatch),
        ("consumers.csv", consumers),
        ("summary.json", json_bytes(&summary)?),
    ] {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}
