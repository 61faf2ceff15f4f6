//! `gfs`: build, curate and query summary stores from the command line.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::thread;

use clap::{Parser, Subcommand};
use gfs_core::record::ChannelLabel;
use gfs_core::service::{self, Request};
use gfs_core::{compare, container, curation, BinRule, CurationRules, StatisticSet, SummaryRecord};
use serde_json::Value;

const DEFAULT_BUDGET: usize = 64;

// Output is collected and written once so a closed pipe is not an error.
macro_rules! say {
    ($out:expr, $($t:tt)*) => {{
        use std::fmt::Write as _;
        let _ = writeln!($out, $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "gfs", version, about = "Bounded-memory multi-scale summaries of numeric streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Append CSV rows from standard input, creating the store if needed.
    Ingest {
        store: PathBuf,
        /// Slot budget (default: $GFS_BUDGET, else 64).
        #[arg(long)]
        budget: Option<usize>,
        /// Optional statistics for a new store: covariance, hull, swv,
        /// histogram=CHANNEL:LO:HI:BINS.
        #[arg(long, value_delimiter = ',')]
        stats: Vec<String>,
    },
    /// Compact the store to its budget, or to new budgets.
    Compact {
        store: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        /// Ceiling on stored values; statistics are dropped to meet it.
        #[arg(long)]
        values: Option<usize>,
    },
    /// Query the store. Accesses are recorded in the store.
    Query {
        store: PathBuf,
        /// Half-open sample range T0:T1.
        #[arg(long, group = "q")]
        interval: Option<String>,
        /// Comma-separated query vector.
        #[arg(long, group = "q", allow_hyphen_values = true)]
        member: Option<String>,
        /// Box LO1,..,LOd:HI1,..,HId.
        #[arg(long, group = "q", allow_hyphen_values = true)]
        range: Option<String>,
        /// Print the raw JSON result.
        #[arg(long)]
        json: bool,
    },
    /// KL divergences between two stores' aggregates, and a subset verdict.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Verdict threshold in nats (default: A's rule).
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Span report, storage cost, provenance and rules as JSON.
    Inspect { store: PathBuf },
    /// Answer JSON-line requests on a local socket.
    Serve {
        store: PathBuf,
        #[arg(long)]
        socket: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<gfs_core::Error> for Failure {
    fn from(e: gfs_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let res = run(cli.command, &mut out);
    if let Err(e) = io::stdout().lock().write_all(out.as_bytes()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("gfs: {e}");
        }
    }
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("gfs: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("gfs: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command, out: &mut String) -> Outcome {
    match cmd {
        Command::Ingest { store, budget, stats } => ingest(&store, budget, &stats, out),
        Command::Compact { store, budget, values } => {
            let mut rec = load(&store)?;
            if let Some(v) = values {
                rec.rules.budget_values = Some(v);
            }
            let report = match budget {
                Some(b) => rec.set_budget(b)?,
                None => curation::compact(&mut rec)?,
            };
            save(&store, &rec)?;
            say!(out, "merges {} drops {} slots {}/{}", report.merges, report.drops, rec.slots(), rec.budget());
            Ok(())
        }
        Command::Query { store, interval, member, range, json } => {
            let req = query_request(interval, member, range)?;
            let mut rec = load(&store)?;
            let result = service::handle(&mut rec, &req)?;
            save(&store, &rec)?;
            if json {
                say!(out, "{result}");
            } else {
                print_query(&req, &result, out);
            }
            Ok(())
        }
        Command::Compare { a, b, tau } => {
            let ra = load(&a)?;
            let rb = load(&b)?;
            let v = compare::subset_verdict(&ra.aggregate(), &rb.aggregate(), tau.unwrap_or(ra.rules.tau))?;
            say!(out, "KL(A||B) = {} nats", fmt_nats(v.forward));
            say!(out, "KL(B||A) = {} nats", fmt_nats(v.reverse));
            say!(out, "verdict: {}", service::verdict_json(&v)["verdict"].as_str().unwrap_or("?"));
            if !v.note.is_empty() {
                say!(out, "note: {}", v.note);
            }
            Ok(())
        }
        Command::Inspect { store } => {
            let rec = load(&store)?;
            say!(out, "{}", serde_json::to_string_pretty(&service::inspect(&rec)).expect("JSON values serialize"));
            Ok(())
        }
        Command::Serve { store, socket } => serve(store, &socket),
    }
}

fn fmt_nats(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        v.to_string()
    }
}

fn load(path: &Path) -> Outcome<SummaryRecord> {
    let bytes = fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    container::read(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

// write beside the target, then rename, so readers never see a torn file
fn save(path: &Path, rec: &SummaryRecord) -> Outcome {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, container::write(rec))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn default_budget(flag: Option<usize>) -> Outcome<usize> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var("GFS_BUDGET") {
        Ok(v) => v.trim().parse().map_err(|_| Failure::Usage(format!("GFS_BUDGET is not a slot count: {v:?}"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn parse_stats(list: &[String]) -> Outcome<StatisticSet> {
    let mut s = StatisticSet::default();
    for item in list.iter().map(|x| x.trim()).filter(|x| !x.is_empty()) {
        match item.split_once('=') {
            None if item == "covariance" => s.covariance = true,
            None if item == "hull" => s.hull = true,
            None if item == "swv" => s.swv = true,
            Some(("histogram", rule)) => {
                let parts: Vec<&str> = rule.split(':').collect();
                let bad = || Failure::Usage(format!("histogram wants CHANNEL:LO:HI:BINS, got {rule:?}"));
                if parts.len() != 4 {
                    return Err(bad());
                }
                let ch = parts[0].parse().map_err(|_| bad())?;
                let lo = parts[1].parse().map_err(|_| bad())?;
                let hi = parts[2].parse().map_err(|_| bad())?;
                let bins = parts[3].parse().map_err(|_| bad())?;
                s.histogram = Some(BinRule::new(ch, lo, hi, bins).map_err(|e| Failure::Usage(e.to_string()))?);
            }
            _ => return Err(Failure::Usage(format!("unknown statistic {item:?}"))),
        }
    }
    Ok(s)
}

fn parse_label(s: &str) -> Option<ChannelLabel> {
    match s.trim().to_ascii_lowercase().as_str() {
        "observation" | "obs" | "o" => Some(ChannelLabel::Observation),
        "action" | "act" | "a" => Some(ChannelLabel::Action),
        "reward" | "rew" | "r" => Some(ChannelLabel::Reward),
        _ => None,
    }
}

/// `#label` header: one token per channel, either `LABEL` or `NAME:LABEL`.
fn parse_header(line: &str, lineno: usize) -> Outcome<(Vec<String>, Vec<ChannelLabel>)> {
    let body = line.trim_start_matches("#label").trim();
    let mut names = Vec::new();
    let mut labels = Vec::new();
    for (c, tok) in body.split(',').enumerate() {
        let (name, label) = match tok.split_once(':') {
            Some((n, l)) => (n.trim().to_string(), l),
            None => (format!("x{c}"), tok),
        };
        let label =
            parse_label(label).ok_or_else(|| Failure::Data(format!("line {lineno}: unknown channel label {tok:?}")))?;
        names.push(name);
        labels.push(label);
    }
    Ok((names, labels))
}

fn parse_row(line: &str, lineno: usize) -> Outcome<Vec<f64>> {
    line.split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().map_err(|_| Failure::Data(format!("line {lineno}: not a number: {v:?}")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Failure::Data(format!("line {lineno}: non-finite value {v:?}")))
            }
        })
        .collect()
}

fn ingest(store: &Path, budget: Option<usize>, stats: &[String], out: &mut String) -> Outcome {
    let stats = parse_stats(stats)?;
    let mut rec = if store.exists() { Some(load(store)?) } else { None };
    let mut header = None;
    let mut rows = 0u64;
    for (i, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with("#label") {
            header = Some(parse_header(t, lineno)?);
            continue;
        }
        if t.starts_with('#') {
            continue;
        }
        let row = parse_row(t, lineno)?;
        let r = match &mut rec {
            Some(r) => r,
            None => {
                let mut r =
                    SummaryRecord::new(row.len(), stats.clone(), CurationRules::with_budget(default_budget(budget)?))?;
                if let Some((names, labels)) = header.take() {
                    r.set_channel_info(names, labels).map_err(|e| Failure::Data(format!("#label header: {e}")))?;
                }
                rec.insert(r)
            }
        };
        r.ingest(&row).map_err(|e| Failure::Data(format!("line {lineno}: {e}")))?;
        rows += 1;
    }
    let Some(mut rec) = rec else {
        return Err(Failure::Data("no rows on standard input".into()));
    };
    if let Some(b) = budget {
        if b != rec.budget() {
            rec.set_budget(b)?;
        }
    }
    save(store, &rec)?;
    say!(out, "ingested {rows} rows; {} total, slots {}/{}", rec.ingested(), rec.slots(), rec.budget());
    Ok(())
}

fn floats(s: &str) -> Outcome<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse().map_err(|_| Failure::Usage(format!("not a number: {v:?}")))).collect()
}

fn query_request(interval: Option<String>, member: Option<String>, range: Option<String>) -> Outcome<Request> {
    if let Some(iv) = interval {
        let (a, b) = iv.split_once(':').ok_or_else(|| Failure::Usage(format!("--interval wants T0:T1, got {iv:?}")))?;
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|_| Failure::Usage(format!("bad index {x:?}")));
        return Ok(Request::Interval { t0: parse(a)?, t1: parse(b)? });
    }
    if let Some(m) = member {
        return Ok(Request::Member { value: floats(&m)?, fanout: None });
    }
    if let Some(r) = range {
        let (lo, hi) = r.split_once(':').ok_or_else(|| Failure::Usage(format!("--range wants LO:HI, got {r:?}")))?;
        return Ok(Request::Range { lo: floats(lo)?, hi: floats(hi)?, fanout: None });
    }
    Err(Failure::Usage("query needs one of --interval, --member, --range".into()))
}

fn print_query(req: &Request, v: &Value, out: &mut String) {
    match req {
        Request::Interval { .. } => {
            for s in v["samples"].as_array().into_iter().flatten() {
                say!(
                    out,
                    "level {} [{}, {}) n {} mean {}{}",
                    s["level"],
                    s["t_start"],
                    s["t_end"],
                    s["n"],
                    s["mean"],
                    if s["coarse"] == true { " (coarser than the query)" } else { "" }
                );
            }
        }
        Request::Member { .. } => {
            let visited = &v["nodes_visited"];
            if v["absent_certain"] == true {
                say!(out, "absent (certain); {visited} node(s) visited");
            } else {
                say!(out, "possibly present; {visited} node(s) visited; candidates by likelihood:");
                for c in v["candidates"].as_array().into_iter().flatten() {
                    say!(out, "  [{}, {}) likelihood {}", c["t_start"], c["t_end"], c["likelihood"]);
                }
            }
        }
        Request::Range { .. } => say!(out, "between {} and {} samples", v["lower"], v["upper"]),
        _ => say!(out, "{v}"),
    }
}

fn serve(store: PathBuf, socket: &Path) -> Outcome {
    let rec = load(&store)?;
    if socket.exists() {
        fs::remove_file(socket)?;
    }
    let listener = UnixListener::bind(socket)?;
    eprintln!("gfs: serving {} on {}", store.display(), socket.display());
    let shared = Arc::new(Mutex::new(rec));
    for conn in listener.incoming() {
        let conn = match conn {
            Ok(c) => c,
            Err(e) => {
                eprintln!("gfs: accept failed: {e}");
                continue;
            }
        };
        let shared = Arc::clone(&shared);
        let store = store.clone();
        thread::spawn(move || {
            if let Err(e) = serve_connection(conn, &shared, &store) {
                eprintln!("gfs: connection ended: {e}");
            }
        });
    }
    Ok(())
}

// Requests on one connection are answered in order; the lock makes the
// record single-writer across connections.
fn serve_connection(conn: UnixStream, shared: &Mutex<SummaryRecord>, store: &Path) -> io::Result<()> {
    let mut out = conn.try_clone()?;
    for line in BufReader::new(conn).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = {
            let mut rec = shared.lock().unwrap_or_else(|p| p.into_inner());
            let resp = service::handle_line(&mut rec, &line);
            // accesses and ingests both change the record; keep the file current
            if let Err(Failure::Data(e) | Failure::Usage(e)) = save(store, &rec) {
                eprintln!("gfs: could not persist {}: {e}", store.display());
            }
            resp
        };
        out.write_all(resp.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
