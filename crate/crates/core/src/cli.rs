//! The `bgpsecx` command line: validate, replay, serve and simulate.
//!
//! Exit codes: 0 done, 1 usage or configuration error, 2 unreadable input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::warn;

use crate::bgp::{open_trace, AnnouncementStream, TraceStats};
use crate::federation::daemon::Daemon;
use crate::federation::{FederationClient, IxpId, NoFederation, PeerSet, TcpFederationClient};
use crate::filter::{load_whitelist, merge_cluster, Whitelist};
use crate::model::{AsPath, Asn, IpPrefix, RouteAnnouncement};
use crate::policy::{verdict_log_line, Action, Engine, PolicyConfig};
use crate::rpki::{load_roa_csv, RoaStore};
use crate::sim;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: String,
}

impl CommandOutcome {
    fn ok(summary: String) -> Self {
        CommandOutcome { exit_code: 0, summary }
    }

    fn usage(msg: impl std::fmt::Display) -> Self {
        CommandOutcome { exit_code: 1, summary: format!("error: {msg}") }
    }

    fn unreadable(msg: impl std::fmt::Display) -> Self {
        CommandOutcome { exit_code: 2, summary: format!("error: {msg}") }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bgpsecx", version, about = "BGP hijack defenses for an IXP route server")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one synthetic announcement through the pipeline.
    Validate(ValidateArgs),
    /// Stream an MRT trace through the pipeline.
    Replay(ReplayArgs),
    /// Run the federation daemon.
    Serve(ServeArgs),
    /// Run an attack scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct Stores {
    /// ROA export in CSV form.
    #[arg(long)]
    pub roas: Option<PathBuf>,
    /// Member whitelist; repeat to merge several into a cluster list.
    #[arg(long = "whitelist")]
    pub whitelists: Vec<PathBuf>,
    /// Policy configuration; defaults apply without it.
    #[arg(long)]
    pub policy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, required = true)]
    pub roas: PathBuf,
    #[arg(long = "whitelist")]
    pub whitelists: Vec<PathBuf>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub prefix: String,
    #[arg(long)]
    pub origin: String,
    /// Announcing member; the origin itself when omitted.
    #[arg(long)]
    pub member: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub stores: Stores,
    #[arg(long)]
    pub mrt: PathBuf,
    /// Where to write one JSON verdict per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Query these federation peers on suspicion.
    #[arg(long)]
    pub peers: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub stores: Stores,
    #[arg(long, default_value = "127.0.0.1:17900")]
    pub listen: String,
    #[arg(long)]
    pub peers: PathBuf,
    /// Trace to load into the observation history before serving.
    #[arg(long)]
    pub mrt: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Directory for events.log, metrics.json and metrics.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            CommandOutcome { exit_code: code, summary: e.render().to_string().trim_end().to_owned() }
        }
    }
}

pub fn dispatch(cli: Cli) -> CommandOutcome {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Replay(a) => cmd_replay(&a),
        Command::Serve(a) => cmd_serve(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

//------------ Loading -------------------------------------------------------

fn read_text(path: &Path) -> Result<String, CommandOutcome> {
    std::fs::read_to_string(path).map_err(|e| CommandOutcome::unreadable(format!("{}: {e}", path.display())))
}

fn load_roas(path: Option<&Path>) -> Result<RoaStore, CommandOutcome> {
    let Some(path) = path else { return Ok(RoaStore::new()) };
    let load = load_roa_csv(&read_text(path)?).map_err(|e| CommandOutcome::unreadable(format!("{}: {e}", path.display())))?;
    for row in &load.rejected {
        warn!("{}: skipped {row}", path.display());
    }
    Ok(load.store)
}

fn load_whitelists(paths: &[PathBuf]) -> Result<Whitelist, CommandOutcome> {
    let mut lists = Vec::new();
    for path in paths {
        let wl = load_whitelist(&read_text(path)?).map_err(|e| CommandOutcome::usage(format!("{}: {e}", path.display())))?;
        lists.push(wl);
    }
    Ok(merge_cluster(&lists).unwrap_or_else(|| Whitelist::new("local", 0)))
}

fn load_policy(path: Option<&Path>) -> Result<PolicyConfig, CommandOutcome> {
    match path {
        None => Ok(PolicyConfig::default()),
        Some(path) => PolicyConfig::load(&read_text(path)?).map_err(|e| CommandOutcome::usage(format!("{}: {e}", path.display()))),
    }
}

fn load_peers(path: &Path) -> Result<PeerSet, CommandOutcome> {
    PeerSet::load(&read_text(path)?).map_err(|e| CommandOutcome::usage(format!("{}: {e}", path.display())))
}

fn local_id() -> IxpId {
    IxpId::new("local").expect("valid id")
}

fn engine(local: IxpId, stores: &Stores) -> Result<Engine, CommandOutcome> {
    let roas = load_roas(stores.roas.as_deref())?;
    let wl = load_whitelists(&stores.whitelists)?;
    let config = load_policy(stores.policy.as_deref())?;
    Ok(Engine::new(local, Arc::new(roas), Arc::new(wl), config))
}

//------------ validate ------------------------------------------------------

pub fn cmd_validate(args: &ValidateArgs) -> CommandOutcome {
    let prefix: IpPrefix = match args.prefix.parse() {
        Ok(p) => p,
        Err(e) => return CommandOutcome::usage(format!("--prefix {}: {e}", args.prefix)),
    };
    let origin: Asn = match args.origin.parse() {
        Ok(a) => a,
        Err(e) => return CommandOutcome::usage(format!("--origin {}: {e}", args.origin)),
    };
    let member: Asn = match args.member.as_deref().map(str::parse).transpose() {
        Ok(m) => m.unwrap_or(origin),
        Err(e) => return CommandOutcome::usage(format!("--member: {e}")),
    };
    let stores = Stores { roas: Some(args.roas.clone()), whitelists: args.whitelists.clone(), policy: args.policy.clone() };
    let mut engine = match engine(local_id(), &stores) {
        Ok(e) => e,
        Err(out) => return out,
    };
    let path = if member == origin { vec![origin] } else { vec![member, origin] };
    let ann = RouteAnnouncement::announce(prefix, AsPath::from_sequence(path), member, 0);
    let processed = engine.process(&ann, &mut NoFederation);
    let ev = processed.verdict.evidence.as_ref().expect("announcements carry evidence");

    let mut s = String::new();
    let _ = writeln!(s, "announcement {} via {} path {}", prefix, member, ann.as_path);
    let _ = writeln!(s, "roa {}", ev.roa.state);
    let _ = writeln!(s, "whitelist {}", ev.whitelist);
    for alarm in &ev.anomalies {
        let _ = writeln!(s, "alarm {}", alarm.kind());
    }
    let reasons = processed.verdict.reasons.join(",");
    if reasons.is_empty() {
        let _ = write!(s, "verdict {}", processed.verdict.action);
    } else {
        let _ = write!(s, "verdict {} ({reasons})", processed.verdict.action);
    }
    CommandOutcome::ok(s)
}

//------------ replay --------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReplayCounts {
    pub trace: TraceStats,
    pub accept: u64,
    pub reject: u64,
    pub flag: u64,
}

impl ReplayCounts {
    pub fn render(&self) -> String {
        let t = &self.trace;
        format!(
            "records {}\nskipped {}\nmalformed {}\nannouncements {}\nwithdrawals {}\naccept {}\nreject {}\nflag {}\ntruncated {}",
            t.records,
            t.skipped,
            t.malformed,
            t.announcements,
            t.withdrawals,
            self.accept,
            self.reject,
            self.flag,
            if t.truncated { "yes" } else { "no" }
        )
    }
}

/// Runs every announcement of `trace` through `engine`, writing verdict
/// lines to `log` when given.
pub fn replay_trace(
    engine: &mut Engine,
    trace: impl std::io::Read,
    client: &mut dyn FederationClient,
    mut log: Option<&mut dyn Write>,
) -> std::io::Result<ReplayCounts> {
    let mut counts = ReplayCounts::default();
    let mut stream = AnnouncementStream::new(trace);
    for ann in stream.by_ref() {
        let processed = engine.process(&ann, client);
        if let Some(out) = log.as_deref_mut() {
            writeln!(out, "{}", verdict_log_line(&processed.verdict, processed.directive.as_ref()))?;
        }
        if !ann.is_announce() {
            continue;
        }
        match processed.verdict.action {
            Action::Accept => counts.accept += 1,
            Action::Reject => counts.reject += 1,
            Action::Flag => counts.flag += 1,
        }
    }
    if let Some(e) = stream.take_io_error() {
        return Err(e);
    }
    counts.trace = *stream.stats();
    Ok(counts)
}

pub fn cmd_replay(args: &ReplayArgs) -> CommandOutcome {
    let (mut engine, mut client): (Engine, Box<dyn FederationClient>) = match &args.peers {
        Some(p) => {
            let peers = match load_peers(p) {
                Ok(peers) => peers,
                Err(out) => return out,
            };
            match engine(peers.local.clone(), &args.stores) {
                Ok(e) => (e, Box::new(TcpFederationClient::new(peers))),
                Err(out) => return out,
            }
        }
        None => match engine(local_id(), &args.stores) {
            Ok(e) => (e, Box::new(NoFederation)),
            Err(out) => return out,
        },
    };
    let trace = match open_trace(&args.mrt) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::unreadable(format!("{}: {e}", args.mrt.display())),
    };
    let mut log = match &args.out {
        Some(path) => match File::create(path) {
            Ok(f) => Some(BufWriter::new(f)),
            Err(e) => return CommandOutcome::unreadable(format!("{}: {e}", path.display())),
        },
        None => None,
    };
    let result = replay_trace(&mut engine, trace, client.as_mut(), log.as_mut().map(|w| w as &mut dyn Write));
    if let Some(mut w) = log {
        if let Err(e) = w.flush() {
            return CommandOutcome::unreadable(format!("verdict log: {e}"));
        }
    }
    match result {
        Ok(c) if c.trace.truncated && c.trace.records == 0 => {
            CommandOutcome::unreadable(format!("{}: truncated before the first record", args.mrt.display()))
        }
        Ok(c) => CommandOutcome::ok(c.render()),
        Err(e) => CommandOutcome::unreadable(format!("{}: {e}", args.mrt.display())),
    }
}

//------------ serve ---------------------------------------------------------

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = match signal(SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
                return;
            }
        };
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

pub fn cmd_serve(args: &ServeArgs) -> CommandOutcome {
    let peers = match load_peers(&args.peers) {
        Ok(p) => p,
        Err(out) => return out,
    };
    let mut engine = match engine(peers.local.clone(), &args.stores) {
        Ok(e) => e,
        Err(out) => return out,
    };
    if let Some(path) = &args.mrt {
        let trace = match open_trace(path) {
            Ok(t) => t,
            Err(e) => return CommandOutcome::unreadable(format!("{}: {e}", path.display())),
        };
        if let Err(e) = replay_trace(&mut engine, trace, &mut NoFederation, None) {
            return CommandOutcome::unreadable(format!("{}: {e}", path.display()));
        }
    }
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return CommandOutcome::usage(format!("runtime: {e}")),
    };
    let local = peers.local.clone();
    runtime.block_on(async move {
        let daemon = match Daemon::bind(&args.listen, peers, engine).await {
            Ok(d) => d,
            Err(e) => return CommandOutcome::usage(format!("cannot listen on {}: {e}", args.listen)),
        };
        let addr = daemon.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| args.listen.clone());
        println!("{local} listening on {addr}");
        let _ = std::io::stdout().flush();
        let report = daemon.run(shutdown_signal()).await;
        let s = report.stats;
        CommandOutcome::ok(format!(
            "shutdown\nconnections {}\nframes {}\nauth_failures {}\nreplays {}\nunknown_peers {}\nmalformed {}\nprefixes {}",
            s.connections,
            s.frames,
            s.auth_failures,
            s.replays,
            s.unknown_peers,
            s.malformed,
            report.engine.history().prefix_count()
        ))
    })
}

//------------ simulate ------------------------------------------------------

pub fn cmd_simulate(args: &SimulateArgs) -> CommandOutcome {
    if !args.scenario.exists() {
        return CommandOutcome::unreadable(format!("{}: no such file", args.scenario.display()));
    }
    let scenario = match sim::load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::usage(e),
    };
    let out = sim::run(&scenario);
    let table = sim::render_table(&out.metrics);
    if let Some(dir) = &args.out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("events.log"), out.log.render()))
            .and_then(|_| std::fs::write(dir.join("metrics.json"), sim::render_json(&out.metrics) + "\n"))
            .and_then(|_| std::fs::write(dir.join("metrics.txt"), &table));
        if let Err(e) = written {
            return CommandOutcome::unreadable(format!("{}: {e}", dir.display()));
        }
    }
    CommandOutcome::ok(table.trim_end().to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> CommandOutcome {
        run_from_args(std::iter::once("bgpsecx").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&[]).exit_code, 1);
        assert_eq!(run(&["validate", "--prefix", "10.0.0.0/8", "--origin", "1"]).exit_code, 1);
        assert_eq!(run(&["replay", "-m", "x"]).exit_code, 1);
        assert_eq!(run(&["--help"]).exit_code, 0);
    }

    #[test]
    fn validate_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let roas = dir.path().join("roas.csv");
        std::fs::write(&roas, "ASN,IP Prefix,Max Length,Trust Anchor\nAS65001,10.0.0.0/16,24,ta\n").unwrap();
        let roas = roas.to_str().unwrap();
        let out = run(&["validate", "--roas", roas, "--prefix", "10.0.0.0/40", "--origin", "65001"]);
        assert_eq!(out.exit_code, 1, "{}", out.summary);
        let out = run(&["validate", "--roas", "/nonexistent/roas.csv", "--prefix", "10.0.0.0/16", "--origin", "65001"]);
        assert_eq!(out.exit_code, 2);
        let out = run(&["validate", "--roas", roas, "--prefix", "10.0.0.0/16", "--origin", "AS65001"]);
        assert_eq!(out.exit_code, 0);
        assert!(out.summary.contains("roa Valid"), "{}", out.summary);
    }
}
