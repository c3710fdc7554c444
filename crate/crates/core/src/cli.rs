//! Command-line front end. [`dispatch`] is the whole program minus process
//! exit, so tests can drive it with in-memory streams.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::attack::{
    rate_chain, simulate, sweep, Bandwidth, PrefixConvention, SimReport, REPORTED_THRESHOLDS,
};
use crate::classifier::{classify, probe_pair, SimulatedTimingSource};
use crate::config::{resolve_config, RunConfig};
use crate::dram::{bank_collision_probability, collisions_for};
use crate::error::{Error, Result};
use crate::exploit::{
    analyze_key_flip, diff_key_store, parse_key_store, parse_zone, rsa_modulus_hit_probability,
    scan_ocsp, scan_ocsp_serials, scan_zone, KeyEntry, KeyFlipOutcome,
};
use crate::memctrl::PolicyKind;
use crate::report::{write_atomic, Report};

/// Largest modulus whose every bit is analyzed when no flip is pinned down.
const EXHAUSTIVE_MODULUS_BITS: u64 = 128;

#[derive(Debug, Parser)]
#[command(
    name = "netflip",
    version,
    about = "Simulate Rowhammer induced by network packets and rate what the flips buy",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults to $NETFLIP_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here (atomically).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the JSON report on stdout instead of the summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Packet rate, access rate and per-window activations against thresholds.
    Rates(RatesArgs),
    /// Run one end-to-end simulation.
    Simulate(SimulateArgs),
    /// Simulate every (policy, bandwidth) pair of the `[sweep]` grid.
    Sweep(SweepArgs),
    /// Recover the page policy from simulated probe timings.
    Classify(ClassifyArgs),
    /// Bank-collision probability and the hammer profile's bank histogram.
    Banks(BanksArgs),
    /// Exploitability of single-bit flips in DNS zones, OCSP indexes and RSA keys.
    Analyze {
        #[command(subcommand)]
        target: AnalyzeTarget,
    },
}

#[derive(Debug, Args)]
struct AttackOverrides {
    /// Link bandwidth, e.g. 500Mbit.
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    /// Unit prefixes: binary or decimal.
    #[arg(long)]
    prefix: Option<PrefixConvention>,
    /// Frame size in bytes.
    #[arg(long = "frame")]
    frame_bytes: Option<u32>,
}

impl AttackOverrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(b) = self.bandwidth {
            cfg.attack.bandwidth = b;
        }
        if let Some(p) = self.prefix {
            cfg.attack.prefix = p;
        }
        if let Some(f) = self.frame_bytes {
            cfg.attack.frame_bytes = f;
        }
    }
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    attack: AttackOverrides,
    /// Calls per packet of the hammered function; defaults to the profile's.
    #[arg(long)]
    calls: Option<u32>,
    /// Refresh window in ns.
    #[arg(long)]
    window_ns: Option<u64>,
    /// Comma-separated activation thresholds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    attack: AttackOverrides,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Page policy kind: closed, open or adaptive.
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Also write the flips as CSV.
    #[arg(long)]
    flips_csv: Option<PathBuf>,
    /// Also write the recorded DRAM accesses as CSV (see `attack.trace_limit`).
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Simulated seconds per grid point.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    /// Page policy kind of the simulated controller.
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// Also write the single-probe curve as `n,latency` CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BanksArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random addresses.
    #[arg(short, long, default_value_t = 8)]
    k: u64,
    /// Number of banks; defaults to the configured geometry's.
    #[arg(long)]
    banks: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeTarget {
    /// Bitsquats of every record name and MX host in a zone file.
    Dns(AnalyzeArgs),
    /// Status flips (and serial flips) in an OCSP responder index.
    Ocsp(AnalyzeArgs),
    /// Modulus-hit probability and private-key recovery for flipped keys.
    Rsa(RsaArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Input file; defaults to the path in `[exploit]`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Also write the candidates as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RsaArgs {
    #[command(flatten)]
    analyze: AnalyzeArgs,
    /// Earlier snapshot of the listing; changed keys are analyzed.
    #[arg(long)]
    before: Option<PathBuf>,
    /// Analyze only this modulus bit of every key.
    #[arg(long)]
    bit: Option<u32>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status: 0 on success, 1 on failure, 2 on usage errors.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        // the reader went away, e.g. `netflip sweep | head`
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let body = json!({"error": {"kind": error_kind(&e), "message": e.to_string()}});
            let _ = writeln!(stderr, "{body}");
            1
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Ordering { .. } => "ordering",
        Error::Config { .. } => "config",
        Error::Parse { .. } => "parse",
        Error::UnknownFunction(_) => "unknown_function",
        Error::Misuse(_) => "misuse",
        Error::Timing(_) => "timing",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = resolve_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Revalidates after flag overrides.
fn finish_config(cfg: RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn emit(
    common: &Common,
    command: &str,
    cfg: &RunConfig,
    results: impl Serialize,
    stdout: &mut dyn Write,
) -> Result<()> {
    let report = Report::new(command, cfg, results)?;
    if let Some(path) = &common.out {
        report.write_to(path)?;
        if !common.json {
            writeln!(stdout, "report: {}", path.display())?;
        }
    }
    if common.json {
        stdout.write_all(report.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn write_csv(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => Ok(()),
    }
}

fn read_input(arg: Option<&Path>, configured: Option<&Path>, what: &str) -> Result<Vec<u8>> {
    let path = arg.or(configured).ok_or_else(|| {
        Error::InvalidInput(format!(
            "no {what} given (use --in or the [exploit] section)"
        ))
    })?;
    std::fs::read(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read `{}`: {e}", path.display())))
}

fn utf8(bytes: Vec<u8>) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::InvalidInput("input is not UTF-8".into()))
}

fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Rates(a) => rates(a, stdout),
        Command::Simulate(a) => simulate_cmd(a, stdout),
        Command::Sweep(a) => sweep_cmd(a, stdout),
        Command::Classify(a) => classify_cmd(a, stdout),
        Command::Banks(a) => banks(a, stdout),
        Command::Analyze { target } => match target {
            AnalyzeTarget::Dns(a) => analyze_dns(a, stdout),
            AnalyzeTarget::Ocsp(a) => analyze_ocsp(a, stdout),
            AnalyzeTarget::Rsa(a) => analyze_rsa(a, stdout),
        },
    }
}

fn rates(a: RatesArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load(&a.common)?;
    a.attack.apply(&mut cfg);
    if let Some(w) = a.window_ns {
        cfg.refresh.window_ns = w;
    }
    if let Some(t) = a.thresholds {
        cfg.attack.thresholds = t;
    }
    let cfg = finish_config(cfg)?;
    let calls = match a.calls {
        Some(c) => c,
        None => {
            let profile = cfg.attack.base_profile()?;
            profile
                .function(&cfg.attack.hammered_function)
                .ok_or_else(|| Error::UnknownFunction(cfg.attack.hammered_function.clone()))?
                .calls_per_packet
        }
    };
    let thresholds = if cfg.attack.thresholds.is_empty() {
        REPORTED_THRESHOLDS.to_vec()
    } else {
        cfg.attack.thresholds.clone()
    };
    let v = rate_chain(
        cfg.attack.bandwidth,
        cfg.attack.frame_bytes,
        cfg.attack.prefix,
        calls,
        cfg.refresh.window_ns,
        &thresholds,
    );
    if !a.common.json {
        writeln!(stdout, "packets/s: {}", v.packets_per_s)?;
        writeln!(stdout, "accesses/s: {}", v.accesses_per_s)?;
        writeln!(
            stdout,
            "accesses per refresh interval: {}",
            v.accesses_per_refresh_interval
        )?;
        for t in &v.verdicts {
            let word = if t.feasible { "feasible" } else { "infeasible" };
            writeln!(stdout, "threshold {}: {word}", t.threshold)?;
        }
    }
    emit(&a.common, "rates", &cfg, &v, stdout)
}

fn simulate_cmd(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load(&a.common)?;
    a.attack.apply(&mut cfg);
    if let Some(d) = a.duration {
        cfg.attack.duration_s = d;
    }
    if let Some(k) = a.policy {
        cfg.policy = cfg.policy_of_kind(k);
    }
    let cfg = finish_config(cfg)?;
    let report: SimReport = simulate(&cfg.sim_config(), cfg.seed)?;
    write_csv(a.flips_csv.as_deref(), &report.flips_csv())?;
    write_csv(a.trace_csv.as_deref(), &report.access_trace_csv())?;
    if !a.common.json {
        writeln!(
            stdout,
            "packets: {}  windows: {}  flips: {}  flips/hour: {}",
            report.packets,
            report.windows,
            report.flips.len(),
            report.flips_per_hour
        )?;
    }
    emit(&a.common, "simulate", &cfg, &report, stdout)
}

fn sweep_cmd(a: SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load(&a.common)?;
    if let Some(d) = a.duration {
        cfg.attack.duration_s = d;
    }
    let cfg = finish_config(cfg)?;
    let policies: Vec<_> = cfg
        .sweep
        .policies
        .iter()
        .map(|&k| cfg.policy_of_kind(k))
        .collect();
    let points = sweep(
        &cfg.sim_config(),
        &policies,
        &cfg.sweep.bandwidths,
        cfg.seed,
    )?;
    if !a.common.json {
        for p in &points {
            writeln!(
                stdout,
                "{} {}: max activations {}  flips {}",
                p.policy,
                p.bandwidth,
                p.report
                    .window_max_activations
                    .iter()
                    .max()
                    .copied()
                    .unwrap_or(0),
                p.report.flips.len()
            )?;
        }
    }
    emit(&a.common, "sweep", &cfg, &points, stdout)
}

fn classify_cmd(a: ClassifyArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load(&a.common)?;
    if let Some(k) = a.policy {
        cfg.policy = cfg.policy_of_kind(k);
    }
    let cfg = finish_config(cfg)?;
    let (addr_a, addr_b) = probe_pair(&cfg.mapping, &cfg.geometry)?;
    let mut src = SimulatedTimingSource::new(
        cfg.mapping.clone(),
        cfg.geometry.clone(),
        cfg.policy.clone(),
        cfg.timing.clone(),
        cfg.classifier.probe_gap_ns,
    );
    let verdict = classify(&mut src, addr_a, addr_b, &cfg.classifier)?;
    let mut csv = String::from("n,latency\n");
    for p in &verdict.evidence.single_curve {
        csv.push_str(&format!("{},{}\n", p.n, p.latency));
    }
    write_csv(a.csv.as_deref(), &csv)?;
    if !a.common.json {
        writeln!(stdout, "verdict: {}", verdict.kind.as_str())?;
    }
    emit(&a.common, "classify", &cfg, &verdict, stdout)
}

fn banks(a: BanksArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = finish_config(load(&a.common)?)?;
    let banks = a
        .banks
        .unwrap_or_else(|| u64::from(cfg.geometry.total_banks()));
    let probability = bank_collision_probability(a.k, banks);
    let profile = cfg.sim_config().hammer_profile(cfg.seed)?;
    let addresses: Vec<u64> = profile
        .functions
        .iter()
        .flat_map(|f| f.addresses.iter().copied())
        .collect();
    let histogram = collisions_for(&addresses, &cfg.mapping, &cfg.geometry)?;
    if !a.common.json {
        writeln!(
            stdout,
            "P(collision | k={}, banks={banks}) = {probability}",
            a.k
        )?;
    }
    let results = json!({
        "k": a.k,
        "banks": banks,
        "collision_probability": probability,
        "profile_banks": histogram,
    });
    emit(&a.common, "banks", &cfg, results, stdout)
}

fn analyze_dns(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = finish_config(load(&a.common)?)?;
    let text = utf8(read_input(
        a.input.as_deref(),
        cfg.exploit.zone.as_deref(),
        "zone file",
    )?)?;
    let entries = parse_zone(&text)?;
    let candidates = scan_zone(&entries)?;
    let mut csv = String::from("entry,field,original,flipped,offset,bit\n");
    for c in &candidates {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.entry,
            serde_json::to_value(c.field)?.as_str().unwrap_or_default(),
            c.candidate.original,
            c.candidate.flipped,
            c.candidate.offset,
            c.candidate.bit
        ));
    }
    write_csv(a.csv.as_deref(), &csv)?;
    if !a.common.json {
        writeln!(
            stdout,
            "records: {}  bitsquat candidates: {}",
            entries.len(),
            candidates.len()
        )?;
    }
    let results = json!({"entries": entries, "candidates": candidates});
    emit(&a.common, "analyze dns", &cfg, results, stdout)
}

fn analyze_ocsp(a: AnalyzeArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = finish_config(load(&a.common)?)?;
    let db = read_input(
        a.input.as_deref(),
        cfg.exploit.ocsp_index.as_deref(),
        "OCSP index",
    )?;
    let scan = scan_ocsp(&db)?;
    let serials = if cfg.exploit.ocsp_serials {
        scan_ocsp_serials(&db)?
    } else {
        Vec::new()
    };
    let mut csv = String::from("record,serial,offset,bit,original,flipped,class\n");
    for f in scan
        .exploitable
        .iter()
        .chain(&scan.denial_of_service)
        .chain(&serials)
    {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.record,
            f.serial,
            f.candidate.offset,
            f.candidate.bit,
            f.candidate.original,
            f.candidate.flipped,
            serde_json::to_value(f.candidate.class)?
                .as_str()
                .unwrap_or_default()
        ));
    }
    write_csv(a.csv.as_deref(), &csv)?;
    if !a.common.json {
        writeln!(
            stdout,
            "records: {}  revoked->valid: {}  probability per flip: {}",
            scan.records,
            scan.exploitable.len(),
            scan.probability
        )?;
    }
    let results = json!({"scan": scan, "serial_flips": serials});
    emit(&a.common, "analyze ocsp", &cfg, results, stdout)
}

#[derive(Debug, Serialize)]
struct KeyResult {
    user: String,
    modulus_bits: u64,
    outcomes: Vec<KeyFlipOutcome>,
    /// Set when the key was too large to try every bit.
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

fn analyze_rsa(a: RsaArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = finish_config(load(&a.analyze.common)?)?;
    let text = utf8(read_input(
        a.analyze.input.as_deref(),
        cfg.exploit.keys.as_deref(),
        "key listing",
    )?)?;
    let after = parse_key_store(&text)?;
    let before_path = a.before.as_deref().or(cfg.exploit.keys_before.as_deref());
    let budget = &cfg.exploit.factor_budget;
    let rsa_of = |k: &KeyEntry| {
        k.rsa().ok_or_else(|| {
            Error::InvalidInput(format!(
                "key of `{}` is not a decodable ssh-rsa key",
                k.user
            ))
        })
    };

    let mut changed = Vec::new();
    let mut keys = Vec::new();
    if let Some(path) = before_path {
        let before = parse_key_store(&utf8(read_input(Some(path), None, "key listing")?)?)?;
        changed = diff_key_store(&before, &after);
        for c in &changed {
            let Some(bit) = c.modulus_bit else { continue };
            let old = before
                .iter()
                .find(|k| k.user == c.user)
                .expect("diffed key");
            let key = rsa_of(old)?;
            keys.push(KeyResult {
                user: c.user.clone(),
                modulus_bits: key.n.bits(),
                outcomes: vec![analyze_key_flip(&key, bit, budget, cfg.seed)?],
                skipped: None,
            });
        }
    } else {
        for entry in &after {
            let key = rsa_of(entry)?;
            let bits = key.n.bits();
            let (outcomes, skipped) = match a.bit {
                Some(bit) => (vec![analyze_key_flip(&key, bit, budget, cfg.seed)?], None),
                None if bits <= EXHAUSTIVE_MODULUS_BITS => (
                    (0..bits as u32)
                        .map(|bit| analyze_key_flip(&key, bit, budget, cfg.seed))
                        .collect::<Result<_>>()?,
                    None,
                ),
                None => (
                    Vec::new(),
                    Some(format!(
                        "modulus above {EXHAUSTIVE_MODULUS_BITS} bits; pass --bit or --before"
                    )),
                ),
            };
            keys.push(KeyResult {
                user: entry.user.clone(),
                modulus_bits: bits,
                outcomes,
                skipped,
            });
        }
    }
    let hit = rsa_modulus_hit_probability(cfg.exploit.fill_fraction, &cfg.exploit.key_layout);
    let recovered: usize = keys
        .iter()
        .map(|k| k.outcomes.iter().filter(|o| o.is_recovered()).count())
        .sum();
    let mut csv = String::from("user,bit,outcome\n");
    for k in &keys {
        for o in &k.outcomes {
            let (bit, what) = match o {
                KeyFlipOutcome::Recovered { bit, .. } => (bit, "recovered".to_string()),
                KeyFlipOutcome::Infeasible { bit, reason, .. } => (
                    bit,
                    serde_json::to_value(reason)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                ),
            };
            csv.push_str(&format!("{},{bit},{what}\n", k.user));
        }
    }
    write_csv(a.analyze.csv.as_deref(), &csv)?;
    if !a.analyze.common.json {
        writeln!(
            stdout,
            "modulus hit probability: {hit}  keys: {}  recovered private keys: {recovered}",
            keys.len()
        )?;
    }
    let results = json!({
        "modulus_hit_probability": hit,
        "changed": changed,
        "keys": keys,
    });
    emit(&a.analyze.common, "analyze rsa", &cfg, results, stdout)
}
