//! Command line experiments: `budget`, `fig3`, `fig4`, `capacity` and
//! `selftest`, each writing one CSV into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ecc::{bsc_capacity, z_capacity, EccConfig, LdpcCode, ParityCheck, Pipeline, ReedSolomon, ZChannel};
use crate::error::{Error, Result};
use crate::macsim::{
    analytic_collision_prob, simulate_logical, sweep_onus, throughput, Mode, NetworkConfig, NetworkParams, MAX_ONUS,
};
use crate::optics::{link_budget, min_extinction_ratio, run_physical, OpticalParams};
use crate::report::{write_csv, BudgetRow, CapacityRow, CsvKind, Fig3Row, Fig4Row, RunMeta};

/// Reference levels for `budget`, dBm.
pub const BUDGET_REFERENCE: [(&str, f64); 5] = [
    ("tx", 2.0),
    ("splitter1_out", -26.0),
    ("edfa_out", 1.0),
    ("receiver", -27.0),
    ("worst_case_10", -17.0),
];
pub const BUDGET_TOLERANCE_DB: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub onus: Vec<usize>,
    /// Data bits per ONU for `fig4`.
    pub bits: u64,
    /// Monte Carlo slots per BER evaluation for `fig3`.
    pub slots: u64,
    pub targets: Vec<f64>,
    pub capacity_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            jobs: 1,
            out: PathBuf::from("results"),
            onus: vec![16, 32, 48, 64, 80, 96, 104, 112, 119, 128],
            bits: 100_000,
            slots: 1_000_000,
            targets: vec![1e-3, 1e-4, 1e-6],
            capacity_points: 101,
        }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub network: NetworkParams,
    pub ecc: EccConfig,
    pub optics: OpticalParams,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.onus.iter().any(|&n| n == 0 || n > MAX_ONUS) {
            return Err(Error::Config(format!("ONU counts must lie in [1, {MAX_ONUS}]")));
        }
        if e.targets.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Config("BER targets must lie in (0, 1)".into()));
        }
        if e.capacity_points < 2 {
            return Err(Error::Config("capacity grid needs at least 2 points".into()));
        }
        self.ecc.validate()?;
        self.optics.validate()
    }

    /// Network with keys for the largest requested count; smaller counts
    /// use a prefix of the same keys.
    pub fn network(&self, n: usize) -> Result<NetworkConfig> {
        NetworkConfig::new(n, self.network.clone(), self.ecc.clone(), self.experiment.seed)
    }

    fn meta(&self) -> RunMeta {
        RunMeta {
            seed: self.experiment.seed,
            jobs: self.experiment.jobs,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "thcdma", version, about = "Time-hopping optical CDMA network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated ONU counts.
    #[arg(long, global = true, value_delimiter = ',')]
    pub onus: Option<Vec<usize>>,
    /// Data bits per ONU.
    #[arg(long, global = true)]
    pub bits: Option<u64>,
    /// Monte Carlo slots per BER estimate.
    #[arg(long, global = true)]
    pub slots: Option<u64>,
    /// Comma-separated BER targets.
    #[arg(long, global = true, value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
    /// Parallel batches; part of the random stream layout.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power levels of a single pulse through the star.
    Budget,
    /// Minimum extinction ratio over ONU counts and BER targets.
    Fig3,
    /// Logical and physical BER and utilization versus ONU count.
    Fig4,
    /// Z-channel and BSC capacity versus crossover.
    Capacity {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Invariant and oracle checks.
    Selftest {
        /// Parity-check matrix to test instead of the built-in construction.
        #[arg(long)]
        ldpc_matrix: Option<PathBuf>,
    },
}

/// Resolves the file and flag layers into one configuration.
pub fn resolve(o: &Overrides) -> Result<Config> {
    let mut c = match &o.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let e = &mut c.experiment;
    if let Some(v) = o.seed {
        e.seed = v;
    }
    if let Some(v) = &o.out {
        e.out = v.clone();
    }
    if let Some(v) = &o.onus {
        if v.is_empty() {
            return Err(Error::Config("empty ONU list".into()));
        }
        e.onus = v.clone();
    }
    if let Some(v) = o.bits {
        if v == 0 {
            return Err(Error::Config("--bits must be positive".into()));
        }
        e.bits = v;
    }
    if let Some(v) = o.slots {
        if v == 0 {
            return Err(Error::Config("--slots must be positive".into()));
        }
        e.slots = v;
    }
    if let Some(v) = &o.targets {
        e.targets = v.clone();
    }
    if let Some(v) = o.jobs {
        e.jobs = v.max(1);
    }
    if e.onus.is_empty() {
        return Err(Error::Config("empty ONU list".into()));
    }
    c.validate()?;
    Ok(c)
}

/// Experiment outcome: `Ok(true)` when every check or cell succeeded.
type Outcome = Result<bool>;

fn create(config: &Config, kind: CsvKind) -> Result<fs::File> {
    let dir = &config.experiment.out;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(kind.file_name());
    fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_budget(config: &Config, out: &mut dyn Write) -> Outcome {
    let b = link_budget(&config.optics, 10)?;
    let rows = [
        ("tx", b.tx_dbm),
        ("splitter1_out", b.splitter1_out_dbm),
        ("edfa_out", b.edfa_out_dbm),
        ("splitter2_in", b.splitter2_in_dbm),
        ("receiver", b.receiver_dbm),
        ("worst_case_10", b.worst_case_dbm),
    ];
    let w = |e: std::io::Error| Error::Io(e.to_string());
    for (point, dbm) in rows {
        let verdict = match BUDGET_REFERENCE.iter().find(|r| r.0 == point) {
            Some(&(_, r)) if (dbm - r).abs() <= BUDGET_TOLERANCE_DB => format!("PASS (reference {r:+.1} dBm)"),
            Some(&(_, r)) => format!("FAIL (reference {r:+.1} dBm)"),
            None => String::new(),
        };
        writeln!(out, "{point:<14} {dbm:+7.2} dBm  {verdict}").map_err(w)?;
    }
    let sensitive = b.margin_db >= 0.0;
    writeln!(
        out,
        "margin {:+.2} dB over {} dBm sensitivity{}",
        b.margin_db,
        config.optics.pd_sensitivity_dbm,
        if sensitive { "" } else { "  BELOW SENSITIVITY" }
    )
    .map_err(w)?;
    if !b.within_max {
        writeln!(
            out,
            "worst case exceeds the {} dBm PD maximum",
            config.optics.pd_max_power_dbm
        )
        .map_err(w)?;
    }
    let rows: Vec<BudgetRow> = rows
        .iter()
        .map(|&(p, d)| BudgetRow {
            point: p.to_string(),
            dbm: d,
        })
        .collect();
    write_csv(create(config, CsvKind::Budget)?, CsvKind::Budget, config.meta(), &rows)?;
    Ok(sensitive && b.within_max)
}

pub fn cmd_fig3(config: &Config, out: &mut dyn Write) -> Outcome {
    let e = &config.experiment;
    let w = |e: std::io::Error| Error::Io(e.to_string());
    let mut rows = Vec::new();
    let mut all = true;
    for &n in &e.onus {
        let net = config.network(n)?;
        for &target in &e.targets {
            let er = match min_extinction_ratio(&net, &config.optics, target, e.slots, e.seed, e.jobs) {
                Ok(er) => {
                    writeln!(out, "N={n:<4} target={target:<8e} min ER {er:.2} dB").map_err(w)?;
                    Some(er)
                }
                Err(err @ Error::BracketExhausted { .. }) => {
                    writeln!(out, "N={n:<4} target={target:<8e} unreachable: {err}").map_err(w)?;
                    all = false;
                    None
                }
                Err(err) => return Err(err),
            };
            rows.push(Fig3Row {
                n_onus: n,
                target_ber: target,
                min_er_db: er,
            });
        }
    }
    write_csv(create(config, CsvKind::Fig3)?, CsvKind::Fig3, config.meta(), &rows)?;
    Ok(all)
}

pub fn cmd_fig4(config: &Config, out: &mut dyn Write) -> Outcome {
    let e = &config.experiment;
    let w = |e: std::io::Error| Error::Io(e.to_string());
    let max = e.onus.iter().copied().max().unwrap_or(1);
    let net = config.network(max)?;
    let logical = sweep_onus(&net, &e.onus, e.bits, Mode::Coded, e.seed, e.jobs)?;
    let mut rows = Vec::new();
    for r in &logical {
        let phys = run_physical(
            &net.truncated(r.n_onus)?,
            &config.optics,
            e.bits,
            Mode::Coded,
            e.seed,
            e.jobs,
        )?;
        for rep in [r, &phys] {
            writeln!(
                out,
                "N={:<4} {:<8} pre {:.3e} post {:.3e} util {:.4}  ({})",
                rep.n_onus,
                rep.layer,
                rep.pre_ecc_ber(),
                rep.post_ecc_ber().unwrap_or(0.0),
                rep.utilization,
                rep.confidence_note()
            )
            .map_err(w)?;
            rows.push(Fig4Row::from(rep));
        }
    }
    write_csv(create(config, CsvKind::Fig4)?, CsvKind::Fig4, config.meta(), &rows)?;
    Ok(true)
}

pub fn cmd_capacity(config: &Config, points: usize, out: &mut dyn Write) -> Outcome {
    if points < 2 {
        return Err(Error::Config("capacity grid needs at least 2 points".into()));
    }
    let rows = (0..points)
        .map(|i| {
            let p = i as f64 / (points - 1) as f64;
            Ok(CapacityRow {
                p,
                z_capacity: z_capacity(p)?,
                bsc_capacity: bsc_capacity(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mid = rows.iter().find(|r| r.p == 0.5);
    if let Some(r) = mid {
        writeln!(out, "p=0.5: Z {:.4}, BSC {:.4}", r.z_capacity, r.bsc_capacity)
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    write_csv(
        create(config, CsvKind::Capacity)?,
        CsvKind::Capacity,
        config.meta(),
        &rows,
    )?;
    Ok(true)
}

/// One named invariant with a failure description.
pub struct Check {
    pub name: &'static str,
    pub result: std::result::Result<(), String>,
}

fn check(name: &'static str, ok: bool, detail: impl FnOnce() -> String) -> Check {
    Check {
        name,
        result: if ok { Ok(()) } else { Err(detail()) },
    }
}

fn ldpc_checks(ecc: &EccConfig, h: ParityCheck, seed: u64) -> (Vec<Check>, Option<LdpcCode>) {
    let mut checks = Vec::new();
    let wc = ecc.ldpc_col_weight;
    let bad_col = h.col_weights().position(|w| w != wc);
    checks.push(check("ldpc column weight", bad_col.is_none(), || {
        format!(
            "column {} has weight {}, expected {wc}",
            bad_col.unwrap(),
            h.col(bad_col.unwrap()).len()
        )
    }));
    let wr = h.cols() * wc / h.rows().max(1);
    let bad_row = h.row_weights().position(|w| w != wr);
    checks.push(check("ldpc row weight", bad_row.is_none(), || {
        format!(
            "row {} has weight {}, expected {wr}",
            bad_row.unwrap(),
            h.row(bad_row.unwrap()).len()
        )
    }));
    let cycles = h.four_cycles();
    checks.push(check("ldpc no 4-cycles", cycles == 0, || format!("{cycles} 4-cycles")));
    let code = match LdpcCode::from_parity_check(h) {
        Ok(code) => code,
        Err(e) => {
            checks.push(check("ldpc systematic encoder", false, || e.to_string()));
            return (checks, None);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = ZChannel::new(0.05, ecc.miss_prob).expect("valid crossover");
    let (mut syndrome_fail, mut decoded) = (0, 0);
    let trials = 200;
    for _ in 0..trials {
        let data: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let word = code.encode(&data).expect("length matches");
        if !code.parity_check().is_codeword(&word) {
            syndrome_fail += 1;
        }
        let rx: Vec<u8> = word.iter().map(|&b| b | (rng.random_bool(0.05) as u8)).collect();
        if code.decode(&rx, &channel, ecc.max_iter).is_ok_and(|d| d == data) {
            decoded += 1;
        }
    }
    checks.push(check("ldpc encoder syndrome zero", syndrome_fail == 0, || {
        format!("{syndrome_fail} of {trials} codewords fail the parity check")
    }));
    checks.push(check(
        "ldpc decodes Z channel p=0.05",
        decoded * 100 >= trials * 99,
        || format!("{decoded} of {trials} blocks decoded"),
    ));
    (checks, Some(code))
}

/// Runs every check; `ldpc_matrix` replaces the constructed code.
pub fn selftest(config: &Config, ldpc_matrix: Option<&Path>) -> Result<Vec<Check>> {
    let seed = config.experiment.seed;
    let ecc = &config.ecc;
    let h = match ldpc_matrix {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ParityCheck::from_sparse_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => LdpcCode::build(ecc.ldpc_rows, ecc.ldpc_cols, ecc.ldpc_col_weight, ecc.ldpc_seed)?
            .parity_check()
            .clone(),
    };
    let (mut checks, code) = ldpc_checks(ecc, h, seed);

    let rs = ReedSolomon::new(ecc.rs_n, ecc.rs_k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5253);
    let mut rs_fail = 0;
    for _ in 0..100 {
        let data: Vec<u8> = (0..rs.k()).map(|_| rng.random()).collect();
        let mut word = rs.encode(&data)?;
        for pos in rand::seq::index::sample(&mut rng, rs.n(), rs.t()) {
            word[pos] ^= rng.random_range(1..=255u8);
        }
        if rs.decode(&word).map(|d| d.data) != Ok(data) {
            rs_fail += 1;
        }
    }
    checks.push(check("rs corrects t symbol errors", rs_fail == 0, || {
        format!("{rs_fail} of 100 words")
    }));

    if let Some(code) = code {
        let round_trip = Pipeline::with_ldpc(ecc, code).and_then(|p| {
            let data: Vec<u8> = (0..3 * p.granule()).map(|_| rng.random()).collect();
            let clean = ZChannel::new(0.0, ecc.miss_prob)?;
            Ok(p.decode(&p.encode(&data)?, &clean)? == data)
        });
        checks.push(check(
            "pipeline noiseless round trip",
            matches!(round_trip, Ok(true)),
            || format!("{round_trip:?}"),
        ));
    }

    let interior_ok = (1..100).all(|i| {
        let p = i as f64 / 100.0;
        p >= 0.5 || z_capacity(p).unwrap() > bsc_capacity(p).unwrap()
    });
    checks.push(check("capacity Z above BSC", interior_ok, || {
        "Z capacity not above BSC".into()
    }));

    let net = config.network(64)?;
    let sim = simulate_logical(&net, 20_000, Mode::Uncoded, seed, 1)?;
    let again = simulate_logical(&net, 20_000, Mode::Uncoded, seed, 1)?;
    let p = &net.params;
    let exact = analytic_collision_prob(64, p.bloom_k, p.frame_slots, p.p1)?.average_ber(p.p1);
    let rel = (sim.pre_ecc_ber() - exact).abs() / exact;
    checks.push(check("collision oracle N=64 within 10%", rel < 0.1, || {
        format!("simulated {:.4e}, exact {exact:.4e}", sim.pre_ecc_ber())
    }));
    checks.push(check("simulation deterministic", sim.channel == again.channel, || {
        "repeated run differs".into()
    }));
    let t = throughput(&config.network(MAX_ONUS)?);
    checks.push(check(
        "throughput per ONU",
        t.per_onu_bps > 0.0 && t.utilization < 1.0,
        || format!("{t:?}"),
    ));
    Ok(checks)
}

fn cmd_selftest(config: &Config, ldpc_matrix: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let checks = selftest(config, ldpc_matrix)?;
    let w = |e: std::io::Error| Error::Io(e.to_string());
    let mut all = true;
    for c in &checks {
        match &c.result {
            Ok(()) => writeln!(out, "PASS {}", c.name).map_err(w)?,
            Err(detail) => {
                all = false;
                writeln!(out, "FAIL {}: {detail}", c.name).map_err(w)?;
            }
        }
    }
    Ok(all)
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::Domain { .. }
            | Error::Shape { .. }
            | Error::TooManySlots { .. }
            | Error::InvalidTaps(_)
            | Error::KeyTooShort { .. }
            | Error::InvalidHex(_)
    )
}

/// Parses `args` and runs the command. Exit codes: 0 success, 1 failed
/// experiment, 2 usage or configuration error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match resolve(&cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut stdout = std::io::stdout().lock();
    let outcome = match &cli.command {
        Command::Budget => cmd_budget(&config, &mut stdout),
        Command::Fig3 => cmd_fig3(&config, &mut stdout),
        Command::Fig4 => cmd_fig4(&config, &mut stdout),
        Command::Capacity { points } => cmd_capacity(
            &config,
            points.unwrap_or(config.experiment.capacity_points),
            &mut stdout,
        ),
        Command::Selftest { ldpc_matrix } => cmd_selftest(&config, ldpc_matrix.as_deref(), &mut stdout),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
