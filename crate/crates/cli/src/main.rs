use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use edrp_core::analytics::{
    analytic_goodput, brute_force_optimal_b, collision_prob, regret_table, GoodputConfig, ServiceTimeDistribution,
};
use edrp_core::campaign::{self, ConfigFile, DrpOverrides, MacOverrides};
use edrp_core::mlbss::{
    self, cross_validate, export_model, import_model, read_dataset, write_dataset, OrdinalLoss, Scaling, SweepConfig,
    TrainKind,
};
use edrp_core::protocols::ProtocolKind;
use edrp_core::rateless::{roundtrip, BlockSizeMenu};
use edrp_core::Network;

#[derive(Parser)]
#[command(name = "edrp", version, about = "Bulk-data dissemination simulator for multi-hop wireless networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a seeded multi-round campaign for one protocol.
    Run(CampaignArgs),
    /// Run several protocols on identical per-round seeds.
    Compare {
        #[command(flatten)]
        args: CampaignArgs,
        /// Comma-separated protocols; the first is the baseline.
        #[arg(long, value_delimiter = ',', default_value = "drp,edrp")]
        protocols: Vec<String>,
    },
    /// Block-size model pipeline.
    #[command(subcommand)]
    Mlbss(MlbssCmd),
    /// Rateless codec utilities.
    #[command(subcommand)]
    Codec(CodecCmd),
    /// Closed-form collision and goodput calculators.
    #[command(subcommand)]
    Theory(TheoryCmd),
}

#[derive(Args, Clone)]
struct CampaignArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    data_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated block-size menu.
    #[arg(long, value_delimiter = ',')]
    menu: Option<Vec<usize>>,
    /// Use this block size instead of a model.
    #[arg(long)]
    fixed_block: Option<usize>,
    /// Exported model for model-driven protocols.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write the event trace of round 0.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    timeout_s: Option<f64>,
    /// `domain` or `neighbors`.
    #[arg(long)]
    sensing: Option<String>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    /// `inverted` (default) or `literal`.
    #[arg(long)]
    mapping: Option<String>,
    #[arg(long)]
    d_max_ms: Option<f64>,
}

impl CampaignArgs {
    fn resolve(&self) -> Result<campaign::RunConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            network: self.network.clone(),
            protocol: self.protocol.clone(),
            rounds: self.rounds,
            data_len: self.data_len,
            seed: self.seed,
            menu: self.menu.clone(),
            fixed_block: self.fixed_block,
            model: self.model.clone(),
            out_dir: self.out_dir.clone(),
            trace: self.trace.then_some(true),
            timeout_s: self.timeout_s,
            sensing: self.sensing.clone(),
            mac: MacOverrides {
                t_min: self.t_min,
                t_max: self.t_max,
                x: self.x,
                y: self.y,
                mapping: self.mapping.clone(),
                ..Default::default()
            },
            drp: DrpOverrides { d_max_ms: self.d_max_ms, ..Default::default() },
        };
        Ok(file.overlay(flags).resolve()?)
    }
}

#[derive(Subcommand)]
enum MlbssCmd {
    /// Simulate labelled block-size scenarios.
    Gen {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        spread: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit a model; writes the exported model and a per-pass cost log.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// cart, tao-cart or tao-oblique.
        #[arg(long, default_value = "tao-oblique")]
        kind: String,
        #[arg(long, default_value_t = mlbss::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long, default_value_t = mlbss::DEFAULT_PASSES)]
        passes: usize,
        #[arg(long, value_delimiter = ',', default_value = "16,30,47")]
        menu: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Training log; defaults to the model path with a `.log` extension.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// K-fold cross-validated accuracy and cost.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "tao-oblique")]
        kind: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = mlbss::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long, default_value_t = mlbss::DEFAULT_PASSES)]
        passes: usize,
        #[arg(long, value_delimiter = ',', default_value = "16,30,47")]
        menu: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print a model as nested conditionals with its footprint.
    Export {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Encode random bytes, drop blocks, decode and compare.
    Roundtrip {
        #[arg(long, default_value_t = 1000)]
        len: usize,
        #[arg(long, default_value_t = 32)]
        block: usize,
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// Collision probability for a start gap.
    Pc {
        #[arg(long)]
        delta: f64,
        /// Uniform service time `a,b` in ms.
        #[arg(long, value_delimiter = ',')]
        uniform: Option<Vec<f64>>,
        /// File with one service-time sample (ms) per line.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Expected useful, overhead and lost bytes for one block size.
    Goodput {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 1000)]
        data_len: usize,
    },
    /// Best menu size for a channel state, with per-size regret.
    OptimalB {
        #[arg(long)]
        theta: f64,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        menu: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        data_len: usize,
    },
}

/// Writes a line to stdout, propagating errors such as a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("edrp: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = args.resolve()?;
            let report = campaign::run_campaign(&cfg)?;
            let complete = report.rounds.iter().filter(|r| r.complete).count();
            out!(
                "{}: {} rounds, {} complete, mean goodput {:.1} bit/s, mean completion {:.3} s",
                cfg.protocol,
                report.rounds.len(),
                complete,
                report.mean_goodput(),
                report.mean_completion()
            );
            out!("config hash {}", report.config_hash);
            for f in &report.files {
                out!("wrote {}", f.display());
            }
        }
        Cmd::Compare { args, protocols } => {
            let kinds = protocols.iter().map(|p| p.parse::<ProtocolKind>()).collect::<Result<Vec<_>, _>>()?;
            // The protocol field is replaced per run, so a model-driven
            // default must not fail validation before that happens.
            let mut args = args;
            args.protocol.get_or_insert_with(|| kinds[0].name().to_string());
            let cfg = args.resolve()?;
            let report = campaign::compare(&cfg, &kinds)?;
            print!("{}", report.table());
            for f in &report.files {
                out!("wrote {}", f.display());
            }
        }
        Cmd::Mlbss(c) => mlbss_cmd(c)?,
        Cmd::Codec(CodecCmd::Roundtrip { len, block, loss, seed }) => {
            if !(0.0..1.0).contains(&loss) {
                bail!("--loss must lie in [0, 1)");
            }
            let data = campaign::campaign_data(seed, len);
            let r = roundtrip(&data, block, loss, seed, 100_000)?;
            out!(
                "k={} sent={} received={} complete={} exact={} overhead={:.4}",
                r.k,
                r.sent,
                r.received,
                r.complete,
                r.exact,
                r.overhead()
            );
            if !r.exact {
                bail!("round trip did not reproduce the input");
            }
        }
        Cmd::Theory(t) => theory_cmd(t)?,
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<Vec<mlbss::LabeledExample>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let data = read_dataset(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    if data.is_empty() {
        bail!("dataset {} is empty", path.display());
    }
    Ok(data)
}

fn mlbss_cmd(c: MlbssCmd) -> Result<()> {
    match c {
        MlbssCmd::Gen { network, out, count, reps, spread, seed } => {
            let net = Network::load(&network)?;
            let d = SweepConfig::default();
            let cfg = SweepConfig {
                count: count.unwrap_or(d.count),
                reps: reps.unwrap_or(d.reps),
                lq_spread: spread.unwrap_or(d.lq_spread),
                ..d
            };
            let (data, _) = mlbss::generate_dataset(&net, &cfg, seed);
            if data.is_empty() {
                bail!("no labelled scenarios produced");
            }
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(f);
            write_dataset(&mut w, &data)?;
            w.flush()?;
            out!("wrote {} examples to {}", data.len(), out.display());
        }
        MlbssCmd::Train { data, kind, max_depth, passes, menu, out, log } => {
            let kind: TrainKind = kind.parse()?;
            let menu = BlockSizeMenu::new(menu)?;
            let data = load_data(&data)?;
            let loss = OrdinalLoss::from_menu(&menu);
            let scaling = Scaling::standard(mlbss::max_rank(&data));
            let t = mlbss::train(kind, &data, &loss, max_depth, passes, scaling)?;
            let report = export_model(&t.model)?;
            std::fs::write(&out, &report.text).with_context(|| format!("writing {}", out.display()))?;
            let log = log.unwrap_or_else(|| out.with_extension("log"));
            let mut text = String::from("pass,cost\n");
            for (i, c) in t.pass_costs.iter().enumerate() {
                text.push_str(&format!("{i},{c}\n"));
            }
            std::fs::write(&log, text).with_context(|| format!("writing {}", log.display()))?;
            out!(
                "{}: {} nodes, depth {}, footprint {} B, final cost {}",
                kind.name(),
                report.nodes,
                report.depth,
                report.footprint_bytes,
                t.pass_costs.last().copied().unwrap_or(0.0)
            );
            out!("wrote {} and {}", out.display(), log.display());
        }
        MlbssCmd::Eval { data, kind, folds, max_depth, passes, menu, seed } => {
            let kind: TrainKind = kind.parse()?;
            let menu = BlockSizeMenu::new(menu)?;
            let data = load_data(&data)?;
            let loss = OrdinalLoss::from_menu(&menu);
            let scaling = Scaling::standard(mlbss::max_rank(&data));
            let cv = cross_validate(&data, folds, seed, &loss, |d| {
                mlbss::train(kind, d, &loss, max_depth, passes, scaling).map(|t| t.model)
            })?;
            out!(
                "{} {}-fold: accuracy {:.2} ± {:.2} %, mean cost {:.3} ± {:.3}",
                kind.name(),
                folds,
                cv.accuracy_mean * 100.0,
                cv.accuracy_std * 100.0,
                cv.cost_mean,
                cv.cost_std
            );
        }
        MlbssCmd::Export { model } => {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let report = export_model(&import_model(&text)?)?;
            print!("{}", report.text);
            out!("# footprint: {} bytes ({} nodes, depth {})", report.footprint_bytes, report.nodes, report.depth);
        }
    }
    Ok(())
}

fn theory_cmd(t: TheoryCmd) -> Result<()> {
    match t {
        TheoryCmd::Pc { delta, uniform, samples } => {
            if delta < 0.0 {
                bail!("--delta must be non-negative");
            }
            let dist = match (uniform, samples) {
                (Some(u), None) if u.len() == 2 => ServiceTimeDistribution::uniform(u[0], u[1])?,
                (None, Some(p)) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    let xs = text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(|l| l.parse::<f64>().with_context(|| format!("bad sample `{l}`")))
                        .collect::<Result<Vec<_>>>()?;
                    ServiceTimeDistribution::empirical(xs)?
                }
                _ => bail!("give exactly one of --uniform or --samples"),
            };
            out!("{}", collision_prob(&dist, delta));
        }
        TheoryCmd::Goodput { b, theta, data_len } => {
            let cfg = GoodputConfig { data_len, ..Default::default() };
            let m = analytic_goodput(b, theta, &cfg)?;
            out!("b,theta,useful,overhead,loss,goodput");
            out!("{},{},{},{},{},{}", b, theta, m.expected_useful, m.expected_overhead, m.expected_loss, m.goodput());
        }
        TheoryCmd::OptimalB { theta, menu, data_len } => {
            let menu = BlockSizeMenu::new(menu)?;
            let cfg = GoodputConfig { data_len, ..Default::default() };
            let (best, table) = brute_force_optimal_b(&menu, theta, &cfg)?;
            let regrets = regret_table(&menu, theta, &cfg)?;
            out!("b,goodput,regret");
            for (m, r) in table.iter().zip(&regrets) {
                out!("{},{},{}", m.block_size, m.goodput(), r.regret);
            }
            out!("optimal {best}");
        }
    }
    Ok(())
}
