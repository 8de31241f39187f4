mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ltrans", version, about = "Eta quotients, Lambert series and L-value transformation checks")]
struct Cli {
    /// Working precision in bits for floating evaluations.
    #[arg(long, global = true, default_value_t = ltrans_core::DEFAULT_PREC)]
    precision: u32,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for `transform-check --random`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate η(it).
    Eta {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-20)]
        eps: f64,
    },
    /// Expand an eta quotient such as "4:2,8:2".
    Qexpand {
        #[arg(long)]
        quotient: String,
        #[arg(long)]
        order: usize,
    },
    /// Expand Σ a(m) b(n) n^{k−1} q^{mn}.
    Lambert {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        k: i64,
        #[arg(long)]
        order: usize,
    },
    /// Check a registry identity exactly (`all` runs the suite).
    Verify {
        #[arg(long)]
        identity: String,
        #[arg(long, default_value_t = 200)]
        order: usize,
    },
    /// Compute L(E32, 2) by one route or all of them.
    Lvalue {
        #[arg(long, default_value = "E32")]
        preset: String,
        #[arg(long, default_value = "all")]
        route: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Compare product and transformed routes for one or more specs.
    TransformCheck(TransformArgs),
}

#[derive(Args, Debug)]
struct TransformArgs {
    /// TOML or JSON spec file.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Also check this many seeded random specs.
    #[arg(long, default_value_t = 0)]
    random: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Largest accepted |product − transformed|.
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("ltrans: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let reports = commands::run(&cli);
    let mut ok = !reports.is_empty();
    for r in &reports {
        ok &= r.passed;
        println!("{}", serde_json::to_string(r).expect("reports serialize"));
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Eta { .. } => "eta",
            Command::Qexpand { .. } => "qexpand",
            Command::Lambert { .. } => "lambert",
            Command::Verify { .. } => "verify",
            Command::Lvalue { .. } => "lvalue",
            Command::TransformCheck(_) => "transform-check",
        }
    }
}
