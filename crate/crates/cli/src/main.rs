//! `xvmpc`: secure x-vector extraction from the command line.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{bench, data, dealer, local, party};

#[derive(Parser, Debug)]
#[command(name = "xvmpc", version, about = "Secure x-vector extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random network in the XVW1 format
    GenModel(data::GenModelArgs),
    /// Write random features in the XVF1 format
    GenFeatures(data::GenFeaturesArgs),
    /// Deal correlated randomness for one run
    Dealer(dealer::DealerArgs),
    /// Run one party over TCP
    Party(party::PartyArgs),
    /// Run every party in this process
    Local(local::LocalArgs),
    /// Plaintext double-precision extraction
    Reference(data::ReferenceArgs),
    /// Distance between two XVE1 embeddings
    Compare(data::CompareArgs),
    /// Time and count traffic over several utterance lengths
    Bench(bench::BenchArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenModel(a) => data::gen_model(&a),
        Command::GenFeatures(a) => data::gen_features(&a),
        Command::Dealer(a) => dealer::dealer(&a),
        Command::Party(a) => party::party(&a),
        Command::Local(a) => local::local(&a),
        Command::Reference(a) => data::reference(&a),
        Command::Compare(a) => data::compare(&a),
        Command::Bench(a) => bench::bench(&a),
    }
}

/// Library errors carry their own exit code; anything else is an I/O-class failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<xvmpc_core::Error>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
