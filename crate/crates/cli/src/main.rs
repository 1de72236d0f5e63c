mod args;
mod files;
mod manifest;
mod model;
mod stages;

use std::process::ExitCode;

use chembridge::Error;
use clap::Parser;

use args::{Cli, Command};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) | Error::Format(_) => 2,
        Error::Numeric(_) => 4,
        Error::Io { .. } => 5,
        Error::Data(_)
        | Error::EmptyDataset(_)
        | Error::Smiles(_)
        | Error::Shape(_)
        | Error::InvalidArgument(_)
        | Error::Split(_)
        | Error::NoGroupedQueries { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cli.threads
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        eprintln!("warning: could not size the thread pool: {e}");
    }
    let result = match &cli.command {
        Command::Prepare(a) => stages::prepare(a, threads),
        Command::Fingerprint(a) => stages::fingerprint(a, threads),
        Command::EmbedText(a) => stages::embed_text(a, threads),
        Command::Split(a) => stages::split(a, threads),
        Command::Train(a) => model::train_cmd(a, threads),
        Command::Eval(a) => model::eval_cmd(a, threads),
        Command::Ablate(a) => model::ablate_cmd(a, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chembridge {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
