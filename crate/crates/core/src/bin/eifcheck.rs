use clap::Parser;
use eifcheck::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
