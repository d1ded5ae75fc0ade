use clap::Parser;
use crone_reset_cli::{main_with, Cli};

fn main() {
    std::process::exit(main_with(Cli::parse()));
}
