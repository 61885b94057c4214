use clap::Parser;
use rydsim_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(execute(&cli));
}
