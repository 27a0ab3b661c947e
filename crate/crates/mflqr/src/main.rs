use clap::Parser;
use env_logger::Env;
use mflqr::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(Env::new().filter("MFLQR_LOG")).init();
    let cli = Cli::parse();
    std::process::exit(run(cli));
}
