use clap::Parser;

fn main() {
    let cli = awflow::cli::Cli::parse();
    std::process::exit(awflow::cli::run_cli(cli));
}
