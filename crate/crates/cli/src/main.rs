use clap::Parser;

fn main() {
    let cli = logdiff_cli::Cli::parse();
    std::process::exit(logdiff_cli::run(cli));
}
