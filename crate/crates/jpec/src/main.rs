use clap::Parser;

fn main() {
    let cli = jpec::cli::Cli::parse();
    std::process::exit(jpec::cli::run(cli));
}
