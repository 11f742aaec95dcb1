use clap::Parser;

fn main() {
    let cli = eitcorr::cli::Cli::parse();
    std::process::exit(eitcorr::cli::run(cli));
}
