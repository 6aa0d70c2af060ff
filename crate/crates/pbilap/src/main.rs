use clap::Parser;

fn main() {
    let cli = pbilap::cli::Cli::parse();
    std::process::exit(pbilap::cli::run(cli));
}
