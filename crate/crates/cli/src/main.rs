use clap::Parser;

fn main() {
    let cli = geomvi_cli::Cli::parse();
    std::process::exit(geomvi_cli::run(&cli));
}
