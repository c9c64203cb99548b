use clap::Parser;

fn main() {
    let cli = mmv2v_cli::Cli::parse();
    if let Err(e) = mmv2v_cli::run(cli) {
        eprintln!("mmv2v: {e}");
        std::process::exit(e.exit_code());
    }
}
