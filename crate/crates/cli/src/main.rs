use clap::Parser;
use mmchan_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    if let Err(e) = run(&cli, &argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
