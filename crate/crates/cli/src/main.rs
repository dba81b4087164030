use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = bspnn_cli::app::Cli::parse();
    if let Err(e) = bspnn_cli::app::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
