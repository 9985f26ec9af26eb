use clap::Parser;

use gelato::cli::{run, Cli};
use gelato::GelatoError;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with("GELATO_")).collect();
    let stdout = std::io::stdout();
    if let Err(e) = run(cli, &env, &mut stdout.lock()) {
        let message = e.to_string().replace(['\n', '\t'], " ");
        eprintln!("error\t{}\t{message}", e.kind());
        std::process::exit(if matches!(e, GelatoError::Config(_)) { 2 } else { 1 });
    }
}
