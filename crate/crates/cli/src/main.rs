use clap::Parser;

use detmmot_cli::{run, Cli, EXIT_FAILURE};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DETMMOT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("detmmot: could not size the thread pool: {e}");
                std::process::exit(EXIT_FAILURE);
            }
        }
    }
    let code = match run(&cli, &mut std::io::stdout()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("detmmot: {e}");
            e.code
        }
    };
    std::process::exit(code);
}
