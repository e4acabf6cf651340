use clap::Parser;
use limstrain_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!("wrote {} files to {}", report.files.len(), report.out.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
