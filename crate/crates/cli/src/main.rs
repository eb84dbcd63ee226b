use clap::Parser;
use propa_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(report) => {
            for m in &report.messages {
                eprintln!("{m}");
            }
            report.exit_code
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {:#}", anyhow::Error::from(e));
            code
        }
    };
    std::process::exit(code);
}
