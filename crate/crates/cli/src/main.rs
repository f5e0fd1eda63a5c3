use clap::Parser;
use vdmlab_cli::{main_with, Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = e.print();
                let err = CliError {
                    exit_code: 2,
                    kind: "invalid-input".into(),
                    message: e.kind().to_string(),
                    pointer: None,
                };
                eprintln!("{}", err.to_json());
                std::process::exit(2);
            }
            e.exit();
        }
    };
    std::process::exit(main_with(cli));
}
