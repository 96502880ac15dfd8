use std::process::ExitCode;

use ionization_cli::{parse_args, run, ParseFailure, RunError};

fn main() -> ExitCode {
    let cfg = match parse_args(std::env::args_os()) {
        Ok(cfg) => cfg,
        Err(ParseFailure::Usage(e)) => {
            // Help and version requests are not errors.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
        Err(ParseFailure::Config(e)) => return fail(RunError::Config(e)),
    };
    match run(&cfg) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} rows -> {} (sha256 {})", manifest.rows, manifest.output.display(), manifest.digest);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
