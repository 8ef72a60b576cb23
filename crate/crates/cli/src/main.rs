use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = cocycle_lab_cli::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let outcome = cocycle_lab_cli::run_from_args(std::env::args_os());
    // a closed stdout pipe is not worth a panic
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code)
}
