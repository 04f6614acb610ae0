use std::process::ExitCode;

fn main() -> ExitCode {
    linfric::cli::run()
}
