use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = adalvr_bench::cli::parse_from(std::env::args_os().collect()).and_then(adalvr_bench::cli::execute);
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
