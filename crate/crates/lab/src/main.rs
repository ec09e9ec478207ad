use std::process::ExitCode;

fn main() -> ExitCode {
    let code = blpp_lab::cli::main_with(std::env::args_os(), &mut std::io::stdout());
    ExitCode::from(code)
}
