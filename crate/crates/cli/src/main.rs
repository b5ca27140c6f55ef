use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = credfolio_cli::dispatch(std::env::args_os(), io::stdin().lock(), &mut io::stdout().lock(), &mut io::stderr());
    ExitCode::from(code as u8)
}
