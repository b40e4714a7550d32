mod cli;
mod report;
mod run;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::{Cli, Format};
use report::Status;

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(Status::UsageError.exit_code()),
            };
        }
    };
    let out = run::execute(&args.command, args.strict);
    report::write_diagnostics(&out, report::color_enabled(args.no_color));
    let mut stdout = std::io::stdout().lock();
    let _ = match args.format {
        Format::Json => stdout.write_all(out.json().as_bytes()),
        Format::Text => stdout.write_all(out.text.as_bytes()),
    };
    let _ = stdout.flush();
    ExitCode::from(out.envelope.status.exit_code())
}
