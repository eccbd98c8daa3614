use clap::Parser;
use debatesim_cli::{execute, report_parse_error, Cli};

fn main() {
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let code = match Cli::try_parse() {
        Ok(cli) => {
            tracing_subscriber::fmt()
                .with_max_level(cli.global.log_level())
                .with_writer(std::io::stderr)
                .init();
            execute(&cli, &mut out, &mut err)
        }
        Err(e) => report_parse_error(e, &mut out, &mut err),
    };
    std::process::exit(code);
}
