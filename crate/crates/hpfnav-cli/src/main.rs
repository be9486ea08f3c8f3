use clap::Parser;
use hpfnav_cli::args::{Cli, Command};
use hpfnav_cli::commands;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are success; anything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => commands::solve_cmd(args),
        Command::Simulate(args) => commands::simulate_cmd(args),
        Command::Compliance(args) => commands::compliance_cmd(args),
        Command::Multi(args) => commands::multi_cmd(args),
        Command::Verify(args) => commands::verify_cmd(args),
        Command::Plot(args) => commands::plot_cmd(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
