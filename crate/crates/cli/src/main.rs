use clap::Parser;

fn main() {
    let cli = gridcause_cli::Cli::parse();
    match gridcause_cli::run(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
