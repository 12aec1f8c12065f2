fn main() {
    std::process::exit(pmavg_cli::run(std::env::args_os()));
}
