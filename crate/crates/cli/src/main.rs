fn main() {
    std::process::exit(crowdalloc_cli::run_cli(std::env::args_os()));
}
