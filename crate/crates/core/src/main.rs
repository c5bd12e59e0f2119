fn main() {
    std::process::exit(sgdsa::cli::parse_and_run(std::env::args_os()));
}
