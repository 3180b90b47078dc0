fn main() {
    std::process::exit(cmr_cli::run(std::env::args_os()));
}
