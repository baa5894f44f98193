fn main() {
    std::process::exit(infodyn::cli::run_from(std::env::args_os()));
}
