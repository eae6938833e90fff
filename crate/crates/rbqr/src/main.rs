fn main() {
    std::process::exit(rbqr::cli::run(std::env::args_os()));
}
