fn main() {
    std::process::exit(catgen::cli::run(std::env::args_os()));
}
