fn main() {
    std::process::exit(csimap::cli::run(std::env::args_os()));
}
