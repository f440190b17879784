fn main() {
    std::process::exit(gridscan::cli::run(std::env::args_os()));
}
