fn main() {
    std::process::exit(kinaug::cli::run(std::env::args_os()));
}
