fn main() {
    std::process::exit(logholder::cli::run(std::env::args_os()));
}
