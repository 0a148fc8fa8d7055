fn main() {
    std::process::exit(qdsfluct::cli::run(std::env::args_os()));
}
