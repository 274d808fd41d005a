fn main() {
    std::process::exit(nestnet::cli::run(std::env::args_os()));
}
