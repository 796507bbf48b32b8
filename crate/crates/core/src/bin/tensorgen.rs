fn main() {
    std::process::exit(tensorgen::cli::run(std::env::args_os()));
}
