fn main() {
    std::process::exit(rdrop::cli::run(std::env::args_os()));
}
