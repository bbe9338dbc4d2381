fn main() {
    std::process::exit(catpca::cli::run(std::env::args_os()));
}
