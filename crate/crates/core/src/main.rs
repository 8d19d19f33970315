fn main() {
    std::process::exit(augmentor::cli::run(std::env::args().collect()));
}
