fn main() {
    std::process::exit(brdyn::cli::run(std::env::args().collect()));
}
