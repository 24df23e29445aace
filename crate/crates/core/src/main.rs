fn main() {
    std::process::exit(thompson_holo::cli::run(std::env::args().collect()));
}
