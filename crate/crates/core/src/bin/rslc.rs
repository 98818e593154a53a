fn main() {
    std::process::exit(rslc::cli::run(std::env::args()));
}
