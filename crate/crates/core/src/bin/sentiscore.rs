fn main() {
    std::process::exit(sentiscore::cli::run(std::env::args().skip(1)));
}
