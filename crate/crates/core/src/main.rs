fn main() {
    std::process::exit(frontspeed::cli::run(std::env::args()));
}
