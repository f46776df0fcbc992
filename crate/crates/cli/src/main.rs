fn main() {
    std::process::exit(hazardforge_cli::run(std::env::args().collect()));
}
