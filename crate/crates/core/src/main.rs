fn main() {
    std::process::exit(orrw::cli::run(std::env::args()));
}
