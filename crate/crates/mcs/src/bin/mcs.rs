fn main() {
    std::process::exit(mcs::cli::run());
}
