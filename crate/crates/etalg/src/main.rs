fn main() {
    std::process::exit(etalg::cli::run());
}
