fn main() {
    std::process::exit(specquant::cli::run());
}
