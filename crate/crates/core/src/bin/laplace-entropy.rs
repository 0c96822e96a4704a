fn main() {
    std::process::exit(laplace_entropy::cli::run());
}
