fn main() {
    std::process::exit(lidf::cli::main());
}
