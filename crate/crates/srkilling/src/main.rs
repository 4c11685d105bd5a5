fn main() {
    std::process::exit(srkilling::cli::main());
}
