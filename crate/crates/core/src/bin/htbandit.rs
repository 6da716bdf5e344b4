fn main() {
    std::process::exit(htbandit::cli::main_from_args());
}
