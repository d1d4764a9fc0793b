fn main() {
    std::process::exit(mmapq::cli::main_from_args());
}
