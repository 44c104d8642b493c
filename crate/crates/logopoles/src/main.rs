fn main() {
    // Thin wrapper; all logic lives in the library's cli module.
    std::process::exit(logopoles::cli::run());
}
