fn main() {
    std::process::exit(aokr::cli::run());
}
