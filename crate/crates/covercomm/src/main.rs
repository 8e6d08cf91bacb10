fn main() {
    std::process::exit(covercomm::cli::run(std::env::args()) as i32);
}
