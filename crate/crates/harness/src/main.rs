fn main() {
    std::process::exit(malibo_harness::cli::run(std::env::args_os()));
}
