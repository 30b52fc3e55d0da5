fn main() {
    std::process::exit(chiralcp::cli::run(std::env::args_os()));
}
