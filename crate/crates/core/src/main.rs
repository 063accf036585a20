fn main() {
    std::process::exit(stur_threshold::cli::run(std::env::args_os()));
}
