fn main() {
    std::process::exit(micropump::cli::run(std::env::args_os()));
}
