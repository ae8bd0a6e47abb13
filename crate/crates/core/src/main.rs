fn main() {
    std::process::exit(csiregion::cli::run(std::env::args_os()));
}
