fn main() {
    std::process::exit(arf_core::cli::run(std::env::args_os()));
}
