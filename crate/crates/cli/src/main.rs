fn main() {
    std::process::exit(robust_snell_cli::run(std::env::args_os()));
}
