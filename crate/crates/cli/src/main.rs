fn main() {
    std::process::exit(erm_cli::run(std::env::args_os()));
}
