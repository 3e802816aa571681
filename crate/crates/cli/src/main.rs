fn main() {
    std::process::exit(tara_cli::run(std::env::args_os()));
}
