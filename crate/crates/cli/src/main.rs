fn main() {
    std::process::exit(diamond_cli::run(std::env::args_os()));
}
